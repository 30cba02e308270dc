#include "cnca/cmdp.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace cnca;
using namespace cnca::testing;

namespace {

Mat mat2(double a, double b, double c, double d) {
    Mat P(2, 2);
    P << a, b, c, d;
    return P;
}

bool mentions(const ValidationReport& r, const std::string& text) {
    for (const auto& v : r.violations)
        if (v.find(text) != std::string::npos) return true;
    return false;
}

/// Two states, two actions: action 0 stays with prob 0.9, action 1 moves with prob 0.7.
Cmdp two_by_two() {
    Cmdp m;
    m.n_states = 2;
    m.n_actions = 2;
    Mat s0(2, 2), s1(2, 2);
    s0 << 0.9, 0.1, 0.3, 0.7;
    s1 << 0.2, 0.8, 0.7, 0.3;
    m.transition = {s0, s1};
    m.cost = Mat::Zero(2, 2);
    m.thresholds = Vec::Zero(0);
    return m;
}

}  // namespace

TEST_SUITE("cmdp") {

TEST_CASE("validate accepts a well-formed model") {
    Cmdp m = chain_model(mat2(0.5, 0.5, 0.5, 0.5));
    CHECK(validate_cmdp(m).ok());
}

TEST_CASE("validate reports a row that does not sum to one") {
    Cmdp m = chain_model(mat2(0.6, 0.6, 0.5, 0.5));
    ValidationReport r = validate_cmdp(m);
    CHECK_FALSE(r.ok());
    CHECK(mentions(r, "row sum"));
}

TEST_CASE("validate reports a negative cost") {
    Cmdp m = chain_model(mat2(0.5, 0.5, 0.5, 0.5));
    m.cost(0, 0) = -1.0;
    ValidationReport r = validate_cmdp(m);
    CHECK(mentions(r, "negative cost"));
}

TEST_CASE("validate reports costs above the bound and non-positive thresholds") {
    Cmdp m = random_model(3, 2, 1, 4);
    m.cost(1, 1) = 2.0;
    m.thresholds[0] = 0.0;
    ValidationReport r = validate_cmdp(m);
    CHECK(mentions(r, "exceeds bound"));
    CHECK(mentions(r, "threshold"));
}

TEST_CASE("induced chain of a deterministic policy selects one action slice") {
    Cmdp m = two_by_two();
    Mat probs(2, 2);
    probs << 1, 0, 1, 0;
    Mat P = induced_chain(m, probs);
    for (int s = 0; s < 2; ++s) CHECK((P.row(s) - m.transition[s].row(0)).norm() == doctest::Approx(0.0));
}

TEST_CASE("induced chain of the uniform policy averages the action slices") {
    Cmdp m = two_by_two();
    Mat probs = Mat::Constant(2, 2, 0.5);
    Mat P = induced_chain(m, probs);
    for (int s = 0; s < 2; ++s) {
        Vec expected = 0.5 * (m.transition[s].row(0) + m.transition[s].row(1)).transpose();
        CHECK((P.row(s).transpose() - expected).norm() < 1e-15);
    }
}

TEST_CASE("induced chain matches a hand computation") {
    Cmdp m = two_by_two();
    Mat probs(2, 2);
    probs << 0.25, 0.75, 0.6, 0.4;
    Mat P = induced_chain(m, probs);
    // state 0: 0.25*[0.9,0.1] + 0.75*[0.3,0.7]; state 1: 0.6*[0.2,0.8] + 0.4*[0.7,0.3]
    CHECK(P(0, 0) == doctest::Approx(0.45));
    CHECK(P(0, 1) == doctest::Approx(0.55));
    CHECK(P(1, 0) == doctest::Approx(0.40));
    CHECK(P(1, 1) == doctest::Approx(0.60));
}

TEST_CASE("induced chain rejects a mismatched policy table") {
    CHECK_THROWS_AS(induced_chain(two_by_two(), Mat::Constant(3, 2, 0.5)), Error);
}

TEST_CASE("induced chains are row-stochastic on random models") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (unsigned seed = 0; seed < 20; ++seed) {
        Cmdp m = random_model(6, 3, 1, seed);
        Mat probs(6, 3);
        for (int s = 0; s < 6; ++s) {
            for (int a = 0; a < 3; ++a) probs(s, a) = u(rng);
            probs.row(s) /= probs.row(s).sum();
        }
        Mat P = induced_chain(m, probs);
        CHECK((P.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
        CHECK((P - reference_chain(m, probs)).norm() < 1e-14);
    }
}

TEST_CASE("stationary distribution of symmetric chains is uniform") {
    for (const Mat& P : {mat2(0.5, 0.5, 0.5, 0.5), mat2(0.9, 0.1, 0.1, 0.9)}) {
        Vec mu = stationary_distribution(P).mu;
        CHECK(mu[0] == doctest::Approx(0.5).epsilon(1e-14));
        CHECK(mu[1] == doctest::Approx(0.5).epsilon(1e-14));
    }
}

TEST_CASE("stationary distribution of an asymmetric chain agrees with power iteration") {
    Mat P = mat2(0.5, 0.5, 0.2, 0.8);
    Vec mu = stationary_distribution(P).mu;
    Vec ref = reference_stationary(P);
    CHECK(std::abs(mu[0] - 2.0 / 7.0) < 1e-12);
    CHECK(std::abs(mu[1] - 5.0 / 7.0) < 1e-12);
    CHECK((mu - ref).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("stationary distribution solves mu P = mu on random chains") {
    for (unsigned seed = 0; seed < 20; ++seed) {
        Mat P = induced_chain(random_model(8, 1, 0, seed), Mat::Ones(8, 1));
        Vec mu = stationary_distribution(P).mu;
        CHECK((P.transpose() * mu - mu).lpNorm<Eigen::Infinity>() < 1e-13);
        CHECK(mu.sum() == doctest::Approx(1.0));
        CHECK((mu - reference_stationary(P)).lpNorm<Eigen::Infinity>() < 1e-10);
    }
}

TEST_CASE("reducible and periodic chains have no unique stationary distribution") {
    Mat reducible = mat2(1, 0, 0, 1);
    Mat periodic = mat2(0, 1, 1, 0);
    CHECK_FALSE(is_irreducible(reducible));
    CHECK(chain_period(periodic) == 2);
    CHECK_THROWS_WITH_AS(stationary_distribution(reducible), doctest::Contains("no unique stationary distribution"),
                         Error);
    CHECK_THROWS_WITH_AS(stationary_distribution(periodic), doctest::Contains("no unique stationary distribution"),
                         Error);
}

TEST_CASE("mixing profile of a one-step mixing chain") {
    Mat P = mat2(0.5, 0.5, 0.5, 0.5);
    MixingProfile prof = mixing_profile(P, stationary_distribution(P), 5);
    CHECK(prof.distances[1] < 1e-15);
    CHECK(prof.mixing);
}

TEST_CASE("mixing profile follows the second eigenvalue") {
    // eigenvalues 1 and 0.8: P^t(0,0) = (1 + 0.8^t)/2, so the distance from either start is 0.8^t / 2
    Mat P = mat2(0.9, 0.1, 0.1, 0.9);
    MixingProfile prof = mixing_profile(P, stationary_distribution(P), 30);
    for (int tau = 0; tau <= 30; ++tau) CHECK(prof.distances[tau] == doctest::Approx(0.5 * std::pow(0.8, tau)));
    CHECK(prof.k == doctest::Approx(0.8).epsilon(1e-6));
    CHECK(prof.mixing);
}

TEST_CASE("mixing distances are non-increasing on lazy random chains") {
    for (unsigned seed = 0; seed < 10; ++seed) {
        Mat P = induced_chain(random_model(5, 1, 0, seed), Mat::Ones(5, 1));
        P = 0.5 * (P + Mat::Identity(5, 5));
        MixingProfile prof = mixing_profile(P, stationary_distribution(P), 40);
        for (std::size_t t = 1; t < prof.distances.size(); ++t)
            CHECK(prof.distances[t] <= prof.distances[t - 1] + 1e-15);
    }
}

TEST_CASE("feature validation flags long rows and rank deficiency") {
    StateFeatures ok{Mat::Identity(3, 3)};
    CHECK(validate_features(ok, 3).ok());
    StateFeatures long_row{Mat::Identity(3, 3) * 1.5};
    CHECK(mentions(validate_features(long_row, 3), "norm exceeds 1"));
    Mat r1(3, 2);
    r1 << 0.5, 0.5, 0.2, 0.2, 0.1, 0.1;
    CHECK(mentions(validate_features(StateFeatures{r1}, 3), "full column rank"));
    CHECK_FALSE(validate_features(ok, 4).ok());
}

}
