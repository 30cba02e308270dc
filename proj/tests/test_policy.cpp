#include "cnca/envs.hpp"
#include "cnca/policy.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace cnca;
using namespace cnca::testing;

namespace {

Vec random_theta(int d, unsigned seed, double scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, scale);
    Vec th(d);
    for (int i = 0; i < d; ++i) th[i] = n(rng);
    return th;
}

/// One state, two actions with x(s,a0) = e1 and x(s,a1) = 0 in R^2.
std::shared_ptr<const SaFeatures> two_action_features() {
    SaFeatures f;
    f.n_states = 1;
    f.n_actions = 2;
    f.table = Mat::Zero(2, 2);
    f.table(0, 0) = 1.0;
    return shared(f);
}

}  // namespace

TEST_SUITE("policy") {

TEST_CASE("zero parameters give the uniform policy") {
    auto f = shared(make_sa_features(4, 3, SaFeatureKind::Random, 5, 9));
    Mat table = policy_table(zero_policy(f));
    CHECK((table.array() - 1.0 / 3.0).abs().maxCoeff() < 1e-15);
}

TEST_CASE("a log-3 preference gives probabilities 3/4 and 1/4") {
    Vec theta(2);
    theta << std::log(3.0), 0.0;
    Vec p = action_probabilities(PolicyParams(two_action_features(), theta), 0);
    CHECK(p[0] == doctest::Approx(0.75).epsilon(1e-14));
    CHECK(p[1] == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("huge parameters saturate without overflow") {
    auto f = shared(make_sa_features(3, 3, SaFeatureKind::Random, 4, 2));
    Vec theta = 1e6 * random_theta(4, 1);
    Mat table = policy_table(PolicyParams(f, theta));
    CHECK(table.allFinite());
    for (int s = 0; s < 3; ++s) CHECK(table.row(s).maxCoeff() > 1.0 - 1e-9);
}

TEST_CASE("policy table matches a direct softmax") {
    auto f = shared(make_sa_features(5, 3, SaFeatureKind::Random, 4, 7));
    Vec theta = random_theta(4, 3);
    CHECK((policy_table(PolicyParams(f, theta)) - reference_policy(*f, theta)).norm() < 1e-14);
}

TEST_CASE("scores average to zero under the policy") {
    auto f = shared(make_sa_features(5, 4, SaFeatureKind::Random, 6, 11));
    for (unsigned seed = 0; seed < 10; ++seed) {
        PolicyParams pol(f, random_theta(6, seed, 2.0));
        for (int s = 0; s < 5; ++s) {
            Vec p = action_probabilities(pol, s);
            CHECK((scores(pol, s) * p).norm() < 1e-13);
        }
    }
}

TEST_CASE("score at the uniform policy subtracts the mean feature") {
    PolicyParams pol = zero_policy(two_action_features());
    Vec psi = score(pol, 0, 0);
    CHECK(psi[0] == doctest::Approx(0.5));
    CHECK(psi[1] == doctest::Approx(0.0));
}

TEST_CASE("score equals the gradient of the log-probability") {
    auto f = shared(make_sa_features(3, 3, SaFeatureKind::Random, 4, 5));
    const double h = 1e-5;
    for (unsigned seed = 0; seed < 5; ++seed) {
        Vec theta = random_theta(4, seed);
        for (int s = 0; s < 3; ++s)
            for (int a = 0; a < 3; ++a) {
                Vec psi = score(PolicyParams(f, theta), s, a);
                Vec fd(4);
                for (int i = 0; i < 4; ++i) {
                    Vec up = theta, dn = theta;
                    up[i] += h;
                    dn[i] -= h;
                    fd[i] = (std::log(reference_policy(*f, up)(s, a)) - std::log(reference_policy(*f, dn)(s, a))) /
                            (2 * h);
                }
                CHECK((psi - fd).norm() <= 1e-6 * std::max(1.0, psi.norm()));
            }
    }
}

TEST_CASE("softmax is invariant to a per-state shift of the preferences") {
    // tabular features: adding c to every action's parameter in one state leaves that state's policy unchanged
    auto f = shared(make_sa_features(3, 2, SaFeatureKind::Tabular));
    Vec theta = random_theta(6, 8);
    Vec shifted = theta;
    shifted[2] += 4.0;
    shifted[3] += 4.0;
    CHECK((policy_table(PolicyParams(f, theta)) - policy_table(PolicyParams(f, shifted))).norm() < 1e-14);
}

TEST_CASE("a single action has zero Fisher information") {
    Cmdp m = random_model(3, 1, 0, 2);
    auto f = shared(make_sa_features(3, 1, SaFeatureKind::Random, 2, 1));
    CHECK(exact_fisher(PolicyParams(f, random_theta(2, 4)), m).norm() < 1e-15);
}

TEST_CASE("Fisher matrix is symmetric positive semi-definite") {
    for (unsigned seed = 0; seed < 10; ++seed) {
        Cmdp m = random_model(4, 3, 0, seed);
        auto f = shared(make_sa_features(4, 3, SaFeatureKind::Random, 5, seed));
        Mat F = exact_fisher(PolicyParams(f, random_theta(5, seed)), m);
        CHECK((F - F.transpose()).norm() < 1e-14);
        Eigen::SelfAdjointEigenSolver<Mat> eig(F);
        CHECK(eig.eigenvalues().minCoeff() >= -1e-12);
    }
}

TEST_CASE("Fisher matrix matches a Monte-Carlo average over stationary samples") {
    Cmdp m = random_model(3, 2, 0, 21);
    auto f = shared(make_sa_features(3, 2, SaFeatureKind::TabularReduced));
    Vec theta = random_theta(f->dim(), 6);
    Mat probs = reference_policy(*f, theta);
    Vec mu = reference_stationary(reference_chain(m, probs));

    std::mt19937_64 rng(12);
    std::discrete_distribution<int> state(mu.data(), mu.data() + mu.size());
    const int n = 1000000;
    Mat acc = Mat::Zero(f->dim(), f->dim());
    for (int i = 0; i < n; ++i) {
        int s = state(rng);
        Vec p = probs.row(s).transpose();
        int a = std::discrete_distribution<int>(p.data(), p.data() + p.size())(rng);
        Vec mean = Vec::Zero(f->dim());
        for (int b = 0; b < 2; ++b) mean += p[b] * f->row(s, b).transpose();
        Vec psi = f->row(s, a).transpose() - mean;
        acc += psi * psi.transpose();
    }
    acc /= n;
    CHECK((exact_fisher(PolicyParams(f, theta), m) - acc).norm() < 5e-3);
}

TEST_CASE("score bound of tabular features is at most 2 and dominates every score") {
    auto f = shared(make_sa_features(4, 3, SaFeatureKind::Tabular));
    CHECK(score_bound(*f) <= 2.0 + 1e-15);
    std::vector<Vec> grid;
    for (unsigned seed = 0; seed < 5; ++seed) grid.push_back(random_theta(f->dim(), seed, 3.0));
    SmoothnessReport rep = policy_smoothness_audit(*f, grid);
    CHECK(rep.B_hat <= 2.0 + 1e-12);
    CHECK(rep.B_hat <= rep.B_bound + 1e-12);
    CHECK(rep.L_hat.has_value());
}

TEST_CASE("smoothness audit needs two distinct grid points") {
    auto f = shared(make_sa_features(3, 2, SaFeatureKind::Tabular));
    Vec theta = random_theta(f->dim(), 2);
    SmoothnessReport single = policy_smoothness_audit(*f, {theta});
    CHECK_FALSE(single.L_hat.has_value());
    CHECK_FALSE(single.Mm_hat.has_value());
    SmoothnessReport dup = policy_smoothness_audit(*f, {theta, theta});
    CHECK_FALSE(dup.L_hat.has_value());
    SmoothnessReport two = policy_smoothness_audit(*f, {theta, theta, random_theta(f->dim(), 3)});
    REQUIRE(two.L_hat.has_value());
    CHECK(std::isfinite(*two.L_hat));
}

TEST_CASE("tabular-reduced features keep the sampled Fisher window nonsingular") {
    auto f = shared(make_sa_features(2, 2, SaFeatureKind::TabularReduced));
    PolicyParams pol = zero_policy(f);
    CHECK(fisher_window_min_eigenvalue(pol, {{0, 0}, {1, 1}}) > 0.0);
    CHECK(fisher_window_min_eigenvalue(pol, {{0, 0}, {0, 1}}) == doctest::Approx(0.0));
}

}
