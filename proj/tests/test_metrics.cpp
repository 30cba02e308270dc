#include "cnca/envs.hpp"
#include "cnca/metrics.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace cnca;
using namespace cnca::testing;

namespace {

MetricsLog log_of(const std::vector<std::pair<long, double>>& points) {
    MetricsLog log;
    for (auto [t, x] : points) {
        MetricsRecord r;
        r.t = t;
        r.z_sq = x;
        r.gamma = Vec::Constant(1, x);
        r.U = Vec::Zero(1);
        r.gap = Vec::Zero(1);
        log.push_back(r);
    }
    return log;
}

std::vector<double> grid(double t0, double t1, int n) {
    std::vector<double> t;
    for (int i = 0; i < n; ++i) t.push_back(t0 * std::pow(t1 / t0, i / double(n - 1)));
    return t;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("window start follows the logarithmic rule") {
    TauRule rule;
    CHECK(rule(0) == 4);
    CHECK(rule(10) == 5);
    CHECK(rule(100) == 47);  // ceil(10 ln 101) = 47 < 50
    CHECK(rule(100000) == 116);
    CHECK(TauRule::current()(37) == 37);
    CHECK(TauRule::at(3)(1000) == 3);
}

TEST_CASE("windowed mean of a constant is the constant") {
    MetricsLog log;
    for (long t = 0; t <= 200; t += 10) log.push_back(log_of({{t, 0.25}}).front());
    CHECK(windowed_mean(log, field_by_name("z_sq"), 200) == doctest::Approx(0.25));
}

TEST_CASE("degenerate window returns the current record") {
    MetricsLog log = log_of({{1, 5.0}, {2, 6.0}, {3, 7.0}});
    CHECK(windowed_mean(log, field_by_name("z_sq"), 3, TauRule::current()) == 7.0);
}

TEST_CASE("windowed mean over t in [2, 4]") {
    MetricsLog log = log_of({{1, 1.0}, {2, 2.0}, {3, 3.0}, {4, 4.0}, {5, 5.0}});
    CHECK(windowed_mean(log, field_by_name("z_sq"), 4, TauRule::at(2)) == doctest::Approx(3.0));
    CHECK_THROWS_WITH(windowed_mean(log, field_by_name("z_sq"), 4, TauRule::at(10)), doctest::Contains("empty window"));
}

TEST_CASE("field lookup") {
    MetricsRecord r;
    r.y_t = -3.0;
    r.gamma = Vec::Constant(2, 1.5);
    r.U = Vec::Zero(2);
    r.gap = Vec::Constant(2, 0.1);
    CHECK(field_by_name("y_sq")(r) == 9.0);
    CHECK(field_by_name("gamma_2")(r) == 1.5);
    CHECK(field_by_name("gap_1")(r) == 0.1);
    CHECK_THROWS(field_by_name("gamma_0"));
    CHECK_THROWS(field_by_name("gamma_x"));
    CHECK_THROWS(field_by_name("zsq"));
}

TEST_CASE("exact power law fits with unit r-squared") {
    std::vector<double> t = grid(10, 1e5, 40), v;
    for (double x : t) v.push_back(1.0 / x);
    RateFit fit = fit_power_law(t, v);
    CHECK(std::abs(fit.slope + 1.0) < 1e-9);
    CHECK(fit.r2 == doctest::Approx(1.0));
    CHECK(fit.n_points == 40);
}

TEST_CASE("constant series has zero slope") {
    std::vector<double> t = grid(10, 1e5, 20), v(20, 3.0);
    CHECK(std::abs(fit_power_law(t, v).slope) < 1e-12);
}

TEST_CASE("log-squared over root t fits between -1/2 and -0.3") {
    std::vector<double> t = grid(1e3, 1e6, 60), v;
    for (double x : t) v.push_back(std::pow(std::log(x), 2) / std::sqrt(x));
    RateFit fit = fit_power_law(t, v);
    CHECK(fit.slope > -0.5);
    CHECK(fit.slope < -0.3);
    // regressing the closed form directly: slope = -1/2 + 2 cov(ln ln t, ln t)/var(ln t)
    double mx = 0, my = 0;
    for (double x : t) {
        mx += std::log(x) / 60;
        my += std::log(std::log(x)) / 60;
    }
    double sxy = 0, sxx = 0;
    for (double x : t) {
        sxy += (std::log(x) - mx) * (std::log(std::log(x)) - my);
        sxx += (std::log(x) - mx) * (std::log(x) - mx);
    }
    CHECK(fit.slope == doctest::Approx(-0.5 + 2 * sxy / sxx).epsilon(1e-10));
}

TEST_CASE("slope is invariant to scaling the series") {
    std::vector<double> t = grid(1e2, 1e4, 30), v, w;
    for (double x : t) {
        v.push_back(std::pow(x, -0.7) * (1.0 + 0.1 * std::sin(x)));
        w.push_back(42.0 * v.back());
    }
    CHECK(fit_power_law(t, v).slope == doctest::Approx(fit_power_law(t, w).slope).epsilon(1e-12));
}

TEST_CASE("rate fit rejects non-positive values and short series") {
    std::vector<double> t = grid(10, 1e3, 12), v(12, 1.0);
    v[5] = 0.0;
    CHECK_THROWS_WITH(fit_power_law(t, v), doctest::Contains("non-positive value"));
    CHECK_THROWS_WITH(fit_power_law(std::vector<double>(5, 1.0), std::vector<double>(5, 1.0)),
                      doctest::Contains("at least 10"));
}

TEST_CASE("fit_rate restricts to the window") {
    MetricsLog log;
    for (long t = 1; t <= 1000; ++t) log.push_back(log_of({{t, t < 100 ? 1.0 : 1.0 / double(t)}}).front());
    RateFit fit = fit_rate(log, field_by_name("z_sq"), 100, 1000);
    CHECK(fit.slope == doctest::Approx(-1.0));
    CHECK(fit.n_points == 901);
}

TEST_CASE("critic error ignores the kernel direction of a singular A") {
    CriticFixedPoint fp;
    fp.A = Mat::Zero(2, 2);
    fp.A(0, 0) = -1.0;
    fp.rank = 1;
    fp.v_star = Vec::Zero(2);
    Vec v(2);
    v << 0.3, 5.0;
    CHECK(critic_error_sq(fp, v) == doctest::Approx(0.09));
    fp.A(1, 1) = -1.0;
    fp.rank = 2;
    CHECK(critic_error_sq(fp, v) == doctest::Approx(25.09));
}

TEST_CASE("bounds report on unit costs without multipliers") {
    EnvSpec spec;
    spec.n_constraints = 0;
    spec.seed = 4;
    Cmdp m = random_ergodic_cmdp(spec);
    auto sa = shared(make_sa_features(m.n_states, m.n_actions, SaFeatureKind::Tabular));
    std::vector<Vec> thetas{Vec::Zero(sa->dim()), Vec::Constant(sa->dim(), 0.5)};
    BoundsReport r = bounds_report(m, sa, make_features(m, FeatureKind::OneHot, m.n_states, 0), thetas, 10.0);
    CHECK(r.U_r <= 1.0);
    CHECK(r.eps_app < 1e-9);
    CHECK(r.B <= 2.0);
    CHECK_FALSE(r.lambda_G.has_value());
}

TEST_CASE("one-hot features have zero approximation error over any grid") {
    Cmdp m = binding_chain_cmdp(5, 3).model;
    auto sa = shared(make_sa_features(5, 2, SaFeatureKind::TabularReduced));
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0.0, 2.0);
    std::vector<Vec> thetas;
    for (int i = 0; i < 5; ++i) {
        Vec th(sa->dim());
        for (int j = 0; j < th.size(); ++j) th[j] = n(rng);
        thetas.push_back(th);
    }
    CHECK(bounds_report(m, sa, make_features(m, FeatureKind::OneHot, 5, 0), thetas, 3.0).eps_app < 1e-9);
}

TEST_CASE("metrics CSV layout") {
    MetricsLog log = log_of({{0, 0.5}, {100, 0.25}});
    std::string csv = metrics_csv(log, 1);
    std::istringstream in(csv);
    std::string header, row;
    std::getline(in, header);
    CHECK(header == "t,L_t,L_oracle,y_t,z_sq,mbar_sq,gamma_1,U_1,gap_1");
    int rows = 0;
    while (std::getline(in, row)) ++rows;
    CHECK(rows == 2);
    CHECK(csv.find("\n100,0,0,0,0.25,0,0.25,0,0\n") != std::string::npos);
}

TEST_CASE("metrics CSV values round-trip at full precision") {
    MetricsLog log = log_of({{7, 0.1 + 0.2}});
    std::string csv = metrics_csv(log, 1);
    std::string row = csv.substr(csv.find('\n') + 1);
    std::vector<std::string> cells;
    std::stringstream ss(row);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    CHECK(std::stod(cells[4]) == 0.1 + 0.2);
}

}
