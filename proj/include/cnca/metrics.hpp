#pragma once

#include "cnca/cmdp.hpp"
#include "cnca/oracle.hpp"
#include "cnca/policy.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace cnca {

/// One oracle evaluation of the learner at step t.
struct MetricsRecord {
    long t = 0;
    double L_t = 0.0;
    double L_oracle = 0.0;
    double J_oracle = 0.0;
    double y_t = 0.0;      // L_t - L(theta_t, gamma_t)
    double z_sq = 0.0;     // squared distance from v_t to the TD fixed-point set
    double mbar_sq = 0.0;  // ||M_bar(theta_t, v_t, gamma_t)||^2
    Vec gamma;
    Vec U;
    Vec gap;  // G_k(theta_t) - alpha_k
};

using MetricsLog = std::vector<MetricsRecord>;
using FieldGetter = std::function<double(const MetricsRecord&)>;

/// Accepts L_t, L_oracle, J_oracle, y_t, y_sq, z_sq, mbar_sq, gamma_k, U_k, gap_k (k from 1).
FieldGetter field_by_name(const std::string& name);

/// tau_t = max(4, min(floor(t/2), ceil(c_tau ln(1+t)))) by default.
struct TauRule {
    enum class Mode { Logarithmic, Current, Fixed };
    Mode mode = Mode::Logarithmic;
    double c_tau = 10.0;
    long fixed = 0;

    long operator()(long t) const;
    static TauRule current() { return {Mode::Current, 0.0, 0}; }
    static TauRule at(long tau) { return {Mode::Fixed, 0.0, tau}; }
};

/// Mean of the field over records with t in [tau_t, t].
double windowed_mean(const MetricsLog& log, const FieldGetter& field, long t, const TauRule& tau_rule = {});

struct RateFit {
    double t0 = 0.0;
    double t1 = 0.0;
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    int n_points = 0;
};

/// Least-squares slope of log(value) against log(t); needs >= 10 points, all values positive.
RateFit fit_power_law(const std::vector<double>& t, const std::vector<double>& values);
RateFit fit_rate(const MetricsLog& log, const FieldGetter& field, long t_min, long t_max);

/// Oracle-side record for a learner iterate. `v` is the critic vector, `L_t` the running average cost.
MetricsRecord evaluate_record(const Cmdp& model, const PolicyParams& policy, const StateFeatures& features,
                              long t, const Vec& v, double L_t, const Vec& gamma, const Vec& U);

/// ||v - v*||^2 minimized over the solution set of A v + b = 0.
double critic_error_sq(const CriticFixedPoint& fp, const Vec& v);

struct BoundsReport {
    double B = 0.0;
    double U_r = 0.0;
    double Ubar_v = 0.0;
    double lambda_e = 0.0;
    std::optional<double> lambda_G;
    double eps_app = 0.0;
};

/// Empirical constants over a grid of policy parameters, gamma ranging over the corners {0, M}^N.
BoundsReport bounds_report(const Cmdp& model, std::shared_ptr<const SaFeatures> sa_features,
                           const StateFeatures& features, const std::vector<Vec>& theta_grid,
                           double multiplier_cap, std::optional<double> lambda_G = std::nullopt);

/// CSV with header t,L_t,L_oracle,y_t,z_sq,mbar_sq,gamma_1..N,U_1..N,gap_1..N at full precision.
std::string metrics_csv(const MetricsLog& log, int n_constraints);

}  // namespace cnca
