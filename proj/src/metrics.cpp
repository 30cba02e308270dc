#include "cnca/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace cnca {

namespace {

int field_index(const std::string& name, const std::string& prefix) {
    std::string digits = name.substr(prefix.size());
    if (digits.empty() || !std::all_of(digits.begin(), digits.end(), ::isdigit))
        throw Error("unknown metrics field '" + name + "'");
    int k = std::stoi(digits);
    if (k < 1) throw Error("metrics field indices start at 1: '" + name + "'");
    return k - 1;
}

std::string num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace

FieldGetter field_by_name(const std::string& name) {
    if (name == "L_t") return [](const MetricsRecord& r) { return r.L_t; };
    if (name == "L_oracle") return [](const MetricsRecord& r) { return r.L_oracle; };
    if (name == "J_oracle") return [](const MetricsRecord& r) { return r.J_oracle; };
    if (name == "y_t") return [](const MetricsRecord& r) { return r.y_t; };
    if (name == "y_sq") return [](const MetricsRecord& r) { return r.y_t * r.y_t; };
    if (name == "z_sq") return [](const MetricsRecord& r) { return r.z_sq; };
    if (name == "mbar_sq") return [](const MetricsRecord& r) { return r.mbar_sq; };
    for (std::string prefix : {"gamma_", "U_", "gap_"}) {
        if (name.rfind(prefix, 0) != 0) continue;
        int k = field_index(name, prefix);
        if (prefix == "gamma_") return [k](const MetricsRecord& r) { return r.gamma[k]; };
        if (prefix == "U_") return [k](const MetricsRecord& r) { return r.U[k]; };
        return [k](const MetricsRecord& r) { return r.gap[k]; };
    }
    throw Error("unknown metrics field '" + name + "'");
}

long TauRule::operator()(long t) const {
    switch (mode) {
        case Mode::Current:
            return t;
        case Mode::Fixed:
            return fixed;
        case Mode::Logarithmic:
            break;
    }
    long log_window = static_cast<long>(std::ceil(c_tau * std::log1p(static_cast<double>(t))));
    return std::max(4L, std::min(t / 2, log_window));
}

double windowed_mean(const MetricsLog& log, const FieldGetter& field, long t, const TauRule& tau_rule) {
    const long tau = tau_rule(t);
    double sum = 0.0;
    long count = 0;
    for (const auto& r : log)
        if (r.t >= tau && r.t <= t) {
            sum += field(r);
            ++count;
        }
    if (count == 0) throw Error("empty window [" + std::to_string(tau) + ", " + std::to_string(t) + "]");
    return sum / static_cast<double>(count);
}

RateFit fit_power_law(const std::vector<double>& t, const std::vector<double>& values) {
    if (t.size() != values.size()) throw Error("rate fit: mismatched series lengths");
    if (t.size() < 10) throw Error("rate fit needs at least 10 points, got " + std::to_string(t.size()));
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!(values[i] > 0.0)) throw Error("rate fit: non-positive value at t=" + num(t[i]));
        if (!(t[i] > 0.0)) throw Error("rate fit: non-positive time " + num(t[i]));
    }
    const double n = static_cast<double>(t.size());
    std::vector<double> x(t.size()), y(t.size());
    std::transform(t.begin(), t.end(), x.begin(), [](double v) { return std::log(v); });
    std::transform(values.begin(), values.end(), y.begin(), [](double v) { return std::log(v); });
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) throw Error("rate fit: all time points coincide");
    RateFit fit;
    fit.t0 = *std::min_element(t.begin(), t.end());
    fit.t1 = *std::max_element(t.begin(), t.end());
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r2 = syy == 0.0 ? 1.0 : std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0);
    fit.n_points = static_cast<int>(x.size());
    return fit;
}

RateFit fit_rate(const MetricsLog& log, const FieldGetter& field, long t_min, long t_max) {
    std::vector<double> t, v;
    for (const auto& r : log)
        if (r.t >= t_min && r.t <= t_max) {
            t.push_back(static_cast<double>(r.t));
            v.push_back(field(r));
        }
    RateFit fit = fit_power_law(t, v);
    fit.t0 = static_cast<double>(t_min);
    fit.t1 = static_cast<double>(t_max);
    return fit;
}

double critic_error_sq(const CriticFixedPoint& fp, const Vec& v) {
    Vec z = v - fp.v_star;
    if (fp.rank < fp.A.cols()) {
        Eigen::JacobiSVD<Mat> svd(fp.A, Eigen::ComputeFullV);
        const int d = static_cast<int>(fp.A.cols());
        Mat kernel = svd.matrixV().rightCols(d - fp.rank);
        z -= kernel * (kernel.transpose() * z);
    }
    return z.squaredNorm();
}

MetricsRecord evaluate_record(const Cmdp& model, const PolicyParams& policy, const StateFeatures& features,
                              long t, const Vec& v, double L_t, const Vec& gamma, const Vec& U) {
    MetricsRecord r;
    r.t = t;
    r.L_t = L_t;
    const Mat pi = policy_table(policy);
    LagrangianValue lv = lagrangian_cost(model, pi, gamma);
    r.L_oracle = lv.L;
    r.J_oracle = lv.J;
    r.y_t = L_t - lv.L;
    r.z_sq = critic_error_sq(critic_fixed_point(model, pi, gamma, features), v);
    r.mbar_sq = m_bar(model, policy, v, gamma, features).squaredNorm();
    r.gamma = gamma;
    r.U = U;
    r.gap = lv.G - model.thresholds;
    return r;
}

BoundsReport bounds_report(const Cmdp& model, std::shared_ptr<const SaFeatures> sa_features,
                           const StateFeatures& features, const std::vector<Vec>& grid,
                           double multiplier_cap, std::optional<double> lambda_G) {
    if (grid.empty()) throw Error("bounds report needs a non-empty parameter grid");
    BoundsReport report;
    report.B = policy_smoothness_audit(*sa_features, grid).B_hat;
    report.lambda_G = lambda_G;
    report.lambda_e = std::numeric_limits<double>::infinity();

    const int N = model.n_constraints();
    std::vector<Vec> corners;
    for (long mask = 0; mask < (1L << N); ++mask) {
        Vec g(N);
        for (int k = 0; k < N; ++k) g[k] = (mask >> k) & 1 ? multiplier_cap : 0.0;
        corners.push_back(g);
    }
    for (const Vec& g : corners)
        report.U_r = std::max(report.U_r, relaxed_cost_table(model, g).cwiseAbs().maxCoeff());

    const Vec zero = Vec::Zero(N);
    for (const Vec& theta : grid) {
        PolicyParams pol(sa_features, theta);
        const Mat pi = policy_table(pol);
        for (const Vec& g : corners)
            report.Ubar_v = std::max(report.Ubar_v, differential_value(model, pi, g).cwiseAbs().maxCoeff());
        CriticFixedPoint fp = critic_fixed_point(model, pi, zero, features);
        report.lambda_e = std::min(report.lambda_e, fp.lambda_e);
        for (const Vec& g : corners)
            report.eps_app = std::max(report.eps_app, approximation_error(model, pol, g, features));
    }
    return report;
}

std::string metrics_csv(const MetricsLog& log, int n) {
    std::string out = "t,L_t,L_oracle,y_t,z_sq,mbar_sq";
    for (const char* prefix : {"gamma_", "U_", "gap_"})
        for (int k = 1; k <= n; ++k) out += "," + std::string(prefix) + std::to_string(k);
    out += "\n";
    for (const auto& r : log) {
        out += std::to_string(r.t);
        for (double x : {r.L_t, r.L_oracle, r.y_t, r.z_sq, r.mbar_sq}) out += "," + num(x);
        for (const Vec* vec : {&r.gamma, &r.U, &r.gap})
            for (int k = 0; k < n; ++k) out += "," + num((*vec)[k]);
        out += "\n";
    }
    return out;
}

}  // namespace cnca
