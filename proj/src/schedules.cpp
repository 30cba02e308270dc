#include "cnca/schedules.hpp"

#include "cnca/cmdp.hpp"

#include <cmath>
#include <sstream>

namespace cnca {

double StepSchedule::value_at(long t) const {
    if (t < 0) throw Error("step index must be non-negative");
    const double base = coefficient / std::pow(1.0 + static_cast<double>(t), exponent);
    if (kind == ScheduleKind::Power) return base;
    return base * std::sqrt(std::log1p(static_cast<double>(t)));
}

ScheduleSet make_schedule_set(ScheduleMode mode, double nu, double sigma, double beta,
                              const ScheduleCoefficients& k) {
    ScheduleSet set;
    set.mode = mode;
    if (mode == ScheduleMode::Standard) {
        set.a = {ScheduleKind::Power, k.c_a, nu};
        set.b = {ScheduleKind::Power, k.c_b, sigma};
        set.d = {ScheduleKind::Power, k.c_d, nu};
    } else {
        set.a = {ScheduleKind::PowerLog, k.c_a, nu};
        set.b = {ScheduleKind::Power, k.c_b, nu};
        set.d = {ScheduleKind::PowerLog, k.c_d, nu};
    }
    set.c = {ScheduleKind::Power, k.c_c, beta};
    return set;
}

ExponentTriple optimal_exponents(ScheduleMode mode, double delta) {
    if (mode == ScheduleMode::Modified) return {0.5, std::nullopt, 1.0};
    if (!(delta > 0.0)) throw Error("delta must be positive: sigma has to exceed nu strictly");
    return {0.5, 0.5 + delta, 1.0};
}

double ratio_bound(const PolicyBounds& p) {
    const double U_w = 2.0 * p.B * (p.U_v + p.Ubar_v);
    const double G = 2.0 * p.B * (p.U_r + p.U_v);
    return 1.0 / (2.0 * p.B * (p.U_G / p.lambda_G) * (G + U_w) + U_w * p.B);
}

bool ScheduleReport::ok() const {
    for (const auto& c : checks)
        if (!c.passed && !c.advisory) return false;
    return true;
}

std::string ScheduleReport::first_failure() const {
    for (const auto& c : checks)
        if (!c.passed && !c.advisory) return "schedule constraint violated: " + c.name;
    return {};
}

ScheduleReport validate(const ScheduleSet& set, const std::optional<PolicyBounds>& bounds) {
    ScheduleReport report;
    auto check = [&](std::string name, bool passed, std::string message = {}) {
        report.checks.push_back({std::move(name), passed, false, std::move(message)});
    };
    auto fmt = [](double x) {
        std::ostringstream os;
        os << x;
        return os.str();
    };

    for (auto [label, s] : {std::pair{"a", &set.a}, {"b", &set.b}, {"c", &set.c}, {"d", &set.d}}) {
        check(std::string(label) + ": coefficient > 0", s->coefficient > 0.0);
        check(std::string(label) + ": 0 < exponent <= 1", s->exponent > 0.0 && s->exponent <= 1.0);
    }
    check("a and d share kind and exponent", set.a.kind == set.d.kind && set.a.exponent == set.d.exponent);

    const double nu = set.nu(), sigma = set.sigma(), beta = set.beta();
    if (set.mode == ScheduleMode::Standard) {
        check("all schedules are pure powers",
              set.a.kind == ScheduleKind::Power && set.b.kind == ScheduleKind::Power &&
                  set.c.kind == ScheduleKind::Power && set.d.kind == ScheduleKind::Power);
        check("0 < ν < σ < β ≤ 1", 0.0 < nu && nu < sigma && sigma < beta && beta <= 1.0,
              "nu=" + fmt(nu) + " sigma=" + fmt(sigma) + " beta=" + fmt(beta));
        check("2σ < 3ν", 2.0 * sigma < 3.0 * nu, "2sigma=" + fmt(2.0 * sigma) + " 3nu=" + fmt(3.0 * nu));
        check("2σ − ν < β", 2.0 * sigma - nu < beta, "2sigma-nu=" + fmt(2.0 * sigma - nu));
    } else {
        check("modified kinds: a,d power_log; b,c power",
              set.a.kind == ScheduleKind::PowerLog && set.d.kind == ScheduleKind::PowerLog &&
                  set.b.kind == ScheduleKind::Power && set.c.kind == ScheduleKind::Power);
        check("critic exponent equals ν", set.b.exponent == nu);
        check("0.5 ≤ ν < β ≤ 1", 0.5 <= nu && nu < beta && beta <= 1.0,
              "nu=" + fmt(nu) + " beta=" + fmt(beta));
    }

    if (bounds) {
        const double bound = ratio_bound(*bounds);
        const double ratio = set.a.coefficient / set.d.coefficient;
        report.checks.push_back({"c_a/c_d below ratio bound", ratio < bound, true,
                                 "c_a/c_d=" + fmt(ratio) + " bound=" + fmt(bound) + " (estimated constants)"});
    }
    return report;
}

std::string to_string(ScheduleMode mode) { return mode == ScheduleMode::Standard ? "standard" : "modified"; }

ScheduleMode parse_schedule_mode(const std::string& text) {
    if (text == "standard") return ScheduleMode::Standard;
    if (text == "modified") return ScheduleMode::Modified;
    throw Error("unknown schedule mode '" + text + "' (expected standard or modified)");
}

}  // namespace cnca
