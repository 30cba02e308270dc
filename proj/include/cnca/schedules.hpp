#pragma once

#include <optional>
#include <string>
#include <vector>

namespace cnca {

enum class ScheduleKind { Power, PowerLog };
enum class ScheduleMode { Standard, Modified };

/// c/(1+t)^e, or c sqrt(ln(1+t))/(1+t)^e for the log-modified kind.
struct StepSchedule {
    ScheduleKind kind = ScheduleKind::Power;
    double coefficient = 1.0;
    double exponent = 1.0;

    double value_at(long t) const;
};

struct ScheduleCoefficients {
    double c_a = 0.1;
    double c_b = 0.5;
    double c_c = 0.05;
    double c_d = 1.0;
};

/// a: actor, b: critic, c: Lagrange multipliers, d: average-cost tracker.
struct ScheduleSet {
    StepSchedule a;
    StepSchedule b;
    StepSchedule c;
    StepSchedule d;
    ScheduleMode mode = ScheduleMode::Standard;

    double nu() const { return a.exponent; }
    double sigma() const { return b.exponent; }
    double beta() const { return c.exponent; }
};

/// Standard: a,d ~ t^-nu, b ~ t^-sigma, c ~ t^-beta. Modified: a,d carry sqrt(log), b ~ t^-nu.
/// `sigma` is ignored in modified mode.
ScheduleSet make_schedule_set(ScheduleMode mode, double nu, double sigma, double beta,
                              const ScheduleCoefficients& coefficients = {});

struct ExponentTriple {
    double nu = 0.5;
    std::optional<double> sigma;
    double beta = 1.0;
};

constexpr double kDefaultDelta = 0.02;

/// (0.5, 0.5 + delta, 1) for standard, (0.5, -, 1) for modified. delta must be positive in standard mode.
ExponentTriple optimal_exponents(ScheduleMode mode, double delta = kDefaultDelta);

/// Empirical estimates of the constants in the c_a/c_d ratio bound.
struct PolicyBounds {
    double B = 0.0;
    double lambda_G = 0.0;
    double U_r = 0.0;
    double U_v = 0.0;
    double Ubar_v = 0.0;
    double U_G = 0.0;
};

struct ScheduleCheck {
    std::string name;
    bool passed = false;
    bool advisory = false;
    std::string message;
};

struct ScheduleReport {
    std::vector<ScheduleCheck> checks;
    /// True when every non-advisory check passed.
    bool ok() const;
    /// First failing non-advisory check, formatted for error messages.
    std::string first_failure() const;
};

ScheduleReport validate(const ScheduleSet& set, const std::optional<PolicyBounds>& bounds = std::nullopt);

/// 1 / (2B (U_G/lambda_G)(G + U_w) + U_w B) with U_w = 2B(U_v + Ubar_v), G = 2B(U_r + U_v).
double ratio_bound(const PolicyBounds& bounds);

std::string to_string(ScheduleMode mode);
ScheduleMode parse_schedule_mode(const std::string& text);

}  // namespace cnca
