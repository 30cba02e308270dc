#pragma once

#include "cnca/cmdp.hpp"
#include "cnca/metrics.hpp"
#include "cnca/policy.hpp"
#include "cnca/schedules.hpp"

#include <functional>
#include <memory>
#include <random>
#include <string>

namespace cnca {

enum class TimescaleOrder { ActorFast, CriticFast };

/// The four learners: {actor-critic, critic-actor} x {vanilla, natural}.
enum class Variant { CAC, CNAC, CCA, CNCA };

std::string to_string(Variant v);
Variant parse_variant(const std::string& name);
bool is_natural(Variant v);
TimescaleOrder timescale_order(Variant v);

struct AlgorithmConfig {
    bool natural_gradient = true;
    TimescaleOrder order = TimescaleOrder::ActorFast;
    ScheduleSet schedules = make_schedule_set(ScheduleMode::Standard, 0.5, 0.52, 1.0);
    double projection_radius = 100.0;  // U_v
    double multiplier_cap = 1000.0;    // M
    double fisher_init = 1.0;          // G(0) = p I
    long eval_every = 100;
    double cost_noise = 0.0;  // half-width of zero-mean uniform noise on observed costs
    bool update_actor = true;
    bool update_multipliers = true;

    static AlgorithmConfig for_variant(Variant v, ScheduleSet schedules);
};

/// Problem data a learner runs on.
struct Instance {
    Cmdp model;
    std::shared_ptr<const SaFeatures> sa_features;
    StateFeatures features;
};

struct LearnerState {
    Vec theta;
    Vec v;
    double L_avg = 0.0;
    Vec U;
    Vec gamma;
    Mat G;
    long t = 0;
    std::mt19937_64 rng;
    int current_state = 0;
};

/// theta = 0, v = 0, L = 0, U = 0, gamma = 0, G = pI, s_0 uniform.
LearnerState init(const AlgorithmConfig& config, const Instance& instance, std::uint64_t seed);

/// One iteration of the three-timescale recursion, in place.
void advance(LearnerState& state, const Instance& instance, const AlgorithmConfig& config);
LearnerState step(LearnerState state, const Instance& instance, const AlgorithmConfig& config);

/// Euclidean-ball projection of the critic.
Vec project_v(const Vec& v, double radius);
/// Clamp to [0, M].
double project_gamma(double y, double cap);

struct NaturalDirection {
    Vec direction;               // delta G^{-1} psi
    double lambda_min_inverse;  // smallest eigenvalue of G^{-1}
};

NaturalDirection natural_direction(const Mat& G, const Vec& psi, double delta);

using EvalHook = std::function<MetricsRecord(const Instance&, const LearnerState&)>;
using StepObserver = std::function<void(const LearnerState&)>;

/// Oracle evaluation at the learner's current (theta, v, gamma).
MetricsRecord oracle_record(const Instance& instance, const LearnerState& state);

struct RunResult {
    MetricsLog log;
    LearnerState final_state;
    std::optional<double> lambda_G;  // min over evaluations of lambda_min(G^{-1})
};

/// Runs `horizon` steps, evaluating at t = 0 and every eval_every steps.
RunResult run(const Instance& instance, const AlgorithmConfig& config, long horizon, std::uint64_t seed,
              const EvalHook& hook = oracle_record, const StepObserver& observer = {});

}  // namespace cnca
