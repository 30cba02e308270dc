#include "cnca/algorithm.hpp"

#include <cmath>

namespace cnca {

namespace {

constexpr double kSingularCondition = 1e14;

int sample_index(const Eigen::Ref<const Vec>& probs, std::mt19937_64& rng) {
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double acc = 0.0;
    for (int i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return i;
    }
    // rounding left u above the cumulative sum; take the last positive entry
    for (int i = static_cast<int>(probs.size()) - 1; i >= 0; --i)
        if (probs[i] > 0.0) return i;
    return static_cast<int>(probs.size()) - 1;
}

double observe(double mean, double noise, std::mt19937_64& rng) {
    if (noise <= 0.0) return mean;
    return mean + noise * std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
}

}  // namespace

std::string to_string(Variant v) {
    switch (v) {
        case Variant::CAC: return "c-ac";
        case Variant::CNAC: return "c-nac";
        case Variant::CCA: return "c-ca";
        case Variant::CNCA: return "c-nca";
    }
    return "?";
}

Variant parse_variant(const std::string& name) {
    if (name == "c-ac") return Variant::CAC;
    if (name == "c-nac") return Variant::CNAC;
    if (name == "c-ca") return Variant::CCA;
    if (name == "c-nca") return Variant::CNCA;
    throw Error("unknown variant '" + name + "' (expected c-ac, c-nac, c-ca or c-nca)");
}

bool is_natural(Variant v) { return v == Variant::CNAC || v == Variant::CNCA; }

TimescaleOrder timescale_order(Variant v) {
    return v == Variant::CAC || v == Variant::CNAC ? TimescaleOrder::CriticFast : TimescaleOrder::ActorFast;
}

AlgorithmConfig AlgorithmConfig::for_variant(Variant v, ScheduleSet schedules) {
    AlgorithmConfig config;
    config.natural_gradient = is_natural(v);
    config.order = timescale_order(v);
    config.schedules = schedules;
    return config;
}

Vec project_v(const Vec& v, double radius) {
    if (!(radius > 0.0)) throw Error("projection radius must be positive");
    const double norm = v.norm();
    if (norm <= radius) return v;
    return v * (radius / norm);
}

double project_gamma(double y, double cap) {
    if (!(cap > 0.0)) throw Error("multiplier cap must be positive");
    return std::max(0.0, std::min(y, cap));
}

NaturalDirection natural_direction(const Mat& G, const Vec& psi, double delta) {
    Eigen::LLT<Mat> llt(G);
    if (llt.info() != Eigen::Success) throw Error("Fisher estimate is not positive definite");
    Eigen::SelfAdjointEigenSolver<Mat> eig(G, Eigen::EigenvaluesOnly);
    return {llt.solve(delta * psi), 1.0 / eig.eigenvalues().maxCoeff()};
}

LearnerState init(const AlgorithmConfig& config, const Instance& instance, std::uint64_t seed) {
    ScheduleReport report = validate(config.schedules);
    if (!report.ok()) throw Error(report.first_failure());
    if (!(config.projection_radius > 0.0)) throw Error("projection_radius must be positive");
    if (!(config.multiplier_cap > 0.0) || !std::isfinite(config.multiplier_cap))
        throw Error("multiplier_cap must be finite and positive");
    if (!(config.fisher_init > 0.0)) throw Error("fisher_init must be positive");
    if (config.eval_every < 1) throw Error("eval_every must be at least 1");
    if (!(config.cost_noise >= 0.0)) throw Error("cost_noise must be non-negative");
    ValidationReport fv = validate_features(instance.features, instance.model.n_states);
    if (!fv.ok()) throw Error("invalid state features: " + fv.violations.front());
    if (!instance.sa_features || instance.sa_features->n_states != instance.model.n_states ||
        instance.sa_features->n_actions != instance.model.n_actions)
        throw Error("policy features do not match the model");

    const int d = instance.sa_features->dim();
    const int N = instance.model.n_constraints();
    LearnerState st;
    st.theta = Vec::Zero(d);
    st.v = Vec::Zero(instance.features.dim());
    st.L_avg = 0.0;
    st.U = Vec::Zero(N);
    st.gamma = Vec::Zero(N);
    st.G = config.fisher_init * Mat::Identity(d, d);
    st.t = 0;
    st.rng.seed(seed);
    st.current_state = std::uniform_int_distribution<int>(0, instance.model.n_states - 1)(st.rng);
    return st;
}

void advance(LearnerState& st, const Instance& inst, const AlgorithmConfig& cfg) {
    const Cmdp& m = inst.model;
    const int N = m.n_constraints();
    const int s = st.current_state;
    const ScheduleSet& sched = cfg.schedules;
    const bool actor_fast = cfg.order == TimescaleOrder::ActorFast;
    const double actor_step = actor_fast ? sched.a.value_at(st.t) : sched.b.value_at(st.t);
    const double critic_step = actor_fast ? sched.b.value_at(st.t) : sched.a.value_at(st.t);
    const double cost_step = sched.d.value_at(st.t);
    const double multiplier_step = sched.c.value_at(st.t);

    const PolicyParams policy(inst.sa_features, st.theta);
    const Mat psi_all = scores(policy, s);
    const Vec pi = action_probabilities(policy, s);
    const int a = sample_index(pi, st.rng);
    const int next = sample_index(m.transition[s].row(a).transpose(), st.rng);

    const double q = observe(m.cost(s, a), cfg.cost_noise, st.rng);
    Vec h(N);
    for (int k = 0; k < N; ++k) h[k] = observe(m.constraint_costs[k](s, a), cfg.cost_noise, st.rng);

    double relaxed = q;
    for (int k = 0; k < N; ++k) relaxed += st.gamma[k] * (h[k] - m.thresholds[k]);

    const double L_old = st.L_avg;
    st.L_avg = L_old + cost_step * (relaxed - L_old);

    const auto f_s = inst.features.matrix.row(s);
    const auto f_next = inst.features.matrix.row(next);
    const double delta = relaxed - L_old + (f_next - f_s).dot(st.v.transpose());

    st.v = project_v(st.v + critic_step * delta * f_s.transpose(), cfg.projection_radius);

    const Vec psi = psi_all.col(a);
    if (cfg.update_actor) {
        // descent on the Lagrangian: delta * psi estimates its gradient
        if (cfg.natural_gradient) {
            Eigen::LLT<Mat> llt(st.G);
            const Vec diag = llt.matrixLLT().diagonal();
            if (llt.info() != Eigen::Success ||
                std::pow(diag.maxCoeff() / diag.minCoeff(), 2) > kSingularCondition)
                throw Error("Fisher estimate G numerically singular at step " + std::to_string(st.t));
            st.theta -= actor_step * delta * llt.solve(psi);
        } else {
            st.theta -= actor_step * delta * psi;
        }
    }

    const Vec U_old = st.U;
    st.U += actor_step * (h - st.U);
    if (cfg.update_multipliers)
        for (int k = 0; k < N; ++k)
            st.gamma[k] = project_gamma(st.gamma[k] + multiplier_step * (U_old[k] - m.thresholds[k]),
                                        cfg.multiplier_cap);

    st.G = (1.0 - actor_step) * st.G;
    st.G.noalias() += actor_step * psi * psi.transpose();

    st.current_state = next;
    ++st.t;
}

LearnerState step(LearnerState state, const Instance& instance, const AlgorithmConfig& config) {
    advance(state, instance, config);
    return state;
}

MetricsRecord oracle_record(const Instance& inst, const LearnerState& st) {
    return evaluate_record(inst.model, PolicyParams(inst.sa_features, st.theta), inst.features, st.t, st.v,
                           st.L_avg, st.gamma, st.U);
}

RunResult run(const Instance& instance, const AlgorithmConfig& config, long horizon, std::uint64_t seed,
              const EvalHook& hook, const StepObserver& observer) {
    if (horizon < 0) throw Error("horizon must be non-negative");
    RunResult result{{}, init(config, instance, seed), std::nullopt};
    LearnerState& st = result.final_state;

    auto evaluate = [&] {
        if (hook) result.log.push_back(hook(instance, st));
        Eigen::SelfAdjointEigenSolver<Mat> eig(st.G, Eigen::EigenvaluesOnly);
        double lam = 1.0 / eig.eigenvalues().maxCoeff();
        result.lambda_G = std::min(result.lambda_G.value_or(lam), lam);
    };

    if (horizon == 0) return result;
    evaluate();
    while (st.t < horizon) {
        try {
            advance(st, instance, config);
        } catch (const Error& e) {
            throw Error("step " + std::to_string(st.t) + ": " + e.what());
        }
        if (observer) observer(st);
        if (st.t % config.eval_every == 0) evaluate();
    }
    return result;
}

}  // namespace cnca
