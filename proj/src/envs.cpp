#include "cnca/envs.hpp"

#include "cnca/oracle.hpp"

#include <cmath>
#include <random>

namespace cnca {

namespace {

Vec flat_dirichlet(int n, std::mt19937_64& rng) {
    std::exponential_distribution<double> draw(1.0);
    Vec x(n);
    for (int i = 0; i < n; ++i) x[i] = draw(rng);
    return x / x.sum();
}

// rho floor on every entry; rows still sum to 1 exactly up to rounding
Vec floor_row(const Vec& base, double rho) {
    const int n = static_cast<int>(base.size());
    Vec row = Vec::Constant(n, rho) + (1.0 - rho * n) * base;
    return row / row.sum();
}

Mat deterministic_table(const std::vector<int>& actions, int n_actions) {
    Mat pi = Mat::Zero(static_cast<int>(actions.size()), n_actions);
    for (std::size_t s = 0; s < actions.size(); ++s) pi(static_cast<int>(s), actions[s]) = 1.0;
    return pi;
}

double constraint_value(const Cmdp& m, const Mat& pi, int k) {
    return lagrangian_cost(m, pi, Vec::Zero(m.n_constraints())).G[k];
}

}  // namespace

DeterministicOptimum optimal_deterministic_policy(const Cmdp& model, const Mat& cost, bool minimize) {
    const double sign = minimize ? 1.0 : -1.0;
    Cmdp scratch = model;
    scratch.cost = sign * cost;
    scratch.constraint_costs.clear();
    scratch.thresholds = Vec();
    const Vec no_gamma = Vec();

    std::vector<int> actions(model.n_states, 0);
    for (int s = 0; s < model.n_states; ++s) scratch.cost.row(s).minCoeff(&actions[s]);

    for (int iter = 0; iter < 1000; ++iter) {
        Mat pi = deterministic_table(actions, model.n_actions);
        Vec h = differential_value(scratch, pi, no_gamma);
        bool changed = false;
        for (int s = 0; s < model.n_states; ++s) {
            Vec q = scratch.cost.row(s).transpose() + model.transition[s] * h;
            int best = 0;
            q.minCoeff(&best);
            if (q[best] < q[actions[s]] - 1e-12) {
                actions[s] = best;
                changed = true;
            }
        }
        if (!changed) {
            DeterministicOptimum opt;
            opt.policy = pi;
            opt.gain = sign * lagrangian_cost(scratch, pi, no_gamma).J;
            return opt;
        }
    }
    throw Error("policy iteration did not converge");
}

Cmdp random_ergodic_cmdp(const EnvSpec& spec) {
    if (spec.n_states < 1 || spec.n_actions < 1 || spec.n_constraints < 0)
        throw Error("random_ergodic: sizes must be positive");
    if (!(spec.min_transition_prob > 0.0) || spec.min_transition_prob * spec.n_states >= 1.0)
        throw Error("random_ergodic: need 0 < rho and rho * n_states < 1");
    if (!(spec.cost_bound > 0.0)) throw Error("random_ergodic: cost_bound must be positive");

    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Cmdp m;
    m.n_states = spec.n_states;
    m.n_actions = spec.n_actions;
    m.cost_bound = spec.cost_bound;
    for (int s = 0; s < m.n_states; ++s) {
        Mat rows(m.n_actions, m.n_states);
        for (int a = 0; a < m.n_actions; ++a)
            rows.row(a) = floor_row(flat_dirichlet(m.n_states, rng), spec.min_transition_prob).transpose();
        m.transition.push_back(rows);
    }
    auto cost_table = [&] {
        Mat c(m.n_states, m.n_actions);
        for (int s = 0; s < m.n_states; ++s)
            for (int a = 0; a < m.n_actions; ++a) c(s, a) = spec.cost_bound * unit(rng);
        return c;
    };
    m.cost = cost_table();
    for (int k = 0; k < spec.n_constraints; ++k) m.constraint_costs.push_back(cost_table());

    m.thresholds = Vec::Zero(spec.n_constraints);
    for (int k = 0; k < spec.n_constraints; ++k) {
        double lo = optimal_deterministic_policy(m, m.constraint_costs[k], true).gain;
        double hi = optimal_deterministic_policy(m, m.constraint_costs[k], false).gain;
        m.thresholds[k] = 0.5 * (lo + hi);
        if (!(m.thresholds[k] > 0.0)) m.thresholds[k] = 0.5 * spec.cost_bound;
    }
    return m;
}

BindingChain binding_chain_cmdp(int n, std::uint64_t seed) {
    if (n < 3) throw Error("binding_chain needs at least 3 states");
    constexpr double rho = 0.01;
    constexpr int kSafe = 0, kShortcut = 1;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(-0.01, 0.01);

    Cmdp m;
    m.n_states = n;
    m.n_actions = 2;
    m.cost_bound = 1.0;
    // Both actions drift toward the far end; the shortcut drifts slightly faster.
    // Cost differences are nearly state-independent so that at the balancing
    // multiplier every state is close to indifferent and the constrained
    // optimum keeps all action probabilities away from 0.
    for (int s = 0; s < n; ++s) {
        Mat rows = Mat::Zero(2, n);
        const int right = s + 1 < n ? s + 1 : 0;
        const int left = std::max(s - 1, 0);
        rows(kSafe, right) += 0.45;
        rows(kSafe, s) += 0.35;
        rows(kSafe, left) += 0.2;
        rows(kShortcut, right) += 0.5;
        rows(kShortcut, s) += 0.35;
        rows(kShortcut, left) += 0.15;
        for (int a = 0; a < 2; ++a) rows.row(a) = floor_row(rows.row(a).transpose(), rho).transpose();
        m.transition.push_back(rows);
    }

    m.cost = Mat(n, 2);
    Mat h(n, 2);
    for (int s = 0; s < n; ++s) {
        const double base = 0.2 + 0.4 * s / (n - 1.0);
        m.cost(s, kSafe) = std::clamp(base + 0.1 + jitter(rng), 0.0, 1.0);
        m.cost(s, kShortcut) = std::clamp(base + jitter(rng), 0.0, 1.0);
        h(s, kSafe) = std::clamp(0.1 + jitter(rng), 0.0, 1.0);
        h(s, kShortcut) = std::clamp(0.5 + jitter(rng), 0.0, 1.0);
    }
    m.constraint_costs.push_back(h);
    m.thresholds = Vec::Ones(1);  // placeholder until the extremes are known

    BindingChain out;
    out.info.greedy_policy = optimal_deterministic_policy(m, m.cost, true).policy;
    out.info.greedy_G = constraint_value(m, out.info.greedy_policy, 0);
    out.info.safe_G = constraint_value(m, deterministic_table(std::vector<int>(n, kSafe), 2), 0);
    out.info.alpha = 0.5 * (out.info.greedy_G + out.info.safe_G);
    out.info.margin_low = out.info.alpha - out.info.safe_G;
    out.info.margin_high = out.info.greedy_G - out.info.alpha;
    m.thresholds[0] = out.info.alpha;
    out.model = std::move(m);
    return out;
}

StateFeatures make_features(const Cmdp& model, FeatureKind kind, int d1, std::uint64_t seed) {
    const int n = model.n_states;
    if (d1 < 1) throw Error("feature dimension must be positive");
    if (d1 > n) throw Error("feature dimension d1 exceeds the number of states");
    if (kind == FeatureKind::OneHot) {
        if (d1 != n) throw Error("one_hot features require d1 == n_states");
        return {Mat::Identity(n, n)};
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Mat raw(n, d1);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d1; ++j) raw(i, j) = gauss(rng);
    Eigen::HouseholderQR<Mat> qr(raw);
    Mat q = qr.householderQ() * Mat::Identity(n, d1);
    q /= q.rowwise().norm().maxCoeff();
    return {q};
}

AuditedFeatures make_audited_features(const Cmdp& model, std::shared_ptr<const SaFeatures> sa, int d1,
                                      std::uint64_t seed, int theta_draws) {
    const Vec zero_gamma = Vec::Zero(model.n_constraints());
    std::mt19937_64 theta_rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<Vec> thetas{Vec::Zero(sa->dim())};
    for (int i = 0; i < theta_draws; ++i) {
        Vec th(sa->dim());
        for (int j = 0; j < th.size(); ++j) th[j] = gauss(theta_rng);
        thetas.push_back(th);
    }
    for (int attempt = 0; attempt < 100; ++attempt) {
        StateFeatures f = make_features(model, FeatureKind::RandomProjection, d1, seed + 7919ULL * attempt);
        bool ok = validate_features(f, model.n_states).ok();
        for (std::size_t i = 0; ok && i < thetas.size(); ++i) {
            try {
                ok = critic_fixed_point(model, PolicyParams(sa, thetas[i]), zero_gamma, f).negative_definite();
            } catch (const Error&) {
                ok = false;
            }
        }
        if (ok) return {f, attempt};
    }
    throw Error("no feature draw passed the negative-definiteness audit in 100 attempts");
}

SaFeatures make_sa_features(int n_states, int n_actions, SaFeatureKind kind, int dim, std::uint64_t seed) {
    if (n_states < 1 || n_actions < 1) throw Error("policy features: sizes must be positive");
    SaFeatures f;
    f.n_states = n_states;
    f.n_actions = n_actions;
    switch (kind) {
        case SaFeatureKind::Tabular:
            f.table = Mat::Identity(n_states * n_actions, n_states * n_actions);
            break;
        case SaFeatureKind::TabularReduced: {
            const int d = std::max(1, n_states * (n_actions - 1));
            f.table = Mat::Zero(n_states * n_actions, d);
            for (int s = 0; s < n_states; ++s)
                for (int a = 1; a < n_actions; ++a) f.table(s * n_actions + a, s * (n_actions - 1) + a - 1) = 1.0;
            break;
        }
        case SaFeatureKind::Random: {
            if (dim < 1) throw Error("random policy features need a positive dimension");
            std::mt19937_64 rng(seed);
            std::normal_distribution<double> gauss(0.0, 1.0);
            f.table.resize(n_states * n_actions, dim);
            for (int i = 0; i < f.table.rows(); ++i)
                for (int j = 0; j < dim; ++j) f.table(i, j) = gauss(rng);
            f.table /= f.table.rowwise().norm().maxCoeff();
            break;
        }
    }
    return f;
}

std::string to_string(EnvKind kind) { return kind == EnvKind::RandomErgodic ? "random_ergodic" : "binding_chain"; }

EnvKind parse_env_kind(const std::string& text) {
    if (text == "random_ergodic") return EnvKind::RandomErgodic;
    if (text == "binding_chain") return EnvKind::BindingChain;
    throw Error("unknown env kind '" + text + "'");
}

std::string to_string(FeatureKind kind) { return kind == FeatureKind::OneHot ? "one_hot" : "random_projection"; }

FeatureKind parse_feature_kind(const std::string& text) {
    if (text == "one_hot") return FeatureKind::OneHot;
    if (text == "random_projection") return FeatureKind::RandomProjection;
    throw Error("unknown feature kind '" + text + "'");
}

std::string to_string(SaFeatureKind kind) {
    switch (kind) {
        case SaFeatureKind::Tabular: return "tabular";
        case SaFeatureKind::TabularReduced: return "tabular_reduced";
        case SaFeatureKind::Random: return "random";
    }
    return "?";
}

SaFeatureKind parse_sa_feature_kind(const std::string& text) {
    if (text == "tabular") return SaFeatureKind::Tabular;
    if (text == "tabular_reduced") return SaFeatureKind::TabularReduced;
    if (text == "random") return SaFeatureKind::Random;
    throw Error("unknown policy feature kind '" + text + "'");
}

}  // namespace cnca
