#pragma once

#include "cnca/cmdp.hpp"
#include "cnca/policy.hpp"

#include <cstdint>
#include <memory>
#include <string>

namespace cnca {

enum class EnvKind { RandomErgodic, BindingChain };

struct EnvSpec {
    EnvKind kind = EnvKind::RandomErgodic;
    int n_states = 10;
    int n_actions = 3;
    int n_constraints = 2;
    std::uint64_t seed = 0;
    double min_transition_prob = 0.01;  // rho
    double cost_bound = 1.0;            // costs drawn in [0, cost_bound]
};

/// Dirichlet rows mixed with a rho floor, uniform costs, thresholds at the midpoint of the achievable range.
Cmdp random_ergodic_cmdp(const EnvSpec& spec);

struct BindingChainInfo {
    double greedy_G = 0.0;  // constraint cost of the unconstrained optimum
    double safe_G = 0.0;    // constraint cost of the always-safe policy
    double alpha = 0.0;
    double margin_low = 0.0;   // alpha - safe_G
    double margin_high = 0.0;  // greedy_G - alpha
    Mat greedy_policy;
};

struct BindingChain {
    Cmdp model;
    BindingChainInfo info;
};

/// Chain with a cheap "shortcut" action (1) that is expensive under the single constraint,
/// and a "safe" action (0). The unconstrained optimum violates the threshold; always-safe satisfies it.
BindingChain binding_chain_cmdp(int n_states, std::uint64_t seed);

/// Average-cost policy iteration over deterministic policies. Returns the optimal policy table and its gain.
struct DeterministicOptimum {
    Mat policy;
    double gain = 0.0;
};
DeterministicOptimum optimal_deterministic_policy(const Cmdp& model, const Mat& cost, bool minimize = true);

enum class FeatureKind { OneHot, RandomProjection };

StateFeatures make_features(const Cmdp& model, FeatureKind kind, int d1, std::uint64_t seed);

struct AuditedFeatures {
    StateFeatures features;
    int rejections = 0;
};

/// Random-projection features resampled until A is negative definite at theta = 0 and at
/// `theta_draws` random parameters (gamma = 0). Gives up after 100 attempts.
AuditedFeatures make_audited_features(const Cmdp& model, std::shared_ptr<const SaFeatures> sa_features, int d1,
                                      std::uint64_t seed, int theta_draws = 20);

enum class SaFeatureKind { Tabular, TabularReduced, Random };

/**
 * Policy features.
 *
 * Tabular: one-hot per (s,a), d = |S||A|. TabularReduced drops action 0 in every
 * state (x(s,0) = 0), d = |S|(|A|-1); this keeps the Fisher matrix nonsingular.
 * Random: Gaussian rows scaled into the unit ball, d = `dim`.
 */
SaFeatures make_sa_features(int n_states, int n_actions, SaFeatureKind kind, int dim = 0, std::uint64_t seed = 0);

std::string to_string(EnvKind kind);
EnvKind parse_env_kind(const std::string& text);
std::string to_string(FeatureKind kind);
FeatureKind parse_feature_kind(const std::string& text);
std::string to_string(SaFeatureKind kind);
SaFeatureKind parse_sa_feature_kind(const std::string& text);

}  // namespace cnca
