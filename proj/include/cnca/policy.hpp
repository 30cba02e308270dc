#pragma once

#include "cnca/cmdp.hpp"

#include <memory>
#include <optional>
#include <utility>
#include <vector>

namespace cnca {

/// State-action features x(s,a) for the Gibbs policy; row s*n_actions + a of `table`.
struct SaFeatures {
    int n_states = 0;
    int n_actions = 0;
    Mat table;

    int dim() const { return static_cast<int>(table.cols()); }
    auto row(int s, int a) const { return table.row(s * n_actions + a); }
};

/// Linear-softmax policy pi_theta(a|s) proportional to exp(theta' x(s,a)).
struct PolicyParams {
    Vec theta;
    std::shared_ptr<const SaFeatures> features;

    PolicyParams() = default;
    PolicyParams(std::shared_ptr<const SaFeatures> f, Vec th) : theta(std::move(th)), features(std::move(f)) {}

    int dim() const { return features->dim(); }
    PolicyParams with_theta(Vec th) const { return PolicyParams(features, std::move(th)); }
};

PolicyParams zero_policy(std::shared_ptr<const SaFeatures> features);

Vec action_probabilities(const PolicyParams& policy, int s);

/// (n_states x n_actions) table of pi(a|s).
Mat policy_table(const PolicyParams& policy);

/// Compatible feature Psi_sa = x(s,a) - sum_b pi(b|s) x(s,b).
Vec score(const PolicyParams& policy, int s, int a);

/// Column a holds Psi_sa.
Mat scores(const PolicyParams& policy, int s);

/// B = 2 max ||x(s,a)||, an upper bound on every ||Psi_sa||.
double score_bound(const SaFeatures& features);

/// F(theta) = E_{s~mu_theta, a~pi_theta}[Psi Psi'].
Mat exact_fisher(const PolicyParams& policy, const Cmdp& model);

struct SmoothnessReport {
    double B_hat = 0.0;
    double B_bound = 0.0;
    std::optional<double> L_hat;
    std::optional<double> Mm_hat;
};

/// Empirical constants of the policy family over a parameter grid. Report only.
SmoothnessReport policy_smoothness_audit(const SaFeatures& features, const std::vector<Vec>& theta_grid);

/// Smallest eigenvalue of the averaged score outer product over a window of visited (s,a) pairs.
double fisher_window_min_eigenvalue(const PolicyParams& policy, const std::vector<std::pair<int, int>>& window);

}  // namespace cnca
