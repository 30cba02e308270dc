#pragma once

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cnca {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Thrown for malformed inputs and for quantities that are undefined on an instance.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/**
 * Finite constrained MDP with a uniform action set.
 *
 * transition[s] is an (n_actions x n_states) matrix whose row a holds
 * p(s, a, .). cost and every constraint_costs[k] are (n_states x n_actions).
 */
struct Cmdp {
    int n_states = 0;
    int n_actions = 0;
    std::vector<Mat> transition;
    Mat cost;
    std::vector<Mat> constraint_costs;
    Vec thresholds;
    double cost_bound = 1.0;

    int n_constraints() const { return static_cast<int>(constraint_costs.size()); }
    double p(int s, int a, int next) const { return transition[s](a, next); }
};

/// Per-state critic features; row s of `matrix` is f_s.
struct StateFeatures {
    Mat matrix;

    int dim() const { return static_cast<int>(matrix.cols()); }
    int n_states() const { return static_cast<int>(matrix.rows()); }
    Vec row(int s) const { return matrix.row(s).transpose(); }
};

struct ValidationReport {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

ValidationReport validate_cmdp(const Cmdp& model);

/// Feature audit: ||f_s|| <= 1 and full column rank.
ValidationReport validate_features(const StateFeatures& features, int n_states);

/// P_pi[s][s'] = sum_a pi(a|s) p(s,a,s'). `action_probs` is (n_states x n_actions).
Mat induced_chain(const Cmdp& model, const Mat& action_probs);

bool is_irreducible(const Mat& P);
/// Period of an irreducible chain, from BFS levels through state 0.
int chain_period(const Mat& P);

struct StationaryDistribution {
    Vec mu;
};

/// Unique stationary distribution of an irreducible aperiodic chain.
StationaryDistribution stationary_distribution(const Mat& P);

/// Power-iteration reference used as the ill-conditioned fallback and by tests.
Vec stationary_power_iteration(const Mat& P, long max_iters = 1000000, double tol = 1e-15);

struct MixingProfile {
    std::vector<double> distances;  // d_tau, tau = 0..horizon
    double b = 0.0;
    double k = 0.0;
    bool mixing = false;  // fitted k < 1
};

/// Worst-case total-variation distance to mu over starting states, with a fitted d_tau <= b k^tau.
MixingProfile mixing_profile(const Mat& P, const StationaryDistribution& mu, int horizon);

}  // namespace cnca
