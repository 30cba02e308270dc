#pragma once

#include "cnca/cmdp.hpp"
#include "cnca/policy.hpp"

#include <optional>
#include <string>
#include <vector>

namespace cnca {

// Exact frozen-(theta, gamma) quantities. Every expectation is a triple sum
// weighted by mu(s) pi(a|s) p(s,a,s'); nothing here samples.

/// C(s,a,gamma) = d(s,a) + sum_k gamma_k (h_k(s,a) - alpha_k).
double relaxed_cost(const Cmdp& model, const Vec& gamma, int s, int a);
Mat relaxed_cost_table(const Cmdp& model, const Vec& gamma);

struct LagrangianValue {
    double J = 0.0;  // average objective cost
    Vec G;           // average constraint costs
    double L = 0.0;  // J + sum_k gamma_k (G_k - alpha_k)
};

LagrangianValue lagrangian_cost(const Cmdp& model, const Mat& policy_probs, const Vec& gamma);
LagrangianValue lagrangian_cost(const Cmdp& model, const PolicyParams& policy, const Vec& gamma);

/// Differential value V solving (I - P)V = c_gamma - L 1 with mu'V = 0.
Vec differential_value(const Cmdp& model, const Mat& policy_probs, const Vec& gamma);
Vec differential_value(const Cmdp& model, const PolicyParams& policy, const Vec& gamma);

struct QAdvantage {
    Mat Q;          // C - L + E[V(s')]
    Mat advantage;  // Q - V
};

QAdvantage differential_q_advantage(const Cmdp& model, const Mat& policy_probs, const Vec& gamma);
QAdvantage differential_q_advantage(const Cmdp& model, const PolicyParams& policy, const Vec& gamma);

struct CriticFixedPoint {
    Mat A;
    Vec b;
    Vec v_star;
    double lambda_e = 0.0;  // -(largest eigenvalue of (A + A')/2)
    int rank = 0;
    bool negative_definite() const { return lambda_e > 0.0; }
};

/**
 * TD(0) limit for the state features under the frozen policy.
 *
 * A = E[f_s (f_s' - f_s)'] and b = E[(C - L) f_s]. When A is singular but the
 * system is consistent (e.g. one-hot features, whose kernel is the constant
 * direction) the minimum-norm solution is returned; A = 0 or an inconsistent
 * system throws.
 */
CriticFixedPoint critic_fixed_point(const Cmdp& model, const Mat& policy_probs, const Vec& gamma,
                                    const StateFeatures& features);
CriticFixedPoint critic_fixed_point(const Cmdp& model, const PolicyParams& policy, const Vec& gamma,
                                    const StateFeatures& features);

/// grad_theta L = sum_s mu(s) sum_a pi(a|s) Psi_sa Adv(s,a).
Vec exact_policy_gradient(const Cmdp& model, const PolicyParams& policy, const Vec& gamma);

/// E[(C - L + f_s'^T v - f_s^T v) Psi_sa], the expected actor increment direction at critic v.
Vec m_bar(const Cmdp& model, const PolicyParams& policy, const Vec& v, const Vec& gamma,
          const StateFeatures& features);

/// mu-weighted RMS gap between the centered linear fit f'v* and V.
double approximation_error(const Cmdp& model, const PolicyParams& policy, const Vec& gamma,
                           const StateFeatures& features);

struct OracleSolution {
    Vec mu;
    double J = 0.0;
    Vec G;
    double L = 0.0;
    Vec V;
    Mat Q;
    Mat advantage;
    Mat A;
    Vec b;
    std::optional<Vec> v_star;
    double lambda_e = 0.0;
    Vec grad;
    std::optional<double> eps_app;
    std::vector<std::string> audit;
};

/// Every quantity at once from a single stationary solve. Audit failures are
/// recorded in `audit` and the remaining fields are still filled.
OracleSolution solve_oracle(const Cmdp& model, const PolicyParams& policy, const Vec& gamma,
                            const StateFeatures& features);

}  // namespace cnca
