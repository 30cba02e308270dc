#include "cnca/oracle.hpp"

#include <cmath>

namespace cnca {

namespace {

void check_gamma(const Cmdp& model, const Vec& gamma) {
    if (gamma.size() != model.n_constraints())
        throw Error("gamma has " + std::to_string(gamma.size()) + " entries, model has " +
                    std::to_string(model.n_constraints()) + " constraints");
    for (int k = 0; k < gamma.size(); ++k)
        if (!(gamma[k] >= 0.0)) throw Error("Lagrange multipliers must be non-negative");
}

// Stationary quantities shared by every oracle for one frozen (pi, gamma).
struct FrozenChain {
    Mat pi;
    Mat P;
    Vec mu;
    Mat C;
    Vec cbar;
    LagrangianValue value;
};

FrozenChain freeze(const Cmdp& model, const Mat& pi, const Vec& gamma) {
    check_gamma(model, gamma);
    FrozenChain fc;
    fc.pi = pi;
    fc.P = induced_chain(model, pi);
    fc.mu = stationary_distribution(fc.P).mu;
    fc.C = relaxed_cost_table(model, gamma);
    fc.cbar = pi.cwiseProduct(fc.C).rowwise().sum();

    fc.value.J = fc.mu.dot(pi.cwiseProduct(model.cost).rowwise().sum());
    fc.value.G = Vec::Zero(model.n_constraints());
    for (int k = 0; k < model.n_constraints(); ++k)
        fc.value.G[k] = fc.mu.dot(pi.cwiseProduct(model.constraint_costs[k]).rowwise().sum());
    fc.value.L = fc.value.J;
    for (int k = 0; k < model.n_constraints(); ++k)
        fc.value.L += gamma[k] * (fc.value.G[k] - model.thresholds[k]);
    return fc;
}

Vec poisson_solve(const FrozenChain& fc) {
    const int n = static_cast<int>(fc.P.rows());
    // I - P + 1 mu' is invertible for an ergodic chain and its solution satisfies mu'V = 0
    Mat system = Mat::Identity(n, n) - fc.P + Vec::Ones(n) * fc.mu.transpose();
    Vec rhs = fc.cbar - Vec::Constant(n, fc.value.L);
    Vec V = system.partialPivLu().solve(rhs);
    if (((Mat::Identity(n, n) - fc.P) * V - rhs).lpNorm<Eigen::Infinity>() > 1e-10 * (1.0 + rhs.lpNorm<Eigen::Infinity>()))
        throw Error("Poisson equation residual too large");
    return V;
}

QAdvantage q_advantage(const Cmdp& model, const FrozenChain& fc, const Vec& V) {
    QAdvantage qa;
    qa.Q.resize(model.n_states, model.n_actions);
    for (int s = 0; s < model.n_states; ++s) qa.Q.row(s) = (model.transition[s] * V).transpose();
    qa.Q += fc.C;
    qa.Q.array() -= fc.value.L;
    qa.advantage = qa.Q.colwise() - V;
    return qa;
}

CriticFixedPoint fixed_point(const FrozenChain& fc, const StateFeatures& features) {
    const int n = static_cast<int>(fc.P.rows());
    if (features.n_states() != n) throw Error("feature matrix rows do not match the number of states");
    const Mat& F = features.matrix;
    const Mat DF = fc.mu.asDiagonal() * F;
    CriticFixedPoint cfp;
    cfp.A = DF.transpose() * (fc.P - Mat::Identity(n, n)) * F;
    cfp.b = DF.transpose() * (fc.cbar - Vec::Constant(n, fc.value.L));

    Mat sym = 0.5 * (cfp.A + cfp.A.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> eig(sym, Eigen::EigenvaluesOnly);
    cfp.lambda_e = -eig.eigenvalues().maxCoeff();

    Eigen::CompleteOrthogonalDecomposition<Mat> cod(cfp.A);
    cod.setThreshold(1e-10);
    cfp.rank = static_cast<int>(cod.rank());
    if (cfp.rank == 0) throw Error("fixed point undefined: A is zero");
    cfp.v_star = cod.solve(-cfp.b);
    double residual = (cfp.A * cfp.v_star + cfp.b).norm();
    if (residual > 1e-9) throw Error("fixed point undefined: A v + b = 0 has no solution");
    return cfp;
}

Vec gradient(const Cmdp& model, const PolicyParams& policy, const FrozenChain& fc, const QAdvantage& qa) {
    Vec grad = Vec::Zero(policy.dim());
    for (int s = 0; s < model.n_states; ++s) {
        Mat psi = scores(policy, s);
        grad += fc.mu[s] * psi * fc.pi.row(s).transpose().cwiseProduct(qa.advantage.row(s).transpose());
    }
    return grad;
}

double eps_app(const FrozenChain& fc, const StateFeatures& features, const Vec& v_star, const Vec& V) {
    Vec fit = features.matrix * v_star;
    fit.array() -= fc.mu.dot(fit);
    Vec target = V;
    target.array() -= fc.mu.dot(target);
    return std::sqrt(fc.mu.dot((fit - target).cwiseAbs2()));
}

}  // namespace

double relaxed_cost(const Cmdp& model, const Vec& gamma, int s, int a) {
    check_gamma(model, gamma);
    double c = model.cost(s, a);
    for (int k = 0; k < model.n_constraints(); ++k)
        c += gamma[k] * (model.constraint_costs[k](s, a) - model.thresholds[k]);
    return c;
}

Mat relaxed_cost_table(const Cmdp& model, const Vec& gamma) {
    check_gamma(model, gamma);
    Mat C = model.cost;
    for (int k = 0; k < model.n_constraints(); ++k)
        C += gamma[k] * (model.constraint_costs[k].array() - model.thresholds[k]).matrix();
    return C;
}

LagrangianValue lagrangian_cost(const Cmdp& model, const Mat& pi, const Vec& gamma) {
    return freeze(model, pi, gamma).value;
}

LagrangianValue lagrangian_cost(const Cmdp& model, const PolicyParams& policy, const Vec& gamma) {
    return lagrangian_cost(model, policy_table(policy), gamma);
}

Vec differential_value(const Cmdp& model, const Mat& pi, const Vec& gamma) {
    return poisson_solve(freeze(model, pi, gamma));
}

Vec differential_value(const Cmdp& model, const PolicyParams& policy, const Vec& gamma) {
    return differential_value(model, policy_table(policy), gamma);
}

QAdvantage differential_q_advantage(const Cmdp& model, const Mat& pi, const Vec& gamma) {
    FrozenChain fc = freeze(model, pi, gamma);
    return q_advantage(model, fc, poisson_solve(fc));
}

QAdvantage differential_q_advantage(const Cmdp& model, const PolicyParams& policy, const Vec& gamma) {
    return differential_q_advantage(model, policy_table(policy), gamma);
}

CriticFixedPoint critic_fixed_point(const Cmdp& model, const Mat& pi, const Vec& gamma,
                                    const StateFeatures& features) {
    return fixed_point(freeze(model, pi, gamma), features);
}

CriticFixedPoint critic_fixed_point(const Cmdp& model, const PolicyParams& policy, const Vec& gamma,
                                    const StateFeatures& features) {
    return critic_fixed_point(model, policy_table(policy), gamma, features);
}

Vec exact_policy_gradient(const Cmdp& model, const PolicyParams& policy, const Vec& gamma) {
    FrozenChain fc = freeze(model, policy_table(policy), gamma);
    return gradient(model, policy, fc, q_advantage(model, fc, poisson_solve(fc)));
}

Vec m_bar(const Cmdp& model, const PolicyParams& policy, const Vec& v, const Vec& gamma,
          const StateFeatures& features) {
    if (v.size() != features.dim()) throw Error("critic vector dimension does not match the features");
    FrozenChain fc = freeze(model, policy_table(policy), gamma);
    const Vec fv = features.matrix * v;
    Vec out = Vec::Zero(policy.dim());
    for (int s = 0; s < model.n_states; ++s) {
        Mat psi = scores(policy, s);
        Vec weights(model.n_actions);
        for (int a = 0; a < model.n_actions; ++a) {
            double td = fc.C(s, a) - fc.value.L + model.transition[s].row(a).dot(fv) - fv[s];
            weights[a] = fc.pi(s, a) * td;
        }
        out += fc.mu[s] * psi * weights;
    }
    return out;
}

double approximation_error(const Cmdp& model, const PolicyParams& policy, const Vec& gamma,
                           const StateFeatures& features) {
    FrozenChain fc = freeze(model, policy_table(policy), gamma);
    CriticFixedPoint cfp = fixed_point(fc, features);
    return eps_app(fc, features, cfp.v_star, poisson_solve(fc));
}

OracleSolution solve_oracle(const Cmdp& model, const PolicyParams& policy, const Vec& gamma,
                            const StateFeatures& features) {
    FrozenChain fc = freeze(model, policy_table(policy), gamma);
    OracleSolution sol;
    sol.mu = fc.mu;
    sol.J = fc.value.J;
    sol.G = fc.value.G;
    sol.L = fc.value.L;
    sol.V = poisson_solve(fc);
    QAdvantage qa = q_advantage(model, fc, sol.V);
    sol.Q = qa.Q;
    sol.advantage = qa.advantage;
    sol.grad = gradient(model, policy, fc, qa);

    const Mat& F = features.matrix;
    const int n = model.n_states;
    sol.A = (fc.mu.asDiagonal() * F).transpose() * (fc.P - Mat::Identity(n, n)) * F;
    sol.b = (fc.mu.asDiagonal() * F).transpose() * (fc.cbar - Vec::Constant(n, fc.value.L));
    try {
        CriticFixedPoint cfp = fixed_point(fc, features);
        sol.lambda_e = cfp.lambda_e;
        sol.v_star = cfp.v_star;
        sol.eps_app = eps_app(fc, features, cfp.v_star, sol.V);
        if (!cfp.negative_definite())
            sol.audit.push_back("A is not negative definite (lambda_e = " + std::to_string(cfp.lambda_e) + ")");
        if (cfp.rank < features.dim())
            sol.audit.push_back("A is singular; v_star is the minimum-norm solution");
    } catch (const Error& e) {
        Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (sol.A + sol.A.transpose()), Eigen::EigenvaluesOnly);
        sol.lambda_e = -eig.eigenvalues().maxCoeff();
        sol.audit.push_back(e.what());
    }
    return sol;
}

}  // namespace cnca
