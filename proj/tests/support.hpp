#pragma once

// Small hand-built instances and brute-force reference computations shared by the unit tests.
// The references deliberately avoid the library's solvers.

#include "cnca/cmdp.hpp"
#include "cnca/policy.hpp"

#include <filesystem>
#include <memory>
#include <random>
#include <string>

namespace cnca::testing {

/// Single-action model whose chain is P; costs zero unless given.
inline Cmdp chain_model(const Mat& P, const Vec& cost = Vec()) {
    Cmdp m;
    m.n_states = static_cast<int>(P.rows());
    m.n_actions = 1;
    for (int s = 0; s < m.n_states; ++s) m.transition.push_back(P.row(s));
    m.cost = cost.size() ? Mat(cost) : Mat::Zero(m.n_states, 1);
    m.cost_bound = std::max(1.0, m.cost.maxCoeff());
    m.thresholds = Vec::Zero(0);
    return m;
}

/// Dense random model with every transition probability positive. Thresholds are 0.5.
inline Cmdp random_model(int S, int A, int N, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    Cmdp m;
    m.n_states = S;
    m.n_actions = A;
    for (int s = 0; s < S; ++s) {
        Mat rows(A, S);
        for (int a = 0; a < A; ++a) {
            for (int j = 0; j < S; ++j) rows(a, j) = u(rng);
            rows.row(a) /= rows.row(a).sum();
        }
        m.transition.push_back(rows);
    }
    auto table = [&] {
        Mat t(S, A);
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) t(s, a) = u(rng);
        return t;
    };
    m.cost = table();
    for (int k = 0; k < N; ++k) m.constraint_costs.push_back(table());
    m.thresholds = Vec::Constant(N, 0.5);
    return m;
}

inline std::shared_ptr<const SaFeatures> shared(SaFeatures f) { return std::make_shared<const SaFeatures>(std::move(f)); }

/// Stationary distribution by repeated multiplication.
inline Vec reference_stationary(const Mat& P) {
    Vec mu = Vec::Constant(P.rows(), 1.0 / static_cast<double>(P.rows()));
    for (int i = 0; i < 200000; ++i) {
        Vec next = P.transpose() * mu;
        if ((next - mu).lpNorm<Eigen::Infinity>() < 1e-16) return next;
        mu = next;
    }
    return mu;
}

/// P_pi by explicit summation over actions.
inline Mat reference_chain(const Cmdp& m, const Mat& probs) {
    Mat P = Mat::Zero(m.n_states, m.n_states);
    for (int s = 0; s < m.n_states; ++s)
        for (int a = 0; a < m.n_actions; ++a)
            for (int j = 0; j < m.n_states; ++j) P(s, j) += probs(s, a) * m.transition[s](a, j);
    return P;
}

/// Softmax computed from scratch.
inline Mat reference_policy(const SaFeatures& f, const Vec& theta) {
    Mat probs(f.n_states, f.n_actions);
    for (int s = 0; s < f.n_states; ++s) {
        double z = 0.0;
        for (int a = 0; a < f.n_actions; ++a) z += std::exp(f.row(s, a).dot(theta));
        for (int a = 0; a < f.n_actions; ++a) probs(s, a) = std::exp(f.row(s, a).dot(theta)) / z;
    }
    return probs;
}

/// Average of a per-(s,a) table under the stationary law of the policy.
inline double reference_average(const Cmdp& m, const Mat& probs, const Mat& table) {
    Vec mu = reference_stationary(reference_chain(m, probs));
    double acc = 0.0;
    for (int s = 0; s < m.n_states; ++s)
        for (int a = 0; a < m.n_actions; ++a) acc += mu[s] * probs(s, a) * table(s, a);
    return acc;
}

/// Fresh empty directory under the system temp dir.
inline std::string scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("cnca_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir.string();
}

}  // namespace cnca::testing
