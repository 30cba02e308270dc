#include "cnca/cmdp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <sstream>

namespace cnca {

namespace {

constexpr double kRowSumTol = 1e-12;
constexpr double kIllConditioned = 1e12;

std::vector<std::vector<int>> positive_graph(const Mat& P, bool reversed) {
    const int n = static_cast<int>(P.rows());
    std::vector<std::vector<int>> adj(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (P(i, j) > 0.0) {
                if (reversed)
                    adj[j].push_back(i);
                else
                    adj[i].push_back(j);
            }
    return adj;
}

std::vector<int> bfs_levels(const std::vector<std::vector<int>>& adj, int root) {
    std::vector<int> level(adj.size(), -1);
    std::queue<int> frontier;
    level[root] = 0;
    frontier.push(root);
    while (!frontier.empty()) {
        int u = frontier.front();
        frontier.pop();
        for (int v : adj[u])
            if (level[v] < 0) {
                level[v] = level[u] + 1;
                frontier.push(v);
            }
    }
    return level;
}

void require_square_stochastic(const Mat& P) {
    if (P.rows() != P.cols() || P.rows() == 0)
        throw Error("transition matrix must be square and non-empty");
    for (int i = 0; i < P.rows(); ++i) {
        if ((P.row(i).array() < 0.0).any())
            throw Error("transition matrix has negative entries in row " + std::to_string(i));
        if (std::abs(P.row(i).sum() - 1.0) > 1e-9)
            throw Error("transition matrix row " + std::to_string(i) + " does not sum to 1");
    }
}

}  // namespace

ValidationReport validate_cmdp(const Cmdp& m) {
    ValidationReport report;
    auto fail = [&](const std::string& msg) { report.violations.push_back(msg); };

    if (m.n_states <= 0 || m.n_actions <= 0) {
        fail("n_states and n_actions must be positive");
        return report;
    }
    if (static_cast<int>(m.transition.size()) != m.n_states) {
        fail("transition has wrong number of states");
        return report;
    }
    for (int s = 0; s < m.n_states; ++s) {
        const Mat& rows = m.transition[s];
        if (rows.rows() != m.n_actions || rows.cols() != m.n_states) {
            fail("transition[" + std::to_string(s) + "] has wrong shape");
            continue;
        }
        for (int a = 0; a < m.n_actions; ++a) {
            std::string cell = "(" + std::to_string(s) + "," + std::to_string(a) + ")";
            if ((rows.row(a).array() < 0.0).any()) fail("negative transition probability at " + cell);
            if (!rows.row(a).allFinite()) fail("non-finite transition probability at " + cell);
            if (std::abs(rows.row(a).sum() - 1.0) > kRowSumTol) fail("row sum != 1 at " + cell);
        }
    }
    if (!(m.cost_bound > 0.0)) fail("cost_bound must be positive");

    auto check_table = [&](const Mat& table, const std::string& name) {
        if (table.rows() != m.n_states || table.cols() != m.n_actions) {
            fail(name + " has wrong shape");
            return;
        }
        for (int s = 0; s < m.n_states; ++s)
            for (int a = 0; a < m.n_actions; ++a) {
                std::string cell = name + "(" + std::to_string(s) + "," + std::to_string(a) + ")";
                double c = table(s, a);
                if (!std::isfinite(c))
                    fail("non-finite cost " + cell);
                else if (c < 0.0)
                    fail("negative cost " + cell);
                else if (c > m.cost_bound)
                    fail("cost exceeds bound U_c at " + cell);
            }
    };
    check_table(m.cost, "cost");
    for (int k = 0; k < m.n_constraints(); ++k)
        check_table(m.constraint_costs[k], "constraint_costs[" + std::to_string(k) + "]");

    if (m.thresholds.size() != m.n_constraints())
        fail("thresholds length does not match number of constraints");
    else
        for (int k = 0; k < m.n_constraints(); ++k)
            if (!(m.thresholds[k] > 0.0)) fail("threshold " + std::to_string(k) + " must be positive");
    return report;
}

ValidationReport validate_features(const StateFeatures& features, int n_states) {
    ValidationReport report;
    if (features.n_states() != n_states) {
        report.violations.push_back("feature matrix has " + std::to_string(features.n_states()) +
                                    " rows, expected " + std::to_string(n_states));
        return report;
    }
    if (features.dim() < 1) {
        report.violations.push_back("feature dimension must be positive");
        return report;
    }
    for (int s = 0; s < n_states; ++s)
        if (features.matrix.row(s).norm() > 1.0 + 1e-12)
            report.violations.push_back("feature norm exceeds 1 at state " + std::to_string(s));
    Eigen::ColPivHouseholderQR<Mat> qr(features.matrix);
    if (qr.rank() < features.dim()) report.violations.push_back("feature matrix is not full column rank");
    return report;
}

Mat induced_chain(const Cmdp& model, const Mat& action_probs) {
    if (action_probs.rows() != model.n_states || action_probs.cols() != model.n_actions)
        throw Error("policy table shape does not match the model");
    Mat P = Mat::Zero(model.n_states, model.n_states);
    for (int s = 0; s < model.n_states; ++s)
        P.row(s) = action_probs.row(s) * model.transition[s];
    return P;
}

bool is_irreducible(const Mat& P) {
    auto forward = bfs_levels(positive_graph(P, false), 0);
    auto backward = bfs_levels(positive_graph(P, true), 0);
    return std::none_of(forward.begin(), forward.end(), [](int l) { return l < 0; }) &&
           std::none_of(backward.begin(), backward.end(), [](int l) { return l < 0; });
}

int chain_period(const Mat& P) {
    auto adj = positive_graph(P, false);
    auto level = bfs_levels(adj, 0);
    int period = 0;
    for (std::size_t u = 0; u < adj.size(); ++u) {
        if (level[u] < 0) continue;
        for (int v : adj[u]) period = std::gcd(period, std::abs(level[u] + 1 - level[v]));
    }
    return period;
}

Vec stationary_power_iteration(const Mat& P, long max_iters, double tol) {
    const int n = static_cast<int>(P.rows());
    Eigen::RowVectorXd mu = Eigen::RowVectorXd::Constant(n, 1.0 / n);
    for (long it = 0; it < max_iters; ++it) {
        Eigen::RowVectorXd next = mu * P;
        next /= next.sum();
        double change = (next - mu).lpNorm<1>();
        mu = next;
        if (change < tol) break;
    }
    return mu.transpose();
}

StationaryDistribution stationary_distribution(const Mat& P) {
    require_square_stochastic(P);
    if (!is_irreducible(P) || chain_period(P) != 1)
        throw Error("no unique stationary distribution: chain is reducible or periodic");

    const int n = static_cast<int>(P.rows());
    Mat system = P.transpose() - Mat::Identity(n, n);
    system.row(n - 1).setOnes();
    Vec rhs = Vec::Zero(n);
    rhs[n - 1] = 1.0;

    Eigen::PartialPivLU<Mat> lu(system);
    Vec mu;
    if (lu.rcond() * kIllConditioned < 1.0)
        mu = stationary_power_iteration(P);
    else
        mu = lu.solve(rhs);
    mu = mu.cwiseMax(0.0);
    mu /= mu.sum();
    return {mu};
}

MixingProfile mixing_profile(const Mat& P, const StationaryDistribution& stationary, int horizon) {
    require_square_stochastic(P);
    if (horizon < 0) throw Error("mixing horizon must be non-negative");
    const int n = static_cast<int>(P.rows());
    const Eigen::RowVectorXd mu = stationary.mu.transpose();

    MixingProfile profile;
    Mat power = Mat::Identity(n, n);
    for (int tau = 0; tau <= horizon; ++tau) {
        double worst = 0.0;
        for (int x = 0; x < n; ++x) worst = std::max(worst, 0.5 * (power.row(x) - mu).cwiseAbs().sum());
        profile.distances.push_back(worst);
        power = power * P;
    }

    // log-linear least squares on the strictly positive part of the profile
    std::vector<double> taus, logs;
    for (int tau = 0; tau <= horizon; ++tau)
        if (profile.distances[tau] > 1e-13) {
            taus.push_back(tau);
            logs.push_back(std::log(profile.distances[tau]));
        }
    if (taus.size() < 2) {
        profile.k = 0.0;
        profile.b = profile.distances.front();
        profile.mixing = true;
        return profile;
    }
    const double m = static_cast<double>(taus.size());
    const double mean_t = std::accumulate(taus.begin(), taus.end(), 0.0) / m;
    const double mean_l = std::accumulate(logs.begin(), logs.end(), 0.0) / m;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < taus.size(); ++i) {
        sxy += (taus[i] - mean_t) * (logs[i] - mean_l);
        sxx += (taus[i] - mean_t) * (taus[i] - mean_t);
    }
    profile.k = std::exp(sxy / sxx);
    // lift b until b k^tau dominates every observed distance
    double b = 0.0;
    for (std::size_t i = 0; i < taus.size(); ++i)
        b = std::max(b, std::exp(logs[i] - taus[i] * std::log(profile.k)));
    profile.b = b;
    profile.mixing = profile.k < 1.0 - 1e-9;
    return profile;
}

}  // namespace cnca
