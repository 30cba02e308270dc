#include "cnca/policy.hpp"

#include <algorithm>
#include <cmath>

namespace cnca {

PolicyParams zero_policy(std::shared_ptr<const SaFeatures> features) {
    const int d = features->dim();
    return PolicyParams(std::move(features), Vec::Zero(d));
}

Vec action_probabilities(const PolicyParams& policy, int s) {
    const SaFeatures& f = *policy.features;
    if (s < 0 || s >= f.n_states) throw Error("state index out of range");
    if (policy.theta.size() != f.dim()) throw Error("theta dimension does not match the feature table");
    Vec logits = f.table.middleRows(s * f.n_actions, f.n_actions) * policy.theta;
    logits.array() -= logits.maxCoeff();
    Vec probs = logits.array().exp();
    return probs / probs.sum();
}

Mat policy_table(const PolicyParams& policy) {
    const SaFeatures& f = *policy.features;
    Mat table(f.n_states, f.n_actions);
    for (int s = 0; s < f.n_states; ++s) table.row(s) = action_probabilities(policy, s).transpose();
    return table;
}

Mat scores(const PolicyParams& policy, int s) {
    const SaFeatures& f = *policy.features;
    Vec pi = action_probabilities(policy, s);
    Mat x = f.table.middleRows(s * f.n_actions, f.n_actions).transpose();  // d x A
    Vec mean = x * pi;
    return x.colwise() - mean;
}

Vec score(const PolicyParams& policy, int s, int a) {
    if (a < 0 || a >= policy.features->n_actions) throw Error("action index out of range");
    return scores(policy, s).col(a);
}

double score_bound(const SaFeatures& features) {
    return 2.0 * features.table.rowwise().norm().maxCoeff();
}

Mat exact_fisher(const PolicyParams& policy, const Cmdp& model) {
    const Mat pi = policy_table(policy);
    const Vec mu = stationary_distribution(induced_chain(model, pi)).mu;
    const int d = policy.dim();
    Mat fisher = Mat::Zero(d, d);
    for (int s = 0; s < model.n_states; ++s) {
        Mat psi = scores(policy, s);
        for (int a = 0; a < model.n_actions; ++a)
            fisher.noalias() += mu[s] * pi(s, a) * psi.col(a) * psi.col(a).transpose();
    }
    return 0.5 * (fisher + fisher.transpose());
}

SmoothnessReport policy_smoothness_audit(const SaFeatures& features, const std::vector<Vec>& grid) {
    if (grid.empty()) throw Error("smoothness audit needs a non-empty parameter grid");
    auto shared = std::make_shared<const SaFeatures>(features);
    SmoothnessReport report;
    report.B_bound = score_bound(features);

    std::vector<Mat> probs;
    std::vector<std::vector<Mat>> psis;
    for (const Vec& theta : grid) {
        PolicyParams pol(shared, theta);
        probs.push_back(policy_table(pol));
        std::vector<Mat> per_state;
        for (int s = 0; s < features.n_states; ++s) {
            per_state.push_back(scores(pol, s));
            report.B_hat = std::max(report.B_hat, per_state.back().colwise().norm().maxCoeff());
        }
        psis.push_back(std::move(per_state));
    }

    for (std::size_t i = 0; i < grid.size(); ++i)
        for (std::size_t j = i + 1; j < grid.size(); ++j) {
            double dist = (grid[i] - grid[j]).norm();
            if (dist == 0.0) continue;
            double l = (probs[i] - probs[j]).cwiseAbs().maxCoeff() / dist;
            double m = 0.0;
            for (int s = 0; s < features.n_states; ++s)
                m = std::max(m, (psis[i][s] - psis[j][s]).colwise().norm().maxCoeff() / dist);
            report.L_hat = std::max(report.L_hat.value_or(0.0), l);
            report.Mm_hat = std::max(report.Mm_hat.value_or(0.0), m);
        }
    return report;
}

double fisher_window_min_eigenvalue(const PolicyParams& policy, const std::vector<std::pair<int, int>>& window) {
    if (window.empty()) throw Error("empty score window");
    const int d = policy.dim();
    Mat acc = Mat::Zero(d, d);
    for (auto [s, a] : window) {
        Vec psi = score(policy, s, a);
        acc.noalias() += psi * psi.transpose();
    }
    acc /= static_cast<double>(window.size());
    Eigen::SelfAdjointEigenSolver<Mat> eig(acc, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().minCoeff();
}

}  // namespace cnca
