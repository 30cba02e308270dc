#pragma once

#include "cnca/algorithm.hpp"
#include "cnca/envs.hpp"

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace cnca {

struct CheckOutcome {
    bool passed = false;
    std::string detail;
};

struct Check {
    std::string name;
    std::function<CheckOutcome(int jobs)> body;
};

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

/// Fast invariant checks over every module.
std::vector<Check> property_checks();
/// The ten release criteria. Several run multi-seed experiments; `jobs` parallelizes seeds.
std::vector<Check> acceptance_checks();

/// Runs the checks in order, streaming one line per check to `progress` when non-null.
/// A throwing check counts as failed with the exception text as detail.
std::vector<CheckResult> run_checks(const std::vector<Check>& checks, int jobs, std::ostream* progress);

// Shared experiment setups, also used by the tests.

/// binding_chain(6, seed 1), tabular_reduced policy features, audited random projection d1 = 4 (seed 3).
Instance binding_chain_instance();
/// 5-state, 2-action, 1-constraint random_ergodic instance with audited random projection d1 = 3.
Instance small_ergodic_instance();

/// C-NCA on the binding chain with standard optimal exponents, c_a = 0.1, c_c = 1.
AlgorithmConfig binding_chain_config();
/// Shared configuration for the standard vs modified comparison; only the mode differs.
AlgorithmConfig schedule_comparison_config(ScheduleMode mode);
/// Frozen theta and gamma; critic on a 0.5/(1+t)^0.5 schedule.
AlgorithmConfig frozen_critic_config();

double median(std::vector<double> values);

}  // namespace cnca
