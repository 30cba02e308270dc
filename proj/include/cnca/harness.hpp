#pragma once

#include "cnca/algorithm.hpp"
#include "cnca/envs.hpp"
#include "cnca/serialize.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cnca {

/// Environment variable naming the default output directory.
inline constexpr const char* kOutDirEnv = "CNCA_OUT_DIR";

struct VariantSpec {
    Variant variant = Variant::CNCA;
    bool modified = false;

    /// "c-nca" or "c-nca/modified".
    std::string label() const;
    static VariantSpec parse(const std::string& text);
    bool operator==(const VariantSpec&) const = default;
};

/// One sweep row. Every entry must share the same horizon.
struct SweepEntry {
    VariantSpec spec;
    long horizon = 0;
};

struct FeatureConfig {
    FeatureKind kind = FeatureKind::RandomProjection;
    int d1 = 0;  // 0 means n_states for one_hot, n_states/2 (at least 1) otherwise
    std::uint64_t seed = 0;
    bool audit = true;  // resample random projections until A is negative definite
};

struct PolicyFeatureConfig {
    SaFeatureKind kind = SaFeatureKind::TabularReduced;
    int dim = 0;
    std::uint64_t seed = 0;
};

struct ScheduleConfig {
    std::optional<ScheduleMode> mode;  // falls back to the variant's `modified` flag
    std::optional<double> nu;
    std::optional<double> sigma;
    std::optional<double> beta;
    double delta = kDefaultDelta;
    ScheduleCoefficients coefficients;
};

struct ExperimentConfig {
    EnvSpec env;
    std::optional<std::string> instance_path;  // resolved against the config file's directory
    FeatureConfig features;
    PolicyFeatureConfig policy_features;
    VariantSpec variant;
    std::vector<SweepEntry> variants;  // sweep only
    ScheduleConfig schedules;
    double projection_radius = 100.0;
    double multiplier_cap = 1000.0;
    double fisher_init = 1.0;
    double cost_noise = 0.0;
    bool update_actor = true;
    bool update_multipliers = true;
    long horizon = 0;
    long eval_every = 100;
    std::vector<std::uint64_t> seeds;
    std::optional<std::string> output_dir;
    double c_tau = 10.0;
    std::optional<std::pair<long, long>> fit_window;
    double gap_tolerance = 0.05;  // satisfied when gap_k <= gap_tolerance * alpha_k
};

/// Strict parse: unknown fields and type mismatches throw with the field path.
ExperimentConfig parse_config(const json& doc, const std::string& base_dir = ".");
ExperimentConfig load_config(const std::string& path);

/// "10" means seeds 1..10; "3,5,9" is an explicit list.
std::vector<std::uint64_t> parse_seeds(const std::string& text);

struct PreparedExperiment {
    Instance instance;
    AlgorithmConfig algorithm;
    ScheduleReport schedule_report;
    json instance_info;
};

/// Builds the instance, features and algorithm config for one variant. Throws on invalid schedules.
PreparedExperiment prepare(const ExperimentConfig& config, const VariantSpec& variant);

/// Calls fn(i) for i in [0, n) on up to `jobs` threads; rethrows the first failure by index.
void parallel_for(int n, int jobs, const std::function<void(int)>& fn);

struct SeedRun {
    std::uint64_t seed = 0;
    RunResult result;
};

std::vector<SeedRun> run_seeds(const PreparedExperiment& prepared, long horizon,
                               const std::vector<std::uint64_t>& seeds, int jobs);

/// Summary document for a set of runs of one variant.
json summarize(const ExperimentConfig& config, const VariantSpec& variant, const PreparedExperiment& prepared,
               const std::vector<SeedRun>& runs);

struct CliOverrides {
    std::optional<std::string> out_dir;
    std::optional<std::vector<std::uint64_t>> seeds;
    int jobs = 1;
};

/// Output directory: --out, then the config, then $CNCA_OUT_DIR, then "out".
std::string resolve_out_dir(const ExperimentConfig& config, const CliOverrides& cli);

int cmd_run(const std::string& config_path, const CliOverrides& cli, std::ostream& out, std::ostream& err);

/// Variants come from `variant_list` (comma separated) when given, else from the config's `variants`.
int cmd_sweep(const std::string& config_path, const std::optional<std::string>& variant_list,
              const CliOverrides& cli, std::ostream& out, std::ostream& err);

struct OracleRequest {
    std::string instance_path;
    std::optional<std::string> theta_path;
    std::optional<std::string> gamma;  // comma separated
    double multiplier_cap = 1000.0;
};

int cmd_oracle(const OracleRequest& request, const std::optional<std::string>& out_file, std::ostream& out,
               std::ostream& err);

struct GenRequest {
    std::optional<std::string> config_path;
    std::optional<EnvKind> kind;
    std::optional<int> n_states;
    std::optional<int> n_actions;
    std::optional<int> n_constraints;
    std::optional<std::uint64_t> seed;
    std::optional<int> d1;
};

int cmd_gen(const GenRequest& request, const CliOverrides& cli, std::ostream& out, std::ostream& err);

struct VerifyRequest {
    std::optional<std::string> instance_path;
    bool quick = false;  // property checks only
    std::optional<std::string> only;  // substring filter on check names
};

int cmd_verify(const VerifyRequest& request, const CliOverrides& cli, std::ostream& out, std::ostream& err);

}  // namespace cnca
