#include "cnca/harness.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

namespace {

void add_common(CLI::App* cmd, std::optional<std::string>& out, std::string& seeds, int& jobs, bool with_seeds) {
    cmd->add_option("--out", out, "Output directory (default: config output_dir, then $CNCA_OUT_DIR, then ./out)");
    if (with_seeds) cmd->add_option("--seeds", seeds, "Seed count N (seeds 1..N) or comma-separated list");
    cmd->add_option("--jobs", jobs, "Worker threads for independent seeds")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Constrained natural critic-actor laboratory"};
    app.require_subcommand(1);

    std::string config, seeds, variants;
    std::optional<std::string> out;
    int jobs = 1;

    auto* run = app.add_subcommand("run", "Run one configured experiment over its seeds");
    run->add_option("--config", config, "Experiment config (JSON)")->required();
    add_common(run, out, seeds, jobs, true);

    auto* sweep = app.add_subcommand("sweep", "Compare variants on one config: mean ± standard error over seeds");
    sweep->add_option("--config", config, "Experiment config (JSON)")->required();
    sweep->add_option("--variants", variants, "Comma-separated variants, e.g. c-nca,c-ac,c-nca/modified");
    add_common(sweep, out, seeds, jobs, true);

    cnca::VerifyRequest verify_req;
    auto* verify = app.add_subcommand("verify", "Property checks and the acceptance suite");
    verify->add_option("--instance", verify_req.instance_path, "Also validate this instance file");
    verify->add_flag("--quick", verify_req.quick, "Property checks only");
    verify->add_option("--only", verify_req.only, "Run checks whose name contains this text");
    add_common(verify, out, seeds, jobs, false);

    cnca::OracleRequest oracle_req;
    auto* oracle = app.add_subcommand("oracle", "Exact frozen-(theta, gamma) solution for an instance");
    oracle->add_option("--instance", oracle_req.instance_path, "Instance file (JSON)")->required();
    oracle->add_option("--theta", oracle_req.theta_path, "JSON array of policy parameters (default zeros)");
    oracle->add_option("--gamma", oracle_req.gamma, "Comma-separated multipliers (default zeros)");
    oracle->add_option("--cap", oracle_req.multiplier_cap, "Multiplier cap M")->check(CLI::PositiveNumber);
    oracle->add_option("--out", out, "Write oracle.json into this directory instead of stdout");

    cnca::GenRequest gen_req;
    std::optional<std::string> gen_kind;
    auto* gen = app.add_subcommand("gen", "Generate an instance file with features");
    gen->add_option("--config", gen_req.config_path, "Take env and feature settings from a config");
    gen->add_option("--kind", gen_kind, "random_ergodic or binding_chain");
    gen->add_option("--states", gen_req.n_states, "Number of states");
    gen->add_option("--actions", gen_req.n_actions, "Number of actions");
    gen->add_option("--constraints", gen_req.n_constraints, "Number of constraints");
    gen->add_option("--seed", gen_req.seed, "Generator seed");
    gen->add_option("--d1", gen_req.d1, "Critic feature dimension");
    gen->add_option("--out", out, "Output directory");

    CLI11_PARSE(app, argc, argv);

    cnca::CliOverrides cli;
    cli.out_dir = out;
    cli.jobs = jobs;
    try {
        if (!seeds.empty()) cli.seeds = cnca::parse_seeds(seeds);
        if (gen_kind) gen_req.kind = cnca::parse_env_kind(*gen_kind);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    if (*run) return cnca::cmd_run(config, cli, std::cout, std::cerr);
    if (*sweep) {
        std::optional<std::string> list;
        if (!variants.empty()) list = variants;
        return cnca::cmd_sweep(config, list, cli, std::cout, std::cerr);
    }
    if (*verify) return cnca::cmd_verify(verify_req, cli, std::cout, std::cerr);
    if (*oracle) {
        std::optional<std::string> file;
        if (out) {
            std::error_code ec;
            std::filesystem::create_directories(*out, ec);
            file = (std::filesystem::path(*out) / "oracle.json").string();
        }
        return cnca::cmd_oracle(oracle_req, file, std::cout, std::cerr);
    }
    if (*gen) return cnca::cmd_gen(gen_req, cli, std::cout, std::cerr);
    return 1;
}
