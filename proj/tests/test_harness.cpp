#include "cnca/harness.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace cnca;
using namespace cnca::testing;
namespace fs = std::filesystem;

namespace {

json minimal_config() {
    return {{"env", {{"kind", "binding_chain"}, {"seed", 1}}},
            {"features", {{"kind", "random_projection"}, {"d1", 3}, {"seed", 2}}},
            {"algorithm", {{"variant", "c-nca"}, {"schedules", {{"c_a", 0.1}, {"c_c", 1.0}}}}},
            {"horizon", 1000},
            {"eval_every", 100},
            {"seeds", 2}};
}

std::string write_config(const std::string& dir, const json& cfg, const std::string& name = "config.json") {
    const std::string path = dir + "/" + name;
    write_file_atomic(path, cfg.dump(2));
    return path;
}

std::string config_error(const json& cfg) {
    try {
        parse_config(cfg, ".");
    } catch (const Error& e) {
        return e.what();
    }
    return "";
}

int count_lines(const std::string& text) {
    int n = 0;
    for (char c : text) n += c == '\n';
    return n;
}

std::vector<std::string> csv_last_row(const std::string& csv) {
    std::istringstream in(csv);
    std::string line, last;
    while (std::getline(in, line))
        if (!line.empty()) last = line;
    std::vector<std::string> cells;
    std::stringstream ss(last);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    return cells;
}

CliOverrides to_dir(const std::string& dir) {
    CliOverrides cli;
    cli.out_dir = dir;
    return cli;
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("config field errors name the field") {
    json cfg = minimal_config();
    cfg["horizon"] = 0;
    CHECK(config_error(cfg).find("config error: horizon") != std::string::npos);

    cfg = minimal_config();
    cfg.erase("horizon");
    CHECK(config_error(cfg).find("horizon: missing") != std::string::npos);

    cfg = minimal_config();
    cfg["algorithm"]["schedules"]["c_a"] = -1.0;
    CHECK(config_error(cfg).find("algorithm.schedules.c_a") != std::string::npos);

    cfg = minimal_config();
    cfg["algorithm"]["learning_rate"] = 0.1;
    CHECK(config_error(cfg).find("unknown field") != std::string::npos);

    cfg = minimal_config();
    cfg["env"]["n_actions"] = 3;
    CHECK(config_error(cfg).find("env.n_actions") != std::string::npos);

    cfg = minimal_config();
    cfg["seeds"] = "many";
    CHECK(config_error(cfg).find("seeds") != std::string::npos);

    cfg = minimal_config();
    cfg["instance"] = "somewhere.json";
    CHECK(config_error(cfg).find("either env or instance") != std::string::npos);

    CHECK(config_error(minimal_config()).empty());
}

TEST_CASE("seed lists") {
    CHECK(parse_seeds("3") == std::vector<std::uint64_t>{1, 2, 3});
    CHECK(parse_seeds("4,9,2") == std::vector<std::uint64_t>{4, 9, 2});
    CHECK_THROWS(parse_seeds("0"));
    CHECK_THROWS(parse_seeds("1,x"));
}

TEST_CASE("variant labels round-trip") {
    VariantSpec v = VariantSpec::parse("c-ac/modified");
    CHECK(v.variant == Variant::CAC);
    CHECK(v.modified);
    CHECK(v.label() == "c-ac/modified");
    CHECK(VariantSpec::parse("c-nca/standard") == VariantSpec{});
    CHECK_THROWS(VariantSpec::parse("c-nca/fast"));
}

TEST_CASE("output directory precedence") {
    ExperimentConfig cfg;
    CliOverrides cli;
    ::unsetenv(kOutDirEnv);
    CHECK(resolve_out_dir(cfg, cli) == "out");
    ::setenv(kOutDirEnv, "/tmp/from_env", 1);
    CHECK(resolve_out_dir(cfg, cli) == "/tmp/from_env");
    cfg.output_dir = "from_config";
    CHECK(resolve_out_dir(cfg, cli) == "from_config");
    cli.out_dir = "from_flag";
    CHECK(resolve_out_dir(cfg, cli) == "from_flag");
    ::unsetenv(kOutDirEnv);
}

TEST_CASE("run writes one CSV per seed with the documented row count") {
    const std::string dir = scratch_dir("harness_run");
    json cfg = minimal_config();
    cfg["horizon"] = 1050;
    const std::string path = write_config(dir, cfg);
    std::ostringstream out, err;
    REQUIRE(cmd_run(path, to_dir(dir + "/out"), out, err) == 0);
    for (int seed : {1, 2}) {
        const std::string csv = read_file(dir + "/out/metrics_seed_" + std::to_string(seed) + ".csv");
        CHECK(count_lines(csv) == 1 + 1050 / 100 + 1);  // header plus floor(h/e) + 1 rows
    }
    json summary = json::parse(read_file(dir + "/out/summary.json"));
    CHECK(summary["runs"].size() == 2);
    CHECK(summary["variant"] == "c-nca");
}

TEST_CASE("rerunning a config reproduces the outputs byte for byte") {
    const std::string dir = scratch_dir("harness_rerun");
    const std::string path = write_config(dir, minimal_config());
    std::ostringstream out, err;
    REQUIRE(cmd_run(path, to_dir(dir + "/a"), out, err) == 0);
    CliOverrides two = to_dir(dir + "/b");
    two.jobs = 2;
    REQUIRE(cmd_run(path, two, out, err) == 0);
    for (const char* name : {"metrics_seed_1.csv", "metrics_seed_2.csv", "summary.json"})
        CHECK(read_file(dir + "/a/" + name) == read_file(dir + "/b/" + name));
}

TEST_CASE("run with 2 sigma >= 3 nu reports the violated constraint") {
    const std::string dir = scratch_dir("harness_sigma");
    json cfg = minimal_config();
    cfg["algorithm"]["schedules"]["nu"] = 0.5;
    cfg["algorithm"]["schedules"]["sigma"] = 0.9;
    cfg["algorithm"]["schedules"]["beta"] = 1.0;
    std::ostringstream out, err;
    CHECK(cmd_run(write_config(dir, cfg), to_dir(dir + "/out"), out, err) != 0);
    CHECK(err.str().find("schedule constraint violated: 2σ < 3ν") != std::string::npos);
    CHECK_FALSE(fs::exists(dir + "/out/summary.json"));
}

TEST_CASE("run reports config errors with a nonzero exit") {
    const std::string dir = scratch_dir("harness_bad");
    json cfg = minimal_config();
    cfg["eval_every"] = -3;
    std::ostringstream out, err;
    CHECK(cmd_run(write_config(dir, cfg), to_dir(dir + "/out"), out, err) == 2);
    CHECK(err.str().find("eval_every") != std::string::npos);
}

TEST_CASE("sweep standard errors are the seed standard deviation over root n") {
    const std::string dir = scratch_dir("harness_sweep");
    json cfg = minimal_config();
    cfg["seeds"] = 10;
    cfg["horizon"] = 500;
    cfg["eval_every"] = 50;
    std::ostringstream out, err;
    REQUIRE(cmd_sweep(write_config(dir, cfg), std::string("c-nca,c-ac"), to_dir(dir + "/out"), out, err) == 0);
    json rows = json::parse(read_file(dir + "/out/sweep.json"))["rows"];
    REQUIRE(rows.size() == 2);
    for (const auto& row : rows) {
        std::string sub = row["variant"].get<std::string>();
        std::vector<double> gaps;
        for (int seed = 1; seed <= 10; ++seed) {
            auto cells = csv_last_row(read_file(dir + "/out/" + sub + "/metrics_seed_" + std::to_string(seed) + ".csv"));
            gaps.push_back(std::stod(cells.back()));
        }
        double mean = 0.0, ss = 0.0;
        for (double g : gaps) mean += g / 10.0;
        for (double g : gaps) ss += (g - mean) * (g - mean);
        CHECK(row["gap_mean"][0].get<double>() == doctest::Approx(mean).epsilon(1e-12));
        CHECK(row["gap_stderr"][0].get<double>() == doctest::Approx(std::sqrt(ss / 9.0) / std::sqrt(10.0)).epsilon(1e-12));
    }
    CHECK(fs::exists(dir + "/out/sweep.txt"));
}

TEST_CASE("a variant listed twice gives identical rows") {
    const std::string dir = scratch_dir("harness_twice");
    json cfg = minimal_config();
    cfg["horizon"] = 300;
    std::ostringstream out, err;
    REQUIRE(cmd_sweep(write_config(dir, cfg), std::string("c-nca,c-nca"), to_dir(dir + "/out"), out, err) == 0);
    json rows = json::parse(read_file(dir + "/out/sweep.json"))["rows"];
    REQUIRE(rows.size() == 2);
    CHECK(rows[0] == rows[1]);
}

TEST_CASE("sweep rejects mixed horizons and single seeds") {
    const std::string dir = scratch_dir("harness_mixed");
    json cfg = minimal_config();
    cfg["variants"] = json::array({"c-nca", json{{"variant", "c-ac"}, {"horizon", 2000}}});
    std::ostringstream out, err;
    CHECK(cmd_sweep(write_config(dir, cfg), std::nullopt, to_dir(dir + "/out"), out, err) == 2);
    CHECK(err.str().find("mixed horizons") != std::string::npos);

    json single = minimal_config();
    single["seeds"] = json::array({3});
    std::ostringstream err2;
    CHECK(cmd_sweep(write_config(dir, single, "single.json"), std::string("c-nca"), to_dir(dir + "/out"), out,
                    err2) == 2);
    CHECK(err2.str().find("at least 2 seeds") != std::string::npos);
}

TEST_CASE("oracle on a one-state instance prints its single cost") {
    const std::string dir = scratch_dir("harness_oracle1");
    json inst = {{"n_states", 1}, {"n_actions", 1}, {"transition", {{{1.0}}}}, {"cost", {{0.3}}},
                 {"thresholds", json::array()}};
    write_file_atomic(dir + "/one.json", inst.dump());
    OracleRequest req;
    req.instance_path = dir + "/one.json";
    std::ostringstream out, err;
    REQUIRE(cmd_oracle(req, std::nullopt, out, err) == 0);
    json sol = json::parse(out.str());
    CHECK(sol["J"].get<double>() == doctest::Approx(0.3));
}

TEST_CASE("oracle with one-hot features reports zero approximation error") {
    const std::string dir = scratch_dir("harness_oracle2");
    GenRequest gen;
    gen.kind = EnvKind::RandomErgodic;
    gen.n_states = 4;
    gen.n_actions = 2;
    gen.n_constraints = 1;
    gen.seed = 5;
    std::ostringstream out, err;
    REQUIRE(cmd_gen(gen, to_dir(dir), out, err) == 0);
    const std::string path = dir + "/instance_random_ergodic_5.json";
    REQUIRE(fs::exists(path));
    InstanceDocument doc = load_instance(path);
    doc.state_features.reset();  // oracle falls back to one-hot
    save_instance(path, doc);

    OracleRequest req;
    req.instance_path = path;
    req.gamma = "0.5";
    std::ostringstream o2;
    REQUIRE(cmd_oracle(req, dir + "/oracle.json", o2, err) == 0);
    json sol = json::parse(read_file(dir + "/oracle.json"));
    CHECK(std::abs(sol["eps_app"].get<double>()) < 1e-9);

    req.gamma = "5";
    req.multiplier_cap = 2.0;
    std::ostringstream o3, e3;
    CHECK(cmd_oracle(req, std::nullopt, o3, e3) != 0);
    CHECK(e3.str().find("outside [0, 2]") != std::string::npos);
    req.gamma = "-0.1";
    std::ostringstream e4;
    CHECK(cmd_oracle(req, std::nullopt, o3, e4) != 0);
}

TEST_CASE("gen output feeds back into a run") {
    const std::string dir = scratch_dir("harness_gen");
    GenRequest gen;
    gen.kind = EnvKind::BindingChain;
    gen.seed = 3;
    gen.d1 = 3;
    std::ostringstream out, err;
    REQUIRE(cmd_gen(gen, to_dir(dir), out, err) == 0);
    json cfg = {{"instance", "instance_binding_chain_3.json"}, {"horizon", 200}, {"seeds", 1}};
    std::ostringstream o2, e2;
    CHECK(cmd_run(write_config(dir, cfg), to_dir(dir + "/out"), o2, e2) == 0);
    json summary = json::parse(read_file(dir + "/out/summary.json"));
    CHECK(summary["instance"]["features"]["kind"] == "instance file");
}

TEST_CASE("verify surfaces a corrupted instance with its path") {
    const std::string dir = scratch_dir("harness_corrupt");
    GenRequest gen;
    gen.kind = EnvKind::BindingChain;
    gen.seed = 1;
    std::ostringstream out, err;
    REQUIRE(cmd_gen(gen, to_dir(dir), out, err) == 0);
    const std::string path = dir + "/instance_binding_chain_1.json";
    json doc = json::parse(read_file(path));
    doc["cost"][0][0] = -1.0;
    write_file_atomic(path, doc.dump());

    VerifyRequest req;
    req.instance_path = path;
    req.quick = true;
    req.only = "instance file";
    std::ostringstream o2, e2;
    CHECK(cmd_verify(req, CliOverrides{}, o2, e2) == 1);
    CHECK(o2.str().find(path + ": negative cost") != std::string::npos);
}

TEST_CASE("verify twice gives identical reports") {
    const std::string dir = scratch_dir("harness_verify");
    VerifyRequest req;
    req.quick = true;
    req.only = "schedules";
    std::ostringstream out, err;
    REQUIRE(cmd_verify(req, to_dir(dir + "/a"), out, err) == 0);
    REQUIRE(cmd_verify(req, to_dir(dir + "/b"), out, err) == 0);
    CHECK(read_file(dir + "/a/verify_report.json") == read_file(dir + "/b/verify_report.json"));
}

TEST_CASE("parallel_for covers every index and rethrows the first failure") {
    std::vector<int> hit(50, 0);
    parallel_for(50, 4, [&](int i) { hit[i] += 1; });
    for (int h : hit) CHECK(h == 1);
    CHECK_THROWS_WITH(parallel_for(10, 3, [](int i) {
                          if (i == 2 || i == 7) throw Error("boom " + std::to_string(i));
                      }),
                      "boom 2");
}

}
