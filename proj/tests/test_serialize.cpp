#include "cnca/envs.hpp"
#include "cnca/serialize.hpp"
#include "support.hpp"

#include <doctest.h>

#include <filesystem>

using namespace cnca;
using namespace cnca::testing;

TEST_SUITE("serialize") {

TEST_CASE("instance documents round-trip value-identically") {
    EnvSpec spec;
    spec.seed = 77;
    InstanceDocument doc;
    doc.model = random_ergodic_cmdp(spec);
    doc.sa_features = make_sa_features(spec.n_states, spec.n_actions, SaFeatureKind::Random, 4, 2);
    doc.state_features = make_features(doc.model, FeatureKind::RandomProjection, 3, 5);
    doc.metadata = {{"note", "round trip"}};

    const std::string dir = scratch_dir("serialize");
    const std::string path = dir + "/inst.json";
    save_instance(path, doc);
    InstanceDocument back = load_instance(path);

    const Cmdp& a = doc.model;
    const Cmdp& b = back.model;
    CHECK(a.n_states == b.n_states);
    CHECK(a.n_actions == b.n_actions);
    for (int s = 0; s < a.n_states; ++s) CHECK(a.transition[s] == b.transition[s]);
    CHECK(a.cost == b.cost);
    REQUIRE(b.n_constraints() == a.n_constraints());
    for (int k = 0; k < a.n_constraints(); ++k) CHECK(a.constraint_costs[k] == b.constraint_costs[k]);
    CHECK(a.thresholds == b.thresholds);
    CHECK(a.cost_bound == b.cost_bound);
    REQUIRE(back.sa_features.has_value());
    CHECK(back.sa_features->table == doc.sa_features->table);
    REQUIRE(back.state_features.has_value());
    CHECK(back.state_features->matrix == doc.state_features->matrix);
    CHECK(back.metadata == doc.metadata);

    save_instance(dir + "/again.json", back);
    CHECK(read_file(path) == read_file(dir + "/again.json"));
}

TEST_CASE("unknown and missing fields are rejected") {
    json j = to_json(InstanceDocument{binding_chain_cmdp(4, 1).model});
    json extra = j;
    extra["discount"] = 0.9;
    CHECK_THROWS_WITH(instance_from_json(extra), doctest::Contains("unknown instance field 'discount'"));
    json missing = j;
    missing.erase("cost");
    CHECK_THROWS_WITH(instance_from_json(missing), doctest::Contains("missing instance field 'cost'"));
    json bad_shape = j;
    bad_shape["transition"][0].erase(0);
    CHECK_THROWS(instance_from_json(bad_shape));
}

TEST_CASE("load errors carry the file path") {
    const std::string dir = scratch_dir("serialize_errors");
    const std::string path = dir + "/broken.json";
    write_file_atomic(path, "{ not json");
    CHECK_THROWS_WITH(load_instance(path), doctest::Contains(path.c_str()));
    CHECK_THROWS_WITH(load_instance(dir + "/absent.json"), doctest::Contains("absent.json"));
}

TEST_CASE("atomic writes leave no temporary file behind") {
    const std::string dir = scratch_dir("serialize_atomic");
    write_file_atomic(dir + "/x.txt", "one");
    write_file_atomic(dir + "/x.txt", "two");
    CHECK(read_file(dir + "/x.txt") == "two");
    CHECK_FALSE(std::filesystem::exists(dir + "/x.txt.tmp"));
}

}
