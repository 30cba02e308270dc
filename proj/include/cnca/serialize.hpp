#pragma once

#include "cnca/cmdp.hpp"
#include "cnca/oracle.hpp"
#include "cnca/policy.hpp"

#include <json.hpp>

#include <optional>
#include <string>

namespace cnca {

using json = nlohmann::json;

/// Instance document: the CMDP plus optional feature tables and free-form metadata.
struct InstanceDocument {
    Cmdp model;
    std::optional<SaFeatures> sa_features;
    std::optional<StateFeatures> state_features;
    json metadata = json::object();
};

json to_json(const InstanceDocument& doc);
/// Strict: unknown top-level fields and shape mismatches throw.
InstanceDocument instance_from_json(const json& j);

InstanceDocument load_instance(const std::string& path);
void save_instance(const std::string& path, const InstanceDocument& doc);

json to_json(const OracleSolution& sol);

json vec_to_json(const Vec& v);
Vec vec_from_json(const json& j, const std::string& what);
json mat_to_json(const Mat& m);
Mat mat_from_json(const json& j, const std::string& what);

/// Writes to a temporary sibling and renames over `path`.
void write_file_atomic(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

}  // namespace cnca
