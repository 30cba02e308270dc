#include "cnca/serialize.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace cnca {

json vec_to_json(const Vec& v) {
    json out = json::array();
    for (int i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

Vec vec_from_json(const json& j, const std::string& what) {
    if (!j.is_array()) throw Error(what + ": expected an array of numbers");
    Vec v(static_cast<int>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw Error(what + ": entry " + std::to_string(i) + " is not a number");
        v[static_cast<int>(i)] = j[i].get<double>();
    }
    return v;
}

json mat_to_json(const Mat& m) {
    json out = json::array();
    for (int r = 0; r < m.rows(); ++r) out.push_back(vec_to_json(m.row(r).transpose()));
    return out;
}

Mat mat_from_json(const json& j, const std::string& what) {
    if (!j.is_array()) throw Error(what + ": expected a nested array");
    if (j.empty()) return Mat();
    Mat m(static_cast<int>(j.size()), static_cast<int>(j[0].size()));
    for (std::size_t r = 0; r < j.size(); ++r) {
        Vec row = vec_from_json(j[r], what + "[" + std::to_string(r) + "]");
        if (row.size() != m.cols()) throw Error(what + ": ragged rows");
        m.row(static_cast<int>(r)) = row.transpose();
    }
    return m;
}

json to_json(const InstanceDocument& doc) {
    const Cmdp& m = doc.model;
    json j;
    j["n_states"] = m.n_states;
    j["n_actions"] = m.n_actions;
    json transition = json::array();
    for (const Mat& rows : m.transition) transition.push_back(mat_to_json(rows));
    j["transition"] = transition;
    j["cost"] = mat_to_json(m.cost);
    json constraints = json::array();
    for (const Mat& h : m.constraint_costs) constraints.push_back(mat_to_json(h));
    j["constraint_costs"] = constraints;
    j["thresholds"] = vec_to_json(m.thresholds);
    j["cost_bound"] = m.cost_bound;
    if (doc.sa_features) {
        const SaFeatures& f = *doc.sa_features;
        json sa = json::array();
        for (int s = 0; s < f.n_states; ++s) {
            json per_action = json::array();
            for (int a = 0; a < f.n_actions; ++a) per_action.push_back(vec_to_json(f.row(s, a).transpose()));
            sa.push_back(per_action);
        }
        j["sa_features"] = sa;
    }
    if (doc.state_features) j["state_features"] = mat_to_json(doc.state_features->matrix);
    if (!doc.metadata.empty()) j["metadata"] = doc.metadata;
    return j;
}

InstanceDocument instance_from_json(const json& j) {
    static const std::set<std::string> known{"n_states",    "n_actions",   "transition",     "cost",
                                             "constraint_costs", "thresholds", "cost_bound", "sa_features",
                                             "state_features",   "metadata"};
    if (!j.is_object()) throw Error("instance document must be an object");
    for (const auto& [key, _] : j.items())
        if (!known.count(key)) throw Error("unknown instance field '" + key + "'");
    for (const char* required : {"n_states", "n_actions", "transition", "cost", "thresholds"})
        if (!j.contains(required)) throw Error(std::string("missing instance field '") + required + "'");

    InstanceDocument doc;
    Cmdp& m = doc.model;
    m.n_states = j.at("n_states").get<int>();
    m.n_actions = j.at("n_actions").get<int>();
    const json& tr = j.at("transition");
    if (!tr.is_array() || static_cast<int>(tr.size()) != m.n_states)
        throw Error("transition: expected n_states entries");
    for (std::size_t s = 0; s < tr.size(); ++s) {
        Mat rows = mat_from_json(tr[s], "transition[" + std::to_string(s) + "]");
        if (rows.rows() != m.n_actions || rows.cols() != m.n_states)
            throw Error("transition[" + std::to_string(s) + "]: expected n_actions x n_states");
        m.transition.push_back(rows);
    }
    m.cost = mat_from_json(j.at("cost"), "cost");
    if (j.contains("constraint_costs"))
        for (std::size_t k = 0; k < j.at("constraint_costs").size(); ++k)
            m.constraint_costs.push_back(
                mat_from_json(j.at("constraint_costs")[k], "constraint_costs[" + std::to_string(k) + "]"));
    m.thresholds = vec_from_json(j.at("thresholds"), "thresholds");
    if (j.contains("cost_bound")) m.cost_bound = j.at("cost_bound").get<double>();

    if (j.contains("sa_features")) {
        const json& sa = j.at("sa_features");
        if (!sa.is_array() || static_cast<int>(sa.size()) != m.n_states)
            throw Error("sa_features: expected n_states entries");
        SaFeatures f;
        f.n_states = m.n_states;
        f.n_actions = m.n_actions;
        for (int s = 0; s < m.n_states; ++s) {
            Mat per_action = mat_from_json(sa[s], "sa_features[" + std::to_string(s) + "]");
            if (per_action.rows() != m.n_actions) throw Error("sa_features: expected n_actions rows per state");
            if (s == 0) f.table.resize(m.n_states * m.n_actions, per_action.cols());
            if (per_action.cols() != f.table.cols() || per_action.cols() == 0)
                throw Error("sa_features: inconsistent feature dimension");
            f.table.middleRows(s * m.n_actions, m.n_actions) = per_action;
        }
        doc.sa_features = f;
    }
    if (j.contains("state_features")) doc.state_features = StateFeatures{mat_from_json(j.at("state_features"), "state_features")};
    if (j.contains("metadata")) doc.metadata = j.at("metadata");
    return doc;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const std::string& path, const std::string& contents) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write '" + tmp + "'");
        out << contents;
        if (!out) throw Error("write failed for '" + tmp + "'");
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) throw Error("cannot rename '" + tmp + "' to '" + path + "'");
}

InstanceDocument load_instance(const std::string& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw Error(path + ": " + e.what());
    }
    try {
        return instance_from_json(j);
    } catch (const std::exception& e) {
        throw Error(path + ": " + e.what());
    }
}

void save_instance(const std::string& path, const InstanceDocument& doc) {
    write_file_atomic(path, to_json(doc).dump(2) + "\n");
}

json to_json(const OracleSolution& sol) {
    json j;
    j["mu"] = vec_to_json(sol.mu);
    j["J"] = sol.J;
    j["G"] = vec_to_json(sol.G);
    j["L"] = sol.L;
    j["V"] = vec_to_json(sol.V);
    j["Q"] = mat_to_json(sol.Q);
    j["advantage"] = mat_to_json(sol.advantage);
    j["A"] = mat_to_json(sol.A);
    j["b"] = vec_to_json(sol.b);
    j["v_star"] = sol.v_star ? vec_to_json(*sol.v_star) : json(nullptr);
    j["lambda_e"] = sol.lambda_e;
    j["grad"] = vec_to_json(sol.grad);
    j["eps_app"] = sol.eps_app ? json(*sol.eps_app) : json(nullptr);
    j["audit"] = sol.audit;
    return j;
}

}  // namespace cnca
