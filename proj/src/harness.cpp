#include "cnca/harness.hpp"

#include "cnca/verify.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iomanip>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;

namespace cnca {

namespace {

class ConfigError : public Error {
public:
    ConfigError(const std::string& path, const std::string& message)
        : Error("config error: " + (path.empty() ? std::string("(root)") : path) + ": " + message) {}
};

// Strict reader over one JSON object; remembers which keys were consumed.
class Fields {
public:
    Fields(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) throw ConfigError(path_, "expected an object");
    }

    bool has(const std::string& key) const { return obj_.contains(key); }

    const json* raw(const std::string& key) {
        seen_.insert(key);
        auto it = obj_.find(key);
        return it == obj_.end() ? nullptr : &*it;
    }

    std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    std::optional<double> number(const std::string& key) {
        const json* v = raw(key);
        if (!v) return std::nullopt;
        if (!v->is_number()) throw ConfigError(at(key), "expected a number");
        return v->get<double>();
    }

    std::optional<long> integer(const std::string& key) {
        const json* v = raw(key);
        if (!v) return std::nullopt;
        if (!v->is_number_integer()) throw ConfigError(at(key), "expected an integer");
        return v->get<long>();
    }

    std::optional<bool> boolean(const std::string& key) {
        const json* v = raw(key);
        if (!v) return std::nullopt;
        if (!v->is_boolean()) throw ConfigError(at(key), "expected true or false");
        return v->get<bool>();
    }

    std::optional<std::string> string(const std::string& key) {
        const json* v = raw(key);
        if (!v) return std::nullopt;
        if (!v->is_string()) throw ConfigError(at(key), "expected a string");
        return v->get<std::string>();
    }

    std::optional<Fields> object(const std::string& key) {
        const json* v = raw(key);
        if (!v) return std::nullopt;
        return Fields(*v, at(key));
    }

    // Parses an enum-like string through `parse`, rewrapping its error with the field path.
    template <class T, class F>
    std::optional<T> choice(const std::string& key, F parse) {
        auto text = string(key);
        if (!text) return std::nullopt;
        try {
            return parse(*text);
        } catch (const Error& e) {
            throw ConfigError(at(key), e.what());
        }
    }

    void finish() const {
        for (const auto& [key, _] : obj_.items())
            if (!seen_.count(key)) throw ConfigError(at(key), "unknown field");
    }

private:
    const json& obj_;
    std::string path_;
    std::set<std::string> seen_;
};

double positive(Fields& f, const std::string& key, double fallback) {
    double v = f.number(key).value_or(fallback);
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(f.at(key), "must be finite and positive");
    return v;
}

long at_least(Fields& f, const std::string& key, long fallback, long lo) {
    long v = f.integer(key).value_or(fallback);
    if (v < lo) throw ConfigError(f.at(key), "must be at least " + std::to_string(lo));
    return v;
}

std::uint64_t seed_value(const json& v, const std::string& path) {
    if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError(path, "expected a non-negative integer");
    return v.get<std::uint64_t>();
}

VariantSpec parse_variant_entry(const json& v, const std::string& path, long default_horizon, long& horizon) {
    horizon = default_horizon;
    if (v.is_string()) {
        try {
            return VariantSpec::parse(v.get<std::string>());
        } catch (const Error& e) {
            throw ConfigError(path, e.what());
        }
    }
    Fields f(v, path);
    VariantSpec spec;
    auto name = f.string("variant");
    if (!name) throw ConfigError(f.at("variant"), "missing");
    try {
        spec.variant = parse_variant(*name);
    } catch (const Error& e) {
        throw ConfigError(f.at("variant"), e.what());
    }
    spec.modified = f.boolean("modified").value_or(false);
    horizon = at_least(f, "horizon", default_horizon, 1);
    f.finish();
    return spec;
}

std::string fmt(double x) {
    std::ostringstream os;
    os << std::setprecision(6) << x;
    return os.str();
}

std::string file_label(const VariantSpec& v) {
    std::string label = v.label();
    std::replace(label.begin(), label.end(), '/', '_');
    return label;
}

json rate_json(const MetricsLog& log, const std::string& field, long t0, long t1) {
    try {
        RateFit fit = fit_rate(log, field_by_name(field), t0, t1);
        return {{"t0", fit.t0}, {"t1", fit.t1}, {"slope", fit.slope}, {"intercept", fit.intercept},
                {"r2", fit.r2}, {"n_points", fit.n_points}};
    } catch (const Error& e) {
        return {{"t0", t0}, {"t1", t1}, {"error", e.what()}};
    }
}

double mean_of(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

double stderr_of(const std::vector<double>& xs) {
    const double n = static_cast<double>(xs.size());
    if (xs.size() < 2) return 0.0;
    const double m = mean_of(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error("cannot create output directory '" + dir + "': " + ec.message());
}

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

std::vector<double> parse_number_list(const std::string& text, const std::string& what) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw Error(what + ": '" + item + "' is not a number");
        }
    }
    return out;
}

}  // namespace

std::string VariantSpec::label() const { return to_string(variant) + (modified ? "/modified" : ""); }

VariantSpec VariantSpec::parse(const std::string& text) {
    VariantSpec spec;
    const auto slash = text.find('/');
    spec.variant = parse_variant(text.substr(0, slash));
    if (slash != std::string::npos) {
        const std::string suffix = text.substr(slash + 1);
        if (suffix == "modified") spec.modified = true;
        else if (suffix != "standard") throw Error("unknown schedule suffix '" + suffix + "' in '" + text + "'");
    }
    return spec;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    auto parse_one = [&](const std::string& item) -> std::uint64_t {
        if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos)
            throw Error("seeds: '" + item + "' is not a non-negative integer");
        return std::stoull(item);
    };
    if (text.find(',') == std::string::npos) {
        const std::uint64_t n = parse_one(text);
        if (n == 0) throw Error("seeds: need at least one seed");
        for (std::uint64_t s = 1; s <= n; ++s) seeds.push_back(s);
        return seeds;
    }
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) seeds.push_back(parse_one(item));
    return seeds;
}

ExperimentConfig parse_config(const json& doc, const std::string& base_dir) {
    ExperimentConfig cfg;
    Fields root(doc, "");

    bool has_env = false;
    if (auto env = root.object("env")) {
        has_env = true;
        if (auto kind = env->choice<EnvKind>("kind", parse_env_kind)) cfg.env.kind = *kind;
        const bool chain = cfg.env.kind == EnvKind::BindingChain;
        cfg.env.n_states = static_cast<int>(at_least(*env, "n_states", chain ? 6 : cfg.env.n_states, chain ? 3 : 1));
        cfg.env.n_actions = static_cast<int>(at_least(*env, "n_actions", chain ? 2 : cfg.env.n_actions, 1));
        cfg.env.n_constraints =
            static_cast<int>(at_least(*env, "n_constraints", chain ? 1 : cfg.env.n_constraints, 0));
        if (chain && cfg.env.n_actions != 2) throw ConfigError(env->at("n_actions"), "binding_chain has 2 actions");
        if (chain && cfg.env.n_constraints != 1)
            throw ConfigError(env->at("n_constraints"), "binding_chain has 1 constraint");
        if (const json* s = env->raw("seed")) cfg.env.seed = seed_value(*s, env->at("seed"));
        cfg.env.min_transition_prob = positive(*env, "min_transition_prob", cfg.env.min_transition_prob);
        if (cfg.env.min_transition_prob * cfg.env.n_states >= 1.0)
            throw ConfigError(env->at("min_transition_prob"), "rho * n_states must be below 1");
        cfg.env.cost_bound = positive(*env, "cost_bound", cfg.env.cost_bound);
        env->finish();
    }
    if (auto path = root.string("instance")) {
        if (has_env) throw ConfigError("instance", "give either env or instance, not both");
        fs::path p(*path);
        if (p.is_relative()) p = fs::path(base_dir) / p;
        if (!fs::exists(p)) throw ConfigError("instance", "file '" + p.string() + "' does not exist");
        cfg.instance_path = p.string();
    }

    if (auto f = root.object("features")) {
        if (auto kind = f->choice<FeatureKind>("kind", parse_feature_kind)) cfg.features.kind = *kind;
        if (f->has("d1")) cfg.features.d1 = static_cast<int>(at_least(*f, "d1", 0, 1));
        if (const json* s = f->raw("seed")) cfg.features.seed = seed_value(*s, f->at("seed"));
        cfg.features.audit = f->boolean("audit").value_or(true);
        f->finish();
    }
    if (auto f = root.object("policy_features")) {
        if (auto kind = f->choice<SaFeatureKind>("kind", parse_sa_feature_kind)) cfg.policy_features.kind = *kind;
        cfg.policy_features.dim = static_cast<int>(at_least(*f, "dim", 0, 0));
        if (cfg.policy_features.kind == SaFeatureKind::Random && cfg.policy_features.dim < 1)
            throw ConfigError(f->at("dim"), "random policy features need dim >= 1");
        if (const json* s = f->raw("seed")) cfg.policy_features.seed = seed_value(*s, f->at("seed"));
        f->finish();
    }

    if (auto a = root.object("algorithm")) {
        if (auto v = a->choice<Variant>("variant", parse_variant)) cfg.variant.variant = *v;
        cfg.variant.modified = a->boolean("modified").value_or(false);
        if (auto s = a->object("schedules")) {
            ScheduleConfig& sc = cfg.schedules;
            sc.mode = s->choice<ScheduleMode>("mode", parse_schedule_mode);
            sc.nu = s->number("nu");
            sc.sigma = s->number("sigma");
            sc.beta = s->number("beta");
            sc.delta = s->number("delta").value_or(kDefaultDelta);
            if (s->has("delta") && !(sc.delta > 0.0)) throw ConfigError(s->at("delta"), "must be positive");
            sc.coefficients.c_a = positive(*s, "c_a", sc.coefficients.c_a);
            sc.coefficients.c_b = positive(*s, "c_b", sc.coefficients.c_b);
            sc.coefficients.c_c = positive(*s, "c_c", sc.coefficients.c_c);
            sc.coefficients.c_d = positive(*s, "c_d", sc.coefficients.c_d);
            if (sc.mode && a->has("modified") && (*sc.mode == ScheduleMode::Modified) != cfg.variant.modified)
                throw ConfigError(s->at("mode"), "conflicts with algorithm.modified");
            if (sc.mode && !a->has("modified")) cfg.variant.modified = *sc.mode == ScheduleMode::Modified;
            s->finish();
        }
        cfg.projection_radius = positive(*a, "projection_radius", cfg.projection_radius);
        cfg.multiplier_cap = positive(*a, "multiplier_cap", cfg.multiplier_cap);
        cfg.fisher_init = positive(*a, "fisher_init", cfg.fisher_init);
        cfg.cost_noise = a->number("cost_noise").value_or(0.0);
        if (cfg.cost_noise < 0.0) throw ConfigError(a->at("cost_noise"), "must be non-negative");
        cfg.update_actor = a->boolean("update_actor").value_or(true);
        cfg.update_multipliers = a->boolean("update_multipliers").value_or(true);
        a->finish();
    }

    auto horizon = root.integer("horizon");
    if (!horizon) throw ConfigError("horizon", "missing");
    if (*horizon < 1) throw ConfigError("horizon", "must be at least 1");
    cfg.horizon = *horizon;
    cfg.eval_every = at_least(root, "eval_every", cfg.eval_every, 1);

    if (const json* s = root.raw("seeds")) {
        if (s->is_number_integer()) {
            if (s->get<long long>() < 1) throw ConfigError("seeds", "need at least one seed");
            for (std::uint64_t i = 1; i <= s->get<std::uint64_t>(); ++i) cfg.seeds.push_back(i);
        } else if (s->is_array()) {
            for (std::size_t i = 0; i < s->size(); ++i)
                cfg.seeds.push_back(seed_value((*s)[i], "seeds[" + std::to_string(i) + "]"));
            if (cfg.seeds.empty()) throw ConfigError("seeds", "need at least one seed");
        } else {
            throw ConfigError("seeds", "expected a count or a list of integers");
        }
    } else {
        cfg.seeds = {1};
    }

    cfg.output_dir = root.string("output_dir");
    cfg.c_tau = positive(root, "c_tau", cfg.c_tau);
    cfg.gap_tolerance = root.number("gap_tolerance").value_or(cfg.gap_tolerance);
    if (const json* w = root.raw("fit_window")) {
        if (!w->is_array() || w->size() != 2 || !(*w)[0].is_number_integer() || !(*w)[1].is_number_integer())
            throw ConfigError("fit_window", "expected [t0, t1] integers");
        long t0 = (*w)[0].get<long>(), t1 = (*w)[1].get<long>();
        if (!(0 < t0 && t0 < t1)) throw ConfigError("fit_window", "need 0 < t0 < t1");
        cfg.fit_window = std::pair{t0, t1};
    }
    if (const json* v = root.raw("variants")) {
        if (!v->is_array() || v->empty()) throw ConfigError("variants", "expected a non-empty list");
        for (std::size_t i = 0; i < v->size(); ++i) {
            SweepEntry entry;
            entry.spec = parse_variant_entry((*v)[i], "variants[" + std::to_string(i) + "]", cfg.horizon,
                                             entry.horizon);
            cfg.variants.push_back(entry);
        }
    }
    root.finish();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    json doc;
    try {
        doc = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw Error("config error: " + path + ": " + e.what());
    }
    const std::string dir = fs::path(path).parent_path().string();
    return parse_config(doc, dir.empty() ? "." : dir);
}

PreparedExperiment prepare(const ExperimentConfig& cfg, const VariantSpec& variant) {
    PreparedExperiment out;
    Instance& inst = out.instance;
    json info;

    std::optional<InstanceDocument> doc;
    if (cfg.instance_path) {
        doc = load_instance(*cfg.instance_path);
        inst.model = doc->model;
        info["source"] = *cfg.instance_path;
        if (!doc->metadata.empty()) info["metadata"] = doc->metadata;
    } else if (cfg.env.kind == EnvKind::BindingChain) {
        BindingChain chain = binding_chain_cmdp(cfg.env.n_states, cfg.env.seed);
        inst.model = chain.model;
        info["source"] = "binding_chain";
        info["binding_chain"] = {{"greedy_G", chain.info.greedy_G}, {"safe_G", chain.info.safe_G},
                                 {"alpha", chain.info.alpha},       {"margin_low", chain.info.margin_low},
                                 {"margin_high", chain.info.margin_high}};
    } else {
        inst.model = random_ergodic_cmdp(cfg.env);
        info["source"] = "random_ergodic";
    }
    info["seed"] = cfg.env.seed;
    ValidationReport rep = validate_cmdp(inst.model);
    if (!rep.ok())
        throw Error((cfg.instance_path ? *cfg.instance_path + ": " : std::string("instance: ")) +
                    rep.violations.front());
    const int n = inst.model.n_states;
    info["n_states"] = n;
    info["n_actions"] = inst.model.n_actions;
    info["n_constraints"] = inst.model.n_constraints();
    info["thresholds"] = vec_to_json(inst.model.thresholds);

    if (doc && doc->sa_features) {
        inst.sa_features = std::make_shared<const SaFeatures>(*doc->sa_features);
        info["policy_features"] = "instance file";
    } else {
        inst.sa_features = std::make_shared<const SaFeatures>(make_sa_features(
            n, inst.model.n_actions, cfg.policy_features.kind, cfg.policy_features.dim, cfg.policy_features.seed));
        info["policy_features"] = to_string(cfg.policy_features.kind);
    }

    if (doc && doc->state_features) {
        inst.features = *doc->state_features;
        info["features"] = {{"kind", "instance file"}};
    } else if (cfg.features.kind == FeatureKind::OneHot) {
        inst.features = make_features(inst.model, FeatureKind::OneHot, cfg.features.d1 ? cfg.features.d1 : n, 0);
        info["features"] = {{"kind", "one_hot"}};
    } else {
        const int d1 = cfg.features.d1 ? cfg.features.d1 : std::max(1, n / 2);
        if (cfg.features.audit) {
            AuditedFeatures af = make_audited_features(inst.model, inst.sa_features, d1, cfg.features.seed);
            inst.features = af.features;
            info["features"] = {{"kind", "random_projection"}, {"d1", d1}, {"rejections", af.rejections}};
        } else {
            inst.features = make_features(inst.model, FeatureKind::RandomProjection, d1, cfg.features.seed);
            info["features"] = {{"kind", "random_projection"}, {"d1", d1}};
        }
    }

    const ScheduleConfig& sc = cfg.schedules;
    const ScheduleMode mode = variant.modified ? ScheduleMode::Modified : ScheduleMode::Standard;
    if (sc.mode && *sc.mode != mode)
        throw Error("config error: algorithm.schedules.mode: conflicts with variant " + variant.label());
    if (mode == ScheduleMode::Modified && sc.sigma)
        throw Error("config error: algorithm.schedules.sigma: not used by modified schedules");
    ExponentTriple opt = optimal_exponents(mode, mode == ScheduleMode::Standard ? sc.delta : kDefaultDelta);
    const double nu = sc.nu.value_or(opt.nu);
    const double sigma = sc.sigma.value_or(sc.nu ? nu + sc.delta : opt.sigma.value_or(nu));
    const double beta = sc.beta.value_or(opt.beta);
    ScheduleSet schedules = make_schedule_set(mode, nu, sigma, beta, sc.coefficients);
    out.schedule_report = validate(schedules);
    if (!out.schedule_report.ok()) throw Error(out.schedule_report.first_failure());

    AlgorithmConfig& a = out.algorithm;
    a = AlgorithmConfig::for_variant(variant.variant, schedules);
    a.projection_radius = cfg.projection_radius;
    a.multiplier_cap = cfg.multiplier_cap;
    a.fisher_init = cfg.fisher_init;
    a.eval_every = cfg.eval_every;
    a.cost_noise = cfg.cost_noise;
    a.update_actor = cfg.update_actor;
    a.update_multipliers = cfg.update_multipliers;
    out.instance_info = info;
    return out;
}

void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
    const int workers = std::max(1, std::min(jobs, n));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(std::max(n, 0)));
    if (workers == 1) {
        for (int i = 0; i < n; ++i) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (int i = next++; i < n; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

std::vector<SeedRun> run_seeds(const PreparedExperiment& prepared, long horizon,
                               const std::vector<std::uint64_t>& seeds, int jobs) {
    std::vector<SeedRun> runs(seeds.size());
    parallel_for(static_cast<int>(seeds.size()), jobs, [&](int i) {
        runs[i].seed = seeds[i];
        try {
            runs[i].result = run(prepared.instance, prepared.algorithm, horizon, seeds[i]);
        } catch (const std::exception& e) {
            throw Error("seed " + std::to_string(seeds[i]) + ": " + e.what());
        }
    });
    return runs;
}

json summarize(const ExperimentConfig& cfg, const VariantSpec& variant, const PreparedExperiment& prepared,
               const std::vector<SeedRun>& runs) {
    const Instance& inst = prepared.instance;
    const int N = inst.model.n_constraints();
    const TauRule tau{TauRule::Mode::Logarithmic, cfg.c_tau, 0};
    const long horizon = runs.empty() || runs.front().result.log.empty() ? cfg.horizon
                                                                          : runs.front().result.log.back().t;
    const auto window = cfg.fit_window.value_or(std::pair{std::max(cfg.eval_every, horizon / 100), horizon});

    json doc;
    doc["variant"] = variant.label();
    doc["horizon"] = horizon;
    doc["eval_every"] = cfg.eval_every;
    doc["instance"] = prepared.instance_info;
    doc["tau_rule"] = {{"c_tau", cfg.c_tau}, {"tau_at_horizon", tau(horizon)}};

    const ScheduleSet& s = prepared.algorithm.schedules;
    json sched = {{"mode", to_string(s.mode)},
                  {"nu", s.nu()},
                  {"sigma", s.sigma()},
                  {"beta", s.beta()},
                  {"c_a", s.a.coefficient},
                  {"c_b", s.b.coefficient},
                  {"c_c", s.c.coefficient},
                  {"c_d", s.d.coefficient}};

    std::vector<std::string> scalar_fields{"y_sq", "z_sq", "mbar_sq", "J_oracle"};
    std::map<std::string, std::vector<double>> pooled;
    std::vector<Vec> grid{Vec::Zero(inst.sa_features->dim())};
    std::optional<double> lambda_G;
    json per_seed = json::array();
    for (const SeedRun& r : runs) {
        const MetricsLog& log = r.result.log;
        json entry;
        entry["seed"] = r.seed;
        entry["csv"] = "metrics_seed_" + std::to_string(r.seed) + ".csv";
        if (log.empty()) {
            per_seed.push_back(entry);
            continue;
        }
        const MetricsRecord& last = log.back();
        json windowed;
        for (const auto& f : scalar_fields) {
            double v = windowed_mean(log, field_by_name(f), last.t, tau);
            windowed[f] = v;
            pooled["windowed_" + f].push_back(v);
        }
        json wgap = json::array(), gap = json::array(), satisfied = json::array();
        for (int k = 0; k < N; ++k) {
            const std::string name = "gap_" + std::to_string(k + 1);
            double w = windowed_mean(log, field_by_name(name), last.t, tau);
            wgap.push_back(w);
            gap.push_back(last.gap[k]);
            satisfied.push_back(last.gap[k] <= cfg.gap_tolerance * inst.model.thresholds[k]);
            pooled["windowed_" + name].push_back(w);
            pooled["final_" + name].push_back(last.gap[k]);
        }
        windowed["gap"] = wgap;
        entry["final"] = {{"t", last.t},
                          {"windowed", windowed},
                          {"gap", gap},
                          {"constraint_satisfied", satisfied},
                          {"gamma", vec_to_json(last.gamma)},
                          {"L_t", last.L_t},
                          {"L_oracle", last.L_oracle}};
        json rates;
        for (const char* f : {"z_sq", "y_sq", "mbar_sq"}) {
            rates[f] = rate_json(log, f, window.first, window.second);
            if (rates[f].contains("slope")) pooled[std::string("slope_") + f].push_back(rates[f]["slope"]);
        }
        entry["rates"] = rates;
        if (r.result.lambda_G) {
            entry["lambda_G"] = *r.result.lambda_G;
            lambda_G = std::min(lambda_G.value_or(*r.result.lambda_G), *r.result.lambda_G);
        }
        grid.push_back(r.result.final_state.theta);
        per_seed.push_back(entry);
    }
    doc["runs"] = per_seed;

    json agg;
    for (const auto& [name, values] : pooled)
        agg[name] = {{"median", median(values)}, {"mean", mean_of(values)}, {"stderr", stderr_of(values)}};
    doc["aggregate"] = agg;

    std::optional<PolicyBounds> bounds;
    try {
        BoundsReport b = bounds_report(inst.model, inst.sa_features, inst.features, grid, cfg.multiplier_cap,
                                       prepared.algorithm.natural_gradient ? lambda_G : std::nullopt);
        doc["bounds"] = {{"B", b.B},
                         {"U_r", b.U_r},
                         {"Ubar_v", b.Ubar_v},
                         {"lambda_e", b.lambda_e},
                         {"lambda_G", b.lambda_G ? json(*b.lambda_G) : json(nullptr)},
                         {"eps_app", b.eps_app}};
        if (b.lambda_G) {
            const double Bmax = score_bound(*inst.sa_features);
            bounds = PolicyBounds{b.B, *b.lambda_G, b.U_r, cfg.projection_radius, b.Ubar_v,
                                  std::max(cfg.fisher_init, Bmax * Bmax)};
        }
    } catch (const Error& e) {
        doc["bounds"] = {{"error", e.what()}};
    }

    ScheduleReport report = validate(s, bounds);
    json checks = json::array();
    for (const auto& c : report.checks)
        checks.push_back({{"name", c.name}, {"passed", c.passed}, {"advisory", c.advisory}, {"message", c.message}});
    sched["checks"] = checks;
    sched["valid"] = report.ok();
    doc["schedules"] = sched;
    return doc;
}

std::string resolve_out_dir(const ExperimentConfig& cfg, const CliOverrides& cli) {
    if (cli.out_dir) return *cli.out_dir;
    if (cfg.output_dir) return *cfg.output_dir;
    if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
    return "out";
}

namespace {

struct VariantOutcome {
    json summary;
    std::vector<SeedRun> runs;
};

VariantOutcome execute(const ExperimentConfig& cfg, const VariantSpec& variant, long horizon,
                       const std::vector<std::uint64_t>& seeds, int jobs, const std::string& dir) {
    PreparedExperiment prepared = prepare(cfg, variant);
    VariantOutcome out;
    out.runs = run_seeds(prepared, horizon, seeds, jobs);
    ensure_dir(dir);
    for (const SeedRun& r : out.runs)
        write_file_atomic(join(dir, "metrics_seed_" + std::to_string(r.seed) + ".csv"),
                          metrics_csv(r.result.log, prepared.instance.model.n_constraints()));
    ExperimentConfig effective = cfg;
    effective.horizon = horizon;
    out.summary = summarize(effective, variant, prepared, out.runs);
    write_file_atomic(join(dir, "summary.json"), out.summary.dump(2) + "\n");
    return out;
}

}  // namespace

int cmd_run(const std::string& config_path, const CliOverrides& cli, std::ostream& out, std::ostream& err) {
    ExperimentConfig cfg;
    try {
        cfg = load_config(config_path);
        if (cli.seeds) cfg.seeds = *cli.seeds;
        prepare(cfg, cfg.variant);  // surfaces schedule and instance errors before any work
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    const std::string dir = resolve_out_dir(cfg, cli);
    try {
        VariantOutcome res = execute(cfg, cfg.variant, cfg.horizon, cfg.seeds, cli.jobs, dir);
        out << "wrote " << res.runs.size() << " run(s) of " << cfg.variant.label() << " to " << dir << "\n";
        const json& agg = res.summary["aggregate"];
        for (const char* key : {"windowed_z_sq", "windowed_y_sq", "windowed_mbar_sq", "final_gap_1"})
            if (agg.contains(key)) out << "  " << key << " median " << fmt(agg[key]["median"].get<double>()) << "\n";
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::optional<std::string>& variant_list,
              const CliOverrides& cli, std::ostream& out, std::ostream& err) {
    ExperimentConfig cfg;
    std::vector<SweepEntry> entries;
    try {
        cfg = load_config(config_path);
        if (cli.seeds) cfg.seeds = *cli.seeds;
        if (variant_list) {
            std::stringstream ss(*variant_list);
            std::string item;
            while (std::getline(ss, item, ',')) entries.push_back({VariantSpec::parse(item), cfg.horizon});
        } else if (!cfg.variants.empty()) {
            entries = cfg.variants;
        } else {
            throw Error("sweep needs a variant list (--variants or the config's variants field)");
        }
        for (const auto& e : entries)
            if (e.horizon != entries.front().horizon)
                throw Error("mixed horizons across variants: " + std::to_string(entries.front().horizon) + " vs " +
                            std::to_string(e.horizon));
        if (cfg.seeds.size() < 2) throw Error("sweep needs at least 2 seeds for a standard error");
        for (const auto& e : entries) prepare(cfg, e.spec);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }

    const std::string dir = resolve_out_dir(cfg, cli);
    const int N = [&] {
        try {
            return prepare(cfg, entries.front().spec).instance.model.n_constraints();
        } catch (...) {
            return 0;
        }
    }();
    json rows = json::array();
    try {
        std::map<std::string, json> done;
        for (const auto& e : entries) {
            const std::string label = e.spec.label();
            if (!done.count(label)) {
                VariantOutcome res = execute(cfg, e.spec, e.horizon, cfg.seeds, cli.jobs, join(dir, file_label(e.spec)));
                std::vector<double> objective;
                std::vector<std::vector<double>> gaps(N);
                for (const SeedRun& r : res.runs) {
                    const MetricsLog& log = r.result.log;
                    objective.push_back(windowed_mean(log, field_by_name("J_oracle"), log.back().t,
                                                      TauRule{TauRule::Mode::Logarithmic, cfg.c_tau, 0}));
                    for (int k = 0; k < N; ++k) gaps[k].push_back(log.back().gap[k]);
                }
                json row = {{"variant", label},
                            {"n_seeds", cfg.seeds.size()},
                            {"horizon", e.horizon},
                            {"objective_mean", mean_of(objective)},
                            {"objective_stderr", stderr_of(objective)}};
                json gm = json::array(), gs = json::array();
                for (int k = 0; k < N; ++k) {
                    gm.push_back(mean_of(gaps[k]));
                    gs.push_back(stderr_of(gaps[k]));
                }
                row["gap_mean"] = gm;
                row["gap_stderr"] = gs;
                done[label] = row;
            }
            rows.push_back(done[label]);
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }

    std::ostringstream table;
    table << std::left << std::setw(18) << "variant" << std::setw(8) << "seeds" << std::setw(28) << "objective";
    for (int k = 1; k <= N; ++k) table << std::setw(28) << ("gap_" + std::to_string(k));
    table << "\n";
    for (const auto& row : rows) {
        auto pm = [](double m, double s) { return fmt(m) + " ± " + fmt(s); };
        table << std::setw(18) << row["variant"].get<std::string>() << std::setw(8) << row["n_seeds"].get<int>()
              << std::setw(28) << pm(row["objective_mean"], row["objective_stderr"]);
        for (int k = 0; k < N; ++k) table << std::setw(28) << pm(row["gap_mean"][k], row["gap_stderr"][k]);
        table << "\n";
    }
    try {
        ensure_dir(dir);
        write_file_atomic(join(dir, "sweep.json"), json{{"rows", rows}}.dump(2) + "\n");
        write_file_atomic(join(dir, "sweep.txt"), table.str());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    out << table.str();
    return 0;
}

int cmd_oracle(const OracleRequest& req, const std::optional<std::string>& out_file, std::ostream& out,
               std::ostream& err) {
    try {
        InstanceDocument doc = load_instance(req.instance_path);
        ValidationReport rep = validate_cmdp(doc.model);
        if (!rep.ok()) throw Error(req.instance_path + ": " + rep.violations.front());
        const Cmdp& m = doc.model;
        auto sa = std::make_shared<const SaFeatures>(
            doc.sa_features ? *doc.sa_features : make_sa_features(m.n_states, m.n_actions, SaFeatureKind::Tabular));
        StateFeatures features =
            doc.state_features ? *doc.state_features : make_features(m, FeatureKind::OneHot, m.n_states, 0);

        Vec theta = Vec::Zero(sa->dim());
        if (req.theta_path) {
            json j;
            try {
                j = json::parse(read_file(*req.theta_path));
            } catch (const json::exception& e) {
                throw Error(*req.theta_path + ": " + e.what());
            }
            if (j.is_object() && j.contains("theta")) j = j["theta"];
            theta = vec_from_json(j, *req.theta_path);
            if (theta.size() != sa->dim())
                throw Error(*req.theta_path + ": theta has " + std::to_string(theta.size()) +
                            " entries, policy features have dimension " + std::to_string(sa->dim()));
        }
        Vec gamma = Vec::Zero(m.n_constraints());
        if (req.gamma) {
            std::vector<double> g = parse_number_list(*req.gamma, "gamma");
            if (static_cast<int>(g.size()) != m.n_constraints())
                throw Error("gamma: expected " + std::to_string(m.n_constraints()) + " values, got " +
                            std::to_string(g.size()));
            for (std::size_t k = 0; k < g.size(); ++k) {
                if (!(g[k] >= 0.0 && g[k] <= req.multiplier_cap))
                    throw Error("gamma_" + std::to_string(k + 1) + " = " + fmt(g[k]) + " outside [0, " +
                                fmt(req.multiplier_cap) + "]");
                gamma[static_cast<int>(k)] = g[k];
            }
        }
        OracleSolution sol = solve_oracle(m, PolicyParams(sa, theta), gamma, features);
        const std::string text = to_json(sol).dump(2) + "\n";
        if (out_file) {
            write_file_atomic(*out_file, text);
            out << "wrote " << *out_file << "\n";
        } else {
            out << text;
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

int cmd_gen(const GenRequest& req, const CliOverrides& cli, std::ostream& out, std::ostream& err) {
    try {
        ExperimentConfig cfg;
        if (req.config_path) {
            cfg = load_config(*req.config_path);
            if (cfg.instance_path) throw Error("gen needs an env section, not an instance file");
        }
        if (req.kind) {
            cfg.env.kind = *req.kind;
            if (*req.kind == EnvKind::BindingChain && !req.config_path) {
                cfg.env.n_states = 6;
                cfg.env.n_actions = 2;
                cfg.env.n_constraints = 1;
            }
        }
        if (req.n_states) cfg.env.n_states = *req.n_states;
        if (req.n_actions) cfg.env.n_actions = *req.n_actions;
        if (req.n_constraints) cfg.env.n_constraints = *req.n_constraints;
        if (req.seed) cfg.env.seed = *req.seed;
        if (req.d1) cfg.features.d1 = *req.d1;
        cfg.horizon = 1;

        PreparedExperiment p = prepare(cfg, VariantSpec{});
        InstanceDocument doc;
        doc.model = p.instance.model;
        doc.sa_features = *p.instance.sa_features;
        doc.state_features = p.instance.features;
        doc.metadata = p.instance_info;
        doc.metadata["generator"] = to_string(cfg.env.kind);
        doc.metadata.erase("source");

        const std::string dir = resolve_out_dir(cfg, cli);
        ensure_dir(dir);
        const std::string path =
            join(dir, "instance_" + to_string(cfg.env.kind) + "_" + std::to_string(cfg.env.seed) + ".json");
        save_instance(path, doc);
        out << path << "\n";
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

int cmd_verify(const VerifyRequest& req, const CliOverrides& cli, std::ostream& out, std::ostream& err) {
    std::vector<Check> checks;
    if (req.instance_path) {
        const std::string path = *req.instance_path;
        checks.push_back({"instance file " + path, [path](int) {
                              InstanceDocument doc = load_instance(path);
                              ValidationReport rep = validate_cmdp(doc.model);
                              if (!rep.ok()) return CheckOutcome{false, path + ": " + rep.violations.front()};
                              if (doc.state_features) {
                                  ValidationReport fr = validate_features(*doc.state_features, doc.model.n_states);
                                  if (!fr.ok()) return CheckOutcome{false, path + ": " + fr.violations.front()};
                              }
                              return CheckOutcome{true, path + ": valid"};
                          }});
    }
    for (auto& c : property_checks()) checks.push_back(std::move(c));
    if (!req.quick)
        for (auto& c : acceptance_checks()) checks.push_back(std::move(c));
    if (req.only) {
        std::vector<Check> kept;
        for (auto& c : checks)
            if (c.name.find(*req.only) != std::string::npos) kept.push_back(std::move(c));
        checks = std::move(kept);
    }

    std::vector<CheckResult> results = run_checks(checks, cli.jobs, &out);
    int failed = 0;
    json report = json::array();
    for (const auto& r : results) {
        failed += r.passed ? 0 : 1;
        report.push_back({{"name", r.name}, {"passed", r.passed}, {"detail", r.detail}});
    }
    out << (failed ? "FAILED " : "OK ") << results.size() - failed << "/" << results.size() << " checks passed\n";

    std::optional<std::string> dir = cli.out_dir;
    if (!dir)
        if (const char* env = std::getenv(kOutDirEnv); env && *env) dir = env;
    if (dir) {
        try {
            ensure_dir(*dir);
            write_file_atomic(join(*dir, "verify_report.json"),
                              json{{"checks", report}, {"failed", failed}}.dump(2) + "\n");
        } catch (const std::exception& e) {
            err << "error: " << e.what() << "\n";
            return 1;
        }
    }
    return failed ? 1 : 0;
}

}  // namespace cnca
