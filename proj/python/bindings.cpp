#include "cnca/algorithm.hpp"
#include "cnca/envs.hpp"
#include "cnca/harness.hpp"
#include "cnca/oracle.hpp"
#include "cnca/schedules.hpp"
#include "cnca/serialize.hpp"
#include "cnca/verify.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace cnca;

namespace {

Instance make_instance(const Cmdp& model, const std::string& policy_features, int policy_dim,
                       std::uint64_t policy_seed, const std::string& features, int d1, std::uint64_t seed,
                       bool audit) {
    Instance inst;
    inst.model = model;
    inst.sa_features = std::make_shared<const SaFeatures>(make_sa_features(
        model.n_states, model.n_actions, parse_sa_feature_kind(policy_features), policy_dim, policy_seed));
    const FeatureKind kind = parse_feature_kind(features);
    if (kind == FeatureKind::OneHot) {
        inst.features = make_features(model, kind, d1 ? d1 : model.n_states, 0);
    } else {
        const int dim = d1 ? d1 : std::max(1, model.n_states / 2);
        inst.features = audit ? make_audited_features(model, inst.sa_features, dim, seed).features
                              : make_features(model, kind, dim, seed);
    }
    return inst;
}

py::dict oracle_dict(const OracleSolution& s) {
    py::dict d;
    d["mu"] = s.mu;
    d["J"] = s.J;
    d["G"] = s.G;
    d["L"] = s.L;
    d["V"] = s.V;
    d["Q"] = s.Q;
    d["advantage"] = s.advantage;
    d["A"] = s.A;
    d["b"] = s.b;
    d["v_star"] = s.v_star ? py::cast(*s.v_star) : py::none();
    d["lambda_e"] = s.lambda_e;
    d["grad"] = s.grad;
    d["eps_app"] = s.eps_app ? py::cast(*s.eps_app) : py::none();
    d["audit"] = s.audit;
    return d;
}

py::dict log_dict(const MetricsLog& log, int n_constraints) {
    const Eigen::Index T = static_cast<Eigen::Index>(log.size());
    Eigen::VectorXd L_t(T), L_oracle(T), J_oracle(T), y_t(T), z_sq(T), mbar_sq(T);
    Eigen::VectorXi t(T);
    Mat gamma(T, n_constraints), U(T, n_constraints), gap(T, n_constraints);
    for (Eigen::Index i = 0; i < T; ++i) {
        const MetricsRecord& r = log[static_cast<std::size_t>(i)];
        t[i] = static_cast<int>(r.t);
        L_t[i] = r.L_t;
        L_oracle[i] = r.L_oracle;
        J_oracle[i] = r.J_oracle;
        y_t[i] = r.y_t;
        z_sq[i] = r.z_sq;
        mbar_sq[i] = r.mbar_sq;
        gamma.row(i) = r.gamma.transpose();
        U.row(i) = r.U.transpose();
        gap.row(i) = r.gap.transpose();
    }
    py::dict d;
    d["t"] = t;
    d["L_t"] = L_t;
    d["L_oracle"] = L_oracle;
    d["J_oracle"] = J_oracle;
    d["y_t"] = y_t;
    d["z_sq"] = z_sq;
    d["mbar_sq"] = mbar_sq;
    d["gamma"] = gamma;
    d["U"] = U;
    d["gap"] = gap;
    return d;
}

py::list check_results(const std::vector<CheckResult>& results) {
    py::list out;
    for (const auto& r : results) {
        py::dict d;
        d["name"] = r.name;
        d["passed"] = r.passed;
        d["detail"] = r.detail;
        d["seconds"] = r.seconds;
        out.append(d);
    }
    return out;
}

CliOverrides overrides(const std::optional<std::string>& out_dir, const std::optional<std::vector<std::uint64_t>>& seeds,
                       int jobs) {
    CliOverrides cli;
    cli.out_dir = out_dir;
    cli.seeds = seeds;
    cli.jobs = jobs;
    return cli;
}

/// Runs a command writing to string streams; returns (exit code, stdout, stderr).
template <typename F>
py::tuple capture(F&& body) {
    std::ostringstream out, err;
    int code;
    {
        py::gil_scoped_release release;
        code = body(out, err);
    }
    return py::make_tuple(code, out.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Constrained natural critic-actor laboratory: exact oracles, learners and the experiment harness";

    py::register_exception<Error>(m, "CncaError", PyExc_RuntimeError);

    py::class_<Cmdp>(m, "Cmdp")
        .def(py::init<>())
        .def_readwrite("n_states", &Cmdp::n_states)
        .def_readwrite("n_actions", &Cmdp::n_actions)
        .def_readwrite("transition", &Cmdp::transition, "Per state, an (n_actions x n_states) matrix")
        .def_readwrite("cost", &Cmdp::cost)
        .def_readwrite("constraint_costs", &Cmdp::constraint_costs)
        .def_readwrite("thresholds", &Cmdp::thresholds)
        .def_readwrite("cost_bound", &Cmdp::cost_bound)
        .def_property_readonly("n_constraints", &Cmdp::n_constraints)
        .def("validate", [](const Cmdp& c) { return validate_cmdp(c).violations; },
             "List of violated invariants; empty when valid");

    m.def("stationary_distribution", [](const Mat& P) { return stationary_distribution(P).mu; }, py::arg("P"));
    m.def("induced_chain", &induced_chain, py::arg("model"), py::arg("action_probs"));

    m.def(
        "random_ergodic_cmdp",
        [](int n_states, int n_actions, int n_constraints, std::uint64_t seed, double rho) {
            EnvSpec spec;
            spec.n_states = n_states;
            spec.n_actions = n_actions;
            spec.n_constraints = n_constraints;
            spec.seed = seed;
            spec.min_transition_prob = rho;
            return random_ergodic_cmdp(spec);
        },
        py::arg("n_states") = 10, py::arg("n_actions") = 3, py::arg("n_constraints") = 2, py::arg("seed") = 0,
        py::arg("min_transition_prob") = 0.01);
    m.def(
        "binding_chain_cmdp",
        [](int n_states, std::uint64_t seed) {
            BindingChain c = binding_chain_cmdp(n_states, seed);
            py::dict info;
            info["greedy_G"] = c.info.greedy_G;
            info["safe_G"] = c.info.safe_G;
            info["alpha"] = c.info.alpha;
            info["margin_low"] = c.info.margin_low;
            info["margin_high"] = c.info.margin_high;
            return py::make_tuple(c.model, info);
        },
        py::arg("n_states") = 6, py::arg("seed") = 1, "Returns (model, info)");

    py::class_<Instance>(m, "Instance")
        .def_readonly("model", &Instance::model)
        .def_property_readonly("policy_features", [](const Instance& i) { return i.sa_features->table; })
        .def_property_readonly("state_features", [](const Instance& i) { return i.features.matrix; })
        .def_property_readonly("policy_dim", [](const Instance& i) { return i.sa_features->dim(); });
    m.def("make_instance", &make_instance, py::arg("model"), py::arg("policy_features") = "tabular_reduced",
          py::arg("policy_dim") = 0, py::arg("policy_seed") = 0, py::arg("features") = "random_projection",
          py::arg("d1") = 0, py::arg("seed") = 0, py::arg("audit") = true);
    m.def("binding_chain_instance", &binding_chain_instance);
    m.def("small_ergodic_instance", &small_ergodic_instance);

    m.def(
        "solve_oracle",
        [](const Instance& inst, const std::optional<Vec>& theta, const std::optional<Vec>& gamma) {
            PolicyParams pol(inst.sa_features, theta.value_or(Vec::Zero(inst.sa_features->dim())));
            return oracle_dict(
                solve_oracle(inst.model, pol, gamma.value_or(Vec::Zero(inst.model.n_constraints())), inst.features));
        },
        py::arg("instance"), py::arg("theta") = py::none(), py::arg("gamma") = py::none(),
        "Exact frozen-parameter quantities as a dict of arrays");

    py::class_<StepSchedule>(m, "StepSchedule")
        .def_readonly("coefficient", &StepSchedule::coefficient)
        .def_readonly("exponent", &StepSchedule::exponent)
        .def_property_readonly("log_modified", [](const StepSchedule& s) { return s.kind == ScheduleKind::PowerLog; })
        .def("__call__", &StepSchedule::value_at, py::arg("t"));
    py::class_<ScheduleSet>(m, "ScheduleSet")
        .def_readonly("a", &ScheduleSet::a)
        .def_readonly("b", &ScheduleSet::b)
        .def_readonly("c", &ScheduleSet::c)
        .def_readonly("d", &ScheduleSet::d)
        .def_property_readonly("mode", [](const ScheduleSet& s) { return to_string(s.mode); });
    m.def(
        "make_schedule_set",
        [](const std::string& mode, double nu, double sigma, double beta, double c_a, double c_b, double c_c,
           double c_d) {
            return make_schedule_set(parse_schedule_mode(mode), nu, sigma, beta, {c_a, c_b, c_c, c_d});
        },
        py::arg("mode") = "standard", py::arg("nu") = 0.5, py::arg("sigma") = 0.52, py::arg("beta") = 1.0,
        py::arg("c_a") = 0.1, py::arg("c_b") = 0.5, py::arg("c_c") = 0.05, py::arg("c_d") = 1.0);
    m.def(
        "validate_schedules",
        [](const ScheduleSet& s) {
            ScheduleReport r = validate(s);
            py::list checks;
            for (const auto& c : r.checks) checks.append(py::make_tuple(c.name, c.passed, c.advisory, c.message));
            return py::make_tuple(r.ok(), r.first_failure(), checks);
        },
        py::arg("schedules"), "Returns (ok, first_failure, [(name, passed, advisory, message)])");
    m.def(
        "optimal_exponents",
        [](const std::string& mode, double delta) {
            ExponentTriple e = optimal_exponents(parse_schedule_mode(mode), delta);
            return py::make_tuple(e.nu, e.sigma ? py::cast(*e.sigma) : py::none(), e.beta);
        },
        py::arg("mode") = "standard", py::arg("delta") = kDefaultDelta);

    py::class_<AlgorithmConfig>(m, "AlgorithmConfig")
        .def(py::init([](const std::string& variant, const ScheduleSet& s) {
                 return AlgorithmConfig::for_variant(parse_variant(variant), s);
             }),
             py::arg("variant") = "c-nca", py::arg("schedules") = make_schedule_set(ScheduleMode::Standard, 0.5, 0.52, 1.0))
        .def_readwrite("natural_gradient", &AlgorithmConfig::natural_gradient)
        .def_readwrite("schedules", &AlgorithmConfig::schedules)
        .def_readwrite("projection_radius", &AlgorithmConfig::projection_radius)
        .def_readwrite("multiplier_cap", &AlgorithmConfig::multiplier_cap)
        .def_readwrite("fisher_init", &AlgorithmConfig::fisher_init)
        .def_readwrite("eval_every", &AlgorithmConfig::eval_every)
        .def_readwrite("cost_noise", &AlgorithmConfig::cost_noise)
        .def_readwrite("update_actor", &AlgorithmConfig::update_actor)
        .def_readwrite("update_multipliers", &AlgorithmConfig::update_multipliers);

    m.def(
        "run",
        [](const Instance& inst, const AlgorithmConfig& cfg, long horizon, std::uint64_t seed) {
            RunResult r;
            {
                py::gil_scoped_release release;
                r = run(inst, cfg, horizon, seed);
            }
            py::dict d = log_dict(r.log, inst.model.n_constraints());
            const LearnerState& st = r.final_state;
            py::dict fin;
            fin["theta"] = st.theta;
            fin["v"] = st.v;
            fin["gamma"] = st.gamma;
            fin["U"] = st.U;
            fin["G"] = st.G;
            fin["L"] = st.L_avg;
            fin["t"] = st.t;
            d["final"] = fin;
            d["lambda_G"] = r.lambda_G ? py::cast(*r.lambda_G) : py::none();
            return d;
        },
        py::arg("instance"), py::arg("config"), py::arg("horizon"), py::arg("seed") = 1,
        "Runs the learner; returns the evaluation log as arrays plus the final iterate");

    m.def(
        "verify",
        [](bool quick, const std::optional<std::string>& only, int jobs) {
            std::vector<Check> checks = property_checks();
            if (!quick)
                for (auto& c : acceptance_checks()) checks.push_back(std::move(c));
            if (only) {
                std::vector<Check> kept;
                for (auto& c : checks)
                    if (c.name.find(*only) != std::string::npos) kept.push_back(std::move(c));
                checks = std::move(kept);
            }
            std::vector<CheckResult> results;
            {
                py::gil_scoped_release release;
                results = run_checks(checks, jobs, nullptr);
            }
            return check_results(results);
        },
        py::arg("quick") = true, py::arg("only") = py::none(), py::arg("jobs") = 1);

    m.def(
        "run_config",
        [](const std::string& path, const std::optional<std::string>& out_dir,
           const std::optional<std::vector<std::uint64_t>>& seeds, int jobs) {
            CliOverrides cli = overrides(out_dir, seeds, jobs);
            return capture([&](std::ostream& o, std::ostream& e) { return cmd_run(path, cli, o, e); });
        },
        py::arg("config"), py::arg("out_dir") = py::none(), py::arg("seeds") = py::none(), py::arg("jobs") = 1,
        "Same as `cnca run`; returns (exit_code, stdout, stderr)");
    m.def(
        "sweep_config",
        [](const std::string& path, const std::optional<std::string>& variants, const std::optional<std::string>& out_dir,
           const std::optional<std::vector<std::uint64_t>>& seeds, int jobs) {
            CliOverrides cli = overrides(out_dir, seeds, jobs);
            return capture([&](std::ostream& o, std::ostream& e) { return cmd_sweep(path, variants, cli, o, e); });
        },
        py::arg("config"), py::arg("variants") = py::none(), py::arg("out_dir") = py::none(),
        py::arg("seeds") = py::none(), py::arg("jobs") = 1, "Same as `cnca sweep`; returns (exit_code, stdout, stderr)");

    m.attr("OUT_DIR_ENV") = kOutDirEnv;
}
