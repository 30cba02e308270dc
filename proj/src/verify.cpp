#include "cnca/verify.hpp"

#include "cnca/oracle.hpp"
#include "cnca/serialize.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

namespace cnca {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double x, int precision = 4) {
    std::ostringstream os;
    os << std::setprecision(precision) << x;
    return os.str();
}

Vec gaussian(int n, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = g(rng);
    return v;
}

Cmdp ergodic(int n, int a, int k, std::uint64_t seed, double rho = 0.01) {
    EnvSpec spec;
    spec.n_states = n;
    spec.n_actions = a;
    spec.n_constraints = k;
    spec.seed = seed;
    spec.min_transition_prob = rho;
    return random_ergodic_cmdp(spec);
}

Mat random_stochastic(int n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Mat P(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) P(i, j) = 0.01 + u(rng);
        P.row(i) /= P.row(i).sum();
    }
    return P;
}

// The 50 seeded instances shared by the exactness criteria.
struct ExactnessCase {
    Cmdp model;
    std::shared_ptr<const SaFeatures> sa;
    StateFeatures features;
    Vec theta;
    Vec gamma;
};

std::vector<ExactnessCase> exactness_cases() {
    std::vector<ExactnessCase> cases;
    for (int i = 0; i < 50; ++i) {
        ExactnessCase c;
        c.model = ergodic(10, 3, 2, 1000 + i);
        c.sa = std::make_shared<const SaFeatures>(make_sa_features(10, 3, SaFeatureKind::TabularReduced));
        c.features = make_features(c.model, FeatureKind::OneHot, 10, 0);
        std::mt19937_64 rng(500 + i);
        c.theta = gaussian(c.sa->dim(), rng);
        std::uniform_real_distribution<double> u(0.0, 2.0);
        c.gamma = Vec(2);
        c.gamma << u(rng), u(rng);
        cases.push_back(std::move(c));
    }
    return cases;
}

Vec finite_difference_gradient(const Cmdp& m, const PolicyParams& pol, const Vec& gamma, double h) {
    Vec g(pol.dim());
    for (int j = 0; j < pol.dim(); ++j) {
        Vec up = pol.theta, down = pol.theta;
        up[j] += h;
        down[j] -= h;
        g[j] = (lagrangian_cost(m, pol.with_theta(up), gamma).L - lagrangian_cost(m, pol.with_theta(down), gamma).L) /
               (2.0 * h);
    }
    return g;
}

std::vector<RunResult> run_many(const Instance& inst, const AlgorithmConfig& cfg, long horizon, int seeds, int jobs) {
    std::vector<RunResult> out(seeds);
    std::vector<std::exception_ptr> errors(seeds);
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int i = next++; i < seeds; i = next++) {
            try {
                out[i] = run(inst, cfg, horizon, static_cast<std::uint64_t>(i + 1));
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const int workers = std::max(1, std::min(jobs, seeds));
    if (workers == 1) {
        worker();
    } else {
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

const MetricsRecord& record_at(const MetricsLog& log, long t) {
    for (const auto& r : log)
        if (r.t == t) return r;
    throw Error("no record at t=" + std::to_string(t));
}

}  // namespace

double median(std::vector<double> v) {
    if (v.empty()) throw Error("median of an empty list");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Instance binding_chain_instance() {
    Instance inst;
    inst.model = binding_chain_cmdp(6, 1).model;
    inst.sa_features = std::make_shared<const SaFeatures>(make_sa_features(6, 2, SaFeatureKind::TabularReduced));
    inst.features = make_audited_features(inst.model, inst.sa_features, 4, 3).features;
    return inst;
}

Instance small_ergodic_instance() {
    Instance inst;
    inst.model = ergodic(5, 2, 1, 17);
    inst.sa_features = std::make_shared<const SaFeatures>(make_sa_features(5, 2, SaFeatureKind::TabularReduced));
    inst.features = make_audited_features(inst.model, inst.sa_features, 3, 11).features;
    return inst;
}

AlgorithmConfig binding_chain_config() {
    ScheduleCoefficients k;
    k.c_a = 0.1;
    k.c_c = 1.0;
    return AlgorithmConfig::for_variant(Variant::CNCA, make_schedule_set(ScheduleMode::Standard, 0.5, 0.52, 1.0, k));
}

AlgorithmConfig schedule_comparison_config(ScheduleMode mode) {
    ScheduleCoefficients k;
    k.c_a = 0.02;
    k.c_b = 0.1;
    k.c_c = 1.0;
    ExponentTriple e = optimal_exponents(mode);
    return AlgorithmConfig::for_variant(Variant::CNCA,
                                        make_schedule_set(mode, e.nu, e.sigma.value_or(e.nu), e.beta, k));
}

AlgorithmConfig frozen_critic_config() {
    ScheduleCoefficients k;
    k.c_b = 0.5;
    AlgorithmConfig cfg =
        AlgorithmConfig::for_variant(Variant::CNCA, make_schedule_set(ScheduleMode::Modified, 0.5, 0.5, 1.0, k));
    cfg.update_actor = false;
    cfg.update_multipliers = false;
    return cfg;
}

std::vector<CheckResult> run_checks(const std::vector<Check>& checks, int jobs, std::ostream* progress) {
    std::vector<CheckResult> results;
    for (const Check& c : checks) {
        CheckResult r;
        r.name = c.name;
        const auto t0 = Clock::now();
        try {
            CheckOutcome o = c.body(jobs);
            r.passed = o.passed;
            r.detail = o.detail;
        } catch (const std::exception& e) {
            r.passed = false;
            r.detail = std::string("threw: ") + e.what();
        }
        r.seconds = seconds_since(t0);
        if (progress)
            *progress << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << std::fixed << std::setprecision(2)
                      << r.seconds << " s): " << std::defaultfloat << r.detail << "\n"
                      << std::flush;
        results.push_back(std::move(r));
    }
    return results;
}

std::vector<Check> property_checks() {
    std::vector<Check> checks;

    checks.push_back({"cmdp: induced chain is row-stochastic", [](int) {
                          double worst = 0.0;
                          for (int i = 0; i < 50; ++i) {
                              Cmdp m = ergodic(8, 3, 1, 200 + i);
                              std::mt19937_64 rng(i);
                              auto sa = std::make_shared<const SaFeatures>(
                                  make_sa_features(8, 3, SaFeatureKind::Random, 4, i));
                              Mat P = induced_chain(m, policy_table(PolicyParams(sa, gaussian(4, rng, 3.0))));
                              worst = std::max(worst, (P.rowwise().sum().array() - 1.0).abs().maxCoeff());
                              if (P.minCoeff() < 0.0) return CheckOutcome{false, "negative entry"};
                          }
                          return CheckOutcome{worst < 1e-12, "max |row sum - 1| = " + fmt(worst)};
                      }});

    checks.push_back({"cmdp: stationary distribution residual and power-iteration agreement", [](int) {
                          double residual = 0.0, gap = 0.0;
                          std::mt19937_64 rng(99);
                          for (int i = 0; i < 20; ++i) {
                              Mat P = random_stochastic(10, rng);
                              Vec mu = stationary_distribution(P).mu;
                              residual = std::max(residual, (P.transpose() * mu - mu).cwiseAbs().maxCoeff());
                              gap = std::max(gap, (mu - stationary_power_iteration(P)).cwiseAbs().maxCoeff());
                          }
                          return CheckOutcome{residual < 1e-10 && gap < 1e-8,
                                              "residual " + fmt(residual) + ", power-iteration gap " + fmt(gap)};
                      }});

    checks.push_back({"cmdp: mixing distances non-increasing on lazy generated chains", [](int) {
                          for (int i = 0; i < 20; ++i) {
                              Cmdp m = ergodic(10, 3, 1, 300 + i, 0.05);
                              Mat P = induced_chain(m, Mat::Constant(10, 3, 1.0 / 3.0));
                              if (P.diagonal().minCoeff() < 0.05)
                                  return CheckOutcome{false, "self-loop below 0.05 on seed " + std::to_string(300 + i)};
                              MixingProfile prof = mixing_profile(P, stationary_distribution(P), 40);
                              for (std::size_t t = 1; t < prof.distances.size(); ++t)
                                  if (prof.distances[t] > prof.distances[t - 1] + 1e-15)
                                      return CheckOutcome{false, "increase at tau=" + std::to_string(t)};
                          }
                          return CheckOutcome{true, "20 chains monotone"};
                      }});

    checks.push_back({"policy: score identity and softmax shift invariance", [](int) {
                          double identity = 0.0, shift = 0.0;
                          for (int i = 0; i < 30; ++i) {
                              std::mt19937_64 rng(40 + i);
                              SaFeatures f = make_sa_features(6, 4, SaFeatureKind::Random, 5, i);
                              auto sa = std::make_shared<const SaFeatures>(f);
                              PolicyParams pol(sa, gaussian(5, rng, 2.0));
                              SaFeatures g = f;
                              for (int s = 0; s < 6; ++s) {
                                  Vec c = gaussian(5, rng);
                                  for (int a = 0; a < 4; ++a) g.table.row(s * 4 + a) += c.transpose();
                              }
                              PolicyParams shifted(std::make_shared<const SaFeatures>(g), pol.theta);
                              for (int s = 0; s < 6; ++s) {
                                  identity = std::max(identity,
                                                      (scores(pol, s) * action_probabilities(pol, s)).cwiseAbs().maxCoeff());
                                  shift = std::max(shift, (action_probabilities(pol, s) - action_probabilities(shifted, s))
                                                              .cwiseAbs()
                                                              .maxCoeff());
                              }
                          }
                          return CheckOutcome{identity < 1e-10 && shift < 1e-12,
                                              "identity " + fmt(identity) + ", shift " + fmt(shift)};
                      }});

    checks.push_back({"policy: exact Fisher symmetric positive semi-definite", [](int) {
                          double asym = 0.0, low = 0.0;
                          for (int i = 0; i < 20; ++i) {
                              Cmdp m = ergodic(6, 3, 1, 400 + i);
                              std::mt19937_64 rng(i);
                              auto sa = std::make_shared<const SaFeatures>(
                                  make_sa_features(6, 3, SaFeatureKind::Random, 5, i));
                              Mat F = exact_fisher(PolicyParams(sa, gaussian(5, rng)), m);
                              asym = std::max(asym, (F - F.transpose()).cwiseAbs().maxCoeff());
                              Eigen::SelfAdjointEigenSolver<Mat> eig(F, Eigen::EigenvaluesOnly);
                              low = std::min(low, eig.eigenvalues().minCoeff());
                          }
                          return CheckOutcome{asym == 0.0 && low >= -1e-12,
                                              "asymmetry " + fmt(asym) + ", min eigenvalue " + fmt(low)};
                      }});

    checks.push_back({"oracle: Lagrangian identity, affine in gamma, advantage centering, fixed-point residual",
                      [](int) {
                          double ident = 0.0, second = 0.0, centering = 0.0, residual = 0.0;
                          for (int i = 0; i < 30; ++i) {
                              Cmdp m = ergodic(6, 3, 2, 600 + i);
                              std::mt19937_64 rng(i);
                              auto sa = std::make_shared<const SaFeatures>(
                                  make_sa_features(6, 3, SaFeatureKind::TabularReduced));
                              PolicyParams pol(sa, gaussian(sa->dim(), rng));
                              Vec g = Vec::Constant(2, 0.7), dg = gaussian(2, rng, 0.1);
                              LagrangianValue lv = lagrangian_cost(m, pol, g);
                              ident = std::max(ident,
                                               std::abs(lv.L - lv.J - g.dot(lv.G - m.thresholds)));
                              double l0 = lagrangian_cost(m, pol, g - dg).L, l2 = lagrangian_cost(m, pol, g + dg).L;
                              second = std::max(second, std::abs(l2 - 2.0 * lv.L + l0));
                              QAdvantage qa = differential_q_advantage(m, pol, g);
                              Mat pi = policy_table(pol);
                              centering = std::max(
                                  centering, pi.cwiseProduct(qa.advantage).rowwise().sum().cwiseAbs().maxCoeff());
                              StateFeatures f = make_features(m, FeatureKind::RandomProjection, 3, i);
                              CriticFixedPoint fp = critic_fixed_point(m, pol, g, f);
                              residual = std::max(residual, (fp.A * fp.v_star + fp.b).norm());
                          }
                          bool ok = ident < 1e-10 && second < 1e-10 && centering < 1e-10 && residual < 1e-9;
                          return CheckOutcome{ok, "identity " + fmt(ident) + ", second difference " + fmt(second) +
                                                      ", centering " + fmt(centering) + ", residual " + fmt(residual)};
                      }});

    checks.push_back({"schedules: timescale ratios decrease, Robbins-Monro exponents", [](int) {
                          for (ScheduleMode mode : {ScheduleMode::Standard, ScheduleMode::Modified}) {
                              ExponentTriple e = optimal_exponents(mode);
                              ScheduleSet s = make_schedule_set(mode, e.nu, e.sigma.value_or(e.nu), e.beta);
                              double prev_ba = INFINITY, prev_cb = INFINITY;
                              for (long t = 1000; t <= 1000000; t *= 10) {
                                  double ba = s.b.value_at(t) / s.a.value_at(t);
                                  double cb = s.c.value_at(t) / s.b.value_at(t);
                                  if (!(ba < prev_ba && cb < prev_cb))
                                      return CheckOutcome{false, to_string(mode) + ": ratio not decreasing at t=" +
                                                                     std::to_string(t)};
                                  prev_ba = ba;
                                  prev_cb = cb;
                              }
                              if (!(prev_cb < 0.05))
                                  return CheckOutcome{false, to_string(mode) + ": c/b = " + fmt(prev_cb) + " at 1e6"};
                              for (const StepSchedule* st : {&s.a, &s.b, &s.c, &s.d})
                                  if (!(st->exponent > 0.0 && st->exponent <= 1.0))
                                      return CheckOutcome{false, "exponent outside (0, 1]"};
                          }
                          return CheckOutcome{true, "b/a and c/b decreasing over [1e3, 1e6], c/b < 0.05 at 1e6"};
                      }});

    checks.push_back({"metrics: rate fit scale invariance and exact power law", [](int) {
                          std::vector<double> t, y, y3;
                          for (int i = 0; i < 40; ++i) {
                              double ti = 1000.0 * std::pow(1000.0, i / 39.0);
                              t.push_back(ti);
                              y.push_back(std::log(ti) * std::log(ti) / std::sqrt(ti));
                              y3.push_back(3.0 * y.back());
                          }
                          RateFit a = fit_power_law(t, y), b = fit_power_law(t, y3);
                          std::vector<double> inv;
                          for (double ti : t) inv.push_back(1.0 / ti);
                          RateFit c = fit_power_law(t, inv);
                          bool ok = std::abs(a.slope - b.slope) < 1e-12 && std::abs(c.slope + 1.0) < 1e-9 &&
                                    a.slope > -0.5 && a.slope < -0.3;
                          return CheckOutcome{ok, "log^2/sqrt slope " + fmt(a.slope) + ", 1/t slope " + fmt(c.slope)};
                      }});

    checks.push_back({"algorithm: iterate invariants for every variant and mode", [](int) {
                          Instance inst = binding_chain_instance();
                          for (Variant v : {Variant::CAC, Variant::CNAC, Variant::CCA, Variant::CNCA}) {
                              for (ScheduleMode mode : {ScheduleMode::Standard, ScheduleMode::Modified}) {
                                  ScheduleCoefficients k;
                                  k.c_a = 0.02;
                                  k.c_b = 0.1;  // the actor's step in the critic_fast variants
                                  k.c_c = 1.0;
                                  ExponentTriple e = optimal_exponents(mode);
                                  AlgorithmConfig cfg = AlgorithmConfig::for_variant(
                                      v, make_schedule_set(mode, e.nu, e.sigma.value_or(e.nu), e.beta, k));
                                  cfg.projection_radius = 0.5;  // small enough to bind
                                  Mat C0 = relaxed_cost_table(inst.model, Vec::Zero(1));
                                  Mat CM = relaxed_cost_table(inst.model, Vec::Constant(1, cfg.multiplier_cap));
                                  double lo = std::min(C0.minCoeff(), CM.minCoeff());
                                  double hi = std::max(C0.maxCoeff(), CM.maxCoeff());
                                  std::string bad;
                                  auto obs = [&](const LearnerState& st) {
                                      if (!bad.empty()) return;
                                      if (st.v.norm() > cfg.projection_radius + 1e-12) bad = "v outside ball";
                                      if (st.gamma.minCoeff() < 0.0 || st.gamma.maxCoeff() > cfg.multiplier_cap)
                                          bad = "gamma outside [0, M]";
                                      if ((st.G - st.G.transpose()).cwiseAbs().maxCoeff() > 1e-12) bad = "G asymmetric";
                                      if (st.L_avg < lo - 1e-12 || st.L_avg > hi + 1e-12) bad = "L_t outside range";
                                      if (!bad.empty()) bad += " at t=" + std::to_string(st.t);
                                  };
                                  run(inst, cfg, 20000, 3, {}, obs);
                                  if (!bad.empty())
                                      return CheckOutcome{false, to_string(v) + "/" + to_string(mode) + ": " + bad};
                              }
                          }
                          return CheckOutcome{true, "8 configurations x 2e4 steps clean"};
                      }});

    checks.push_back({"envs: generator determinism, rho floor, mixing fit, feature audit", [](int) {
                          int rejections = 0;
                          for (int i = 0; i < 50; ++i) {
                              Cmdp m = ergodic(10, 3, 2, 700 + i);
                              Cmdp again = ergodic(10, 3, 2, 700 + i);
                              if (to_json(InstanceDocument{m, {}, {}, {}}).dump() !=
                                  to_json(InstanceDocument{again, {}, {}, {}}).dump())
                                  return CheckOutcome{false, "generator not deterministic"};
                              if (!validate_cmdp(m).ok()) return CheckOutcome{false, validate_cmdp(m).violations[0]};
                              for (const Mat& rows : m.transition)
                                  if (rows.minCoeff() < 0.01 - 1e-15) return CheckOutcome{false, "entry below rho"};
                              Mat P = induced_chain(m, Mat::Constant(10, 3, 1.0 / 3.0));
                              if (!mixing_profile(P, stationary_distribution(P), 30).mixing)
                                  return CheckOutcome{false, "fitted k >= 1 on seed " + std::to_string(700 + i)};
                              auto sa = std::make_shared<const SaFeatures>(
                                  make_sa_features(10, 3, SaFeatureKind::TabularReduced));
                              rejections += make_audited_features(m, sa, 4, i).rejections;
                          }
                          return CheckOutcome{true, "50 instances, audit rejections " + std::to_string(rejections)};
                      }});

    checks.push_back({"envs: binding chain brackets the threshold", [](int) {
                          for (std::uint64_t seed = 0; seed < 10; ++seed) {
                              BindingChain c = binding_chain_cmdp(6, seed);
                              if (!(c.info.greedy_G > c.info.alpha && c.info.safe_G < c.info.alpha))
                                  return CheckOutcome{false, "seed " + std::to_string(seed)};
                          }
                          return CheckOutcome{true, "greedy above, safe below on 10 seeds"};
                      }});
    return checks;
}

std::vector<Check> acceptance_checks() {
    std::vector<Check> checks;

    checks.push_back({"criterion 1: oracle exactness on 50 instances", [](int) {
                          const auto t0 = Clock::now();
                          double residual = 0.0, grad_err = 0.0, centering = 0.0;
                          for (const ExactnessCase& c : exactness_cases()) {
                              PolicyParams pol(c.sa, c.theta);
                              CriticFixedPoint fp = critic_fixed_point(c.model, pol, c.gamma, c.features);
                              residual = std::max(residual, (fp.A * fp.v_star + fp.b).norm());
                              Vec g = exact_policy_gradient(c.model, pol, c.gamma);
                              Vec fd = finite_difference_gradient(c.model, pol, c.gamma, 1e-5);
                              grad_err = std::max(grad_err, (g - fd).norm() / (1.0 + g.norm()));
                              QAdvantage qa = differential_q_advantage(c.model, pol, c.gamma);
                              centering = std::max(centering, policy_table(pol)
                                                                  .cwiseProduct(qa.advantage)
                                                                  .rowwise()
                                                                  .sum()
                                                                  .cwiseAbs()
                                                                  .maxCoeff());
                          }
                          const double secs = seconds_since(t0);
                          bool ok = residual < 1e-9 && grad_err < 1e-5 && centering < 1e-10 && secs < 30.0;
                          return CheckOutcome{ok, "max ||Av*+b|| " + fmt(residual) + ", gradient rel. error " +
                                                      fmt(grad_err) + ", centering " + fmt(centering) + ", " +
                                                      fmt(secs, 3) + " s"};
                      }});

    checks.push_back({"criterion 2: compatible-feature consistency with one-hot critic", [](int) {
                          double worst = 0.0;
                          for (const ExactnessCase& c : exactness_cases()) {
                              PolicyParams pol(c.sa, c.theta);
                              CriticFixedPoint fp = critic_fixed_point(c.model, pol, c.gamma, c.features);
                              Vec mb = m_bar(c.model, pol, fp.v_star, c.gamma, c.features);
                              worst = std::max(worst, (mb - exact_policy_gradient(c.model, pol, c.gamma)).norm());
                          }
                          return CheckOutcome{worst < 1e-8, "max ||m_bar - grad|| " + fmt(worst)};
                      }});

    checks.push_back({"criterion 3: frozen-policy TD rate", [](int jobs) {
                          const auto t0 = Clock::now();
                          Instance inst = small_ergodic_instance();
                          auto runs = run_many(inst, frozen_critic_config(), 100000, 10, jobs);
                          std::vector<double> slopes, finals;
                          for (const auto& r : runs) {
                              slopes.push_back(fit_rate(r.log, field_by_name("z_sq"), 1000, 100000).slope);
                              finals.push_back(r.log.back().z_sq);
                          }
                          const double s = median(slopes), secs = seconds_since(t0);
                          return CheckOutcome{s <= -0.3 && secs < 120.0,
                                              "median slope " + fmt(s) + " (<= -0.3), median final z^2 " +
                                                  fmt(median(finals)) + ", " + fmt(secs, 3) + " s"};
                      }});

    checks.push_back({"criterion 4: C-NCA windowed critic error drops 2x from 1e4 to 1e5", [](int jobs) {
                          const auto t0 = Clock::now();
                          auto runs = run_many(binding_chain_instance(), binding_chain_config(), 100000, 10, jobs);
                          std::vector<double> ratios;
                          auto z = field_by_name("z_sq");
                          for (const auto& r : runs)
                              ratios.push_back(windowed_mean(r.log, z, 10000) / windowed_mean(r.log, z, 100000));
                          const double m = median(ratios), secs = seconds_since(t0);
                          return CheckOutcome{m >= 2.0 && secs < 300.0,
                                              "median ratio " + fmt(m) + " (>= 2), " + fmt(secs, 3) + " s"};
                      }});

    checks.push_back({"criterion 5: modified schedules no worse than standard", [](int jobs) {
                          Instance inst = binding_chain_instance();
                          auto z = field_by_name("z_sq");
                          double wz[2], slope[2];
                          for (int i = 0; i < 2; ++i) {
                              ScheduleMode mode = i == 0 ? ScheduleMode::Standard : ScheduleMode::Modified;
                              auto runs = run_many(inst, schedule_comparison_config(mode), 100000, 10, jobs);
                              std::vector<double> w, s;
                              for (const auto& r : runs) {
                                  w.push_back(windowed_mean(r.log, z, 100000));
                                  s.push_back(fit_rate(r.log, z, 1000, 100000).slope);
                              }
                              wz[i] = median(w);
                              slope[i] = median(s);
                          }
                          bool ok = wz[1] <= 1.25 * wz[0] && slope[1] <= slope[0] + 0.05;
                          return CheckOutcome{ok, "windowed z^2 standard " + fmt(wz[0]) + " modified " + fmt(wz[1]) +
                                                      "; slope standard " + fmt(slope[0]) + " modified " +
                                                      fmt(slope[1])};
                      }});

    checks.push_back({"criterion 6: C-NCA satisfies the constraint at 5e5", [](int jobs) {
                          Instance inst = binding_chain_instance();
                          AlgorithmConfig cfg = binding_chain_config();
                          cfg.eval_every = 1000;
                          auto runs = run_many(inst, cfg, 500000, 10, jobs);
                          std::vector<double> gaps;
                          for (const auto& r : runs) gaps.push_back(record_at(r.log, 500000).gap[0]);
                          const double alpha = inst.model.thresholds[0], m = median(gaps);
                          return CheckOutcome{m <= 0.05 * alpha, "median gap " + fmt(m) + " (<= " +
                                                                     fmt(0.05 * alpha) + " = 0.05 alpha)"};
                      }});

    checks.push_back({"criterion 7: iterate invariants over 1e6 steps", [](int) {
                          Instance inst = binding_chain_instance();
                          AlgorithmConfig cfg = binding_chain_config();
                          cfg.eval_every = 100000;
                          long violations = 0;
                          double min_eig = INFINITY;
                          auto obs = [&](const LearnerState& st) {
                              bool bad = st.v.norm() > cfg.projection_radius + 1e-12;
                              for (int k = 0; k < st.gamma.size(); ++k)
                                  bad |= st.gamma[k] < 0.0 || st.gamma[k] > cfg.multiplier_cap;
                              bad |= (st.G - st.G.transpose()).cwiseAbs().maxCoeff() > 1e-12;
                              Eigen::SelfAdjointEigenSolver<Mat> eig(st.G, Eigen::EigenvaluesOnly);
                              const double lo = eig.eigenvalues().minCoeff();
                              min_eig = std::min(min_eig, lo);
                              bad |= !(lo > 0.0);
                              violations += bad ? 1 : 0;
                          };
                          run(inst, cfg, 1000000, 1, {}, obs);
                          return CheckOutcome{violations == 0, std::to_string(violations) +
                                                                   " violations, min lambda_min(G) " + fmt(min_eig)};
                      }});

    checks.push_back({"criterion 8: frozen-theta Fisher recursion reaches exact Fisher", [](int jobs) {
                          Instance inst = small_ergodic_instance();
                          AlgorithmConfig cfg = binding_chain_config();
                          cfg.update_actor = false;
                          cfg.update_multipliers = false;
                          std::mt19937_64 rng(8);
                          const Vec theta = gaussian(inst.sa_features->dim(), rng, 0.5);
                          const Mat F = exact_fisher(PolicyParams(inst.sa_features, theta), inst.model);
                          std::vector<double> errs(10);
                          std::vector<std::thread> pool;
                          std::atomic<int> next{0};
                          auto worker = [&] {
                              for (int i = next++; i < 10; i = next++) {
                                  LearnerState st = init(cfg, inst, static_cast<std::uint64_t>(i + 1));
                                  st.theta = theta;
                                  while (st.t < 100000) advance(st, inst, cfg);
                                  errs[i] = (st.G - F).norm();
                              }
                          };
                          const int workers = std::max(1, std::min(jobs, 10));
                          for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
                          for (auto& t : pool) t.join();
                          const double m = median(errs);
                          return CheckOutcome{m < 2e-2, "median ||G - F||_F " + fmt(m) + " (< 2e-2)"};
                      }});

    checks.push_back({"criterion 9: schedule validator labeled examples", [](int) {
                          std::vector<std::string> failures;
                          auto expect = [&](const std::string& label, bool got, bool want) {
                              if (got != want) failures.push_back(label);
                          };
                          expect("standard 0.5/0.55/1 passes",
                                 validate(make_schedule_set(ScheduleMode::Standard, 0.5, 0.55, 1.0)).ok(), true);
                          ScheduleReport bad = validate(make_schedule_set(ScheduleMode::Standard, 0.5, 0.9, 1.0));
                          expect("standard 0.5/0.9/1 fails on 2σ < 3ν",
                                 !bad.ok() && bad.first_failure().find("2σ < 3ν") != std::string::npos, true);
                          expect("modified 0.5/1 passes",
                                 validate(make_schedule_set(ScheduleMode::Modified, 0.5, 0.5, 1.0)).ok(), true);
                          ExponentTriple e = optimal_exponents(ScheduleMode::Standard, 0.01);
                          expect("optimal standard delta 0.01 is (0.5, 0.51, 1) and valid",
                                 e.nu == 0.5 && e.sigma && std::abs(*e.sigma - 0.51) < 1e-15 && e.beta == 1.0 &&
                                     validate(make_schedule_set(ScheduleMode::Standard, e.nu, *e.sigma, e.beta)).ok(),
                                 true);
                          ExponentTriple m = optimal_exponents(ScheduleMode::Modified);
                          expect("optimal modified is (0.5, 1)", m.nu == 0.5 && !m.sigma && m.beta == 1.0, true);
                          bool threw = false;
                          try {
                              optimal_exponents(ScheduleMode::Standard, 0.0);
                          } catch (const Error&) {
                              threw = true;
                          }
                          expect("optimal standard delta 0 rejected", threw, true);
                          std::string detail = failures.empty() ? "6/6 examples behave as labeled" : "";
                          for (const auto& f : failures) detail += (detail.empty() ? "wrong: " : "; ") + f;
                          return CheckOutcome{failures.empty(), detail};
                      }});

    checks.push_back({"criterion 10: determinism and instance round-trip", [](int) {
                          Instance inst = binding_chain_instance();
                          AlgorithmConfig cfg = binding_chain_config();
                          const int N = inst.model.n_constraints();
                          std::string a = metrics_csv(run(inst, cfg, 20000, 5).log, N);
                          std::string b = metrics_csv(run(inst, cfg, 20000, 5).log, N);
                          if (a != b) return CheckOutcome{false, "repeated run CSVs differ"};

                          Cmdp m = ergodic(7, 3, 2, 4242);
                          InstanceDocument doc{m, make_sa_features(7, 3, SaFeatureKind::Random, 4, 1),
                                               make_features(m, FeatureKind::RandomProjection, 3, 2), {}};
                          const std::string text = to_json(doc).dump(2);
                          InstanceDocument back = instance_from_json(json::parse(text));
                          bool same = back.model.n_states == m.n_states && back.model.n_actions == m.n_actions &&
                                      back.model.cost == m.cost && back.model.thresholds == m.thresholds &&
                                      back.model.cost_bound == m.cost_bound &&
                                      back.model.constraint_costs == m.constraint_costs &&
                                      back.sa_features->table == doc.sa_features->table &&
                                      back.state_features->matrix == doc.state_features->matrix;
                          for (int s = 0; s < m.n_states; ++s) same = same && back.model.transition[s] == m.transition[s];
                          same = same && to_json(back).dump(2) == text;
                          return CheckOutcome{same, same ? "CSV bytes identical, round-trip value-identical"
                                                         : "round-trip changed a value"};
                      }});
    return checks;
}

}  // namespace cnca
