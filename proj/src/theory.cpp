#include "simplex_stdp/theory.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include <json.hpp>

#include "simplex_stdp/ensemble.hpp"
#include "simplex_stdp/errors.hpp"
#include "simplex_stdp/io.hpp"

namespace simplex_stdp {

using nlohmann::json;

namespace {

// Largest alpha in [0, 1/Q) with alpha <= min(cubic_scale (1 - Q alpha)^3, cap).
// The right-hand side is nonincreasing in alpha, so the admissible set is an
// interval and bisection runs until the bracket is a few ulps wide.
double solve_implicit_alpha(double cubic_scale, double cap, double q) {
  auto admissible = [&](double a) {
    const double r = 1.0 - q * a;
    return a <= std::min(cubic_scale * r * r * r, cap);
  };
  double lo = 0.0;
  double hi = 1.0 / q;
  for (int it = 0; it < 2000; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (admissible(mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

double log_term(double p1, double epsilon, double delta_target) {
  return std::log(4.0 * (1.0 - p1) / (epsilon * delta_target));
}

void require_alpha(double alpha) {
  if (!(alpha > 0.0)) throw PreconditionError("theorem parameters: alpha must be positive");
}

void require_target(double delta_target) {
  if (!(delta_target > 0.0 && delta_target < 1.0)) throw PreconditionError("delta target must lie in (0, 1)");
}

void require_valid(const CorrTheoremParams& p) {
  p.base.validate();
  if (!p.valid) throw PreconditionError("correlated theorem parameters: c_star must be positive");
}

json theorem_params_json(const TheoremParams& p) {
  return {{"delta", p.delta}, {"epsilon", p.epsilon}, {"q_bound", p.q_bound},
          {"p1_initial", p.p1_initial}, {"dim", p.dim}, {"alpha", p.alpha}};
}

}  // namespace

std::vector<std::string> TheoremParams::violations() const {
  std::vector<std::string> out;
  if (!(delta > 0.0 && delta <= 1.0)) out.push_back("delta: must lie in (0, 1], got " + format_double(delta));
  if (!(epsilon > 0.0 && epsilon < 1.0)) out.push_back("epsilon: must lie in (0, 1)");
  if (!(q_bound > 1.0)) out.push_back("q_bound: must exceed 1");
  if (!(p1_initial > 0.0 && p1_initial <= 1.0)) out.push_back("p1_initial: must lie in (0, 1]");
  if (dim < 2) out.push_back("dim: must be at least 2");
  if (!(alpha >= 0.0)) out.push_back("alpha: must be nonnegative");
  return out;
}

void TheoremParams::validate() const {
  auto v = violations();
  if (v.empty()) return;
  std::string msg = "theorem parameters";
  for (auto& s : v) msg += "; " + s;
  throw PreconditionError(msg);
}

TheoremParams TheoremParams::from_initial(std::span<const double> p0, double epsilon, double q_bound,
                                          double alpha) {
  TheoremParams t;
  t.delta = first_coordinate_gap(p0);
  t.epsilon = epsilon;
  t.q_bound = q_bound;
  t.p1_initial = p0[0];
  t.dim = p0.size();
  t.alpha = alpha;
  return t;
}

double max_alpha(const TheoremParams& params) {
  params.validate();
  const double q2 = params.q_bound * params.q_bound;
  const double scale = params.delta * params.delta / (16.0 * q2);
  const double d = static_cast<double>(params.dim);
  const double second = (4.0 * params.delta / d + params.delta * params.delta) * params.epsilon /
                        (256.0 * (1.0 - params.p1_initial));
  return solve_implicit_alpha(scale, scale * second, params.q_bound);
}

double lemma_ek_alpha_limit(const TheoremParams& params) {
  params.validate();
  const double scale = params.delta * params.delta / (16.0 * params.q_bound * params.q_bound);
  return solve_implicit_alpha(scale, std::numeric_limits<double>::infinity(), params.q_bound);
}

double bound(double k, const TheoremParams& params) {
  params.validate();
  const double d = static_cast<double>(params.dim);
  const double rate = params.alpha / 16.0 * (4.0 * params.delta / d + params.delta * params.delta);
  return 2.0 * (1.0 - params.p1_initial) * std::exp(-rate * k);
}

double contraction_bound(double k, const TheoremParams& params) {
  params.validate();
  const double d = static_cast<double>(params.dim);
  const double factor =
      1.0 - params.alpha * params.delta / (4.0 * d) * (1.0 + params.delta * (d - 1.0) / 2.0);
  return 2.0 * (1.0 - params.p1_initial) * std::pow(factor, k);
}

double iteration_horizon(double delta_target, const TheoremParams& params) {
  params.validate();
  require_alpha(params.alpha);
  require_target(delta_target);
  const double d = static_cast<double>(params.dim);
  return 16.0 * d / (params.alpha * params.delta * (4.0 + d * params.delta)) *
         log_term(params.p1_initial, params.epsilon, delta_target);
}

std::size_t iterations_for(double delta_target, const TheoremParams& params) {
  const double h = iteration_horizon(delta_target, params);
  return h <= 0.0 ? 0 : static_cast<std::size_t>(std::ceil(h));
}

double CorrTheoremParams::concentration_threshold() const {
  return 0.25 * std::min(delta_p, delta_gamma / gamma_row_norm);
}

CorrTheoremParams corr_params(std::span<const double> p0, const CorrelationMatrix& gamma, double epsilon,
                              double q_bound, double alpha) {
  ProbabilityVector p(Vector(p0.begin(), p0.end()));
  if (gamma.dim() != p.dim()) throw InvalidInput("corr_params: dimension mismatch");
  CorrTheoremParams c;
  c.base = TheoremParams::from_initial(p0, epsilon, q_bound, alpha);
  c.delta_p = c.base.delta;
  const Vector gp = gamma.apply(p0);
  c.delta_gamma = first_coordinate_gap(gp);
  c.nu = gamma.nu();
  const double prod = c.delta_p * c.delta_gamma / 4.0;
  c.c_star = prod - c.nu * (1.0 + prod);
  c.gamma_row_norm = gamma.row_norm();
  c.valid = c.c_star > 0.0 && c.delta_p > 0.0 && c.delta_gamma > 0.0;
  return c;
}

double max_alpha_corr(const CorrTheoremParams& params) {
  require_valid(params);
  const TheoremParams& b = params.base;
  const double q2 = b.q_bound * b.q_bound;
  const double d = static_cast<double>(b.dim);
  const double m = std::min(params.delta_p, params.delta_gamma / params.gamma_row_norm);
  const double second = m * m * params.delta_gamma * (4.0 / d + params.delta_p) * b.epsilon /
                        (1024.0 * (1.0 - b.p1_initial));
  return solve_implicit_alpha(params.c_star / (4.0 * q2), second / (4.0 * q2), b.q_bound);
}

double lemma_ek_alpha_limit_corr(const CorrTheoremParams& params) {
  require_valid(params);
  const double q2 = params.base.q_bound * params.base.q_bound;
  return solve_implicit_alpha(params.c_star / (4.0 * q2), std::numeric_limits<double>::infinity(),
                              params.base.q_bound);
}

double bound_corr(double k, const CorrTheoremParams& params) {
  require_valid(params);
  const TheoremParams& b = params.base;
  const double d = static_cast<double>(b.dim);
  const double rate = b.alpha * params.delta_gamma / 16.0 * (4.0 / d + params.delta_p);
  return 2.0 * (1.0 - b.p1_initial) * std::exp(-rate * k);
}

double iteration_horizon_corr(double delta_target, const CorrTheoremParams& params) {
  require_valid(params);
  const TheoremParams& b = params.base;
  require_alpha(b.alpha);
  require_target(delta_target);
  const double d = static_cast<double>(b.dim);
  return 16.0 * d / (b.alpha * params.delta_gamma * (4.0 + d * params.delta_p)) *
         log_term(b.p1_initial, b.epsilon, delta_target);
}

std::size_t iterations_corr(double delta_target, const CorrTheoremParams& params) {
  const double h = iteration_horizon_corr(delta_target, params);
  return h <= 0.0 ? 0 : static_cast<std::size_t>(std::ceil(h));
}

EventCriteria EventCriteria::independent(const TheoremParams& params) {
  params.validate();
  EventCriteria c;
  c.alpha = params.alpha;
  c.omega_gap = params.delta / 2.0;
  c.e_threshold = params.delta / 4.0;
  return c;
}

EventCriteria EventCriteria::correlated(const CorrTheoremParams& params, const CorrelationMatrix& gamma) {
  require_valid(params);
  EventCriteria c;
  c.alpha = params.base.alpha;
  c.omega_gap = params.delta_p / 2.0;
  c.e_threshold = params.concentration_threshold();
  c.gamma = gamma;
  c.omega_gamma_gap = params.delta_gamma / 2.0;
  return c;
}

EventMonitor::EventMonitor(EventCriteria criteria, std::span<const double> p0, bool keep_paths)
    : criteria_(std::move(criteria)), keep_paths_(keep_paths), m_(p0.size(), 0.0), max_abs_(p0.size(), 0.0) {
  if (criteria_.gamma && criteria_.gamma->dim() != p0.size()) {
    throw InvalidInput("event monitor: dimension mismatch");
  }
  if (keep_paths_) {
    paths_.omega_flags.push_back(true);
    paths_.martingales.assign(p0.size(), Vector{});
  }
}

void EventMonitor::observe(std::span<const double> before, std::span<const double> y,
                           std::span<const double> after) {
  const std::size_t d = m_.size();
  if (before.size() != d || y.size() != d || after.size() != d) throw InvalidInput("event monitor: dimension mismatch");

  // xi(l) with the conditional mean E[Y | p]: p, or Gamma p when correlated
  std::span<const double> mean = before;
  if (criteria_.gamma) {
    gamma_p_ = criteria_.gamma->apply(before);
    mean = gamma_p_;
  }
  const double pm = dot(before, mean);
  const double py = dot(before, y);
  bool e_flag = true;
  for (std::size_t j = 0; j < d; ++j) {
    if (omega_) {
      const double xi = before[j] * ((mean[j] - pm) - (y[j] - py));
      m_[j] += criteria_.alpha * xi;
    }
    max_abs_[j] = std::max(max_abs_[j], std::abs(m_[j]));
    e_flag = e_flag && max_abs_[j] <= criteria_.e_threshold;
  }

  bool next_omega = omega_ && first_coordinate_gap(after) >= criteria_.omega_gap;
  if (next_omega && criteria_.gamma) {
    next_omega = first_coordinate_gap(criteria_.gamma->apply(after)) >= criteria_.omega_gamma_gap;
  }
  if (e_flag && !next_omega) ++violations_;

  if (keep_paths_) {
    for (std::size_t j = 0; j < d; ++j) paths_.martingales[j].push_back(m_[j]);
    paths_.e_flags.push_back(e_flag);
    paths_.omega_flags.push_back(next_omega);
  }
  omega_ = next_omega;
  ++steps_;
}

EventTracker EventMonitor::tracker() const {
  if (!keep_paths_) throw InvalidInput("event monitor: paths were not kept");
  EventTracker t = paths_;
  t.inclusion_violations = violations_;
  return t;
}

EventTracker track_events(const TrajectoryRecord& record, const EventCriteria& criteria) {
  if (record.states.empty()) throw InvalidInput("track_events: empty trajectory");
  const std::size_t n = record.states.size() - 1;
  if (record.samples.size() != n) {
    throw InvalidInput("track_events: trajectory lacks step samples (record with record_samples and stride 1)");
  }
  EventMonitor mon(criteria, record.states.front(), true);
  for (std::size_t k = 0; k < n; ++k) {
    mon.observe(record.states[k], record.samples[k].combined, record.states[k + 1]);
  }
  return mon.tracker();
}

std::string VerificationReport::to_json() const {
  json j;
  j["theorem"] = theorem;
  j["params"] = json::parse(params_json);
  j["trajectories"] = trajectories;
  j["horizon"] = horizon;
  j["theta_count"] = theta_count;
  j["empirical_theta_probability"] = empirical_theta_probability;
  json cps = json::array();
  for (const auto& c : bound_checkpoints) cps.push_back({c.k, c.empirical, c.bound});
  j["bound_checkpoints"] = cps;
  j["inclusion_violations"] = inclusion_violations;
  j["alpha_within_lemma_constraint"] = alpha_within_lemma_constraint;
  j["final_martingale_mean"] = final_martingale_mean;
  j["final_martingale_std"] = final_martingale_std;
  j["violations"] = violations;
  return j.dump(2);
}

namespace {

struct PathSummary {
  bool theta = false;
  std::size_t inclusion_violations = 0;
  Vector distances;
  Vector final_martingale;
};

struct VerificationInputs {
  std::string theorem;
  json params;
  DynamicsConfig dynamics;
  EventCriteria criteria;
  std::function<double(double)> bound_fn;
  double theta_floor = 0.0;
  bool alpha_ok = false;
};

VerificationReport run_verification(const VerificationInputs& in, const VerificationSetup& setup) {
  const std::size_t n = setup.iterations;
  std::vector<std::size_t> checkpoints = setup.checkpoints;
  if (checkpoints.empty()) checkpoints = {0, n / 4, n / 2, 3 * n / 4, n};
  std::sort(checkpoints.begin(), checkpoints.end());
  checkpoints.erase(std::unique(checkpoints.begin(), checkpoints.end()), checkpoints.end());
  if (checkpoints.back() > n) throw InvalidInput("verification: checkpoint beyond horizon");

  DynamicsConfig cfg = in.dynamics;
  cfg.iterations = n;
  cfg.stride = std::max<std::size_t>(n, 1);
  cfg.validate();
  const Vector p0 = initial_state(cfg).values();

  auto paths = parallel_map(setup.trajectories, setup.threads, [&](std::size_t i) {
    PathSummary s;
    s.distances.assign(checkpoints.size(), 0.0);
    std::size_t next = 0;
    if (checkpoints[0] == 0) s.distances[next++] = l1_distance_to_vertex(p0, 0);
    EventMonitor mon(in.criteria, p0);
    run_trajectory(cfg, derive_seed(setup.master_seed, i),
                   [&](std::size_t k, std::span<const double> before, const StepSample& smp,
                       std::span<const double> after) {
                     mon.observe(before, smp.combined, after);
                     if (next < checkpoints.size() && checkpoints[next] == k + 1) {
                       s.distances[next++] = l1_distance_to_vertex(after, 0);
                     }
                   });
    s.theta = mon.omega();
    s.inclusion_violations = mon.inclusion_violations();
    s.final_martingale = mon.martingale();
    return s;
  });

  VerificationReport r;
  r.theorem = in.theorem;
  r.params_json = in.params.dump();
  r.trajectories = setup.trajectories;
  r.horizon = n;
  r.alpha_within_lemma_constraint = in.alpha_ok;
  const std::size_t d = p0.size();
  r.final_martingale_mean.assign(d, 0.0);
  r.final_martingale_std.assign(d, 0.0);
  Vector sums(checkpoints.size(), 0.0);
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const auto& s = paths[i];
    if (s.theta) {
      ++r.theta_count;
      for (std::size_t c = 0; c < checkpoints.size(); ++c) sums[c] += s.distances[c];
    }
    if (s.inclusion_violations > 0) {
      r.inclusion_violations += s.inclusion_violations;
      r.violations.push_back("inclusion E(k) in Omega(k+1) failed " + std::to_string(s.inclusion_violations) +
                             " times on trajectory " + std::to_string(i));
    }
    for (std::size_t j = 0; j < d; ++j) r.final_martingale_mean[j] += s.final_martingale[j];
  }
  const double count = static_cast<double>(std::max<std::size_t>(paths.size(), 1));
  for (std::size_t j = 0; j < d; ++j) {
    r.final_martingale_mean[j] /= count;
    double v = 0.0;
    for (const auto& s : paths) v += std::pow(s.final_martingale[j] - r.final_martingale_mean[j], 2);
    r.final_martingale_std[j] = paths.size() > 1 ? std::sqrt(v / (count - 1.0)) : 0.0;
  }
  r.empirical_theta_probability = static_cast<double>(r.theta_count) / count;
  if (r.empirical_theta_probability < in.theta_floor) {
    r.violations.push_back("empirical Theta probability " + format_double(r.empirical_theta_probability) +
                           " below floor " + format_double(in.theta_floor));
  }
  for (std::size_t c = 0; c < checkpoints.size(); ++c) {
    CheckpointResult cr;
    cr.k = checkpoints[c];
    cr.empirical = r.theta_count > 0 ? sums[c] / static_cast<double>(r.theta_count) : 0.0;
    cr.bound = in.bound_fn(static_cast<double>(cr.k));
    if (cr.empirical > (1.0 + setup.bound_slack) * cr.bound) {
      r.violations.push_back("bound domination failed at k=" + std::to_string(cr.k));
    }
    r.bound_checkpoints.push_back(cr);
  }
  return r;
}

}  // namespace

VerificationReport verify_theorem(std::span<const double> p0, const TheoremParams& params,
                                  const VerificationSetup& setup) {
  params.validate();
  require_alpha(params.alpha);
  VerificationInputs in;
  in.theorem = "independent";
  in.params = theorem_params_json(params);
  in.dynamics.variant = ModelVariant::independent;
  in.dynamics.alpha = params.alpha;
  in.dynamics.noise = setup.noise;
  in.dynamics.p0 = Vector(p0.begin(), p0.end());
  in.criteria = EventCriteria::independent(params);
  in.bound_fn = [params](double k) { return bound(k, params); };
  in.theta_floor = 1.0 - params.epsilon / 2.0 - setup.theta_slack;
  in.alpha_ok = params.alpha <= lemma_ek_alpha_limit(params);
  return run_verification(in, setup);
}

VerificationReport verify_theorem_corr(std::span<const double> p0, const CorrelationMatrix& gamma,
                                       const CorrTheoremParams& params, const VerificationSetup& setup) {
  require_valid(params);
  require_alpha(params.base.alpha);
  VerificationInputs in;
  in.theorem = "correlated";
  in.params = theorem_params_json(params.base);
  in.params["delta_p"] = params.delta_p;
  in.params["delta_gamma"] = params.delta_gamma;
  in.params["nu"] = params.nu;
  in.params["c_star"] = params.c_star;
  in.params["gamma_row_norm"] = params.gamma_row_norm;
  in.dynamics.variant = ModelVariant::correlated;
  in.dynamics.alpha = params.base.alpha;
  in.dynamics.noise = setup.noise;
  in.dynamics.p0 = Vector(p0.begin(), p0.end());
  in.dynamics.gamma = gamma.matrix();
  in.criteria = EventCriteria::correlated(params, gamma);
  in.bound_fn = [params](double k) { return bound_corr(k, params); };
  in.theta_floor = 1.0 - params.base.epsilon / 2.0 - setup.theta_slack;
  in.alpha_ok = params.base.alpha <= lemma_ek_alpha_limit_corr(params);
  return run_verification(in, setup);
}

double priming_delta(const IntensityVector& lambda_a, const IntensityVector& lambda_b) {
  if (lambda_a.dim() != lambda_b.dim() || lambda_a.dim() < 2) throw InvalidInput("priming: dimension mismatch");
  // delta/(1-delta) < r with r = min_{i>1} la_i lb_1 / (lb_i la_1)
  double r = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < lambda_a.dim(); ++i) {
    r = std::min(r, lambda_a[i] * lambda_b[0] / (lambda_b[i] * lambda_a[0]));
  }
  auto admissible = [&](double delta) {
    double worst = 0.0;
    for (std::size_t i = 1; i < lambda_a.dim(); ++i) {
      worst = std::max(worst, lambda_b[i] * lambda_a[0] * delta / (lambda_a[i] * lambda_b[0] * (1.0 - delta)));
    }
    return worst < 1.0;
  };
  double delta = std::min(r / (1.0 + r), std::nextafter(1.0, 0.0));
  while (delta > 0.0 && !admissible(delta)) delta = std::nextafter(delta, 0.0);
  return delta;
}

namespace {

void check_priming_assumptions(const IntensityVector& la, const IntensityVector& lb, const WeightVector& w0) {
  const std::size_t d = w0.dim();
  if (la.dim() != d || lb.dim() != d || d < 2) throw InvalidInput("priming: dimension mismatch");
  for (std::size_t i = 1; i < d; ++i) {
    if (!(la[0] * w0[0] > la[i] * w0[i])) {
      throw PreconditionError("priming: lambda_a_1 w_1(0) > lambda_a_" + std::to_string(i + 1) + " w_" +
                              std::to_string(i + 1) + "(0) violated");
    }
  }
  // Identical phases make the switch a no-op; only the first-phase ordering matters.
  if (la == lb) return;
  for (std::size_t i = 0; i + 1 < d; ++i) {
    if (!(lb[d - 1] * w0[d - 1] > lb[i] * w0[i])) {
      throw PreconditionError("priming: lambda_b_d w_d(0) > lambda_b_" + std::to_string(i + 1) + " w_" +
                              std::to_string(i + 1) + "(0) violated");
    }
  }
}

}  // namespace

double priming_alpha(const IntensityVector& lambda_a, const WeightVector& w0, const PrimingParams& params) {
  if (params.alpha > 0.0) return params.alpha;
  const ProbabilityVector pa = probabilities_from_weights(lambda_a, w0);
  return max_alpha(TheoremParams::from_initial(pa, params.epsilon, params.noise.q_bound()));
}

std::size_t priming_threshold(const IntensityVector& lambda_a, const IntensityVector& lambda_b,
                              const WeightVector& w0, const PrimingParams& params) {
  check_priming_assumptions(lambda_a, lambda_b, w0);
  const ProbabilityVector pa = probabilities_from_weights(lambda_a, w0);
  const double alpha = priming_alpha(lambda_a, w0, params);
  const TheoremParams tp = TheoremParams::from_initial(pa, params.epsilon, params.noise.q_bound(), alpha);
  return iterations_for(priming_delta(lambda_a, lambda_b), tp);
}

PrimingOutcome priming_experiment(const IntensityVector& lambda_a, const IntensityVector& lambda_b,
                                  const WeightVector& w0, std::size_t k_star, std::size_t total_k,
                                  const PrimingParams& params) {
  check_priming_assumptions(lambda_a, lambda_b, w0);
  PrimingOutcome out;
  out.k_star = k_star;
  out.total_k = total_k;
  out.alpha = priming_alpha(lambda_a, w0, params);
  out.delta = priming_delta(lambda_a, lambda_b);
  check_learning_rate(out.alpha, params.noise.q_bound());
  const std::size_t d = w0.dim();

  out.final_states = parallel_map(params.trajectories, params.threads, [&](std::size_t t) {
    Rng rng(derive_seed(params.master_seed, t));
    Vector w = w0.values();
    Vector p(d);
    StepSample s;
    auto probs = [&](const IntensityVector& lam) {
      double norm = 0.0;
      for (std::size_t i = 0; i < d; ++i) norm += lam[i] * w[i];
      for (std::size_t i = 0; i < d; ++i) p[i] = lam[i] * w[i] / norm;
    };
    for (std::size_t k = 0; k < total_k; ++k) {
      probs(k < k_star ? lambda_a : lambda_b);
      sample_step_into(p, params.noise, rng, s);
      double wmax = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        w[i] *= 1.0 + out.alpha * s.combined[i];
        wmax = std::max(wmax, w[i]);
      }
      if (wmax > 1e200) {
        for (double& x : w) x /= wmax;
      }
    }
    probs(total_k < k_star ? lambda_a : lambda_b);
    return p;
  });

  out.leader_counts.assign(d, 0);
  std::size_t near_first = 0;
  std::size_t near_last = 0;
  for (const auto& p : out.final_states) {
    const auto lead = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
    ++out.leader_counts[lead];
    if (l1_distance_to_vertex(p, 0) < out.delta) ++near_first;
    if (l1_distance_to_vertex(p, d - 1) < out.delta) ++near_last;
  }
  const double n = static_cast<double>(std::max<std::size_t>(out.final_states.size(), 1));
  out.fraction_near_first = static_cast<double>(near_first) / n;
  out.fraction_near_last = static_cast<double>(near_last) / n;
  return out;
}

}  // namespace simplex_stdp
