#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "simplex_stdp/dynamics.hpp"
#include "simplex_stdp/simplex.hpp"

namespace simplex_stdp {

struct TheoremParams {
  double delta = 0.0;
  double epsilon = 0.5;
  double q_bound = 2.0;
  double p1_initial = 0.0;
  std::size_t dim = 2;
  double alpha = 0.0;

  std::vector<std::string> violations() const;
  void validate() const;  // throws PreconditionError

  // Delta and p_1(0) read off p0, with coordinate 1 as the designated winner.
  static TheoremParams from_initial(std::span<const double> p0, double epsilon, double q_bound = 2.0,
                                    double alpha = 0.0);
};

// Largest alpha with alpha <= (Delta^2/(16Q^2)) min((1-Q alpha)^3, (4Delta/d + Delta^2) eps / (256(1-p_1(0)))).
double max_alpha(const TheoremParams& params);
// Largest alpha with alpha <= Delta^2 (1-Q alpha)^3 / (16 Q^2).
double lemma_ek_alpha_limit(const TheoremParams& params);

double bound(double k, const TheoremParams& params);
// 2(1-p_1(0)) (1 - alpha Delta/(4d) (1 + Delta(d-1)/2))^k
double contraction_bound(double k, const TheoremParams& params);
// Unrounded iteration count; iterations_for is its ceiling (0 if negative).
double iteration_horizon(double delta_target, const TheoremParams& params);
std::size_t iterations_for(double delta_target, const TheoremParams& params);

struct CorrTheoremParams {
  TheoremParams base;  // base.delta is Delta_p
  double delta_p = 0.0;
  double delta_gamma = 0.0;
  double nu = 0.0;
  double c_star = 0.0;
  double gamma_row_norm = 1.0;
  bool valid = false;

  // (1/4) min(Delta_p, Delta_Gamma / ||Gamma||_inf)
  double concentration_threshold() const;
};

CorrTheoremParams corr_params(std::span<const double> p0, const CorrelationMatrix& gamma, double epsilon = 0.5,
                              double q_bound = 2.0, double alpha = 0.0);
double max_alpha_corr(const CorrTheoremParams& params);
double lemma_ek_alpha_limit_corr(const CorrTheoremParams& params);
double bound_corr(double k, const CorrTheoremParams& params);
double iteration_horizon_corr(double delta_target, const CorrTheoremParams& params);
std::size_t iterations_corr(double delta_target, const CorrTheoremParams& params);

// Thresholds defining Omega(k) and E(k).
struct EventCriteria {
  double alpha = 0.0;
  double omega_gap = 0.0;    // Delta/2
  double e_threshold = 0.0;  // Delta/4, or the correlated analogue
  std::optional<CorrelationMatrix> gamma;
  double omega_gamma_gap = 0.0;  // Delta_Gamma/2, correlated mode only

  static EventCriteria independent(const TheoremParams& params);
  static EventCriteria correlated(const CorrTheoremParams& params, const CorrelationMatrix& gamma);
};

struct EventTracker {
  std::vector<bool> omega_flags;         // k = 0..N
  std::vector<Vector> martingales;       // martingales[j][k], k = 0..N-1
  std::vector<bool> e_flags;             // k = 0..N-1
  std::size_t inclusion_violations = 0;  // k with E(k) true and Omega(k+1) false
};

// Online version of track_events for runs too long to store.
class EventMonitor {
 public:
  EventMonitor(EventCriteria criteria, std::span<const double> p0, bool keep_paths = false);

  void observe(std::span<const double> before, std::span<const double> y, std::span<const double> after);

  bool omega() const noexcept { return omega_; }
  std::size_t steps() const noexcept { return steps_; }
  std::size_t inclusion_violations() const noexcept { return violations_; }
  const Vector& martingale() const noexcept { return m_; }
  EventTracker tracker() const;  // requires keep_paths

 private:
  EventCriteria criteria_;
  bool keep_paths_;
  bool omega_ = true;
  std::size_t steps_ = 0;
  std::size_t violations_ = 0;
  Vector m_;
  Vector max_abs_;
  Vector gamma_p_;
  EventTracker paths_;
};

// Needs a record with samples at stride 1.
EventTracker track_events(const TrajectoryRecord& record, const EventCriteria& criteria);

struct CheckpointResult {
  std::size_t k = 0;
  double empirical = 0.0;  // ensemble mean of ||p(k) - e_1||_1 over trajectories in Theta-hat
  double bound = 0.0;
};

struct VerificationReport {
  std::string theorem;
  std::string params_json;
  std::size_t trajectories = 0;
  std::size_t horizon = 0;
  std::size_t theta_count = 0;
  double empirical_theta_probability = 0.0;
  std::vector<CheckpointResult> bound_checkpoints;
  std::size_t inclusion_violations = 0;
  bool alpha_within_lemma_constraint = false;
  Vector final_martingale_mean;
  Vector final_martingale_std;
  std::vector<std::string> violations;

  std::string to_json() const;
};

struct VerificationSetup {
  std::size_t iterations = 0;
  std::size_t trajectories = 200;
  std::uint64_t master_seed = 1;
  std::size_t threads = 1;
  std::vector<std::size_t> checkpoints;  // empty: 0, N/4, N/2, 3N/4, N
  NoiseModel noise;
  double theta_slack = 0.05;  // floor is 1 - eps/2 - theta_slack
  double bound_slack = 0.1;   // mean distance may exceed the bound by this fraction
};

VerificationReport verify_theorem(std::span<const double> p0, const TheoremParams& params,
                                  const VerificationSetup& setup);
VerificationReport verify_theorem_corr(std::span<const double> p0, const CorrelationMatrix& gamma,
                                       const CorrTheoremParams& params, const VerificationSetup& setup);

struct PrimingParams {
  double alpha = 0.0;  // 0 selects max_alpha for the first phase
  double epsilon = 0.25;
  NoiseModel noise;
  std::size_t trajectories = 100;
  std::uint64_t master_seed = 1;
  std::size_t threads = 1;
};

// Largest delta (up to rounding) with max_{i>1} lb_i la_1 delta / (la_i lb_1 (1-delta)) < 1.
double priming_delta(const IntensityVector& lambda_a, const IntensityVector& lambda_b);
double priming_alpha(const IntensityVector& lambda_a, const WeightVector& w0, const PrimingParams& params);
// K* = iterations_for(priming_delta, first-phase theorem parameters)
std::size_t priming_threshold(const IntensityVector& lambda_a, const IntensityVector& lambda_b,
                              const WeightVector& w0, const PrimingParams& params);

struct PrimingOutcome {
  std::size_t k_star = 0;
  std::size_t total_k = 0;
  double alpha = 0.0;
  double delta = 0.0;
  std::vector<Vector> final_states;
  std::vector<std::size_t> leader_counts;  // final argmax per coordinate
  double fraction_near_first = 0.0;        // ||p - e_1||_1 < delta
  double fraction_near_last = 0.0;         // ||p - e_d||_1 < delta
};

PrimingOutcome priming_experiment(const IntensityVector& lambda_a, const IntensityVector& lambda_b,
                                  const WeightVector& w0, std::size_t k_star, std::size_t total_k,
                                  const PrimingParams& params);

}  // namespace simplex_stdp
