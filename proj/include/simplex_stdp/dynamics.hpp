#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "simplex_stdp/rng.hpp"
#include "simplex_stdp/simplex.hpp"

namespace simplex_stdp {

enum class NoiseKind { uniform_symmetric, custom_bounded };

// Centered noise Z with |Z| <= half_width <= Q - 1, so that |B + Z| <= Q.
class NoiseModel {
 public:
  using Sampler = std::function<double(Rng&)>;

  NoiseModel();  // uniform on [-1, 1], Q = 2
  static NoiseModel uniform(double half_width, double q_bound);
  // The sampler must produce centered draws in [-half_width, half_width];
  // draws outside the declared support are rejected at sampling time.
  static NoiseModel custom(Sampler sampler, double q_bound, double half_width);

  NoiseKind kind() const noexcept { return kind_; }
  double half_width() const noexcept { return half_width_; }
  double q_bound() const noexcept { return q_bound_; }

  double sample(Rng& rng) const;

 private:
  NoiseKind kind_ = NoiseKind::uniform_symmetric;
  double half_width_ = 1.0;
  double q_bound_ = 2.0;
  Sampler sampler_;
};

struct StepSample {
  std::size_t trigger_index = 0;  // zeta, zero-based
  Vector trigger;                 // B, one-hot
  Vector spikes;                  // S = C B in the correlated model, B otherwise
  Vector noise;                   // Z
  Vector combined;                // Y = S + Z
};

struct NoiseDecomposition {
  Vector drift;
  Vector xi;
  Vector theta;
  Vector theta_bound;
};

class CorrelationMatrix {
 public:
  CorrelationMatrix() = default;
  explicit CorrelationMatrix(Matrix entries);
  static CorrelationMatrix identity(std::size_t d);

  std::size_t dim() const noexcept { return static_cast<std::size_t>(m_.rows()); }
  const Matrix& matrix() const noexcept { return m_; }
  double operator()(std::size_t i, std::size_t j) const {
    return m_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  Vector apply(std::span<const double> p) const;
  // max off-diagonal entry
  double nu() const;
  // max absolute row sum
  double row_norm() const;

 private:
  Matrix m_;
};

// Inverse-CDF draw from M(1, p) with cumulative sums in index order.
std::size_t sample_trigger(std::span<const double> p, Rng& rng);
StepSample sample_step(std::span<const double> p, const NoiseModel& noise, Rng& rng);
void sample_step_into(std::span<const double> p, const NoiseModel& noise, Rng& rng, StepSample& out);
void sample_correlated_step_into(std::span<const double> p, const CorrelationMatrix& gamma,
                                 const NoiseModel& noise, Rng& rng, StepSample& out);

// Throws InvalidInput unless 0 < alpha < 1/Q.
void check_learning_rate(double alpha, double q_bound);

WeightVector step_weights(const WeightVector& w, double alpha, std::span<const double> y);
ProbabilityVector step_probabilities(const ProbabilityVector& p, double alpha, std::span<const double> y);

// Splits p(k+1) into p + alpha*drift - alpha*xi - theta. The drift and xi use
// the conditional mean E[Y | p], which is p itself unless given explicitly
// (Gamma p in the correlated model).
NoiseDecomposition decompose_step(const ProbabilityVector& p, double alpha, std::span<const double> y,
                                  double q_bound = 2.0);
NoiseDecomposition decompose_step(const ProbabilityVector& p, double alpha, std::span<const double> y,
                                  double q_bound, std::span<const double> conditional_mean);

std::pair<ProbabilityVector, StepSample> step_correlated(const ProbabilityVector& p,
                                                         const CorrelationMatrix& gamma, double alpha,
                                                         const NoiseModel& noise, Rng& rng);

std::pair<WeightVector, ProbabilityVector> step_inhomogeneous(const WeightVector& w,
                                                              const IntensityVector& lambda_next,
                                                              double alpha, std::span<const double> y);

enum class ModelVariant { independent, correlated, inhomogeneous };

struct IntensitySegment {
  std::size_t start = 0;  // first step k at which this lambda applies
  Vector lambda;
};

struct DynamicsConfig {
  ModelVariant variant = ModelVariant::independent;
  double alpha = 0.01;
  NoiseModel noise;
  std::optional<Vector> p0;
  std::optional<Vector> lambda;
  std::optional<Vector> w0;
  std::optional<Matrix> gamma;
  std::vector<IntensitySegment> schedule;  // inhomogeneous variant only
  std::size_t iterations = 0;
  std::size_t stride = 1;
  bool record_samples = false;
  bool record_weights = false;

  std::vector<std::string> violations() const;
  void validate() const;  // throws ConfigError listing every violation
  std::string to_json() const;  // canonical JSON text
  std::string digest() const;
};

struct TrajectoryRecord {
  std::vector<std::size_t> steps;
  std::vector<ProbabilityVector> states;
  std::vector<WeightVector> weights;
  std::vector<StepSample> samples;
  std::uint64_t seed = 0;
  std::string config_digest;
};

using StepObserver = std::function<void(std::size_t k, std::span<const double> before,
                                        const StepSample& sample, std::span<const double> after)>;

ProbabilityVector initial_state(const DynamicsConfig& config);
TrajectoryRecord run_trajectory(const DynamicsConfig& config, std::uint64_t seed,
                                const StepObserver& observer = {});
// Trajectory i uses the stream derive_seed(master_seed, i).
std::vector<TrajectoryRecord> run_ensemble(const DynamicsConfig& config, std::uint64_t master_seed,
                                           std::size_t count, std::size_t threads);

void write_trajectory_csv(const std::filesystem::path& path, const TrajectoryRecord& record);
// One CSV per trajectory plus manifest.json with seeds and config digest.
void write_ensemble(const std::filesystem::path& dir, const std::vector<TrajectoryRecord>& records,
                    const DynamicsConfig& config, std::uint64_t master_seed);

}  // namespace simplex_stdp
