#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "simplex_stdp/dynamics.hpp"
#include "simplex_stdp/simplex.hpp"

namespace simplex_stdp {

enum class FitnessKind { self, correlated, inhomogeneous };

// t -> d/dt log(lambda(t)), componentwise
using LogIntensityDerivative = std::function<Vector(double)>;

struct FlowSpec {
  FitnessKind fitness = FitnessKind::self;
  std::optional<CorrelationMatrix> gamma;
  LogIntensityDerivative log_intensity_derivative;
  Vector p0;
  double horizon = 10.0;
  double dt = 1e-3;
  std::size_t record_stride = 1;

  std::vector<std::string> violations() const;
  void validate() const;
};

struct FlowTrajectory {
  std::vector<double> times;
  std::vector<Vector> states;
  // |sum - 1| removed by the renormalization of the step ending at times[r]
  std::vector<double> renorm_corrections;
  std::vector<double> sum_squares;
  double max_renorm_correction = 0.0;
  std::size_t steps = 0;
};

// Classical RK4 with fixed step; the state is divided by its sum after
// every step. Throws IntegrationError if a coordinate leaves [-1e-9, 1+1e-9].
FlowTrajectory integrate(const FlowSpec& spec);

// Closed-form p_1(t) of the d = 2 flow, for p1_initial in (1/2, 1).
double exact_d2(double p1_initial, double t);

// Exponential rate (Delta/d)(1 + (d-1)Delta) of the flow bound, where Delta is
// the margin of the leading coordinate.
double flow_rate(std::span<const double> p0);
// 2(1 - p_lead(0)) exp(-rate t), bounding the L1 distance to the leading vertex.
double flow_bound(std::span<const double> p0, double t);

Vector inhomogeneous_rhs(std::span<const double> p, std::span<const double> dloglambda);
Vector correlated_rhs(std::span<const double> p, const CorrelationMatrix& gamma);

// Piecewise-constant intensities have zero log-derivative inside segments.
LogIntensityDerivative piecewise_constant_log_derivative(std::size_t d);

void write_flow_csv(const std::filesystem::path& path, const FlowTrajectory& traj);
void write_flow_diagnostics_csv(const std::filesystem::path& path, const FlowTrajectory& traj);

}  // namespace simplex_stdp
