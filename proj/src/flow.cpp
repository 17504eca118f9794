#include "simplex_stdp/flow.hpp"

#include <cmath>
#include <numeric>

#include "simplex_stdp/errors.hpp"
#include "simplex_stdp/io.hpp"

namespace simplex_stdp {

std::vector<std::string> FlowSpec::violations() const {
  std::vector<std::string> out;
  if (!(dt > 0.0) || !std::isfinite(dt)) out.push_back("dt: must be positive");
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) out.push_back("horizon: must be nonnegative");
  if (record_stride == 0) out.push_back("record_stride: must be at least 1");
  try {
    ProbabilityVector tmp(p0);
  } catch (const std::exception& e) {
    out.push_back(std::string("p0: ") + e.what());
  }
  if (fitness == FitnessKind::correlated) {
    if (!gamma) {
      out.push_back("gamma: required for correlated fitness");
    } else if (gamma->dim() != p0.size()) {
      out.push_back("gamma: dimension mismatch");
    }
  }
  if (fitness == FitnessKind::inhomogeneous && !log_intensity_derivative) {
    out.push_back("log_intensity_derivative: required for inhomogeneous fitness");
  }
  return out;
}

void FlowSpec::validate() const {
  auto v = violations();
  if (!v.empty()) throw ConfigError(std::move(v));
}

Vector inhomogeneous_rhs(std::span<const double> p, std::span<const double> dloglambda) {
  if (p.size() != dloglambda.size()) throw InvalidInput("inhomogeneous_rhs: dimension mismatch");
  Vector f(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) f[i] = dloglambda[i] + p[i];
  return replicator_field(p, f);
}

Vector correlated_rhs(std::span<const double> p, const CorrelationMatrix& gamma) {
  return replicator_field(p, gamma.apply(p));
}

LogIntensityDerivative piecewise_constant_log_derivative(std::size_t d) {
  return [d](double) { return Vector(d, 0.0); };
}

namespace {

Vector rhs(const FlowSpec& spec, double t, std::span<const double> p) {
  switch (spec.fitness) {
    case FitnessKind::self:
      return replicator_field(p, p);
    case FitnessKind::correlated:
      return correlated_rhs(p, *spec.gamma);
    case FitnessKind::inhomogeneous: {
      const Vector g = spec.log_intensity_derivative(t);
      return inhomogeneous_rhs(p, g);
    }
  }
  return {};
}

}  // namespace

FlowTrajectory integrate(const FlowSpec& spec) {
  spec.validate();
  const std::size_t d = spec.p0.size();
  Vector p = ProbabilityVector(spec.p0).values();
  const auto n = static_cast<std::size_t>(std::ceil(spec.horizon / spec.dt - 1e-9));

  FlowTrajectory out;
  out.steps = n;
  auto record = [&](double t, double corr) {
    out.times.push_back(t);
    out.states.push_back(p);
    out.renorm_corrections.push_back(corr);
    out.sum_squares.push_back(sum_squares(p));
  };
  record(0.0, 0.0);

  Vector tmp(d);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * spec.dt;
    const double t_next = (k + 1 == n) ? spec.horizon : static_cast<double>(k + 1) * spec.dt;
    const double h = t_next - t;

    const Vector k1 = rhs(spec, t, p);
    for (std::size_t i = 0; i < d; ++i) tmp[i] = p[i] + 0.5 * h * k1[i];
    const Vector k2 = rhs(spec, t + 0.5 * h, tmp);
    for (std::size_t i = 0; i < d; ++i) tmp[i] = p[i] + 0.5 * h * k2[i];
    const Vector k3 = rhs(spec, t + 0.5 * h, tmp);
    for (std::size_t i = 0; i < d; ++i) tmp[i] = p[i] + h * k3[i];
    const Vector k4 = rhs(spec, t + h, tmp);
    for (std::size_t i = 0; i < d; ++i) p[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);

    const double s = std::accumulate(p.begin(), p.end(), 0.0);
    const double corr = std::abs(s - 1.0);
    for (double& x : p) x /= s;
    out.max_renorm_correction = std::max(out.max_renorm_correction, corr);
    for (double x : p) {
      if (!(x >= -1e-9 && x <= 1.0 + 1e-9)) {
        throw IntegrationError("flow left the simplex at t=" + format_double(t_next) +
                               " with dt=" + format_double(spec.dt) + "; reduce the step size");
      }
    }
    if ((k + 1) % spec.record_stride == 0 || k + 1 == n) record(t_next, corr);
  }
  return out;
}

double exact_d2(double p1_initial, double t) {
  if (!(p1_initial > 0.5 && p1_initial < 1.0)) {
    throw InvalidInput("exact_d2: p1_initial must lie in (1/2, 1); use p_2 = 1 - p_1 for the mirrored case");
  }
  if (!(t >= 0.0)) throw InvalidInput("exact_d2: t must be nonnegative");
  const double a = 2.0 * p1_initial - 1.0;
  const double c = 1.0 / (a * a) - 1.0;
  return 0.5 + 0.5 / std::sqrt(c * std::exp(-t) + 1.0);
}

double flow_rate(std::span<const double> p0) {
  const LeadingGap g = leading_gap(p0);
  if (!(g.gap > 0.0)) throw PreconditionError("flow bound: the leading coordinate must be unique");
  const auto d = static_cast<double>(p0.size());
  return g.gap / d * (1.0 + (d - 1.0) * g.gap);
}

double flow_bound(std::span<const double> p0, double t) {
  const double rate = flow_rate(p0);
  const LeadingGap g = leading_gap(p0);
  return 2.0 * (1.0 - p0[g.index]) * std::exp(-rate * t);
}

void write_flow_csv(const std::filesystem::path& path, const FlowTrajectory& traj) {
  const std::size_t d = traj.states.empty() ? 0 : traj.states.front().size();
  std::vector<std::string> header{"t"};
  for (auto& h : indexed_header("p", d)) header.push_back(h);
  CsvWriter csv(path, header);
  for (std::size_t r = 0; r < traj.states.size(); ++r) {
    csv.cell(traj.times[r]).cells(traj.states[r]);
    csv.end_row();
  }
  csv.close();
}

void write_flow_diagnostics_csv(const std::filesystem::path& path, const FlowTrajectory& traj) {
  CsvWriter csv(path, {"t", "renorm_correction", "sum_squares"});
  for (std::size_t r = 0; r < traj.states.size(); ++r) {
    csv.cell(traj.times[r]).cell(traj.renorm_corrections[r]).cell(traj.sum_squares[r]);
    csv.end_row();
  }
  csv.close();
}

}  // namespace simplex_stdp
