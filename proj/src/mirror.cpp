#include "simplex_stdp/mirror.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "simplex_stdp/errors.hpp"
#include "simplex_stdp/io.hpp"

namespace simplex_stdp {

ProbabilityVector entropic_step(const ProbabilityVector& p, double alpha, std::span<const double> grad) {
  if (grad.size() != p.dim()) throw InvalidInput("entropic step: gradient dimension mismatch");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidInput("entropic step: alpha must be positive");
  // Shift by the smallest gradient entry on the support so every exponent is <= 0.
  double shift = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < p.dim(); ++i) {
    if (!std::isfinite(grad[i])) throw InvalidInput("entropic step: non-finite gradient");
    if (p[i] > 0.0) shift = std::min(shift, grad[i]);
  }
  Vector out(p.dim(), 0.0);
  double norm = 0.0;
  for (std::size_t i = 0; i < p.dim(); ++i) {
    if (p[i] > 0.0) out[i] = p[i] * std::exp(-alpha * (grad[i] - shift));
    norm += out[i];
  }
  for (double& x : out) x /= norm;
  return ProbabilityVector(std::move(out));
}

ProbabilityVector multiplicative_step(const ProbabilityVector& p, double alpha) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw InvalidInput("multiplicative step: alpha must be >= 0");
  Vector out(p.dim());
  double norm = 0.0;
  for (std::size_t i = 0; i < p.dim(); ++i) {
    out[i] = p[i] * (1.0 + alpha * p[i]);
    norm += out[i];
  }
  for (double& x : out) x /= norm;
  return ProbabilityVector(std::move(out));
}

std::vector<MirrorStepReport> order_comparison(const ProbabilityVector& p, std::span<const double> alphas) {
  Vector grad(p.values());
  for (double& g : grad) g = -g;
  std::vector<MirrorStepReport> out;
  out.reserve(alphas.size());
  for (double a : alphas) {
    MirrorStepReport r;
    r.alpha = a;
    r.entropic_result = entropic_step(p, a, grad);
    r.multiplicative_result = multiplicative_step(p, a);
    for (std::size_t i = 0; i < p.dim(); ++i) {
      r.sup_difference = std::max(r.sup_difference, std::abs(r.entropic_result[i] - r.multiplicative_result[i]));
    }
    out.push_back(std::move(r));
  }
  return out;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw InvalidInput("kl divergence: dimension mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (!(q[i] > 0.0)) throw InvalidInput("kl divergence: p is not absolutely continuous with respect to q");
    kl += p[i] * std::log(p[i] / q[i]);
  }
  return kl;
}

void write_mirror_csv(const std::filesystem::path& path, const std::vector<MirrorStepReport>& reports) {
  CsvWriter csv(path, {"alpha", "sup_difference"});
  for (const auto& r : reports) {
    csv.cell(r.alpha).cell(r.sup_difference);
    csv.end_row();
  }
  csv.close();
}

}  // namespace simplex_stdp
