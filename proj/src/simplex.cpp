#include "simplex_stdp/simplex.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "simplex_stdp/errors.hpp"

namespace simplex_stdp {

namespace {

void require_finite(const Vector& v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw InvalidInput(std::string(what) + ": non-finite entry");
  }
}

void require_same_dim(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw InvalidInput(std::string(what) + ": dimension mismatch (" + std::to_string(a) + " vs " +
                       std::to_string(b) + ")");
  }
}

}  // namespace

ProbabilityVector::ProbabilityVector(Vector entries) : v_(std::move(entries)) {
  if (v_.empty()) throw InvalidInput("probability vector: empty");
  require_finite(v_, "probability vector");
  for (double x : v_) {
    if (x < 0.0) throw InvalidInput("probability vector: negative entry");
  }
  const double s = std::accumulate(v_.begin(), v_.end(), 0.0);
  const double dev = std::abs(s - 1.0);
  if (dev <= kSimplexSumTolerance) return;
  if (dev > kSimplexRenormalizeLimit) {
    throw InvalidInput("probability vector: entries sum to " + std::to_string(s));
  }
  for (double& x : v_) x /= s;
}

ProbabilityVector ProbabilityVector::uniform(std::size_t d) {
  if (d == 0) throw InvalidInput("uniform: d must be positive");
  return ProbabilityVector(Vector(d, 1.0 / static_cast<double>(d)));
}

ProbabilityVector ProbabilityVector::vertex(std::size_t d, std::size_t i) {
  if (i >= d) throw InvalidInput("vertex: index out of range");
  Vector v(d, 0.0);
  v[i] = 1.0;
  return ProbabilityVector(std::move(v));
}

WeightVector::WeightVector(Vector entries) : v_(std::move(entries)) {
  if (v_.empty()) throw InvalidInput("weight vector: empty");
  require_finite(v_, "weight vector");
  bool positive = false;
  for (double x : v_) {
    if (x < 0.0) throw InvalidInput("weight vector: negative entry");
    positive = positive || x > 0.0;
  }
  if (!positive) throw InvalidInput("weight vector: all entries zero");
}

IntensityVector::IntensityVector(Vector entries) : v_(std::move(entries)) {
  if (v_.empty()) throw InvalidInput("intensity vector: empty");
  require_finite(v_, "intensity vector");
  for (double x : v_) {
    if (!(x > 0.0)) throw InvalidInput("intensity vector: entries must be strictly positive");
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  require_same_dim(a.size(), b.size(), "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double sum_squares(std::span<const double> a) { return dot(a, a); }

double l1_distance_to_vertex(std::span<const double> p, std::size_t i) {
  double s = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) s += std::abs(p[j] - (j == i ? 1.0 : 0.0));
  return s;
}

LeadingGap leading_gap(std::span<const double> p) {
  if (p.size() < 2) throw InvalidInput("leading gap: needs d >= 2");
  LeadingGap g;
  for (std::size_t i = 1; i < p.size(); ++i) {
    if (p[i] > p[g.index]) g.index = i;
  }
  double runner_up = -1.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i != g.index && p[i] > runner_up) runner_up = p[i];
  }
  g.gap = p[g.index] - runner_up;
  return g;
}

double first_coordinate_gap(std::span<const double> p) {
  if (p.size() < 2) throw InvalidInput("gap: needs d >= 2");
  double runner_up = p[1];
  for (std::size_t i = 2; i < p.size(); ++i) runner_up = std::max(runner_up, p[i]);
  return p[0] - runner_up;
}

ProbabilityVector probabilities_from_weights(const IntensityVector& lambda, const WeightVector& w) {
  require_same_dim(lambda.dim(), w.dim(), "probabilities_from_weights");
  const double norm = dot(lambda, w);
  if (!(norm > 0.0)) throw InvalidInput("probabilities_from_weights: lambda^T w must be positive");
  Vector p(w.dim());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = lambda[i] * w[i] / norm;
  return ProbabilityVector(std::move(p));
}

double loss(std::span<const double> p) {
  double cubes = 0.0;
  double squares = 0.0;
  for (double x : p) {
    cubes += x * x * x;
    squares += x * x;
  }
  return -cubes / 3.0 + 0.25 * squares * squares;
}

Vector loss_gradient(std::span<const double> p) {
  const double s = sum_squares(p);
  Vector g(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) g[i] = -p[i] * (p[i] - s);
  return g;
}

Matrix loss_hessian(std::span<const double> p) {
  const auto d = static_cast<Eigen::Index>(p.size());
  Eigen::Map<const Eigen::VectorXd> v(p.data(), d);
  Matrix h = 2.0 * v * v.transpose();
  h.diagonal().array() += v.squaredNorm();
  h.diagonal() -= 2.0 * v;
  return h;
}

namespace {

void enumerate_subsets(std::size_t d, std::size_t start, std::vector<std::size_t>& current,
                       std::vector<std::vector<std::size_t>>& out) {
  for (std::size_t i = start; i < d; ++i) {
    current.push_back(i);
    out.push_back(current);
    enumerate_subsets(d, i + 1, current, out);
    current.pop_back();
  }
}

}  // namespace

std::vector<CriticalPoint> critical_points(std::size_t d) {
  if (d == 0) throw InvalidInput("critical_points: d must be positive");
  std::vector<std::vector<std::size_t>> subsets;
  std::vector<std::size_t> current;
  enumerate_subsets(d, 0, current, subsets);

  std::vector<CriticalPoint> out;
  out.reserve(subsets.size());
  for (auto& s : subsets) {
    Vector v(d, 0.0);
    for (std::size_t i : s) v[i] = 1.0 / static_cast<double>(s.size());
    CriticalPoint cp;
    cp.point = ProbabilityVector(std::move(v));
    Eigen::SelfAdjointEigenSolver<Matrix> eig(loss_hessian(cp.point), Eigen::EigenvaluesOnly);
    cp.kind = eig.eigenvalues().minCoeff() > 0.0 ? CriticalKind::minimum : CriticalKind::saddle;
    cp.simplex_maximum = d >= 2 && s.size() == d;
    cp.support = std::move(s);
    out.push_back(std::move(cp));
  }
  return out;
}

Vector replicator_field(std::span<const double> p, std::span<const double> fitness) {
  const double mean = dot(p, fitness);
  Vector out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i] * (fitness[i] - mean);
  return out;
}

}  // namespace simplex_stdp
