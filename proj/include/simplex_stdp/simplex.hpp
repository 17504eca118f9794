#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace simplex_stdp {

using Vector = std::vector<double>;
using Matrix = Eigen::MatrixXd;

inline constexpr double kSimplexSumTolerance = 1e-12;
inline constexpr double kSimplexRenormalizeLimit = 1e-9;

// Point on the probability simplex. Construction accepts sums within 1e-12
// of one as is, silently renormalizes up to 1e-9 and rejects beyond that.
class ProbabilityVector {
 public:
  ProbabilityVector() = default;
  explicit ProbabilityVector(Vector entries);

  static ProbabilityVector uniform(std::size_t d);
  static ProbabilityVector vertex(std::size_t d, std::size_t i);

  std::size_t dim() const noexcept { return v_.size(); }
  double operator[](std::size_t i) const { return v_[i]; }
  const Vector& values() const noexcept { return v_; }
  operator std::span<const double>() const noexcept { return v_; }
  auto begin() const noexcept { return v_.begin(); }
  auto end() const noexcept { return v_.end(); }

  friend bool operator==(const ProbabilityVector&, const ProbabilityVector&) = default;

 private:
  Vector v_;
};

class WeightVector {
 public:
  WeightVector() = default;
  explicit WeightVector(Vector entries);

  std::size_t dim() const noexcept { return v_.size(); }
  double operator[](std::size_t i) const { return v_[i]; }
  const Vector& values() const noexcept { return v_; }
  operator std::span<const double>() const noexcept { return v_; }

  friend bool operator==(const WeightVector&, const WeightVector&) = default;

 private:
  Vector v_;
};

class IntensityVector {
 public:
  IntensityVector() = default;
  explicit IntensityVector(Vector entries);

  std::size_t dim() const noexcept { return v_.size(); }
  double operator[](std::size_t i) const { return v_[i]; }
  const Vector& values() const noexcept { return v_; }
  operator std::span<const double>() const noexcept { return v_; }

  friend bool operator==(const IntensityVector&, const IntensityVector&) = default;

 private:
  Vector v_;
};

enum class CriticalKind { minimum, saddle };

struct CriticalPoint {
  std::vector<std::size_t> support;  // zero-based, ascending
  ProbabilityVector point;
  CriticalKind kind = CriticalKind::saddle;
  // Barycenter of the full simplex: a maximum of the loss restricted to the
  // simplex even though its Hessian in R^d is indefinite.
  bool simplex_maximum = false;
};

double dot(std::span<const double> a, std::span<const double> b);
double sum_squares(std::span<const double> a);
double l1_distance_to_vertex(std::span<const double> p, std::size_t i);

// Index of the largest entry and its margin over the runner-up.
struct LeadingGap {
  std::size_t index = 0;
  double gap = 0.0;
};
LeadingGap leading_gap(std::span<const double> p);
// p_0 - max_{i>0} p_i, the gap of the designated first coordinate.
double first_coordinate_gap(std::span<const double> p);

ProbabilityVector probabilities_from_weights(const IntensityVector& lambda, const WeightVector& w);

// The cubic-quartic loss and its derivatives accept arbitrary real vectors.
double loss(std::span<const double> p);
Vector loss_gradient(std::span<const double> p);
Matrix loss_hessian(std::span<const double> p);

std::vector<CriticalPoint> critical_points(std::size_t d);

Vector replicator_field(std::span<const double> p, std::span<const double> fitness);

}  // namespace simplex_stdp
