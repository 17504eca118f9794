#include "simplex_stdp/multi_output.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "simplex_stdp/errors.hpp"
#include "simplex_stdp/io.hpp"
#include "simplex_stdp/rng.hpp"

namespace simplex_stdp {
namespace {

using Index = Eigen::Index;

void check_weight_matrix(const WeightMatrix& w0, std::size_t d) {
  if (static_cast<std::size_t>(w0.rows()) != d) throw InvalidInput("weight matrix: row count must equal dim(lambda)");
  if (w0.cols() == 0) throw InvalidInput("weight matrix: no output neurons");
  if (!w0.allFinite()) throw InvalidInput("weight matrix: non-finite entry");
  for (Index j = 0; j < w0.cols(); ++j) {
    if ((w0.col(j).array() < 0.0).any()) throw InvalidInput("weight matrix: negative entry in column " + std::to_string(j + 1));
    if (!(w0.col(j).maxCoeff() > 0.0)) throw InvalidInput("weight matrix: column " + std::to_string(j + 1) + " is zero");
  }
}

void probabilities_into(const Vector& lambda, const double* w, double* p) {
  const std::size_t d = lambda.size();
  double norm = 0.0;
  for (std::size_t i = 0; i < d; ++i) norm += lambda[i] * w[i];
  for (std::size_t i = 0; i < d; ++i) p[i] = lambda[i] * w[i] / norm;
}

Matrix probability_matrix(const Vector& lambda, const WeightMatrix& w) {
  Matrix p(w.rows(), w.cols());
  for (Index j = 0; j < w.cols(); ++j) probabilities_into(lambda, w.col(j).data(), p.col(j).data());
  return p;
}

void greedy_step_into(std::span<const double> p, const NoiseModel& noise, Rng& rng, StepSample& out) {
  const std::size_t d = p.size();
  out.trigger.assign(d, 0.0);
  out.noise.resize(d);
  out.combined.resize(d);
  out.trigger_index = leading_gap(p).index;
  out.trigger[out.trigger_index] = 1.0;
  out.spikes = out.trigger;
  for (std::size_t i = 0; i < d; ++i) {
    out.noise[i] = noise.sample(rng);
    out.combined[i] = out.spikes[i] + out.noise[i];
  }
}

void draw(const MultiRunConfig& config, std::span<const double> p, Rng& rng, StepSample& out) {
  if (config.trigger_rule == TriggerRule::greedy) {
    greedy_step_into(p, config.noise, rng, out);
  } else {
    sample_step_into(p, config.noise, rng, out);
  }
}

// Orthonormal basis of span{w_0, ..., w_{j-1}} by modified Gram-Schmidt,
// stored in the leading columns of q; directions already in the span are dropped.
Index span_basis(const WeightMatrix& w, Index j, Matrix& q, Eigen::VectorXd& v) {
  Index rank = 0;
  for (Index i = 0; i < j; ++i) {
    v = w.col(i);
    const double scale = v.norm();
    for (Index r = 0; r < rank; ++r) v -= q.col(r).dot(v) * q.col(r);
    const double n = v.norm();
    if (n > 1e-12 * scale) q.col(rank++) = v / n;
  }
  return rank;
}

}  // namespace

Algorithm1Result algorithm1_run(const WeightMatrix& w0, const MultiRunConfig& config) {
  const IntensityVector lambda(config.lambda);
  const std::size_t d = lambda.dim();
  check_weight_matrix(w0, d);
  const Index m = w0.cols();
  if (config.alphas.size() != static_cast<std::size_t>(m)) {
    throw InvalidInput("algorithm 1: need one learning rate per output neuron");
  }
  for (double a : config.alphas) check_learning_rate(a, config.noise.q_bound());
  if (config.record_stride == 0) throw InvalidInput("algorithm 1: record stride must be positive");

  std::vector<Rng> rngs;
  rngs.reserve(static_cast<std::size_t>(m));
  for (Index j = 0; j < m; ++j) rngs.emplace_back(derive_seed(config.seed, static_cast<std::uint64_t>(j)));

  Algorithm1Result result;
  WeightMatrix w = w0;
  WeightMatrix prev(w.rows(), w.cols());
  auto record = [&](std::size_t k) {
    result.steps.push_back(k);
    result.weights.push_back(w);
    result.probabilities.push_back(probability_matrix(config.lambda, w));
  };
  record(0);

  StepSample s;
  Vector p(d);
  Eigen::VectorXd change(static_cast<Index>(d));
  Matrix basis(static_cast<Index>(d), m);
  Eigen::VectorXd scratch(static_cast<Index>(d));
  const std::size_t n = config.iterations;
  for (std::size_t k = 0; k < n; ++k) {
    prev = w;
    for (Index j = 0; j < m; ++j) {
      const double* wj = prev.col(j).data();
      probabilities_into(config.lambda, wj, p.data());
      draw(config, p, rngs[static_cast<std::size_t>(j)], s);
      const double a = config.alphas[static_cast<std::size_t>(j)];
      for (std::size_t i = 0; i < d; ++i) change[static_cast<Index>(i)] = a * wj[i] * s.combined[i];
      if (j > 0) {
        const Index rank = span_basis(prev, j, basis, scratch);
        for (Index r = 0; r < rank; ++r) change -= basis.col(r).dot(change) * basis.col(r);
      }
      w.col(j) = prev.col(j) + change;
      for (Index i = 0; i < w.rows(); ++i) {
        if (w(i, j) < 0.0) {
          result.clips.push_back({k, static_cast<std::size_t>(j), static_cast<std::size_t>(i), w(i, j)});
          w(i, j) = 0.0;
        }
      }
      double norm = 0.0;
      for (std::size_t i = 0; i < d; ++i) norm += config.lambda[i] * w(static_cast<Index>(i), j);
      if (!(norm > 0.0) || !std::isfinite(norm)) {
        throw PreconditionError("algorithm 1: weights of output neuron " + std::to_string(j + 1) +
                                " degenerated at iteration " + std::to_string(k + 1));
      }
    }
    if ((k + 1) % config.record_stride == 0 || k + 1 == n) record(k + 1);
  }
  return result;
}

double algorithm2_gap(const IntensityVector& lambda, const WeightMatrix& w0) {
  const std::size_t d = lambda.dim();
  check_weight_matrix(w0, d);
  if (static_cast<std::size_t>(w0.cols()) != d) throw InvalidInput("algorithm 2: weight matrix must be square");
  double gap = 1.0;
  for (std::size_t j = 0; j + 1 < d; ++j) {
    Vector w(d, 0.0);
    double norm = 0.0;
    for (std::size_t i = j; i < d; ++i) {
      w[i] = w0(static_cast<Index>(i), static_cast<Index>(j));
      norm += lambda[i] * w[i];
    }
    if (!(norm > 0.0)) return 0.0;
    double rest = 0.0;
    for (std::size_t i = j + 1; i < d; ++i) rest = std::max(rest, lambda[i] * w[i]);
    gap = std::min(gap, (lambda[j] * w[j] - rest) / norm);
  }
  return gap;
}

Algorithm2Result algorithm2_run(const WeightMatrix& w0, const MultiRunConfig& config, const Algorithm2Params& params) {
  const IntensityVector lambda(config.lambda);
  const std::size_t d = lambda.dim();
  check_weight_matrix(w0, d);
  if (static_cast<std::size_t>(w0.cols()) != d) throw InvalidInput("algorithm 2: weight matrix must be square");
  if (config.alphas.size() != 1) throw InvalidInput("algorithm 2: expects a single learning rate");
  const double alpha = config.alphas.front();
  check_learning_rate(alpha, config.noise.q_bound());
  for (std::size_t i = 0; i + 1 < d; ++i) {
    if (!(lambda[i] > lambda[i + 1])) throw PreconditionError("algorithm 2: intensities must be strictly decreasing");
  }

  Algorithm2Result result;
  result.gap = algorithm2_gap(lambda, w0);
  if (d > 1 && !(result.gap > 0.0)) throw PreconditionError("algorithm 2: minimal gap must be positive");
  result.iterations = config.iterations;
  if (result.iterations == 0 && d > 1) {
    const auto [lo, hi] = std::minmax_element(config.lambda.begin(), config.lambda.end());
    result.iterations = thm_multi_iterations(*lo / *hi, params.delta, params.epsilon, alpha, result.gap, d);
  }

  const Index n = static_cast<Index>(d);
  result.projections = Matrix::Zero(n, n);
  result.fixed_weights = WeightMatrix::Zero(n, n);
  result.final_weights = WeightMatrix::Zero(n, n);
  result.final_probabilities = Matrix::Zero(n, n);

  StepSample s;
  Vector p(d);
  for (Index j = 0; j < n; ++j) {
    Eigen::VectorXd wj = w0.col(j);
    for (Index i = 0; i < j; ++i) {
      const Eigen::VectorXd unit = result.fixed_weights.col(i) / result.fixed_weights.col(i).stableNorm();
      wj -= wj.dot(unit) * unit;
    }
    // Deflation against axis vectors is exact; this only removes signed zeros and rounding.
    for (Index i = 0; i < n; ++i) wj[i] = std::max(wj[i], 0.0);
    if (!(wj.maxCoeff() > 0.0)) {
      throw PreconditionError("algorithm 2: deflated weights of output neuron " + std::to_string(j + 1) + " vanish");
    }

    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(j)));
    for (std::size_t k = 0; k < result.iterations; ++k) {
      probabilities_into(config.lambda, wj.data(), p.data());
      draw(config, p, rng, s);
      double wmax = 0.0;
      for (Index i = 0; i < n; ++i) {
        wj[i] *= 1.0 + alpha * s.combined[static_cast<std::size_t>(i)];
        wmax = std::max(wmax, wj[i]);
      }
      // p, the deflation and the projected p* are scale invariant.
      if (wmax > 1e100) wj /= wmax;
    }

    result.final_weights.col(j) = wj;
    probabilities_into(config.lambda, wj.data(), result.final_probabilities.col(j).data());
    const Vector star = cosine_projection(std::span<const double>(wj.data(), d));
    for (Index i = 0; i < n; ++i) result.fixed_weights(i, j) = star[static_cast<std::size_t>(i)];
    probabilities_into(config.lambda, star.data(), result.projections.col(j).data());
  }
  result.success = result.projections.isIdentity(0.0);
  return result;
}

Vector cosine_projection(std::span<const double> w) {
  if (w.empty()) throw InvalidInput("cosine projection: empty vector");
  const double norm = std::sqrt(sum_squares(w));
  if (!(norm > 0.0)) throw InvalidInput("cosine projection: zero vector");
  const auto top = std::max_element(w.begin(), w.end());
  Vector out(w.size(), 0.0);
  out[static_cast<std::size_t>(top - w.begin())] = norm;
  return out;
}

double frobenius_half_error(const Matrix& p) {
  if (p.rows() != p.cols()) throw InvalidInput("frobenius error: matrix must be square");
  return 0.5 * (p - Matrix::Identity(p.rows(), p.cols())).squaredNorm();
}

std::size_t thm_multi_iterations(double kappa, double delta, double epsilon, double alpha, double gap, std::size_t d) {
  if (!(kappa > 0.0 && kappa <= 1.0)) throw InvalidInput("multi-neuron iterations: kappa must lie in (0, 1]");
  if (!(delta > 0.0)) throw InvalidInput("multi-neuron iterations: delta must be positive");
  if (!(delta < kappa / (1.0 + kappa))) {
    throw PreconditionError("multi-neuron iterations: delta < kappa/(1+kappa) violated");
  }
  if (!(epsilon > 0.0)) throw InvalidInput("multi-neuron iterations: epsilon must be positive");
  if (!(alpha > 0.0)) throw InvalidInput("multi-neuron iterations: alpha must be positive");
  if (!(gap > 0.0)) throw PreconditionError("multi-neuron iterations: minimal gap must be positive");
  if (d == 0) throw InvalidInput("multi-neuron iterations: d must be positive");
  const double dd = static_cast<double>(d);
  const double k = 16.0 * dd / (alpha * gap * (4.0 + dd * gap)) * std::log(4.0 / (epsilon * delta));
  return k <= 0.0 ? 0 : static_cast<std::size_t>(std::ceil(k));
}

void write_multi_run_csv(const std::filesystem::path& path, const Algorithm1Result& result) {
  if (result.probabilities.empty()) throw InvalidInput("multi-neuron export: empty result");
  const std::size_t d = static_cast<std::size_t>(result.probabilities.front().rows());
  std::vector<std::string> header{"k", "j"};
  for (std::size_t i = 1; i <= d; ++i) header.push_back("p_j" + std::to_string(i));
  CsvWriter csv(path, header);
  for (std::size_t r = 0; r < result.probabilities.size(); ++r) {
    const Matrix& p = result.probabilities[r];
    for (Index j = 0; j < p.cols(); ++j) {
      csv.cell(result.steps[r]).cell(static_cast<std::size_t>(j + 1));
      csv.cells(std::span<const double>(p.col(j).data(), d));
      csv.end_row();
    }
  }
  csv.close();
}

}  // namespace simplex_stdp
