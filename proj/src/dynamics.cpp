#include "simplex_stdp/dynamics.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <json.hpp>

#include "simplex_stdp/ensemble.hpp"
#include "simplex_stdp/errors.hpp"
#include "simplex_stdp/io.hpp"

namespace simplex_stdp {

using nlohmann::json;

NoiseModel::NoiseModel() = default;

NoiseModel NoiseModel::uniform(double half_width, double q_bound) {
  if (!(q_bound > 1.0) || !std::isfinite(q_bound)) throw InvalidInput("noise model: Q must exceed 1");
  if (!(half_width > 0.0) || half_width > q_bound - 1.0) {
    throw InvalidInput("noise model: half width must lie in (0, Q-1]");
  }
  NoiseModel m;
  m.kind_ = NoiseKind::uniform_symmetric;
  m.half_width_ = half_width;
  m.q_bound_ = q_bound;
  return m;
}

NoiseModel NoiseModel::custom(Sampler sampler, double q_bound, double half_width) {
  if (!sampler) throw InvalidInput("noise model: custom sampler missing");
  if (!(q_bound > 1.0) || !std::isfinite(q_bound)) throw InvalidInput("noise model: Q must exceed 1");
  if (!(half_width >= 0.0) || half_width > q_bound - 1.0) {
    throw InvalidInput("noise model: half width must lie in [0, Q-1]");
  }
  NoiseModel m;
  m.kind_ = NoiseKind::custom_bounded;
  m.half_width_ = half_width;
  m.q_bound_ = q_bound;
  m.sampler_ = std::move(sampler);
  return m;
}

double NoiseModel::sample(Rng& rng) const {
  if (kind_ == NoiseKind::uniform_symmetric) return rng.uniform(-half_width_, half_width_);
  const double z = sampler_(rng);
  if (!(std::abs(z) <= half_width_)) throw InvalidInput("noise model: custom draw outside declared support");
  return z;
}

CorrelationMatrix::CorrelationMatrix(Matrix entries) : m_(std::move(entries)) {
  if (m_.rows() == 0 || m_.rows() != m_.cols()) throw InvalidInput("correlation matrix: must be square and nonempty");
  if (!m_.allFinite()) throw InvalidInput("correlation matrix: non-finite entry");
  const Eigen::Index d = m_.rows();
  for (Eigen::Index i = 0; i < d; ++i) {
    if (std::abs(m_(i, i) - 1.0) > 1e-12) throw InvalidInput("correlation matrix: diagonal must be 1");
    m_(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < d; ++j) {
      if (std::abs(m_(i, j) - m_(j, i)) > 1e-12) throw InvalidInput("correlation matrix: not symmetric");
      if (m_(i, j) < 0.0 || m_(i, j) >= 1.0) {
        throw InvalidInput("correlation matrix: off-diagonal entries must lie in [0, 1)");
      }
      m_(j, i) = m_(i, j);
    }
  }
}

CorrelationMatrix CorrelationMatrix::identity(std::size_t d) {
  const auto n = static_cast<Eigen::Index>(d);
  return CorrelationMatrix(Matrix::Identity(n, n));
}

Vector CorrelationMatrix::apply(std::span<const double> p) const {
  if (p.size() != dim()) throw InvalidInput("correlation matrix: dimension mismatch");
  Vector out(p.size(), 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) s += (*this)(i, j) * p[j];
    out[i] = s;
  }
  return out;
}

double CorrelationMatrix::nu() const {
  double v = 0.0;
  for (Eigen::Index i = 0; i < m_.rows(); ++i) {
    for (Eigen::Index j = 0; j < m_.cols(); ++j) {
      if (i != j) v = std::max(v, m_(i, j));
    }
  }
  return v;
}

double CorrelationMatrix::row_norm() const { return m_.cwiseAbs().rowwise().sum().maxCoeff(); }

std::size_t sample_trigger(std::span<const double> p, Rng& rng) {
  const double u = rng.uniform();
  double c = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    c += p[i];
    if (u < c && p[i] > 0.0) return i;
  }
  // Rounding left the cumulative sum just below u: take the last atom.
  for (std::size_t i = p.size(); i-- > 0;) {
    if (p[i] > 0.0) return i;
  }
  throw InvalidInput("sample_trigger: no positive entry");
}

void sample_step_into(std::span<const double> p, const NoiseModel& noise, Rng& rng, StepSample& out) {
  const std::size_t d = p.size();
  out.trigger.assign(d, 0.0);
  out.noise.resize(d);
  out.combined.resize(d);
  out.trigger_index = sample_trigger(p, rng);
  out.trigger[out.trigger_index] = 1.0;
  out.spikes = out.trigger;
  for (std::size_t i = 0; i < d; ++i) {
    out.noise[i] = noise.sample(rng);
    out.combined[i] = out.spikes[i] + out.noise[i];
  }
}

StepSample sample_step(std::span<const double> p, const NoiseModel& noise, Rng& rng) {
  StepSample s;
  sample_step_into(p, noise, rng, s);
  return s;
}

void sample_correlated_step_into(std::span<const double> p, const CorrelationMatrix& gamma,
                                 const NoiseModel& noise, Rng& rng, StepSample& out) {
  const std::size_t d = p.size();
  if (gamma.dim() != d) throw InvalidInput("correlated step: dimension mismatch");
  out.trigger.assign(d, 0.0);
  out.spikes.assign(d, 0.0);
  out.noise.resize(d);
  out.combined.resize(d);
  const std::size_t z = sample_trigger(p, rng);
  out.trigger_index = z;
  out.trigger[z] = 1.0;
  // S = C B is the zeta-th column of C; the other columns never enter the
  // update, so only that column is drawn.
  for (std::size_t i = 0; i < d; ++i) {
    out.spikes[i] = (i == z) ? 1.0 : (rng.bernoulli(gamma(i, z)) ? 1.0 : 0.0);
  }
  for (std::size_t i = 0; i < d; ++i) {
    out.noise[i] = noise.sample(rng);
    out.combined[i] = out.spikes[i] + out.noise[i];
  }
}

void check_learning_rate(double alpha, double q_bound) {
  if (!(alpha > 0.0) || !(alpha < 1.0 / q_bound)) {
    throw InvalidInput("learning rate must satisfy 0 < alpha < 1/Q (alpha=" + format_double(alpha) +
                       ", Q=" + format_double(q_bound) + ")");
  }
}

namespace {

void check_factors(std::size_t d, double alpha, std::span<const double> y) {
  if (y.size() != d) throw InvalidInput("step: dimension mismatch");
  if (!(alpha > 0.0)) throw InvalidInput("step: alpha must be positive");
  for (double v : y) {
    if (!(1.0 + alpha * v > 0.0)) throw InvalidInput("step: multiplicative factor 1 + alpha*Y is not positive");
  }
}

void multiplicative_update(Vector& p, double alpha, std::span<const double> y) {
  double denom = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] *= 1.0 + alpha * y[i];
    denom += p[i];
  }
  for (double& x : p) x /= denom;
}

}  // namespace

WeightVector step_weights(const WeightVector& w, double alpha, std::span<const double> y) {
  check_factors(w.dim(), alpha, y);
  Vector out = w.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= 1.0 + alpha * y[i];
  return WeightVector(std::move(out));
}

ProbabilityVector step_probabilities(const ProbabilityVector& p, double alpha, std::span<const double> y) {
  check_factors(p.dim(), alpha, y);
  Vector out = p.values();
  multiplicative_update(out, alpha, y);
  return ProbabilityVector(std::move(out));
}

NoiseDecomposition decompose_step(const ProbabilityVector& p, double alpha, std::span<const double> y,
                                  double q_bound) {
  return decompose_step(p, alpha, y, q_bound, p.values());
}

NoiseDecomposition decompose_step(const ProbabilityVector& p, double alpha, std::span<const double> y,
                                  double q_bound, std::span<const double> conditional_mean) {
  check_learning_rate(alpha, q_bound);
  const std::size_t d = p.dim();
  if (conditional_mean.size() != d) throw InvalidInput("decompose_step: dimension mismatch");
  const ProbabilityVector next = step_probabilities(p, alpha, y);
  const double pm = dot(p, conditional_mean);
  const double py = dot(p, y);
  const double c = alpha * alpha * 2.0 * q_bound * q_bound / std::pow(1.0 - q_bound * alpha, 3);

  NoiseDecomposition out;
  out.drift.resize(d);
  out.xi.resize(d);
  out.theta.resize(d);
  out.theta_bound.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    out.drift[i] = p[i] * (conditional_mean[i] - pm);
    out.xi[i] = p[i] * ((conditional_mean[i] - pm) - (y[i] - py));
    out.theta[i] = p[i] + alpha * out.drift[i] - alpha * out.xi[i] - next[i];
    out.theta_bound[i] = c * p[i] * (1.0 - p[i]);
  }
  return out;
}

std::pair<ProbabilityVector, StepSample> step_correlated(const ProbabilityVector& p,
                                                         const CorrelationMatrix& gamma, double alpha,
                                                         const NoiseModel& noise, Rng& rng) {
  check_learning_rate(alpha, noise.q_bound());
  StepSample s;
  sample_correlated_step_into(p, gamma, noise, rng, s);
  ProbabilityVector next = step_probabilities(p, alpha, s.combined);
  return {std::move(next), std::move(s)};
}

std::pair<WeightVector, ProbabilityVector> step_inhomogeneous(const WeightVector& w,
                                                              const IntensityVector& lambda_next,
                                                              double alpha, std::span<const double> y) {
  WeightVector next = step_weights(w, alpha, y);
  ProbabilityVector p = probabilities_from_weights(lambda_next, next);
  return {std::move(next), std::move(p)};
}

namespace {

const char* variant_name(ModelVariant v) {
  switch (v) {
    case ModelVariant::independent:
      return "independent";
    case ModelVariant::correlated:
      return "correlated";
    case ModelVariant::inhomogeneous:
      return "inhomogeneous";
  }
  return "unknown";
}

template <class F>
void collect(std::vector<std::string>& out, const std::string& label, F&& check) {
  try {
    check();
  } catch (const std::exception& e) {
    out.push_back(label + ": " + e.what());
  }
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

std::vector<std::string> DynamicsConfig::violations() const {
  std::vector<std::string> out;
  collect(out, "alpha", [&] { check_learning_rate(alpha, noise.q_bound()); });
  if (stride == 0) out.push_back("stride: must be at least 1");
  if (record_samples && stride != 1) out.push_back("record_samples: requires stride 1");

  std::size_t d = 0;
  if (variant == ModelVariant::inhomogeneous) {
    if (p0) out.push_back("p0: not used by the inhomogeneous variant (give w0 and schedule)");
    if (lambda) out.push_back("lambda: the inhomogeneous variant takes its intensities from schedule");
    if (!w0) out.push_back("w0: required by the inhomogeneous variant");
    if (schedule.empty() || schedule.front().start != 0) {
      out.push_back("schedule: must be nonempty and start at step 0");
    }
    for (std::size_t i = 1; i < schedule.size(); ++i) {
      if (schedule[i].start <= schedule[i - 1].start) out.push_back("schedule: starts must increase");
    }
    for (const auto& seg : schedule) {
      collect(out, "schedule", [&] { IntensityVector tmp(seg.lambda); });
      if (w0 && seg.lambda.size() != w0->size()) out.push_back("schedule: dimension mismatch with w0");
    }
    if (w0) {
      collect(out, "w0", [&] { WeightVector tmp(*w0); });
      d = w0->size();
    }
  } else {
    if (!schedule.empty()) out.push_back("schedule: only used by the inhomogeneous variant");
    if (p0) {
      collect(out, "p0", [&] { ProbabilityVector tmp(*p0); });
      d = p0->size();
      if (lambda && w0) out.push_back("p0: give either p0 or (lambda, w0), not both");
    } else if (lambda && w0) {
      collect(out, "lambda/w0", [&] { probabilities_from_weights(IntensityVector(*lambda), WeightVector(*w0)); });
      d = w0->size();
    } else {
      out.push_back("initial state: p0 or (lambda, w0) required");
    }
  }
  if (record_weights && !w0) out.push_back("record_weights: requires w0");

  if (variant == ModelVariant::correlated) {
    if (!gamma) {
      out.push_back("gamma: required by the correlated variant");
    } else {
      collect(out, "gamma", [&] { CorrelationMatrix tmp(*gamma); });
      if (d != 0 && static_cast<std::size_t>(gamma->rows()) != d) out.push_back("gamma: dimension mismatch");
    }
  } else if (gamma) {
    out.push_back("gamma: only used by the correlated variant");
  }
  return out;
}

void DynamicsConfig::validate() const {
  auto v = violations();
  if (!v.empty()) throw ConfigError(std::move(v));
}

std::string DynamicsConfig::to_json() const {
  json j;
  j["variant"] = variant_name(variant);
  j["alpha"] = alpha;
  j["noise"] = {{"kind", noise.kind() == NoiseKind::uniform_symmetric ? "uniform-symmetric" : "custom-bounded"},
                {"half_width", noise.half_width()},
                {"q_bound", noise.q_bound()}};
  if (p0) j["p0"] = *p0;
  if (lambda) j["lambda"] = *lambda;
  if (w0) j["w0"] = *w0;
  if (gamma) j["gamma"] = matrix_json(*gamma);
  if (!schedule.empty()) {
    json s = json::array();
    for (const auto& seg : schedule) s.push_back({{"start", seg.start}, {"lambda", seg.lambda}});
    j["schedule"] = s;
  }
  j["iterations"] = iterations;
  j["stride"] = stride;
  j["record_samples"] = record_samples;
  j["record_weights"] = record_weights;
  return j.dump();
}

std::string DynamicsConfig::digest() const { return digest_hex(to_json()); }

ProbabilityVector initial_state(const DynamicsConfig& config) {
  if (config.variant == ModelVariant::inhomogeneous) {
    return probabilities_from_weights(IntensityVector(config.schedule.front().lambda), WeightVector(*config.w0));
  }
  if (config.p0) return ProbabilityVector(*config.p0);
  return probabilities_from_weights(IntensityVector(*config.lambda), WeightVector(*config.w0));
}

TrajectoryRecord run_trajectory(const DynamicsConfig& config, std::uint64_t seed, const StepObserver& observer) {
  config.validate();
  TrajectoryRecord rec;
  rec.seed = seed;
  rec.config_digest = config.digest();

  Rng rng(seed);
  const double alpha = config.alpha;
  const std::size_t n = config.iterations;
  const bool inhomogeneous = config.variant == ModelVariant::inhomogeneous;
  const bool track_weights = config.w0.has_value();
  Vector p = initial_state(config).values();
  Vector w = track_weights ? *config.w0 : Vector{};
  std::optional<CorrelationMatrix> gamma;
  if (config.variant == ModelVariant::correlated) gamma.emplace(*config.gamma);
  std::size_t segment = 0;

  auto record = [&](std::size_t k) {
    rec.steps.push_back(k);
    rec.states.emplace_back(p);
    if (config.record_weights) rec.weights.emplace_back(w);
  };
  const std::size_t expected = n / config.stride + 2;
  rec.steps.reserve(expected);
  rec.states.reserve(expected);
  if (config.record_samples) rec.samples.reserve(n);
  record(0);

  StepSample s;
  Vector before;
  for (std::size_t k = 0; k < n; ++k) {
    if (observer) before = p;
    if (gamma) {
      sample_correlated_step_into(p, *gamma, config.noise, rng, s);
    } else {
      sample_step_into(p, config.noise, rng, s);
    }
    if (inhomogeneous) {
      while (segment + 1 < config.schedule.size() && config.schedule[segment + 1].start <= k + 1) ++segment;
      const Vector& lam = config.schedule[segment].lambda;
      double norm = 0.0;
      double wmax = 0.0;
      for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] *= 1.0 + alpha * s.combined[i];
        norm += lam[i] * w[i];
        wmax = std::max(wmax, w[i]);
      }
      for (std::size_t i = 0; i < w.size(); ++i) p[i] = lam[i] * w[i] / norm;
      // p is invariant under rescaling w; keep w finite on long runs.
      if (!config.record_weights && wmax > 1e200) {
        for (double& x : w) x /= wmax;
      }
    } else {
      multiplicative_update(p, alpha, s.combined);
      if (track_weights) {
        for (std::size_t i = 0; i < w.size(); ++i) w[i] *= 1.0 + alpha * s.combined[i];
      }
    }
    if (config.record_samples) rec.samples.push_back(s);
    if (observer) observer(k, before, s, p);
    if ((k + 1) % config.stride == 0 || k + 1 == n) record(k + 1);
  }
  return rec;
}

std::vector<TrajectoryRecord> run_ensemble(const DynamicsConfig& config, std::uint64_t master_seed,
                                           std::size_t count, std::size_t threads) {
  config.validate();
  return parallel_map(count, threads,
                      [&](std::size_t i) { return run_trajectory(config, derive_seed(master_seed, i)); });
}

void write_trajectory_csv(const std::filesystem::path& path, const TrajectoryRecord& record) {
  if (record.states.empty()) throw InvalidInput("trajectory export: empty record");
  const std::size_t d = record.states.front().dim();
  std::vector<std::string> header{"k"};
  for (auto& h : indexed_header("p", d)) header.push_back(h);
  const bool weights = !record.weights.empty();
  if (weights) {
    for (auto& h : indexed_header("w", d)) header.push_back(h);
  }
  CsvWriter csv(path, header);
  for (std::size_t r = 0; r < record.states.size(); ++r) {
    csv.cell(record.steps[r]).cells(record.states[r].values());
    if (weights) csv.cells(record.weights[r].values());
    csv.end_row();
  }
  csv.close();
}

void write_ensemble(const std::filesystem::path& dir, const std::vector<TrajectoryRecord>& records,
                    const DynamicsConfig& config, std::uint64_t master_seed) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw OutputError("cannot create " + dir.string() + ": " + ec.message());
  json manifest;
  manifest["config_digest"] = config.digest();
  manifest["config"] = json::parse(config.to_json());
  manifest["master_seed"] = master_seed;
  json list = json::array();
  for (std::size_t i = 0; i < records.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "trajectory_%04zu.csv", i);
    write_trajectory_csv(dir / name, records[i]);
    list.push_back({{"index", i}, {"seed", records[i].seed}, {"file", name}});
  }
  manifest["trajectories"] = list;
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace simplex_stdp
