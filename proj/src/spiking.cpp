#include "simplex_stdp/spiking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include "simplex_stdp/errors.hpp"
#include "simplex_stdp/io.hpp"

namespace simplex_stdp {

std::vector<std::string> MembraneConfig::violations() const {
  std::vector<std::string> v;
  if (!(threshold > 0.0) || !std::isfinite(threshold)) v.push_back("threshold: must be positive and finite");
  if (!(horizon > 0.0)) v.push_back("horizon: must be positive");
  if (intensities.dim() == 0) v.push_back("intensities: missing");
  if (weights.dim() == 0) v.push_back("weights: missing");
  if (intensities.dim() != 0 && weights.dim() != 0 && intensities.dim() != weights.dim()) {
    v.push_back("weights: dimension differs from intensities");
  }
  return v;
}

void MembraneConfig::validate() const {
  auto v = violations();
  if (!v.empty()) throw ConfigError(std::move(v));
}

std::vector<SpikeTrain> gen_poisson_trains(const IntensityVector& lambda, double horizon, Rng& rng) {
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw InvalidInput("poisson trains: horizon must be finite and >= 0");
  std::vector<SpikeTrain> trains(lambda.dim());
  for (std::size_t i = 0; i < lambda.dim(); ++i) {
    trains[i].neuron_id = i;
    if (horizon == 0.0) continue;
    trains[i].times.reserve(static_cast<std::size_t>(lambda[i] * horizon * 1.1) + 16);
    double t = rng.exponential(lambda[i]);
    while (t <= horizon) {
      trains[i].times.push_back(t);
      t += rng.exponential(lambda[i]);
    }
  }
  return trains;
}

PoissonStream::PoissonStream(const IntensityVector& lambda, Rng& rng)
    : rates_(lambda.values()), pending_(lambda.dim()), rng_(&rng) {
  for (std::size_t i = 0; i < rates_.size(); ++i) pending_[i] = rng_->exponential(rates_[i]);
}

PoissonStream::Event PoissonStream::next() {
  const auto it = std::min_element(pending_.begin(), pending_.end());
  const auto i = static_cast<std::size_t>(it - pending_.begin());
  Event e{*it, i};
  pending_[i] += rng_->exponential(rates_[i]);
  return e;
}

namespace {

// Integrates the membrane through one presynaptic event; returns true on a postsynaptic spike.
struct Membrane {
  double threshold;
  double potential = 0.0;
  double last = 0.0;

  bool receive(double t, double w, PostsynapticRecord& out, std::size_t neuron) {
    potential = potential * std::exp(-(t - last)) + w;
    last = t;
    if (potential >= threshold) {
      out.spike_times.push_back(t);
      out.trigger_ids.push_back(neuron);
      out.pre_reset_potentials.push_back(potential);
      potential = 0.0;
      return true;
    }
    return false;
  }
};

}  // namespace

PostsynapticRecord simulate_membrane(const MembraneConfig& config, const std::vector<SpikeTrain>& trains,
                                     bool record_potential) {
  config.validate();
  const std::size_t d = config.weights.dim();
  std::vector<std::pair<double, std::size_t>> events;
  for (const auto& train : trains) {
    if (train.neuron_id >= d) throw InvalidInput("membrane: spike train neuron id out of range");
    double prev = -std::numeric_limits<double>::infinity();
    for (double t : train.times) {
      if (!(t >= 0.0) || !(t > prev)) throw InvalidInput("membrane: spike times must be nonnegative and increasing");
      prev = t;
      if (t <= config.horizon) events.emplace_back(t, train.neuron_id);
    }
  }
  std::sort(events.begin(), events.end());

  PostsynapticRecord rec;
  Membrane m{config.threshold};
  for (const auto& [t, j] : events) {
    m.receive(t, config.weights[j], rec, j);
    if (record_potential) rec.potential_samples.emplace_back(t, m.potential);
  }
  return rec;
}

PostsynapticRecord simulate_membrane_streaming(const MembraneConfig& config, std::size_t n_post, Rng& rng) {
  config.validate();
  PostsynapticRecord rec;
  rec.trigger_ids.reserve(n_post);
  rec.pre_reset_potentials.reserve(n_post);
  rec.spike_times.reserve(n_post + 1);
  PoissonStream stream(config.intensities, rng);
  Membrane m{config.threshold};
  while (rec.count() < n_post) {
    const auto e = stream.next();
    if (e.time > config.horizon) break;
    m.receive(e.time, config.weights[e.neuron], rec, e.neuron);
  }
  return rec;
}

double stdp_increment(std::span<const double> times, double t_prev, double t_next) {
  if (!(t_prev >= 0.0) || !(t_prev < t_next)) throw InvalidInput("stdp: need 0 <= t_prev < t_next");
  double sum = 0.0;
  for (double tau : times) {
    if (!(tau > t_prev && tau <= t_next)) throw InvalidInput("stdp: spike outside the window (t_prev, t_next]");
    sum += std::exp(-(t_next - tau)) - std::exp(-(tau - t_prev));
  }
  return sum;
}

double stdp_update(double w, std::span<const double> times, double t_prev, double t_next, double alpha) {
  return w * (1.0 + alpha * stdp_increment(times, t_prev, t_next));
}

NoiseStats centered_noise_check(double t_prev, double t_next, std::size_t n_samples, Rng& rng) {
  if (!(t_prev < t_next)) throw InvalidInput("centered noise check: need t_prev < t_next");
  if (n_samples == 0) throw InvalidInput("centered noise check: need at least one sample");
  NoiseStats s;
  s.samples = n_samples;
  s.min = std::numeric_limits<double>::infinity();
  s.max = -s.min;
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    const double tau = rng.uniform(t_prev, t_next);
    const double x = std::exp(-(t_next - tau)) - std::exp(-(tau - t_prev));
    const double delta = x - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (x - mean);
    s.min = std::min(s.min, x);
    s.max = std::max(s.max, x);
  }
  s.mean = mean;
  s.stddev = n_samples > 1 ? std::sqrt(m2 / static_cast<double>(n_samples - 1)) : 0.0;
  return s;
}

SpikingLearningRun spiking_learning_run(const SpikingLearningConfig& config, std::uint64_t seed) {
  config.membrane.validate();
  if (!(config.alpha >= 0.0) || !std::isfinite(config.alpha)) throw InvalidInput("spiking learning: alpha must be >= 0");
  const std::size_t d = config.membrane.weights.dim();
  const IntensityVector& lambda = config.membrane.intensities;

  SpikingLearningRun run;
  run.record.seed = seed;
  Vector w = config.membrane.weights.values();
  auto record = [&](std::size_t k) {
    run.record.steps.push_back(k);
    run.record.states.push_back(probabilities_from_weights(lambda, WeightVector(w)));
    run.record.weights.emplace_back(w);
  };
  record(0);

  Rng rng(seed);
  PoissonStream stream(lambda, rng);
  Membrane m{config.membrane.threshold};
  std::vector<Vector> window(d);
  double t_prev = 0.0;
  while (run.post.count() < config.iterations) {
    const auto e = stream.next();
    if (e.time > config.membrane.horizon) break;
    window[e.neuron].push_back(e.time);
    if (!m.receive(e.time, w[e.neuron], run.post, e.neuron)) continue;

    const double t_next = e.time;
    WindowDiagnostics diag;
    diag.t_prev = t_prev;
    diag.t_next = t_next;
    diag.trigger_id = e.neuron;
    diag.trigger_term = -std::expm1(t_prev - t_next);
    diag.noise_terms.assign(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
      const double total = stdp_increment(window[j], t_prev, t_next);
      diag.noise_terms[j] = j == e.neuron ? total - diag.trigger_term : total;
      const double factor = 1.0 + config.alpha * total;
      if (!(factor > 0.0)) {
        throw PreconditionError("spiking learning: alpha too large, weight " + std::to_string(j + 1) +
                                " would turn negative in window " + std::to_string(run.post.count()));
      }
      w[j] *= factor;
      window[j].clear();
    }
    run.windows.push_back(std::move(diag));
    t_prev = t_next;
    record(run.post.count());
  }
  return run;
}

void write_spike_trains_csv(const std::filesystem::path& path, const std::vector<SpikeTrain>& trains) {
  std::vector<std::tuple<double, std::size_t>> events;
  for (const auto& train : trains) {
    for (double t : train.times) events.emplace_back(t, train.neuron_id);
  }
  std::sort(events.begin(), events.end());
  CsvWriter csv(path, {"neuron_id", "time"});
  for (const auto& [t, id] : events) {
    csv.cell(id + 1).cell(t);
    csv.end_row();
  }
  csv.close();
}

void write_postsynaptic_csv(const std::filesystem::path& path, const PostsynapticRecord& record) {
  CsvWriter csv(path, {"k", "t_k", "trigger_id"});
  for (std::size_t k = 1; k <= record.count(); ++k) {
    csv.cell(k).cell(record.spike_times[k]).cell(record.trigger_ids[k - 1] + 1);
    csv.end_row();
  }
  csv.close();
}

void write_potential_csv(const std::filesystem::path& path, const PostsynapticRecord& record) {
  CsvWriter csv(path, {"t", "Y"});
  for (const auto& [t, y] : record.potential_samples) {
    csv.cell(t).cell(y);
    csv.end_row();
  }
  csv.close();
}

}  // namespace simplex_stdp
