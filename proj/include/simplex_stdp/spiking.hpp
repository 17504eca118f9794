#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "simplex_stdp/dynamics.hpp"
#include "simplex_stdp/rng.hpp"
#include "simplex_stdp/simplex.hpp"

namespace simplex_stdp {

// Time is measured in units of the membrane decay constant.
struct SpikeTrain {
  std::size_t neuron_id = 0;
  Vector times;  // strictly increasing, >= 0
};

struct MembraneConfig {
  double threshold = 30.0;
  IntensityVector intensities;
  WeightVector weights;
  double horizon = 1.0;

  std::vector<std::string> violations() const;
  void validate() const;  // throws ConfigError
};

struct PostsynapticRecord {
  Vector spike_times{0.0};               // t_0 = 0, t_1, t_2, ...
  std::vector<std::size_t> trigger_ids;  // entry k-1 belongs to t_k
  Vector pre_reset_potentials;           // entry k-1 belongs to t_k, always >= S
  std::vector<std::pair<double, double>> potential_samples;  // (t, Y_t) after each event

  std::size_t count() const noexcept { return trigger_ids.size(); }
};

std::vector<SpikeTrain> gen_poisson_trains(const IntensityVector& lambda, double horizon, Rng& rng);

// Merged presynaptic events in (time, neuron_id) order, generated lazily.
class PoissonStream {
 public:
  PoissonStream(const IntensityVector& lambda, Rng& rng);

  struct Event {
    double time = 0.0;
    std::size_t neuron = 0;
  };
  Event next();

 private:
  Vector rates_;
  Vector pending_;
  Rng* rng_;
};

PostsynapticRecord simulate_membrane(const MembraneConfig& config, const std::vector<SpikeTrain>& trains,
                                     bool record_potential = false);
// Runs until n_post postsynaptic spikes or config.horizon, whichever comes first.
PostsynapticRecord simulate_membrane_streaming(const MembraneConfig& config, std::size_t n_post, Rng& rng);

// Sum over tau of e^{-(t_next - tau)} - e^{-(tau - t_prev)}; every tau must lie in (t_prev, t_next].
double stdp_increment(std::span<const double> times, double t_prev, double t_next);
double stdp_update(double w, std::span<const double> times, double t_prev, double t_next, double alpha);

struct NoiseStats {
  std::size_t samples = 0;
  double mean = 0.0;
  double stddev = 0.0;
  double min = 0.0;
  double max = 0.0;
};

NoiseStats centered_noise_check(double t_prev, double t_next, std::size_t n_samples, Rng& rng);

struct SpikingLearningConfig {
  MembraneConfig membrane;  // weights are the initial weights; horizon caps simulated time
  double alpha = 0.0;
  std::size_t iterations = 0;  // number of postsynaptic spikes
};

// Contribution of one interspike window to each weight's relative change.
struct WindowDiagnostics {
  double t_prev = 0.0;
  double t_next = 0.0;
  std::size_t trigger_id = 0;
  double trigger_term = 0.0;  // 1 - e^{t_prev - t_next}, credited to trigger_id
  Vector noise_terms;         // remaining spikes of each neuron in the window
};

struct SpikingLearningRun {
  TrajectoryRecord record;  // p(k) = lambda . w(k) / lambda^T w(k) after each window, weights included
  std::vector<WindowDiagnostics> windows;
  PostsynapticRecord post;
};

SpikingLearningRun spiking_learning_run(const SpikingLearningConfig& config, std::uint64_t seed);

void write_spike_trains_csv(const std::filesystem::path& path, const std::vector<SpikeTrain>& trains);
void write_postsynaptic_csv(const std::filesystem::path& path, const PostsynapticRecord& record);
void write_potential_csv(const std::filesystem::path& path, const PostsynapticRecord& record);

}  // namespace simplex_stdp
