#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "simplex_stdp/dynamics.hpp"
#include "simplex_stdp/simplex.hpp"

namespace simplex_stdp {

// Column j holds the weights of output neuron j.
using WeightMatrix = Matrix;

enum class TriggerRule {
  sampled,
  greedy,  // B forced to the most likely index; noiseless test oracle only
};

struct MultiRunConfig {
  Vector lambda;
  Vector alphas;  // one rate per output neuron (Algorithm 1) or a single rate (Algorithm 2)
  std::size_t iterations = 0;
  NoiseModel noise;
  std::uint64_t seed = 0;
  std::size_t record_stride = 1;
  TriggerRule trigger_rule = TriggerRule::sampled;
};

struct ClipEvent {
  std::size_t k = 0;
  std::size_t column = 0;
  std::size_t row = 0;
  double value = 0.0;  // the negative entry that was set to 0
};

struct Algorithm1Result {
  std::vector<std::size_t> steps;
  std::vector<WeightMatrix> weights;
  std::vector<Matrix> probabilities;
  std::vector<ClipEvent> clips;
};

// Column j draws from the stream derive_seed(config.seed, j).
Algorithm1Result algorithm1_run(const WeightMatrix& w0, const MultiRunConfig& config);

struct Algorithm2Params {
  double epsilon = 0.2;
  double delta = 0.25;
};

struct Algorithm2Result {
  std::size_t iterations = 0;  // K per output neuron
  double gap = 0.0;
  Matrix projections;          // P*, columns p_j*
  WeightMatrix fixed_weights;  // w_j*
  WeightMatrix final_weights;  // w_j(K) before projection
  Matrix final_probabilities;  // p_j(K)
  bool success = false;        // P* == I
};

// Minimal gap min_j ([p_j(0)]_j - max_{i>j} [p_j(0)]_i) along the ideal path
// where the earlier neurons have locked onto e_1, ..., e_{j-1}.
double algorithm2_gap(const IntensityVector& lambda, const WeightMatrix& w0);

// K comes from thm_multi_iterations when config.iterations is 0.
Algorithm2Result algorithm2_run(const WeightMatrix& w0, const MultiRunConfig& config,
                                const Algorithm2Params& params);

// ||w|| e_{argmax w}, ties to the lowest index.
Vector cosine_projection(std::span<const double> w);

double frobenius_half_error(const Matrix& p);

std::size_t thm_multi_iterations(double kappa, double delta, double epsilon, double alpha, double gap,
                                 std::size_t d);

void write_multi_run_csv(const std::filesystem::path& path, const Algorithm1Result& result);

}  // namespace simplex_stdp
