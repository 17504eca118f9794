#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "simplex_stdp/simplex.hpp"

namespace simplex_stdp {

// p_i exp(-alpha g_i) / sum_j p_j exp(-alpha g_j). Zero entries stay zero.
ProbabilityVector entropic_step(const ProbabilityVector& p, double alpha, std::span<const double> grad);
// p_i (1 + alpha p_i) / sum_j p_j (1 + alpha p_j)
ProbabilityVector multiplicative_step(const ProbabilityVector& p, double alpha);

struct MirrorStepReport {
  double alpha = 0.0;
  ProbabilityVector entropic_result;
  ProbabilityVector multiplicative_result;
  double sup_difference = 0.0;
};

// Both steps with grad = -p, one report per alpha.
std::vector<MirrorStepReport> order_comparison(const ProbabilityVector& p, std::span<const double> alphas);

// KL(p || q); throws InvalidInput if p is not supported inside q.
double kl_divergence(std::span<const double> p, std::span<const double> q);

void write_mirror_csv(const std::filesystem::path& path, const std::vector<MirrorStepReport>& reports);

}  // namespace simplex_stdp
