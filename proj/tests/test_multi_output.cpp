#include <doctest.h>

#include <cmath>
#include <set>

#include "simplex_stdp/errors.hpp"
#include "simplex_stdp/multi_output.hpp"
#include "test_support.hpp"

using namespace simplex_stdp;

namespace {

MultiRunConfig figure3_config(double base, std::size_t iterations, std::uint64_t seed) {
  MultiRunConfig c;
  c.lambda = {10.0, 7.5, 5.0};
  c.alphas = {base, 0.75 * base, 0.5 * base};
  c.iterations = iterations;
  c.seed = seed;
  return c;
}

WeightMatrix ones(Eigen::Index d) { return WeightMatrix::Ones(d, d); }

}  // namespace

TEST_CASE("cosine projection") {
  const Vector a = cosine_projection(Vector{0.1, 3.0, 0.2});
  CHECK(a[0] == 0.0);
  CHECK(a[1] == doctest::Approx(std::sqrt(0.01 + 9.0 + 0.04)).epsilon(1e-15));
  CHECK(a[2] == 0.0);
  CHECK(cosine_projection(Vector{0.0, 0.0, 2.5}) == Vector{0.0, 0.0, 2.5});
  const Vector t = cosine_projection(Vector{1.0, 1.0, 0.5});
  CHECK(t[0] == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(t[1] == 0.0);
  CHECK_THROWS_AS(cosine_projection(Vector{0.0, 0.0}), InvalidInput);
}

TEST_CASE("Frobenius half error") {
  CHECK(frobenius_half_error(Matrix::Identity(3, 3)) == 0.0);
  Matrix swapped = Matrix::Zero(3, 3);
  swapped(1, 0) = 1.0;
  swapped(0, 1) = 1.0;
  swapped(2, 2) = 1.0;
  CHECK(frobenius_half_error(swapped) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(frobenius_half_error(Matrix::Constant(3, 3, 1.0 / 3)) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("iteration count for the multi-neuron theorem") {
  // kappa = 5/10; the gap for equal weights is min(10-7.5, 7.5-5)/22.5 = 1/9
  CHECK(algorithm2_gap(IntensityVector({10.0, 7.5, 5.0}), ones(3)) == doctest::Approx(1.0 / 9).epsilon(1e-14));
  const double oracle = 16.0 * 3 / (1e-3 * (1.0 / 9) * (4.0 + 3.0 / 9)) * std::log(80.0);
  CHECK(oracle == doctest::Approx(436854.35).epsilon(1e-8));
  CHECK(thm_multi_iterations(0.5, 0.25, 0.2, 1e-3, 1.0 / 9, 3) == static_cast<std::size_t>(std::ceil(oracle)));
  CHECK(thm_multi_iterations(0.5, 0.25, 0.2, 1e-3, 1.0 / 9, 3) == 436855);
  CHECK_THROWS_AS(thm_multi_iterations(0.5, 1.0 / 3, 0.2, 1e-3, 1.0 / 9, 3), PreconditionError);
  CHECK_THROWS_AS(thm_multi_iterations(0.5, 0.4, 0.2, 1e-3, 1.0 / 9, 3), PreconditionError);
  CHECK_NOTHROW(thm_multi_iterations(0.5, 0.33, 0.2, 1e-3, 1.0 / 9, 3));
}

TEST_CASE("algorithm 1: first column follows the single-neuron rule") {
  const auto cfg = figure3_config(1e-2, 3000, 99);
  const auto res = algorithm1_run(ones(3), cfg);
  DynamicsConfig single;
  single.alpha = cfg.alphas[0];
  single.lambda = cfg.lambda;
  single.w0 = Vector{1.0, 1.0, 1.0};
  single.iterations = 3000;
  const auto rec = run_trajectory(single, derive_seed(99, 0));
  REQUIRE(rec.states.size() == res.probabilities.size());
  double worst = 0.0;
  for (std::size_t r = 0; r < rec.states.size(); ++r) {
    for (Eigen::Index i = 0; i < 3; ++i) {
      worst = std::max(worst, std::abs(res.probabilities[r](i, 0) - rec.states[r][static_cast<std::size_t>(i)]));
    }
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("algorithm 1: deflation is orthogonal to earlier neurons") {
  const auto cfg = figure3_config(1e-2, 2000, 5);
  const auto res = algorithm1_run(ones(3), cfg);
  std::set<std::pair<std::size_t, std::size_t>> clipped;
  for (const auto& c : res.clips) clipped.insert({c.k, c.column});
  std::size_t checked = 0;
  for (std::size_t k = 0; k + 1 < res.weights.size(); ++k) {
    const WeightMatrix& a = res.weights[k];
    const WeightMatrix& b = res.weights[k + 1];
    for (Eigen::Index j = 1; j < 3; ++j) {
      if (clipped.count({k, static_cast<std::size_t>(j)})) continue;
      const Eigen::VectorXd change = b.col(j) - a.col(j);
      for (Eigen::Index i = 0; i < j; ++i) {
        const double scale = change.norm() * a.col(i).norm();
        CHECK(std::abs(change.dot(a.col(i))) <= 1e-10 * scale);
      }
      ++checked;
    }
  }
  CHECK(checked > 1000);
  for (const auto& p : res.probabilities) {
    for (Eigen::Index j = 0; j < 3; ++j) {
      CHECK(std::abs(p.col(j).sum() - 1.0) <= 1e-10);
      CHECK((p.col(j).array() >= 0.0).all());
    }
  }
  for (const auto& c : res.clips) CHECK(c.value < 0.0);
}

TEST_CASE("algorithm 1: equal initial weights, decreasing rates lower the Frobenius error") {
  double start = 0.0;
  double end = 0.0;
  const int runs = 20;
  for (int s = 0; s < runs; ++s) {
    auto cfg = figure3_config(1e-3, 40000, static_cast<std::uint64_t>(s));
    cfg.record_stride = 40000;
    const auto res = algorithm1_run(ones(3), cfg);
    start += frobenius_half_error(res.probabilities.front());
    end += frobenius_half_error(res.probabilities.back());
  }
  CHECK(end < start);
  CHECK(end / runs < 0.6);
}

TEST_CASE("algorithm 1 rejects bad inputs") {
  auto cfg = figure3_config(1e-3, 10, 1);
  cfg.alphas = {1e-3};
  CHECK_THROWS_AS(algorithm1_run(ones(3), cfg), InvalidInput);
  cfg = figure3_config(0.6, 10, 1);
  CHECK_THROWS_AS(algorithm1_run(ones(3), cfg), InvalidInput);
  WeightMatrix neg = ones(3);
  neg(0, 0) = -1.0;
  CHECK_THROWS_AS(algorithm1_run(neg, figure3_config(1e-3, 10, 1)), InvalidInput);
}

TEST_CASE("algorithm 2") {
  MultiRunConfig cfg;
  cfg.lambda = {10.0, 7.5, 5.0};
  cfg.alphas = {1e-3};
  const Algorithm2Params params{0.2, 0.25};

  SUBCASE("noiseless greedy oracle recovers the identity") {
    cfg.noise = NoiseModel::custom([](Rng&) { return 0.0; }, 2.0, 0.0);
    cfg.trigger_rule = TriggerRule::greedy;
    const auto res = algorithm2_run(ones(3), cfg, params);
    CHECK(res.iterations == 436855);
    CHECK(res.success);
    CHECK(res.projections.isIdentity(0.0));
  }

  SUBCASE("single output neuron") {
    MultiRunConfig one;
    one.lambda = {5.0};
    one.alphas = {1e-3};
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      one.seed = seed;
      one.iterations = 100;
      const auto res = algorithm2_run(WeightMatrix::Ones(1, 1), one, params);
      CHECK(res.success);
      CHECK(res.projections(0, 0) == 1.0);
    }
  }

  SUBCASE("sampled runs are reproducible") {
    cfg.iterations = 5000;
    cfg.seed = 3;
    const auto a = algorithm2_run(ones(3), cfg, params);
    const auto b = algorithm2_run(ones(3), cfg, params);
    CHECK(a.final_weights == b.final_weights);
    CHECK(a.success == b.success);
    for (Eigen::Index j = 0; j < 3; ++j) CHECK(std::abs(a.final_probabilities.col(j).sum() - 1.0) <= 1e-10);
  }

  SUBCASE("preconditions") {
    MultiRunConfig inc = cfg;
    inc.lambda = {5.0, 7.5, 10.0};
    CHECK_THROWS_AS(algorithm2_run(ones(3), inc, params), PreconditionError);
    CHECK_THROWS_AS(algorithm2_run(ones(3), cfg, Algorithm2Params{0.2, 0.4}), PreconditionError);
    MultiRunConfig two = cfg;
    two.alphas = {1e-3, 1e-3};
    CHECK_THROWS_AS(algorithm2_run(ones(3), two, params), InvalidInput);
  }
}

TEST_CASE("multi-neuron export") {
  const auto dir = test_support::fresh_dir("multi_output");
  auto cfg = figure3_config(1e-3, 10, 1);
  cfg.record_stride = 5;
  write_multi_run_csv(dir / "run.csv", algorithm1_run(ones(3), cfg));
  const std::string text = test_support::read_file(dir / "run.csv");
  CHECK(text.rfind("k,j,p_j1,p_j2,p_j3\n", 0) == 0);
  std::size_t lines = 0;
  for (char c : text) lines += c == '\n';
  CHECK(lines == 1 + 3 * 3);
}
