#include <doctest.h>

#include <array>
#include <cmath>

#include "simplex_stdp/dynamics.hpp"
#include "simplex_stdp/errors.hpp"
#include "test_support.hpp"

using namespace simplex_stdp;
using test_support::random_simplex;
using test_support::sup_diff;

namespace {

Vector random_y(std::size_t d, Rng& rng) {
  Vector y(d);
  for (double& v : y) v = rng.uniform(-2.0, 2.0);
  return y;
}

Vector random_positive(std::size_t d, Rng& rng, double lo, double hi) {
  Vector v(d);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

}  // namespace

TEST_CASE("noise model bounds") {
  const NoiseModel def;
  CHECK(def.half_width() == 1.0);
  CHECK(def.q_bound() == 2.0);
  Rng rng(3);
  for (int i = 0; i < 10000; ++i) {
    const double z = def.sample(rng);
    CHECK(std::abs(z) <= 1.0);
  }
  CHECK_THROWS_AS(NoiseModel::uniform(1.5, 2.0), InvalidInput);
  CHECK_THROWS_AS(NoiseModel::uniform(0.5, 1.0), InvalidInput);
  const auto bad = NoiseModel::custom([](Rng&) { return 0.7; }, 1.5, 0.5);
  CHECK_THROWS_AS(bad.sample(rng), InvalidInput);
}

TEST_CASE("trigger sampling") {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) CHECK(sample_trigger(Vector{0.0, 1.0, 0.0}, rng) == 1);

  const std::size_t n = 1000000;
  std::size_t ones = 0;
  for (std::size_t i = 0; i < n; ++i) ones += sample_trigger(Vector{0.5, 0.5}, rng) == 0;
  CHECK(std::abs(static_cast<double>(ones) / n - 0.5) < 0.005);

  const Vector p{4.0 / 9, 1.0 / 3, 2.0 / 9};
  std::array<std::size_t, 3> counts{};
  for (std::size_t i = 0; i < n; ++i) ++counts[sample_trigger(p, rng)];
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(static_cast<double>(counts[i]) / n - p[i]) < 0.005);

  const NoiseModel noise;
  for (int i = 0; i < 1000; ++i) {
    const auto s = sample_step(p, noise, rng);
    double ones_b = 0.0;
    for (double b : s.trigger) ones_b += b;
    CHECK(ones_b == 1.0);
    CHECK(s.trigger[s.trigger_index] == 1.0);
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(std::abs(s.combined[j]) <= noise.q_bound());
      CHECK(s.combined[j] == s.trigger[j] + s.noise[j]);
    }
  }
}

TEST_CASE("weight and probability steps") {
  const Vector zero{0.0, 0.0};
  CHECK(step_weights(WeightVector({1.0, 2.0}), 0.1, zero) == WeightVector({1.0, 2.0}));
  const auto w = step_weights(WeightVector({1.0, 1.0}), 0.1, Vector{1.0, -0.5});
  CHECK(w[0] == doctest::Approx(1.1).epsilon(1e-15));
  CHECK(w[1] == doctest::Approx(0.95).epsilon(1e-15));

  const ProbabilityVector half({0.5, 0.5});
  CHECK(step_probabilities(half, 0.1, zero) == half);
  const auto p = step_probabilities(half, 0.1, Vector{1.0, 0.0});
  CHECK(p[0] == doctest::Approx(11.0 / 21).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(10.0 / 21).epsilon(1e-15));

  const auto z = step_probabilities(ProbabilityVector({0.6, 0.4, 0.0}), 0.3, Vector{1.2, -0.8, 1.9});
  CHECK(z[2] == 0.0);

  CHECK_THROWS_AS(check_learning_rate(0.5, 2.0), InvalidInput);
  CHECK_THROWS_AS(check_learning_rate(0.0, 2.0), InvalidInput);
  CHECK_NOTHROW(check_learning_rate(0.49, 2.0));
  CHECK_THROWS_AS(step_weights(WeightVector({1.0, 1.0}), 0.6, Vector{-2.0, 0.0}), InvalidInput);
}

TEST_CASE("weight form and probability form agree") {
  Rng rng(2024);
  double worst = 0.0;
  for (int n = 0; n < 1000; ++n) {
    const std::size_t d = 2 + rng.next_u64() % 6;
    const IntensityVector lambda(random_positive(d, rng, 0.1, 10.0));
    const WeightVector w(random_positive(d, rng, 0.1, 5.0));
    const double alpha = rng.uniform(0.001, 0.49);
    const Vector y = random_y(d, rng);
    const auto a = probabilities_from_weights(lambda, step_weights(w, alpha, y));
    const auto b = step_probabilities(probabilities_from_weights(lambda, w), alpha, y);
    worst = std::max(worst, sup_diff(a.values(), b.values()));
  }
  CHECK(worst < 1e-13);
}

TEST_CASE("noise decomposition") {
  SUBCASE("reconstruction and remainder bound on random instances") {
    Rng rng(77);
    for (int n = 0; n < 2000; ++n) {
      const std::size_t d = 2 + rng.next_u64() % 5;
      const ProbabilityVector p(random_simplex(d, rng));
      const double alpha = rng.uniform(1e-4, 0.2);
      const Vector y = random_y(d, rng);
      const auto dec = decompose_step(p, alpha, y);
      const auto next = step_probabilities(p, alpha, y);
      const double s2 = sum_squares(p);
      for (std::size_t i = 0; i < d; ++i) {
        CHECK(dec.drift[i] == doctest::Approx(p[i] * (p[i] - s2)).epsilon(1e-14));
        const double rebuilt = p[i] + alpha * p[i] * (p[i] - s2) - alpha * dec.xi[i] - dec.theta[i];
        CHECK(std::abs(rebuilt - next[i]) <= 1e-13);
        const double bound = alpha * alpha * 8.0 / std::pow(1.0 - 2.0 * alpha, 3) * p[i] * (1.0 - p[i]);
        CHECK(std::abs(dec.theta[i]) <= bound + 1e-15);
        CHECK(dec.theta_bound[i] == doctest::Approx(bound).epsilon(1e-14));
      }
    }
  }

  SUBCASE("xi vanishes at the conditional mean") {
    const ProbabilityVector p({0.5, 0.3, 0.2});
    const auto dec = decompose_step(p, 0.01, p.values());
    for (double x : dec.xi) CHECK(x == 0.0);
  }

  SUBCASE("xi is centered") {
    const ProbabilityVector p({0.5, 0.3, 0.2});
    const NoiseModel noise;
    Rng rng(5150);
    const std::size_t n = 1000000;
    Vector mean(3, 0.0);
    StepSample s;
    double max_ratio = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      sample_step_into(p, noise, rng, s);
      const auto dec = decompose_step(p, 0.01, s.combined);
      for (std::size_t i = 0; i < 3; ++i) {
        mean[i] += dec.xi[i];
        max_ratio = std::max(max_ratio, std::abs(dec.theta[i]) / dec.theta_bound[i]);
      }
    }
    for (double& m : mean) m /= static_cast<double>(n);
    for (double m : mean) CHECK(std::abs(m) < 5e-4);
    CHECK(max_ratio <= 1.0);
  }
}

TEST_CASE("correlated steps") {
  const Matrix g{{1.0, 0.1, 0.1}, {0.1, 1.0, 0.0}, {0.1, 0.0, 1.0}};
  const CorrelationMatrix gamma(g);
  CHECK(gamma.nu() == 0.1);
  CHECK(gamma.row_norm() == doctest::Approx(1.2));
  const Vector gp = gamma.apply(Vector{0.8, 0.1, 0.1});
  CHECK(gp[0] == doctest::Approx(0.82));
  CHECK(gp[1] == doctest::Approx(0.18));
  CHECK(gp[2] == doctest::Approx(0.18));

  SUBCASE("marginals") {
    Rng rng(99);
    const NoiseModel noise;
    const std::size_t n = 1000000;
    Vector freq(3, 0.0);
    StepSample s;
    for (std::size_t k = 0; k < n; ++k) {
      sample_correlated_step_into(Vector{0.8, 0.1, 0.1}, gamma, noise, rng, s);
      for (std::size_t i = 0; i < 3; ++i) freq[i] += s.spikes[i];
    }
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(freq[i] / n - gp[i]) < 0.005);
  }

  SUBCASE("deterministic trigger") {
    const CorrelationMatrix g2(Matrix{{1.0, 0.5}, {0.5, 1.0}});
    Rng rng(1);
    const NoiseModel noise;
    StepSample s;
    double second = 0.0;
    const int n = 100000;
    for (int k = 0; k < n; ++k) {
      sample_correlated_step_into(Vector{1.0, 0.0}, g2, noise, rng, s);
      CHECK(s.trigger_index == 0);
      CHECK(s.spikes[0] == 1.0);
      CHECK((s.spikes[1] == 0.0 || s.spikes[1] == 1.0));
      second += s.spikes[1];
    }
    CHECK(std::abs(second / n - 0.5) < 0.01);
  }

  SUBCASE("identity correlation reduces to the trigger") {
    Rng rng(8);
    const NoiseModel noise;
    StepSample s;
    for (int k = 0; k < 1000; ++k) {
      sample_correlated_step_into(Vector{0.2, 0.3, 0.5}, CorrelationMatrix::identity(3), noise, rng, s);
      CHECK(s.spikes == s.trigger);
    }
  }

  CHECK_THROWS_AS(CorrelationMatrix(Matrix{{1.0, 1.0}, {1.0, 1.0}}), InvalidInput);
  CHECK_THROWS_AS(CorrelationMatrix(Matrix{{1.0, 0.2}, {0.3, 1.0}}), InvalidInput);
  CHECK_THROWS_AS(CorrelationMatrix(Matrix{{0.9, 0.2}, {0.2, 1.0}}), InvalidInput);
}

TEST_CASE("inhomogeneous step") {
  Rng rng(4242);
  double worst = 0.0;
  double worst_scaled = 0.0;
  for (int n = 0; n < 1000; ++n) {
    const std::size_t d = 2 + rng.next_u64() % 6;
    const IntensityVector lam(random_positive(d, rng, 0.1, 10.0));
    const IntensityVector lam_next(random_positive(d, rng, 0.1, 10.0));
    const WeightVector w(random_positive(d, rng, 0.1, 5.0));
    const double alpha = rng.uniform(0.001, 0.49);
    const Vector y = random_y(d, rng);

    const auto [w_next, p_next] = step_inhomogeneous(w, lam_next, alpha, y);
    // p-tilde form: intensities of the next interval applied to the current weights.
    const auto p_tilde = probabilities_from_weights(lam_next, w);
    const auto other = step_probabilities(p_tilde, alpha, y);
    worst = std::max(worst, sup_diff(p_next.values(), other.values()));

    Vector scaled = lam.values();
    const double c = rng.uniform(0.1, 10.0);
    for (double& x : scaled) x *= c;
    const auto [w_s, p_s] = step_inhomogeneous(w, IntensityVector(scaled), alpha, y);
    const auto homogeneous = step_probabilities(probabilities_from_weights(lam, w), alpha, y);
    worst_scaled = std::max(worst_scaled, sup_diff(p_s.values(), homogeneous.values()));
  }
  CHECK(worst < 1e-13);
  CHECK(worst_scaled < 1e-13);
}

TEST_CASE("trajectories") {
  DynamicsConfig cfg;
  cfg.alpha = 0.01;
  cfg.p0 = Vector{0.3, 0.3, 0.4};
  cfg.iterations = 0;

  SUBCASE("zero iterations") {
    const auto rec = run_trajectory(cfg, 1);
    REQUIRE(rec.states.size() == 1);
    CHECK(rec.states[0].values() == *cfg.p0);
    CHECK(rec.steps == std::vector<std::size_t>{0});
  }

  SUBCASE("determinism and replay") {
    cfg.iterations = 500;
    cfg.record_samples = true;
    const auto a = run_trajectory(cfg, 9);
    const auto b = run_trajectory(cfg, 9);
    CHECK(a.states == b.states);
    CHECK(a.config_digest == b.config_digest);
    REQUIRE(a.states.size() == 501);
    REQUIRE(a.samples.size() == 500);
    for (std::size_t k = 0; k < 500; ++k) {
      const auto replay = step_probabilities(a.states[k], cfg.alpha, a.samples[k].combined);
      CHECK(replay == a.states[k + 1]);
    }
    const auto c = run_trajectory(cfg, 10);
    CHECK(c.states != a.states);
  }

  SUBCASE("stride records the final state") {
    cfg.iterations = 105;
    cfg.stride = 10;
    const auto rec = run_trajectory(cfg, 2);
    CHECK(rec.steps.front() == 0);
    CHECK(rec.steps[1] == 10);
    CHECK(rec.steps.back() == 105);
    CHECK(rec.steps.size() == 12);
  }

  SUBCASE("simplex preservation, positivity and zero absorption") {
    cfg.p0 = Vector{0.5, 0.0, 0.3, 0.2};
    cfg.iterations = 20000;
    cfg.alpha = 0.4;
    cfg.stride = 1;
    const auto rec = run_trajectory(cfg, 31337);
    for (const auto& p : rec.states) {
      double s = 0.0;
      for (double x : p) s += x;
      CHECK(std::abs(s - 1.0) <= 1e-10);
      CHECK(p[1] == 0.0);
      CHECK(p[0] > 0.0);
      CHECK(p[2] > 0.0);
      CHECK(p[3] > 0.0);
    }
  }

  SUBCASE("decomposition along a trajectory") {
    cfg.iterations = 2000;
    std::size_t checked = 0;
    run_trajectory(cfg, 6, [&](std::size_t, std::span<const double> before, const StepSample& s,
                               std::span<const double> after) {
      const ProbabilityVector p(Vector(before.begin(), before.end()));
      const auto dec = decompose_step(p, cfg.alpha, s.combined);
      const double s2 = sum_squares(p);
      for (std::size_t i = 0; i < 3; ++i) {
        const double rebuilt = p[i] + cfg.alpha * p[i] * (p[i] - s2) - cfg.alpha * dec.xi[i] - dec.theta[i];
        CHECK(std::abs(rebuilt - after[i]) <= 1e-13);
        CHECK(std::abs(dec.theta[i]) <= dec.theta_bound[i] + 1e-15);
      }
      ++checked;
    });
    CHECK(checked == 2000);
  }

  SUBCASE("ensemble ends near a vertex or inside") {
    cfg.iterations = 2000;
    const auto runs = run_ensemble(cfg, 123, 100, 4);
    REQUIRE(runs.size() == 100);
    for (const auto& r : runs) {
      const auto& p = r.states.back();
      bool near = false;
      bool inside = true;
      for (std::size_t i = 0; i < 3; ++i) {
        near = near || l1_distance_to_vertex(p, i) <= 0.2;
        inside = inside && p[i] > 0.0;
      }
      CHECK((near || inside));
    }
    const auto serial = run_ensemble(cfg, 123, 100, 1);
    for (std::size_t i = 0; i < 100; ++i) CHECK(serial[i].states == runs[i].states);
  }

  SUBCASE("inhomogeneous schedule") {
    DynamicsConfig inh;
    inh.variant = ModelVariant::inhomogeneous;
    inh.alpha = 0.01;
    inh.w0 = Vector{1.0, 1.0};
    inh.schedule = {{0, {9.0, 1.0}}, {10, {1.0, 2.0}}};
    inh.iterations = 20;
    inh.record_samples = true;
    inh.record_weights = true;
    const auto rec = run_trajectory(inh, 4);
    CHECK(rec.states[0][0] == doctest::Approx(0.9));
    for (std::size_t k = 0; k < 20; ++k) {
      const IntensityVector lam(k + 1 >= 10 ? Vector{1.0, 2.0} : Vector{9.0, 1.0});
      const auto [w, p] = step_inhomogeneous(rec.weights[k], lam, inh.alpha, rec.samples[k].combined);
      CHECK(sup_diff(p.values(), rec.states[k + 1].values()) < 1e-15);
      CHECK(sup_diff(w.values(), rec.weights[k + 1].values()) < 1e-15);
    }
  }
}

TEST_CASE("configuration errors list every violation") {
  DynamicsConfig cfg;
  cfg.alpha = 0.7;
  cfg.stride = 0;
  try {
    cfg.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.violations().size() >= 3);
  }
  DynamicsConfig corr;
  corr.variant = ModelVariant::correlated;
  corr.p0 = Vector{0.5, 0.5};
  CHECK_THROWS_AS(corr.validate(), ConfigError);
  corr.gamma = Matrix{{1.0, 0.1}, {0.1, 1.0}};
  CHECK_NOTHROW(corr.validate());
}
