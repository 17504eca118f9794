#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "simplex_stdp/errors.hpp"
#include "simplex_stdp/spiking.hpp"
#include "test_support.hpp"

using namespace simplex_stdp;

namespace {

MembraneConfig membrane(Vector lambda, Vector w, double threshold, double horizon) {
  MembraneConfig c;
  c.intensities = IntensityVector(std::move(lambda));
  c.weights = WeightVector(std::move(w));
  c.threshold = threshold;
  c.horizon = horizon;
  return c;
}

Vector trigger_frequencies(const PostsynapticRecord& rec, std::size_t d) {
  Vector f(d, 0.0);
  for (std::size_t id : rec.trigger_ids) f[id] += 1.0;
  for (double& x : f) x /= static_cast<double>(rec.count());
  return f;
}

}  // namespace

TEST_CASE("Poisson trains") {
  Rng rng(1);
  const auto trains = gen_poisson_trains(IntensityVector({1.0, 4.0}), 1e5, rng);
  REQUIRE(trains.size() == 2);
  const double n = static_cast<double>(trains[0].times.size());
  CHECK(std::abs(n - 1e5) <= 3.0 * std::sqrt(1e5));
  for (const auto& t : trains) {
    for (std::size_t i = 1; i < t.times.size(); ++i) CHECK(t.times[i] > t.times[i - 1]);
    const double mean_gap = t.times.back() / static_cast<double>(t.times.size());
    const double rate = t.neuron_id == 0 ? 1.0 : 4.0;
    CHECK(std::abs(mean_gap * rate - 1.0) < 0.01);
    CHECK(t.times.front() >= 0.0);
    CHECK(t.times.back() <= 1e5);
  }
  const auto empty = gen_poisson_trains(IntensityVector({1.0, 2.0}), 0.0, rng);
  for (const auto& t : empty) CHECK(t.times.empty());
}

TEST_CASE("membrane potential") {
  SUBCASE("single strong input triggers on every spike") {
    Rng rng(2);
    const auto cfg = membrane({3.0}, {5.0}, 5.0, 100.0);
    const auto trains = gen_poisson_trains(cfg.intensities, 100.0, rng);
    const auto rec = simulate_membrane(cfg, trains);
    REQUIRE(rec.count() == trains[0].times.size());
    for (std::size_t k = 0; k < rec.count(); ++k) CHECK(rec.spike_times[k + 1] == trains[0].times[k]);
  }

  SUBCASE("invariants and exact decay") {
    Rng rng(3);
    const auto cfg = membrane({10.0, 7.5, 5.0}, {1.0, 1.0, 1.0}, 30.0, 200.0);
    const auto trains = gen_poisson_trains(cfg.intensities, cfg.horizon, rng);
    const auto rec = simulate_membrane(cfg, trains, true);
    CHECK(rec.count() > 10);
    for (double v : rec.pre_reset_potentials) CHECK(v >= cfg.threshold);
    for (std::size_t k = 1; k < rec.spike_times.size(); ++k) CHECK(rec.spike_times[k] > rec.spike_times[k - 1]);

    std::vector<std::pair<double, std::size_t>> events;
    for (const auto& t : trains) {
      for (double x : t.times) events.emplace_back(x, t.neuron_id);
    }
    std::sort(events.begin(), events.end());
    REQUIRE(events.size() == rec.potential_samples.size());
    double y = 0.0;
    double last = 0.0;
    std::size_t spikes = 0;
    for (std::size_t e = 0; e < events.size(); ++e) {
      const auto [t, id] = rec.potential_samples[e];
      CHECK(t == events[e].first);
      const double expected = y * std::exp(-(t - last)) + cfg.weights[events[e].second];
      if (expected >= cfg.threshold) {
        CHECK(rec.potential_samples[e].second == 0.0);
        CHECK(rec.pre_reset_potentials[spikes] == expected);
        ++spikes;
        y = 0.0;
      } else {
        CHECK(rec.potential_samples[e].second == expected);
        CHECK(expected >= 0.0);
        CHECK(expected < cfg.threshold);
        y = expected;
      }
      last = t;
    }
    CHECK(spikes == rec.count());
  }

  SUBCASE("malformed trains") {
    const auto cfg = membrane({1.0, 1.0}, {1.0, 1.0}, 3.0, 10.0);
    CHECK_THROWS_AS(simulate_membrane(cfg, {SpikeTrain{5, {1.0}}}), InvalidInput);
    CHECK_THROWS_AS(simulate_membrane(cfg, {SpikeTrain{0, {2.0, 1.0}}}), InvalidInput);
    CHECK_THROWS_AS(membrane({1.0}, {1.0, 1.0}, 3.0, 1.0).validate(), ConfigError);
    CHECK_THROWS_AS(membrane({1.0}, {1.0}, 0.0, 1.0).validate(), ConfigError);
  }
}

TEST_CASE("trigger frequencies") {
  SUBCASE("small weights approximate lambda w / lambda^T w") {
    Rng rng(4);
    const auto cfg = membrane({10.0, 7.5, 5.0}, {1.0, 1.0, 1.0}, 30.0, 1e12);
    const auto rec = simulate_membrane_streaming(cfg, 100000, rng);
    REQUIRE(rec.count() == 100000);
    const Vector f = trigger_frequencies(rec, 3);
    CHECK(std::abs(f[0] - 4.0 / 9) < 0.01);
    CHECK(std::abs(f[1] - 1.0 / 3) < 0.01);
    CHECK(std::abs(f[2] - 2.0 / 9) < 0.01);
  }

  SUBCASE("equal weights give lambda / sum lambda for any threshold") {
    for (double s : {1.0, 10.0, 25.0}) {
      Rng rng(5);
      const auto cfg = membrane({10.0, 7.5, 5.0}, {4.0, 4.0, 4.0}, s, 1e12);
      const auto rec = simulate_membrane_streaming(cfg, 100000, rng);
      const Vector f = trigger_frequencies(rec, 3);
      CHECK(std::abs(f[0] - 4.0 / 9) < 0.01);
      CHECK(std::abs(f[1] - 1.0 / 3) < 0.01);
      CHECK(std::abs(f[2] - 2.0 / 9) < 0.01);
    }
  }
}

TEST_CASE("STDP increments") {
  CHECK(stdp_update(2.0, Vector{}, 0.0, 1.0, 0.1) == 2.0);
  CHECK(stdp_increment(Vector{0.75}, 0.5, 1.0) == 0.0);
  CHECK(stdp_update(2.0, Vector{1.5}, 1.0, 2.0, 0.3) == 2.0);

  // Dyadic spike times make the reflection tau -> t_prev + t_next - tau exact.
  Rng rng(6);
  auto dyadic = [&](std::uint64_t lo, std::uint64_t span) {
    return static_cast<double>(lo + rng.next_u64() % span) / 1024.0;
  };
  for (int n = 0; n < 1000; ++n) {
    const double a = dyadic(0, 4096);
    const double b = a + dyadic(1, 3072);
    Vector spikes;
    Vector mirrored;
    for (int i = 0; i < 5; ++i) {
      const double tau = a + (b - a) * static_cast<double>(1 + rng.next_u64() % 63) / 64.0;
      spikes.push_back(tau);
      mirrored.push_back(a + b - tau);
    }
    std::sort(spikes.begin(), spikes.end());
    std::sort(mirrored.begin(), mirrored.end());
    const double x = stdp_increment(spikes, a, b);
    const double y = stdp_increment(mirrored, a, b);
    CHECK(std::abs(x + y) <= 1e-14);
    for (std::size_t i = 0; i < spikes.size(); ++i) {
      CHECK(stdp_increment(Vector{spikes[i]}, a, b) == -stdp_increment(Vector{a + b - spikes[i]}, a, b));
    }
  }
  CHECK_THROWS_AS(stdp_increment(Vector{0.5}, 1.0, 2.0), InvalidInput);
  CHECK_THROWS_AS(stdp_increment(Vector{1.5}, 2.0, 1.0), InvalidInput);
  CHECK_THROWS_AS(stdp_increment(Vector{}, -1.0, 1.0), InvalidInput);
}

TEST_CASE("centered noise check") {
  Rng rng(7);
  const auto s = centered_noise_check(0.0, 1.0, 1000000, rng);
  CHECK(std::abs(s.mean) < 0.002);
  CHECK(std::abs(s.mean) <= 4.0 * s.stddev / std::sqrt(1e6));
  CHECK(s.min >= -1.0);
  CHECK(s.max <= 1.0);
  const auto tiny = centered_noise_check(3.0, 3.0 + 1e-9, 1000, rng);
  CHECK(std::abs(tiny.min) < 1e-8);
  CHECK(std::abs(tiny.max) < 1e-8);
  const auto wide = centered_noise_check(0.0, 20.0, 100000, rng);
  CHECK(wide.min >= -1.0);
  CHECK(wide.max <= 1.0);
  CHECK_THROWS_AS(centered_noise_check(1.0, 1.0, 10, rng), InvalidInput);
}

TEST_CASE("spiking learning") {
  SUBCASE("zero rate keeps weights") {
    SpikingLearningConfig cfg;
    cfg.membrane = membrane({10.0, 7.5, 5.0}, {1.0, 1.0, 1.0}, 30.0, 1e12);
    cfg.alpha = 0.0;
    cfg.iterations = 2000;
    const auto run = spiking_learning_run(cfg, 8);
    CHECK(run.windows.size() == 2000);
    for (const auto& w : run.record.weights) CHECK(w == cfg.membrane.weights);
    for (const auto& p : run.record.states) CHECK(p == run.record.states.front());
  }

  SUBCASE("window diagnostics add up") {
    SpikingLearningConfig cfg;
    cfg.membrane = membrane({10.0, 7.5, 5.0}, {1.0, 1.0, 1.0}, 30.0, 1e12);
    cfg.alpha = 0.01;
    cfg.iterations = 300;
    const auto run = spiking_learning_run(cfg, 9);
    REQUIRE(run.record.weights.size() == 301);
    for (std::size_t k = 0; k < run.windows.size(); ++k) {
      const auto& w = run.windows[k];
      CHECK(w.trigger_term == doctest::Approx(1.0 - std::exp(w.t_prev - w.t_next)).epsilon(1e-14));
      for (std::size_t j = 0; j < 3; ++j) {
        const double total = w.noise_terms[j] + (j == w.trigger_id ? w.trigger_term : 0.0);
        const double expected = run.record.weights[k][j] * (1.0 + cfg.alpha * total);
        CHECK(run.record.weights[k + 1][j] == doctest::Approx(expected).epsilon(1e-13));
      }
    }
  }

  SUBCASE("indicator term matches its moments") {
    // Equal weights make the trigger identity independent of the window length.
    SpikingLearningConfig cfg;
    cfg.membrane = membrane({10.0, 7.5, 5.0}, {4.0, 4.0, 4.0}, 10.0, 1e12);
    cfg.alpha = 0.0;
    cfg.iterations = 100000;
    const auto run = spiking_learning_run(cfg, 10);
    const double n = static_cast<double>(run.windows.size());
    double decay = 0.0;
    for (const auto& w : run.windows) decay += w.trigger_term;
    decay /= n;
    const Vector p{4.0 / 9, 1.0 / 3, 2.0 / 9};
    for (std::size_t j = 0; j < 3; ++j) {
      double mean = 0.0;
      double sq = 0.0;
      for (const auto& w : run.windows) {
        const double x = w.trigger_id == j ? w.trigger_term : 0.0;
        mean += x;
        sq += x * x;
      }
      mean /= n;
      const double sd = std::sqrt(sq / n - mean * mean);
      CHECK(std::abs(mean - p[j] * decay) <= 4.0 * sd / std::sqrt(n));
    }
  }

  SUBCASE("ensemble drift has the sign of the abstract rule") {
    SpikingLearningConfig cfg;
    cfg.membrane = membrane({10.0, 7.5, 5.0}, {1.0, 1.0, 1.0}, 30.0, 1e12);
    cfg.alpha = 0.01;
    cfg.iterations = 100;
    const Vector p0{4.0 / 9, 1.0 / 3, 2.0 / 9};
    const double s2 = sum_squares(p0);
    Vector drift(3, 0.0);
    const int runs = 400;
    for (int r = 0; r < runs; ++r) {
      const auto run = spiking_learning_run(cfg, derive_seed(11, static_cast<std::uint64_t>(r)));
      for (std::size_t j = 0; j < 3; ++j) drift[j] += run.record.states.back()[j] - p0[j];
    }
    for (std::size_t j = 0; j < 3; ++j) {
      const double abstract = p0[j] * (p0[j] - s2);
      CHECK(drift[j] * abstract > 0.0);
    }
  }

  SUBCASE("rate too large") {
    SpikingLearningConfig cfg;
    cfg.membrane = membrane({10.0, 7.5, 5.0}, {1.0, 1.0, 1.0}, 30.0, 1e12);
    cfg.alpha = 50.0;
    cfg.iterations = 1000;
    CHECK_THROWS_AS(spiking_learning_run(cfg, 1), PreconditionError);
  }
}

TEST_CASE("spiking exports") {
  const auto dir = test_support::fresh_dir("spiking");
  Rng rng(12);
  const auto cfg = membrane({3.0, 2.0}, {2.0, 2.0}, 3.0, 5.0);
  const auto trains = gen_poisson_trains(cfg.intensities, cfg.horizon, rng);
  const auto rec = simulate_membrane(cfg, trains, true);
  write_spike_trains_csv(dir / "trains.csv", trains);
  write_postsynaptic_csv(dir / "post.csv", rec);
  write_potential_csv(dir / "potential.csv", rec);
  CHECK(test_support::read_file(dir / "trains.csv").rfind("neuron_id,time\n", 0) == 0);
  CHECK(test_support::read_file(dir / "post.csv").rfind("k,t_k,trigger_id\n", 0) == 0);
  CHECK(test_support::read_file(dir / "potential.csv").rfind("t,Y\n", 0) == 0);
}
