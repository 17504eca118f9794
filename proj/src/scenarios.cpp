#include "simplex_stdp/scenarios.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "simplex_stdp/ensemble.hpp"
#include "simplex_stdp/errors.hpp"
#include "simplex_stdp/flow.hpp"
#include "simplex_stdp/io.hpp"
#include "simplex_stdp/mirror.hpp"
#include "simplex_stdp/multi_output.hpp"
#include "simplex_stdp/spiking.hpp"
#include "simplex_stdp/theory.hpp"
#include "simplex_stdp/version.hpp"

namespace simplex_stdp {

using json = nlohmann::json;
namespace fs = std::filesystem;

BarycentricPoint barycentric(std::span<const double> p) {
  if (p.size() != 3) throw InvalidInput("barycentric map: only d = 3 has a planar embedding");
  return {p[1] + 0.5 * p[2], 0.5 * std::numbers::sqrt3 * p[2]};
}

std::vector<LandscapeSample> landscape_grid(std::size_t d, double grid_step, LandscapeKind kind,
                                            const std::optional<CorrelationMatrix>& gamma) {
  if (d != 3) throw InvalidInput("landscape: only d = 3 is supported");
  if (!(grid_step > 0.0 && grid_step < 0.5)) throw InvalidInput("landscape: grid step must lie in (0, 0.5)");
  if (kind == LandscapeKind::shahshahani && (!gamma || gamma->dim() != 3)) {
    throw InvalidInput("landscape: the Shahshahani loss needs a 3x3 correlation matrix");
  }
  const auto n = static_cast<std::size_t>(std::llround(1.0 / grid_step));
  const double nn = static_cast<double>(n);
  std::vector<LandscapeSample> out;
  out.reserve((n + 1) * (n + 2) / 2);
  for (std::size_t i = 0; i <= n; ++i) {
    for (std::size_t j = 0; i + j <= n; ++j) {
      LandscapeSample s;
      s.p = {static_cast<double>(n - i - j) / nn, static_cast<double>(i) / nn, static_cast<double>(j) / nn};
      s.xy = barycentric(s.p);
      if (kind == LandscapeKind::cubic_quartic) {
        s.value = loss(s.p);
      } else {
        s.value = -0.5 * dot(s.p, gamma->apply(s.p));
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

void emit_landscape(const fs::path& path, std::size_t d, double grid_step, LandscapeKind kind,
                    const std::optional<CorrelationMatrix>& gamma) {
  const auto grid = landscape_grid(d, grid_step, kind, gamma);
  CsvWriter csv(path, {"x", "y", "loss"});
  for (const auto& s : grid) {
    csv.cell(s.xy.x).cell(s.xy.y).cell(s.value);
    csv.end_row();
  }
  csv.close();
}

namespace {

const json& defaults_table() {
  static const json table = [] {
    json t;
    const json fig2_states = {{0.45, 0.35, 0.2}, {0.25, 0.4, 0.35}, {0.3, 0.3, 0.4}};
    const json gamma_bottom = {{1.0, 0.1, 0.1}, {0.1, 1.0, 0.0}, {0.1, 0.0, 1.0}};
    t["fig2-trajectories"] = {{"alpha", 0.01},         {"iterations", 2000}, {"initial_states", fig2_states},
                              {"noise_half_width", 1.0}, {"q_bound", 2.0},     {"grid_step", 0.01}};
    t["fig2-ensemble"] = {{"alpha", 0.01},         {"iterations", 2000}, {"trajectories", 100},
                          {"p0", {0.3, 0.3, 0.4}}, {"stride", 10},       {"noise_half_width", 1.0},
                          {"q_bound", 2.0}};
    t["fig3-algorithm1"] = {{"lambda", {10.0, 7.5, 5.0}},
                            {"base_rate", 1e-3},
                            {"rate_profile", {1.0, 0.75, 0.5}},
                            {"iterations", 40000},
                            {"trajectories", 100},
                            {"record_stride", 100},
                            {"initial_weight", 1.0},
                            {"noise_half_width", 1.0},
                            {"q_bound", 2.0}};
    t["correlated-figure"] = {{"gamma", gamma_bottom},   {"alpha", 0.01},         {"iterations", 2000},
                              {"initial_states", fig2_states}, {"ensemble_p0", {0.3, 0.3, 0.4}},
                              {"trajectories", 100},     {"stride", 10},          {"grid_step", 0.01},
                              {"noise_half_width", 1.0}, {"q_bound", 2.0}};
    t["priming"] = {{"lambda_a", {9.0, 1.0}},  {"lambda_b", {1.0, 2.0}},  {"w0", {1.0, 1.0}},
                    {"epsilon", 0.25},         {"alpha", nullptr},        {"trajectories", 100},
                    {"total_k", 400000},       {"k_star_values", nullptr}, {"noise_half_width", 1.0},
                    {"q_bound", 2.0}};
    t["thm22-verify"] = {{"p0", {0.9, 0.1}},
                         {"epsilon", 0.5},
                         {"q_bound", 2.0},
                         {"noise_half_width", 1.0},
                         {"alpha", nullptr},
                         {"iterations", 200000},
                         {"trajectories", 200},
                         {"checkpoints", {0, 50000, 100000, 150000, 200000}},
                         {"theta_slack", 0.05},
                         {"bound_slack", 0.1}};
    t["thm23-verify"] = {{"dims", {2, 3, 5}}, {"samples", 100}, {"min_gap", 0.05},
                         {"horizon", 10.0},  {"dt", 1e-3},      {"tolerance", 1e-12}};
    t["thm-corr-verify"] = {{"p0", {0.8, 0.1, 0.1}},
                            {"gamma", gamma_bottom},
                            {"epsilon", 0.5},
                            {"q_bound", 2.0},
                            {"noise_half_width", 1.0},
                            {"alpha", nullptr},
                            {"iterations", 2500000},
                            {"trajectories", 50},
                            {"checkpoints", nullptr},
                            {"theta_slack", 0.07},
                            {"bound_slack", 0.1}};
    t["alg2-verify"] = {{"lambda", {10.0, 7.5, 5.0}}, {"epsilon", 0.2},     {"delta", 0.25},
                        {"alpha", 1e-3},              {"initial_weight", 1.0}, {"trajectories", 200},
                        {"iterations", nullptr},      {"slack", 0.05},      {"noise_half_width", 1.0},
                        {"q_bound", 2.0}};
    t["spiking-validate"] = {{"lambda", {10.0, 7.5, 5.0}},
                             {"threshold", 30.0},
                             {"small_weight", 1.0},
                             {"equal_weight", 4.0},
                             {"equal_threshold", 10.0},
                             {"events", 100000},
                             {"tolerance", 0.01},
                             {"noise_samples", 1000000},
                             {"noise_window", 1.0},
                             {"trace_horizon", 5.0}};
    t["mirror-compare"] = {{"alphas", {1e-2, 1e-3, 1e-4}}, {"p", {0.5, 0.3, 0.2}}, {"random_points", 100}};
    t["landscape-grid"] = {{"grid_step", 0.005}, {"loss", "cubic-quartic"}, {"gamma", nullptr}};
    return t;
  }();
  return table;
}

bool integral(const json& v) {
  if (v.is_number_integer() || v.is_number_unsigned()) return true;
  if (!v.is_number_float()) return false;
  const double x = v.get<double>();
  return std::isfinite(x) && x == std::floor(x);
}

// Type of an override must match the default; null defaults accept null or numbers/arrays.
std::optional<std::string> type_mismatch(const std::string& key, const json& def, const json& value) {
  auto bad = [&](const char* expected) {
    return std::optional<std::string>(key + ": expected " + expected + ", got " + value.dump());
  };
  if (def.is_null()) {
    if (value.is_null() || value.is_number() || value.is_array()) return std::nullopt;
    return bad("a number, an array or null");
  }
  if (def.is_number_integer() || def.is_number_unsigned()) {
    if (!integral(value) || value.get<double>() < 0.0) return bad("a nonnegative integer");
    return std::nullopt;
  }
  if (def.is_number()) return value.is_number() ? std::nullopt : bad("a number");
  if (def.is_string()) return value.is_string() ? std::nullopt : bad("a string");
  if (def.is_boolean()) return value.is_boolean() ? std::nullopt : bad("a boolean");
  if (def.is_array()) {
    if (!value.is_array()) return bad("an array");
    std::function<bool(const json&)> numeric = [&](const json& x) {
      if (x.is_number()) return true;
      if (!x.is_array()) return false;
      return std::all_of(x.begin(), x.end(), numeric);
    };
    return numeric(value) ? std::nullopt : bad("an array of numbers");
  }
  return std::nullopt;
}

std::size_t get_size(const json& p, const char* key) { return static_cast<std::size_t>(p.at(key).get<double>()); }
double get_real(const json& p, const char* key) { return p.at(key).get<double>(); }
Vector get_vector(const json& p, const char* key) { return p.at(key).get<Vector>(); }

Matrix to_matrix(const json& rows, const char* key) {
  if (!rows.is_array() || rows.empty()) throw InvalidInput(std::string(key) + ": expected a nonempty matrix");
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto m = static_cast<Eigen::Index>(rows.front().size());
  Matrix out(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    const json& row = rows[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != m) {
      throw InvalidInput(std::string(key) + ": rows must have equal length");
    }
    for (Eigen::Index j = 0; j < m; ++j) out(i, j) = row[static_cast<std::size_t>(j)].get<double>();
  }
  return out;
}

std::vector<Vector> get_vectors(const json& p, const char* key) {
  std::vector<Vector> out;
  for (const auto& row : p.at(key)) out.push_back(row.get<Vector>());
  return out;
}

NoiseModel noise_from(const json& p) { return NoiseModel::uniform(get_real(p, "noise_half_width"), get_real(p, "q_bound")); }

struct Context {
  const json& params;
  std::uint64_t seed;
  std::size_t threads;
  fs::path out;
};

struct Outcome {
  std::vector<std::string> files;
  std::vector<std::string> summary;
  std::optional<bool> passed;  // set by verification scenarios
};

void write_json(const Context& ctx, Outcome& o, const std::string& name, const json& j) {
  write_text_file(ctx.out / name, j.dump(2) + "\n");
  o.files.push_back(name);
}

std::string fixed(double x) { return format_double(x); }

void write_path_csv(const fs::path& path, const TrajectoryRecord& rec) {
  const std::size_t d = rec.states.front().dim();
  std::vector<std::string> header{"k"};
  for (auto& h : indexed_header("p", d)) header.push_back(h);
  if (d == 3) {
    header.push_back("x");
    header.push_back("y");
  }
  CsvWriter csv(path, header);
  for (std::size_t r = 0; r < rec.states.size(); ++r) {
    csv.cell(rec.steps[r]).cells(rec.states[r].values());
    if (d == 3) {
      const auto xy = barycentric(rec.states[r]);
      csv.cell(xy.x).cell(xy.y);
    }
    csv.end_row();
  }
  csv.close();
}

std::string file_index(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%zu", i + 1);
  return buf;
}

std::vector<std::size_t> winner_counts(const std::vector<Vector>& finals, std::size_t d) {
  std::vector<std::size_t> counts(d, 0);
  for (const auto& p : finals) ++counts[leading_gap(p).index];
  return counts;
}

void write_final_states(const fs::path& path, const std::vector<Vector>& finals) {
  const std::size_t d = finals.front().size();
  std::vector<std::string> header{"trajectory"};
  for (auto& h : indexed_header("p", d)) header.push_back(h);
  if (d == 3) {
    header.push_back("x");
    header.push_back("y");
  }
  CsvWriter csv(path, header);
  for (std::size_t t = 0; t < finals.size(); ++t) {
    csv.cell(t).cells(finals[t]);
    if (d == 3) {
      const auto xy = barycentric(finals[t]);
      csv.cell(xy.x).cell(xy.y);
    }
    csv.end_row();
  }
  csv.close();
}

Outcome run_fig2_trajectories(const Context& ctx) {
  const json& p = ctx.params;
  Outcome o;
  DynamicsConfig cfg;
  cfg.alpha = get_real(p, "alpha");
  cfg.noise = noise_from(p);
  cfg.iterations = get_size(p, "iterations");
  const auto states = get_vectors(p, "initial_states");
  for (std::size_t i = 0; i < states.size(); ++i) {
    cfg.p0 = states[i];
    const auto rec = run_trajectory(cfg, derive_seed(ctx.seed, i));
    const std::string name = "trajectory_" + file_index(i) + ".csv";
    write_path_csv(ctx.out / name, rec);
    o.files.push_back(name);
    const auto& last = rec.states.back();
    o.summary.push_back("trajectory " + file_index(i) + ": final leader e_" + file_index(leading_gap(last).index) +
                        ", distance " + fixed(l1_distance_to_vertex(last, leading_gap(last).index)));
  }
  if (!states.empty() && states.front().size() == 3) {
    emit_landscape(ctx.out / "landscape.csv", 3, get_real(p, "grid_step"), LandscapeKind::cubic_quartic);
    o.files.push_back("landscape.csv");
  }
  return o;
}

Outcome run_ensemble_scenario(const Context& ctx, DynamicsConfig cfg, const char* p0_key) {
  const json& p = ctx.params;
  Outcome o;
  cfg.alpha = get_real(p, "alpha");
  cfg.noise = noise_from(p);
  cfg.iterations = get_size(p, "iterations");
  cfg.stride = get_size(p, "stride");
  cfg.p0 = get_vector(p, p0_key);
  const std::size_t n = get_size(p, "trajectories");
  const auto records = run_ensemble(cfg, ctx.seed, n, ctx.threads);
  fs::create_directories(ctx.out / "trajectories");
  write_ensemble(ctx.out / "trajectories", records, cfg, ctx.seed);
  for (std::size_t t = 0; t < records.size(); ++t) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "trajectories/trajectory_%04zu.csv", t);
    o.files.emplace_back(buf);
  }
  o.files.push_back("trajectories/manifest.json");
  std::vector<Vector> finals;
  for (const auto& r : records) finals.push_back(r.states.back().values());
  if (!finals.empty()) {
    write_final_states(ctx.out / "final_states.csv", finals);
    o.files.push_back("final_states.csv");
    const auto counts = winner_counts(finals, finals.front().size());
    for (std::size_t i = 0; i < counts.size(); ++i) {
      o.summary.push_back("final leader e_" + file_index(i) + ": " + std::to_string(counts[i]) + " of " +
                          std::to_string(n));
    }
  }
  return o;
}

Outcome run_fig2_ensemble(const Context& ctx) { return run_ensemble_scenario(ctx, DynamicsConfig{}, "p0"); }

Outcome run_correlated_figure(const Context& ctx) {
  const json& p = ctx.params;
  const CorrelationMatrix gamma(to_matrix(p.at("gamma"), "gamma"));
  DynamicsConfig cfg;
  cfg.variant = ModelVariant::correlated;
  cfg.gamma = gamma.matrix();
  Outcome o = run_ensemble_scenario(ctx, cfg, "ensemble_p0");

  cfg.alpha = get_real(p, "alpha");
  cfg.noise = noise_from(p);
  cfg.iterations = get_size(p, "iterations");
  const auto states = get_vectors(p, "initial_states");
  for (std::size_t i = 0; i < states.size(); ++i) {
    cfg.p0 = states[i];
    // Streams after the ensemble's so the two never share a seed.
    const auto rec = run_trajectory(cfg, derive_seed(ctx.seed, get_size(p, "trajectories") + i));
    const std::string name = "trajectory_" + file_index(i) + ".csv";
    write_path_csv(ctx.out / name, rec);
    o.files.push_back(name);
  }
  if (gamma.dim() == 3) {
    emit_landscape(ctx.out / "landscape.csv", 3, get_real(p, "grid_step"), LandscapeKind::shahshahani, gamma);
    o.files.push_back("landscape.csv");
  }
  return o;
}

constexpr const char* kAlgorithm1Reading = "w_j(k+1) = w_j(k) + (dw_j(k) - projection of dw_j(k) onto span{w_1(k),...,w_{j-1}(k)})";
constexpr const char* kAlgorithm2Reading = "w_j(k+1) = w_j(k) * (1 + alpha (B_j(k) + Z_j(k)))";

Outcome run_fig3_algorithm1(const Context& ctx) {
  const json& p = ctx.params;
  Outcome o;
  MultiRunConfig cfg;
  cfg.lambda = get_vector(p, "lambda");
  const double base = get_real(p, "base_rate");
  for (double r : get_vector(p, "rate_profile")) cfg.alphas.push_back(base * r);
  cfg.iterations = get_size(p, "iterations");
  cfg.record_stride = get_size(p, "record_stride");
  cfg.noise = noise_from(p);
  const std::size_t d = cfg.lambda.size();
  if (cfg.alphas.size() != d) throw InvalidInput("rate_profile: needs one entry per input neuron");
  const WeightMatrix w0 = WeightMatrix::Constant(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d),
                                                 get_real(p, "initial_weight"));
  const std::size_t n = get_size(p, "trajectories");

  struct RunSummary {
    std::vector<std::size_t> steps;
    Vector errors;
    std::size_t clips = 0;
    Algorithm1Result first;
  };
  const auto runs = parallel_map(n, ctx.threads, [&](std::size_t t) {
    MultiRunConfig c = cfg;
    c.seed = derive_seed(ctx.seed, t);
    auto res = algorithm1_run(w0, c);
    RunSummary s;
    s.steps = res.steps;
    for (const auto& pm : res.probabilities) s.errors.push_back(frobenius_half_error(pm));
    s.clips = res.clips.size();
    if (t == 0) s.first = std::move(res);
    return s;
  });

  if (n > 0) {
    write_multi_run_csv(ctx.out / "algorithm1_trajectory.csv", runs.front().first);
    o.files.push_back("algorithm1_trajectory.csv");
    CsvWriter err(ctx.out / "frobenius_error.csv", {"k", "mean_error"});
    for (std::size_t r = 0; r < runs.front().steps.size(); ++r) {
      double mean = 0.0;
      for (const auto& s : runs) mean += s.errors[r];
      err.cell(runs.front().steps[r]).cell(mean / static_cast<double>(n));
      err.end_row();
    }
    err.close();
    o.files.push_back("frobenius_error.csv");
  }
  CsvWriter sum(ctx.out / "ensemble_summary.csv", {"seed", "final_frobenius_half_error", "success", "clips"});
  double mean = 0.0;
  std::size_t near_integer = 0;
  std::size_t clips = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double e = runs[t].errors.back();
    sum.cell(t).cell(e).cell(e < 1e-12 ? 1 : 0).cell(runs[t].clips);
    sum.end_row();
    mean += e;
    clips += runs[t].clips;
    if (std::abs(e - std::round(e)) <= 0.15) ++near_integer;
  }
  sum.close();
  o.files.push_back("ensemble_summary.csv");
  if (n > 0) mean /= static_cast<double>(n);
  json info = {{"update_reading", kAlgorithm1Reading},
               {"mean_final_error", mean},
               {"fraction_near_integer", n ? static_cast<double>(near_integer) / static_cast<double>(n) : 0.0},
               {"clip_events", clips}};
  write_json(ctx, o, "summary.json", info);
  o.summary.push_back("update reading: " + std::string(kAlgorithm1Reading));
  o.summary.push_back("mean final Frobenius half error: " + fixed(mean));
  o.summary.push_back("clip events: " + std::to_string(clips));
  return o;
}

Outcome run_priming(const Context& ctx) {
  const json& p = ctx.params;
  Outcome o;
  const IntensityVector la(get_vector(p, "lambda_a"));
  const IntensityVector lb(get_vector(p, "lambda_b"));
  const WeightVector w0(get_vector(p, "w0"));
  PrimingParams params;
  params.epsilon = get_real(p, "epsilon");
  params.noise = noise_from(p);
  if (p.at("alpha").is_number()) params.alpha = get_real(p, "alpha");
  params.trajectories = get_size(p, "trajectories");
  params.master_seed = ctx.seed;
  params.threads = ctx.threads;
  const std::size_t threshold = priming_threshold(la, lb, w0, params);
  std::vector<std::size_t> k_stars{0, threshold};
  if (p.at("k_star_values").is_array()) {
    k_stars.clear();
    for (const auto& v : p.at("k_star_values")) {
      if (!integral(v) || v.get<double>() < 0.0) throw InvalidInput("k_star_values: entries must be nonnegative integers");
      k_stars.push_back(static_cast<std::size_t>(v.get<double>()));
    }
  }
  const std::size_t total = get_size(p, "total_k");
  const std::size_t d = w0.dim();

  std::vector<std::string> header{"k_star", "fraction_near_first", "fraction_near_last"};
  for (auto& h : indexed_header("leader", d)) header.push_back(h);
  CsvWriter csv(ctx.out / "priming.csv", header);
  std::vector<std::string> fheader{"k_star", "trajectory"};
  for (auto& h : indexed_header("p", d)) fheader.push_back(h);
  CsvWriter finals(ctx.out / "final_states.csv", fheader);
  json runs = json::array();
  double alpha = 0.0;
  double delta = 0.0;
  for (std::size_t ks : k_stars) {
    const auto out = priming_experiment(la, lb, w0, ks, total, params);
    alpha = out.alpha;
    delta = out.delta;
    csv.cell(ks).cell(out.fraction_near_first).cell(out.fraction_near_last);
    for (auto c : out.leader_counts) csv.cell(c);
    csv.end_row();
    for (std::size_t t = 0; t < out.final_states.size(); ++t) {
      finals.cell(ks).cell(t).cells(out.final_states[t]);
      finals.end_row();
    }
    runs.push_back({{"k_star", ks}, {"fraction_near_first", out.fraction_near_first},
                    {"fraction_near_last", out.fraction_near_last}, {"leader_counts", out.leader_counts}});
    o.summary.push_back("k_star " + std::to_string(ks) + ": near e_1 " + fixed(out.fraction_near_first) +
                        ", near e_d " + fixed(out.fraction_near_last));
  }
  csv.close();
  finals.close();
  o.files.push_back("priming.csv");
  o.files.push_back("final_states.csv");
  json info = {{"alpha", alpha}, {"delta", delta}, {"threshold_k_star", threshold}, {"total_k", total},
               {"epsilon", params.epsilon}, {"frequency_floor", 1.0 - 2.0 * params.epsilon - 0.05}, {"runs", runs}};
  write_json(ctx, o, "summary.json", info);
  o.summary.insert(o.summary.begin(), "K* = " + std::to_string(threshold) + ", delta = " + fixed(delta) +
                                          ", alpha = " + fixed(alpha));
  return o;
}

VerificationSetup setup_from(const Context& ctx) {
  const json& p = ctx.params;
  VerificationSetup s;
  s.iterations = get_size(p, "iterations");
  s.trajectories = get_size(p, "trajectories");
  s.master_seed = ctx.seed;
  s.threads = ctx.threads;
  s.noise = noise_from(p);
  s.theta_slack = get_real(p, "theta_slack");
  s.bound_slack = get_real(p, "bound_slack");
  if (p.at("checkpoints").is_array()) {
    for (const auto& v : p.at("checkpoints")) {
      if (!integral(v) || v.get<double>() < 0.0) throw InvalidInput("checkpoints: entries must be nonnegative integers");
      s.checkpoints.push_back(static_cast<std::size_t>(v.get<double>()));
    }
  }
  return s;
}

void finish_verification(const Context& ctx, Outcome& o, const VerificationReport& r, json extra) {
  json j = json::parse(r.to_json());
  for (auto& [k, v] : extra.items()) j[k] = v;
  j["passed"] = r.violations.empty();
  write_json(ctx, o, "report.json", j);
  CsvWriter csv(ctx.out / "bound_checkpoints.csv", {"k", "empirical", "bound"});
  for (const auto& c : r.bound_checkpoints) {
    csv.cell(c.k).cell(c.empirical).cell(c.bound);
    csv.end_row();
  }
  csv.close();
  o.files.push_back("bound_checkpoints.csv");
  o.passed = r.violations.empty();
  o.summary.push_back("empirical P(Theta-hat) = " + fixed(r.empirical_theta_probability) + " over " +
                      std::to_string(r.trajectories) + " trajectories, horizon " + std::to_string(r.horizon));
  o.summary.push_back("inclusion violations: " + std::to_string(r.inclusion_violations));
  for (const auto& v : r.violations) o.summary.push_back("violation: " + v);
}

Outcome run_thm22_verify(const Context& ctx) {
  const json& p = ctx.params;
  Outcome o;
  const Vector p0 = get_vector(p, "p0");
  TheoremParams tp = TheoremParams::from_initial(p0, get_real(p, "epsilon"), get_real(p, "q_bound"));
  tp.validate();
  tp.alpha = p.at("alpha").is_number() ? get_real(p, "alpha") : max_alpha(tp);
  const auto report = verify_theorem(p0, tp, setup_from(ctx));
  finish_verification(ctx, o, report, {{"alpha", tp.alpha}, {"max_alpha", max_alpha(tp)}});
  return o;
}

Outcome run_thm_corr_verify(const Context& ctx) {
  const json& p = ctx.params;
  Outcome o;
  const Vector p0 = get_vector(p, "p0");
  const CorrelationMatrix gamma(to_matrix(p.at("gamma"), "gamma"));
  CorrTheoremParams cp = corr_params(p0, gamma, get_real(p, "epsilon"), get_real(p, "q_bound"));
  if (!cp.valid) throw PreconditionError("correlated theorem: Delta_p and Delta_Gamma must be positive");
  cp.base.alpha = p.at("alpha").is_number() ? get_real(p, "alpha") : max_alpha_corr(cp);
  const auto report = verify_theorem_corr(p0, gamma, cp, setup_from(ctx));
  finish_verification(ctx, o, report,
                      {{"alpha", cp.base.alpha},
                       {"max_alpha_corr", max_alpha_corr(cp)},
                       {"delta_p", cp.delta_p},
                       {"delta_gamma", cp.delta_gamma},
                       {"nu", cp.nu},
                       {"c_star", cp.c_star},
                       {"gamma_row_norm", cp.gamma_row_norm}});
  return o;
}

Outcome run_thm23_verify(const Context& ctx) {
  const json& p = ctx.params;
  Outcome o;
  std::vector<std::size_t> dims;
  for (const auto& v : p.at("dims")) {
    if (!integral(v) || v.get<double>() < 2.0) throw InvalidInput("dims: entries must be integers >= 2");
    dims.push_back(static_cast<std::size_t>(v.get<double>()));
  }
  if (dims.empty()) throw InvalidInput("dims: must not be empty");
  const std::size_t samples = get_size(p, "samples");
  const double min_gap = get_real(p, "min_gap");
  if (!(min_gap > 0.0 && min_gap < 1.0)) throw InvalidInput("min_gap: must lie in (0, 1)");
  const double horizon = get_real(p, "horizon");
  const double dt = get_real(p, "dt");
  const double tol = get_real(p, "tolerance");

  struct Sample {
    std::size_t d = 0;
    double gap = 0.0;
    double max_ratio = 0.0;
    std::size_t violations = 0;
    std::size_t checked = 0;
  };
  const auto results = parallel_map(samples, ctx.threads, [&](std::size_t i) {
    Sample s;
    s.d = dims[i % dims.size()];
    Rng rng(derive_seed(ctx.seed, i));
    Vector p0(s.d);
    do {
      double total = 0.0;
      for (double& x : p0) total += (x = rng.exponential(1.0));
      for (double& x : p0) x /= total;
      std::sort(p0.begin(), p0.end(), std::greater<>());
    } while (first_coordinate_gap(p0) < min_gap);
    s.gap = first_coordinate_gap(p0);
    FlowSpec spec;
    spec.p0 = p0;
    spec.horizon = horizon;
    spec.dt = dt;
    const auto traj = integrate(spec);
    for (std::size_t r = 0; r < traj.states.size(); ++r) {
      const double dist = l1_distance_to_vertex(traj.states[r], 0);
      const double b = flow_bound(p0, traj.times[r]);
      ++s.checked;
      if (dist > b + tol) ++s.violations;
      if (b > 0.0) s.max_ratio = std::max(s.max_ratio, dist / b);
    }
    return s;
  });

  CsvWriter csv(ctx.out / "samples.csv", {"sample", "d", "delta", "max_ratio", "violations"});
  std::size_t violations = 0;
  std::size_t checked = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& s = results[i];
    csv.cell(i).cell(s.d).cell(s.gap).cell(s.max_ratio).cell(s.violations);
    csv.end_row();
    violations += s.violations;
    checked += s.checked;
    worst = std::max(worst, s.max_ratio);
  }
  csv.close();
  o.files.push_back("samples.csv");
  o.passed = violations == 0;
  json report = {{"theorem", "gradient flow bound"}, {"samples", samples},  {"checked_points", checked},
                 {"violations", violations},          {"max_ratio", worst}, {"tolerance", tol},
                 {"passed", violations == 0}};
  write_json(ctx, o, "report.json", report);
  o.summary.push_back("checked " + std::to_string(checked) + " points, violations " + std::to_string(violations) +
                      ", max distance/bound " + fixed(worst));
  return o;
}

Outcome run_alg2_verify(const Context& ctx) {
  const json& p = ctx.params;
  Outcome o;
  MultiRunConfig cfg;
  cfg.lambda = get_vector(p, "lambda");
  cfg.alphas = {get_real(p, "alpha")};
  cfg.noise = noise_from(p);
  if (p.at("iterations").is_number()) {
    if (!integral(p.at("iterations"))) throw InvalidInput("iterations: must be an integer");
    cfg.iterations = get_size(p, "iterations");
  }
  Algorithm2Params ap;
  ap.epsilon = get_real(p, "epsilon");
  ap.delta = get_real(p, "delta");
  const std::size_t d = cfg.lambda.size();
  const WeightMatrix w0 = WeightMatrix::Constant(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d),
                                                 get_real(p, "initial_weight"));
  const std::size_t n = get_size(p, "trajectories");
  const auto runs = parallel_map(n, ctx.threads, [&](std::size_t t) {
    MultiRunConfig c = cfg;
    c.seed = derive_seed(ctx.seed, t);
    return algorithm2_run(w0, c, ap);
  });
  CsvWriter csv(ctx.out / "ensemble_summary.csv", {"seed", "final_frobenius_half_error", "success"});
  std::size_t successes = 0;
  for (std::size_t t = 0; t < n; ++t) {
    csv.cell(t).cell(frobenius_half_error(runs[t].projections)).cell(runs[t].success ? 1 : 0);
    csv.end_row();
    successes += runs[t].success ? 1 : 0;
  }
  csv.close();
  o.files.push_back("ensemble_summary.csv");
  const double rate = n ? static_cast<double>(successes) / static_cast<double>(n) : 0.0;
  const double floor = std::pow(1.0 - ap.epsilon, static_cast<double>(d)) - get_real(p, "slack");
  o.passed = rate >= floor;
  const std::size_t k = n ? runs.front().iterations : 0;
  const double gap = n ? runs.front().gap : 0.0;
  json report = {{"theorem", "sequential alignment"},
                 {"update_reading", kAlgorithm2Reading},
                 {"iterations_per_neuron", k},
                 {"gap", gap},
                 {"trajectories", n},
                 {"successes", successes},
                 {"success_probability", rate},
                 {"floor", floor},
                 {"passed", *o.passed}};
  write_json(ctx, o, "report.json", report);
  o.summary.push_back("update reading: " + std::string(kAlgorithm2Reading));
  o.summary.push_back("K = " + std::to_string(k) + ", success " + std::to_string(successes) + "/" +
                      std::to_string(n) + " (floor " + fixed(floor) + ")");
  return o;
}

Outcome run_spiking_validate(const Context& ctx) {
  const json& p = ctx.params;
  Outcome o;
  const IntensityVector lambda(get_vector(p, "lambda"));
  const std::size_t d = lambda.dim();
  const std::size_t events = get_size(p, "events");
  const double tol = get_real(p, "tolerance");

  struct Regime {
    std::string name;
    double weight;
    double threshold;
  };
  const std::vector<Regime> regimes{{"small-weight", get_real(p, "small_weight"), get_real(p, "threshold")},
                                    {"equal-weight", get_real(p, "equal_weight"), get_real(p, "equal_threshold")}};
  double total = 0.0;
  for (double x : lambda.values()) total += x;

  CsvWriter csv(ctx.out / "trigger_frequencies.csv", {"regime", "neuron_id", "empirical", "predicted"});
  json regimes_json = json::array();
  bool ok = true;
  for (std::size_t r = 0; r < regimes.size(); ++r) {
    MembraneConfig mc;
    mc.threshold = regimes[r].threshold;
    mc.intensities = lambda;
    mc.weights = WeightVector(Vector(d, regimes[r].weight));
    mc.horizon = std::numeric_limits<double>::infinity();
    Rng rng(derive_seed(ctx.seed, r));
    const auto rec = simulate_membrane_streaming(mc, events, rng);
    std::vector<std::size_t> counts(d, 0);
    for (auto id : rec.trigger_ids) ++counts[id];
    double worst = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double emp = rec.count() ? static_cast<double>(counts[i]) / static_cast<double>(rec.count()) : 0.0;
      const double pred = lambda[i] / total;
      worst = std::max(worst, std::abs(emp - pred));
      csv.cell(regimes[r].name).cell(i + 1).cell(emp).cell(pred);
      csv.end_row();
    }
    ok = ok && worst <= tol && rec.count() == events;
    regimes_json.push_back({{"regime", regimes[r].name}, {"weight", regimes[r].weight},
                            {"threshold", regimes[r].threshold}, {"events", rec.count()},
                            {"end_time", rec.spike_times.back()}, {"max_deviation", worst}});
    o.summary.push_back(regimes[r].name + ": max trigger-frequency deviation " + fixed(worst));
  }
  csv.close();
  o.files.push_back("trigger_frequencies.csv");

  {
    MembraneConfig mc;
    mc.threshold = get_real(p, "threshold");
    mc.intensities = lambda;
    mc.weights = WeightVector(Vector(d, get_real(p, "small_weight")));
    mc.horizon = get_real(p, "trace_horizon");
    Rng rng(derive_seed(ctx.seed, regimes.size()));
    const auto trains = gen_poisson_trains(lambda, mc.horizon, rng);
    const auto rec = simulate_membrane(mc, trains, true);
    write_spike_trains_csv(ctx.out / "spike_trains.csv", trains);
    write_postsynaptic_csv(ctx.out / "postsynaptic.csv", rec);
    write_potential_csv(ctx.out / "potential.csv", rec);
    o.files.insert(o.files.end(), {"spike_trains.csv", "postsynaptic.csv", "potential.csv"});
  }

  Rng noise_rng(derive_seed(ctx.seed, regimes.size() + 1));
  const auto stats = centered_noise_check(0.0, get_real(p, "noise_window"), get_size(p, "noise_samples"), noise_rng);
  const bool noise_ok = stats.min >= -1.0 && stats.max <= 1.0 &&
                        std::abs(stats.mean) <= 4.0 * stats.stddev / std::sqrt(static_cast<double>(stats.samples));
  json info = {{"regimes", regimes_json},
               {"tolerance", tol},
               {"noise", {{"samples", stats.samples}, {"mean", stats.mean}, {"stddev", stats.stddev},
                          {"min", stats.min}, {"max", stats.max}}},
               {"passed", ok && noise_ok}};
  write_json(ctx, o, "summary.json", info);
  o.summary.push_back("centered noise mean " + fixed(stats.mean) + " in [" + fixed(stats.min) + ", " +
                      fixed(stats.max) + "]");
  return o;
}

Outcome run_mirror_compare(const Context& ctx) {
  const json& p = ctx.params;
  Outcome o;
  const Vector alphas = get_vector(p, "alphas");
  const ProbabilityVector base(get_vector(p, "p"));
  const auto reports = order_comparison(base, alphas);
  write_mirror_csv(ctx.out / "mirror_comparison.csv", reports);
  o.files.push_back("mirror_comparison.csv");

  const std::size_t n = get_size(p, "random_points");
  std::vector<std::string> header{"point"};
  for (auto& h : indexed_header("p", base.dim())) header.push_back(h);
  for (std::size_t i = 1; i < alphas.size(); ++i) header.push_back("ratio_" + std::to_string(i));
  CsvWriter csv(ctx.out / "ratios.csv", header);
  Rng rng(ctx.seed);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t t = 0; t < n; ++t) {
    Vector q(base.dim());
    double total = 0.0;
    for (double& x : q) total += (x = rng.exponential(1.0));
    for (double& x : q) x /= total;
    const ProbabilityVector pt(q);
    const auto rs = order_comparison(pt, alphas);
    csv.cell(t).cells(pt.values());
    for (std::size_t i = 1; i < rs.size(); ++i) {
      const double ratio = rs[i - 1].sup_difference / rs[i].sup_difference;
      csv.cell(ratio);
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    }
    csv.end_row();
  }
  csv.close();
  o.files.push_back("ratios.csv");
  for (const auto& r : reports) o.summary.push_back("alpha " + fixed(r.alpha) + ": sup difference " + fixed(r.sup_difference));
  if (n > 0 && alphas.size() > 1) o.summary.push_back("ratio range over random points: [" + fixed(lo) + ", " + fixed(hi) + "]");
  return o;
}

Outcome run_landscape_grid(const Context& ctx) {
  const json& p = ctx.params;
  Outcome o;
  const std::string kind = p.at("loss").get<std::string>();
  std::optional<CorrelationMatrix> gamma;
  LandscapeKind lk;
  if (kind == "cubic-quartic") {
    lk = LandscapeKind::cubic_quartic;
  } else if (kind == "shahshahani") {
    lk = LandscapeKind::shahshahani;
    gamma = p.at("gamma").is_null() ? CorrelationMatrix::identity(3) : CorrelationMatrix(to_matrix(p.at("gamma"), "gamma"));
  } else {
    throw InvalidInput("loss: expected \"cubic-quartic\" or \"shahshahani\"");
  }
  const auto grid = landscape_grid(3, get_real(p, "grid_step"), lk, gamma);
  emit_landscape(ctx.out / "landscape.csv", 3, get_real(p, "grid_step"), lk, gamma);
  o.files.push_back("landscape.csv");
  const auto best = std::min_element(grid.begin(), grid.end(),
                                     [](const auto& a, const auto& b) { return a.value < b.value; });
  o.summary.push_back(std::to_string(grid.size()) + " grid points, minimum " + fixed(best->value) + " at (" +
                      fixed(best->xy.x) + ", " + fixed(best->xy.y) + ")");
  return o;
}

using ScenarioFn = Outcome (*)(const Context&);

const std::map<std::string, ScenarioFn>& registry() {
  static const std::map<std::string, ScenarioFn> r{
      {"fig2-trajectories", run_fig2_trajectories}, {"fig2-ensemble", run_fig2_ensemble},
      {"fig3-algorithm1", run_fig3_algorithm1},     {"correlated-figure", run_correlated_figure},
      {"priming", run_priming},                     {"thm22-verify", run_thm22_verify},
      {"thm23-verify", run_thm23_verify},           {"thm-corr-verify", run_thm_corr_verify},
      {"alg2-verify", run_alg2_verify},             {"spiking-validate", run_spiking_validate},
      {"mirror-compare", run_mirror_compare},       {"landscape-grid", run_landscape_grid},
  };
  return r;
}

json parse_override_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    return text;
  }
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return digest_hex(ss.str());
}

}  // namespace

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names{
      "fig2-trajectories", "fig2-ensemble", "fig3-algorithm1", "correlated-figure", "priming",         "thm22-verify",
      "thm23-verify",      "thm-corr-verify", "alg2-verify",   "spiking-validate", "mirror-compare", "landscape-grid"};
  return names;
}

std::string scenario_defaults(const std::string& scenario) {
  const json& t = defaults_table();
  if (!t.contains(scenario)) throw InvalidInput("unknown scenario: " + scenario);
  return t.at(scenario).dump(2);
}

int run_scenario(const ScenarioConfig& config, std::ostream& out, std::ostream& err) {
  const auto& reg = registry();
  const auto fn = reg.find(config.scenario);
  if (fn == reg.end()) {
    err << "unknown scenario '" << config.scenario << "'; available:";
    for (const auto& n : scenario_names()) err << ' ' << n;
    err << '\n';
    return exit_unknown_scenario;
  }

  json params = defaults_table().at(config.scenario);
  std::vector<std::string> problems;
  std::uint64_t seed = 1;
  std::size_t threads = default_thread_count();
  std::optional<fs::path> out_dir;

  auto apply = [&](const std::string& key, const json& value, const char* source) {
    if (key == "seed") {
      if (integral(value) && value.get<double>() >= 0.0) {
        seed = value.is_number_unsigned() ? value.get<std::uint64_t>() : static_cast<std::uint64_t>(value.get<double>());
      } else {
        problems.push_back(std::string(source) + " seed: expected a nonnegative integer");
      }
    } else if (key == "threads") {
      if (integral(value) && value.get<double>() >= 1.0) {
        threads = static_cast<std::size_t>(value.get<double>());
      } else {
        problems.push_back(std::string(source) + " threads: expected a positive integer");
      }
    } else if (key == "out") {
      if (value.is_string()) {
        out_dir = value.get<std::string>();
      } else {
        problems.push_back(std::string(source) + " out: expected a string");
      }
    } else if (key == "scenario") {
      if (!value.is_string() || value.get<std::string>() != config.scenario) {
        problems.push_back(std::string(source) + " scenario: does not match the requested scenario");
      }
    } else if (!params.contains(key)) {
      problems.push_back(std::string(source) + " " + key + ": unknown parameter for " + config.scenario);
    } else if (auto msg = type_mismatch(key, defaults_table().at(config.scenario).at(key), value)) {
      problems.push_back(std::string(source) + " " + *msg);
    } else {
      params[key] = value;
    }
  };

  if (!config.config_json.empty()) {
    try {
      const json file = json::parse(config.config_json);
      if (!file.is_object()) {
        problems.push_back("config file: expected a JSON object");
      } else {
        for (const auto& [k, v] : file.items()) apply(k, v, "config");
      }
    } catch (const json::exception& e) {
      problems.push_back(std::string("config file: ") + e.what());
    }
  }
  for (const auto& [k, v] : config.overrides) apply(k, parse_override_value(v), "--set");
  if (config.seed) seed = *config.seed;
  if (config.threads) {
    if (*config.threads == 0) problems.push_back("--threads: must be positive");
    threads = *config.threads;
  }
  if (config.output_dir) out_dir = *config.output_dir;
  if (!problems.empty()) {
    err << ConfigError(problems).what() << '\n';
    return exit_config_error;
  }

  fs::path dir;
  if (out_dir) {
    dir = *out_dir;
  } else if (const char* root = std::getenv("SIMPLEX_STDP_OUT"); root && *root) {
    dir = fs::path(root) / config.scenario;
  } else {
    dir = fs::path("simplex-stdp-out") / config.scenario;
  }
  {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
      err << "cannot create output directory " << dir.string() << '\n';
      return exit_output_error;
    }
    const fs::path probe = dir / ".write-probe";
    std::ofstream test(probe);
    if (!test) {
      err << "output directory " << dir.string() << " is not writable\n";
      return exit_output_error;
    }
    test.close();
    fs::remove(probe, ec);
  }

  Outcome outcome;
  try {
    const Context ctx{params, seed, threads, dir};
    outcome = fn->second(ctx);
    std::string text = config.scenario + "\n";
    for (const auto& line : outcome.summary) text += "  " + line + "\n";
    if (outcome.passed) text += std::string("  result: ") + (*outcome.passed ? "PASS" : "FAIL") + "\n";
    write_text_file(dir / "summary.txt", text);
    outcome.files.push_back("summary.txt");

    json files = json::array();
    for (const auto& f : outcome.files) files.push_back({{"path", f}, {"digest", file_digest(dir / f)}});
    const json manifest = {{"scenario", config.scenario},
                           {"tool", "simplex-stdp"},
                           {"version", kVersion},
                           {"seed", seed},
                           {"config", params},
                           {"config_digest", digest_hex(params.dump())},
                           {"created_utc", utc_timestamp()},
                           {"files", files}};
    write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
    out << text;
  } catch (const ConfigError& e) {
    err << e.what() << '\n';
    return exit_config_error;
  } catch (const PreconditionError& e) {
    err << "precondition violated: " << e.what() << '\n';
    return exit_precondition;
  } catch (const InvalidInput& e) {
    err << "invalid configuration: " << e.what() << '\n';
    return exit_config_error;
  } catch (const json::exception& e) {
    err << "invalid configuration: " << e.what() << '\n';
    return exit_config_error;
  } catch (const OutputError& e) {
    err << "output error: " << e.what() << '\n';
    return exit_output_error;
  } catch (const fs::filesystem_error& e) {
    err << "output error: " << e.what() << '\n';
    return exit_output_error;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_runtime_error;
  }

  if (config.assert_mode && outcome.passed && !*outcome.passed) {
    err << config.scenario << ": acceptance check failed\n";
    return exit_acceptance_failure;
  }
  return exit_ok;
}

}  // namespace simplex_stdp
