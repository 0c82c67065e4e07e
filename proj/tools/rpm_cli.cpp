// Copyright 2026 The rpm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// rpm: batch front-end for the random-matrix-product experiments.
//
//   rpm <command> [--spec PATH] [--seed U64] [--n INT] [--n-grid a,b,c]
//       [--replicas INT] [--p FLOAT] [--cone orthant:d|lorentz:n|psd:n]
//       [--tol FLOAT] [--out DIR] [--threads INT] [--config FILE]
//
// Each command writes <out>/<command>.csv and <out>/<command>.summary.json.
// Exit status: 0 pass or complete, 2 verdict fail, 1 input error.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rpm/cone.hpp"
#include "rpm/csv.hpp"
#include "rpm/estimators.hpp"
#include "rpm/fixtures.hpp"
#include "rpm/limit_theorems.hpp"
#include "rpm/measure.hpp"
#include "rpm/positive_matrix.hpp"
#include "rpm/random_walk.hpp"

namespace {

using nlohmann::json;
using namespace rpm;

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitVerdict = 2;

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{
      "validate-spec", "detect-contraction", "lyapunov",   "invariant-sample", "coupling-decay",
      "variance",      "normality",          "berry-esseen", "asip-proxy",     "deviation",
      "regularity",    "aperiodicity",       "cone-demo",  "fixtures"};
  return names;
}

struct Config {
  std::string command;
  std::optional<std::string> spec;
  std::optional<std::string> cone;
  std::uint64_t seed = 1;
  std::optional<std::int64_t> n;
  std::optional<std::vector<std::int64_t>> n_grid;
  std::optional<std::int64_t> replicas;
  std::optional<double> p;
  std::optional<double> tol;
  std::optional<double> alpha;
  std::optional<double> epsilon;
  std::optional<std::vector<std::string>> functionals;
  std::string out = "rpm_out";
  std::optional<int> threads;
};

std::int64_t parse_int(const std::string& s, const std::string& field) {
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != s.size()) throw InvalidInput(field + ": not an integer: '" + s + "'");
  return v;
}

/// "64,256,1024" or ranges "1..40", mixed freely.
std::vector<std::int64_t> parse_grid(const std::string& text) {
  std::vector<std::int64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto dots = item.find("..");
    if (dots == std::string::npos) {
      out.push_back(parse_int(item, "n_grid"));
    } else {
      const auto lo = parse_int(item.substr(0, dots), "n_grid");
      const auto hi = parse_int(item.substr(dots + 2), "n_grid");
      if (hi < lo || hi - lo > 1000000) throw InvalidInput("n_grid: bad range '" + item + "'");
      for (auto k = lo; k <= hi; ++k) out.push_back(k);
    }
  }
  if (out.empty()) throw InvalidInput("n_grid: empty");
  return out;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

std::size_t line_of_offset(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

// Strict reading of a JSON config file; explicit flags applied afterwards win.
void apply_config_file(const std::string& path, Config& cfg) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("config: cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidInput(path + ": line " + std::to_string(line_of_offset(text, e.byte)) + ": malformed JSON");
  }
  if (!j.is_object()) throw InvalidInput(path + ": config must be a JSON object");
  const std::set<std::string> known{"command", "spec", "cone", "seed", "n", "n_grid", "replicas", "p",
                                    "tol", "alpha", "epsilon", "functionals", "out", "threads"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw InvalidInput(path + ": " + it.key() + ": unknown key");
  auto need = [&](const char* key, bool ok, const char* what) {
    if (!ok) throw InvalidInput(path + ": " + key + ": expected " + what);
  };
  auto str = [&](const char* key, auto& field) {
    if (!j.contains(key)) return;
    need(key, j[key].is_string(), "a string");
    field = j[key].get<std::string>();
  };
  auto integer = [&](const char* key, auto& field) {
    if (!j.contains(key)) return;
    need(key, j[key].is_number_integer(), "an integer");
    field = j[key].get<std::int64_t>();
  };
  auto number = [&](const char* key, std::optional<double>& field) {
    if (!j.contains(key)) return;
    need(key, j[key].is_number(), "a number");
    field = j[key].get<double>();
  };
  str("command", cfg.command);
  str("spec", cfg.spec);
  str("cone", cfg.cone);
  if (j.contains("out")) str("out", cfg.out);
  if (j.contains("seed")) {
    need("seed", j["seed"].is_number_unsigned() || (j["seed"].is_number_integer() && j["seed"].get<std::int64_t>() >= 0),
         "a non-negative integer");
    cfg.seed = j["seed"].get<std::uint64_t>();
  }
  integer("n", cfg.n);
  integer("replicas", cfg.replicas);
  if (j.contains("threads")) {
    need("threads", j["threads"].is_number_integer(), "an integer");
    cfg.threads = j["threads"].get<int>();
  }
  number("p", cfg.p);
  number("tol", cfg.tol);
  number("alpha", cfg.alpha);
  number("epsilon", cfg.epsilon);
  if (j.contains("n_grid")) {
    if (j["n_grid"].is_string()) {
      cfg.n_grid = parse_grid(j["n_grid"].get<std::string>());
    } else {
      need("n_grid", j["n_grid"].is_array(), "an array of integers or a string");
      std::vector<std::int64_t> g;
      for (const auto& v : j["n_grid"]) {
        need("n_grid", v.is_number_integer(), "an array of integers");
        g.push_back(v.get<std::int64_t>());
      }
      cfg.n_grid = g;
    }
  }
  if (j.contains("functionals")) {
    need("functionals", j["functionals"].is_array(), "an array of strings");
    std::vector<std::string> fs;
    for (const auto& v : j["functionals"]) {
      need("functionals", v.is_string(), "an array of strings");
      fs.push_back(v.get<std::string>());
    }
    cfg.functionals = fs;
  }
}

void validate(const Config& cfg) {
  auto positive = [](const char* name, auto v) {
    if (v && !(*v > 0)) throw InvalidInput(std::string(name) + ": must be positive");
  };
  positive("n", cfg.n);
  positive("replicas", cfg.replicas);
  positive("p", cfg.p);
  positive("tol", cfg.tol);
  positive("alpha", cfg.alpha);
  positive("epsilon", cfg.epsilon);
  positive("threads", cfg.threads);
  if (cfg.n_grid) {
    for (auto g : *cfg.n_grid)
      if (g < 1) throw InvalidInput("n_grid: entries must be positive");
  }
  if (cfg.out.empty()) throw InvalidInput("out: empty directory name");
}

// Hands out parameters with per-command defaults and records what was used.
class Run {
 public:
  explicit Run(const Config& cfg) : cfg_(cfg) {
    resolved_["command"] = cfg.command;
    resolved_["seed"] = cfg.seed;
    resolved_["out"] = cfg.out;
    resolved_["threads"] = threads();
  }

  const Config& config() const { return cfg_; }
  std::uint64_t seed() const { return cfg_.seed; }
  int threads() const { return cfg_.threads.value_or(0); }

  const MeasureSpec& spec() {
    if (!spec_) {
      if (!cfg_.spec) throw InvalidInput("spec: --spec PATH is required for " + cfg_.command);
      try {
        spec_ = load_measure(*cfg_.spec);
      } catch (const SpecError& e) {
        throw InvalidInput(*cfg_.spec + ": " + e.what());
      }
      resolved_["spec"] = *cfg_.spec;
      resolved_["measure"] = to_json(*spec_);
    }
    return *spec_;
  }

  std::int64_t n(std::int64_t def) { return record("n", cfg_.n.value_or(def)); }
  std::size_t replicas(std::int64_t def) {
    return static_cast<std::size_t>(record("replicas", cfg_.replicas.value_or(def)));
  }
  double p(double def) { return record("p", cfg_.p.value_or(def)); }
  double tol(double def) { return record("tol", cfg_.tol.value_or(def)); }
  double alpha(double def) { return record("alpha", cfg_.alpha.value_or(def)); }
  double epsilon(double def) { return record("epsilon", cfg_.epsilon.value_or(def)); }
  std::string cone(const std::string& def) { return record("cone", cfg_.cone.value_or(def)); }
  std::vector<std::int64_t> n_grid(std::vector<std::int64_t> def) {
    return record("n_grid", cfg_.n_grid.value_or(std::move(def)));
  }
  std::vector<Functional> functionals(const std::vector<std::string>& def) {
    const auto names = record("functionals", cfg_.functionals.value_or(def));
    std::vector<Functional> out;
    for (const auto& s : names) out.push_back(parse_functional(s));
    return out;
  }

  /// Anything else worth echoing (derived sizes, pilot settings).
  template <class T>
  T derived(const std::string& key, T value) {
    resolved_["derived"][key] = value;
    return value;
  }

  const json& resolved() const { return resolved_; }

 private:
  template <class T>
  T record(const std::string& key, T value) {
    resolved_[key] = value;
    return value;
  }

  Config cfg_;
  std::optional<MeasureSpec> spec_;
  json resolved_;
};

struct Outcome {
  std::unique_ptr<CsvWriter> csv;
  json results = json::object();
  std::string verdict = "complete";
};

FunctionalPoints centred(const MeasureSpec& spec) { return FunctionalPoints::centred(spec.d); }

json estimate_json(const EstimateWithError& e) {
  return {{"value", e.value}, {"std_error", e.std_error}, {"replicas", e.replicas}, {"method", e.method}};
}

void estimate_row(CsvWriter& csv, const EstimateWithError& e) {
  csv.row() << e.method << e.value << e.std_error << static_cast<unsigned long long>(e.replicas);
}

std::vector<std::int64_t> default_be_grid() { return {64, 256, 1024, 4096}; }

// ---------------------------------------------------------------------------

Outcome cmd_validate_spec(Run& run) {
  const auto& spec = run.spec();
  Outcome o;
  o.csv = std::make_unique<CsvWriter>(std::vector<std::string>{
      "atom", "weight", "op_norm", "v", "N", "L", "contraction", "strictly_positive"});
  json atoms = json::array();
  if (spec.is_atomic()) {
    const auto eff = spec.effective_atoms();
    for (std::size_t i = 0; i < eff.size(); ++i) {
      const auto g = gauges(eff[i]);
      const double c = contraction_coefficient(eff[i]).value();
      const bool pos = (eff[i].entries().array() > 0.0).all();
      o.csv->row() << static_cast<unsigned long long>(i) << spec.weights[i] << g.op_norm << g.v << g.N << g.L << c
                   << (pos ? "true" : "false");
      atoms.push_back({{"index", i}, {"weight", spec.weights[i]}, {"N", g.N}, {"L", g.L}, {"contraction", c}});
    }
  }
  o.results["d"] = spec.d;
  o.results["kind"] = spec.is_atomic() ? "atomic" : "parametric";
  o.results["transpose_view"] = spec.transpose_view;
  o.results["atoms"] = atoms;
  const auto w = detect_contraction(spec, 16, 256, replica_seed(run.seed(), 0, stream_tag::kContraction));
  o.results["strict_contraction_witness"] = w ? json{{"r", w->r}, {"frequency", w->frequency}} : json(nullptr);
  o.verdict = "pass";
  return o;
}

Outcome cmd_detect_contraction(Run& run) {
  const auto& spec = run.spec();
  const int r_max = static_cast<int>(run.n(16));
  const std::size_t samples = run.replicas(256);
  Outcome o;
  o.csv = std::make_unique<CsvWriter>(std::vector<std::string>{"r", "frequency"});
  const auto w = detect_contraction(spec, r_max, samples, replica_seed(run.seed(), 0, stream_tag::kContraction));
  o.results["found"] = w.has_value();
  if (w) {
    o.csv->row() << w->r << w->frequency;
    o.results["r"] = w->r;
    o.results["frequency"] = w->frequency;
  } else {
    o.results["note"] = "no strictly positive product observed; inconclusive";
  }
  o.verdict = w ? "pass" : "fail";
  return o;
}

Outcome cmd_lyapunov(Run& run) {
  const auto& spec = run.spec();
  const auto n = run.n(1000);
  const auto reps = run.replicas(1000);
  const auto est = estimate_lyapunov(spec, n, reps, SimplexPoint::center(spec.d), run.seed(), run.threads());
  Outcome o;
  o.csv = std::make_unique<CsvWriter>(std::vector<std::string>{"estimator", "value", "std_error", "replicas"});
  estimate_row(*o.csv, est.sigma);
  estimate_row(*o.csv, est.norm);
  estimate_row(*o.csv, est.last_increment);
  o.results["lambda"] = est.sigma.value;
  o.results["lambda_std_error"] = est.sigma.std_error;
  o.results["lambda_norm"] = estimate_json(est.norm);
  o.results["last_increment"] = estimate_json(est.last_increment);
  o.results["max_spread"] = est.max_spread;
  return o;
}

Outcome cmd_invariant_sample(Run& run) {
  const auto& spec = run.spec();
  const auto count = run.replicas(1000);
  const double tol = run.tol(1e-10);
  require_strict_contraction(spec, run.seed());
  std::vector<InvariantSample> draws(count);
  const Vector e = SimplexPoint::center(spec.d).coords();
  for_each_replica(count, run.threads(), [&](std::size_t i) {
    MeasureSampler sampler(spec);
    RandomStream stream(replica_seed(run.seed(), i));
    draws[i] = detail::backward_draw(sampler, stream, tol, e);
  });
  std::vector<std::string> header{"index", "steps", "certificate"};
  for (int i = 0; i < spec.d; ++i) header.push_back("x" + std::to_string(i));
  Outcome o;
  o.csv = std::make_unique<CsvWriter>(header);
  Vector mean_point = Vector::Zero(spec.d);
  std::int64_t max_steps = 0;
  for (std::size_t i = 0; i < count; ++i) {
    auto row = o.csv->row();
    row << static_cast<unsigned long long>(i) << static_cast<long long>(draws[i].steps) << draws[i].certificate;
    for (int k = 0; k < spec.d; ++k) row << draws[i].point.coords()[k];
    mean_point += draws[i].point.coords();
    max_steps = std::max(max_steps, draws[i].steps);
  }
  mean_point /= static_cast<double>(count);
  o.results["mean"] = std::vector<double>(mean_point.data(), mean_point.data() + spec.d);
  o.results["max_steps"] = max_steps;
  return o;
}

Outcome cmd_coupling_decay(Run& run) {
  const auto& spec = run.spec();
  const double p = run.p(1.0);
  const auto grid = run.n_grid(integer_range(1, 40));
  const auto reps = run.replicas(1000);
  const auto curve = coupling_decay(spec, p, grid, reps, run.seed(), run.threads());
  Outcome o;
  o.csv = std::make_unique<CsvWriter>(std::vector<std::string>{"n", "value", "std_error", "envelope"});
  for (std::size_t i = 0; i < curve.grid.size(); ++i) {
    o.csv->row() << static_cast<long long>(curve.grid[i]) << curve.values[i] << curve.std_errors[i]
                 << curve.envelope(static_cast<double>(curve.grid[i]));
  }
  o.results["rate"] = curve.rate;
  o.results["prefactor"] = curve.prefactor;
  o.results["r_squared"] = curve.r_squared;
  o.results["bound_violations"] = curve.bound_violations;
  o.results["max_bound_ratio"] = curve.max_bound_ratio;
  o.verdict = (curve.rate < 1.0 && curve.r_squared > 0.9 && curve.bound_violations == 0) ? "pass" : "fail";
  return o;
}

Outcome cmd_variance(Run& run) {
  const auto& spec = run.spec();
  const auto n = run.n(512);
  const auto reps = run.replicas(2000);
  const auto seed = run.seed();
  const auto direct = estimate_variance_direct(spec, n, reps, SimplexPoint::center(spec.d), seed, run.threads());
  const auto curve = coupling_decay(spec, 1.0, integer_range(1, 40), run.derived("coupling_replicas", std::min<std::size_t>(reps, 2000)),
                                    replica_seed(seed, 1), run.threads());
  const double lambda = direct.lambda.value;
  const double target = 0.01 * direct.sigma.value;
  const auto pilot = estimate_variance_series(spec, 0, 64, 200, lambda, replica_seed(seed, 2), 1e-10, run.threads());
  const int lag = run.derived("series_lag", choose_lag(curve, pilot.mean_abs_increment, target));
  auto series = estimate_variance_series(spec, lag, n, reps, lambda, replica_seed(seed, 3), 1e-10, run.threads());
  attach_truncation_bound(series, curve);
  const int trunc = run.derived("psi_truncation", choose_psi_truncation(curve, 1e-6));
  const auto inner = run.derived("psi_inner", std::min<std::size_t>(reps, 10000));
  const auto psi = estimate_psi(spec, trunc, inner, lambda, direct.lambda.std_error, curve, replica_seed(seed, 4),
                                run.threads());
  const auto steps = run.derived("martingale_steps", std::int64_t{16});
  const auto mart = variance_via_martingale(spec, psi, steps, reps, replica_seed(seed, 5), 1e-10, run.threads());
  Outcome o;
  o.csv = std::make_unique<CsvWriter>(std::vector<std::string>{"route", "value", "std_error", "replicas"});
  for (const auto& e : direct.all()) estimate_row(*o.csv, e);
  estimate_row(*o.csv, series.estimate);
  estimate_row(*o.csv, mart.estimate);
  for (const auto& e : series.by_lag) estimate_row(*o.csv, e);
  o.results["lambda"] = estimate_json(direct.lambda);
  o.results["direct"] = estimate_json(direct.sigma);
  o.results["series"] = estimate_json(series.estimate);
  o.results["series_truncation_bound"] = series.truncation_bound;
  o.results["martingale"] = estimate_json(mart.estimate);
  o.results["martingale_mean_difference"] = estimate_json(mart.mean_difference);
  o.results["martingale_lag1_autocorrelation"] = mart.lag1_autocorrelation;
  o.results["psi_tail_bound"] = psi.tail_bound();
  o.results["coupling_rate"] = curve.rate;
  const bool agree = agree_within(direct.sigma, series.estimate) && agree_within(direct.sigma, mart.estimate) &&
                     agree_within(series.estimate, mart.estimate);
  o.results["routes_agree"] = agree;
  o.verdict = agree ? "pass" : "fail";
  return o;
}

Outcome cmd_normality(Run& run) {
  const auto& spec = run.spec();
  const auto n = run.n(1024);
  const auto reps = run.replicas(10000);
  auto fs = run.functionals({"sigma", "norm", "v", "kappa", "coeff", "inf_coeff"});
  if (std::find(fs.begin(), fs.end(), Functional::kSigma) == fs.end()) fs.insert(fs.begin(), Functional::kSigma);
  const auto samples = sample_functionals(spec, fs, {n}, reps, run.seed(), centred(spec), run.threads());
  const auto sig = samples.at(*samples.index_of(Functional::kSigma), 0);
  const double lambda = mean(sig) / static_cast<double>(n);
  const double s = std::sqrt(sample_variance(sig) / static_cast<double>(n));
  Outcome o;
  o.csv = std::make_unique<CsvWriter>(
      std::vector<std::string>{"functional", "n", "ks", "noise_floor", "replicas", "neg_inf"});
  o.results["lambda"] = lambda;
  o.results["s"] = s;
  o.results["ordering_violations"] = samples.ordering_violations;
  if (!(s > 0.0)) {
    o.results["note"] = "degenerate: sample variance of sigma is zero";
    o.verdict = "degenerate";
    return o;
  }
  for (std::size_t f = 0; f < fs.size(); ++f) {
    const auto rep = normality_from_values(samples.at(f, 0), n, fs[f], lambda, s);
    o.csv->row() << functional_name(fs[f]) << static_cast<long long>(n) << rep.ks_distance
                 << ks_noise_floor(rep.replicas) << static_cast<unsigned long long>(rep.replicas)
                 << static_cast<unsigned long long>(rep.neg_inf);
    o.results["ks"][functional_name(fs[f])] = rep.ks_distance;
  }
  return o;
}

Outcome cmd_berry_esseen(Run& run) {
  const auto& spec = run.spec();
  const double p = run.p(3.0);
  const auto grid = run.n_grid(default_be_grid());
  const auto reps = run.replicas(10000);
  const auto fs = run.functionals({"sigma", "norm", "v", "kappa", "inf_coeff"});
  const auto res = berry_esseen_fit(spec, fs, p, grid, reps, run.seed(), centred(spec), run.threads());
  Outcome o;
  o.csv = std::make_unique<CsvWriter>(
      std::vector<std::string>{"functional", "n", "ks", "scaled", "noise", "neg_inf"});
  bool all_pass = true;
  for (const auto& fit : res.fits) {
    for (std::size_t g = 0; g < fit.ks.size(); ++g) {
      const double w = std::pow(static_cast<double>(fit.grid[g]), fit.target);
      o.csv->row() << functional_name(fit.functional) << static_cast<long long>(fit.grid[g]) << fit.ks[g]
                   << fit.scaled[g] << fit.noise_floor * w << static_cast<unsigned long long>(fit.neg_inf[g]);
    }
    o.results["fits"][functional_name(fit.functional)] = {
        {"slope", fit.slope}, {"tau", fit.tau}, {"verdict", fit.verdict}, {"target_exponent", fit.target}};
    all_pass = all_pass && fit.verdict == "pass";
    if (!res.fits.empty()) {
      o.results["lambda"] = fit.lambda;
      o.results["s"] = fit.s;
    }
  }
  o.results["moments"] = {{"moment", estimate_json(res.moments.moment)},
                          {"doubled", estimate_json(res.moments.doubled)},
                          {"hill_index", std::isfinite(res.moments.hill_index) ? json(res.moments.hill_index) : json(nullptr)},
                          {"stable", res.moments.stable}};
  o.results["ordering_violations"] = res.ordering_violations;
  o.verdict = all_pass && res.ordering_violations == 0 ? "pass" : "fail";
  return o;
}

Outcome cmd_asip_proxy(Run& run) {
  const auto& spec = run.spec();
  const auto n = run.n(1 << 16);
  const auto reps = run.replicas(1000);
  const double eps = run.epsilon(0.2);
  const auto pilot_n = run.derived("variance_pilot_n", std::int64_t{512});
  const auto pilot_r = run.derived("variance_pilot_replicas", std::size_t{4000});
  const auto direct = estimate_variance_direct(spec, pilot_n, pilot_r, SimplexPoint::center(spec.d),
                                               replica_seed(run.seed(), 1), run.threads());
  Outcome o;
  o.csv = std::make_unique<CsvWriter>(std::vector<std::string>{"replica", "statistic", "statistic_coeff"});
  o.results["tag"] = "property proxy";
  o.results["s2"] = estimate_json(direct.sigma);
  if (!(direct.sigma.value > 0.0)) {
    o.results["note"] = "degenerate: s^2 = 0";
    o.verdict = "degenerate";
    return o;
  }
  const auto rep = asip_proxy(spec, n, reps, direct.sigma.value, run.seed(), centred(spec), eps, run.threads());
  for (std::size_t r = 0; r < reps; ++r) {
    o.csv->row() << static_cast<unsigned long long>(r) << rep.statistic[r] << rep.statistic_coeff[r];
  }
  o.results["lambda"] = rep.lambda;
  o.results["fraction_within"] = rep.fraction_within;
  o.results["fraction_within_coeff"] = rep.fraction_within_coeff;
  json blocks = json::array();
  for (const auto& b : rep.blocks) blocks.push_back({{"length", b.length}, {"count", b.count}, {"ks", b.ks}});
  o.results["blocks"] = blocks;
  o.verdict = rep.verdict;
  return o;
}

Outcome cmd_deviation(Run& run) {
  const auto& spec = run.spec();
  const double alpha = run.alpha(1.0);
  const double p = run.p(2.0);
  const double eps = run.epsilon(0.5);
  const auto n = run.n(512);
  const auto reps = run.replicas(10000);
  const auto rep = deviation_tail_sums(spec, alpha, p, eps, n, reps, run.seed(), centred(spec), run.threads());
  Outcome o;
  o.csv = std::make_unique<CsvWriter>(std::vector<std::string>{"n", "probability", "partial_sum",
                                                               "probability_coeff", "partial_sum_coeff"});
  for (std::size_t k = 0; k < rep.probability.size(); ++k) {
    o.csv->row() << static_cast<unsigned long long>(k + 1) << rep.probability[k] << rep.partial_sum[k]
                 << rep.probability_coeff[k] << rep.partial_sum_coeff[k];
  }
  o.results["lambda"] = rep.lambda;
  o.results["final_increment"] = rep.final_increment;
  o.results["final_increment_coeff"] = rep.final_increment_coeff;
  o.results["floor"] = rep.floor;
  o.results["partial_sum"] = rep.partial_sum.back();
  o.results["partial_sum_coeff"] = rep.partial_sum_coeff.back();
  o.verdict = rep.verdict;
  return o;
}

Outcome cmd_regularity(Run& run) {
  const auto& spec = run.spec();
  const double p = run.p(2.0);
  const auto samples = run.replicas(10000);
  const double tol = run.tol(1e-10);
  require_strict_contraction(spec, run.seed());
  const auto rep = regularity_doubling(spec, p, samples, tol, run.seed(), run.threads());
  Outcome o;
  o.csv = std::make_unique<CsvWriter>(std::vector<std::string>{"samples", "value", "std_error"});
  o.csv->row() << static_cast<unsigned long long>(rep.base.replicas) << rep.base.value << rep.base.std_error;
  o.csv->row() << static_cast<unsigned long long>(rep.doubled.replicas) << rep.doubled.value
               << rep.doubled.std_error;
  o.results["base"] = estimate_json(rep.base);
  o.results["doubled"] = estimate_json(rep.doubled);
  o.results["stable"] = rep.stable;
  o.verdict = rep.stable ? "pass" : "fail";
  return o;
}

Outcome cmd_aperiodicity(Run& run) {
  const auto& spec = run.spec();
  const int len = static_cast<int>(run.n(8));
  const auto rep = aperiodicity_report(spec, len);
  Outcome o;
  o.csv = std::make_unique<CsvWriter>(std::vector<std::string>{"kind", "value", "p", "q", "error", "commensurable"});
  for (double v : rep.log_kappas) o.csv->row() << "log_kappa" << v << "" << "" << "" << "";
  for (const auto& r : rep.ratios) {
    o.csv->row() << "ratio" << r.value << static_cast<long long>(r.approximation.p)
                 << static_cast<long long>(r.approximation.q) << r.approximation.error
                 << (r.commensurable ? "true" : "false");
  }
  o.results["heuristic"] = true;
  o.results["words_examined"] = rep.words_examined;
  o.results["distinct_log_kappas"] = rep.log_kappas.size();
  o.results["base"] = rep.base;
  o.results["classification"] = rep.verdict;
  return o;
}

template <ClosedSolidCone C>
Matrix demo_map(const C& cone, RandomStream& rng);

template <>
Matrix demo_map(const OrthantCone& cone, RandomStream& rng) {
  Matrix g(cone.ambient_dim(), cone.ambient_dim());
  for (int i = 0; i < g.rows(); ++i)
    for (int j = 0; j < g.cols(); ++j) g(i, j) = rng.uniform(0.5, 2.0);
  return g;
}

template <>
Matrix demo_map(const LorentzCone& cone, RandomStream& rng) {
  return lorentz_squeeze_map(cone, 0.5) * lorentz_boost_map(cone, 0, rng.uniform(-1.0, 1.0));
}

template <>
Matrix demo_map(const PsdCone& cone, RandomStream& rng) {
  const int n = cone.order();
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) += 0.3 * rng.normal();
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
  return psd_congruence_map(cone, a) + 0.1 * psd_trace_map(cone, id, id);
}

template <ClosedSolidCone C>
Outcome cone_demo(const C& cone, Run& run, std::size_t pairs) {
  RandomStream rng(replica_seed(run.seed(), 0, 0x31));
  const Matrix g = demo_map(cone, rng);
  const auto cert = certify_cone_preserving(cone, g, pairs, rng);
  Outcome o;
  o.csv = std::make_unique<CsvWriter>(std::vector<std::string>{"quantity", "value"});
  o.results["cone"] = cone.name();
  o.results["certified"] = cert.ok;
  if (!cert.ok) {
    o.results["reason"] = cert.reason;
    o.verdict = "fail";
    return o;
  }
  const Vector x0 = cone.base_point();
  const Vector y = cone.sample_slice(rng);
  const double c = contraction_estimate(cone, g, pairs, rng).value();
  const double d_before = detail::cone_distance(cone, x0, y);
  const double d_after = detail::cone_distance(cone, Vector(g * x0), Vector(g * y));
  const auto gg = cone_gauges(cone, g);
  const std::map<std::string, double> rows{
      {"contraction_estimate", c},
      {"distance_before", d_before},
      {"distance_after", d_after},
      {"cocycle_base_point", cone_cocycle(cone, g, x0)},
      {"op_norm", gg.op_norm},
      {"v", gg.v},
      {"norm_metric_ratio", sampled_norm_metric_ratio(cone, pairs, rng)},
      {"scaling_epsilon_base_point", cone_scaling_epsilon(cone, x0, pairs, rng)},
  };
  for (const auto& [k, v] : rows) {
    o.csv->row() << k << v;
    o.results[k] = v;
  }
  o.verdict = (c < 1.0 && d_after <= c * d_before + 1e-9) ? "pass" : "fail";
  return o;
}

Outcome cmd_cone_demo(Run& run) {
  const auto cone = parse_cone(run.cone("orthant:3"));
  const auto pairs = run.replicas(2000);
  return std::visit([&](const auto& c) { return cone_demo(c, run, pairs); }, cone);
}

Outcome cmd_fixtures(Run& run) {
  const auto n = run.n(3);
  const auto reps = run.replicas(20000);
  const auto a_n = run.derived("fixture_a_n", std::int64_t{256});
  const auto a_reps = run.derived("fixture_a_replicas", std::max<std::size_t>(200, reps / 10));
  Outcome o;
  o.csv = std::make_unique<CsvWriter>(std::vector<std::string>{"fixture", "quantity", "value", "std_error"});
  const auto zero = coefficient_zero_probability(fixture_b(), n, reps, run.seed(), run.threads());
  // Only the all-identity word leaves the coefficient at zero.
  const double expected = std::ldexp(1.0, -static_cast<int>(n));
  const double se = std::sqrt(expected * (1.0 - expected) / static_cast<double>(reps));
  o.csv->row() << "fixture_b" << "coefficient_zero_probability" << zero.value << zero.std_error;
  o.csv->row() << "fixture_b" << "combinatorial_value" << expected << 0.0;
  const auto diag = fixture_a_diagnostics(fixture_a(), a_n, a_reps, replica_seed(run.seed(), 1), run.threads());
  o.csv->row() << "fixture_a" << "lambda_n" << diag.lambda_n.value << diag.lambda_n.std_error;
  o.csv->row() << "fixture_a" << "lambda_2n" << diag.lambda_2n.value << diag.lambda_2n.std_error;
  o.csv->row() << "fixture_a" << "log_v_n" << diag.log_v_n.value << diag.log_v_n.std_error;
  o.csv->row() << "fixture_a" << "log_v_2n" << diag.log_v_2n.value << diag.log_v_2n.std_error;
  o.csv->row() << "fixture_a" << "hill_index" << diag.hill_index << 0.0;
  const bool b_ok = std::abs(zero.value - expected) <= 3.0 * se;
  o.results["fixture_b"] = {{"estimate", estimate_json(zero)}, {"expected", expected}, {"within_3se", b_ok}};
  o.results["fixture_a"] = {{"lambda_stable", diag.lambda_stable},
                            {"heavy_tail", diag.heavy_tail},
                            {"hill_index", diag.hill_index}};
  json notes = json::array();
  for (const auto& f : pathology_fixtures()) notes.push_back({{"name", f.name}, {"expected", f.expected}});
  o.results["fixtures"] = notes;
  o.verdict = (b_ok && diag.lambda_stable && diag.heavy_tail) ? "pass" : "fail";
  return o;
}

Outcome dispatch(Run& run) {
  const std::string& c = run.config().command;
  if (c == "validate-spec") return cmd_validate_spec(run);
  if (c == "detect-contraction") return cmd_detect_contraction(run);
  if (c == "lyapunov") return cmd_lyapunov(run);
  if (c == "invariant-sample") return cmd_invariant_sample(run);
  if (c == "coupling-decay") return cmd_coupling_decay(run);
  if (c == "variance") return cmd_variance(run);
  if (c == "normality") return cmd_normality(run);
  if (c == "berry-esseen") return cmd_berry_esseen(run);
  if (c == "asip-proxy") return cmd_asip_proxy(run);
  if (c == "deviation") return cmd_deviation(run);
  if (c == "regularity") return cmd_regularity(run);
  if (c == "aperiodicity") return cmd_aperiodicity(run);
  if (c == "cone-demo") return cmd_cone_demo(run);
  if (c == "fixtures") return cmd_fixtures(run);
  throw InvalidInput("unknown command '" + c + "'");
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

int exit_code(const std::string& verdict) {
  return (verdict == "pass" || verdict == "complete") ? kExitOk : kExitVerdict;
}

int execute(const Config& cfg) {
  validate(cfg);
  Run run(cfg);
  Outcome o = dispatch(run);
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(cfg.out, ec);
  if (ec) throw InvalidInput("out: cannot create " + cfg.out + ": " + ec.message());
  const fs::path base = fs::path(cfg.out) / cfg.command;
  o.csv->write(base.string() + ".csv");
  const int code = exit_code(o.verdict);
  json summary = {{"command", cfg.command}, {"seed", cfg.seed},      {"config", run.resolved()},
                  {"results", o.results},   {"verdict", o.verdict}, {"exit_code", code},
                  {"csv", base.filename().string() + ".csv"},      {"timestamp", utc_timestamp()}};
  std::ofstream f(base.string() + ".summary.json", std::ios::binary);
  if (!f) throw InvalidInput("cannot write " + base.string() + ".summary.json");
  f << summary.dump(2) << "\n";
  std::cout << cfg.command << ": " << o.verdict << " (" << base.string() << ".csv)\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random matrix product experiments"};
  Config cfg;
  std::string config_path, grid_text, functionals_text;
  std::optional<std::string> spec, cone;
  std::int64_t n = 0, replicas = 0;
  double p = 0, tol = 0, alpha = 0, epsilon = 0;
  int threads = 0;
  std::uint64_t seed = 1;
  std::string out;

  app.add_option("command", cfg.command, "Experiment to run")->check(CLI::IsMember(command_names()));
  auto* o_config = app.add_option("--config", config_path, "Strict JSON config; flags override its values");
  auto* o_spec = app.add_option("--spec", spec, "Measure spec (JSON)");
  auto* o_seed = app.add_option("--seed", seed, "Master seed");
  auto* o_n = app.add_option("--n", n, "Path length (or r_max / word length)");
  auto* o_grid = app.add_option("--n-grid", grid_text, "Comma-separated n values, ranges a..b allowed");
  auto* o_reps = app.add_option("--replicas", replicas, "Monte Carlo replicas");
  auto* o_p = app.add_option("--p", p, "Moment order");
  auto* o_cone = app.add_option("--cone", cone, "orthant:d | lorentz:n | psd:n");
  auto* o_tol = app.add_option("--tol", tol, "Tolerance");
  auto* o_alpha = app.add_option("--alpha", alpha, "Deviation exponent");
  auto* o_eps = app.add_option("--epsilon", epsilon, "Envelope or deviation epsilon");
  auto* o_fs = app.add_option("--functionals", functionals_text, "sigma,norm,v,kappa,coeff,inf_coeff");
  auto* o_out = app.add_option("--out", out, "Output directory");
  auto* o_threads = app.add_option("--threads", threads, "Worker threads (results do not depend on it)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    const std::string cli_command = cfg.command;
    if (o_config->count()) apply_config_file(config_path, cfg);
    if (!cli_command.empty()) cfg.command = cli_command;
    if (cfg.command.empty()) throw InvalidInput("command: missing (one of validate-spec, lyapunov, ...)");
    if (std::find(command_names().begin(), command_names().end(), cfg.command) == command_names().end()) {
      throw InvalidInput("command: unknown '" + cfg.command + "'");
    }
    if (o_spec->count()) cfg.spec = spec;
    if (o_seed->count()) cfg.seed = seed;
    if (o_n->count()) cfg.n = n;
    if (o_grid->count()) cfg.n_grid = parse_grid(grid_text);
    if (o_reps->count()) cfg.replicas = replicas;
    if (o_p->count()) cfg.p = p;
    if (o_cone->count()) cfg.cone = cone;
    if (o_tol->count()) cfg.tol = tol;
    if (o_alpha->count()) cfg.alpha = alpha;
    if (o_eps->count()) cfg.epsilon = epsilon;
    if (o_fs->count()) cfg.functionals = split_list(functionals_text);
    if (o_out->count()) cfg.out = out;
    if (o_threads->count()) cfg.threads = threads;
    return execute(cfg);
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
}
