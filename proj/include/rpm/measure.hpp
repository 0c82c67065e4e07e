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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "rpm/allowable_matrix.hpp"
#include "rpm/random.hpp"
#include "rpm/simplex_geometry.hpp"
#include "rpm/types.hpp"

namespace rpm {

/// Parse or validation failure of a measure description. `field` names the
/// offending JSON path ("atoms[1]", "weights"); `line` is set for syntax
/// errors.
class SpecError : public InvalidInput {
 public:
  SpecError(std::string field, const std::string& message, std::optional<std::size_t> line = {})
      : InvalidInput(format(field, message, line)), field_(std::move(field)), line_(line) {}

  const std::string& field() const { return field_; }
  std::optional<std::size_t> line() const { return line_; }

 private:
  static std::string format(const std::string& field, const std::string& message,
                            std::optional<std::size_t> line) {
    std::string out;
    if (line) out += "line " + std::to_string(*line) + ": ";
    if (!field.empty()) out += field + ": ";
    return out + message;
  }

  std::string field_;
  std::optional<std::size_t> line_;
};

enum class MeasureKind { kAtomic, kParametric };
enum class EntryFamily { kLogNormal, kUniform };

/// Law mu of the i.i.d. factors: finitely many atoms with weights, or a
/// parametric entry distribution. `transpose_view` selects the pushforward
/// of mu under g -> g^t.
///
/// Parametric families are desk-scale conveniences: i.i.d. log-normal entries
/// exp(mu0 + sigma0 N(0,1)), or i.i.d. uniform entries on [lo, hi] with zero
/// diagonal entries repaired to `hi` when a draw is not allowable.
struct MeasureSpec {
  MeasureKind kind = MeasureKind::kAtomic;
  int d = 2;
  std::vector<double> weights;
  std::vector<AllowableMatrix> atoms;
  bool transpose_view = false;
  EntryFamily family = EntryFamily::kLogNormal;
  // log-normal: (mu0, sigma0); uniform: (lo, hi)
  double param_a = 0.0;
  double param_b = 0.0;

  static MeasureSpec atomic(std::vector<double> weights, std::vector<AllowableMatrix> atoms,
                            bool transpose_view = false) {
    MeasureSpec s;
    s.kind = MeasureKind::kAtomic;
    s.d = atoms.empty() ? 0 : atoms.front().dim();
    s.weights = std::move(weights);
    s.atoms = std::move(atoms);
    s.transpose_view = transpose_view;
    s.validate();
    return s;
  }

  static MeasureSpec single(const AllowableMatrix& g) { return atomic({1.0}, {g}); }

  static MeasureSpec lognormal(int d, double mu0, double sigma0) {
    MeasureSpec s;
    s.kind = MeasureKind::kParametric;
    s.d = d;
    s.family = EntryFamily::kLogNormal;
    s.param_a = mu0;
    s.param_b = sigma0;
    s.validate();
    return s;
  }

  static MeasureSpec uniform(int d, double lo, double hi) {
    MeasureSpec s;
    s.kind = MeasureKind::kParametric;
    s.d = d;
    s.family = EntryFamily::kUniform;
    s.param_a = lo;
    s.param_b = hi;
    s.validate();
    return s;
  }

  bool is_atomic() const { return kind == MeasureKind::kAtomic; }

  /// The law of g^t under this law.
  MeasureSpec transposed() const {
    MeasureSpec s = *this;
    s.transpose_view = !transpose_view;
    return s;
  }

  /// Atoms as they are drawn (transposed under the transpose view).
  std::vector<AllowableMatrix> effective_atoms() const {
    std::vector<AllowableMatrix> out;
    out.reserve(atoms.size());
    for (const auto& a : atoms) out.push_back(transpose_view ? a.transpose() : a);
    return out;
  }

  void validate() const {
    if (d < 2 || d > kMaxDimension) {
      throw SpecError("d", "dimension must be in [2, " + std::to_string(kMaxDimension) + "]");
    }
    if (kind == MeasureKind::kAtomic) {
      if (atoms.empty()) throw SpecError("atoms", "at least one atom is required");
      if (weights.size() != atoms.size()) {
        throw SpecError("weights", "expected " + std::to_string(atoms.size()) + " weights, got " +
                                       std::to_string(weights.size()));
      }
      double total = 0.0;
      for (std::size_t i = 0; i < weights.size(); ++i) {
        if (!(weights[i] > 0.0) || !std::isfinite(weights[i])) {
          throw SpecError("weights[" + std::to_string(i) + "]", "weights must be positive");
        }
        total += weights[i];
      }
      if (std::abs(total - 1.0) > 1e-12) {
        throw SpecError("weights", "weights sum to " + std::to_string(total) + ", expected 1");
      }
      for (std::size_t i = 0; i < atoms.size(); ++i) {
        if (atoms[i].dim() != d) {
          throw SpecError("atoms[" + std::to_string(i) + "]", "dimension differs from d");
        }
      }
    } else {
      if (family == EntryFamily::kLogNormal) {
        if (!std::isfinite(param_a)) throw SpecError("params.mu", "must be finite");
        if (!(param_b >= 0.0) || !std::isfinite(param_b)) {
          throw SpecError("params.sigma", "must be nonnegative");
        }
      } else {
        if (!(param_a >= 0.0) || !std::isfinite(param_a)) throw SpecError("params.lo", "must be >= 0");
        if (!(param_b > 0.0) || !(param_b >= param_a) || !std::isfinite(param_b)) {
          throw SpecError("params.hi", "must be positive and >= lo");
        }
      }
    }
  }

  friend bool operator==(const MeasureSpec& a, const MeasureSpec& b) {
    if (a.kind != b.kind || a.d != b.d || a.transpose_view != b.transpose_view) return false;
    if (a.kind == MeasureKind::kAtomic) return a.weights == b.weights && a.atoms == b.atoms;
    return a.family == b.family && a.param_a == b.param_a && a.param_b == b.param_b;
  }
};

// ---------------------------------------------------------------------------
// JSON document: {kind, d, weights, atoms, transpose_view, family, params}

inline nlohmann::json to_json(const MeasureSpec& spec) {
  nlohmann::json j;
  j["kind"] = spec.is_atomic() ? "atomic" : "parametric";
  j["d"] = spec.d;
  j["transpose_view"] = spec.transpose_view;
  if (spec.is_atomic()) {
    j["weights"] = spec.weights;
    auto atoms = nlohmann::json::array();
    for (const auto& a : spec.atoms) {
      auto rows = nlohmann::json::array();
      for (int i = 0; i < a.dim(); ++i) {
        auto row = nlohmann::json::array();
        for (int k = 0; k < a.dim(); ++k) row.push_back(a(i, k));
        rows.push_back(std::move(row));
      }
      atoms.push_back(std::move(rows));
    }
    j["atoms"] = std::move(atoms);
  } else if (spec.family == EntryFamily::kLogNormal) {
    j["family"] = "lognormal";
    j["params"] = {{"mu", spec.param_a}, {"sigma", spec.param_b}};
  } else {
    j["family"] = "uniform";
    j["params"] = {{"lo", spec.param_a}, {"hi", spec.param_b}};
  }
  return j;
}

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                                const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) {
      throw SpecError(where.empty() ? it.key() : where + "." + it.key(), "unknown key");
    }
  }
}

inline double json_number(const nlohmann::json& j, const std::string& field) {
  if (!j.is_number()) throw SpecError(field, "expected a number");
  return j.get<double>();
}

inline AllowableMatrix json_matrix(const nlohmann::json& j, int d, const std::string& field) {
  if (!j.is_array() || static_cast<int>(j.size()) != d) {
    throw SpecError(field, "expected " + std::to_string(d) + " rows");
  }
  Matrix m(d, d);
  for (int i = 0; i < d; ++i) {
    const auto& row = j[i];
    const std::string rf = field + "[" + std::to_string(i) + "]";
    if (!row.is_array() || static_cast<int>(row.size()) != d) {
      throw SpecError(rf, "expected " + std::to_string(d) + " entries");
    }
    for (int k = 0; k < d; ++k) m(i, k) = json_number(row[k], rf + "[" + std::to_string(k) + "]");
  }
  if (auto why = allowability_violation(m)) throw SpecError(field, "atom is not allowable: " + *why);
  return AllowableMatrix(std::move(m));
}

}  // namespace detail

inline MeasureSpec measure_from_json(const nlohmann::json& j) {
  using detail::json_number;
  if (!j.is_object()) throw SpecError("", "measure document must be a JSON object");
  detail::reject_unknown_keys(j, {"kind", "d", "weights", "atoms", "transpose_view", "family", "params"},
                              "");
  if (!j.contains("kind") || !j["kind"].is_string()) throw SpecError("kind", "missing or not a string");
  if (!j.contains("d") || !j["d"].is_number_integer()) throw SpecError("d", "missing or not an integer");
  MeasureSpec s;
  s.d = j["d"].get<int>();
  if (s.d < 2 || s.d > kMaxDimension) {
    throw SpecError("d", "dimension must be in [2, " + std::to_string(kMaxDimension) + "]");
  }
  if (j.contains("transpose_view")) {
    if (!j["transpose_view"].is_boolean()) throw SpecError("transpose_view", "expected a boolean");
    s.transpose_view = j["transpose_view"].get<bool>();
  }
  const auto kind = j["kind"].get<std::string>();
  if (kind == "atomic") {
    s.kind = MeasureKind::kAtomic;
    if (j.contains("family") || j.contains("params")) {
      throw SpecError("family", "not allowed for an atomic measure");
    }
    if (!j.contains("atoms") || !j["atoms"].is_array()) throw SpecError("atoms", "missing or not an array");
    if (!j.contains("weights") || !j["weights"].is_array()) {
      throw SpecError("weights", "missing or not an array");
    }
    for (std::size_t i = 0; i < j["weights"].size(); ++i) {
      s.weights.push_back(json_number(j["weights"][i], "weights[" + std::to_string(i) + "]"));
    }
    for (std::size_t i = 0; i < j["atoms"].size(); ++i) {
      s.atoms.push_back(detail::json_matrix(j["atoms"][i], s.d, "atoms[" + std::to_string(i) + "]"));
    }
  } else if (kind == "parametric") {
    s.kind = MeasureKind::kParametric;
    if (j.contains("atoms") || j.contains("weights")) {
      throw SpecError("atoms", "not allowed for a parametric measure");
    }
    if (!j.contains("family") || !j["family"].is_string()) throw SpecError("family", "missing or not a string");
    if (!j.contains("params") || !j["params"].is_object()) throw SpecError("params", "missing or not an object");
    const auto family = j["family"].get<std::string>();
    const auto& p = j["params"];
    if (family == "lognormal") {
      s.family = EntryFamily::kLogNormal;
      detail::reject_unknown_keys(p, {"mu", "sigma"}, "params");
      if (!p.contains("mu") || !p.contains("sigma")) throw SpecError("params", "needs mu and sigma");
      s.param_a = json_number(p["mu"], "params.mu");
      s.param_b = json_number(p["sigma"], "params.sigma");
    } else if (family == "uniform") {
      s.family = EntryFamily::kUniform;
      detail::reject_unknown_keys(p, {"lo", "hi"}, "params");
      if (!p.contains("lo") || !p.contains("hi")) throw SpecError("params", "needs lo and hi");
      s.param_a = json_number(p["lo"], "params.lo");
      s.param_b = json_number(p["hi"], "params.hi");
    } else {
      throw SpecError("family", "unknown family '" + family + "' (expected lognormal or uniform)");
    }
  } else {
    throw SpecError("kind", "unknown kind '" + kind + "' (expected atomic or parametric)");
  }
  s.validate();
  return s;
}

inline std::string to_json_string(const MeasureSpec& spec) { return to_json(spec).dump(2); }

inline MeasureSpec measure_from_string(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const std::size_t offset = std::min<std::size_t>(e.byte, text.size());
    const std::size_t line =
        1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + offset, '\n'));
    throw SpecError("", std::string("malformed JSON: ") + e.what(), line);
  }
  return measure_from_json(j);
}

inline MeasureSpec load_measure(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("", "cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return measure_from_string(buffer.str());
}

// ---------------------------------------------------------------------------

/// Draws Y ~ mu (or mu-tilde under the transpose view). Deterministic given
/// the stream state. For atomic laws the contraction coefficient of the drawn
/// atom is cached.
class MeasureSampler {
 public:
  static constexpr std::size_t kMaxConsecutiveRejections = 1000000;

  explicit MeasureSampler(const MeasureSpec& spec) : spec_(spec) {
    spec_.validate();
    if (spec_.is_atomic()) {
      atoms_ = spec_.effective_atoms();
      double total = 0.0;
      for (double w : spec_.weights) total += w;
      double running = 0.0;
      for (double w : spec_.weights) {
        running += w / total;
        cumulative_.push_back(running);
      }
      cumulative_.back() = 1.0;
      for (const auto& a : atoms_) atom_contraction_.push_back(detail::contraction_coefficient(a.entries()));
    } else {
      scratch_ = Matrix(spec_.d, spec_.d);
    }
  }

  const MeasureSpec& spec() const { return spec_; }

  const AllowableMatrix& draw(RandomStream& stream) {
    if (spec_.is_atomic()) {
      last_atom_ = atom_index(stream.uniform());
      return atoms_[last_atom_];
    }
    last_atom_ = -1;
    std::size_t consecutive = 0;
    for (;;) {
      fill_parametric(stream);
      if (!allowability_violation(scratch_)) break;
      ++rejections_;
      if (++consecutive > kMaxConsecutiveRejections) {
        throw std::runtime_error("MeasureSampler: too many consecutive non-allowable draws");
      }
    }
    current_.emplace(spec_.transpose_view ? Matrix(scratch_.transpose()) : scratch_);
    return *current_;
  }

  /// Index of the last atom drawn, or -1 for parametric draws.
  int last_atom() const { return last_atom_; }

  /// c(Y) for the last draw when known without recomputation.
  std::optional<double> last_contraction() const {
    if (last_atom_ < 0) return std::nullopt;
    return atom_contraction_[last_atom_];
  }

  std::size_t rejections() const { return rejections_; }

 private:
  int atom_index(double u) const {
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return static_cast<int>(std::min<std::ptrdiff_t>(it - cumulative_.begin(),
                                                     static_cast<std::ptrdiff_t>(atoms_.size()) - 1));
  }

  void fill_parametric(RandomStream& stream) {
    const int d = spec_.d;
    if (spec_.family == EntryFamily::kLogNormal) {
      for (int i = 0; i < d; ++i)
        for (int k = 0; k < d; ++k) scratch_(i, k) = std::exp(spec_.param_a + spec_.param_b * stream.normal());
    } else {
      for (int i = 0; i < d; ++i)
        for (int k = 0; k < d; ++k) scratch_(i, k) = stream.uniform(spec_.param_a, spec_.param_b);
      if (allowability_violation(scratch_)) {
        for (int i = 0; i < d; ++i)
          if (scratch_(i, i) <= 0.0) scratch_(i, i) = spec_.param_b;
      }
    }
  }

  MeasureSpec spec_;
  std::vector<AllowableMatrix> atoms_;
  std::vector<double> cumulative_;
  std::vector<double> atom_contraction_;
  Matrix scratch_;
  std::optional<AllowableMatrix> current_;
  int last_atom_ = -1;
  std::size_t rejections_ = 0;
};

/// One draw from the law described by `spec`.
inline AllowableMatrix sample_matrix(const MeasureSpec& spec, RandomStream& stream) {
  MeasureSampler sampler(spec);
  return sampler.draw(stream);
}

}  // namespace rpm
