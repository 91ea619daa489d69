// Copyright 2026 The gradleak Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "gradleak/config.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <utility>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "gradleak/status_macros.h"

namespace gradleak {
namespace {

std::string Join(const std::string& path, const std::string& key) {
  return path.empty() ? key : absl::StrCat(path, ".", key);
}

// Reads the members of one JSON object and reports the first type error or
// unknown key.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string path)
      : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) {
      status_ = absl::InvalidArgumentError(
          absl::StrCat(path_.empty() ? "config" : path_, ": expected object"));
    }
  }

  bool Has(const std::string& key) const {
    return status_.ok() && j_.contains(key);
  }

  const Json* Child(const std::string& key) {
    if (!Has(key)) return nullptr;
    seen_.insert(key);
    return &j_.at(key);
  }

  void Read(const std::string& key, int& out) {
    const Json* v = Child(key);
    if (v == nullptr) return;
    if (!v->is_number_integer()) return Fail(key, "integer");
    const int64_t x = v->get<int64_t>();
    if (x < std::numeric_limits<int>::min() ||
        x > std::numeric_limits<int>::max()) {
      return Fail(key, "32-bit integer");
    }
    out = static_cast<int>(x);
  }

  void Read(const std::string& key, uint64_t& out) {
    const Json* v = Child(key);
    if (v == nullptr) return;
    if (v->is_number_unsigned()) {
      out = v->get<uint64_t>();
    } else if (v->is_number_integer() && v->get<int64_t>() >= 0) {
      out = static_cast<uint64_t>(v->get<int64_t>());
    } else {
      Fail(key, "non-negative integer");
    }
  }

  void Read(const std::string& key, double& out) {
    const Json* v = Child(key);
    if (v == nullptr) return;
    if (!v->is_number()) return Fail(key, "number");
    out = v->get<double>();
  }

  void Read(const std::string& key, bool& out) {
    const Json* v = Child(key);
    if (v == nullptr) return;
    if (!v->is_boolean()) return Fail(key, "boolean");
    out = v->get<bool>();
  }

  void Read(const std::string& key, std::string& out) {
    const Json* v = Child(key);
    if (v == nullptr) return;
    if (!v->is_string()) return Fail(key, "string");
    out = v->get<std::string>();
  }

  void Read(const std::string& key, std::vector<int>& out) {
    const Json* v = Child(key);
    if (v == nullptr) return;
    if (!v->is_array()) return Fail(key, "array of integers");
    out.clear();
    for (const Json& e : *v) {
      if (!e.is_number_integer()) return Fail(key, "array of integers");
      out.push_back(e.get<int>());
    }
  }

  void Merge(const absl::Status& status) {
    if (status_.ok() && !status.ok()) status_ = status;
  }

  void Fail(const std::string& key, const std::string& what) {
    Merge(absl::InvalidArgumentError(
        absl::StrCat(Join(path_, key), ": expected ", what)));
  }

  absl::Status Finish() {
    if (!status_.ok()) return status_;
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (seen_.count(it.key()) == 0) {
        return absl::InvalidArgumentError(
            absl::StrCat(Join(path_, it.key()), ": unknown key"));
      }
    }
    return absl::OkStatus();
  }

  const std::string& path() const { return path_; }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
  absl::Status status_;
};

std::string ScopeName(PruneScope scope) {
  return scope == PruneScope::kJoint ? "joint" : "per_group";
}

std::string DistanceName(MatchDistance distance) {
  return distance == MatchDistance::kSquaredL2 ? "squared_l2"
                                               : "negative_cosine";
}

std::string FeatureModeName(FeatureMode mode) {
  switch (mode) {
    case FeatureMode::kOff:
      return "off";
    case FeatureMode::kCosineSquared:
      return "cosine_squared";
    case FeatureMode::kSubspace:
      return "subspace";
  }
  return "off";
}

absl::Status ReadTensorConfig(const Json& j, const std::string& path,
                              TensorAttackConfig& c) {
  ObjectReader r(j, path);
  r.Read("subspace_iters", c.subspace_iters);
  r.Read("control_variates", c.control_variates);
  r.Read("quad_nodes", c.quad_nodes);
  r.Read("restarts", c.decomposition.restarts);
  r.Read("iters", c.decomposition.iters);
  r.Read("tol", c.decomposition.tol);
  r.Read("refine", c.decomposition.refine);
  r.Read("refine_iters", c.decomposition.refine_iters);
  return r.Finish();
}

Json TensorConfigToJson(const TensorAttackConfig& c) {
  return Json{{"subspace_iters", c.subspace_iters},
              {"control_variates", c.control_variates},
              {"quad_nodes", c.quad_nodes},
              {"restarts", c.decomposition.restarts},
              {"iters", c.decomposition.iters},
              {"tol", c.decomposition.tol},
              {"refine", c.decomposition.refine},
              {"refine_iters", c.decomposition.refine_iters}};
}

absl::Status ReadGradMatchConfig(const Json& j, const std::string& path,
                                 GradMatchConfig& c, bool& sign_resolve) {
  ObjectReader r(j, path);
  std::string distance = DistanceName(c.distance);
  std::string mode = FeatureModeName(c.feature_mode);
  r.Read("distance", distance);
  r.Read("feature_mode", mode);
  r.Read("group_reweighting", c.group_reweighting);
  r.Read("alpha_f", c.alpha_f);
  r.Read("pairing_refresh", c.pairing_refresh);
  r.Read("step_size", c.optimizer.step_size);
  r.Read("beta1", c.optimizer.beta1);
  r.Read("beta2", c.optimizer.beta2);
  r.Read("epsilon", c.optimizer.epsilon);
  r.Read("max_iters", c.optimizer.max_iters);
  r.Read("grad_tol", c.optimizer.grad_tol);
  r.Read("stall_window", c.optimizer.stall_window);
  r.Read("stall_rel_tol", c.optimizer.stall_rel_tol);
  r.Read("halve_on_increase", c.optimizer.halve_on_increase);
  r.Read("max_halvings", c.optimizer.max_halvings);
  r.Read("step_growth", c.optimizer.step_growth);
  r.Read("sign_resolve", sign_resolve);
  RETURN_IF_ERROR(r.Finish());
  if (distance == "squared_l2") {
    c.distance = MatchDistance::kSquaredL2;
  } else if (distance == "negative_cosine") {
    c.distance = MatchDistance::kNegativeCosine;
  } else {
    return absl::InvalidArgumentError(absl::StrCat(
        Join(path, "distance"), ": expected squared_l2 or negative_cosine"));
  }
  if (mode == "off") {
    c.feature_mode = FeatureMode::kOff;
  } else if (mode == "cosine_squared") {
    c.feature_mode = FeatureMode::kCosineSquared;
  } else if (mode == "subspace") {
    c.feature_mode = FeatureMode::kSubspace;
  } else {
    return absl::InvalidArgumentError(
        absl::StrCat(Join(path, "feature_mode"),
                     ": expected off, cosine_squared or subspace"));
  }
  return c.Validate();
}

Json GradMatchConfigToJson(const GradMatchConfig& c, bool sign_resolve) {
  const AdamConfig& o = c.optimizer;
  return Json{{"distance", DistanceName(c.distance)},
              {"feature_mode", FeatureModeName(c.feature_mode)},
              {"group_reweighting", c.group_reweighting},
              {"alpha_f", c.alpha_f},
              {"pairing_refresh", c.pairing_refresh},
              {"step_size", o.step_size},
              {"beta1", o.beta1},
              {"beta2", o.beta2},
              {"epsilon", o.epsilon},
              {"max_iters", o.max_iters},
              {"grad_tol", o.grad_tol},
              {"stall_window", o.stall_window},
              {"stall_rel_tol", o.stall_rel_tol},
              {"halve_on_increase", o.halve_on_increase},
              {"max_halvings", o.max_halvings},
              {"step_growth", o.step_growth},
              {"sign_resolve", sign_resolve}};
}

// `true` enables with defaults, `false` disables, an object enables with
// overrides.
absl::Status ReadAttacks(const Json& j, AttackSelection& a) {
  ObjectReader r(j, "attacks");
  if (const Json* t = r.Child("tensor")) {
    if (t->is_boolean()) {
      a.tensor = t->get<bool>();
    } else {
      a.tensor = true;
      r.Merge(ReadTensorConfig(*t, "attacks.tensor", a.tensor_config));
    }
  }
  if (const Json* g = r.Child("gradmatch")) {
    if (g->is_boolean()) {
      a.gradmatch = g->get<bool>();
    } else {
      a.gradmatch = true;
      r.Merge(ReadGradMatchConfig(*g, "attacks.gradmatch",
                                  a.gradmatch_config,
                                  a.gradmatch_sign_resolve));
    }
  }
  return r.Finish();
}

absl::Status ReadExperimentFields(ObjectReader& r, ExperimentConfig& c) {
  r.Read("d", c.d);
  r.Read("m", c.m);
  r.Read("B", c.B);
  r.Read("activation", c.activation);
  if (const Json* defenses = r.Child("defenses")) {
    if (!defenses->is_array()) {
      r.Fail("defenses", "array of defense objects");
    } else {
      c.defenses.clear();
      for (size_t k = 0; k < defenses->size(); ++k) {
        absl::StatusOr<DefenseConfig> defense = DefenseFromJson(
            (*defenses)[k], absl::StrCat("defenses[", k, "]"));
        if (!defense.ok()) {
          r.Merge(defense.status());
          break;
        }
        c.defenses.push_back(*defense);
      }
    }
  }
  if (const Json* attacks = r.Child("attacks")) {
    r.Merge(ReadAttacks(*attacks, c.attacks));
  }
  r.Read("compute_bounds", c.compute_bounds);
  r.Read("bound_sigma", c.bound_sigma);
  if (const Json* u = r.Child("utility")) {
    ObjectReader ur(*u, "utility");
    ur.Read("enabled", c.utility.enabled);
    ur.Read("steps", c.utility.steps);
    ur.Read("eta_a", c.utility.eta_a);
    ur.Read("eta_w", c.utility.eta_w);
    ur.Read("batch_size", c.utility.batch_size);
    r.Merge(ur.Finish());
  }
  r.Read("trials", c.trials);
  r.Read("base_seed", c.base_seed);
  r.Read("output_dir", c.output_dir);
  return absl::OkStatus();
}

uint64_t Fnv1a64(const std::string& text) {
  uint64_t hash = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ull;
  }
  return hash;
}

Json StringList(const std::vector<std::string>& items) {
  Json out = Json::array();
  for (const std::string& s : items) out.push_back(s);
  return out;
}

}  // namespace

absl::StatusOr<DefenseConfig> DefenseFromJson(const Json& j,
                                              const std::string& path) {
  ObjectReader r(j, path);
  std::string kind;
  r.Read("kind", kind);
  DefenseConfig config;
  r.Read("seed", config.seed);
  if (kind == "noise") {
    NoiseDefense v;
    r.Read("sigma0", v.sigma0);
    r.Read("clip_scale", v.clip_scale);
    config.variant = v;
  } else if (kind == "clip") {
    ClipDefense v;
    r.Read("C", v.C);
    config.variant = v;
  } else if (kind == "prune_ratio") {
    PruneRatioDefense v;
    std::string scope = "joint";
    r.Read("p", v.p);
    r.Read("scope", scope);
    if (scope == "per_group") {
      v.scope = PruneScope::kPerGroup;
    } else if (scope != "joint") {
      r.Fail("scope", "joint or per_group");
    }
    config.variant = v;
  } else if (kind == "prune_threshold") {
    PruneThresholdDefense v;
    r.Read("gamma", v.gamma);
    config.variant = v;
  } else if (kind == "dropout") {
    DropoutDefense v;
    r.Read("p", v.p);
    r.Read("coordinate_level", v.coordinate_level);
    config.variant = v;
  } else if (kind == "local_aggregation") {
    LocalAggregationDefense v;
    r.Read("steps", v.steps);
    r.Read("eta_a", v.eta_a);
    r.Read("eta_w", v.eta_w);
    r.Read("distinct_batches", v.distinct_batches);
    config.variant = v;
  } else if (kind == "secure_aggregation") {
    SecureAggregationDefense v;
    r.Read("client_batch_sizes", v.client_batch_sizes);
    config.variant = v;
  } else {
    r.Merge(absl::InvalidArgumentError(absl::StrCat(
        Join(path, "kind"), ": unknown defense '", kind, "'")));
  }
  RETURN_IF_ERROR(r.Finish());
  RETURN_IF_ERROR(WithStage(path.empty() ? "defense" : path,
                            config.Validate()));
  return config;
}

Json DefenseToJson(const DefenseConfig& defense) {
  Json j = {{"kind", defense.name()}};
  std::visit(
      [&j](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, NoiseDefense>) {
          j["sigma0"] = v.sigma0;
          j["clip_scale"] = v.clip_scale;
        } else if constexpr (std::is_same_v<T, ClipDefense>) {
          j["C"] = v.C;
        } else if constexpr (std::is_same_v<T, PruneRatioDefense>) {
          j["p"] = v.p;
          j["scope"] = ScopeName(v.scope);
        } else if constexpr (std::is_same_v<T, PruneThresholdDefense>) {
          j["gamma"] = v.gamma;
        } else if constexpr (std::is_same_v<T, DropoutDefense>) {
          j["p"] = v.p;
          j["coordinate_level"] = v.coordinate_level;
        } else if constexpr (std::is_same_v<T, LocalAggregationDefense>) {
          j["steps"] = v.steps;
          j["eta_a"] = v.eta_a;
          j["eta_w"] = v.eta_w;
          j["distinct_batches"] = v.distinct_batches;
        } else {
          j["client_batch_sizes"] = v.client_batch_sizes;
        }
      },
      defense.variant);
  return j;
}

absl::StatusOr<ExperimentConfig> ExperimentFromJson(const Json& j) {
  ExperimentConfig config;
  ObjectReader r(j, "");
  RETURN_IF_ERROR(ReadExperimentFields(r, config));
  RETURN_IF_ERROR(r.Finish());
  RETURN_IF_ERROR(config.Validate());
  return config;
}

Json ExperimentToJson(const ExperimentConfig& c) {
  Json defenses = Json::array();
  for (const DefenseConfig& d : c.defenses) defenses.push_back(DefenseToJson(d));
  Json attacks;
  attacks["tensor"] =
      c.attacks.tensor ? TensorConfigToJson(c.attacks.tensor_config)
                       : Json(false);
  attacks["gradmatch"] =
      c.attacks.gradmatch
          ? GradMatchConfigToJson(c.attacks.gradmatch_config,
                                  c.attacks.gradmatch_sign_resolve)
          : Json(false);
  return Json{{"d", c.d},
              {"m", c.m},
              {"B", c.B},
              {"activation", c.activation},
              {"defenses", defenses},
              {"attacks", attacks},
              {"compute_bounds", c.compute_bounds},
              {"bound_sigma", c.bound_sigma},
              {"utility",
               {{"enabled", c.utility.enabled},
                {"steps", c.utility.steps},
                {"eta_a", c.utility.eta_a},
                {"eta_w", c.utility.eta_w},
                {"batch_size", c.utility.batch_size}}},
              {"trials", c.trials},
              {"base_seed", c.base_seed},
              {"output_dir", c.output_dir}};
}

std::string ConfigHash(const ExperimentConfig& config) {
  Json j = ExperimentToJson(config);
  j.erase("trials");
  j.erase("output_dir");
  return absl::StrFormat("%016x", Fnv1a64(j.dump()));
}

std::vector<ExperimentConfig> GridConfig::Points() const {
  const std::vector<int> ds = d_values.empty() ? std::vector<int>{base.d}
                                               : d_values;
  const std::vector<int> ms = m_values.empty() ? std::vector<int>{base.m}
                                               : m_values;
  const std::vector<int> bs = B_values.empty() ? std::vector<int>{base.B}
                                               : B_values;
  const std::vector<std::vector<DefenseConfig>> chains =
      defense_values.empty()
          ? std::vector<std::vector<DefenseConfig>>{base.defenses}
          : defense_values;
  std::vector<ExperimentConfig> points;
  for (int d : ds) {
    for (int m : ms) {
      for (int B : bs) {
        for (const auto& chain : chains) {
          ExperimentConfig point = base;
          point.d = d;
          point.m = m;
          point.B = B;
          point.defenses = chain;
          points.push_back(std::move(point));
        }
      }
    }
  }
  return points;
}

absl::StatusOr<GridConfig> GridFromJson(const Json& j) {
  GridConfig grid;
  ObjectReader r(j, "");
  RETURN_IF_ERROR(ReadExperimentFields(r, grid.base));
  if (const Json* g = r.Child("grid")) {
    ObjectReader gr(*g, "grid");
    gr.Read("d", grid.d_values);
    gr.Read("m", grid.m_values);
    gr.Read("B", grid.B_values);
    if (const Json* chains = gr.Child("defenses")) {
      if (!chains->is_array()) {
        gr.Fail("defenses", "array of defense chains");
      } else {
        bool ok = true;
        for (size_t c = 0; c < chains->size() && ok; ++c) {
          const Json& chain = (*chains)[c];
          const std::string path = absl::StrCat("grid.defenses[", c, "]");
          if (!chain.is_array()) {
            gr.Merge(absl::InvalidArgumentError(
                absl::StrCat(path, ": expected array of defense objects")));
            ok = false;
            break;
          }
          std::vector<DefenseConfig> parsed;
          for (size_t k = 0; k < chain.size(); ++k) {
            absl::StatusOr<DefenseConfig> defense =
                DefenseFromJson(chain[k], absl::StrCat(path, "[", k, "]"));
            if (!defense.ok()) {
              gr.Merge(defense.status());
              ok = false;
              break;
            }
            parsed.push_back(*defense);
          }
          grid.defense_values.push_back(std::move(parsed));
        }
      }
    }
    r.Merge(gr.Finish());
  }
  RETURN_IF_ERROR(r.Finish());
  const std::vector<ExperimentConfig> points = grid.Points();
  for (size_t k = 0; k < points.size(); ++k) {
    RETURN_IF_ERROR(WithStage(absl::StrCat("grid point ", k),
                              points[k].Validate()));
  }
  return grid;
}

Json GridToJson(const GridConfig& grid) {
  Json j = ExperimentToJson(grid.base);
  Json axes = Json::object();
  if (!grid.d_values.empty()) axes["d"] = grid.d_values;
  if (!grid.m_values.empty()) axes["m"] = grid.m_values;
  if (!grid.B_values.empty()) axes["B"] = grid.B_values;
  if (!grid.defense_values.empty()) {
    Json chains = Json::array();
    for (const auto& chain : grid.defense_values) {
      Json c = Json::array();
      for (const DefenseConfig& d : chain) c.push_back(DefenseToJson(d));
      chains.push_back(c);
    }
    axes["defenses"] = chains;
  }
  if (!axes.empty()) j["grid"] = axes;
  return j;
}

absl::StatusOr<GridConfig> LoadGridConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    return absl::NotFoundError(absl::StrCat("cannot open config '", path, "'"));
  }
  Json j = Json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) {
    return absl::InvalidArgumentError(
        absl::StrCat("config '", path, "' is not valid JSON"));
  }
  return GridFromJson(j);
}

Json NumberToJson(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  return value;
}

absl::StatusOr<double> NumberFromJson(const Json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  return absl::InvalidArgumentError("expected a number, nan, inf or -inf");
}

Json ReconstructionToJson(const ReconstructionResult& result) {
  Json columns = Json::array();
  for (Eigen::Index i = 0; i < result.X_hat.cols(); ++i) {
    Json col = Json::array();
    for (Eigen::Index k = 0; k < result.X_hat.rows(); ++k) {
      col.push_back(NumberToJson(result.X_hat(k, i)));
    }
    columns.push_back(col);
  }
  Json weights = Json::array();
  for (Eigen::Index i = 0; i < result.weights.size(); ++i) {
    weights.push_back(NumberToJson(result.weights[i]));
  }
  Json diagnostics = Json::object();
  for (const auto& [name, value] : result.diagnostics) {
    diagnostics[name] = NumberToJson(value);
  }
  return Json{{"attack", result.attack},
              {"X_hat", columns},
              {"weights", weights},
              {"rmse", NumberToJson(result.rmse)},
              {"assignment", result.assignment},
              {"signs", result.signs},
              {"signs_resolved", result.signs_resolved},
              {"warnings", StringList(result.warnings)},
              {"diagnostics", diagnostics}};
}

Json BoundReportToJson(const BoundReport& r) {
  return Json{{"exact_sq", NumberToJson(r.exact_sq)},
              {"loose_sq", NumberToJson(r.loose_sq)},
              {"exact", NumberToJson(r.exact)},
              {"loose", NumberToJson(r.loose)},
              {"sigma", NumberToJson(r.sigma)},
              {"sigma_eff", NumberToJson(r.sigma_eff)},
              {"clip_factor", NumberToJson(r.clip_factor)},
              {"p_hat", NumberToJson(r.p_hat)},
              {"dropout_p", NumberToJson(r.dropout_p)},
              {"closed_form", NumberToJson(r.closed_form)},
              {"rank", r.rank},
              {"full_rank", r.full_rank},
              {"exact_on_range_sq", NumberToJson(r.exact_on_range_sq)},
              {"deleted_coordinates", r.deleted_coordinates},
              {"flags", StringList(r.flags)}};
}

Json TrialRecordToJson(const TrialRecord& record) {
  Json attacks = Json::array();
  for (const AttackOutcome& a : record.attacks) {
    attacks.push_back(Json{{"attack", a.attack},
                           {"rmse", NumberToJson(a.rmse)},
                           {"assignment", a.assignment},
                           {"signs", a.signs},
                           {"warnings", StringList(a.warnings)},
                           {"error", a.error}});
  }
  return Json{{"config_hash", record.config_hash},
              {"grid_index", record.grid_index},
              {"trial", record.trial},
              {"trial_seed", record.trial_seed},
              {"d", record.d},
              {"m", record.m},
              {"B", record.B},
              {"defense", record.defense},
              {"defense_param", NumberToJson(record.defense_param)},
              {"attacks", attacks},
              {"rl_exact", NumberToJson(record.rl_exact)},
              {"rl_loose", NumberToJson(record.rl_loose)},
              {"bound_flags", StringList(record.bound_flags)},
              {"utility_loss", NumberToJson(record.utility_loss)},
              {"utility_diverged", record.utility_diverged},
              {"wall_ms", NumberToJson(record.wall_ms)}};
}

absl::StatusOr<TrialRecord> TrialRecordFromJson(const Json& j) {
  if (!j.is_object()) {
    return absl::InvalidArgumentError("trial record: expected object");
  }
  TrialRecord r;
  try {
    r.config_hash = j.at("config_hash").get<std::string>();
    r.grid_index = j.at("grid_index").get<int>();
    r.trial = j.at("trial").get<int>();
    r.trial_seed = j.at("trial_seed").get<uint64_t>();
    r.d = j.at("d").get<int>();
    r.m = j.at("m").get<int>();
    r.B = j.at("B").get<int>();
    r.defense = j.at("defense").get<std::string>();
    ASSIGN_OR_RETURN(r.defense_param, NumberFromJson(j.at("defense_param")));
    for (const Json& a : j.at("attacks")) {
      AttackOutcome out;
      out.attack = a.at("attack").get<std::string>();
      ASSIGN_OR_RETURN(out.rmse, NumberFromJson(a.at("rmse")));
      out.assignment = a.at("assignment").get<std::vector<int>>();
      out.signs = a.at("signs").get<std::vector<int>>();
      out.warnings = a.at("warnings").get<std::vector<std::string>>();
      out.error = a.at("error").get<std::string>();
      r.attacks.push_back(std::move(out));
    }
    ASSIGN_OR_RETURN(r.rl_exact, NumberFromJson(j.at("rl_exact")));
    ASSIGN_OR_RETURN(r.rl_loose, NumberFromJson(j.at("rl_loose")));
    r.bound_flags = j.at("bound_flags").get<std::vector<std::string>>();
    ASSIGN_OR_RETURN(r.utility_loss, NumberFromJson(j.at("utility_loss")));
    r.utility_diverged = j.at("utility_diverged").get<bool>();
    ASSIGN_OR_RETURN(r.wall_ms, NumberFromJson(j.at("wall_ms")));
  } catch (const Json::exception& e) {
    return absl::InvalidArgumentError(
        absl::StrCat("trial record: ", e.what()));
  }
  return r;
}

}  // namespace gradleak
