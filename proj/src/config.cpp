#include "cogmark/config.hpp"

#include <algorithm>

#include "cogmark/error.hpp"
#include "text_util.hpp"

namespace cogmark {

namespace {

Error bad(const std::string& what) { return Error(ErrorCode::kInvalidConfig, what); }

std::vector<std::string> sorted(const std::set<std::string>& s) { return {s.begin(), s.end()}; }

}  // namespace

void RunConfig::validate() const {
  if (task != "all" && !parse_task(task)) throw bad("task must be CTD, SF, PF or all");
  if (!features.empty() && features != "linguistic_42" && features != "embedding_ctd") {
    throw bad("features must be linguistic_42 or embedding_ctd");
  }
  if (model_config.empty()) throw bad("model_config must not be empty");
  if (k < 2) throw bad("k must be at least 2");
  if (jobs < 1) throw bad("jobs must be at least 1");
  if (embedding_dim == 0) throw bad("embedding_dim must be positive");
  if (!grids.is_object()) throw bad("grids must be an object keyed by learner name");
  for (const auto& [name, grid] : grids.items()) {
    if (!parse_learner_family(name)) throw bad("grids: unknown learner '" + name + "'");
    expand_grid(grid);
  }
}

RunConfig default_run_config() {
  RunConfig c;
  const auto lexicon = default_filler_lexicon();
  c.filler_lexicon.assign(lexicon.begin(), lexicon.end());
  std::sort(c.filler_lexicon.begin(), c.filler_lexicon.end());
  for (auto family : {LearnerFamily::kRandomForest, LearnerFamily::kAdaBoost, LearnerFamily::kGradientBoosting,
                      LearnerFamily::kNeuralNet}) {
    c.grids[std::string(learner_family_name(family))] = default_grid(family);
  }
  return c;
}

Json to_json(const RunConfig& c) {
  return Json{{"manifest", c.manifest},
              {"dev_manifest", c.dev_manifest},
              {"test_manifest", c.test_manifest},
              {"out", c.out},
              {"task", c.task},
              {"features", c.features},
              {"model_config", c.model_config},
              {"k", c.k},
              {"seed", c.seed},
              {"jobs", c.jobs},
              {"missing_task_policy", c.missing_task_policy == MissingTaskPolicy::kZeroFill ? "zero_fill" : "reject"},
              {"filler_lexicon", c.filler_lexicon},
              {"definite_determiners", sorted(c.rules.definite_determiners)},
              {"relation_mapping", c.rules.relation_mapping},
              {"include_fillers_in_total", c.rules.include_fillers_in_total},
              {"embedding_dim", c.embedding_dim},
              {"grid_search", c.grid_search},
              {"grids", c.grids}};
}

RunConfig run_config_from_json(const Json& j) {
  if (!j.is_object()) throw bad("run config must be a JSON object");
  RunConfig c = default_run_config();
  const Json known = to_json(c);
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw bad("unknown run config key '" + key + "'");
  }
  try {
    c.manifest = j.value("manifest", c.manifest);
    c.dev_manifest = j.value("dev_manifest", c.dev_manifest);
    c.test_manifest = j.value("test_manifest", c.test_manifest);
    c.out = j.value("out", c.out);
    c.task = j.value("task", c.task);
    c.features = j.value("features", c.features);
    c.model_config = j.value("model_config", c.model_config);
    c.k = j.value("k", c.k);
    c.seed = j.value("seed", c.seed);
    c.jobs = j.value("jobs", c.jobs);
    const std::string policy = j.value("missing_task_policy", std::string("zero_fill"));
    if (policy == "zero_fill") {
      c.missing_task_policy = MissingTaskPolicy::kZeroFill;
    } else if (policy == "reject") {
      c.missing_task_policy = MissingTaskPolicy::kReject;
    } else {
      throw bad("missing_task_policy must be zero_fill or reject");
    }
    c.filler_lexicon = j.value("filler_lexicon", c.filler_lexicon);
    if (j.contains("definite_determiners")) {
      const auto dets = j.at("definite_determiners").get<std::vector<std::string>>();
      c.rules.definite_determiners = {dets.begin(), dets.end()};
    }
    c.rules.relation_mapping = j.value("relation_mapping", c.rules.relation_mapping);
    c.rules.include_fillers_in_total = j.value("include_fillers_in_total", c.rules.include_fillers_in_total);
    c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
    c.grid_search = j.value("grid_search", c.grid_search);
    if (j.contains("grids")) {
      // Partial override: families not mentioned keep their defaults.
      for (const auto& [name, grid] : j.at("grids").items()) c.grids[name] = grid;
    }
  } catch (const nlohmann::json::exception& e) {
    throw bad(std::string("malformed run config: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  const std::string text = detail::read_file(path);
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw bad(path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

FeatureOptions feature_options(const RunConfig& c) {
  FeatureOptions o;
  o.rules = c.rules;
  o.transcript.filler_lexicon.clear();
  for (const auto& w : c.filler_lexicon) o.transcript.filler_lexicon.insert(detail::to_lower(w));
  o.missing_task_policy = c.missing_task_policy;
  o.embedding_dim = c.embedding_dim;
  o.jobs = c.jobs;
  return o;
}

PipelineConfig resolve_pipeline_config(const RunConfig& c) {
  PipelineConfig p;
  const auto names = submission_config_names();
  if (std::find(names.begin(), names.end(), c.model_config) != names.end()) {
    p = build_submission_config(c.model_config);
  } else if (std::filesystem::exists(c.model_config)) {
    Json j;
    try {
      j = Json::parse(detail::read_file(c.model_config));
    } catch (const nlohmann::json::exception& e) {
      throw bad(c.model_config + ": " + e.what());
    }
    p = pipeline_config_from_json(j);
  } else {
    throw Error(ErrorCode::kUnknownConfigName,
                "'" + c.model_config + "' is neither cls1..cls3/reg1..reg3 nor an existing config file");
  }
  for (auto& m : p.members) {
    const std::string family(learner_family_name(m.family));
    if (c.grids.contains(family)) m.grid = c.grids.at(family);
  }
  p.grid_search = p.grid_search && c.grid_search;
  if (c.features == "linguistic_42") p.features = FeatureSource::kLinguistic42;
  if (c.features == "embedding_ctd") p.features = FeatureSource::kEmbeddingCtd;
  return p;
}

}  // namespace cogmark
