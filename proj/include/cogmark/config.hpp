#pragma once

#include <optional>
#include <string>

#include "cogmark/ensemble.hpp"
#include "cogmark/pipeline.hpp"

namespace cogmark {

// Everything a CLI run can be told. Command-line flags override values read
// from a config file.
struct RunConfig {
  std::string manifest;
  std::string dev_manifest;
  std::string test_manifest;
  std::string out;
  std::string task = "all";  // CTD, SF, PF or all
  std::string features;      // empty = whatever the model config says
  std::string model_config = "cls1";  // submission name or path to a JSON pipeline config
  int k = 5;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  MissingTaskPolicy missing_task_policy = MissingTaskPolicy::kZeroFill;
  std::vector<std::string> filler_lexicon;
  FeatureRules rules;
  std::size_t embedding_dim = kDefaultEmbeddingDim;
  bool grid_search = true;
  Json grids = Json::object();  // learner name -> grid; replaces the member default

  void validate() const;
};

RunConfig default_run_config();
Json to_json(const RunConfig& config);
RunConfig run_config_from_json(const Json& j);  // unknown keys rejected
RunConfig load_run_config(const std::filesystem::path& path);

FeatureOptions feature_options(const RunConfig& config);

// Named submission config or JSON file, with grid and feature overrides
// from the run config applied.
PipelineConfig resolve_pipeline_config(const RunConfig& config);

}  // namespace cogmark
