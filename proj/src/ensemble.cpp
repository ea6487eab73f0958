#include "cogmark/ensemble.hpp"

#include <algorithm>
#include <cmath>

#include "cogmark/error.hpp"
#include "cogmark/parallel.hpp"
#include "cogmark/serialize.hpp"
#include "cogmark/types.hpp"

namespace cogmark {

std::string_view vote_kind_name(VoteKind kind) {
  switch (kind) {
    case VoteKind::kHard: return "hard";
    case VoteKind::kSoft: return "soft";
    case VoteKind::kRegressorMean: return "regressor_mean";
  }
  return "?";
}

namespace {

std::vector<double> resolve_weights(std::span<const double> weights, std::size_t members) {
  if (members == 0) throw Error(ErrorCode::kEmptyInput, "ensemble needs at least one member");
  if (weights.empty()) return std::vector<double>(members, 1.0);
  if (weights.size() != members) {
    throw Error(ErrorCode::kLengthMismatch, "expected " + std::to_string(members) + " member weights");
  }
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) {
      throw Error(ErrorCode::kInvalidHyperparameter, "member weights must be positive and finite");
    }
  }
  return {weights.begin(), weights.end()};
}

void check_same_rows(std::span<const Eigen::MatrixXd> m) {
  for (const auto& p : m) {
    if (p.rows() != m.front().rows() || p.cols() != kNumClasses) {
      throw Error(ErrorCode::kLengthMismatch, "member probability matrices differ in shape");
    }
  }
}

void check_members(std::span<const TrainedModel> members, TargetKind want) {
  if (members.empty()) throw Error(ErrorCode::kEmptyInput, "ensemble needs at least one member");
  const auto& names = members.front().metadata().feature_names;
  for (const auto& m : members) {
    if (m.target() != want) {
      throw Error(ErrorCode::kMixedTaskMembers, std::string(model_kind_name(m.kind())) +
                                                    " does not match the ensemble's task type");
    }
    if (m.metadata().feature_names != names) {
      throw Error(ErrorCode::kSchemaMismatch, "ensemble members were trained on different feature schemas");
    }
  }
}

}  // namespace

Eigen::MatrixXd combine_soft(std::span<const Eigen::MatrixXd> members, std::span<const double> weights) {
  const auto w = resolve_weights(weights, members.size());
  check_same_rows(members);
  double total = 0.0;
  for (double v : w) total += v;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(members.front().rows(), kNumClasses);
  for (std::size_t m = 0; m < members.size(); ++m) out += (w[m] / total) * members[m];
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double s = out.row(i).sum();
    if (std::abs(s - 1.0) > 1e-9 && s > 0.0) out.row(i) /= s;
  }
  return out;
}

int hard_vote_winner(const std::array<double, 3>& votes, const std::array<double, 3>& soft_scores) {
  int best = 0;
  for (int k = 1; k < kNumClasses; ++k) {
    if (votes[k] > votes[best] || (votes[k] == votes[best] && soft_scores[k] > soft_scores[best])) best = k;
  }
  return best;
}

std::vector<int> combine_hard(std::span<const Eigen::MatrixXd> members, std::span<const double> weights) {
  const auto w = resolve_weights(weights, members.size());
  check_same_rows(members);
  std::vector<int> out(static_cast<std::size_t>(members.front().rows()));
  for (Eigen::Index i = 0; i < members.front().rows(); ++i) {
    std::array<double, 3> votes{};
    std::array<double, 3> soft{};
    for (std::size_t m = 0; m < members.size(); ++m) {
      int arg = 0;
      for (int k = 1; k < kNumClasses; ++k) {
        if (members[m](i, k) > members[m](i, arg)) arg = k;
      }
      votes[arg] += w[m];
      for (int k = 0; k < kNumClasses; ++k) soft[k] += w[m] * members[m](i, k);
    }
    out[static_cast<std::size_t>(i)] = hard_vote_winner(votes, soft);
  }
  return out;
}

Eigen::VectorXd combine_regress(std::span<const Eigen::VectorXd> members, std::span<const double> weights) {
  const auto w = resolve_weights(weights, members.size());
  double total = 0.0;
  for (double v : w) total += v;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(members.front().size());
  for (std::size_t m = 0; m < members.size(); ++m) {
    if (members[m].size() != out.size()) throw Error(ErrorCode::kLengthMismatch, "member outputs differ in length");
    out += w[m] * members[m];
  }
  out /= total;
  return out.unaryExpr([](double v) { return std::clamp(v, kMmseMin, kMmseMax); });
}

VotingEnsemble::VotingEnsemble(std::vector<TrainedModel> members, VoteKind vote, std::vector<double> weights)
    : members_(std::move(members)), vote_(vote) {
  weights_ = resolve_weights(weights, members_.size());
  const TargetKind want = vote == VoteKind::kRegressorMean ? TargetKind::kRegression : TargetKind::kClassification;
  check_members(members_, want);
}

EnsemblePrediction VotingEnsemble::predict(const FeatureMatrix& x, std::span<const std::string> columns,
                                           unsigned jobs) const {
  std::vector<Prediction> outputs(members_.size());
  parallel_for(members_.size(), jobs, [&](std::size_t m) { outputs[m] = members_[m].predict(x, columns); });
  EnsemblePrediction out;
  out.kind = target();
  if (out.kind == TargetKind::kRegression) {
    std::vector<Eigen::VectorXd> values;
    for (auto& p : outputs) values.push_back(std::move(p.values));
    out.values = combine_regress(values, weights_);
    return out;
  }
  std::vector<Eigen::MatrixXd> probs;
  for (auto& p : outputs) probs.push_back(std::move(p.probabilities));
  out.probabilities = combine_soft(probs, weights_);
  if (vote_ == VoteKind::kHard) {
    out.labels = combine_hard(probs, weights_);
  } else {
    Prediction tmp;
    tmp.probabilities = out.probabilities;
    out.labels = tmp.labels();
  }
  return out;
}

namespace {

template <typename Fn>
auto member_outputs(std::span<const TrainedModel> members, TargetKind want, Fn&& fn) {
  check_members(members, want);
  using T = decltype(fn(members.front()));
  std::vector<T> outputs;
  for (const auto& m : members) outputs.push_back(fn(m));
  return outputs;
}

}  // namespace

Eigen::MatrixXd vote_soft(std::span<const TrainedModel> members, const FeatureMatrix& x,
                          std::span<const double> weights) {
  const auto probs = member_outputs(members, TargetKind::kClassification,
                                    [&](const TrainedModel& m) { return m.predict(x).probabilities; });
  return combine_soft(probs, weights);
}

std::vector<int> vote_hard(std::span<const TrainedModel> members, const FeatureMatrix& x,
                           std::span<const double> weights) {
  const auto probs = member_outputs(members, TargetKind::kClassification,
                                    [&](const TrainedModel& m) { return m.predict(x).probabilities; });
  return combine_hard(probs, weights);
}

Eigen::VectorXd vote_regress(std::span<const TrainedModel> members, const FeatureMatrix& x,
                             std::span<const double> weights) {
  const auto values = member_outputs(members, TargetKind::kRegression,
                                     [&](const TrainedModel& m) { return m.predict(x).values; });
  return combine_regress(values, weights);
}

// ---------------------------------------------------------------------------
// Configurations

std::string_view feature_source_name(FeatureSource source) {
  return source == FeatureSource::kLinguistic42 ? "linguistic_42" : "embedding_ctd";
}

std::string_view train_split_name(TrainSplit split) {
  return split == TrainSplit::kTrain ? "train" : "train+dev";
}

Json default_grid(LearnerFamily family) {
  switch (family) {
    case LearnerFamily::kRandomForest:
      return Json{{"max_depth", Json::array({nullptr, 8})},
                  {"min_samples_leaf", Json::array({1, 3})},
                  {"n_trees", Json::array({100, 300})}};
    case LearnerFamily::kAdaBoost:
      return Json{{"learning_rate", Json::array({0.5, 1.0})}, {"n_estimators", Json::array({50, 200})}};
    case LearnerFamily::kGradientBoosting:
      return Json{{"learning_rate", Json::array({0.05, 0.1})},
                  {"max_depth", Json::array({2, 3})},
                  {"n_estimators", Json::array({100, 300})}};
    case LearnerFamily::kNeuralNet:
      return Json{{"hidden_sizes", Json::array({Json::array({64}), Json::array({128, 64})})},
                  {"learning_rate", Json::array({1e-3, 1e-2})}};
  }
  return Json::object();
}

namespace {

MemberSpec member(LearnerFamily family) { return {family, Json::object(), default_grid(family)}; }

}  // namespace

std::vector<std::string> submission_config_names() { return {"cls1", "cls2", "cls3", "reg1", "reg2", "reg3"}; }

PipelineConfig build_submission_config(std::string_view name) {
  PipelineConfig c;
  c.name = std::string(name);
  if (name == "cls1") {
    c.target = TargetKind::kClassification;
    c.features = FeatureSource::kLinguistic42;
    c.members = {member(LearnerFamily::kRandomForest)};
    c.vote = VoteKind::kSoft;
    c.train_split = TrainSplit::kTrainDev;
  } else if (name == "cls2" || name == "cls3") {
    c.target = TargetKind::kClassification;
    c.features = FeatureSource::kEmbeddingCtd;
    c.members = {member(LearnerFamily::kRandomForest), member(LearnerFamily::kAdaBoost),
                 member(LearnerFamily::kNeuralNet)};
    c.vote = VoteKind::kSoft;
    c.train_split = name == "cls2" ? TrainSplit::kTrain : TrainSplit::kTrainDev;
  } else if (name == "reg1" || name == "reg2" || name == "reg3") {
    c.target = TargetKind::kRegression;
    c.features = name == "reg1" ? FeatureSource::kLinguistic42 : FeatureSource::kEmbeddingCtd;
    c.members = {member(LearnerFamily::kRandomForest), member(LearnerFamily::kAdaBoost),
                 member(LearnerFamily::kGradientBoosting)};
    c.vote = VoteKind::kRegressorMean;
    c.train_split = name == "reg2" ? TrainSplit::kTrain : TrainSplit::kTrainDev;
  } else {
    throw Error(ErrorCode::kUnknownConfigName, "unknown configuration '" + std::string(name) +
                                                   "'; expected one of cls1..cls3, reg1..reg3");
  }
  return c;
}

Json to_json(const PipelineConfig& c) {
  Json members = Json::array();
  for (const auto& m : c.members) {
    members.push_back(Json{{"learner", learner_family_name(m.family)},
                           {"hyperparameters", m.hyperparameters},
                           {"grid", m.grid}});
  }
  return Json{{"name", c.name},
              {"target", c.target == TargetKind::kClassification ? "classification" : "regression"},
              {"features", feature_source_name(c.features)},
              {"members", members},
              {"vote", vote_kind_name(c.vote)},
              {"weights", c.weights},
              {"train_split", train_split_name(c.train_split)},
              {"grid_search", c.grid_search}};
}

PipelineConfig pipeline_config_from_json(const Json& j) {
  const auto bad = [](const std::string& what) { return Error(ErrorCode::kInvalidConfig, what); };
  if (!j.is_object()) throw bad("pipeline config must be a JSON object");
  static const std::vector<std::string> known = {"name",   "target",  "features",    "members",
                                                 "vote",   "weights", "train_split", "grid_search"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) throw bad("unknown config key '" + key + "'");
  }
  try {
    PipelineConfig c;
    c.name = j.value("name", std::string("custom"));
    const std::string target = j.at("target").get<std::string>();
    if (target == "classification") {
      c.target = TargetKind::kClassification;
    } else if (target == "regression") {
      c.target = TargetKind::kRegression;
    } else {
      throw bad("target must be classification or regression");
    }
    const std::string features = j.at("features").get<std::string>();
    if (features == "linguistic_42") {
      c.features = FeatureSource::kLinguistic42;
    } else if (features == "embedding_ctd") {
      c.features = FeatureSource::kEmbeddingCtd;
    } else {
      throw bad("features must be linguistic_42 or embedding_ctd");
    }
    for (const auto& m : j.at("members")) {
      MemberSpec spec;
      const auto family = parse_learner_family(m.at("learner").get<std::string>());
      if (!family) throw bad("unknown learner '" + m.at("learner").get<std::string>() + "'");
      spec.family = *family;
      spec.hyperparameters = m.value("hyperparameters", Json::object());
      spec.grid = m.value("grid", Json::object());
      model_kind_for(spec.family, c.target);
      c.members.push_back(std::move(spec));
    }
    if (c.members.empty()) throw bad("config needs at least one member");
    const std::string vote = j.value("vote", std::string(c.target == TargetKind::kRegression ? "regressor_mean" : "soft"));
    if (vote == "hard") {
      c.vote = VoteKind::kHard;
    } else if (vote == "soft") {
      c.vote = VoteKind::kSoft;
    } else if (vote == "regressor_mean") {
      c.vote = VoteKind::kRegressorMean;
    } else {
      throw bad("vote must be hard, soft or regressor_mean");
    }
    if ((c.vote == VoteKind::kRegressorMean) != (c.target == TargetKind::kRegression)) {
      throw bad("regressor_mean voting goes with regression targets only");
    }
    c.weights = j.value("weights", std::vector<double>{});
    resolve_weights(c.weights, c.members.size());
    const std::string split = j.value("train_split", std::string("train+dev"));
    if (split == "train") {
      c.train_split = TrainSplit::kTrain;
    } else if (split == "train+dev") {
      c.train_split = TrainSplit::kTrainDev;
    } else {
      throw bad("train_split must be train or train+dev");
    }
    c.grid_search = j.value("grid_search", true);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw bad(std::string("malformed pipeline config: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Container

namespace {

constexpr std::string_view kEnsembleMagic = "CGME";
constexpr std::uint8_t kEnsembleVersion = 1;

}  // namespace

std::string save_ensemble(const VotingEnsemble& ensemble, const PipelineConfig& config) {
  ByteWriter out;
  out.bytes(kEnsembleMagic);
  out.u8(kEnsembleVersion);
  out.u8(static_cast<std::uint8_t>(ensemble.vote()));
  out.str(to_json(config).dump());
  out.u32(static_cast<std::uint32_t>(ensemble.members().size()));
  for (std::size_t m = 0; m < ensemble.members().size(); ++m) {
    out.str(model_kind_name(ensemble.members()[m].kind()));
    out.f64(ensemble.weights()[m]);
    out.str(save_model(ensemble.members()[m]));
  }
  out.u32(crc32_bytes(out.data().data(), out.data().size()));
  return out.take();
}

LoadedEnsemble load_ensemble(std::string_view bytes) {
  if (bytes.substr(0, 4) != kEnsembleMagic) throw Error(ErrorCode::kNotAModelFile, "missing ensemble magic");
  if (bytes.size() < 10) throw Error(ErrorCode::kChecksumFailure, "ensemble file truncated");
  if (static_cast<std::uint8_t>(bytes[4]) != kEnsembleVersion) {
    throw Error(ErrorCode::kVersionMismatch, "unsupported ensemble container version");
  }
  const auto body = bytes.substr(0, bytes.size() - 4);
  ByteReader tail(bytes.substr(bytes.size() - 4));
  if (crc32_bytes(body.data(), body.size()) != tail.u32()) {
    throw Error(ErrorCode::kChecksumFailure, "ensemble checksum does not match");
  }
  ByteReader in(body.substr(5));
  const std::uint8_t vote = in.u8();
  if (vote > 2) throw Error(ErrorCode::kChecksumFailure, "unknown vote kind");
  PipelineConfig config;
  try {
    config = pipeline_config_from_json(Json::parse(in.str()));
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::kChecksumFailure, "config block is not valid JSON");
  }
  const std::uint32_t count = in.u32();
  if (count == 0 || count > in.remaining()) throw Error(ErrorCode::kChecksumFailure, "bad member count");
  std::vector<TrainedModel> members;
  std::vector<double> weights;
  for (std::uint32_t m = 0; m < count; ++m) {
    in.str();  // member manifest entry: kind name
    weights.push_back(in.f64());
    members.push_back(load_model(in.str()));
  }
  if (!in.done()) throw Error(ErrorCode::kChecksumFailure, "trailing bytes after ensemble members");
  return {VotingEnsemble(std::move(members), static_cast<VoteKind>(vote), std::move(weights)), std::move(config)};
}

}  // namespace cogmark
