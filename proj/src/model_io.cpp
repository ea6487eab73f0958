#include <cmath>

#include "cogmark/error.hpp"
#include "cogmark/learners.hpp"
#include "cogmark/serialize.hpp"

namespace cogmark {

namespace {

constexpr std::string_view kModelMagic = "CGMM";
constexpr std::size_t kPrefix = 6;  // magic + version + kind

void write_matrix(ByteWriter& out, const Eigen::MatrixXd& m) {
  out.u32(static_cast<std::uint32_t>(m.rows()));
  out.u32(static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.size(); ++i) out.f64(m.data()[i]);
}

Eigen::MatrixXd read_matrix(ByteReader& in) {
  const std::uint64_t rows = in.u32();
  const std::uint64_t cols = in.u32();
  if (rows * cols > in.remaining() / 8) throw Error(ErrorCode::kChecksumFailure, "matrix overruns container");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = in.f64();
  return m;
}

void write_trees(ByteWriter& out, const std::vector<DecisionTree>& trees) {
  out.u32(static_cast<std::uint32_t>(trees.size()));
  for (const auto& t : trees) t.write(out);
}

std::vector<DecisionTree> read_trees(ByteReader& in, std::size_t dim) {
  const std::uint32_t count = in.u32();
  if (count > in.remaining()) throw Error(ErrorCode::kChecksumFailure, "tree count overruns container");
  std::vector<DecisionTree> trees;
  trees.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) trees.push_back(DecisionTree::read(in, dim));
  return trees;
}

void write_state(ByteWriter& out, const ModelState& state) {
  std::visit(
      [&](const auto& s) {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, ForestState>) {
          write_trees(out, s.trees);
        } else if constexpr (std::is_same_v<S, AdaBoostState>) {
          write_trees(out, s.stages);
          out.f64s(s.stage_weights);
          out.f64s(s.fallback);
          out.u32(static_cast<std::uint32_t>(s.present_classes.size()));
          for (int c : s.present_classes) out.i32(c);
        } else if constexpr (std::is_same_v<S, GradientBoostingState>) {
          out.f64(s.initial);
          out.f64(s.learning_rate);
          write_trees(out, s.stages);
        } else {
          write_matrix(out, s.input_mean);
          write_matrix(out, s.input_scale);
          out.u32(static_cast<std::uint32_t>(s.layers.size()));
          for (const auto& layer : s.layers) {
            write_matrix(out, layer.weights);
            write_matrix(out, layer.bias);
          }
        }
      },
      state);
}

ModelState read_state(ByteReader& in, ModelKind kind, std::size_t dim) {
  const auto corrupt = [](const char* what) { return Error(ErrorCode::kChecksumFailure, what); };
  switch (kind) {
    case ModelKind::kRandomForestClassifier:
    case ModelKind::kRandomForestRegressor: {
      ForestState s;
      s.trees = read_trees(in, dim);
      if (s.trees.empty()) throw corrupt("forest without trees");
      return s;
    }
    case ModelKind::kAdaBoostClassifier:
    case ModelKind::kAdaBoostRegressor: {
      AdaBoostState s;
      s.stages = read_trees(in, dim);
      s.stage_weights = in.f64s();
      s.fallback = in.f64s();
      const std::uint32_t count = in.u32();
      if (count > 3) throw corrupt("bad class list");
      for (std::uint32_t i = 0; i < count; ++i) {
        const int c = in.i32();
        if (c < 0 || c > 2) throw corrupt("bad class index");
        s.present_classes.push_back(c);
      }
      const std::size_t want_fallback = kind == ModelKind::kAdaBoostClassifier ? 3 : 1;
      if (s.stage_weights.size() != s.stages.size() || s.fallback.size() != want_fallback) {
        throw corrupt("inconsistent boosting state");
      }
      return s;
    }
    case ModelKind::kGradientBoostingRegressor: {
      GradientBoostingState s;
      s.initial = in.f64();
      s.learning_rate = in.f64();
      s.stages = read_trees(in, dim);
      return s;
    }
    case ModelKind::kNeuralNetClassifier: {
      NeuralNetState s;
      s.input_mean = read_matrix(in);
      s.input_scale = read_matrix(in);
      const std::uint32_t count = in.u32();
      if (count == 0 || count > in.remaining()) throw corrupt("bad layer count");
      Eigen::Index width = static_cast<Eigen::Index>(dim);
      if (s.input_mean.size() != width || s.input_scale.size() != width) throw corrupt("bad input scaling");
      for (std::uint32_t i = 0; i < count; ++i) {
        DenseLayer layer;
        layer.weights = read_matrix(in);
        const Eigen::MatrixXd bias = read_matrix(in);
        if (layer.weights.cols() != width || bias.cols() != 1 || bias.rows() != layer.weights.rows()) {
          throw corrupt("layer shapes do not chain");
        }
        layer.bias = bias.col(0);
        width = layer.weights.rows();
        s.layers.push_back(std::move(layer));
      }
      if (width != 3) throw corrupt("output layer must have 3 units");
      return s;
    }
  }
  throw corrupt("unknown model kind");
}

}  // namespace

std::string save_model(const TrainedModel& m) {
  ByteWriter out;
  out.bytes(kModelMagic);
  out.u8(kModelFormatVersion);
  out.u8(static_cast<std::uint8_t>(m.kind()));
  out.str(m.hyperparameters().dump());
  const auto& meta = m.metadata();
  out.u64(meta.seed);
  out.u32(meta.dataset_fingerprint);
  out.u32(meta.training_rows);
  out.u8(meta.fallback ? 1 : 0);
  out.u32(static_cast<std::uint32_t>(meta.feature_names.size()));
  for (const auto& name : meta.feature_names) out.str(name);
  write_state(out, m.state());
  const std::uint32_t crc = crc32_bytes(out.data().data(), out.data().size());
  out.u32(crc);
  return out.take();
}

TrainedModel load_model(std::string_view bytes) {
  if (bytes.substr(0, 4) != kModelMagic) throw Error(ErrorCode::kNotAModelFile, "missing model magic");
  if (bytes.size() < kPrefix + 4) throw Error(ErrorCode::kChecksumFailure, "model file truncated");
  const auto version = static_cast<std::uint8_t>(bytes[4]);
  if (version != kModelFormatVersion) {
    throw Error(ErrorCode::kVersionMismatch, "model format version " + std::to_string(version) + ", expected " +
                                                 std::to_string(kModelFormatVersion));
  }
  const std::string_view body = bytes.substr(0, bytes.size() - 4);
  ByteReader tail(bytes.substr(bytes.size() - 4));
  if (crc32_bytes(body.data(), body.size()) != tail.u32()) {
    throw Error(ErrorCode::kChecksumFailure, "model checksum does not match");
  }

  ByteReader in(body.substr(kPrefix));
  const auto kind_byte = static_cast<std::uint8_t>(bytes[5]);
  if (kind_byte < 1 || kind_byte > 6) throw Error(ErrorCode::kChecksumFailure, "unknown model kind");
  const auto kind = static_cast<ModelKind>(kind_byte);
  Json hp;
  try {
    hp = Json::parse(in.str());
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::kChecksumFailure, "hyperparameter block is not valid JSON");
  }
  TrainingMetadata meta;
  meta.seed = in.u64();
  meta.dataset_fingerprint = in.u32();
  meta.training_rows = in.u32();
  meta.fallback = in.u8() != 0;
  const std::uint32_t names = in.u32();
  if (names > in.remaining() / 4) throw Error(ErrorCode::kChecksumFailure, "feature list overruns container");
  for (std::uint32_t i = 0; i < names; ++i) meta.feature_names.push_back(in.str());
  ModelState state = read_state(in, kind, meta.feature_names.size());
  if (!in.done()) throw Error(ErrorCode::kChecksumFailure, "trailing bytes after model state");
  return TrainedModel(kind, std::move(hp), std::move(state), std::move(meta));
}

}  // namespace cogmark
