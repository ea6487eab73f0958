#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "cogmark/transcript.hpp"
#include "cogmark/types.hpp"

namespace cogmark {

inline constexpr std::size_t kDefaultEmbeddingDim = 1280;

// Frame-by-dimension matrix for one recording; a single row means pre-pooled.
struct EmbeddingMatrix {
  std::string participant_id;
  Task task = Task::kCtd;
  Eigen::MatrixXd values;  // rows = frames

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(values.cols()); }
};

struct PooledEmbedding {
  std::string participant_id;
  Task task = Task::kCtd;
  Eigen::VectorXd values;
};

enum class PoolingMethod { kMean };

// Text form: comma-separated reals, one frame per line, no header.
Eigen::MatrixXd parse_embedding_text(std::string_view text, std::size_t expected_dim);
// Binary form: "EMB1", u32 rows, u32 dim, 4 reserved bytes, rows*dim float32, all little-endian.
Eigen::MatrixXd parse_embedding_binary(std::string_view bytes, std::size_t expected_dim);

std::string serialize_embedding_text(const Eigen::MatrixXd& m);
std::string serialize_embedding_binary(const Eigen::MatrixXd& m);

// Detects the binary form by its magic; otherwise parses text.
EmbeddingMatrix load_embedding(const std::filesystem::path& path, std::size_t expected_dim = kDefaultEmbeddingDim,
                               std::string participant_id = {}, Task task = Task::kCtd);

PooledEmbedding pool(const EmbeddingMatrix& m, PoolingMethod method = PoolingMethod::kMean);

struct EmbeddingJoin {
  std::vector<PooledEmbedding> embeddings;  // manifest participant order
  std::vector<ValidationFinding> findings;  // participants without a usable file
};

EmbeddingJoin join_embeddings(const CohortManifest& manifest, Task task_filter = Task::kCtd,
                              std::size_t expected_dim = kDefaultEmbeddingDim, unsigned jobs = 1);

}  // namespace cogmark
