#include "cogmark/embedding.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <optional>

#include "cogmark/error.hpp"
#include "cogmark/parallel.hpp"
#include "text_util.hpp"

namespace cogmark {

namespace {

constexpr std::string_view kBinaryMagic = "EMB1";
constexpr std::size_t kBinaryHeaderSize = 16;

std::uint32_t read_u32_le(const char* p) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(p[i]);
  return v;
}

void append_u32_le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void check_dim(std::size_t got, std::size_t expected, const std::string& where) {
  if (expected != 0 && got != expected) {
    throw Error(ErrorCode::kDimensionMismatch,
                where + ": dimension " + std::to_string(got) + ", expected " + std::to_string(expected));
  }
}

}  // namespace

Eigen::MatrixXd parse_embedding_text(std::string_view text, std::size_t expected_dim) {
  const auto lines = detail::split_lines(detail::strip_bom(text));
  std::vector<std::vector<double>> rows;
  std::size_t dim = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (detail::is_blank(lines[i])) continue;
    const auto cells = detail::split(lines[i], ',');
    const std::string where = "line " + std::to_string(i + 1);
    if (rows.empty()) {
      dim = cells.size();
      check_dim(dim, expected_dim, where);
    } else if (cells.size() != dim) {
      throw Error(ErrorCode::kDimensionMismatch, where + ": row has " + std::to_string(cells.size()) +
                                                     " values, previous rows have " + std::to_string(dim));
    }
    std::vector<double> row;
    row.reserve(dim);
    for (const auto cell : cells) {
      const auto v = detail::parse_real(cell);
      if (!v) throw Error(ErrorCode::kNonFiniteValue, where + ": not a number: '" + std::string(cell) + "'");
      if (!std::isfinite(*v)) throw Error(ErrorCode::kNonFiniteValue, where + ": non-finite value");
      row.push_back(*v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorCode::kEmptyMatrix, "embedding file has no frames");
  Eigen::MatrixXd m(rows.size(), dim);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < dim; ++c) m(r, c) = rows[r][c];
  }
  return m;
}

Eigen::MatrixXd parse_embedding_binary(std::string_view bytes, std::size_t expected_dim) {
  if (bytes.size() < kBinaryHeaderSize || bytes.substr(0, 4) != kBinaryMagic) {
    throw Error(ErrorCode::kIoFailure, "not an EMB1 embedding file");
  }
  const std::uint32_t rows = read_u32_le(bytes.data() + 4);
  const std::uint32_t dim = read_u32_le(bytes.data() + 8);
  if (rows == 0 || dim == 0) throw Error(ErrorCode::kEmptyMatrix, "embedding file has no frames");
  check_dim(dim, expected_dim, "EMB1 header");
  const std::uint64_t count = static_cast<std::uint64_t>(rows) * dim;
  if (bytes.size() != kBinaryHeaderSize + 4 * count) {
    throw Error(ErrorCode::kDimensionMismatch, "EMB1 payload size does not match " + std::to_string(rows) +
                                                   "x" + std::to_string(dim));
  }
  Eigen::MatrixXd m(rows, dim);
  const char* p = bytes.data() + kBinaryHeaderSize;
  for (std::uint32_t r = 0; r < rows; ++r) {
    for (std::uint32_t c = 0; c < dim; ++c, p += 4) {
      const float v = std::bit_cast<float>(read_u32_le(p));
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::kNonFiniteValue, "non-finite value at frame " + std::to_string(r));
      }
      m(r, c) = v;
    }
  }
  return m;
}

std::string serialize_embedding_text(const Eigen::MatrixXd& m) {
  std::string out;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out += ',';
      out += detail::format_real(m(r, c));
    }
    out += '\n';
  }
  return out;
}

std::string serialize_embedding_binary(const Eigen::MatrixXd& m) {
  std::string out(kBinaryMagic);
  append_u32_le(out, static_cast<std::uint32_t>(m.rows()));
  append_u32_le(out, static_cast<std::uint32_t>(m.cols()));
  append_u32_le(out, 0);
  out.reserve(kBinaryHeaderSize + 4 * m.size());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      append_u32_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(m(r, c))));
    }
  }
  return out;
}

EmbeddingMatrix load_embedding(const std::filesystem::path& path, std::size_t expected_dim,
                               std::string participant_id, Task task) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::kMissingEmbeddingFile, "embedding file not found: " + path.string());
  }
  const std::string bytes = detail::read_file(path);
  EmbeddingMatrix m;
  m.participant_id = std::move(participant_id);
  m.task = task;
  try {
    m.values = std::string_view(bytes).substr(0, 4) == kBinaryMagic ? parse_embedding_binary(bytes, expected_dim)
                                                                    : parse_embedding_text(bytes, expected_dim);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
  return m;
}

PooledEmbedding pool(const EmbeddingMatrix& m, PoolingMethod method) {
  if (m.rows() == 0) throw Error(ErrorCode::kEmptyMatrix, "cannot pool an empty matrix");
  PooledEmbedding out;
  out.participant_id = m.participant_id;
  out.task = m.task;
  switch (method) {
    case PoolingMethod::kMean:
      out.values = m.rows() == 1 ? Eigen::VectorXd(m.values.row(0).transpose())
                                 : Eigen::VectorXd(m.values.colwise().mean().transpose());
      break;
  }
  return out;
}

EmbeddingJoin join_embeddings(const CohortManifest& manifest, Task task_filter, std::size_t expected_dim,
                              unsigned jobs) {
  std::vector<const ManifestRow*> selected;
  EmbeddingJoin join;
  for (const auto& id : manifest.participant_ids()) {
    const ManifestRow* match = nullptr;
    for (const auto& row : manifest.rows) {
      if (row.participant_id == id && row.task == task_filter) match = &row;
    }
    const std::string task(task_name(task_filter));
    if (!match) {
      join.findings.push_back({id, FindingKind::kMissingTask, "no " + task + " row", false});
    } else if (!match->embedding_path) {
      join.findings.push_back({id, FindingKind::kMissingEmbedding, task + " row has no embedding_path", false});
    } else {
      selected.push_back(match);
    }
  }

  std::vector<std::optional<PooledEmbedding>> pooled(selected.size());
  std::vector<std::optional<ValidationFinding>> failures(selected.size());
  parallel_for(selected.size(), jobs, [&](std::size_t i) {
    const ManifestRow& row = *selected[i];
    try {
      pooled[i] = pool(load_embedding(manifest.resolve(*row.embedding_path), expected_dim, row.participant_id,
                                      row.task));
    } catch (const Error& e) {
      const auto kind = e.code() == ErrorCode::kMissingEmbeddingFile ? FindingKind::kMissingEmbeddingFile
                                                                      : FindingKind::kMissingEmbedding;
      failures[i] = ValidationFinding{row.participant_id, kind, e.what(), true};
    }
  });
  for (std::size_t i = 0; i < selected.size(); ++i) {
    if (pooled[i]) join.embeddings.push_back(std::move(*pooled[i]));
    if (failures[i]) join.findings.push_back(std::move(*failures[i]));
  }
  return join;
}

}  // namespace cogmark
