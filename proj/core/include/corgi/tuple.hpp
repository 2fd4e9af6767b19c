#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace corgi {

enum class Task : std::uint8_t { Binary = 0, Multiclass = 1, Regression = 2 };
enum class Encoding : std::uint8_t { Dense = 0, Sparse = 1 };

// One training example. Exactly one representation is populated:
//   dense       feature vector of length d
//   idx/val     strictly increasing feature indices with their values
// A sparse tuple with no nonzeros has all three vectors empty; is_dense()
// is false for it and every numeric routine treats it as the zero vector.
struct Tuple {
  std::uint64_t id = 0;  // 0-based original position; survives reordering
  float label = 0.0f;    // +/-1 (binary), class id (multiclass), target (regression)
  std::vector<float> dense;
  std::vector<std::uint32_t> idx;
  std::vector<float> val;

  bool is_dense() const { return !dense.empty(); }
};

struct DatasetMeta {
  std::uint32_t version = 1;
  Task task = Task::Binary;
  Encoding encoding = Encoding::Dense;
  std::uint32_t num_classes = 2;  // 2 binary, C multiclass, 0 regression
  std::uint64_t tuple_count = 0;  // m
  std::uint64_t dimension = 0;    // d
  std::uint64_t block_size_bytes = 10ull << 20;
  // Tuples per full block; fixed for dense encodings, 0 when it varies
  // (sparse blocks are filled greedily by byte budget).
  std::uint64_t tuples_per_block = 0;
};

// Bytes the tuple occupies inside a block.
// dense:  id(8) label(4) d*f32      sparse: id(8) label(4) nnz(4) nnz*(u32+f32)
inline std::size_t encoded_size(const Tuple& t, Encoding enc,
                                std::uint64_t dimension) {
  if (enc == Encoding::Dense) return 12 + 4 * static_cast<std::size_t>(dimension);
  return 16 + 8 * t.idx.size();
}

inline double dot(const std::vector<double>& w, const Tuple& t) {
  double z = 0.0;
  if (t.is_dense()) {
    for (std::size_t i = 0; i < t.dense.size(); ++i) z += w[i] * t.dense[i];
  } else {
    for (std::size_t k = 0; k < t.idx.size(); ++k) z += w[t.idx[k]] * t.val[k];
  }
  return z;
}

// dot against row `row` of a row-major (rows x dim) matrix
inline double dot_row(const std::vector<double>& mat, std::size_t dim,
                      std::size_t row, const Tuple& t) {
  const std::size_t base = row * dim;
  double z = 0.0;
  if (t.is_dense()) {
    for (std::size_t i = 0; i < t.dense.size(); ++i) z += mat[base + i] * t.dense[i];
  } else {
    for (std::size_t k = 0; k < t.idx.size(); ++k) z += mat[base + t.idx[k]] * t.val[k];
  }
  return z;
}

}  // namespace corgi
