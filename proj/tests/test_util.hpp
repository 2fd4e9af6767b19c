#pragma once

// Shared fixtures for the unit tests: a self-cleaning temp directory and a
// few helpers for building small datasets and draining tuple streams.

#include <unistd.h>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include "corgi/dataset.hpp"
#include "corgi/stream.hpp"

namespace corgi_test {

class TempDir {
 public:
  TempDir() {
    static std::atomic<std::uint64_t> counter{0};
    const auto base = std::filesystem::temp_directory_path();
    path_ = base / ("corgi-test-" + std::to_string(::getpid()) + "-" +
                    std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string operator/(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Dense block size holding exactly `tuples` tuples of dimension `dim`.
inline std::uint64_t dense_block_bytes(std::uint64_t tuples, std::uint64_t dim) {
  return tuples * (12 + 4 * dim);
}

// Writes a dense binary-task dataset from explicit tuples.
inline corgi::DatasetMeta write_dense(const std::string& path,
                                      const std::vector<corgi::Tuple>& tuples,
                                      std::uint64_t dim,
                                      std::uint64_t tuples_per_block,
                                      corgi::Task task = corgi::Task::Binary,
                                      std::uint32_t num_classes = 2) {
  corgi::DatasetMeta meta;
  meta.task = task;
  meta.encoding = corgi::Encoding::Dense;
  meta.num_classes = num_classes;
  meta.dimension = dim;
  meta.block_size_bytes = dense_block_bytes(tuples_per_block, dim);
  corgi::DatasetWriter w(path, meta);
  for (const auto& t : tuples) w.append(t);
  return w.finalize();
}

// Label-clustered binary dataset: ids 0..m-1, first half labeled -1 around
// -mu, second half +1 around +mu (mu per coordinate).
inline corgi::DatasetMeta make_clustered(const std::string& path, std::uint64_t m,
                                         std::uint64_t dim, std::uint64_t tuples_per_block,
                                         std::uint64_t seed = 0, float mu = 0.5f,
                                         float noise = 1.0f) {
  corgi::SyntheticSpec spec;
  spec.tuple_count = m;
  spec.dimension = dim;
  spec.task = corgi::Task::Binary;
  spec.class_means = {std::vector<float>(dim, -mu), std::vector<float>(dim, mu)};
  spec.noise_stddev = noise;
  spec.order = corgi::SyntheticSpec::Order::LabelClustered;
  spec.seed = seed;
  return corgi::generate_synthetic(spec, path, dense_block_bytes(tuples_per_block, dim));
}

inline corgi::DatasetMeta make_shuffled(const std::string& path, std::uint64_t m,
                                        std::uint64_t dim, std::uint64_t tuples_per_block,
                                        std::uint64_t seed = 0, float mu = 0.5f,
                                        float noise = 1.0f) {
  corgi::SyntheticSpec spec;
  spec.tuple_count = m;
  spec.dimension = dim;
  spec.task = corgi::Task::Binary;
  spec.class_means = {std::vector<float>(dim, -mu), std::vector<float>(dim, mu)};
  spec.noise_stddev = noise;
  spec.order = corgi::SyntheticSpec::Order::Shuffled;
  spec.seed = seed;
  return corgi::generate_synthetic(spec, path, dense_block_bytes(tuples_per_block, dim));
}

inline std::vector<corgi::Tuple> drain(corgi::TupleStream& s) {
  std::vector<corgi::Tuple> out;
  corgi::Tuple t;
  while (s.next(t)) out.push_back(t);
  return out;
}

inline std::vector<std::uint64_t> drain_ids(corgi::TupleStream& s) {
  std::vector<std::uint64_t> out;
  corgi::Tuple t;
  while (s.next(t)) out.push_back(t.id);
  return out;
}

inline std::vector<std::uint64_t> iota_ids(std::uint64_t m) {
  std::vector<std::uint64_t> v(m);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

// In-memory stream over a fixed tuple vector, for tests that need exact
// control of the emission order.
class VecStream final : public corgi::TupleStream {
 public:
  explicit VecStream(std::vector<corgi::Tuple> tuples) : tuples_(std::move(tuples)) {}
  bool next(corgi::Tuple& out) override {
    if (pos_ >= tuples_.size()) return false;
    out = tuples_[pos_++];
    return true;
  }

 private:
  std::vector<corgi::Tuple> tuples_;
  std::size_t pos_ = 0;
};

}  // namespace corgi_test
