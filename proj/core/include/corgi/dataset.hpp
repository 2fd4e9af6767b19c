#pragma once

// Block-structured on-disk dataset format.
//
// Layout (all integers little-endian):
//   [magic "CGDS"][fixed header][block 0][block 1]...[footer][magic "CGIX"]
// Blocks hold back-to-back encoded tuples and are the unit of both I/O and
// shuffling. The footer is a per-block index (offset, byte length, tuple
// count, CRC32) plus a CRC of the index itself; every block read is one
// contiguous pread verified against its checksum.
//
// Dense blocks hold a fixed number of tuples; sparse blocks are filled
// greedily up to the byte budget, so their tuple counts vary. The last
// block of a dataset may be short.

#include <atomic>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "corgi/error.hpp"
#include "corgi/tuple.hpp"

namespace corgi {

struct BlockEntry {
  std::uint64_t offset = 0;       // absolute file offset of the block
  std::uint64_t length = 0;       // payload bytes
  std::uint64_t tuple_count = 0;  // tuples encoded in the block
  std::uint32_t crc32 = 0;        // CRC32 of the payload
};

// Streaming writer. append() buffers tuples into the current block and
// flushes it when the next tuple would overflow block_size_bytes; finalize()
// writes the footer and patches the header counts.
class DatasetWriter {
 public:
  DatasetWriter(std::string path, DatasetMeta meta);
  ~DatasetWriter();

  DatasetWriter(const DatasetWriter&) = delete;
  DatasetWriter& operator=(const DatasetWriter&) = delete;

  void append(const Tuple& t);
  DatasetMeta finalize();

 private:
  void flush_block();

  std::string path_;
  DatasetMeta meta_;
  std::ofstream out_;
  std::string block_buf_;
  std::uint64_t block_tuples_ = 0;
  std::vector<BlockEntry> entries_;
  std::uint64_t written_tuples_ = 0;
  bool finalized_ = false;
};

class DatasetReader {
 public:
  explicit DatasetReader(std::string path);
  ~DatasetReader();

  DatasetReader(const DatasetReader&) = delete;
  DatasetReader& operator=(const DatasetReader&) = delete;

  const std::string& path() const { return path_; }
  const DatasetMeta& meta() const { return meta_; }
  const std::vector<BlockEntry>& index() const { return entries_; }
  std::uint64_t block_count() const { return entries_.size(); }

  // One contiguous read of the whole block, checksum-verified.
  // Thread-safe (pread on a shared descriptor).
  std::vector<Tuple> read_block(std::uint64_t block_id) const;

  // Random single-tuple access, for strategies that need tuple-level reads.
  struct TupleLoc {
    std::uint64_t offset = 0;
    std::uint32_t length = 0;
  };
  // Location of every tuple in storage order. Refuses to build a table
  // larger than budget_bytes (tuple-level random access is a desk-scale
  // feature and the caller must opt into the memory cost).
  std::vector<TupleLoc> tuple_locations(std::uint64_t budget_bytes) const;
  Tuple read_tuple(const TupleLoc& loc) const;

  // Payload bytes fetched through this reader so far (blocks + tuples).
  std::uint64_t bytes_read() const { return bytes_read_.load(std::memory_order_relaxed); }

 private:
  void pread_exact(void* dst, std::uint64_t len, std::uint64_t offset) const;

  std::string path_;
  int fd_ = -1;
  DatasetMeta meta_;
  std::vector<BlockEntry> entries_;
  mutable std::atomic<std::uint64_t> bytes_read_{0};
};

// ---------------------------------------------------------------------------
// Dataset construction

struct SyntheticSpec {
  std::uint64_t tuple_count = 0;
  std::uint64_t dimension = 0;
  Task task = Task::Binary;
  std::uint32_t num_classes = 2;  // ignored for regression
  // One mean vector per class (binary: 2, multiclass: C, regression: 1).
  std::vector<std::vector<float>> class_means;
  float noise_stddev = 1.0f;
  enum class Order { Shuffled, LabelClustered, FeatureOrdered } order = Order::Shuffled;
  std::uint32_t order_feature = 0;  // for FeatureOrdered
  std::uint64_t seed = 0;
};

// Draws features from isotropic Gaussians around the class means; class
// sizes are balanced to within one tuple, lower class ids first before the
// order transform. Regression labels are sum(features) + Gaussian noise.
// Tuple ids are assigned 0..m-1 in final storage order, so a clustered
// dataset has id == position. Deterministic in (spec, seed).
DatasetMeta generate_synthetic(const SyntheticSpec& spec, const std::string& path,
                               std::uint64_t block_size_bytes);

struct IngestOptions {
  Task task = Task::Binary;
  std::uint32_t num_classes = 2;
  std::uint64_t dimension = 0;  // 0 = infer from max feature index
  std::uint64_t block_size_bytes = 10ull << 20;
  Encoding encoding = Encoding::Sparse;
};

// LIBSVM text -> block format. Feature indices are 1-based in the text and
// stored 0-based. Malformed lines raise ParseError with the line number.
DatasetMeta ingest_libsvm(const std::string& text_path, const std::string& out_path,
                          const IngestOptions& opt);

// Stable reorderings; tuple ids keep their original values.
DatasetMeta order_by_label(const std::string& in_path, const std::string& out_path);
DatasetMeta order_by_feature(const std::string& in_path, std::uint32_t feature,
                             const std::string& out_path);

// Materializes a uniformly random permutation of the tuples (Fisher-Yates
// over a tuple-location table, then a rewrite through random reads).
DatasetMeta full_shuffle(const std::string& in_path, const std::string& out_path,
                         std::uint64_t seed,
                         std::uint64_t budget_bytes = 256ull << 20);

// CRC32 of an entire file (manifests use it to fingerprint inputs).
std::uint32_t file_crc32(const std::string& path);

}  // namespace corgi
