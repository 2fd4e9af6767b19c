#pragma once

// Read-pattern and shuffle-overhead measurements on real dataset files.
//
// io_scan_bench times repeated passes over a dataset under three access
// patterns (sequential blocks, random block order, random per-tuple reads)
// and reports min/median/max wall time and median throughput. Reads are
// strictly read-only: the file's checksum is taken before and after and a
// mismatch throws. A lock file serializes concurrent benchmark instances
// on the same dataset. "cold" mode asks the OS to drop the file's cached
// pages before every repetition (best effort); "warm" primes the cache
// with one untimed pass instead.
//
// epoch_overhead_bench times full epoch-stream consumption (no SGD) for a
// list of shuffle configurations against the sequential no-shuffle
// baseline, excluding a warm-up epoch.

#include <cstdint>
#include <string>
#include <vector>

#include "corgi/stream.hpp"

namespace corgi {

enum class ScanMode { Sequential, RandomBlock, RandomTuple };
const char* scan_mode_name(ScanMode m);
ScanMode scan_mode_from_name(const std::string& name);

struct IoBenchResult {
  ScanMode mode = ScanMode::Sequential;
  std::string regime;  // "cold" or "warm"
  std::uint64_t reps = 0;
  std::uint64_t bytes_per_rep = 0;
  double min_seconds = 0.0;
  double median_seconds = 0.0;
  double max_seconds = 0.0;
  double mib_per_second = 0.0;  // bytes_per_rep over the median time
  std::uint32_t file_crc = 0;   // identical before and after, enforced
};
IoBenchResult io_scan_bench(const std::string& dataset_path, ScanMode mode,
                            std::uint64_t reps, bool cold, std::uint64_t seed);

struct EpochBenchResult {
  std::string label;
  Strategy strategy = Strategy::NoShuffle;
  double mean_seconds = 0.0;
  double stddev_seconds = 0.0;
  double ratio_vs_baseline = 0.0;  // mean over the no-shuffle mean
  std::uint64_t tuples_per_epoch = 0;
};
// Times `reps` epochs per configuration (plus one untimed warm-up epoch).
// A no-shuffle baseline is prepended if the list lacks one.
std::vector<EpochBenchResult> epoch_overhead_bench(const std::string& dataset_path,
                                                   std::vector<ShuffleConfig> configs,
                                                   std::uint64_t reps);

}  // namespace corgi
