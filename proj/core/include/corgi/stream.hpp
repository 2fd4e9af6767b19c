#pragma once

// Tuple-stream strategies: the order in which training examples reach SGD.
//
// The central strategy is the two-level block/tuple shuffle ("corgipile"):
// sample a buffer's worth of blocks without replacement, load them, shuffle
// the buffered tuples, emit. Baselines cover the spectrum from no shuffling
// to a fully random per-epoch permutation, plus the sliding-window and
// multiplexed-reservoir heuristics used by in-database learners.
//
// Every stream is a pure function of (dataset, config, seed, epoch): block
// samples, shuffles, window picks and reservoir decisions all draw from
// substreams derived via rng::substream_seed, so runs reproduce exactly,
// including across the threaded double-buffer pipeline.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "corgi/dataset.hpp"
#include "corgi/tuple.hpp"

namespace corgi {

enum class Strategy {
  NoShuffle,      // storage order, every epoch
  ShuffleOnce,    // one materialized full shuffle, then storage order
  EpochShuffle,   // fresh uniform permutation each epoch (tuple-level reads)
  SlidingWindow,  // fill a window, emit a uniform occupant, refill from scan
  Mrs,            // multiplexed reservoir sampling (scan + looping buffer)
  BlockOnly,      // random block order, tuples within a block unshuffled
  CorgiPile,      // block sample + in-buffer tuple shuffle
};

const char* strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);

struct ShuffleConfig {
  Strategy strategy = Strategy::CorgiPile;
  // corgipile: fraction of blocks in the buffer; mrs: fraction of tuples
  // backing the reservoir (capacity = floor(fraction * m / 2)).
  double buffer_fraction = 0.1;
  // sliding window size as a fraction of m; negative = use buffer_fraction.
  double window_fraction = -1.0;
  std::uint32_t loop_ratio = 1;  // mrs: buffered emissions per scan emission
  bool double_buffer = false;    // corgipile: half-size buffers + producer thread
  std::uint64_t seed = 0;
  // epoch_shuffle / full_shuffle keep a per-tuple location table in memory;
  // refuse datasets whose table would exceed this.
  std::uint64_t index_budget_bytes = 256ull << 20;
  // where shuffle_once materializes its copy; empty = "<dataset>.shuffled"
  std::string shuffle_once_path;
};

class TupleStream {
 public:
  virtual ~TupleStream() = default;
  // Emits the next tuple of the epoch; false when the epoch is over.
  virtual bool next(Tuple& out) = 0;
};

// Block-buffer stream over an explicit block list: consume `blocks` in
// groups of chunk_blocks; each group is loaded into memory and (optionally)
// shuffled with the substream (seed, TupleShuffle, epoch, worker, group).
// With threaded=true a producer thread loads and shuffles the next group
// while the caller drains the current one (two half-size buffers); the
// emitted sequence is identical to the unthreaded stream.
std::unique_ptr<TupleStream> make_block_buffer_stream(
    const DatasetReader& reader, std::vector<std::uint64_t> blocks,
    std::uint64_t chunk_blocks, std::uint64_t seed, std::uint64_t epoch,
    std::uint64_t worker, bool shuffle_within, bool threaded);

// The block ids a corgipile epoch consumes: a uniformly ordered n-subset of
// {0..N-1} drawn from substream (seed, BlockOrder, epoch).
std::vector<std::uint64_t> corgipile_block_sample(std::uint64_t N, std::uint64_t n,
                                                  std::uint64_t seed,
                                                  std::uint64_t epoch);

// Owns the dataset readers and any per-run state (the shuffle-once copy),
// and derives one stream per epoch. Streams borrow the runner's readers:
// the runner must outlive them.
class StrategyRunner {
 public:
  StrategyRunner(std::string dataset_path, ShuffleConfig cfg);
  ~StrategyRunner();

  StrategyRunner(const StrategyRunner&) = delete;
  StrategyRunner& operator=(const StrategyRunner&) = delete;

  std::unique_ptr<TupleStream> epoch_stream(std::uint64_t epoch);

  const DatasetMeta& meta() const;
  const DatasetReader& reader() const { return *reader_; }
  const ShuffleConfig& config() const { return cfg_; }

  // Resolved knobs.
  std::uint64_t corgipile_buffer_blocks() const;  // n
  std::uint64_t sliding_window_size() const;      // w
  std::uint64_t reservoir_capacity() const;       // mrs |B1|

  // Payload bytes read through every reader this runner owns.
  std::uint64_t bytes_read() const;
  // One-time cost of materializing the shuffle-once copy (0 until created).
  double setup_seconds() const { return setup_seconds_; }

 private:
  void ensure_shuffled_copy();

  std::string path_;
  ShuffleConfig cfg_;
  std::unique_ptr<DatasetReader> reader_;
  std::unique_ptr<DatasetReader> shuffled_;  // shuffle_once copy, lazy
  double setup_seconds_ = 0.0;
};

// ---------------------------------------------------------------------------
// Order diagnostics

// Profile of one emitted epoch: the realized tuple-id sequence, plus
// label-mix statistics over fixed-size windows and a rank correlation
// between emission position and tuple id (1.0 = storage order preserved,
// ~0 = fully shuffled).
struct OrderProfile {
  std::uint32_t window = 20;
  std::vector<std::uint64_t> ids;    // emission order
  std::vector<float> labels;
  double global_positive_fraction = 0.0;  // fraction of labels > 0
  std::vector<double> window_positive_fraction;
  // mean over windows of |window positive fraction - global fraction|
  double mean_abs_window_dev = 0.0;
  double spearman_pos_id = 0.0;
};

OrderProfile analyze_order(TupleStream& stream, std::uint32_t window = 20);

// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace corgi
