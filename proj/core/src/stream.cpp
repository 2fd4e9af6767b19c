#include "corgi/stream.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstring>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "corgi/error.hpp"
#include "corgi/rng.hpp"

namespace corgi {
namespace {

// ---------------------------------------------------------------------------
// Chunked block-buffer machinery (corgipile core)

// Plan for one epoch: which blocks, in what groups, with which substreams.
struct ChunkPlan {
  const DatasetReader* reader = nullptr;
  std::vector<std::uint64_t> blocks;
  std::uint64_t chunk_blocks = 1;
  std::uint64_t seed = 0, epoch = 0, worker = 0;
  bool shuffle_within = true;

  std::size_t num_chunks() const {
    if (blocks.empty()) return 0;
    return (blocks.size() + chunk_blocks - 1) / chunk_blocks;
  }

  void load(std::size_t chunk, std::vector<Tuple>& out) const {
    out.clear();
    const std::size_t lo = chunk * chunk_blocks;
    const std::size_t hi = std::min(blocks.size(), lo + chunk_blocks);
    for (std::size_t i = lo; i < hi; ++i) {
      std::vector<Tuple> blk = reader->read_block(blocks[i]);
      for (Tuple& t : blk) out.push_back(std::move(t));
    }
    if (shuffle_within) {
      auto g = rng::engine(seed, rng::Purpose::TupleShuffle, epoch, worker,
                           static_cast<std::uint64_t>(chunk));
      rng::fisher_yates(out, g);
    }
  }
};

class ChunkedStream final : public TupleStream {
 public:
  explicit ChunkedStream(ChunkPlan plan) : plan_(std::move(plan)) {}

  bool next(Tuple& out) override {
    while (pos_ >= buf_.size()) {
      if (chunk_ >= plan_.num_chunks()) return false;
      plan_.load(chunk_++, buf_);
      pos_ = 0;
    }
    out = std::move(buf_[pos_++]);
    return true;
  }

 private:
  ChunkPlan plan_;
  std::vector<Tuple> buf_;
  std::size_t pos_ = 0;
  std::size_t chunk_ = 0;
};

// Same emission order as ChunkedStream, but a producer thread fills and
// shuffles the next buffer while the consumer drains the current one. A
// one-slot handoff is exactly the two-buffer swap: at any moment one buffer
// is being consumed and at most one finished buffer waits.
class DoubleBufferedStream final : public TupleStream {
 public:
  explicit DoubleBufferedStream(ChunkPlan plan) : plan_(std::move(plan)) {
    producer_ = std::thread([this] { produce(); });
  }

  ~DoubleBufferedStream() override {
    {
      std::lock_guard<std::mutex> lk(mu_);
      abort_ = true;
    }
    cv_.notify_all();
    producer_.join();
  }

  bool next(Tuple& out) override {
    while (pos_ >= buf_.size()) {
      std::unique_lock<std::mutex> lk(mu_);
      cv_.wait(lk, [this] { return slot_full_ || done_; });
      if (slot_full_) {
        buf_ = std::move(slot_);
        slot_full_ = false;
        pos_ = 0;
        cv_.notify_all();
        continue;
      }
      if (error_) std::rethrow_exception(error_);
      return false;
    }
    out = std::move(buf_[pos_++]);
    return true;
  }

 private:
  void produce() {
    try {
      std::vector<Tuple> local;
      const std::size_t n = plan_.num_chunks();
      for (std::size_t c = 0; c < n; ++c) {
        plan_.load(c, local);
        std::unique_lock<std::mutex> lk(mu_);
        cv_.wait(lk, [this] { return !slot_full_ || abort_; });
        if (abort_) return;
        slot_ = std::move(local);
        slot_full_ = true;
        cv_.notify_all();
        local = {};
      }
    } catch (...) {
      std::lock_guard<std::mutex> lk(mu_);
      error_ = std::current_exception();
    }
    {
      std::lock_guard<std::mutex> lk(mu_);
      done_ = true;
    }
    cv_.notify_all();
  }

  ChunkPlan plan_;
  std::thread producer_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::vector<Tuple> slot_;
  bool slot_full_ = false;
  bool done_ = false;
  bool abort_ = false;
  std::exception_ptr error_;

  std::vector<Tuple> buf_;
  std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// Tuple-level random access (epoch shuffle)

class TupleTableStream final : public TupleStream {
 public:
  TupleTableStream(const DatasetReader& r, std::vector<DatasetReader::TupleLoc> order)
      : r_(r), order_(std::move(order)) {}

  bool next(Tuple& out) override {
    if (pos_ >= order_.size()) return false;
    out = r_.read_tuple(order_[pos_++]);
    return true;
  }

 private:
  const DatasetReader& r_;
  std::vector<DatasetReader::TupleLoc> order_;
  std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// Sliding window

class SlidingWindowStream final : public TupleStream {
 public:
  SlidingWindowStream(std::unique_ptr<TupleStream> scan, std::uint64_t window,
                      std::mt19937_64 g)
      : scan_(std::move(scan)), window_(window), g_(std::move(g)) {}

  bool next(Tuple& out) override {
    if (!filled_) {
      Tuple t;
      while (win_.size() < window_ && scan_->next(t)) win_.push_back(std::move(t));
      filled_ = true;
    }
    if (win_.empty()) return false;
    const std::size_t j =
        static_cast<std::size_t>(rng::uniform_below(g_, win_.size()));
    out = std::move(win_[j]);
    Tuple t;
    if (scan_->next(t)) {
      win_[j] = std::move(t);  // refill the slot from the scan
    } else {
      win_[j] = std::move(win_.back());  // input exhausted: drain
      win_.pop_back();
    }
    return true;
  }

 private:
  std::unique_ptr<TupleStream> scan_;
  std::uint64_t window_;
  std::mt19937_64 g_;
  std::vector<Tuple> win_;
  bool filled_ = false;
};

// ---------------------------------------------------------------------------
// Multiplexed reservoir sampling
//
// Deterministic single-threaded rendering of the two-worker scheme: the scan
// worker runs classic reservoir sampling into B1 and every tuple the
// reservoir drops (the incoming one, or the occupant it evicts) is emitted
// for training; after each such emission the loop worker emits `loop_ratio`
// tuples picked uniformly from B2, a snapshot of B1 taken whenever B2 runs
// out. Tuples resident in B1 across snapshots are emitted multiple times.

class MrsStream final : public TupleStream {
 public:
  MrsStream(std::unique_ptr<TupleStream> scan, std::uint64_t capacity,
            std::uint32_t loop_ratio, std::mt19937_64 admit, std::mt19937_64 loop)
      : scan_(std::move(scan)),
        capacity_(capacity),
        loop_ratio_(loop_ratio),
        admit_(std::move(admit)),
        loop_(std::move(loop)) {}

  bool next(Tuple& out) override {
    if (loop_pending_ > 0) {
      if (emit_from_loop(out)) return true;
      loop_pending_ = 0;  // empty reservoir: no loop substream
    }
    Tuple t;
    while (scan_->next(t)) {
      ++scanned_;
      if (b1_.size() < capacity_) {
        b1_.push_back(std::move(t));
        continue;  // absorbed, nothing dropped yet
      }
      if (capacity_ > 0) {
        const std::uint64_t j = rng::uniform_below(admit_, scanned_);
        if (j < capacity_) {
          out = std::move(b1_[j]);  // evicted occupant is the dropped tuple
          b1_[j] = std::move(t);
        } else {
          out = std::move(t);  // incoming tuple not admitted
        }
      } else {
        out = std::move(t);
      }
      loop_pending_ = loop_ratio_;
      return true;
    }
    return false;
  }

 private:
  bool emit_from_loop(Tuple& out) {
    if (b2_.empty()) {
      if (b1_.empty()) return false;
      b2_ = b1_;  // snapshot refresh
    }
    const std::size_t j =
        static_cast<std::size_t>(rng::uniform_below(loop_, b2_.size()));
    out = b2_[j];
    b2_[j] = std::move(b2_.back());
    b2_.pop_back();
    --loop_pending_;
    return true;
  }

  std::unique_ptr<TupleStream> scan_;
  std::uint64_t capacity_;
  std::uint32_t loop_ratio_;
  std::mt19937_64 admit_, loop_;
  std::vector<Tuple> b1_, b2_;
  std::uint64_t scanned_ = 0;
  std::uint32_t loop_pending_ = 0;
};

std::vector<std::uint64_t> identity_blocks(std::uint64_t n) {
  std::vector<std::uint64_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::NoShuffle: return "no_shuffle";
    case Strategy::ShuffleOnce: return "shuffle_once";
    case Strategy::EpochShuffle: return "epoch_shuffle";
    case Strategy::SlidingWindow: return "sliding_window";
    case Strategy::Mrs: return "mrs";
    case Strategy::BlockOnly: return "block_only";
    case Strategy::CorgiPile: return "corgipile";
  }
  return "?";
}

Strategy strategy_from_name(const std::string& name) {
  for (Strategy s : {Strategy::NoShuffle, Strategy::ShuffleOnce, Strategy::EpochShuffle,
                     Strategy::SlidingWindow, Strategy::Mrs, Strategy::BlockOnly,
                     Strategy::CorgiPile}) {
    if (name == strategy_name(s)) return s;
  }
  throw InvalidArgument("unknown strategy: " + name);
}

std::unique_ptr<TupleStream> make_block_buffer_stream(
    const DatasetReader& reader, std::vector<std::uint64_t> blocks,
    std::uint64_t chunk_blocks, std::uint64_t seed, std::uint64_t epoch,
    std::uint64_t worker, bool shuffle_within, bool threaded) {
  if (chunk_blocks == 0) throw InvalidArgument("chunk_blocks must be >= 1");
  for (std::uint64_t b : blocks)
    if (b >= reader.block_count()) throw InvalidArgument("block id out of range");
  ChunkPlan plan;
  plan.reader = &reader;
  plan.blocks = std::move(blocks);
  plan.chunk_blocks = chunk_blocks;
  plan.seed = seed;
  plan.epoch = epoch;
  plan.worker = worker;
  plan.shuffle_within = shuffle_within;
  if (threaded) return std::make_unique<DoubleBufferedStream>(std::move(plan));
  return std::make_unique<ChunkedStream>(std::move(plan));
}

std::vector<std::uint64_t> corgipile_block_sample(std::uint64_t N, std::uint64_t n,
                                                  std::uint64_t seed,
                                                  std::uint64_t epoch) {
  if (n == 0 || n > N) throw InvalidArgument("block sample size out of range");
  auto g = rng::engine(seed, rng::Purpose::BlockOrder, epoch);
  return rng::sample_without_replacement(N, n, g);
}

// ---------------------------------------------------------------------------
// StrategyRunner

StrategyRunner::StrategyRunner(std::string dataset_path, ShuffleConfig cfg)
    : path_(std::move(dataset_path)), cfg_(cfg) {
  if (cfg_.buffer_fraction <= 0.0 || cfg_.buffer_fraction > 1.0)
    throw InvalidArgument("buffer_fraction must be in (0, 1]");
  if (cfg_.window_fraction > 1.0)
    throw InvalidArgument("window_fraction must be <= 1");
  reader_ = std::make_unique<DatasetReader>(path_);
}

StrategyRunner::~StrategyRunner() = default;

const DatasetMeta& StrategyRunner::meta() const { return reader_->meta(); }

std::uint64_t StrategyRunner::corgipile_buffer_blocks() const {
  const std::uint64_t N = reader_->block_count();
  const auto n = static_cast<std::uint64_t>(cfg_.buffer_fraction * static_cast<double>(N));
  return std::min(N, std::max<std::uint64_t>(1, n));
}

std::uint64_t StrategyRunner::sliding_window_size() const {
  const double f = cfg_.window_fraction < 0 ? cfg_.buffer_fraction : cfg_.window_fraction;
  if (f <= 0.0) throw InvalidArgument("window fraction must be positive");
  const std::uint64_t m = meta().tuple_count;
  const auto w = static_cast<std::uint64_t>(f * static_cast<double>(m));
  return std::min(m, std::max<std::uint64_t>(1, w));
}

std::uint64_t StrategyRunner::reservoir_capacity() const {
  const std::uint64_t m = meta().tuple_count;
  return static_cast<std::uint64_t>(cfg_.buffer_fraction * static_cast<double>(m) / 2.0);
}

std::uint64_t StrategyRunner::bytes_read() const {
  std::uint64_t total = reader_->bytes_read();
  if (shuffled_) total += shuffled_->bytes_read();
  return total;
}

void StrategyRunner::ensure_shuffled_copy() {
  if (shuffled_) return;
  const std::string copy_path =
      cfg_.shuffle_once_path.empty() ? path_ + ".shuffled" : cfg_.shuffle_once_path;
  const auto t0 = std::chrono::steady_clock::now();
  full_shuffle(path_, copy_path, cfg_.seed, cfg_.index_budget_bytes);
  setup_seconds_ = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  shuffled_ = std::make_unique<DatasetReader>(copy_path);
}

std::unique_ptr<TupleStream> StrategyRunner::epoch_stream(std::uint64_t epoch) {
  const std::uint64_t N = reader_->block_count();
  switch (cfg_.strategy) {
    case Strategy::NoShuffle:
      return make_block_buffer_stream(*reader_, identity_blocks(N), 1, cfg_.seed,
                                      epoch, 0, false, false);
    case Strategy::ShuffleOnce: {
      ensure_shuffled_copy();
      return make_block_buffer_stream(*shuffled_, identity_blocks(shuffled_->block_count()),
                                      1, cfg_.seed, epoch, 0, false, false);
    }
    case Strategy::BlockOnly: {
      auto g = rng::engine(cfg_.seed, rng::Purpose::BlockOrder, epoch);
      auto blocks = rng::sample_without_replacement(N, N, g);
      return make_block_buffer_stream(*reader_, std::move(blocks), 1, cfg_.seed,
                                      epoch, 0, false, false);
    }
    case Strategy::CorgiPile: {
      const std::uint64_t n = corgipile_buffer_blocks();
      auto blocks = corgipile_block_sample(N, n, cfg_.seed, epoch);
      const std::uint64_t chunk = cfg_.double_buffer ? (n + 1) / 2 : n;
      return make_block_buffer_stream(*reader_, std::move(blocks), chunk, cfg_.seed,
                                      epoch, 0, true, cfg_.double_buffer);
    }
    case Strategy::EpochShuffle: {
      auto locs = reader_->tuple_locations(cfg_.index_budget_bytes);
      auto g = rng::engine(cfg_.seed, rng::Purpose::TupleShuffle, epoch);
      rng::fisher_yates(locs, g);
      return std::make_unique<TupleTableStream>(*reader_, std::move(locs));
    }
    case Strategy::SlidingWindow: {
      auto scan = make_block_buffer_stream(*reader_, identity_blocks(N), 1, cfg_.seed,
                                           epoch, 0, false, false);
      return std::make_unique<SlidingWindowStream>(
          std::move(scan), sliding_window_size(),
          rng::engine(cfg_.seed, rng::Purpose::Window, epoch));
    }
    case Strategy::Mrs: {
      auto scan = make_block_buffer_stream(*reader_, identity_blocks(N), 1, cfg_.seed,
                                           epoch, 0, false, false);
      return std::make_unique<MrsStream>(
          std::move(scan), reservoir_capacity(), cfg_.loop_ratio,
          rng::engine(cfg_.seed, rng::Purpose::Reservoir, epoch),
          rng::engine(cfg_.seed, rng::Purpose::LoopBuffer, epoch));
    }
  }
  throw InvalidArgument("bad strategy enum");
}

// ---------------------------------------------------------------------------
// Order diagnostics

namespace {

// Average ranks (1-based), ties share the mean of their rank range.
std::vector<double> average_ranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> ord(n);
  std::iota(ord.begin(), ord.end(), 0);
  std::stable_sort(ord.begin(), ord.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[ord[j + 1]] == v[ord[i]]) ++j;
    const double r = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k) ranks[ord[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw InvalidArgument("spearman needs two equal-length series, n >= 2");
  const std::vector<double> ra = average_ranks(a), rb = average_ranks(b);
  const std::size_t n = ra.size();
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = ra[i] - ma, db = rb[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0 || sbb == 0) return 0.0;  // a constant series has no rank order
  return sab / std::sqrt(saa * sbb);
}

OrderProfile analyze_order(TupleStream& stream, std::uint32_t window) {
  if (window == 0) throw InvalidArgument("window must be >= 1");
  OrderProfile p;
  p.window = window;
  Tuple t;
  while (stream.next(t)) {
    p.ids.push_back(t.id);
    p.labels.push_back(t.label);
  }
  const std::size_t L = p.ids.size();
  if (L == 0) return p;

  std::size_t positives = 0;
  for (float lb : p.labels) positives += (lb > 0.0f) ? 1 : 0;
  p.global_positive_fraction = static_cast<double>(positives) / static_cast<double>(L);

  double dev_sum = 0.0;
  for (std::size_t lo = 0; lo < L; lo += window) {
    const std::size_t hi = std::min(L, lo + window);
    std::size_t pos = 0;
    for (std::size_t i = lo; i < hi; ++i) pos += (p.labels[i] > 0.0f) ? 1 : 0;
    const double frac = static_cast<double>(pos) / static_cast<double>(hi - lo);
    p.window_positive_fraction.push_back(frac);
    dev_sum += std::abs(frac - p.global_positive_fraction);
  }
  p.mean_abs_window_dev = dev_sum / static_cast<double>(p.window_positive_fraction.size());

  if (L >= 2) {
    std::vector<double> pos_axis(L), id_axis(L);
    for (std::size_t i = 0; i < L; ++i) {
      pos_axis[i] = static_cast<double>(i);
      id_axis[i] = static_cast<double>(p.ids[i]);
    }
    p.spearman_pos_id = spearman(pos_axis, id_axis);
  }
  return p;
}

}  // namespace corgi
