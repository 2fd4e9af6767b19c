#include "corgi/bench.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "corgi/dataset.hpp"
#include "corgi/error.hpp"
#include "corgi/rng.hpp"

namespace corgi {
namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Exclusive advisory lock on <dataset>.benchlock for the object's lifetime,
// so two benchmark processes never interleave reads on the same file.
class BenchLock {
 public:
  explicit BenchLock(const std::string& dataset_path) {
    path_ = dataset_path + ".benchlock";
    fd_ = ::open(path_.c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
    if (fd_ < 0) throw Error("cannot create lock file " + path_);
    if (::flock(fd_, LOCK_EX) != 0) {
      ::close(fd_);
      throw Error("cannot lock " + path_);
    }
  }
  ~BenchLock() {
    if (fd_ >= 0) {
      ::flock(fd_, LOCK_UN);
      ::close(fd_);
      ::unlink(path_.c_str());
    }
  }
  BenchLock(const BenchLock&) = delete;
  BenchLock& operator=(const BenchLock&) = delete;

 private:
  std::string path_;
  int fd_ = -1;
};

// Best-effort request to evict the file's pages from the OS cache. A
// separate descriptor is enough: the advice applies to the file, and if the
// kernel declines the benchmark simply runs warmer than asked.
void drop_file_cache(const std::string& path) {
  const int fd = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
  if (fd < 0) return;
  ::fsync(fd);
  (void)::posix_fadvise(fd, 0, 0, POSIX_FADV_DONTNEED);
  ::close(fd);
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size() / 2;
  return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

}  // namespace

const char* scan_mode_name(ScanMode m) {
  switch (m) {
    case ScanMode::Sequential: return "sequential";
    case ScanMode::RandomBlock: return "random_block";
    case ScanMode::RandomTuple: return "random_tuple";
  }
  throw InvalidArgument("unknown scan mode");
}

ScanMode scan_mode_from_name(const std::string& name) {
  if (name == "sequential") return ScanMode::Sequential;
  if (name == "random_block") return ScanMode::RandomBlock;
  if (name == "random_tuple") return ScanMode::RandomTuple;
  throw InvalidArgument("unknown scan mode: " + name);
}

IoBenchResult io_scan_bench(const std::string& dataset_path, ScanMode mode,
                            std::uint64_t reps, bool cold, std::uint64_t seed) {
  if (reps < 3) throw InvalidArgument("need at least 3 repetitions");
  BenchLock lock(dataset_path);

  const std::uint32_t crc_before = file_crc32(dataset_path);
  DatasetReader reader(dataset_path);
  const std::uint64_t N = reader.block_count();

  std::vector<DatasetReader::TupleLoc> locs;
  if (mode == ScanMode::RandomTuple)
    locs = reader.tuple_locations(1ull << 31);  // index only; tuples are read one by one

  auto run_pass = [&](std::uint64_t rep) {
    Tuple t;
    switch (mode) {
      case ScanMode::Sequential: {
        for (std::uint64_t l = 0; l < N; ++l) (void)reader.read_block(l);
        break;
      }
      case ScanMode::RandomBlock: {
        std::vector<std::uint64_t> order(N);
        for (std::uint64_t l = 0; l < N; ++l) order[l] = l;
        auto g = rng::engine(seed, rng::Purpose::Bench, rep);
        rng::fisher_yates(order, g);
        for (std::uint64_t l : order) (void)reader.read_block(l);
        break;
      }
      case ScanMode::RandomTuple: {
        std::vector<std::uint32_t> order(locs.size());
        for (std::size_t i = 0; i < locs.size(); ++i)
          order[i] = static_cast<std::uint32_t>(i);
        auto g = rng::engine(seed, rng::Purpose::Bench, rep);
        rng::fisher_yates(order, g);
        for (std::uint32_t i : order) t = reader.read_tuple(locs[i]);
        break;
      }
    }
  };

  if (!cold) run_pass(~0ull);  // untimed cache-priming pass

  std::vector<double> times;
  times.reserve(reps);
  std::uint64_t bytes_per_rep = 0;
  for (std::uint64_t r = 0; r < reps; ++r) {
    if (cold) drop_file_cache(dataset_path);
    const std::uint64_t bytes0 = reader.bytes_read();
    const auto t0 = std::chrono::steady_clock::now();
    run_pass(r);
    times.push_back(seconds_since(t0));
    bytes_per_rep = reader.bytes_read() - bytes0;
  }

  const std::uint32_t crc_after = file_crc32(dataset_path);
  if (crc_after != crc_before)
    throw IntegrityError("dataset checksum changed during a read-only benchmark");

  IoBenchResult out;
  out.mode = mode;
  out.regime = cold ? "cold" : "warm";
  out.reps = reps;
  out.bytes_per_rep = bytes_per_rep;
  out.min_seconds = *std::min_element(times.begin(), times.end());
  out.median_seconds = median_of(times);
  out.max_seconds = *std::max_element(times.begin(), times.end());
  out.mib_per_second =
      out.median_seconds > 0.0
          ? static_cast<double>(bytes_per_rep) / (1024.0 * 1024.0) / out.median_seconds
          : 0.0;
  out.file_crc = crc_before;
  return out;
}

std::vector<EpochBenchResult> epoch_overhead_bench(const std::string& dataset_path,
                                                   std::vector<ShuffleConfig> configs,
                                                   std::uint64_t reps) {
  if (reps < 2) throw InvalidArgument("need at least 2 repetitions");
  if (configs.empty()) throw InvalidArgument("need at least one configuration");
  bool has_baseline = false;
  for (const auto& c : configs) has_baseline |= c.strategy == Strategy::NoShuffle;
  if (!has_baseline) {
    ShuffleConfig base = configs.front();
    base.strategy = Strategy::NoShuffle;
    base.double_buffer = false;
    configs.insert(configs.begin(), base);
  }

  std::vector<EpochBenchResult> out;
  double baseline_mean = 0.0;
  for (const auto& cfg : configs) {
    StrategyRunner runner(dataset_path, cfg);
    Tuple t;
    std::uint64_t tuples = 0;
    {
      auto warm = runner.epoch_stream(0);  // warm-up epoch, untimed
      while (warm->next(t)) ++tuples;
    }
    std::vector<double> times;
    times.reserve(reps);
    for (std::uint64_t r = 0; r < reps; ++r) {
      auto stream = runner.epoch_stream(r + 1);
      const auto t0 = std::chrono::steady_clock::now();
      while (stream->next(t)) {
      }
      times.push_back(seconds_since(t0));
    }
    double mean = 0.0;
    for (double v : times) mean += v;
    mean /= static_cast<double>(reps);
    double var = 0.0;
    for (double v : times) var += (v - mean) * (v - mean);
    var /= static_cast<double>(reps - 1);

    EpochBenchResult r;
    std::ostringstream label;
    label << strategy_name(cfg.strategy);
    if (cfg.strategy == Strategy::CorgiPile || cfg.strategy == Strategy::BlockOnly ||
        cfg.strategy == Strategy::Mrs)
      label << " buf=" << cfg.buffer_fraction;
    if (cfg.strategy == Strategy::SlidingWindow)
      label << " win=" << (cfg.window_fraction < 0 ? cfg.buffer_fraction : cfg.window_fraction);
    if (cfg.double_buffer) label << " +db";
    r.label = label.str();
    r.strategy = cfg.strategy;
    r.mean_seconds = mean;
    r.stddev_seconds = std::sqrt(var);
    r.tuples_per_epoch = tuples;
    if (cfg.strategy == Strategy::NoShuffle && baseline_mean == 0.0) baseline_mean = mean;
    out.push_back(r);
  }
  for (auto& r : out)
    r.ratio_vs_baseline = baseline_mean > 0.0 ? r.mean_seconds / baseline_mean : 0.0;
  return out;
}

}  // namespace corgi
