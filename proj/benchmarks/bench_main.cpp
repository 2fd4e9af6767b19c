// Microbenchmarks for the hot paths: per-strategy epoch emission, the
// gradient/update kernels, and raw block decode + checksum.
//
// Each benchmark builds its fixture dataset once in a process-private temp
// directory that is removed at exit.

#include <unistd.h>

#include <benchmark/benchmark.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "corgi/dataset.hpp"
#include "corgi/sgd.hpp"
#include "corgi/stream.hpp"

namespace fs = std::filesystem;
using namespace corgi;

namespace {

struct BenchDir {
  fs::path dir;
  BenchDir() {
    dir = fs::temp_directory_path() /
          ("corgi-bench-" + std::to_string(static_cast<long>(::getpid())));
    fs::create_directories(dir);
  }
  ~BenchDir() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
};

BenchDir& bench_dir() {
  static BenchDir d;
  return d;
}

constexpr std::uint64_t kTuples = 20000;
constexpr std::uint64_t kDim = 16;
constexpr std::uint64_t kTuplesPerBlock = 100;

const std::string& fixture_dataset() {
  static const std::string path = [] {
    const std::string p = (bench_dir().dir / "fixture.cgds").string();
    SyntheticSpec spec;
    spec.tuple_count = kTuples;
    spec.dimension = kDim;
    spec.task = Task::Binary;
    spec.class_means = {std::vector<float>(kDim, -0.2f),
                        std::vector<float>(kDim, 0.2f)};
    spec.order = SyntheticSpec::Order::LabelClustered;
    spec.seed = 7;
    generate_synthetic(spec, p, kTuplesPerBlock * (12 + 4 * kDim));
    return p;
  }();
  return path;
}

void drain_epochs(benchmark::State& state, const ShuffleConfig& cfg) {
  StrategyRunner runner(fixture_dataset(), cfg);
  std::uint64_t epoch = 0;
  Tuple t;
  for (auto _ : state) {
    auto stream = runner.epoch_stream(epoch++);
    std::uint64_t seen = 0;
    while (stream->next(t)) ++seen;
    benchmark::DoNotOptimize(seen);
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(kTuples));
}

void BM_EpochNoShuffle(benchmark::State& state) {
  ShuffleConfig cfg;
  cfg.strategy = Strategy::NoShuffle;
  drain_epochs(state, cfg);
}
BENCHMARK(BM_EpochNoShuffle);

void BM_EpochShuffleOnce(benchmark::State& state) {
  ShuffleConfig cfg;
  cfg.strategy = Strategy::ShuffleOnce;
  cfg.seed = 3;
  cfg.shuffle_once_path = (bench_dir().dir / "so-copy.cgds").string();
  drain_epochs(state, cfg);
}
BENCHMARK(BM_EpochShuffleOnce);

void BM_EpochEpochShuffle(benchmark::State& state) {
  ShuffleConfig cfg;
  cfg.strategy = Strategy::EpochShuffle;
  cfg.seed = 3;
  drain_epochs(state, cfg);
}
BENCHMARK(BM_EpochEpochShuffle);

void BM_EpochBlockOnly(benchmark::State& state) {
  ShuffleConfig cfg;
  cfg.strategy = Strategy::BlockOnly;
  cfg.seed = 3;
  drain_epochs(state, cfg);
}
BENCHMARK(BM_EpochBlockOnly);

void BM_EpochSlidingWindow(benchmark::State& state) {
  ShuffleConfig cfg;
  cfg.strategy = Strategy::SlidingWindow;
  cfg.buffer_fraction = 0.1;
  cfg.seed = 3;
  drain_epochs(state, cfg);
}
BENCHMARK(BM_EpochSlidingWindow);

// Buffered block/tuple shuffle at a 10% buffer; the double-buffer variant
// overlaps block reads with emission on a second thread. Note both consume
// only 10% of the file per epoch, so items/s is not comparable with the
// full-pass strategies above.
void BM_EpochBuffered(benchmark::State& state) {
  ShuffleConfig cfg;
  cfg.strategy = Strategy::CorgiPile;
  cfg.buffer_fraction = 0.1;
  cfg.double_buffer = state.range(0) != 0;
  cfg.seed = 3;
  StrategyRunner runner(fixture_dataset(), cfg);
  const std::uint64_t per_epoch =
      runner.corgipile_buffer_blocks() * kTuplesPerBlock;
  std::uint64_t epoch = 0;
  Tuple t;
  for (auto _ : state) {
    auto stream = runner.epoch_stream(epoch++);
    std::uint64_t seen = 0;
    while (stream->next(t)) ++seen;
    benchmark::DoNotOptimize(seen);
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(per_epoch));
}
BENCHMARK(BM_EpochBuffered)->Arg(0)->Arg(1);

// --------------------------------------------------------------------------
// Update kernels

Tuple dense_tuple(std::uint64_t d, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::normal_distribution<float> nf;
  Tuple t;
  t.label = 1.0f;
  for (std::uint64_t i = 0; i < d; ++i) t.dense.push_back(nf(g));
  return t;
}

Tuple sparse_tuple(std::uint64_t d, std::uint64_t nnz, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::normal_distribution<float> nf;
  Tuple t;
  t.label = 1.0f;
  for (std::uint64_t i = 0; i < nnz; ++i) {
    t.idx.push_back(static_cast<std::uint32_t>(i * (d / nnz)));
    t.val.push_back(nf(g));
  }
  return t;
}

void BM_SgdStepLogisticDense(benchmark::State& state) {
  const std::uint64_t d = static_cast<std::uint64_t>(state.range(0));
  Model m = Model::zeros(LossKind::Logistic, d);
  const Tuple t = dense_tuple(d, 11);
  for (auto _ : state) {
    const double loss = sgd_step(m, t, 1e-6);
    benchmark::DoNotOptimize(loss);
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_SgdStepLogisticDense)->Arg(16)->Arg(256);

void BM_SgdStepLogisticSparse(benchmark::State& state) {
  const std::uint64_t d = static_cast<std::uint64_t>(state.range(0));
  Model m = Model::zeros(LossKind::Logistic, d);
  const Tuple t = sparse_tuple(d, d / 8, 11);
  for (auto _ : state) {
    const double loss = sgd_step(m, t, 1e-6);
    benchmark::DoNotOptimize(loss);
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_SgdStepLogisticSparse)->Arg(256)->Arg(4096);

void BM_SgdStepSoftmaxDense(benchmark::State& state) {
  const std::uint64_t d = static_cast<std::uint64_t>(state.range(0));
  Model m = Model::zeros(LossKind::Softmax, d, 10);
  Tuple t = dense_tuple(d, 11);
  t.label = 3.0f;
  for (auto _ : state) {
    const double loss = sgd_step(m, t, 1e-6);
    benchmark::DoNotOptimize(loss);
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_SgdStepSoftmaxDense)->Arg(64);

void BM_MinibatchEpoch(benchmark::State& state) {
  const std::uint64_t batch = static_cast<std::uint64_t>(state.range(0));
  std::vector<Tuple> tuples;
  for (std::uint64_t i = 0; i < 4096; ++i) {
    Tuple t = dense_tuple(16, i);
    t.id = i;
    t.label = (i % 2) ? 1.0f : -1.0f;
    tuples.push_back(t);
  }
  Model m = Model::zeros(LossKind::Logistic, 16);
  for (auto _ : state) {
    class Vec final : public TupleStream {
     public:
      explicit Vec(const std::vector<Tuple>& v) : v_(&v) {}
      bool next(Tuple& out) override {
        if (i_ >= v_->size()) return false;
        out = (*v_)[i_++];
        return true;
      }

     private:
      const std::vector<Tuple>* v_;
      std::size_t i_ = 0;
    } s(tuples);
    const double loss = minibatch_epoch(m, s, 1e-6, batch);
    benchmark::DoNotOptimize(loss);
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * 4096);
}
BENCHMARK(BM_MinibatchEpoch)->Arg(1)->Arg(16)->Arg(256);

// --------------------------------------------------------------------------
// Raw block decode + checksum

void BM_BlockRead(benchmark::State& state) {
  DatasetReader reader(fixture_dataset());
  const std::uint64_t N = reader.block_count();
  std::mt19937_64 g(17);
  std::uint64_t tuples = 0;
  for (auto _ : state) {
    const std::vector<Tuple> block = reader.read_block(g() % N);
    tuples += block.size();
    benchmark::DoNotOptimize(block.size());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(tuples));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(kTuplesPerBlock * (12 + 4 * kDim)));
}
BENCHMARK(BM_BlockRead);

}  // namespace

BENCHMARK_MAIN();
