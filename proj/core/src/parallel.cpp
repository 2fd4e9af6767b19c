#include "corgi/parallel.hpp"

#include <algorithm>
#include <barrier>
#include <chrono>
#include <exception>
#include <memory>
#include <thread>
#include <unordered_map>

#include "corgi/error.hpp"
#include "corgi/rng.hpp"
#include "corgi/stream.hpp"

namespace corgi {

std::vector<std::vector<std::uint64_t>> partition_blocks(std::uint64_t seed,
                                                         std::uint64_t epoch,
                                                         std::uint64_t N,
                                                         std::uint32_t workers) {
  if (workers < 1) throw InvalidArgument("need at least 1 worker");
  if (N < workers) throw InvalidArgument("need at least one block per worker");
  auto g = rng::engine(seed, rng::Purpose::BlockOrder, epoch);
  std::vector<std::uint64_t> perm = rng::sample_without_replacement(N, N, g);
  const std::uint64_t base = N / workers;
  const std::uint64_t extra = N % workers;
  std::vector<std::vector<std::uint64_t>> chunks(workers);
  std::size_t at = 0;
  for (std::uint32_t w = 0; w < workers; ++w) {
    const std::uint64_t take = base + (w < extra ? 1 : 0);
    chunks[w].assign(perm.begin() + at, perm.begin() + at + take);
    at += take;
  }
  return chunks;
}

namespace {

void validate_parallel(const ParallelConfig& cfg, std::uint64_t block_count) {
  if (cfg.workers < 1) throw InvalidArgument("need at least 1 worker");
  if (block_count < cfg.workers)
    throw InvalidArgument("need at least one block per worker");
  if (cfg.buffer_blocks_per_worker < 1)
    throw InvalidArgument("worker buffers must hold at least 1 block");
  if (cfg.batch_size < 1 || cfg.batch_size % cfg.workers != 0)
    throw InvalidArgument("batch_size must be a positive multiple of the worker count");
}

// Chunk size fed to the stream factory: halved when a background producer
// overlaps loading of the second half (emission order is unchanged).
std::uint64_t stream_chunk_blocks(std::uint64_t buffer_blocks, bool double_buffer) {
  return double_buffer ? (buffer_blocks + 1) / 2 : buffer_blocks;
}

std::vector<std::unique_ptr<TupleStream>> make_worker_streams(
    const DatasetReader& reader, const ParallelConfig& cfg, std::uint64_t seed,
    std::uint64_t epoch, bool threaded) {
  const auto parts = partition_blocks(seed, epoch, reader.block_count(), cfg.workers);
  const std::uint64_t chunk =
      stream_chunk_blocks(cfg.buffer_blocks_per_worker, cfg.double_buffer);
  std::vector<std::unique_ptr<TupleStream>> streams;
  streams.reserve(cfg.workers);
  for (std::uint32_t w = 0; w < cfg.workers; ++w)
    streams.push_back(make_block_buffer_stream(reader, parts[w], chunk, seed, epoch, w,
                                               /*shuffle_within=*/true, threaded));
  return streams;
}

}  // namespace

TrainResult parallel_train(const std::string& dataset_path, const ParallelConfig& cfg,
                           const Model& init, const TrainOptions& opt,
                           const std::string& eval_dataset_path) {
  DatasetReader reader(dataset_path);
  validate_parallel(cfg, reader.block_count());
  validate_model_for(init, reader.meta());
  if (opt.batch_size != 1 && opt.batch_size != cfg.batch_size)
    throw InvalidArgument("TrainOptions batch_size conflicts with the parallel batch_size");
  std::unique_ptr<DatasetReader> eval_reader;
  if (!eval_dataset_path.empty()) {
    eval_reader = std::make_unique<DatasetReader>(eval_dataset_path);
    validate_model_for(init, eval_reader->meta());
  }

  const std::uint32_t PN = cfg.workers;
  const std::uint64_t quota = cfg.batch_size / PN;

  TrainResult res;
  res.model = init;
  for (std::uint64_t epoch = 0; epoch < opt.epochs; ++epoch) {
    EpochStats st;
    st.epoch = epoch;
    st.lr = opt.lr.eta(epoch);
    const std::uint64_t bytes0 = reader.bytes_read();
    const auto t0 = std::chrono::steady_clock::now();

    auto streams = make_worker_streams(reader, cfg, cfg.seed, epoch, cfg.double_buffer);
    std::vector<BatchAccumulator> accs(PN);
    std::vector<char> done(PN, 0);
    std::vector<std::exception_ptr> caught(PN);
    bool stop = false;

    // Two-phase lockstep. Fill phase: workers read their streams and
    // accumulate gradients at the current model (main waits). Apply phase:
    // main merges the accumulators in worker order and applies one averaged
    // update (workers wait). The barriers order every model write against
    // every model read, so no further synchronization is needed.
    std::barrier<> filled(PN + 1);
    std::barrier<> applied(PN + 1);

    auto worker_body = [&](std::uint32_t w) {
      Tuple t;
      while (true) {
        accs[w].reset(res.model);
        if (!done[w]) {
          try {
            for (std::uint64_t k = 0; k < quota; ++k) {
              if (!streams[w]->next(t)) {
                done[w] = 1;
                break;
              }
              accs[w].add(res.model, t);
            }
          } catch (...) {
            caught[w] = std::current_exception();
            done[w] = 1;
          }
        }
        filled.arrive_and_wait();
        applied.arrive_and_wait();
        if (stop) break;
      }
    };

    std::vector<std::thread> threads;
    threads.reserve(PN);
    for (std::uint32_t w = 0; w < PN; ++w) threads.emplace_back(worker_body, w);

    double loss_sum = 0.0;
    std::uint64_t tuples = 0;
    std::exception_ptr first_error;
    while (true) {
      filled.arrive_and_wait();
      for (std::uint32_t w = 1; w < PN; ++w) accs[0].merge(accs[w]);
      loss_sum += accs[0].loss_sum;
      tuples += accs[0].count;
      accs[0].apply(res.model, st.lr);
      bool all_done = true;
      for (std::uint32_t w = 0; w < PN; ++w) {
        if (!done[w]) all_done = false;
        if (caught[w] && !first_error) first_error = caught[w];
      }
      stop = all_done || first_error != nullptr;
      applied.arrive_and_wait();
      if (stop) break;
    }
    for (auto& th : threads) th.join();
    if (first_error) std::rethrow_exception(first_error);

    st.tuples_seen = tuples;
    st.step_loss = tuples ? loss_sum / static_cast<double>(tuples) : 0.0;
    st.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    st.bytes_read = reader.bytes_read() - bytes0;
    if (opt.evaluate_train) {
      const EvalResult ev = evaluate(res.model, reader);
      st.train_loss = ev.loss;
      st.train_metric = ev.metric;
    }
    if (eval_reader) {
      const EvalResult ev = evaluate(res.model, *eval_reader);
      st.eval_loss = ev.loss;
      st.eval_metric = ev.metric;
      st.has_eval = true;
    }
    res.history.push_back(st);
    if (opt.keep_epoch_models) res.epoch_models.push_back(res.model);
  }
  return res;
}

EquivalenceReport order_equivalence(const std::string& dataset_path,
                                    const ParallelConfig& cfg, std::uint64_t epoch,
                                    std::optional<std::uint64_t> reference_seed) {
  DatasetReader reader(dataset_path);
  validate_parallel(cfg, reader.block_count());
  const std::uint32_t PN = cfg.workers;
  const std::uint64_t quota = cfg.batch_size / PN;
  const std::uint64_t ref_seed = reference_seed.value_or(cfg.seed);

  std::unordered_map<std::uint64_t, std::uint64_t> origin;
  for (std::uint64_t l = 0; l < reader.block_count(); ++l)
    for (const auto& t : reader.read_block(l)) origin[t.id] = l;

  // Consume a set of worker streams in lockstep; one sorted id multiset per
  // global step (steps where every stream is already dry are dropped).
  auto trace = [&](std::vector<std::unique_ptr<TupleStream>> streams) {
    std::vector<std::vector<std::uint64_t>> steps;
    std::vector<char> done(streams.size(), 0);
    Tuple t;
    while (true) {
      std::vector<std::uint64_t> ids;
      for (std::size_t w = 0; w < streams.size(); ++w) {
        if (done[w]) continue;
        for (std::uint64_t k = 0; k < quota; ++k) {
          if (!streams[w]->next(t)) {
            done[w] = 1;
            break;
          }
          ids.push_back(t.id);
        }
      }
      if (ids.empty()) break;
      std::sort(ids.begin(), ids.end());
      steps.push_back(std::move(ids));
    }
    return steps;
  };

  EquivalenceReport rep;
  rep.step_ids = trace(make_worker_streams(reader, cfg, cfg.seed, epoch,
                                           /*threaded=*/cfg.double_buffer));
  rep.reference_step_ids = trace(make_worker_streams(reader, cfg, ref_seed, epoch,
                                                     /*threaded=*/false));
  rep.steps = rep.step_ids.size();

  rep.matched = true;
  const std::size_t common = std::min(rep.step_ids.size(), rep.reference_step_ids.size());
  for (std::size_t s = 0; s < common; ++s) {
    if (rep.step_ids[s] != rep.reference_step_ids[s]) {
      rep.matched = false;
      rep.first_divergence_step = s + 1;
      break;
    }
  }
  if (rep.matched && rep.step_ids.size() != rep.reference_step_ids.size()) {
    rep.matched = false;
    rep.first_divergence_step = common + 1;
  }

  rep.step_blocks.reserve(rep.step_ids.size());
  for (const auto& ids : rep.step_ids) {
    std::vector<std::uint64_t> blocks;
    for (std::uint64_t id : ids) blocks.push_back(origin.at(id));
    std::sort(blocks.begin(), blocks.end());
    blocks.erase(std::unique(blocks.begin(), blocks.end()), blocks.end());
    rep.step_blocks.push_back(std::move(blocks));
  }
  return rep;
}

}  // namespace corgi
