#pragma once

// Data-parallel training over block shards.
//
// Each epoch draws ONE global block permutation, splits it into contiguous
// chunks (one per worker), and each worker runs its own buffered
// block/tuple shuffle over its chunk. Workers advance in lockstep: every
// global step, each worker contributes batch_size/workers tuples'
// gradients; the per-worker sums are merged in worker order and applied as
// a single averaged update, so the result equals a minibatch update over
// the union of the workers' contributions. With one worker the whole path
// degenerates, arithmetic step for arithmetic step, to minibatch_epoch over
// the same stream.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "corgi/sgd.hpp"

namespace corgi {

struct ParallelConfig {
  std::uint32_t workers = 2;
  std::uint64_t buffer_blocks_per_worker = 1;
  // Tuples per global step, split evenly among workers (must divide evenly).
  std::uint64_t batch_size = 2;
  bool double_buffer = false;  // background I/O thread per worker stream
  std::uint64_t seed = 0;
};

// One global permutation of the N blocks for this epoch, split into
// `workers` contiguous chunks; the first N % workers chunks get the extra
// block. Every block lands in exactly one chunk.
std::vector<std::vector<std::uint64_t>> partition_blocks(std::uint64_t seed,
                                                         std::uint64_t epoch,
                                                         std::uint64_t N,
                                                         std::uint32_t workers);

// Lockstep data-parallel run. TrainOptions::batch_size must be 1 (the
// default) or equal to cfg.batch_size; cfg.batch_size is what is used.
TrainResult parallel_train(const std::string& dataset_path, const ParallelConfig& cfg,
                           const Model& init, const TrainOptions& opt,
                           const std::string& eval_dataset_path = "");

// Consumption-order audit for one epoch. The parallel side builds the
// worker streams exactly as parallel_train does (including the background
// producer when double_buffer is set) and records, per global step, the
// sorted multiset of tuple ids consumed and the set of blocks they came
// from. The reference side rebuilds the same streams unthreaded (seeded
// with reference_seed if given, else cfg.seed) and consumes them in the
// same worker-order interleave. Matching multisets per step mean threading
// changed nothing about what each update saw.
struct EquivalenceReport {
  std::uint64_t steps = 0;
  bool matched = false;
  std::uint64_t first_divergence_step = 0;  // 1-based; 0 when matched
  std::vector<std::vector<std::uint64_t>> step_ids;            // parallel, sorted
  std::vector<std::vector<std::uint64_t>> reference_step_ids;  // reference, sorted
  std::vector<std::vector<std::uint64_t>> step_blocks;  // origin blocks, sorted unique
};
EquivalenceReport order_equivalence(const std::string& dataset_path,
                                    const ParallelConfig& cfg, std::uint64_t epoch,
                                    std::optional<std::uint64_t> reference_seed = {});

}  // namespace corgi
