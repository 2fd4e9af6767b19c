#pragma once

// SGD on linear models over tuple streams.
//
// The trainer is deliberately stream-agnostic: it asks the strategy runner
// for one stream per epoch and consumes it tuple by tuple (or in
// minibatches), so the only thing that differs between shuffling strategies
// is the order in which gradients arrive.
//
// Update rule (per step, learning rate eta, L2 strength lambda):
//   w <- (1 - eta*lambda) * w - eta * g_data
// applied with the data gradient evaluated at the pre-step iterate. The
// batch path averages g_data over the tuples actually in the batch (a short
// final batch divides by its real size); batch_size=1 reproduces the
// per-tuple path bit for bit.

#include <cstdint>
#include <string>
#include <vector>

#include "corgi/dataset.hpp"
#include "corgi/stream.hpp"
#include "corgi/tuple.hpp"

namespace corgi {

enum class LossKind {
  Logistic,  // binary, labels +/-1
  Hinge,     // binary, labels +/-1
  Squared,   // regression (or +/-1 targets)
  Softmax,   // multiclass, labels 0..C-1
};

const char* loss_name(LossKind k);
LossKind loss_from_name(const std::string& name);

struct Model {
  LossKind loss = LossKind::Logistic;
  std::uint64_t dim = 0;
  std::uint32_t num_classes = 2;  // softmax rows; 2 for the binary losses
  double l2 = 0.0;
  // Logistic/Hinge/Squared: w has dim entries, bias has 1.
  // Softmax: w is row-major num_classes x dim, bias has num_classes.
  std::vector<double> w;
  std::vector<double> bias;

  static Model zeros(LossKind loss, std::uint64_t dim, std::uint32_t num_classes = 2,
                     double l2 = 0.0);
};

// Full-parameter gradient (including the L2 term) and loss at the model.
// Used by validators and clustering statistics; the training loop uses the
// in-place step below instead.
struct Gradient {
  double loss = 0.0;
  std::vector<double> w;     // same layout as Model::w
  std::vector<double> bias;  // same layout as Model::bias
};
Gradient gradient(const Model& m, const Tuple& t);
double loss_value(const Model& m, const Tuple& t);

// Prediction: binary losses return +/-1 with ties (margin exactly 0) going
// to +1; softmax returns the argmax class (ties to the lowest class id);
// squared returns the raw score.
double predict(const Model& m, const Tuple& t);

// One in-place SGD step; returns the tuple's loss at the pre-step model.
// Throws DivergenceError if the loss is not finite.
double sgd_step(Model& m, const Tuple& t, double eta);

// Mean step loss over the stream. tuples_seen (if given) gets the emission count.
double sgd_epoch(Model& m, TupleStream& stream, double eta,
                 std::uint64_t* tuples_seen = nullptr);
double minibatch_epoch(Model& m, TupleStream& stream, double eta,
                       std::uint64_t batch_size, std::uint64_t* tuples_seen = nullptr);

// Gradient accumulator shared by the minibatch and data-parallel paths, so
// a one-worker parallel run is arithmetically identical to minibatch_epoch.
struct BatchAccumulator {
  std::vector<double> gw;
  std::vector<double> gbias;
  double loss_sum = 0.0;
  std::uint64_t count = 0;

  void reset(const Model& m);
  void add(const Model& m, const Tuple& t);  // gradient at m, accumulated
  void merge(const BatchAccumulator& other);
  // Applies the averaged gradient: w <- (1-eta*l2) w - eta * (gw/count).
  void apply(Model& m, double eta) const;
};

struct LrSchedule {
  enum class Kind {
    Const,         // eta0
    ExpDecay,      // eta0 * rho^s, s = 0,1,...
    InverseEpoch,  // 6 / (b * n * mu * (s + a)), s = 1,2,...
  };
  Kind kind = Kind::ExpDecay;
  double eta0 = 0.01;
  double rho = 0.95;
  double mu = 1.0, a = 1.0;  // InverseEpoch parameters
  std::uint64_t batch_b = 1, buffer_n = 1;
  double eta(std::uint64_t epoch_index) const;  // epoch_index is 0-based
};

struct EvalResult {
  double loss = 0.0;
  double metric = 0.0;  // accuracy (classification) or R^2 (regression)
};
EvalResult evaluate(const Model& m, const DatasetReader& data);

struct EpochStats {
  std::uint64_t epoch = 0;
  double lr = 0.0;
  double step_loss = 0.0;  // mean loss over the epoch's SGD steps
  double train_loss = 0.0, train_metric = 0.0;
  double eval_loss = 0.0, eval_metric = 0.0;
  bool has_eval = false;
  double seconds = 0.0;
  std::uint64_t bytes_read = 0;
  std::uint64_t tuples_seen = 0;
};

struct TrainOptions {
  std::uint64_t epochs = 20;
  LrSchedule lr;
  std::uint64_t batch_size = 1;  // 1 = per-tuple updates
  bool evaluate_train = true;    // full-train-set evaluation each epoch
  bool keep_epoch_models = false;
};

struct TrainResult {
  Model model;
  std::vector<EpochStats> history;
  std::vector<Model> epoch_models;  // end-of-epoch iterates, if requested
  double setup_seconds = 0.0;       // shuffle-once materialization cost
};

// Full training run: one fresh stream per epoch from the strategy runner,
// per-epoch evaluation, byte/time accounting.
TrainResult train(const std::string& dataset_path, const ShuffleConfig& shuffle,
                  const Model& init, const TrainOptions& opt,
                  const std::string& eval_dataset_path = "");

// Checks model/dataset compatibility (dimension, task vs loss, classes).
void validate_model_for(const Model& m, const DatasetMeta& meta);

}  // namespace corgi
