#include "corgi/sgd.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "corgi/error.hpp"

namespace corgi {
namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow
double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

// dloss/dscore factor and loss for the single-score losses.
// Logistic uses the 0/1 target convention: factor = sigma(z) - y01.
void score_loss(LossKind kind, double z, float label, double& factor, double& loss) {
  switch (kind) {
    case LossKind::Logistic: {
      const double y01 = label > 0 ? 1.0 : 0.0;
      factor = sigmoid(z) - y01;
      loss = softplus(z) - z * y01;
      return;
    }
    case LossKind::Hinge: {
      const double y = label > 0 ? 1.0 : -1.0;
      const double margin = y * z;
      factor = margin < 1.0 ? -y : 0.0;
      loss = std::max(0.0, 1.0 - margin);
      return;
    }
    case LossKind::Squared: {
      const double r = z - static_cast<double>(label);
      factor = r;
      loss = 0.5 * r * r;
      return;
    }
    case LossKind::Softmax:
      throw InvalidArgument("softmax is not a single-score loss");
  }
  throw InvalidArgument("bad loss enum");
}

// Stable softmax probabilities for the tuple's scores; returns loss and
// fills probs. The label must be an integral class id in [0, C).
double softmax_probs(const Model& m, const Tuple& t, std::vector<double>& probs) {
  const std::size_t C = m.num_classes;
  probs.resize(C);
  double zmax = -1e300;
  for (std::size_t c = 0; c < C; ++c) {
    probs[c] = dot_row(m.w, m.dim, c, t) + m.bias[c];
    zmax = std::max(zmax, probs[c]);
  }
  double norm = 0.0;
  for (std::size_t c = 0; c < C; ++c) {
    probs[c] = std::exp(probs[c] - zmax);
    norm += probs[c];
  }
  const double y = t.label;
  if (y < 0 || y != std::floor(y) || y >= static_cast<double>(C))
    throw InvalidArgument("softmax label must be an integer class id in range");
  const std::size_t yi = static_cast<std::size_t>(y);
  const double loss = -std::log(probs[yi] / norm);
  for (std::size_t c = 0; c < C; ++c) probs[c] /= norm;
  return loss;
}

void check_tuple_dim(const Model& m, const Tuple& t) {
  if (t.is_dense()) {
    if (t.dense.size() != m.dim) throw InvalidArgument("tuple dimension mismatch");
  } else if (!t.idx.empty() && t.idx.back() >= m.dim) {
    throw InvalidArgument("tuple feature index out of model range");
  }
}

void guard_finite(double loss) {
  if (!std::isfinite(loss))
    throw DivergenceError("non-finite loss encountered; epoch aborted");
}

// Scales only the weight matrix (bias is unregularized).
void apply_l2(Model& m, double eta) {
  if (m.l2 == 0.0) return;
  const double k = 1.0 - eta * m.l2;
  for (double& x : m.w) x *= k;
}

}  // namespace

const char* loss_name(LossKind k) {
  switch (k) {
    case LossKind::Logistic: return "logistic";
    case LossKind::Hinge: return "hinge";
    case LossKind::Squared: return "squared";
    case LossKind::Softmax: return "softmax";
  }
  return "?";
}

LossKind loss_from_name(const std::string& name) {
  for (LossKind k : {LossKind::Logistic, LossKind::Hinge, LossKind::Squared,
                     LossKind::Softmax}) {
    if (name == loss_name(k)) return k;
  }
  throw InvalidArgument("unknown loss: " + name);
}

Model Model::zeros(LossKind loss, std::uint64_t dim, std::uint32_t num_classes,
                   double l2) {
  if (dim == 0) throw InvalidArgument("model dimension must be >= 1");
  Model m;
  m.loss = loss;
  m.dim = dim;
  m.l2 = l2;
  if (loss == LossKind::Softmax) {
    if (num_classes < 2) throw InvalidArgument("softmax needs num_classes >= 2");
    m.num_classes = num_classes;
    m.w.assign(static_cast<std::size_t>(num_classes) * dim, 0.0);
    m.bias.assign(num_classes, 0.0);
  } else {
    m.num_classes = 2;
    m.w.assign(dim, 0.0);
    m.bias.assign(1, 0.0);
  }
  return m;
}

double loss_value(const Model& m, const Tuple& t) {
  check_tuple_dim(m, t);
  double data_loss;
  if (m.loss == LossKind::Softmax) {
    std::vector<double> probs;
    data_loss = softmax_probs(m, t, probs);
  } else {
    double factor;
    score_loss(m.loss, dot(m.w, t) + m.bias[0], t.label, factor, data_loss);
  }
  if (m.l2 > 0.0) {
    double ss = 0.0;
    for (double x : m.w) ss += x * x;
    data_loss += 0.5 * m.l2 * ss;
  }
  return data_loss;
}

Gradient gradient(const Model& m, const Tuple& t) {
  check_tuple_dim(m, t);
  Gradient g;
  g.w.assign(m.w.size(), 0.0);
  g.bias.assign(m.bias.size(), 0.0);
  auto scatter = [&](std::size_t row, double factor) {
    const std::size_t base = row * m.dim;
    if (t.is_dense()) {
      for (std::size_t j = 0; j < t.dense.size(); ++j)
        g.w[base + j] += factor * t.dense[j];
    } else {
      for (std::size_t k = 0; k < t.idx.size(); ++k)
        g.w[base + t.idx[k]] += factor * t.val[k];
    }
    g.bias[row] += factor;
  };
  if (m.loss == LossKind::Softmax) {
    std::vector<double> probs;
    g.loss = softmax_probs(m, t, probs);
    const std::size_t yi = static_cast<std::size_t>(t.label);
    for (std::size_t c = 0; c < m.num_classes; ++c)
      scatter(c, probs[c] - (c == yi ? 1.0 : 0.0));
  } else {
    double factor;
    score_loss(m.loss, dot(m.w, t) + m.bias[0], t.label, factor, g.loss);
    scatter(0, factor);
  }
  if (m.l2 > 0.0) {
    double ss = 0.0;
    for (std::size_t i = 0; i < m.w.size(); ++i) {
      g.w[i] += m.l2 * m.w[i];
      ss += m.w[i] * m.w[i];
    }
    g.loss += 0.5 * m.l2 * ss;
  }
  return g;
}

double predict(const Model& m, const Tuple& t) {
  check_tuple_dim(m, t);
  if (m.loss == LossKind::Softmax) {
    std::size_t best = 0;
    double best_z = -1e300;
    for (std::size_t c = 0; c < m.num_classes; ++c) {
      const double z = dot_row(m.w, m.dim, c, t) + m.bias[c];
      if (z > best_z) {  // strict: ties keep the lowest class id
        best_z = z;
        best = c;
      }
    }
    return static_cast<double>(best);
  }
  const double z = dot(m.w, t) + m.bias[0];
  if (m.loss == LossKind::Squared) return z;
  return z >= 0 ? 1.0 : -1.0;  // margin exactly 0 predicts +1
}

double sgd_step(Model& m, const Tuple& t, double eta) {
  check_tuple_dim(m, t);
  double loss;
  if (m.loss == LossKind::Softmax) {
    std::vector<double> probs;
    loss = softmax_probs(m, t, probs);
    guard_finite(loss);
    const std::size_t yi = static_cast<std::size_t>(t.label);
    apply_l2(m, eta);
    for (std::size_t c = 0; c < m.num_classes; ++c) {
      const double factor = probs[c] - (c == yi ? 1.0 : 0.0);
      const std::size_t base = c * m.dim;
      if (t.is_dense()) {
        for (std::size_t j = 0; j < t.dense.size(); ++j)
          m.w[base + j] -= eta * (factor * t.dense[j]);
      } else {
        for (std::size_t k = 0; k < t.idx.size(); ++k)
          m.w[base + t.idx[k]] -= eta * (factor * t.val[k]);
      }
      m.bias[c] -= eta * factor;
    }
    return loss;
  }
  double factor;
  score_loss(m.loss, dot(m.w, t) + m.bias[0], t.label, factor, loss);
  guard_finite(loss);
  apply_l2(m, eta);
  if (t.is_dense()) {
    for (std::size_t j = 0; j < t.dense.size(); ++j)
      m.w[j] -= eta * (factor * t.dense[j]);
  } else {
    for (std::size_t k = 0; k < t.idx.size(); ++k)
      m.w[t.idx[k]] -= eta * (factor * t.val[k]);
  }
  m.bias[0] -= eta * factor;
  return loss;
}

// ---------------------------------------------------------------------------
// Batch accumulation

void BatchAccumulator::reset(const Model& m) {
  gw.assign(m.w.size(), 0.0);
  gbias.assign(m.bias.size(), 0.0);
  loss_sum = 0.0;
  count = 0;
}

void BatchAccumulator::add(const Model& m, const Tuple& t) {
  check_tuple_dim(m, t);
  auto scatter = [&](std::size_t row, double factor) {
    const std::size_t base = row * m.dim;
    if (t.is_dense()) {
      for (std::size_t j = 0; j < t.dense.size(); ++j)
        gw[base + j] += factor * t.dense[j];
    } else {
      for (std::size_t k = 0; k < t.idx.size(); ++k)
        gw[base + t.idx[k]] += factor * t.val[k];
    }
    gbias[row] += factor;
  };
  double loss;
  if (m.loss == LossKind::Softmax) {
    std::vector<double> probs;
    loss = softmax_probs(m, t, probs);
    guard_finite(loss);
    const std::size_t yi = static_cast<std::size_t>(t.label);
    for (std::size_t c = 0; c < m.num_classes; ++c)
      scatter(c, probs[c] - (c == yi ? 1.0 : 0.0));
  } else {
    double factor;
    score_loss(m.loss, dot(m.w, t) + m.bias[0], t.label, factor, loss);
    guard_finite(loss);
    scatter(0, factor);
  }
  loss_sum += loss;
  ++count;
}

void BatchAccumulator::merge(const BatchAccumulator& other) {
  if (other.count == 0) return;
  if (gw.size() != other.gw.size() || gbias.size() != other.gbias.size())
    throw InvalidArgument("accumulator shape mismatch");
  for (std::size_t i = 0; i < gw.size(); ++i) gw[i] += other.gw[i];
  for (std::size_t i = 0; i < gbias.size(); ++i) gbias[i] += other.gbias[i];
  loss_sum += other.loss_sum;
  count += other.count;
}

void BatchAccumulator::apply(Model& m, double eta) const {
  if (count == 0) return;
  const double cnt = static_cast<double>(count);
  apply_l2(m, eta);
  for (std::size_t i = 0; i < gw.size(); ++i) m.w[i] -= eta * (gw[i] / cnt);
  for (std::size_t i = 0; i < gbias.size(); ++i) m.bias[i] -= eta * (gbias[i] / cnt);
}

// ---------------------------------------------------------------------------
// Epoch loops

double sgd_epoch(Model& m, TupleStream& stream, double eta, std::uint64_t* tuples_seen) {
  Tuple t;
  double loss_sum = 0.0;
  std::uint64_t n = 0;
  while (stream.next(t)) {
    loss_sum += sgd_step(m, t, eta);
    ++n;
  }
  if (tuples_seen) *tuples_seen = n;
  return n ? loss_sum / static_cast<double>(n) : 0.0;
}

double minibatch_epoch(Model& m, TupleStream& stream, double eta,
                       std::uint64_t batch_size, std::uint64_t* tuples_seen) {
  if (batch_size == 0) throw InvalidArgument("batch_size must be >= 1");
  Tuple t;
  BatchAccumulator acc;
  double loss_sum = 0.0;
  std::uint64_t n = 0;
  bool more = true;
  while (more) {
    acc.reset(m);
    for (std::uint64_t k = 0; k < batch_size; ++k) {
      if (!stream.next(t)) {
        more = false;
        break;
      }
      acc.add(m, t);
      ++n;
    }
    loss_sum += acc.loss_sum;
    acc.apply(m, eta);  // short final batch averages over its actual size
  }
  if (tuples_seen) *tuples_seen = n;
  return n ? loss_sum / static_cast<double>(n) : 0.0;
}

// ---------------------------------------------------------------------------

double LrSchedule::eta(std::uint64_t epoch_index) const {
  switch (kind) {
    case Kind::Const:
      return eta0;
    case Kind::ExpDecay:
      return eta0 * std::pow(rho, static_cast<double>(epoch_index));
    case Kind::InverseEpoch: {
      const double s = static_cast<double>(epoch_index + 1);  // 1-based epoch
      const double denom = static_cast<double>(batch_b) * static_cast<double>(buffer_n) *
                           mu * (s + a);
      if (denom <= 0) throw InvalidArgument("inverse-epoch schedule denominator <= 0");
      return 6.0 / denom;
    }
  }
  throw InvalidArgument("bad schedule kind");
}

EvalResult evaluate(const Model& m, const DatasetReader& data) {
  double loss_sum = 0.0;
  double correct = 0.0;
  double ss_res = 0.0, y_sum = 0.0, yy_sum = 0.0;
  std::uint64_t n = 0;
  for (std::uint64_t b = 0; b < data.block_count(); ++b) {
    for (const Tuple& t : data.read_block(b)) {
      loss_sum += loss_value(m, t);
      const double p = predict(m, t);
      if (m.loss == LossKind::Squared) {
        const double r = p - static_cast<double>(t.label);
        ss_res += r * r;
        y_sum += t.label;
        yy_sum += static_cast<double>(t.label) * static_cast<double>(t.label);
      } else if (m.loss == LossKind::Softmax) {
        correct += (p == static_cast<double>(t.label)) ? 1.0 : 0.0;
      } else {
        const double y = t.label > 0 ? 1.0 : -1.0;
        correct += (p == y) ? 1.0 : 0.0;
      }
      ++n;
    }
  }
  if (n == 0) throw InvalidArgument("evaluate on empty dataset");
  EvalResult r;
  r.loss = loss_sum / static_cast<double>(n);
  if (m.loss == LossKind::Squared) {
    // R^2 against the label mean; a constant mean predictor scores 0.
    const double mean = y_sum / static_cast<double>(n);
    const double ss_tot = yy_sum - static_cast<double>(n) * mean * mean;
    if (ss_tot <= 0.0) {
      r.metric = (ss_res == 0.0) ? 1.0 : 0.0;
    } else {
      r.metric = 1.0 - ss_res / ss_tot;
    }
  } else {
    r.metric = correct / static_cast<double>(n);
  }
  return r;
}

void validate_model_for(const Model& m, const DatasetMeta& meta) {
  if (m.dim != meta.dimension) {
    std::ostringstream os;
    os << "model dimension " << m.dim << " != dataset dimension " << meta.dimension;
    throw InvalidArgument(os.str());
  }
  switch (m.loss) {
    case LossKind::Logistic:
    case LossKind::Hinge:
      if (meta.task != Task::Binary)
        throw InvalidArgument("binary loss on a non-binary dataset");
      break;
    case LossKind::Squared:
      if (meta.task == Task::Multiclass)
        throw InvalidArgument("squared loss on a multiclass dataset");
      break;
    case LossKind::Softmax:
      if (meta.task != Task::Multiclass || m.num_classes != meta.num_classes)
        throw InvalidArgument("softmax model does not match dataset classes");
      break;
  }
}

TrainResult train(const std::string& dataset_path, const ShuffleConfig& shuffle,
                  const Model& init, const TrainOptions& opt,
                  const std::string& eval_dataset_path) {
  if (opt.epochs == 0) throw InvalidArgument("epochs must be >= 1");
  StrategyRunner runner(dataset_path, shuffle);
  validate_model_for(init, runner.meta());
  std::unique_ptr<DatasetReader> eval_reader;
  if (!eval_dataset_path.empty()) {
    eval_reader = std::make_unique<DatasetReader>(eval_dataset_path);
    validate_model_for(init, eval_reader->meta());
  }

  TrainResult res;
  res.model = init;
  for (std::uint64_t s = 0; s < opt.epochs; ++s) {
    EpochStats st;
    st.epoch = s;
    st.lr = opt.lr.eta(s);
    const std::uint64_t bytes0 = runner.bytes_read();
    const auto t0 = std::chrono::steady_clock::now();
    auto stream = runner.epoch_stream(s);
    st.step_loss = (opt.batch_size <= 1)
                       ? sgd_epoch(res.model, *stream, st.lr, &st.tuples_seen)
                       : minibatch_epoch(res.model, *stream, st.lr, opt.batch_size,
                                         &st.tuples_seen);
    st.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    st.bytes_read = runner.bytes_read() - bytes0;
    if (opt.evaluate_train) {
      const EvalResult ev = evaluate(res.model, runner.reader());
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
  res.setup_seconds = runner.setup_seconds();
  return res;
}

}  // namespace corgi
