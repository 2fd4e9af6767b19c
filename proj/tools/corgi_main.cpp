// corgi: block-format datasets and buffered-shuffle SGD from the command line.
//
// Exit codes: 0 success, 1 runtime/validation failure (bad file, failed
// integrity check, diverged run), 2 usage error (bad flags or arguments).

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "corgi/bench.hpp"
#include "corgi/dataset.hpp"
#include "corgi/error.hpp"
#include "corgi/parallel.hpp"
#include "corgi/report.hpp"
#include "corgi/sgd.hpp"
#include "corgi/stream.hpp"
#include "corgi/theory.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> g_argv;

corgi::RunManifest base_manifest(const std::string& subcommand, std::uint64_t seed) {
  corgi::RunManifest man;
  man.subcommand = subcommand;
  man.argv = g_argv;
  man.seed = seed;
  return man;
}

void emit_manifest(corgi::RunManifest man, const json& params,
                   const std::vector<std::string>& inputs,
                   const std::vector<std::string>& outputs,
                   const std::string& manifest_path) {
  man.params_json = params.dump(2);
  for (const auto& p : inputs) man.inputs.push_back(corgi::manifest_file(p));
  for (const auto& p : outputs) man.outputs.push_back(corgi::manifest_file(p));
  corgi::write_manifest(std::move(man), manifest_path);
}

corgi::Task task_from_name(const std::string& name) {
  if (name == "binary") return corgi::Task::Binary;
  if (name == "multiclass") return corgi::Task::Multiclass;
  if (name == "regression") return corgi::Task::Regression;
  throw corgi::InvalidArgument("unknown task: " + name);
}

const char* task_name(corgi::Task t) {
  switch (t) {
    case corgi::Task::Binary: return "binary";
    case corgi::Task::Multiclass: return "multiclass";
    case corgi::Task::Regression: return "regression";
  }
  return "?";
}

std::string dataset_summary(const std::string& path) {
  corgi::DatasetReader r(path);
  const auto& m = r.meta();
  std::ostringstream os;
  os << path << ": " << task_name(m.task) << ", " << m.tuple_count << " tuples, dim "
     << m.dimension << ", " << r.block_count() << " blocks of " << m.block_size_bytes
     << " bytes" << (m.encoding == corgi::Encoding::Dense ? " (dense)" : " (sparse)");
  return os.str();
}

// ---------------------------------------------------------------------------
// Shared shuffle-strategy flags (train, analyze-order)

struct ShuffleOpts {
  std::string strategy = "corgipile";
  double buffer_frac = 0.1;
  double window_frac = -1.0;
  std::uint32_t loop_ratio = 1;
  bool double_buffer = false;
  std::uint64_t seed = 0;
  std::uint64_t index_budget = 256ull << 20;

  corgi::ShuffleConfig config() const {
    corgi::ShuffleConfig cfg;
    cfg.strategy = corgi::strategy_from_name(strategy);
    cfg.buffer_fraction = buffer_frac;
    cfg.window_fraction = window_frac;
    cfg.loop_ratio = loop_ratio;
    cfg.double_buffer = double_buffer;
    cfg.seed = seed;
    cfg.index_budget_bytes = index_budget;
    return cfg;
  }
  json params() const {
    return json{{"strategy", strategy},
                {"buffer_fraction", buffer_frac},
                {"window_fraction", window_frac},
                {"loop_ratio", loop_ratio},
                {"double_buffer", double_buffer},
                {"index_budget_bytes", index_budget}};
  }
};

void add_shuffle_options(CLI::App* cmd, ShuffleOpts& o) {
  cmd->add_option("--strategy", o.strategy,
                  "no_shuffle | shuffle_once | epoch_shuffle | sliding_window | mrs | "
                  "block_only | corgipile")
      ->capture_default_str();
  cmd->add_option("--buffer-frac,--buffer_fraction", o.buffer_frac,
                  "buffer size as a fraction of the dataset")
      ->capture_default_str();
  cmd->add_option("--window-frac", o.window_frac,
                  "sliding window fraction (default: --buffer-frac)");
  cmd->add_option("--loop-ratio", o.loop_ratio,
                  "mrs: buffered emissions per scanned emission")
      ->capture_default_str();
  cmd->add_flag("--double-buffer", o.double_buffer,
                "corgipile: overlap I/O with half-size buffers");
  cmd->add_option("--seed", o.seed, "root RNG seed")->capture_default_str();
  cmd->add_option("--index-budget", o.index_budget,
                  "max bytes for per-tuple location tables");
}

// ---------------------------------------------------------------------------
// generate

struct GenerateOpts {
  std::string out;
  std::uint64_t tuples = 1000;
  std::uint64_t dim = 10;
  std::string task = "binary";
  std::uint32_t classes = 2;
  double separation = 1.0;
  double noise = 1.0;
  std::string order = "clustered";
  std::uint32_t order_feature = 0;
  std::uint64_t block_size = 1ull << 20;
  std::uint64_t seed = 0;
};

void run_generate(const GenerateOpts& o) {
  corgi::SyntheticSpec spec;
  spec.tuple_count = o.tuples;
  spec.dimension = o.dim;
  spec.task = task_from_name(o.task);
  spec.num_classes = o.classes;
  spec.noise_stddev = static_cast<float>(o.noise);
  spec.seed = o.seed;
  if (o.order == "clustered")
    spec.order = corgi::SyntheticSpec::Order::LabelClustered;
  else if (o.order == "shuffled")
    spec.order = corgi::SyntheticSpec::Order::Shuffled;
  else if (o.order == "feature")
    spec.order = corgi::SyntheticSpec::Order::FeatureOrdered;
  else
    throw corgi::InvalidArgument("unknown order: " + o.order);
  spec.order_feature = o.order_feature;

  // Class means: binary classes sit at -/+ separation/sqrt(d) on every axis
  // (so the between-class distance is 2*separation regardless of d);
  // multiclass means sit on scaled unit axes; regression draws around 0.
  if (spec.task == corgi::Task::Binary) {
    const float v = static_cast<float>(o.separation / std::sqrt(static_cast<double>(o.dim)));
    spec.class_means = {std::vector<float>(o.dim, -v), std::vector<float>(o.dim, v)};
  } else if (spec.task == corgi::Task::Multiclass) {
    for (std::uint32_t c = 0; c < o.classes; ++c) {
      std::vector<float> mean(o.dim, 0.0f);
      mean[c % o.dim] = static_cast<float>(o.separation);
      spec.class_means.push_back(std::move(mean));
    }
  } else {
    spec.class_means = {std::vector<float>(o.dim, 0.0f)};
  }

  corgi::generate_synthetic(spec, o.out, o.block_size);
  std::cout << dataset_summary(o.out) << "\n";

  const json params{{"tuples", o.tuples},       {"dim", o.dim},
                    {"task", o.task},           {"classes", o.classes},
                    {"separation", o.separation}, {"noise", o.noise},
                    {"order", o.order},         {"order_feature", o.order_feature},
                    {"block_size", o.block_size}};
  emit_manifest(base_manifest("generate", o.seed), params, {}, {o.out},
                o.out + ".manifest.json");
}

// ---------------------------------------------------------------------------
// ingest

struct IngestOpts {
  std::string in, out;
  std::string task = "binary";
  std::uint32_t classes = 2;
  std::uint64_t dim = 0;
  std::uint64_t block_size = 10ull << 20;
  bool dense = false;
};

void run_ingest(const IngestOpts& o) {
  corgi::IngestOptions opt;
  opt.task = task_from_name(o.task);
  opt.num_classes = o.classes;
  opt.dimension = o.dim;
  opt.block_size_bytes = o.block_size;
  opt.encoding = o.dense ? corgi::Encoding::Dense : corgi::Encoding::Sparse;
  corgi::ingest_libsvm(o.in, o.out, opt);
  std::cout << dataset_summary(o.out) << "\n";

  const json params{{"task", o.task},
                    {"classes", o.classes},
                    {"dim", o.dim},
                    {"block_size", o.block_size},
                    {"dense", o.dense}};
  emit_manifest(base_manifest("ingest", 0), params, {o.in}, {o.out},
                o.out + ".manifest.json");
}

// ---------------------------------------------------------------------------
// reorder / shuffle-copy

struct ReorderOpts {
  std::string in, out;
  std::string by = "label";
  std::uint32_t feature = 0;
};

void run_reorder(const ReorderOpts& o) {
  if (o.by == "label")
    corgi::order_by_label(o.in, o.out);
  else if (o.by == "feature")
    corgi::order_by_feature(o.in, o.feature, o.out);
  else
    throw corgi::InvalidArgument("--by must be label or feature");
  std::cout << dataset_summary(o.out) << "\n";
  const json params{{"by", o.by}, {"feature", o.feature}};
  emit_manifest(base_manifest("reorder", 0), params, {o.in}, {o.out},
                o.out + ".manifest.json");
}

struct ShuffleCopyOpts {
  std::string in, out;
  std::uint64_t seed = 0;
  std::uint64_t budget = 256ull << 20;
};

void run_shuffle_copy(const ShuffleCopyOpts& o) {
  corgi::full_shuffle(o.in, o.out, o.seed, o.budget);
  std::cout << dataset_summary(o.out) << "\n";
  const json params{{"budget", o.budget}};
  emit_manifest(base_manifest("shuffle-copy", o.seed), params, {o.in}, {o.out},
                o.out + ".manifest.json");
}

// ---------------------------------------------------------------------------
// train

struct TrainOpts {
  std::string data, eval_data, out_dir;
  ShuffleOpts shuffle;
  std::string loss;  // empty = pick by task
  double l2 = 0.0;
  std::uint64_t epochs = 20;
  std::uint64_t batch = 1;
  std::string lr_kind = "exp";
  double eta0 = 0.01;
  double rho = 0.95;
  double mu = 1.0;
  double lr_a = 1.0;
  std::uint32_t workers = 1;
  std::uint64_t buffer_blocks = 0;  // parallel: blocks per worker buffer (0 = auto)
  bool no_train_eval = false;
  bool keep_models = false;
};

corgi::LossKind pick_loss(const std::string& name, const corgi::DatasetMeta& meta) {
  if (!name.empty()) return corgi::loss_from_name(name);
  switch (meta.task) {
    case corgi::Task::Binary: return corgi::LossKind::Logistic;
    case corgi::Task::Multiclass: return corgi::LossKind::Softmax;
    case corgi::Task::Regression: return corgi::LossKind::Squared;
  }
  throw corgi::InvalidArgument("unknown task in dataset");
}

void print_history(const std::vector<corgi::EpochStats>& history, bool regression) {
  const char* metric = regression ? "r2" : "acc";
  for (const auto& st : history) {
    std::printf("epoch %3" PRIu64 "  lr %.5g  loss %.6f  train_%s %.4f", st.epoch, st.lr,
                st.step_loss, metric, st.train_metric);
    if (st.has_eval) std::printf("  test_%s %.4f", metric, st.eval_metric);
    std::printf("  (%.3fs, %" PRIu64 " bytes)\n", st.seconds, st.bytes_read);
  }
}

json model_json(const corgi::Model& m) {
  return json{{"loss", corgi::loss_name(m.loss)}, {"dim", m.dim},
              {"num_classes", m.num_classes},     {"l2", m.l2},
              {"w", m.w},                         {"bias", m.bias}};
}

void run_train(const TrainOpts& o) {
  corgi::ShuffleConfig cfg = o.shuffle.config();
  corgi::LossKind loss;
  corgi::TrainOptions topt;
  corgi::Model init;
  std::uint64_t blocks = 0;
  std::uint64_t tuples_per_block = 1;
  {
    corgi::DatasetReader reader(o.data);
    loss = pick_loss(o.loss, reader.meta());
    init = corgi::Model::zeros(loss, reader.meta().dimension,
                               std::max<std::uint32_t>(reader.meta().num_classes, 2),
                               o.l2);
    blocks = reader.block_count();
    tuples_per_block = reader.meta().tuples_per_block
                           ? reader.meta().tuples_per_block
                           : std::max<std::uint64_t>(1, reader.meta().tuple_count / blocks);
  }

  topt.epochs = o.epochs;
  topt.batch_size = o.batch;
  topt.evaluate_train = !o.no_train_eval;
  topt.keep_epoch_models = o.keep_models;
  topt.lr.eta0 = o.eta0;
  topt.lr.rho = o.rho;
  topt.lr.mu = o.mu;
  topt.lr.a = o.lr_a;
  if (o.lr_kind == "const")
    topt.lr.kind = corgi::LrSchedule::Kind::Const;
  else if (o.lr_kind == "exp")
    topt.lr.kind = corgi::LrSchedule::Kind::ExpDecay;
  else if (o.lr_kind == "inverse")
    topt.lr.kind = corgi::LrSchedule::Kind::InverseEpoch;
  else
    throw corgi::InvalidArgument("--lr-kind must be const, exp, or inverse");

  corgi::TrainResult result;
  if (o.workers > 1) {
    if (cfg.strategy != corgi::Strategy::CorgiPile)
      throw corgi::InvalidArgument("--workers > 1 requires --strategy corgipile");
    if (o.batch % o.workers != 0)
      throw corgi::InvalidArgument("--batch-size must be a multiple of --workers");
    corgi::ParallelConfig pcfg;
    pcfg.workers = o.workers;
    pcfg.buffer_blocks_per_worker =
        o.buffer_blocks ? o.buffer_blocks
                        : std::max<std::uint64_t>(
                              1, static_cast<std::uint64_t>(
                                     cfg.buffer_fraction * static_cast<double>(blocks) /
                                     o.workers));
    pcfg.batch_size = o.batch;
    pcfg.double_buffer = cfg.double_buffer;
    pcfg.seed = cfg.seed;
    if (topt.lr.kind == corgi::LrSchedule::Kind::InverseEpoch) {
      topt.lr.batch_b = tuples_per_block;
      topt.lr.buffer_n = pcfg.buffer_blocks_per_worker * o.workers;
    }
    result = corgi::parallel_train(o.data, pcfg, init, topt, o.eval_data);
  } else {
    if (topt.lr.kind == corgi::LrSchedule::Kind::InverseEpoch) {
      corgi::StrategyRunner probe(o.data, cfg);
      topt.lr.batch_b = tuples_per_block;
      topt.lr.buffer_n = probe.corgipile_buffer_blocks();
    }
    result = corgi::train(o.data, cfg, init, topt, o.eval_data);
  }

  print_history(result.history, loss == corgi::LossKind::Squared);
  if (result.setup_seconds > 0)
    std::printf("one-time shuffle materialization: %.3fs\n", result.setup_seconds);

  if (!o.out_dir.empty()) {
    fs::create_directories(o.out_dir);
    const std::string history_path = (fs::path(o.out_dir) / "history.csv").string();
    const std::string model_path = (fs::path(o.out_dir) / "model.json").string();
    corgi::write_history_csv(result.history, history_path);
    corgi::write_text_file(model_path, model_json(result.model).dump(2) + "\n");

    json params = o.shuffle.params();
    params["loss"] = corgi::loss_name(loss);
    params["l2"] = o.l2;
    params["epochs"] = o.epochs;
    params["batch_size"] = o.batch;
    params["lr_kind"] = o.lr_kind;
    params["eta0"] = o.eta0;
    params["rho"] = o.rho;
    params["mu"] = o.mu;
    params["lr_a"] = o.lr_a;
    params["workers"] = o.workers;
    params["buffer_blocks"] = o.buffer_blocks;
    std::vector<std::string> inputs{o.data};
    if (!o.eval_data.empty()) inputs.push_back(o.eval_data);
    emit_manifest(base_manifest("train", o.shuffle.seed), params, inputs,
                  {history_path, model_path},
                  (fs::path(o.out_dir) / "manifest.json").string());
    std::cout << "wrote " << history_path << ", " << model_path << "\n";
  }
}

// ---------------------------------------------------------------------------
// analyze-order

struct AnalyzeOpts {
  std::string data, out_dir;
  ShuffleOpts shuffle;
  std::uint64_t epoch = 0;
  std::uint32_t window = 20;
};

void run_analyze_order(const AnalyzeOpts& o) {
  corgi::StrategyRunner runner(o.data, o.shuffle.config());
  auto stream = runner.epoch_stream(o.epoch);
  const corgi::OrderProfile profile = corgi::analyze_order(*stream, o.window);
  std::cout << corgi::order_summary_json(profile);

  if (!o.out_dir.empty()) {
    fs::create_directories(o.out_dir);
    const std::string csv_path = (fs::path(o.out_dir) / "order.csv").string();
    const std::string sum_path = (fs::path(o.out_dir) / "order_summary.json").string();
    corgi::write_order_csv(profile, csv_path);
    corgi::write_text_file(sum_path, corgi::order_summary_json(profile));
    json params = o.shuffle.params();
    params["epoch"] = o.epoch;
    params["window"] = o.window;
    emit_manifest(base_manifest("analyze-order", o.shuffle.seed), params, {o.data},
                  {csv_path, sum_path},
                  (fs::path(o.out_dir) / "manifest.json").string());
    std::cout << "wrote " << csv_path << ", " << sum_path << "\n";
  }
}

// ---------------------------------------------------------------------------
// verify

void run_verify(const std::string& path) {
  corgi::DatasetReader reader(path);  // validates header, footer, index coverage
  std::puts("[PASS] container structure (header, index, footer checksum)");
  std::uint64_t tuples = 0;
  for (std::uint64_t l = 0; l < reader.block_count(); ++l)
    tuples += reader.read_block(l).size();  // validates per-block checksum + layout
  std::printf("[PASS] block checksums (%" PRIu64 " blocks)\n", reader.block_count());
  if (tuples != reader.meta().tuple_count)
    throw corgi::IntegrityError("decoded tuple count does not match header");
  std::printf("[PASS] tuple count (%" PRIu64 " decoded)\n", tuples);
  std::printf("file crc32: %08x\n", corgi::file_crc32(path));
  std::cout << dataset_summary(path) << "\n";
}

// ---------------------------------------------------------------------------
// bound

struct BoundOpts {
  std::uint64_t N = 10, n = 5, b = 4, S = 10, m = 0;
  double h = 1.0, sigma2 = 1.0;
  double eps = 0.0, t_lat = 0.0, t_tr = 0.0;
  std::string out;
};

json fraction_json(const corgi::Fraction& f) {
  return json{{"num", f.num}, {"den", f.den}, {"value", f.value()}};
}

json bound_json(const corgi::BoundTerms& t) {
  json j{{"horizon", t.horizon}, {"term1", t.term1}, {"term2", t.term2},
         {"term3", t.term3},     {"total", t.total}};
  if (t.which_case > 0) j["case"] = t.which_case;
  return j;
}

void run_bound(const BoundOpts& o) {
  const corgi::SamplingParams p{o.N, o.n, o.b};
  const std::uint64_t m = o.m ? o.m : o.N * o.b;
  json out{{"params", json{{"N", o.N},
                           {"n", o.n},
                           {"b", o.b},
                           {"epochs", o.S},
                           {"m", m},
                           {"h", o.h},
                           {"sigma2", o.sigma2}}},
           {"alpha", fraction_json(corgi::alpha_fraction(p))},
           {"beta", fraction_json(corgi::beta_fraction(p))},
           {"gamma", fraction_json(corgi::gamma_fraction(p))},
           {"strongly_convex",
            bound_json(corgi::strongly_convex_bound(p, o.S, o.h, o.sigma2, m))},
           {"nonconvex", bound_json(corgi::nonconvex_bound(p, o.S, o.h, o.sigma2, m))}};
  if (o.n * o.b >= 2) {
    const auto probs = corgi::inclusion_probabilities(p);
    out["inclusion"] = json{{"single", probs.single},
                            {"pair_same_block", probs.pair_same_block},
                            {"pair_cross_block", probs.pair_cross_block},
                            {"block", probs.block},
                            {"block_pair", probs.block_pair}};
  }
  if (o.eps > 0.0) {
    const auto cost = corgi::read_cost_model(o.t_lat, o.t_tr, p, o.eps, o.sigma2, o.h);
    out["read_cost"] = json{{"full_scan", cost.full_scan},
                            {"buffered", cost.buffered},
                            {"ratio", cost.ratio}};
  }
  const std::string text = out.dump(2) + "\n";
  std::cout << text;
  if (!o.out.empty()) {
    corgi::write_text_file(o.out, text);
    emit_manifest(base_manifest("bound", 0), out["params"], {}, {o.out},
                  o.out + ".manifest.json");
  }
}

// ---------------------------------------------------------------------------
// bench-io / bench-epoch

struct BenchIoOpts {
  std::string data;
  std::string mode = "sequential";
  std::uint64_t reps = 5;
  bool cold = false;
  std::uint64_t seed = 0;
  std::string out;
};

void run_bench_io(const BenchIoOpts& o) {
  const auto r = corgi::io_scan_bench(o.data, corgi::scan_mode_from_name(o.mode), o.reps,
                                      o.cold, o.seed);
  json j{{"mode", corgi::scan_mode_name(r.mode)},
         {"regime", r.regime},
         {"reps", r.reps},
         {"bytes_per_rep", r.bytes_per_rep},
         {"min_seconds", r.min_seconds},
         {"median_seconds", r.median_seconds},
         {"max_seconds", r.max_seconds},
         {"mib_per_second", r.mib_per_second}};
  const std::string text = j.dump(2) + "\n";
  std::cout << text;
  if (!o.out.empty()) {
    corgi::write_text_file(o.out, text);
    emit_manifest(base_manifest("bench-io", o.seed),
                  json{{"mode", o.mode}, {"reps", o.reps}, {"cold", o.cold}}, {o.data},
                  {o.out}, o.out + ".manifest.json");
  }
}

struct BenchEpochOpts {
  std::string data;
  std::vector<std::string> specs;
  std::uint64_t reps = 3;
  std::uint64_t seed = 0;
  std::string out;
};

// "name", "name:frac", or "name:frac:db".
corgi::ShuffleConfig parse_bench_spec(const std::string& spec, std::uint64_t seed) {
  corgi::ShuffleConfig cfg;
  cfg.seed = seed;
  std::stringstream ss(spec);
  std::string tok;
  int part = 0;
  while (std::getline(ss, tok, ':')) {
    if (part == 0) {
      cfg.strategy = corgi::strategy_from_name(tok);
    } else if (tok == "db") {
      cfg.double_buffer = true;
    } else {
      char* end = nullptr;
      const double f = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || *end != '\0')
        throw corgi::InvalidArgument("bad strategy spec: " + spec);
      cfg.buffer_fraction = f;
    }
    ++part;
  }
  if (part == 0) throw corgi::InvalidArgument("empty strategy spec");
  return cfg;
}

void run_bench_epoch(const BenchEpochOpts& o) {
  std::vector<std::string> specs = o.specs;
  if (specs.empty())
    specs = {"no_shuffle",         "shuffle_once", "epoch_shuffle",
             "block_only:0.1",     "corgipile:0.1", "corgipile:0.1:db",
             "sliding_window:0.1", "mrs:0.1"};
  std::vector<corgi::ShuffleConfig> cfgs;
  for (const auto& s : specs) cfgs.push_back(parse_bench_spec(s, o.seed));
  const auto results = corgi::epoch_overhead_bench(o.data, cfgs, o.reps);

  std::printf("%-28s %12s %12s %8s %12s\n", "configuration", "mean (s)", "stddev (s)",
              "ratio", "tuples");
  std::ostringstream csv;
  csv << "label,strategy,mean_seconds,stddev_seconds,ratio_vs_baseline,tuples_per_epoch\n";
  for (const auto& r : results) {
    std::printf("%-28s %12.4f %12.4f %8.3f %12" PRIu64 "\n", r.label.c_str(),
                r.mean_seconds, r.stddev_seconds, r.ratio_vs_baseline,
                r.tuples_per_epoch);
    csv << r.label << "," << corgi::strategy_name(r.strategy) << "," << r.mean_seconds
        << "," << r.stddev_seconds << "," << r.ratio_vs_baseline << ","
        << r.tuples_per_epoch << "\n";
  }
  if (!o.out.empty()) {
    corgi::write_text_file(o.out, csv.str());
    emit_manifest(base_manifest("bench-epoch", o.seed),
                  json{{"specs", specs}, {"reps", o.reps}}, {o.data}, {o.out},
                  o.out + ".manifest.json");
  }
}

// ---------------------------------------------------------------------------
// plot

struct PlotOpts {
  std::vector<std::string> history;
  std::vector<std::string> labels;
  std::string metric = "loss";
  std::string order;
  std::uint32_t window = 20;
  std::string bars;
  std::string out;
  std::string title;
};

void run_plot(const PlotOpts& o) {
  if (o.history.empty() == o.order.empty())
    throw corgi::InvalidArgument("pass either --history file(s) or --order file");
  if (!o.history.empty()) {
    if (!o.labels.empty() && o.labels.size() != o.history.size())
      throw corgi::InvalidArgument("--label count must match --history count");
    std::vector<corgi::Series> series;
    for (std::size_t i = 0; i < o.history.size(); ++i) {
      const auto hist = corgi::read_history_csv(o.history[i]);
      corgi::Series s;
      s.label = i < o.labels.size() ? o.labels[i] : fs::path(o.history[i]).stem().string();
      for (const auto& st : hist) {
        s.x.push_back(static_cast<double>(st.epoch));
        if (o.metric == "loss")
          s.y.push_back(st.step_loss);
        else if (o.metric == "train_acc")
          s.y.push_back(st.train_metric);
        else if (o.metric == "test_acc")
          s.y.push_back(st.has_eval ? st.eval_metric
                                    : std::numeric_limits<double>::quiet_NaN());
        else
          throw corgi::InvalidArgument("--metric must be loss, train_acc, or test_acc");
      }
      series.push_back(std::move(s));
    }
    corgi::ChartOptions copt;
    copt.title = o.title.empty() ? o.metric + " by epoch" : o.title;
    copt.x_label = "epoch";
    copt.y_label = o.metric;
    corgi::write_text_file(o.out, corgi::render_chart_svg(series, copt));
    emit_manifest(base_manifest("plot", 0),
                  json{{"metric", o.metric}, {"labels", o.labels}}, o.history, {o.out},
                  o.out + ".manifest.json");
    std::cout << "wrote " << o.out << "\n";
    return;
  }

  const corgi::OrderRows rows = corgi::read_order_csv(o.order);
  corgi::Series s;
  s.label = "";
  for (std::size_t i = 0; i < rows.position.size(); ++i) {
    s.x.push_back(static_cast<double>(rows.position[i]));
    s.y.push_back(static_cast<double>(rows.id[i]));
  }
  corgi::ChartOptions copt;
  copt.title = o.title.empty() ? "emission position vs tuple id" : o.title;
  copt.x_label = "emission position";
  copt.y_label = "tuple id";
  copt.scatter = true;
  corgi::write_text_file(o.out, corgi::render_chart_svg({s}, copt));
  std::vector<std::string> outputs{o.out};

  if (!o.bars.empty()) {
    if (o.window == 0) throw corgi::InvalidArgument("--window must be positive");
    std::size_t positives = 0;
    for (double v : rows.label) positives += v > 0 ? 1 : 0;
    const double global =
        rows.label.empty() ? 0.0
                           : static_cast<double>(positives) /
                                 static_cast<double>(rows.label.size());
    std::vector<double> fractions;
    for (std::size_t at = 0; at + o.window <= rows.label.size(); at += o.window) {
      std::size_t pos = 0;
      for (std::size_t k = 0; k < o.window; ++k) pos += rows.label[at + k] > 0 ? 1 : 0;
      fractions.push_back(static_cast<double>(pos) / static_cast<double>(o.window));
    }
    corgi::ChartOptions bopt;
    bopt.title = "positive-label fraction per window";
    bopt.x_label = "window";
    bopt.y_label = "fraction";
    corgi::write_text_file(o.bars, corgi::render_bars_svg(fractions, global, bopt));
    outputs.push_back(o.bars);
  }
  emit_manifest(base_manifest("plot", 0), json{{"window", o.window}}, {o.order}, outputs,
                o.out + ".manifest.json");
  std::cout << "wrote " << o.out << (o.bars.empty() ? "" : ", " + o.bars) << "\n";
}

}  // namespace

// ---------------------------------------------------------------------------

int main(int argc, char** argv) {
  for (int i = 0; i < argc; ++i) g_argv.emplace_back(argv[i]);

  CLI::App app{"block-format datasets and buffered-shuffle SGD"};
  app.require_subcommand(1);

  GenerateOpts gen;
  auto* cg = app.add_subcommand("generate", "synthesize a block-format dataset");
  cg->add_option("-o,--output", gen.out, "output dataset path")->required();
  cg->add_option("-m,--tuples", gen.tuples, "tuple count")->capture_default_str();
  cg->add_option("-d,--dim", gen.dim, "feature dimension")->capture_default_str();
  cg->add_option("--task", gen.task, "binary | multiclass | regression")
      ->capture_default_str();
  cg->add_option("--classes", gen.classes, "class count (multiclass)")
      ->capture_default_str();
  cg->add_option("--separation", gen.separation, "distance scale between class means")
      ->capture_default_str();
  cg->add_option("--noise", gen.noise, "feature noise stddev")->capture_default_str();
  cg->add_option("--order", gen.order, "clustered | shuffled | feature")
      ->capture_default_str();
  cg->add_option("--order-feature", gen.order_feature, "feature for --order feature");
  cg->add_option("--block-size,--block_size", gen.block_size, "block payload bytes")
      ->capture_default_str();
  cg->add_option("--seed", gen.seed, "RNG seed")->capture_default_str();
  cg->callback([&gen] { run_generate(gen); });

  IngestOpts ing;
  auto* ci = app.add_subcommand("ingest", "convert LIBSVM text to the block format");
  ci->add_option("-i,--input", ing.in, "LIBSVM text file")->required();
  ci->add_option("-o,--output", ing.out, "output dataset path")->required();
  ci->add_option("--task", ing.task, "binary | multiclass | regression")
      ->capture_default_str();
  ci->add_option("--classes", ing.classes, "class count (multiclass)");
  ci->add_option("--dim", ing.dim, "feature dimension (0 = infer)");
  ci->add_option("--block-size,--block_size", ing.block_size, "block payload bytes")
      ->capture_default_str();
  ci->add_flag("--dense", ing.dense, "store dense feature vectors");
  ci->callback([&ing] { run_ingest(ing); });

  ReorderOpts reo;
  auto* cr = app.add_subcommand("reorder", "rewrite a dataset sorted by label or feature");
  cr->add_option("-i,--input", reo.in)->required();
  cr->add_option("-o,--output", reo.out)->required();
  cr->add_option("--by", reo.by, "label | feature")->capture_default_str();
  cr->add_option("--feature", reo.feature, "feature index for --by feature");
  cr->callback([&reo] { run_reorder(reo); });

  ShuffleCopyOpts shc;
  auto* cs = app.add_subcommand("shuffle-copy",
                                "materialize a uniformly shuffled copy of a dataset");
  cs->add_option("-i,--input", shc.in)->required();
  cs->add_option("-o,--output", shc.out)->required();
  cs->add_option("--seed", shc.seed)->capture_default_str();
  cs->add_option("--index-budget", shc.budget, "max bytes for the location table");
  cs->callback([&shc] { run_shuffle_copy(shc); });

  TrainOpts tr;
  auto* ct = app.add_subcommand("train", "run SGD under a shuffling strategy");
  ct->add_option("--data", tr.data, "training dataset")->required();
  ct->add_option("--eval", tr.eval_data, "held-out dataset for per-epoch evaluation");
  ct->add_option("-o,--out", tr.out_dir, "output directory (history.csv, model.json)");
  add_shuffle_options(ct, tr.shuffle);
  ct->add_option("--loss", tr.loss, "logistic | hinge | squared | softmax");
  ct->add_option("--l2", tr.l2, "L2 regularization strength")->capture_default_str();
  ct->add_option("--epochs,--max_epoch_num", tr.epochs, "training epochs")
      ->capture_default_str();
  ct->add_option("--batch-size,--batch_size", tr.batch, "tuples per update")
      ->capture_default_str();
  ct->add_option("--lr-kind", tr.lr_kind, "const | exp | inverse")->capture_default_str();
  ct->add_option("--lr,--learning_rate", tr.eta0, "initial learning rate")
      ->capture_default_str();
  ct->add_option("--rho", tr.rho, "exp decay factor")->capture_default_str();
  ct->add_option("--mu", tr.mu, "strong-convexity constant (inverse schedule)");
  ct->add_option("--lr-a", tr.lr_a, "epoch offset (inverse schedule)");
  ct->add_option("--workers", tr.workers, "data-parallel worker count")
      ->capture_default_str();
  ct->add_option("--buffer-blocks", tr.buffer_blocks,
                 "parallel: blocks per worker buffer (0 = from --buffer-frac)");
  ct->add_flag("--no-train-eval", tr.no_train_eval, "skip full train-set evaluation");
  ct->add_flag("--keep-epoch-models", tr.keep_models, "retain end-of-epoch iterates");
  ct->callback([&tr] { run_train(tr); });

  AnalyzeOpts an;
  auto* ca = app.add_subcommand("analyze-order",
                                "profile the tuple order a strategy emits");
  ca->add_option("--data", an.data)->required();
  ca->add_option("-o,--out", an.out_dir, "output directory (order.csv, summary)");
  add_shuffle_options(ca, an.shuffle);
  ca->add_option("--epoch", an.epoch, "epoch index to profile")->capture_default_str();
  ca->add_option("--window", an.window, "window size for label-mix stats")
      ->capture_default_str();
  ca->callback([&an] { run_analyze_order(an); });

  std::string verify_path;
  auto* cv = app.add_subcommand("verify", "check dataset integrity end to end");
  cv->add_option("data", verify_path, "dataset path")->required();
  cv->callback([&verify_path] { run_verify(verify_path); });

  BoundOpts bo;
  auto* cb = app.add_subcommand("bound", "print sampling fractions and rate terms");
  cb->add_option("-N,--blocks", bo.N, "total blocks")->capture_default_str();
  cb->add_option("-n,--buffer-blocks", bo.n, "buffered blocks per epoch")
      ->capture_default_str();
  cb->add_option("-b,--block-tuples", bo.b, "tuples per block")->capture_default_str();
  cb->add_option("-S,--epochs", bo.S, "epoch count")->capture_default_str();
  cb->add_option("-m,--tuples", bo.m, "dataset tuples (0 = N*b)");
  cb->add_option("--h-factor", bo.h, "block clustering factor")->capture_default_str();
  cb->add_option("--sigma2", bo.sigma2, "gradient variance")->capture_default_str();
  cb->add_option("--eps", bo.eps, "tolerance for the read-cost model (0 = skip)");
  cb->add_option("--t-latency", bo.t_lat, "seek cost per block");
  cb->add_option("--t-transfer", bo.t_tr, "transfer cost per block");
  cb->add_option("-o,--out", bo.out, "also write the JSON here");
  cb->callback([&bo] { run_bound(bo); });

  BenchIoOpts bio;
  auto* cio = app.add_subcommand("bench-io", "time read patterns over a dataset");
  cio->add_option("--data", bio.data)->required();
  cio->add_option("--mode", bio.mode, "sequential | random_block | random_tuple")
      ->capture_default_str();
  cio->add_option("--reps", bio.reps, "repetitions (>= 3)")->capture_default_str();
  cio->add_flag("--cold", bio.cold, "drop the page cache before each repetition");
  cio->add_option("--seed", bio.seed)->capture_default_str();
  cio->add_option("-o,--out", bio.out, "also write the JSON here");
  cio->callback([&bio] { run_bench_io(bio); });

  BenchEpochOpts bep;
  auto* cep = app.add_subcommand("bench-epoch",
                                 "time epoch-stream consumption per strategy");
  cep->add_option("--data", bep.data)->required();
  cep->add_option("--spec", bep.specs,
                  "strategy spec name[:frac][:db], repeatable (default: full sweep)");
  cep->add_option("--reps", bep.reps, "timed epochs per config (>= 2)")
      ->capture_default_str();
  cep->add_option("--seed", bep.seed)->capture_default_str();
  cep->add_option("-o,--out", bep.out, "also write results CSV here");
  cep->callback([&bep] { run_bench_epoch(bep); });

  PlotOpts pl;
  auto* cp = app.add_subcommand("plot", "render history or order CSVs to SVG");
  cp->add_option("--history", pl.history, "history CSV (repeatable)");
  cp->add_option("--label", pl.labels, "series label (repeatable, pairs with --history)");
  cp->add_option("--metric", pl.metric, "loss | train_acc | test_acc")
      ->capture_default_str();
  cp->add_option("--order", pl.order, "order CSV (position,id,label)");
  cp->add_option("--window", pl.window, "window size for --bars")->capture_default_str();
  cp->add_option("--bars", pl.bars, "also render window label-fraction bars to this SVG");
  cp->add_option("-o,--out", pl.out, "output SVG path")->required();
  cp->add_option("--title", pl.title, "chart title");
  cp->callback([&pl] { run_plot(pl); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const corgi::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const corgi::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
