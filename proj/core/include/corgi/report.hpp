#pragma once

// Run artifacts: run manifests, CSV logs, and SVG charts.
//
// Every tool invocation that produces files also drops a JSON manifest
// recording the exact command, seed, parameters, and the checksum and size
// of every input and output, so any artifact can be traced back to the
// run that made it and regenerated bit for bit.
//
// The history CSV schema is fixed:  epoch,loss,train_acc,test_acc,seconds,bytes_read
// (test_acc is "nan" for runs without an evaluation set). The order CSV
// schema is  position,id,label.  Charts are self-contained SVG with no
// external dependencies.

#include <cstdint>
#include <string>
#include <vector>

#include "corgi/sgd.hpp"
#include "corgi/stream.hpp"

namespace corgi {

inline constexpr const char* kLibraryVersion = "0.1.0";

struct ManifestFile {
  std::string path;
  std::uint32_t crc32 = 0;
  std::uint64_t bytes = 0;
};
ManifestFile manifest_file(const std::string& path);  // stats an existing file

struct RunManifest {
  std::string tool = "corgi";
  std::string version = kLibraryVersion;
  std::string subcommand;
  std::vector<std::string> argv;
  std::uint64_t seed = 0;
  std::vector<ManifestFile> inputs;
  std::vector<ManifestFile> outputs;
  std::string params_json = "{}";  // pre-serialized JSON object, spliced verbatim
  std::string created_utc;         // ISO 8601; filled at write time when empty
};
std::string manifest_json(RunManifest man);
void write_manifest(RunManifest man, const std::string& path);

void write_history_csv(const std::vector<EpochStats>& history, const std::string& path);
std::vector<EpochStats> read_history_csv(const std::string& path);

void write_order_csv(const OrderProfile& profile, const std::string& path);
struct OrderRows {
  std::vector<std::uint64_t> position;
  std::vector<std::uint64_t> id;
  std::vector<double> label;
};
OrderRows read_order_csv(const std::string& path);
std::string order_summary_json(const OrderProfile& profile);

// Minimal chart renderer. Line charts join finite points (NaNs split the
// line); scatter charts draw one dot per point.
struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};
struct ChartOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  int width = 960;
  int height = 540;
  bool scatter = false;
};
std::string render_chart_svg(const std::vector<Series>& series, const ChartOptions& opt);

// Bar chart with a dashed horizontal reference line (e.g. per-window label
// fractions against the global fraction).
std::string render_bars_svg(const std::vector<double>& values, double reference,
                            const ChartOptions& opt);

void write_text_file(const std::string& path, const std::string& content);
std::string json_escape(const std::string& s);

}  // namespace corgi
