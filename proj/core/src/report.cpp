#include "corgi/report.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "corgi/dataset.hpp"
#include "corgi/error.hpp"

namespace corgi {
namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::string fmt_px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string iso8601_now_utc() {
  const std::time_t now = std::time(nullptr);
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

void append_file_array(std::ostringstream& os, const std::vector<ManifestFile>& files) {
  os << "[";
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (i) os << ", ";
    char crc[16];
    std::snprintf(crc, sizeof(crc), "%08x", files[i].crc32);
    os << "{\"path\": \"" << json_escape(files[i].path) << "\", \"crc32\": \"" << crc
       << "\", \"bytes\": " << files[i].bytes << "}";
  }
  os << "]";
}

// One CSV line split on commas (no quoting in these schemas).
std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

double parse_double(const std::string& s, const std::string& file, std::size_t lineno) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0')
    throw ParseError(file + ":" + std::to_string(lineno) + ": bad number '" + s + "'");
  return v;
}

std::uint64_t parse_u64(const std::string& s, const std::string& file, std::size_t lineno) {
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0')
    throw ParseError(file + ":" + std::to_string(lineno) + ": bad integer '" + s + "'");
  return v;
}

}  // namespace

std::string json_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size() + 8);
  for (unsigned char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\b': out += "\\b"; break;
      case '\f': out += "\\f"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (c < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          out += buf;
        } else {
          out += static_cast<char>(c);
        }
    }
  }
  return out;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path + " for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error("short write to " + path);
}

ManifestFile manifest_file(const std::string& path) {
  ManifestFile f;
  f.path = path;
  f.crc32 = file_crc32(path);
  f.bytes = std::filesystem::file_size(path);
  return f;
}

std::string manifest_json(RunManifest man) {
  if (man.created_utc.empty()) man.created_utc = iso8601_now_utc();
  std::ostringstream os;
  os << "{\n";
  os << "  \"tool\": \"" << json_escape(man.tool) << "\",\n";
  os << "  \"version\": \"" << json_escape(man.version) << "\",\n";
  os << "  \"subcommand\": \"" << json_escape(man.subcommand) << "\",\n";
  os << "  \"argv\": [";
  for (std::size_t i = 0; i < man.argv.size(); ++i) {
    if (i) os << ", ";
    os << "\"" << json_escape(man.argv[i]) << "\"";
  }
  os << "],\n";
  os << "  \"seed\": " << man.seed << ",\n";
  os << "  \"created_utc\": \"" << json_escape(man.created_utc) << "\",\n";
  os << "  \"inputs\": ";
  append_file_array(os, man.inputs);
  os << ",\n  \"outputs\": ";
  append_file_array(os, man.outputs);
  os << ",\n  \"params\": " << (man.params_json.empty() ? "{}" : man.params_json);
  os << "\n}\n";
  return os.str();
}

void write_manifest(RunManifest man, const std::string& path) {
  write_text_file(path, manifest_json(std::move(man)));
}

static const char* kHistoryHeader = "epoch,loss,train_acc,test_acc,seconds,bytes_read";

void write_history_csv(const std::vector<EpochStats>& history, const std::string& path) {
  std::ostringstream os;
  os << kHistoryHeader << "\n";
  for (const auto& st : history) {
    os << st.epoch << "," << fmt(st.step_loss) << "," << fmt(st.train_metric) << ",";
    if (st.has_eval)
      os << fmt(st.eval_metric);
    else
      os << "nan";
    os << "," << fmt(st.seconds) << "," << st.bytes_read << "\n";
  }
  write_text_file(path, os.str());
}

std::vector<EpochStats> read_history_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ":1: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kHistoryHeader)
    throw ParseError(path + ":1: expected header '" + std::string(kHistoryHeader) + "'");
  std::vector<EpochStats> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 6)
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected 6 fields");
    EpochStats st;
    st.epoch = parse_u64(f[0], path, lineno);
    st.step_loss = parse_double(f[1], path, lineno);
    st.train_metric = parse_double(f[2], path, lineno);
    st.eval_metric = parse_double(f[3], path, lineno);
    st.has_eval = !std::isnan(st.eval_metric);
    st.seconds = parse_double(f[4], path, lineno);
    st.bytes_read = parse_u64(f[5], path, lineno);
    out.push_back(st);
  }
  return out;
}

static const char* kOrderHeader = "position,id,label";

void write_order_csv(const OrderProfile& profile, const std::string& path) {
  if (profile.ids.size() != profile.labels.size())
    throw InvalidArgument("order profile ids/labels length mismatch");
  std::ostringstream os;
  os << kOrderHeader << "\n";
  for (std::size_t i = 0; i < profile.ids.size(); ++i)
    os << i << "," << profile.ids[i] << "," << fmt(profile.labels[i]) << "\n";
  write_text_file(path, os.str());
}

OrderRows read_order_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ":1: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kOrderHeader)
    throw ParseError(path + ":1: expected header '" + std::string(kOrderHeader) + "'");
  OrderRows out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 3)
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected 3 fields");
    out.position.push_back(parse_u64(f[0], path, lineno));
    out.id.push_back(parse_u64(f[1], path, lineno));
    out.label.push_back(parse_double(f[2], path, lineno));
  }
  return out;
}

std::string order_summary_json(const OrderProfile& profile) {
  std::ostringstream os;
  os << "{\n";
  os << "  \"tuples\": " << profile.ids.size() << ",\n";
  os << "  \"window\": " << profile.window << ",\n";
  os << "  \"global_positive_fraction\": " << fmt(profile.global_positive_fraction)
     << ",\n";
  os << "  \"mean_abs_window_dev\": " << fmt(profile.mean_abs_window_dev) << ",\n";
  os << "  \"spearman_position_id\": " << fmt(profile.spearman_pos_id) << ",\n";
  os << "  \"window_positive_fraction\": [";
  for (std::size_t i = 0; i < profile.window_positive_fraction.size(); ++i) {
    if (i) os << ", ";
    os << fmt(profile.window_positive_fraction[i]);
  }
  os << "]\n}\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// SVG charts

namespace {

const char* kPalette[] = {"#4477aa", "#ee6677", "#228833", "#ccbb44",
                          "#66ccee", "#aa3377", "#bbbbbb", "#222222"};
constexpr int kPaletteSize = 8;

double nice_num(double x, bool round_to) {
  const double expv = std::floor(std::log10(x));
  const double f = x / std::pow(10.0, expv);
  double nf;
  if (round_to)
    nf = f < 1.5 ? 1.0 : f < 3.0 ? 2.0 : f < 7.0 ? 5.0 : 10.0;
  else
    nf = f <= 1.0 ? 1.0 : f <= 2.0 ? 2.0 : f <= 5.0 ? 5.0 : 10.0;
  return nf * std::pow(10.0, expv);
}

std::vector<double> make_ticks(double lo, double hi, int target = 6) {
  const double step = nice_num((hi - lo) / std::max(1, target - 1), true);
  const double tlo = std::ceil(lo / step) * step;
  std::vector<double> out;
  for (double v = tlo; v <= hi + 0.5 * step; v += step) {
    if (v >= lo - 1e-12 * step) out.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
  }
  return out;
}

struct Frame {
  double x0, y0, x1, y1;  // plot rectangle in pixel space (y grows downward)
  double xlo, xhi, ylo, yhi;
  double px(double x) const { return x0 + (x - xlo) / (xhi - xlo) * (x1 - x0); }
  double py(double y) const { return y1 - (y - ylo) / (yhi - ylo) * (y1 - y0); }
};

void pad_range(double& lo, double& hi) {
  if (!(hi > lo)) {
    const double pad = std::abs(lo) > 0 ? std::abs(lo) * 0.5 : 1.0;
    lo -= pad;
    hi += pad;
  } else {
    const double pad = (hi - lo) * 0.05;
    lo -= pad;
    hi += pad;
  }
}

void svg_open(std::ostringstream& os, const ChartOptions& opt) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width
     << "\" height=\"" << opt.height << "\" viewBox=\"0 0 " << opt.width << " "
     << opt.height << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!opt.title.empty())
    os << "<text x=\"" << opt.width / 2
       << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\" "
          "fill=\"#222\">"
       << xml_escape(opt.title) << "</text>\n";
}

void svg_axes(std::ostringstream& os, const Frame& f, const ChartOptions& opt) {
  for (double t : make_ticks(f.xlo, f.xhi)) {
    const double x = f.px(t);
    os << "<line x1=\"" << fmt_px(x) << "\" y1=\"" << fmt_px(f.y0) << "\" x2=\""
       << fmt_px(x) << "\" y2=\"" << fmt_px(f.y1) << "\" stroke=\"#eee\"/>\n";
    os << "<text x=\"" << fmt_px(x) << "\" y=\"" << fmt_px(f.y1 + 18)
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\" "
          "fill=\"#444\">"
       << fmt(t) << "</text>\n";
  }
  for (double t : make_ticks(f.ylo, f.yhi)) {
    const double y = f.py(t);
    os << "<line x1=\"" << fmt_px(f.x0) << "\" y1=\"" << fmt_px(y) << "\" x2=\""
       << fmt_px(f.x1) << "\" y2=\"" << fmt_px(y) << "\" stroke=\"#eee\"/>\n";
    os << "<text x=\"" << fmt_px(f.x0 - 6) << "\" y=\"" << fmt_px(y + 4)
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" "
          "fill=\"#444\">"
       << fmt(t) << "</text>\n";
  }
  os << "<rect x=\"" << fmt_px(f.x0) << "\" y=\"" << fmt_px(f.y0) << "\" width=\""
     << fmt_px(f.x1 - f.x0) << "\" height=\"" << fmt_px(f.y1 - f.y0)
     << "\" fill=\"none\" stroke=\"#888\"/>\n";
  if (!opt.x_label.empty())
    os << "<text x=\"" << fmt_px((f.x0 + f.x1) / 2) << "\" y=\"" << fmt_px(f.y1 + 38)
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
          "fill=\"#222\">"
       << xml_escape(opt.x_label) << "</text>\n";
  if (!opt.y_label.empty())
    os << "<text x=\"16\" y=\"" << fmt_px((f.y0 + f.y1) / 2)
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
          "fill=\"#222\" transform=\"rotate(-90 16 "
       << fmt_px((f.y0 + f.y1) / 2) << ")\">" << xml_escape(opt.y_label) << "</text>\n";
}

}  // namespace

std::string render_chart_svg(const std::vector<Series>& series, const ChartOptions& opt) {
  if (series.empty()) throw InvalidArgument("chart needs at least one series");
  double xlo = 0, xhi = 0, ylo = 0, yhi = 0;
  bool any = false;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size())
      throw InvalidArgument("series '" + s.label + "' has mismatched x/y lengths");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (!any) {
        xlo = xhi = s.x[i];
        ylo = yhi = s.y[i];
        any = true;
      } else {
        xlo = std::min(xlo, s.x[i]);
        xhi = std::max(xhi, s.x[i]);
        ylo = std::min(ylo, s.y[i]);
        yhi = std::max(yhi, s.y[i]);
      }
    }
  }
  if (!any) throw InvalidArgument("chart has no finite data points");
  pad_range(xlo, xhi);
  pad_range(ylo, yhi);

  Frame f{70, 40, opt.width - 20.0, opt.height - 50.0, xlo, xhi, ylo, yhi};
  std::ostringstream os;
  svg_open(os, opt);
  svg_axes(os, f, opt);

  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = kPalette[si % kPaletteSize];
    if (opt.scatter) {
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
        os << "<circle cx=\"" << fmt_px(f.px(s.x[i])) << "\" cy=\"" << fmt_px(f.py(s.y[i]))
           << "\" r=\"2.5\" fill=\"" << color << "\" fill-opacity=\"0.7\"/>\n";
      }
    } else {
      std::ostringstream pts;
      bool open = false;
      auto flush = [&]() {
        if (open)
          os << "<polyline points=\"" << pts.str() << "\" fill=\"none\" stroke=\"" << color
             << "\" stroke-width=\"1.8\"/>\n";
        pts.str("");
        open = false;
      };
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) {
          flush();
          continue;
        }
        if (open) pts << " ";
        pts << fmt_px(f.px(s.x[i])) << "," << fmt_px(f.py(s.y[i]));
        open = true;
      }
      flush();
    }
  }

  // Legend, stacked in the top-right corner of the plot area.
  double ly = f.y0 + 16;
  for (std::size_t si = 0; si < series.size(); ++si) {
    if (series[si].label.empty()) continue;
    const char* color = kPalette[si % kPaletteSize];
    const double lx = f.x1 - 170;
    os << "<line x1=\"" << fmt_px(lx) << "\" y1=\"" << fmt_px(ly - 4) << "\" x2=\""
       << fmt_px(lx + 22) << "\" y2=\"" << fmt_px(ly - 4) << "\" stroke=\"" << color
       << "\" stroke-width=\"3\"/>\n";
    os << "<text x=\"" << fmt_px(lx + 28) << "\" y=\"" << fmt_px(ly)
       << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#222\">"
       << xml_escape(series[si].label) << "</text>\n";
    ly += 18;
  }
  os << "</svg>\n";
  return os.str();
}

std::string render_bars_svg(const std::vector<double>& values, double reference,
                            const ChartOptions& opt) {
  if (values.empty()) throw InvalidArgument("bar chart needs at least one value");
  double ylo = std::min(0.0, reference), yhi = std::max(0.0, reference);
  for (double v : values) {
    if (!std::isfinite(v)) throw InvalidArgument("bar values must be finite");
    ylo = std::min(ylo, v);
    yhi = std::max(yhi, v);
  }
  pad_range(ylo, yhi);
  const double n = static_cast<double>(values.size());

  Frame f{70, 40, opt.width - 20.0, opt.height - 50.0, 0.0, n, ylo, yhi};
  std::ostringstream os;
  svg_open(os, opt);
  svg_axes(os, f, opt);

  const double slot = (f.x1 - f.x0) / n;
  const double bw = slot * 0.8;
  const double base = f.py(std::max(0.0, ylo));
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double cx = f.x0 + (static_cast<double>(i) + 0.5) * slot;
    const double top = f.py(values[i]);
    const double y = std::min(top, base);
    const double h = std::abs(base - top);
    os << "<rect x=\"" << fmt_px(cx - bw / 2) << "\" y=\"" << fmt_px(y) << "\" width=\""
       << fmt_px(bw) << "\" height=\"" << fmt_px(h) << "\" fill=\"" << kPalette[0]
       << "\" fill-opacity=\"0.85\"/>\n";
  }
  const double ry = f.py(reference);
  os << "<line x1=\"" << fmt_px(f.x0) << "\" y1=\"" << fmt_px(ry) << "\" x2=\""
     << fmt_px(f.x1) << "\" y2=\"" << fmt_px(ry) << "\" stroke=\"" << kPalette[1]
     << "\" stroke-width=\"2\" stroke-dasharray=\"6,4\"/>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace corgi
