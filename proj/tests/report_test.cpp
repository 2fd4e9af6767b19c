#include "corgi/report.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "corgi/error.hpp"
#include "doctest.h"
#include "json.hpp"
#include "test_util.hpp"

using namespace corgi;
using corgi_test::TempDir;
using nlohmann::json;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  return std::string(std::istreambuf_iterator<char>(f), {});
}

std::size_t count_occurrences(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (std::size_t at = hay.find(needle); at != std::string::npos;
       at = hay.find(needle, at + needle.size()))
    ++n;
  return n;
}

}  // namespace

TEST_CASE("history CSV round-trips through the fixed schema") {
  TempDir td;
  const std::string path = td / "history.csv";

  std::vector<EpochStats> hist(2);
  hist[0].epoch = 0;
  hist[0].step_loss = 0.625;
  hist[0].train_metric = 0.75;
  hist[0].eval_metric = 0.5;
  hist[0].has_eval = true;
  hist[0].seconds = 0.25;
  hist[0].bytes_read = 123456;
  hist[1].epoch = 1;
  hist[1].step_loss = 0.5;
  hist[1].train_metric = 0.875;
  hist[1].has_eval = false;  // written as "nan"
  hist[1].seconds = 0.125;
  hist[1].bytes_read = 654321;

  write_history_csv(hist, path);
  const std::string text = slurp(path);
  CHECK(text.rfind("epoch,loss,train_acc,test_acc,seconds,bytes_read\n", 0) == 0);
  CHECK(text.find("nan") != std::string::npos);

  const auto back = read_history_csv(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].epoch == 0);
  CHECK(back[0].step_loss == 0.625);
  CHECK(back[0].train_metric == 0.75);
  CHECK(back[0].eval_metric == 0.5);
  CHECK(back[0].has_eval);
  CHECK(back[0].seconds == 0.25);
  CHECK(back[0].bytes_read == 123456);
  CHECK(back[1].epoch == 1);
  CHECK_FALSE(back[1].has_eval);
  CHECK(back[1].bytes_read == 654321);
}

TEST_CASE("history CSV validation points at the offending line") {
  TempDir td;

  SUBCASE("wrong header") {
    const std::string path = td / "bad.csv";
    write_text_file(path, "epoch,loss\n0,1\n");
    try {
      read_history_csv(path);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find(":1:") != std::string::npos);
    }
  }
  SUBCASE("wrong field count") {
    const std::string path = td / "short.csv";
    write_text_file(path, "epoch,loss,train_acc,test_acc,seconds,bytes_read\n1,2,3\n");
    try {
      read_history_csv(path);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find(":2:") != std::string::npos);
    }
  }
}

TEST_CASE("order CSV round-trips") {
  TempDir td;
  const std::string path = td / "order.csv";
  OrderProfile p;
  p.ids = {3, 1, 2};
  p.labels = {1.0f, -1.0f, 1.0f};
  write_order_csv(p, path);
  CHECK(slurp(path).rfind("position,id,label\n", 0) == 0);

  const OrderRows rows = read_order_csv(path);
  CHECK(rows.position == std::vector<std::uint64_t>{0, 1, 2});
  CHECK(rows.id == std::vector<std::uint64_t>{3, 1, 2});
  CHECK(rows.label == std::vector<double>{1.0, -1.0, 1.0});

  OrderProfile bad;
  bad.ids = {1, 2};
  bad.labels = {1.0f};
  CHECK_THROWS_AS(write_order_csv(bad, td / "bad.csv"), InvalidArgument);
}

TEST_CASE("order summaries serialize their statistics") {
  OrderProfile p;
  p.window = 2;
  p.ids = {0, 1, 2, 3};
  p.labels = {1.0f, 1.0f, -1.0f, -1.0f};
  p.global_positive_fraction = 0.5;
  p.window_positive_fraction = {1.0, 0.0};
  p.mean_abs_window_dev = 0.5;
  p.spearman_pos_id = 1.0;

  const json j = json::parse(order_summary_json(p));
  CHECK(j["tuples"] == 4);
  CHECK(j["window"] == 2);
  CHECK(j["global_positive_fraction"] == 0.5);
  CHECK(j["mean_abs_window_dev"] == 0.5);
  CHECK(j["spearman_position_id"] == 1.0);
  REQUIRE(j["window_positive_fraction"].size() == 2);
  CHECK(j["window_positive_fraction"][0] == 1.0);
  CHECK(j["window_positive_fraction"][1] == 0.0);
}

TEST_CASE("run manifests record command, inputs and parameters") {
  TempDir td;
  const std::string input = td / "in.bin";
  write_text_file(input, "123456789");

  RunManifest man;
  man.subcommand = "train";
  man.argv = {"corgi", "train", "--data", input};
  man.seed = 7;
  man.inputs = {manifest_file(input)};
  man.params_json = R"({"epochs": 3, "strategy": "corgipile"})";

  const json j = json::parse(manifest_json(man));
  CHECK(j["tool"] == "corgi");
  CHECK(j["version"] == kLibraryVersion);
  CHECK(j["subcommand"] == "train");
  REQUIRE(j["argv"].size() == 4);
  CHECK(j["argv"][3] == input);
  CHECK(j["seed"] == 7);
  REQUIRE(j["inputs"].size() == 1);
  CHECK(j["inputs"][0]["path"] == input);
  CHECK(j["inputs"][0]["crc32"] == "cbf43926");
  CHECK(j["inputs"][0]["bytes"] == 9);
  CHECK(j["params"]["epochs"] == 3);
  CHECK(j["params"]["strategy"] == "corgipile");
  CHECK(j["created_utc"].is_string());
  CHECK_FALSE(j["created_utc"].get<std::string>().empty());

  const std::string out = td / "manifest.json";
  write_manifest(man, out);
  CHECK(json::parse(slurp(out))["subcommand"] == "train");
}

TEST_CASE("manifest_file fingerprints match the file") {
  TempDir td;
  const std::string p = td / "x.bin";
  write_text_file(p, "123456789");
  const ManifestFile mf = manifest_file(p);
  CHECK(mf.path == p);
  CHECK(mf.crc32 == file_crc32(p));
  CHECK(mf.crc32 == 0xCBF43926u);
  CHECK(mf.bytes == 9);
}

TEST_CASE("json_escape handles control and meta characters") {
  CHECK(json_escape("plain") == "plain");
  CHECK(json_escape("a\"b") == "a\\\"b");
  CHECK(json_escape("a\\b") == "a\\\\b");
  CHECK(json_escape("a\nb\tc") == "a\\nb\\tc");
  CHECK(json_escape(std::string("a\x01") + "b") == "a\\u0001b");
}

TEST_CASE("line charts render self-contained SVG") {
  Series s;
  s.label = "loss&err";  // must be XML-escaped in the legend
  s.x = {0, 1, 2, 3, 4};
  s.y = {1.0, 2.0, std::nan(""), 3.0, 4.0};
  ChartOptions opt;
  opt.title = "test";

  const std::string svg = render_chart_svg({s}, opt);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(count_occurrences(svg, "<polyline") == 2);  // the NaN splits the line
  CHECK(svg.find("loss&amp;err") != std::string::npos);
  CHECK(svg.find("loss&err") == std::string::npos);

  SUBCASE("scatter mode draws dots") {
    ChartOptions sc = opt;
    sc.scatter = true;
    const std::string dots = render_chart_svg({s}, sc);
    CHECK(dots.find("<circle") != std::string::npos);
    CHECK(count_occurrences(dots, "<circle") == 4);  // finite points only
  }

  SUBCASE("degenerate inputs are rejected") {
    CHECK_THROWS_AS(render_chart_svg({}, opt), InvalidArgument);
    Series bad = s;
    bad.y.pop_back();
    CHECK_THROWS_AS(render_chart_svg({bad}, opt), InvalidArgument);
    Series empty;
    empty.x = {0, 1};
    empty.y = {std::nan(""), std::nan("")};
    CHECK_THROWS_AS(render_chart_svg({empty}, opt), InvalidArgument);
  }
}

TEST_CASE("bar charts draw a dashed reference line") {
  ChartOptions opt;
  opt.title = "windows";
  const std::string svg = render_bars_svg({0.2, 0.8, 0.5}, 0.5, opt);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("stroke-dasharray=\"6,4\"") != std::string::npos);
  CHECK(svg.find("<rect") != std::string::npos);

  CHECK_THROWS_AS(render_bars_svg({}, 0.5, opt), InvalidArgument);
  CHECK_THROWS_AS(render_bars_svg({0.1, std::nan("")}, 0.5, opt), InvalidArgument);
}

TEST_CASE("write_text_file reports unwritable paths") {
  TempDir td;
  CHECK_THROWS_AS(write_text_file(td / "no/such/dir/file.txt", "x"), Error);
}
