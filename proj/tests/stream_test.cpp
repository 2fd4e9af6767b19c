#include "corgi/stream.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "corgi/error.hpp"
#include "corgi/rng.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace corgi;
using corgi_test::drain_ids;
using corgi_test::iota_ids;
using corgi_test::TempDir;

namespace {

// chi^2 statistic against a uniform expectation.
double chi2_uniform(const std::vector<std::uint64_t>& counts, double expected) {
  double chi2 = 0.0;
  for (std::uint64_t c : counts) {
    const double d = static_cast<double>(c) - expected;
    chi2 += d * d / expected;
  }
  return chi2;
}

// Lehmer index of a permutation of 0..m-1 (0 .. m!-1).
std::size_t perm_index(const std::vector<std::uint64_t>& p) {
  std::size_t idx = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    std::size_t smaller_after = 0;
    for (std::size_t j = i + 1; j < p.size(); ++j)
      if (p[j] < p[i]) ++smaller_after;
    idx = idx * (p.size() - i) + smaller_after;
  }
  return idx;
}

}  // namespace

TEST_CASE("substream engines are deterministic and separated by path") {
  auto a1 = rng::engine(1, rng::Purpose::BlockOrder);
  auto a2 = rng::engine(1, rng::Purpose::BlockOrder);
  CHECK(a1() == a2());

  auto b = rng::engine(1, rng::Purpose::TupleShuffle);
  auto c = rng::engine(2, rng::Purpose::BlockOrder);
  auto d = rng::engine(1, rng::Purpose::BlockOrder, /*epoch=*/1);
  auto e = rng::engine(1, rng::Purpose::BlockOrder, 0, /*worker=*/1);
  auto f = rng::engine(1, rng::Purpose::BlockOrder, 0, 0, /*chunk=*/1);
  auto base = rng::engine(1, rng::Purpose::BlockOrder);
  const std::uint64_t x = base();
  CHECK(b() != x);
  CHECK(c() != x);
  CHECK(d() != x);
  CHECK(e() != x);
  CHECK(f() != x);
}

TEST_CASE("uniform_below is unbiased") {
  auto g = rng::engine(7, rng::Purpose::Bench);
  std::vector<std::uint64_t> counts(6, 0);
  const std::uint64_t T = 60000;
  for (std::uint64_t i = 0; i < T; ++i) ++counts[rng::uniform_below(g, 6)];
  // df = 5, p = 0.999 critical value
  CHECK(chi2_uniform(counts, static_cast<double>(T) / 6.0) < 20.515);
  CHECK(rng::uniform_below(g, 1) == 0);
}

TEST_CASE("fisher_yates produces uniform permutations") {
  SUBCASE("m = 4") {
    auto g = rng::engine(11, rng::Purpose::TupleShuffle);
    const std::uint64_t T = 24000;
    std::vector<std::uint64_t> counts(24, 0);
    for (std::uint64_t t = 0; t < T; ++t) {
      std::vector<std::uint64_t> v = iota_ids(4);
      rng::fisher_yates(v, g);
      ++counts[perm_index(v)];
    }
    // df = 23, p = 0.999
    CHECK(chi2_uniform(counts, static_cast<double>(T) / 24.0) < 49.728);
  }
  SUBCASE("m = 5") {
    auto g = rng::engine(12, rng::Purpose::TupleShuffle);
    const std::uint64_t T = 120000;
    std::vector<std::uint64_t> counts(120, 0);
    for (std::uint64_t t = 0; t < T; ++t) {
      std::vector<std::uint64_t> v = iota_ids(5);
      rng::fisher_yates(v, g);
      ++counts[perm_index(v)];
    }
    // df = 119, p = 0.999
    CHECK(chi2_uniform(counts, static_cast<double>(T) / 120.0) < 172.418);
  }
}

TEST_CASE("sample_without_replacement draws uniformly ordered subsets") {
  auto g = rng::engine(13, rng::Purpose::BlockOrder);
  const std::uint64_t T = 60000;
  std::map<std::pair<std::uint64_t, std::uint64_t>, std::uint64_t> ordered;
  std::map<std::pair<std::uint64_t, std::uint64_t>, std::uint64_t> unordered;
  for (std::uint64_t t = 0; t < T; ++t) {
    const auto s = rng::sample_without_replacement(4, 2, g);
    REQUIRE(s.size() == 2);
    REQUIRE(s[0] != s[1]);
    ++ordered[{s[0], s[1]}];
    ++unordered[{std::min(s[0], s[1]), std::max(s[0], s[1])}];
  }
  CHECK(ordered.size() == 12);  // every ordered pair occurs
  REQUIRE(unordered.size() == 6);
  std::vector<std::uint64_t> counts;
  for (const auto& [k, v] : unordered) counts.push_back(v);
  // df = 5, p = 0.999
  CHECK(chi2_uniform(counts, static_cast<double>(T) / 6.0) < 20.515);
}

TEST_CASE("block-buffered epoch emits exactly the sampled blocks' tuples") {
  TempDir td;
  const std::string path = td / "data.cgds";
  corgi_test::make_clustered(path, 50, 2, 5, /*seed=*/3);  // N = 10, b = 5

  ShuffleConfig cfg;
  cfg.strategy = Strategy::CorgiPile;
  cfg.buffer_fraction = 0.35;  // trunc(3.5) = 3 blocks
  cfg.seed = 42;
  StrategyRunner runner(path, cfg);
  CHECK(runner.corgipile_buffer_blocks() == 3);

  std::vector<std::vector<std::uint64_t>> epochs;
  for (std::uint64_t e = 0; e < 2; ++e) {
    const auto blocks = corgipile_block_sample(10, 3, cfg.seed, e);
    REQUIRE(blocks.size() == 3);
    std::vector<std::uint64_t> expect;
    for (std::uint64_t b : blocks)
      for (std::uint64_t i = 0; i < 5; ++i) expect.push_back(5 * b + i);
    std::sort(expect.begin(), expect.end());

    auto stream = runner.epoch_stream(e);
    auto ids = drain_ids(*stream);
    epochs.push_back(ids);
    std::sort(ids.begin(), ids.end());
    CHECK(ids == expect);
  }
  CHECK(epochs[0] != epochs[1]);

  SUBCASE("buffer fraction resolves with a floor of one block") {
    ShuffleConfig tiny = cfg;
    tiny.buffer_fraction = 0.01;
    StrategyRunner r2(path, tiny);
    CHECK(r2.corgipile_buffer_blocks() == 1);
    ShuffleConfig full = cfg;
    full.buffer_fraction = 1.0;
    StrategyRunner r3(path, full);
    CHECK(r3.corgipile_buffer_blocks() == 10);
  }
}

TEST_CASE("double-buffered stream matches the unthreaded reference") {
  TempDir td;
  const std::string path = td / "data.cgds";
  corgi_test::make_clustered(path, 50, 2, 5, /*seed=*/3);

  ShuffleConfig cfg;
  cfg.strategy = Strategy::CorgiPile;
  cfg.buffer_fraction = 0.35;  // n = 3, chunk = (3 + 1) / 2 = 2
  cfg.double_buffer = true;
  cfg.seed = 9;
  StrategyRunner runner(path, cfg);

  for (std::uint64_t e = 0; e < 3; ++e) {
    auto threaded = runner.epoch_stream(e);
    auto ref = make_block_buffer_stream(runner.reader(),
                                        corgipile_block_sample(10, 3, cfg.seed, e),
                                        /*chunk_blocks=*/2, cfg.seed, e,
                                        /*worker=*/0, /*shuffle_within=*/true,
                                        /*threaded=*/false);
    CHECK(drain_ids(*threaded) == drain_ids(*ref));
  }
}

TEST_CASE("shuffle_once materializes one permutation and replays it") {
  TempDir td;
  const std::string path = td / "data.cgds";
  corgi_test::make_clustered(path, 60, 2, 6, /*seed=*/4);

  ShuffleConfig cfg;
  cfg.strategy = Strategy::ShuffleOnce;
  cfg.seed = 21;
  cfg.shuffle_once_path = td / "a.shuffled";
  StrategyRunner runner(path, cfg);

  auto s0 = runner.epoch_stream(0);
  const auto e0 = drain_ids(*s0);
  auto s1 = runner.epoch_stream(1);
  const auto e1 = drain_ids(*s1);
  CHECK(e0 == e1);  // the same materialized order every epoch
  CHECK(e0 != iota_ids(60));
  auto sorted = e0;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == iota_ids(60));
  CHECK(runner.setup_seconds() > 0.0);

  ShuffleConfig same = cfg;
  same.shuffle_once_path = td / "b.shuffled";
  StrategyRunner r2(path, same);
  auto s2 = r2.epoch_stream(0);
  CHECK(drain_ids(*s2) == e0);

  ShuffleConfig other = cfg;
  other.seed = 22;
  other.shuffle_once_path = td / "c.shuffled";
  StrategyRunner r3(path, other);
  auto s3 = r3.epoch_stream(0);
  CHECK(drain_ids(*s3) != e0);
}

TEST_CASE("epoch_shuffle draws a fresh uniform permutation per epoch") {
  TempDir td;
  const std::string path = td / "data.cgds";
  corgi_test::make_clustered(path, 40, 2, 5, /*seed=*/5);

  ShuffleConfig cfg;
  cfg.strategy = Strategy::EpochShuffle;
  cfg.seed = 31;
  StrategyRunner runner(path, cfg);
  auto s0 = runner.epoch_stream(0);
  auto s1 = runner.epoch_stream(1);
  const auto e0 = drain_ids(*s0);
  const auto e1 = drain_ids(*s1);
  CHECK(e0 != e1);
  auto c0 = e0, c1 = e1;
  std::sort(c0.begin(), c0.end());
  std::sort(c1.begin(), c1.end());
  CHECK(c0 == iota_ids(40));
  CHECK(c1 == iota_ids(40));

  StrategyRunner again(path, cfg);
  auto s = again.epoch_stream(0);
  CHECK(drain_ids(*s) == e0);
}

TEST_CASE("no_shuffle replays storage order every epoch") {
  TempDir td;
  const std::string path = td / "data.cgds";
  corgi_test::make_clustered(path, 30, 2, 5, /*seed=*/6);
  ShuffleConfig cfg;
  cfg.strategy = Strategy::NoShuffle;
  StrategyRunner runner(path, cfg);
  for (std::uint64_t e = 0; e < 2; ++e) {
    auto s = runner.epoch_stream(e);
    CHECK(drain_ids(*s) == iota_ids(30));
  }
}

TEST_CASE("block_only permutes blocks but not their contents") {
  TempDir td;
  const std::string path = td / "data.cgds";
  corgi_test::make_clustered(path, 50, 2, 5, /*seed=*/7);  // N = 10, b = 5

  ShuffleConfig cfg;
  cfg.strategy = Strategy::BlockOnly;
  cfg.seed = 17;
  StrategyRunner runner(path, cfg);

  auto s0 = runner.epoch_stream(0);
  const auto ids = drain_ids(*s0);
  REQUIRE(ids.size() == 50);
  std::vector<std::uint64_t> block_order;
  for (std::size_t g = 0; g < 10; ++g) {
    const std::uint64_t first = ids[5 * g];
    CHECK(first % 5 == 0);  // group starts at a block boundary
    for (std::size_t i = 1; i < 5; ++i) CHECK(ids[5 * g + i] == first + i);
    block_order.push_back(first / 5);
  }
  auto sorted_blocks = block_order;
  std::sort(sorted_blocks.begin(), sorted_blocks.end());
  CHECK(sorted_blocks == iota_ids(10));
  CHECK(block_order != iota_ids(10));  // actually permuted under this seed

  auto s1 = runner.epoch_stream(1);
  CHECK(drain_ids(*s1) != ids);  // fresh block order next epoch
}

TEST_CASE("sliding window spans storage order and full shuffle") {
  TempDir td;
  const std::string path = td / "data.cgds";
  corgi_test::make_clustered(path, 200, 2, 10, /*seed=*/8);

  SUBCASE("window of one degenerates to storage order") {
    ShuffleConfig cfg;
    cfg.strategy = Strategy::SlidingWindow;
    cfg.buffer_fraction = 0.004;  // trunc(0.8) = 0 -> clamped to 1
    cfg.seed = 2;
    StrategyRunner runner(path, cfg);
    CHECK(runner.sliding_window_size() == 1);
    auto s = runner.epoch_stream(0);
    CHECK(drain_ids(*s) == iota_ids(200));
  }

  SUBCASE("window of m is a full permutation") {
    ShuffleConfig cfg;
    cfg.strategy = Strategy::SlidingWindow;
    cfg.window_fraction = 1.0;
    cfg.buffer_fraction = 0.5;
    cfg.seed = 3;
    StrategyRunner runner(path, cfg);
    CHECK(runner.sliding_window_size() == 200);
    auto s = runner.epoch_stream(0);
    auto ids = drain_ids(*s);
    CHECK(ids != iota_ids(200));
    std::sort(ids.begin(), ids.end());
    CHECK(ids == iota_ids(200));
  }

  SUBCASE("a 10% window displaces tuples by less than the window") {
    ShuffleConfig cfg;
    cfg.strategy = Strategy::SlidingWindow;
    cfg.window_fraction = 0.1;  // w = 20
    cfg.seed = 4;
    StrategyRunner runner(path, cfg);
    const std::uint64_t w = runner.sliding_window_size();
    CHECK(w == 20);
    auto s = runner.epoch_stream(0);
    auto ids = drain_ids(*s);
    REQUIRE(ids.size() == 200);
    for (std::size_t k = 0; k < ids.size(); ++k)
      CHECK(ids[k] <= k + w - 1);  // id == storage position here
    std::sort(ids.begin(), ids.end());
    CHECK(ids == iota_ids(200));
  }

  SUBCASE("window size falls back to buffer_fraction") {
    ShuffleConfig cfg;
    cfg.strategy = Strategy::SlidingWindow;
    cfg.buffer_fraction = 0.25;
    StrategyRunner runner(path, cfg);
    CHECK(runner.sliding_window_size() == 50);
  }
}

TEST_CASE("multiplexed reservoir emission accounting") {
  TempDir td;
  const std::string path = td / "data.cgds";
  corgi_test::make_clustered(path, 200, 2, 10, /*seed=*/9);

  for (std::uint32_t r : {0u, 1u, 2u}) {
    ShuffleConfig cfg;
    cfg.strategy = Strategy::Mrs;
    cfg.buffer_fraction = 0.2;  // capacity = trunc(0.2 * 200 / 2) = 20
    cfg.loop_ratio = r;
    cfg.seed = 5;
    StrategyRunner runner(path, cfg);
    CHECK(runner.reservoir_capacity() == 20);
    auto s = runner.epoch_stream(0);
    const auto ids = drain_ids(*s);
    CHECK(ids.size() == static_cast<std::size_t>((1 + r) * (200 - 20)));
    if (r == 0) {
      std::set<std::uint64_t> distinct(ids.begin(), ids.end());
      CHECK(distinct.size() == ids.size());  // no loop emissions -> no repeats
    }
  }
}

TEST_CASE("spearman rank correlation") {
  using std::vector;
  CHECK(spearman({1, 2, 3, 4, 5}, {1, 2, 3, 4, 5}) == doctest::Approx(1.0));
  CHECK(spearman({1, 2, 3, 4, 5}, {5, 4, 3, 2, 1}) == doctest::Approx(-1.0));
  CHECK(spearman({1, 1, 2, 2}, {1, 2, 3, 4}) ==
        doctest::Approx(0.89442719099991586).epsilon(1e-12));
  CHECK(spearman({3, 3, 3}, {1, 2, 3}) == 0.0);  // constant series
  CHECK_THROWS_AS(spearman({1, 2}, {1, 2, 3}), InvalidArgument);
  CHECK_THROWS_AS(spearman({1}, {1}), InvalidArgument);
}

TEST_CASE("order profiles summarize label mixing") {
  std::vector<Tuple> tuples(8);
  const float labels[8] = {1, 1, -1, -1, 1, -1, 1, -1};
  for (std::size_t i = 0; i < 8; ++i) {
    tuples[i].id = i;
    tuples[i].label = labels[i];
    tuples[i].dense = {0.0f};
  }
  corgi_test::VecStream s(tuples);
  const OrderProfile p = analyze_order(s, 2);
  CHECK(p.window == 2);
  CHECK(p.ids == iota_ids(8));
  CHECK(p.global_positive_fraction == doctest::Approx(0.5));
  REQUIRE(p.window_positive_fraction.size() == 4);
  CHECK(p.window_positive_fraction[0] == doctest::Approx(1.0));
  CHECK(p.window_positive_fraction[1] == doctest::Approx(0.0));
  CHECK(p.window_positive_fraction[2] == doctest::Approx(0.5));
  CHECK(p.window_positive_fraction[3] == doctest::Approx(0.5));
  CHECK(p.mean_abs_window_dev == doctest::Approx(0.25));
  CHECK(p.spearman_pos_id == doctest::Approx(1.0));

  corgi_test::VecStream s2(tuples);
  CHECK_THROWS_AS(analyze_order(s2, 0), InvalidArgument);
}

TEST_CASE("strategy names round-trip") {
  for (Strategy s : {Strategy::NoShuffle, Strategy::ShuffleOnce, Strategy::EpochShuffle,
                     Strategy::SlidingWindow, Strategy::Mrs, Strategy::BlockOnly,
                     Strategy::CorgiPile}) {
    CHECK(strategy_from_name(strategy_name(s)) == s);
  }
  CHECK_THROWS_AS(strategy_from_name("bogo_sort"), InvalidArgument);
}

TEST_CASE("runner configuration is validated") {
  TempDir td;
  const std::string path = td / "data.cgds";
  corgi_test::make_clustered(path, 20, 2, 5, /*seed=*/1);

  ShuffleConfig cfg;
  cfg.buffer_fraction = 0.0;
  CHECK_THROWS_AS(StrategyRunner(path, cfg), InvalidArgument);
  cfg.buffer_fraction = 1.5;
  CHECK_THROWS_AS(StrategyRunner(path, cfg), InvalidArgument);
  cfg.buffer_fraction = 0.5;
  cfg.window_fraction = 1.5;
  CHECK_THROWS_AS(StrategyRunner(path, cfg), InvalidArgument);

  ShuffleConfig sw;
  sw.strategy = Strategy::SlidingWindow;
  sw.window_fraction = 0.0;  // explicit zero is rejected when resolved
  StrategyRunner runner(path, sw);
  CHECK_THROWS_AS(runner.sliding_window_size(), InvalidArgument);

  auto bad_blocks = [&] {
    StrategyRunner r(path, ShuffleConfig{});
    return make_block_buffer_stream(r.reader(), {9}, 1, 0, 0, 0, false, false);
  };
  CHECK_THROWS_AS(bad_blocks(), InvalidArgument);
  auto bad_chunk = [&] {
    StrategyRunner r(path, ShuffleConfig{});
    return make_block_buffer_stream(r.reader(), {0}, 0, 0, 0, 0, false, false);
  };
  CHECK_THROWS_AS(bad_chunk(), InvalidArgument);
}
