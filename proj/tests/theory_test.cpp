#include "corgi/theory.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "corgi/error.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace corgi;
using corgi_test::TempDir;

TEST_CASE("sampling parameters are validated") {
  CHECK_NOTHROW(validate_sampling({2, 1, 1}));
  CHECK_THROWS_AS(validate_sampling({1, 1, 1}), InvalidArgument);  // N < 2
  CHECK_THROWS_AS(validate_sampling({4, 0, 1}), InvalidArgument);  // n < 1
  CHECK_THROWS_AS(validate_sampling({4, 5, 1}), InvalidArgument);  // n > N
  CHECK_THROWS_AS(validate_sampling({4, 2, 0}), InvalidArgument);  // b < 1
}

TEST_CASE("variance-reduction fractions in lowest terms") {
  const Fraction a = alpha_fraction({10, 5, 4});
  CHECK(a.num == 4);
  CHECK(a.den == 9);
  const Fraction b = beta_fraction({10, 5, 4});
  CHECK(b.num == 241);  // (5-1)^2 + (10-5)^2 (4-1)^2 = 16 + 225*9
  CHECK(b.den == 81);
  const Fraction g = gamma_fraction({10, 5, 4});
  CHECK(g.num == 1);  // 125/1000 reduced
  CHECK(g.den == 8);

  const Fraction half = alpha_fraction({5, 3, 1});
  CHECK(half.num == 1);
  CHECK(half.den == 2);
  const Fraction zero = alpha_fraction({7, 1, 2});
  CHECK(zero.num == 0);
  CHECK(zero.den == 1);
  const Fraction one = alpha_fraction({7, 7, 2});
  CHECK(one.num == 1);
  CHECK(one.den == 1);
  CHECK(one.value() == 1.0);
}

TEST_CASE("fraction arithmetic guards 64-bit overflow") {
  // (b-1)^2 with b = 2^32 still reduces into range; b = 2^33 cannot
  CHECK_NOTHROW(beta_fraction({3, 2, 1ull << 32}));
  CHECK_THROWS_AS(beta_fraction({3, 2, 1ull << 33}), Error);
}

TEST_CASE("closed-form inclusion probabilities") {
  const InclusionProbs p = inclusion_probabilities({4, 2, 3});
  CHECK(p.single == doctest::Approx(1.0 / 12.0).epsilon(1e-14));
  CHECK(p.pair_same_block == doctest::Approx(1.0 / 60.0).epsilon(1e-14));
  CHECK(p.pair_cross_block == doctest::Approx(1.0 / 180.0).epsilon(1e-14));
  CHECK(p.block == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(p.block_pair == doctest::Approx(1.0 / 6.0).epsilon(1e-14));

  CHECK_THROWS_AS(inclusion_probabilities({2, 1, 1}), InvalidArgument);  // nb < 2
}

TEST_CASE("the sampler realizes the closed-form probabilities") {
  TempDir td;
  const std::string path = td / "unif.cgds";
  corgi_test::make_clustered(path, 12, 2, 3, /*seed=*/5);  // N = 4, b = 3
  DatasetReader reader(path);

  const std::uint64_t epochs = 20000;
  const EmpiricalInclusion emp =
      estimate_inclusion_probabilities(reader, /*n=*/2, epochs, /*seed=*/123);
  CHECK(emp.epochs == epochs);
  const InclusionProbs want = inclusion_probabilities({4, 2, 3});

  auto close = [](double hat, double exact, double se) {
    return std::abs(hat - exact) <= 5.0 * se + 1e-12;
  };
  CHECK(close(emp.freq.single, want.single, emp.stderr_est.single));
  CHECK(close(emp.freq.pair_same_block, want.pair_same_block,
              emp.stderr_est.pair_same_block));
  CHECK(close(emp.freq.pair_cross_block, want.pair_cross_block,
              emp.stderr_est.pair_cross_block));
  CHECK(close(emp.freq.block, want.block, emp.stderr_est.block));
  CHECK(close(emp.freq.block_pair, want.block_pair, emp.stderr_est.block_pair));

  SUBCASE("non-uniform blocks are rejected") {
    const std::string ragged = td / "ragged.cgds";
    corgi_test::make_clustered(ragged, 10, 2, 3, /*seed=*/6);  // 3+3+3+1
    DatasetReader r2(ragged);
    CHECK_THROWS_AS(estimate_inclusion_probabilities(r2, 2, 10, 0), InvalidArgument);
  }
  SUBCASE("sample size is validated") {
    CHECK_THROWS_AS(estimate_inclusion_probabilities(reader, 0, 10, 0), InvalidArgument);
    CHECK_THROWS_AS(estimate_inclusion_probabilities(reader, 5, 10, 0), InvalidArgument);
    CHECK_THROWS_AS(estimate_inclusion_probabilities(reader, 2, 0, 0), InvalidArgument);
  }
}

TEST_CASE("exhaustive subset variance matches the closed form") {
  SUBCASE("two blocks by hand") {
    const VarianceCheck v = sampling_variance_check({{1.0, 0.0}, {-1.0, 0.0}}, 1);
    CHECK(v.subsets == 2);
    CHECK(v.exhaustive == 1.0);
    CHECK(v.closed_form == 1.0);
    CHECK(v.rel_err == 0.0);
  }

  SUBCASE("random block sums") {
    std::mt19937_64 g(31);
    std::normal_distribution<double> nd;
    std::vector<std::vector<double>> sums(6, std::vector<double>(3));
    for (auto& s : sums)
      for (double& x : s) x = nd(g);
    const VarianceCheck v = sampling_variance_check(sums, 3);
    CHECK(v.subsets == 20);  // C(6,3)
    CHECK(v.rel_err < 1e-12);
  }

  SUBCASE("sampling every block has zero variance") {
    const VarianceCheck v = sampling_variance_check({{1.0}, {2.0}, {3.0}}, 3);
    CHECK(v.exhaustive == 0.0);
    CHECK(v.closed_form == 0.0);
    CHECK(v.rel_err == 0.0);
  }

  SUBCASE("input validation") {
    CHECK_THROWS_AS(sampling_variance_check({{1.0}}, 1), InvalidArgument);
    CHECK_THROWS_AS(sampling_variance_check({{1.0}, {2.0}}, 0), InvalidArgument);
    CHECK_THROWS_AS(sampling_variance_check({{1.0}, {2.0}}, 3), InvalidArgument);
    CHECK_THROWS_AS(sampling_variance_check({{1.0}, {2.0, 3.0}}, 1), InvalidArgument);
    CHECK_THROWS_AS(sampling_variance_check({}, 1), InvalidArgument);
    std::vector<std::vector<double>> many(30, std::vector<double>(1, 1.0));
    CHECK_THROWS_AS(sampling_variance_check(many, 15), InvalidArgument);
  }
}

TEST_CASE("block clustering factor") {
  TempDir td;

  SUBCASE("blocks of identical copies reach h == block size") {
    std::vector<Tuple> tuples;
    for (std::uint64_t k = 0; k < 8; ++k) {
      Tuple proto;
      proto.label = (k % 2) ? 1.0f : -1.0f;
      proto.dense = {static_cast<float>(k) * 0.25f, 1.0f - static_cast<float>(k) * 0.1f};
      for (int c = 0; c < 5; ++c) {
        Tuple t = proto;
        t.id = 5 * k + static_cast<std::uint64_t>(c);
        tuples.push_back(t);
      }
    }
    const std::string p = td / "dup.cgds";
    corgi_test::write_dense(p, tuples, 2, 5);
    DatasetReader r(p);
    const ClusteringReport rep = block_clustering(r, Model::zeros(LossKind::Logistic, 2));
    CHECK_FALSE(rep.undefined);
    CHECK(rep.mean_block_size == doctest::Approx(5.0));
    CHECK(std::abs(rep.h - 5.0) / 5.0 < 1e-10);
  }

  SUBCASE("identical gradients everywhere are flagged undefined") {
    std::vector<Tuple> tuples(6);
    for (std::uint64_t i = 0; i < 6; ++i) {
      tuples[i].id = i;
      tuples[i].label = 1.0f;
      tuples[i].dense = {0.5f, -0.5f};
    }
    const std::string p = td / "flat.cgds";
    corgi_test::write_dense(p, tuples, 2, 3);
    DatasetReader r(p);
    const ClusteringReport rep = block_clustering(r, Model::zeros(LossKind::Logistic, 2));
    CHECK(rep.undefined);
    CHECK(rep.h == 0.0);
    CHECK(rep.sigma2 == 0.0);
  }

  SUBCASE("label-clustered blocks beat shuffled ones") {
    const std::string clustered = td / "clustered.cgds";
    const std::string shuffled = td / "shuffled.cgds";
    corgi_test::make_clustered(clustered, 400, 4, 20, /*seed=*/7, /*mu=*/1.0f);
    corgi_test::make_shuffled(shuffled, 400, 4, 20, /*seed=*/7, /*mu=*/1.0f);
    DatasetReader rc(clustered), rs(shuffled);
    const Model at = Model::zeros(LossKind::Logistic, 4);
    const ClusteringReport hc = block_clustering(rc, at);
    const ClusteringReport hs = block_clustering(rs, at);
    CHECK(hs.h > 0.1);
    CHECK(hs.h < 3.0);
    CHECK(hc.h > hs.h);
  }

  SUBCASE("the probe model must fit the dataset") {
    const std::string p = td / "probe.cgds";
    corgi_test::make_clustered(p, 20, 3, 5, /*seed=*/8);
    DatasetReader r(p);
    CHECK_THROWS_AS(block_clustering(r, Model::zeros(LossKind::Logistic, 5)),
                    InvalidArgument);
  }
}

TEST_CASE("strongly convex rate terms") {
  const SamplingParams p{10, 5, 4};
  const BoundTerms t = strongly_convex_bound(p, /*S=*/10, /*h=*/1.0, /*sigma2=*/1.0,
                                             /*m=*/40);
  CHECK(t.which_case == 0);
  CHECK(t.horizon == 200.0);
  CHECK(t.term1 == doctest::Approx(0.0027777777777777779).epsilon(1e-12));
  CHECK(t.term2 == doctest::Approx(7.4382716049382718e-05).epsilon(1e-12));
  CHECK(t.term3 == doctest::Approx(0.001).epsilon(1e-12));
  CHECK(t.total == doctest::Approx(0.0038521604938271605).epsilon(1e-12));

  SUBCASE("a full buffer removes the leading term") {
    const BoundTerms full = strongly_convex_bound({10, 10, 4}, 10, 1.0, 1.0, 40);
    CHECK(full.term1 == 0.0);
    CHECK(full.total > 0.0);
  }

  SUBCASE("the leading term strictly shrinks as the buffer grows") {
    double prev = 1e300;
    for (std::uint64_t n = 1; n <= 12; ++n) {
      const BoundTerms b = strongly_convex_bound({12, n, 3}, 5, 1.5, 2.0, 100);
      CHECK(b.term1 < prev);
      prev = b.term1;
    }
  }
}

TEST_CASE("non-convex rate terms") {
  SUBCASE("partial buffer") {
    const BoundTerms t = nonconvex_bound_partial({10, 5, 4}, 10, 2.0, 3.0, 40);
    CHECK(t.which_case == 1);
    CHECK(t.horizon == 200.0);
    CHECK(t.term1 == doctest::Approx(0.12909944487358058).epsilon(1e-12));
    CHECK(t.term2 == doctest::Approx(0.0044629629629629628).epsilon(1e-12));
    CHECK(t.term3 == doctest::Approx(5.091168824543141).epsilon(1e-12));
    CHECK(t.total == doctest::Approx(5.2247312323796846).epsilon(1e-12));
  }
  SUBCASE("partial rejects degenerate inputs") {
    CHECK_THROWS_AS(nonconvex_bound_partial({10, 10, 4}, 10, 2.0, 3.0, 40),
                    InvalidArgument);  // full buffer is the other case
    CHECK_THROWS_AS(nonconvex_bound_partial({10, 5, 4}, 10, 0.0, 3.0, 40),
                    InvalidArgument);
    CHECK_THROWS_AS(nonconvex_bound_partial({10, 5, 4}, 10, 2.0, 0.0, 40),
                    InvalidArgument);
  }
  SUBCASE("full buffer") {
    const BoundTerms t = nonconvex_bound_full({4, 4, 5}, 3, 20);
    CHECK(t.which_case == 2);
    CHECK(t.horizon == 60.0);
    CHECK(t.term1 == doctest::Approx(0.065247794019481067).epsilon(1e-12));
    CHECK(t.term2 == doctest::Approx(133.33333333333334).epsilon(1e-12));
    CHECK(t.term3 == 0.0);
    CHECK(t.total == t.term1 + t.term2);
    CHECK_THROWS_AS(nonconvex_bound_full({4, 3, 5}, 3, 20), InvalidArgument);
  }
  SUBCASE("dispatch picks the case from n vs N") {
    CHECK(nonconvex_bound({10, 5, 4}, 10, 2.0, 3.0, 40).which_case == 1);
    CHECK(nonconvex_bound({4, 4, 5}, 3, 2.0, 3.0, 20).which_case == 2);
  }
}

TEST_CASE("read-cost model") {
  const ReadCostEstimate rc = read_cost_model(/*t_latency=*/1.0, /*t_transfer=*/1.0,
                                              {2, 1, 10}, /*eps=*/1.0,
                                              /*sigma2=*/100.0, /*h=*/1.0);
  CHECK(rc.full_scan == doctest::Approx(200.0).epsilon(1e-12));
  CHECK(rc.buffered == doctest::Approx(110.0).epsilon(1e-12));
  CHECK(rc.ratio == doctest::Approx(0.55).epsilon(1e-12));
  CHECK_THROWS_AS(read_cost_model(1.0, 1.0, {2, 1, 10}, 0.0, 100.0, 1.0),
                  InvalidArgument);
}

TEST_CASE("weighted tail average of iterates") {
  Model x1 = Model::zeros(LossKind::Squared, 1);
  x1.w = {1.0};
  x1.bias = {10.0};
  Model x2 = x1;
  x2.w = {2.0};
  x2.bias = {20.0};

  // weights (1+1)^3 = 8 and (2+1)^3 = 27
  const Model avg = weighted_tail_average({x1, x2}, 1.0);
  CHECK(avg.w[0] == doctest::Approx(1.7714285714285714).epsilon(1e-14));
  CHECK(avg.bias[0] == doctest::Approx(17.714285714285715).epsilon(1e-14));

  CHECK_THROWS_AS(weighted_tail_average({}, 1.0), InvalidArgument);
  CHECK_THROWS_AS(weighted_tail_average({x1, x2}, -1.0), InvalidArgument);
  Model y = Model::zeros(LossKind::Squared, 2);
  CHECK_THROWS_AS(weighted_tail_average({x1, y}, 1.0), InvalidArgument);
}
