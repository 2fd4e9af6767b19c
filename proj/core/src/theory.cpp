#include "corgi/theory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "corgi/error.hpp"
#include "corgi/rng.hpp"
#include "corgi/stream.hpp"

namespace corgi {
namespace {

using i128 = __int128;

i128 gcd128(i128 a, i128 b) {
  if (a < 0) a = -a;
  if (b < 0) b = -b;
  while (b != 0) {
    i128 t = a % b;
    a = b;
    b = t;
  }
  return a;
}

constexpr i128 i128_max() {
  return static_cast<i128>((~static_cast<unsigned __int128>(0)) >> 1);
}

i128 mul_checked(i128 a, i128 b) {
  if (a == 0 || b == 0) return 0;
  i128 aa = a < 0 ? -a : a;
  i128 bb = b < 0 ? -b : b;
  if (aa > i128_max() / bb) throw InvalidArgument("fraction arithmetic overflow");
  return a * b;
}

Fraction reduce(i128 num, i128 den) {
  if (den == 0) throw InvalidArgument("fraction with zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  i128 g = gcd128(num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
  const i128 lim = static_cast<i128>(std::numeric_limits<long long>::max());
  if (num > lim || num < -lim || den > lim)
    throw InvalidArgument("fraction does not fit in 64 bits after reduction");
  return Fraction{static_cast<long long>(num), static_cast<long long>(den)};
}

}  // namespace

void validate_sampling(const SamplingParams& p) {
  if (p.N < 2) throw InvalidArgument("need at least 2 blocks");
  if (p.n < 1 || p.n > p.N) throw InvalidArgument("buffer block count must be in [1, N]");
  if (p.b < 1) throw InvalidArgument("block size must be at least 1 tuple");
}

Fraction alpha_fraction(const SamplingParams& p) {
  validate_sampling(p);
  return reduce(static_cast<i128>(p.n) - 1, static_cast<i128>(p.N) - 1);
}

Fraction beta_fraction(const SamplingParams& p) {
  validate_sampling(p);
  const i128 n1 = static_cast<i128>(p.n) - 1;
  const i128 Nn = static_cast<i128>(p.N) - static_cast<i128>(p.n);
  const i128 b1 = static_cast<i128>(p.b) - 1;
  const i128 N1 = static_cast<i128>(p.N) - 1;
  i128 num = mul_checked(n1, n1);
  num += mul_checked(mul_checked(Nn, Nn), mul_checked(b1, b1));
  return reduce(num, mul_checked(N1, N1));
}

Fraction gamma_fraction(const SamplingParams& p) {
  validate_sampling(p);
  const i128 n = static_cast<i128>(p.n);
  const i128 N = static_cast<i128>(p.N);
  return reduce(mul_checked(mul_checked(n, n), n), mul_checked(mul_checked(N, N), N));
}

InclusionProbs inclusion_probabilities(const SamplingParams& p) {
  validate_sampling(p);
  const double N = static_cast<double>(p.N);
  const double n = static_cast<double>(p.n);
  const double b = static_cast<double>(p.b);
  if (p.n * p.b < 2)
    throw InvalidArgument("pair probabilities require a buffer of at least 2 tuples");
  InclusionProbs out;
  out.single = 1.0 / (N * b);
  out.pair_same_block = 1.0 / (N * b * (n * b - 1.0));
  out.pair_cross_block = (n - 1.0) / (N * b * (N - 1.0) * (n * b - 1.0));
  out.block = n / N;
  out.block_pair = n * (n - 1.0) / (N * (N - 1.0));
  return out;
}

EmpiricalInclusion estimate_inclusion_probabilities(const DatasetReader& data,
                                                    std::uint64_t n,
                                                    std::uint64_t epochs,
                                                    std::uint64_t seed) {
  const std::uint64_t N = data.block_count();
  if (N < 2) throw InvalidArgument("need at least 2 blocks");
  if (n < 1 || n > N) throw InvalidArgument("buffer block count must be in [1, N]");
  if (epochs == 0) throw InvalidArgument("need at least 1 epoch");
  const std::uint64_t b = data.index()[0].tuple_count;
  for (const auto& e : data.index())
    if (e.tuple_count != b)
      throw InvalidArgument("inclusion estimation needs uniform block sizes");
  if (n * b < 2) throw InvalidArgument("pair events require a buffer of at least 2 tuples");

  // Tuple ids per block, in stored order; the shuffle below permutes ids
  // exactly the way the epoch stream permutes the loaded tuples.
  std::vector<std::vector<std::uint64_t>> ids(N);
  for (std::uint64_t l = 0; l < N; ++l) {
    auto tuples = data.read_block(l);
    ids[l].reserve(tuples.size());
    for (const auto& t : tuples) ids[l].push_back(t.id);
  }
  const std::uint64_t witness_single = ids[0][0];
  const std::uint64_t witness_same = b >= 2 ? ids[0][1] : 0;
  const std::uint64_t witness_cross = ids[1][0];

  std::uint64_t c_single = 0, c_same = 0, c_cross = 0, c_block = 0, c_pair = 0;
  std::vector<std::uint64_t> psi;
  for (std::uint64_t e = 0; e < epochs; ++e) {
    const auto blocks = corgipile_block_sample(N, n, seed, e);
    bool has0 = false, has1 = false;
    psi.clear();
    for (std::uint64_t l : blocks) {
      has0 = has0 || l == 0;
      has1 = has1 || l == 1;
      psi.insert(psi.end(), ids[l].begin(), ids[l].end());
    }
    auto g = rng::engine(seed, rng::Purpose::TupleShuffle, e, 0, 0);
    rng::fisher_yates(psi, g);
    if (has0) ++c_block;
    if (has0 && has1) ++c_pair;
    if (psi[0] == witness_single) {
      ++c_single;
      if (b >= 2 && psi[1] == witness_same) ++c_same;
      if (psi[1] == witness_cross) ++c_cross;
    }
  }

  EmpiricalInclusion out;
  out.epochs = epochs;
  const double E = static_cast<double>(epochs);
  auto fill = [E](std::uint64_t count, double& freq, double& se) {
    freq = static_cast<double>(count) / E;
    se = std::sqrt(freq * (1.0 - freq) / E);
  };
  fill(c_single, out.freq.single, out.stderr_est.single);
  fill(c_same, out.freq.pair_same_block, out.stderr_est.pair_same_block);
  fill(c_cross, out.freq.pair_cross_block, out.stderr_est.pair_cross_block);
  fill(c_block, out.freq.block, out.stderr_est.block);
  fill(c_pair, out.freq.block_pair, out.stderr_est.block_pair);
  return out;
}

VarianceCheck sampling_variance_check(const std::vector<std::vector<double>>& block_sums,
                                      std::uint64_t n,
                                      std::uint64_t max_subsets) {
  const std::uint64_t N = block_sums.size();
  if (N < 2) throw InvalidArgument("need at least 2 blocks");
  if (n < 1 || n > N) throw InvalidArgument("subset size must be in [1, N]");
  const std::size_t d = block_sums[0].size();
  if (d == 0) throw InvalidArgument("block gradient sums must be non-empty");
  for (const auto& g : block_sums)
    if (g.size() != d) throw InvalidArgument("block gradient sums must share a dimension");

  // C(N, n), bailing out as soon as it exceeds the enumeration budget.
  unsigned __int128 count = 1;
  for (std::uint64_t i = 1; i <= n; ++i) {
    count = count * (N - n + i);
    count /= i;
    if (count > max_subsets)
      throw InvalidArgument("too many subsets to enumerate; raise max_subsets");
  }
  const std::uint64_t K = static_cast<std::uint64_t>(count);

  auto for_each_subset = [&](auto&& fn) {
    std::vector<std::uint64_t> idx(n);
    for (std::uint64_t i = 0; i < n; ++i) idx[i] = i;
    std::vector<double> s(d);
    while (true) {
      std::fill(s.begin(), s.end(), 0.0);
      for (std::uint64_t i : idx)
        for (std::size_t j = 0; j < d; ++j) s[j] += block_sums[i][j];
      fn(s);
      // Advance to the next n-combination of {0..N-1} in lexicographic order.
      std::uint64_t k = n;
      while (k > 0 && idx[k - 1] == N - n + (k - 1)) --k;
      if (k == 0) break;
      ++idx[k - 1];
      for (std::uint64_t j = k; j < n; ++j) idx[j] = idx[j - 1] + 1;
    }
  };

  std::vector<double> mean(d, 0.0);
  for_each_subset([&](const std::vector<double>& s) {
    for (std::size_t j = 0; j < d; ++j) mean[j] += s[j];
  });
  for (auto& v : mean) v /= static_cast<double>(K);

  double var = 0.0;
  for_each_subset([&](const std::vector<double>& s) {
    for (std::size_t j = 0; j < d; ++j) {
      const double dev = s[j] - mean[j];
      var += dev * dev;
    }
  });
  var /= static_cast<double>(K);

  std::vector<double> gbar(d, 0.0);
  for (const auto& g : block_sums)
    for (std::size_t j = 0; j < d; ++j) gbar[j] += g[j];
  for (auto& v : gbar) v /= static_cast<double>(N);
  double spread = 0.0;
  for (const auto& g : block_sums)
    for (std::size_t j = 0; j < d; ++j) {
      const double dev = g[j] - gbar[j];
      spread += dev * dev;
    }
  spread /= static_cast<double>(N);
  const double nn = static_cast<double>(n), NN = static_cast<double>(N);
  const double closed = nn * (NN - nn) / (NN - 1.0) * spread;

  VarianceCheck out;
  out.exhaustive = var;
  out.closed_form = closed;
  out.subsets = K;
  const double denom = std::max(std::abs(var), std::abs(closed));
  out.rel_err = denom == 0.0 ? 0.0 : std::abs(var - closed) / denom;
  return out;
}

namespace {

// Full-parameter gradient (weights then biases) flattened into one vector.
void flat_gradient(const Model& m, const Tuple& t, std::vector<double>& out) {
  const Gradient g = gradient(m, t);
  out.resize(g.w.size() + g.bias.size());
  std::copy(g.w.begin(), g.w.end(), out.begin());
  std::copy(g.bias.begin(), g.bias.end(), out.begin() + g.w.size());
}

}  // namespace

ClusteringReport block_clustering(const DatasetReader& data, const Model& at) {
  validate_model_for(at, data.meta());
  const std::uint64_t N = data.block_count();
  const std::uint64_t m = data.meta().tuple_count;
  if (N == 0 || m == 0) throw InvalidArgument("dataset is empty");

  std::vector<double> g;
  std::vector<double> mean;
  for (std::uint64_t l = 0; l < N; ++l) {
    for (const auto& t : data.read_block(l)) {
      flat_gradient(at, t, g);
      if (mean.empty()) mean.assign(g.size(), 0.0);
      for (std::size_t j = 0; j < g.size(); ++j) mean[j] += g[j];
    }
  }
  for (auto& v : mean) v /= static_cast<double>(m);

  double sigma2 = 0.0, block_var = 0.0;
  std::vector<double> bsum(mean.size());
  for (std::uint64_t l = 0; l < N; ++l) {
    const auto tuples = data.read_block(l);
    std::fill(bsum.begin(), bsum.end(), 0.0);
    for (const auto& t : tuples) {
      flat_gradient(at, t, g);
      for (std::size_t j = 0; j < g.size(); ++j) {
        const double dev = g[j] - mean[j];
        sigma2 += dev * dev;
        bsum[j] += g[j];
      }
    }
    const double bl = static_cast<double>(tuples.size());
    for (std::size_t j = 0; j < bsum.size(); ++j) {
      const double dev = bsum[j] / bl - mean[j];
      block_var += dev * dev;
    }
  }
  sigma2 /= static_cast<double>(m);
  block_var /= static_cast<double>(N);

  ClusteringReport out;
  out.sigma2 = sigma2;
  out.block_var = block_var;
  out.mean_block_size = static_cast<double>(m) / static_cast<double>(N);
  if (sigma2 == 0.0) {
    out.undefined = true;
    out.h = 0.0;
  } else {
    out.h = block_var / (sigma2 / out.mean_block_size);
  }
  return out;
}

BoundTerms strongly_convex_bound(const SamplingParams& p, std::uint64_t S, double h,
                                 double sigma2, std::uint64_t m) {
  validate_sampling(p);
  if (S < 1) throw InvalidArgument("need at least 1 epoch");
  if (h < 0.0 || sigma2 < 0.0) throw InvalidArgument("h and sigma2 must be non-negative");
  const double T = static_cast<double>(S) * static_cast<double>(p.n) * static_cast<double>(p.b);
  const double alpha = alpha_fraction(p).value();
  const double md = static_cast<double>(m);
  BoundTerms out;
  out.which_case = 0;
  out.horizon = T;
  out.term1 = (1.0 - alpha) * h * sigma2 / T;
  out.term2 = beta_fraction(p).value() / (T * T);
  out.term3 = gamma_fraction(p).value() * md * md * md / (T * T * T);
  out.total = out.term1 + out.term2 + out.term3;
  return out;
}

BoundTerms nonconvex_bound_partial(const SamplingParams& p, std::uint64_t S, double h,
                                   double sigma2, std::uint64_t m) {
  validate_sampling(p);
  if (p.n == p.N)
    throw InvalidArgument("partial-buffer rate requires n < N; use the full-buffer rate");
  if (S < 1) throw InvalidArgument("need at least 1 epoch");
  if (h <= 0.0 || sigma2 <= 0.0)
    throw InvalidArgument("partial-buffer rate requires positive h and sigma2");
  const double T = static_cast<double>(S) * static_cast<double>(p.n) * static_cast<double>(p.b);
  const double alpha = alpha_fraction(p).value();
  const double b1 = static_cast<double>(p.b) - 1.0;
  const double md = static_cast<double>(m);
  const double beta_p =
      alpha * alpha / ((1.0 - alpha) * h * sigma2) + (1.0 - alpha) * b1 * b1 / (h * sigma2);
  const double gamma_p = gamma_fraction(p).value() / (1.0 - alpha);
  BoundTerms out;
  out.which_case = 1;
  out.horizon = T;
  out.term1 = std::sqrt((1.0 - alpha) * h) * std::sqrt(sigma2) / std::sqrt(T);
  out.term2 = beta_p / T;
  out.term3 = gamma_p * md * md * md / (T * std::sqrt(T));
  out.total = out.term1 + out.term2 + out.term3;
  return out;
}

BoundTerms nonconvex_bound_full(const SamplingParams& p, std::uint64_t S,
                                std::uint64_t m) {
  validate_sampling(p);
  if (p.n != p.N) throw InvalidArgument("full-buffer rate requires n == N");
  if (S < 1) throw InvalidArgument("need at least 1 epoch");
  const double T = static_cast<double>(S) * static_cast<double>(p.n) * static_cast<double>(p.b);
  const double md = static_cast<double>(m);
  BoundTerms out;
  out.which_case = 2;
  out.horizon = T;
  out.term1 = 1.0 / std::cbrt(T * T);
  out.term2 = gamma_fraction(p).value() * md * md * md / T;
  out.term3 = 0.0;
  out.total = out.term1 + out.term2;
  return out;
}

BoundTerms nonconvex_bound(const SamplingParams& p, std::uint64_t S, double h,
                           double sigma2, std::uint64_t m) {
  validate_sampling(p);
  if (p.n < p.N) return nonconvex_bound_partial(p, S, h, sigma2, m);
  return nonconvex_bound_full(p, S, m);
}

ReadCostEstimate read_cost_model(double t_latency, double t_transfer,
                                 const SamplingParams& p, double eps, double sigma2,
                                 double h) {
  validate_sampling(p);
  if (eps <= 0.0) throw InvalidArgument("tolerance must be positive");
  if (t_latency < 0.0 || t_transfer < 0.0)
    throw InvalidArgument("times must be non-negative");
  if (sigma2 < 0.0 || h < 0.0) throw InvalidArgument("sigma2 and h must be non-negative");
  const double work = sigma2 / eps;
  const double alpha = alpha_fraction(p).value();
  const double b = static_cast<double>(p.b);
  ReadCostEstimate out;
  out.full_scan = work * (t_latency + t_transfer);
  out.buffered =
      (1.0 - alpha) * (h / b) * work * t_latency + (1.0 - alpha) * h * work * t_transfer;
  out.ratio = out.full_scan == 0.0 ? 0.0 : out.buffered / out.full_scan;
  return out;
}

Model weighted_tail_average(const std::vector<Model>& iterates, double a) {
  if (iterates.empty()) throw InvalidArgument("need at least one iterate");
  if (!(a > -1.0)) throw InvalidArgument("weight offset must exceed -1");
  const Model& first = iterates.front();
  for (const auto& m : iterates) {
    if (m.loss != first.loss || m.dim != first.dim || m.num_classes != first.num_classes ||
        m.w.size() != first.w.size() || m.bias.size() != first.bias.size())
      throw InvalidArgument("iterates must share a shape");
  }
  Model out = first;
  std::fill(out.w.begin(), out.w.end(), 0.0);
  std::fill(out.bias.begin(), out.bias.end(), 0.0);
  double wsum = 0.0;
  for (std::size_t s = 0; s < iterates.size(); ++s) {
    const double t = static_cast<double>(s + 1) + a;
    const double wt = t * t * t;
    wsum += wt;
    for (std::size_t j = 0; j < out.w.size(); ++j) out.w[j] += wt * iterates[s].w[j];
    for (std::size_t j = 0; j < out.bias.size(); ++j)
      out.bias[j] += wt * iterates[s].bias[j];
  }
  for (auto& v : out.w) v /= wsum;
  for (auto& v : out.bias) v /= wsum;
  return out;
}

}  // namespace corgi
