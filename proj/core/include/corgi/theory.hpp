#pragma once

// Sampling theory for the block/tuple shuffle.
//
// Everything here is independent of the training loop: closed-form
// inclusion probabilities for block sampling without replacement, the exact
// finite-population variance of a sampled sum of block gradients, the
// block-clustering factor that scales the leading convergence term, the
// constant-free convergence-rate terms of the two main bounds, and a
// two-parameter read-cost model. Validators compare the closed forms
// against exhaustive enumeration and against the actual sampler.

#include <cstdint>
#include <string>
#include <vector>

#include "corgi/dataset.hpp"
#include "corgi/sgd.hpp"

namespace corgi {

// N blocks of b tuples each; a buffer samples n of the N per epoch.
struct SamplingParams {
  std::uint64_t N = 2;
  std::uint64_t n = 1;
  std::uint64_t b = 1;
};
void validate_sampling(const SamplingParams& p);  // 1 <= n <= N, N >= 2, b >= 1

// Exact rational in lowest terms, den > 0.
struct Fraction {
  long long num = 0;
  long long den = 1;
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

// alpha = (n-1)/(N-1): the fraction of the leading variance term removed by
// sampling without replacement. alpha = 1 iff the buffer holds every block.
Fraction alpha_fraction(const SamplingParams& p);
// beta = [(n-1)^2 + (N-n)^2 (b-1)^2] / (N-1)^2
Fraction beta_fraction(const SamplingParams& p);
// gamma = n^3 / N^3
Fraction gamma_fraction(const SamplingParams& p);

// Inclusion probabilities of the epoch's emitted sequence psi (the tuple-id
// sequence after block sampling + in-buffer shuffle):
//   single:            P(psi(k) = i)                       = 1/(N b)
//   pair_same_block:   P(psi(k)=i, psi(k')=j), same block  = 1/(N b (nb-1))
//   pair_cross_block:  P(psi(k)=i, psi(k')=j), diff blocks = (n-1)/(N b (N-1)(nb-1))
//   block:             P(block l sampled)                  = n/N
//   block_pair:        P(blocks l,l' both sampled)         = n(n-1)/(N(N-1))
// Pair entries require n*b >= 2.
struct InclusionProbs {
  double single = 0.0;
  double pair_same_block = 0.0;
  double pair_cross_block = 0.0;
  double block = 0.0;
  double block_pair = 0.0;
};
InclusionProbs inclusion_probabilities(const SamplingParams& p);

// Empirical companion: runs the real block sampler + buffer shuffle for
// `epochs` epochs over the dataset (which must have uniform full blocks)
// and tallies the same five events at fixed witnesses: tuple id 0 at slot
// 0, ids (0,1) and (0,b) at slots (0,1), and blocks {0} and {0,1}.
struct EmpiricalInclusion {
  InclusionProbs freq;
  InclusionProbs stderr_est;  // sqrt(p_hat (1-p_hat) / epochs)
  std::uint64_t epochs = 0;
};
EmpiricalInclusion estimate_inclusion_probabilities(const DatasetReader& data,
                                                    std::uint64_t n,
                                                    std::uint64_t epochs,
                                                    std::uint64_t seed);

// Exact variance of the sum of per-block gradient sums over a uniformly
// random n-subset of blocks, by exhaustive enumeration of all C(N,n)
// subsets, against the closed form
//   n (N-n)/(N-1) * (1/N) sum_l ||g_l - g_bar||^2.
// Enumeration refuses to run past max_subsets.
struct VarianceCheck {
  double exhaustive = 0.0;
  double closed_form = 0.0;
  double rel_err = 0.0;
  std::uint64_t subsets = 0;
};
VarianceCheck sampling_variance_check(const std::vector<std::vector<double>>& block_sums,
                                      std::uint64_t n,
                                      std::uint64_t max_subsets = 1000000);

// How clustered the blocks are, at a model point:
//   sigma2    = (1/m) sum_i ||grad_i - grad_mean||^2
//   block_var = (1/N) sum_l ||block_mean_grad_l - grad_mean||^2
//   h         = block_var / (sigma2 / b_mean)
// h ~ 1 on well-shuffled data and reaches its maximum b_mean when every
// block holds b copies of one point. undefined=true when sigma2 == 0.
struct ClusteringReport {
  double sigma2 = 0.0;
  double block_var = 0.0;
  double h = 0.0;
  double mean_block_size = 0.0;
  bool undefined = false;
};
ClusteringReport block_clustering(const DatasetReader& data, const Model& at);

// Constant-free convergence-rate terms. horizon T = S * n * b.
struct BoundTerms {
  double horizon = 0.0;
  double term1 = 0.0, term2 = 0.0, term3 = 0.0;
  double total = 0.0;
  int which_case = 1;
};
// Strongly convex rate:  (1-alpha) h sigma2 / T + beta / T^2 + gamma m^3 / T^3
BoundTerms strongly_convex_bound(const SamplingParams& p, std::uint64_t S, double h,
                                 double sigma2, std::uint64_t m);
// Non-convex rate, partial buffers (n < N; rejects n == N):
//   sqrt((1-alpha) h) sigma / sqrt(T) + beta'/T + gamma' m^3 / T^(3/2)
// with beta' = alpha^2/((1-alpha) h sigma2) + (1-alpha)(b-1)^2/(h sigma2),
// gamma' = n^3 / ((1-alpha) N^3).
BoundTerms nonconvex_bound_partial(const SamplingParams& p, std::uint64_t S, double h,
                                   double sigma2, std::uint64_t m);
// Non-convex rate, full buffer (n == N): 1/T^(2/3) + (n^3/N^3) m^3 / T.
BoundTerms nonconvex_bound_full(const SamplingParams& p, std::uint64_t S,
                                std::uint64_t m);
// Dispatch on n < N vs n == N.
BoundTerms nonconvex_bound(const SamplingParams& p, std::uint64_t S, double h,
                           double sigma2, std::uint64_t m);

// Expected I/O cost to reach tolerance eps, separating seek latency from
// transfer time. A full scan pays both once per pass; buffered block
// sampling amortizes seeks over blocks and scales both terms by the
// variance reduction (1-alpha) and the clustering factor h.
struct ReadCostEstimate {
  double full_scan = 0.0;  // (sigma2/eps) * (t_latency + t_transfer)
  double buffered = 0.0;   // (1-alpha)(h/b)(sigma2/eps) t_lat + (1-alpha) h (sigma2/eps) t_tr
  double ratio = 0.0;      // buffered / full_scan
};
ReadCostEstimate read_cost_model(double t_latency, double t_transfer,
                                 const SamplingParams& p, double eps, double sigma2,
                                 double h);

// Weighted tail-averaged iterate: sum_s (s+a)^3 x_s / sum_s (s+a)^3 over the
// given end-of-epoch models, s = 1..S in input order.
Model weighted_tail_average(const std::vector<Model>& iterates, double a);

}  // namespace corgi
