// Microbenchmarks for the numerical kernels: CRF inference/training terms,
// attention pooling, injection modules and document clustering.

#include <benchmark/benchmark.h>

#include <random>

#include "rrl/autodiff.hpp"
#include "rrl/backbone.hpp"
#include "rrl/cluster.hpp"
#include "rrl/crf.hpp"
#include "rrl/pcm.hpp"

using namespace rrl;

namespace {

ad::Mat random_mat(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> dist;
  ad::Mat m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = dist(rng);
  return m;
}

void bm_crf_decode(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const int L = static_cast<int>(state.range(1));
  std::mt19937_64 rng(1);
  ad::Mat e = random_mat(m, L, rng);
  ad::Mat t = random_mat(L + 2, L + 2, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(crf_decode(e, t));
  }
}
BENCHMARK(bm_crf_decode)->Args({16, 5})->Args({64, 13})->Args({150, 13})->Args({150, 35});

void bm_crf_nll_backward(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const int L = static_cast<int>(state.range(1));
  std::mt19937_64 rng(2);
  ad::Var e = ad::Var::param(random_mat(m, L, rng));
  ad::Var t = ad::Var::param(random_mat(L + 2, L + 2, rng));
  std::vector<int> gold(m);
  for (auto& g : gold) g = static_cast<int>(rng() % L);
  for (auto _ : state) {
    e.zero_grad();
    t.zero_grad();
    ad::Var nll = crf_neg_log_likelihood(e, t, gold);
    ad::backward(nll);
    benchmark::DoNotOptimize(e.grad());
  }
}
BENCHMARK(bm_crf_nll_backward)->Args({64, 13})->Args({150, 13});

void bm_attention_pool(benchmark::State& state) {
  const int tokens = static_cast<int>(state.range(0));
  RngStream rng(3);
  AttentionPooler pooler(128, 32, rng);
  std::mt19937_64 mrng(4);
  std::vector<ad::Var> states;
  for (int t = 0; t < tokens; ++t)
    states.push_back(ad::Var::constant(random_mat(128, 1, mrng)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(pooler.pool(states).value());
  }
}
BENCHMARK(bm_attention_pool)->Arg(16)->Arg(64)->Arg(128);

void bm_injection(benchmark::State& state) {
  const auto& kinds = injection_kinds();
  const auto& kind = kinds[static_cast<std::size_t>(state.range(0))];
  std::mt19937_64 rng(5);
  auto inj = make_injection_module(kind, 128, 128, 6);
  ad::Var h = ad::Var::constant(random_mat(128, 1, rng));
  ad::Var p = ad::Var::constant(random_mat(128, 1, rng));
  for (auto _ : state) {
    benchmark::DoNotOptimize(inj->apply(h, p).value());
  }
  state.SetLabel(kind);
}
BENCHMARK(bm_injection)->DenseRange(0, 4);

void bm_kmeans_silhouette(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(7);
  std::normal_distribution<double> d;
  Eigen::MatrixXd pts(n, 16);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 16; ++j) pts(i, j) = d(rng);
  for (auto _ : state) {
    BestClustering best = select_k_by_silhouette(pts, 2, 6, 11);
    benchmark::DoNotOptimize(best.k);
  }
}
BENCHMARK(bm_kmeans_silhouette)->Arg(50)->Arg(180);

}  // namespace

BENCHMARK_MAIN();
