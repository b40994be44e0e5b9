#include <benchmark/benchmark.h>

#include "ltml/dataset.hpp"
#include "ltml/eval.hpp"
#include "ltml/losses.hpp"
#include "ltml/model.hpp"
#include "ltml/rng.hpp"
#include "ltml/sampling.hpp"

using namespace ltml;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = rng.normal();
  return m;
}

Eigen::MatrixXd random_binary(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = rng.uniform() < 0.3 ? 1.0 : 0.0;
  return m;
}

void bm_forward(benchmark::State& state) {
  auto model = ModelBundle::init(32, {64}, 32, 24, 1);
  auto X = random_matrix(128, 32, 2);
  for (auto _ : state) {
    auto out = forward(model, X);
    benchmark::DoNotOptimize(out.second.data());
  }
}
BENCHMARK(bm_forward);

void bm_forward_backward(benchmark::State& state) {
  auto model = ModelBundle::init(32, {64}, 32, 24, 1);
  auto X = random_matrix(128, 32, 2);
  auto Y = random_binary(128, 24, 3);
  for (auto _ : state) {
    auto [V, Z] = forward(model, X);
    auto loss = bce_multilabel(Z, Y);
    auto g = backward(model, X, nullptr, &loss.dlogits);
    benchmark::DoNotOptimize(g.classifier.W.data());
  }
}
BENCHMARK(bm_forward_backward);

void bm_mlmc_loss(benchmark::State& state) {
  auto tree = HierarchyTree::balanced(24, 3, 3);
  auto Z = random_matrix(128, 24, 4);
  auto Y = random_binary(128, 24, 5);
  for (auto _ : state) {
    auto r = mlmc_loss(Z, Y, tree);
    benchmark::DoNotOptimize(r.value);
  }
}
BENCHMARK(bm_mlmc_loss);

void bm_compute_delta(benchmark::State& state) {
  Rng rng(6);
  auto n = static_cast<Eigen::Index>(state.range(0));
  LabelMatrix m = LabelMatrix::zeros(n, 24);
  for (Eigen::Index i = 0; i < n; ++i) {
    m.at(i, static_cast<Eigen::Index>(rng.below(24))) = 1;
    if (rng.uniform() < 0.3) m.at(i, static_cast<Eigen::Index>(rng.below(24))) = 1;
  }
  for (Eigen::Index j = 0; j < 24; ++j) m.at(static_cast<Eigen::Index>(j), j) = 1;
  for (auto _ : state) {
    auto w = compute_delta(m);
    benchmark::DoNotOptimize(w.delta.data());
  }
}
BENCHMARK(bm_compute_delta)->Arg(1000)->Arg(6000);

void bm_average_precision(benchmark::State& state) {
  Rng rng(7);
  auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> s(n);
  std::vector<std::uint8_t> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = rng.normal();
    y[i] = rng.uniform() < 0.2;
  }
  y[0] = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(average_precision(s, y));
  }
}
BENCHMARK(bm_average_precision)->Arg(1000)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
