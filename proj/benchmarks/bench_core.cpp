#include <benchmark/benchmark.h>

#include "crisp/dataset.hpp"
#include "crisp/dual.hpp"
#include "crisp/estimators.hpp"
#include "crisp/kernels.hpp"

namespace {

using namespace crisp;

void BM_gram_matrix(benchmark::State& state) {
  auto [d, tr] = generate_binary_synthetic(state.range(0), 7);
  Eigen::MatrixXd Z = encode_points(d);
  KernelSpec k;
  k.bandwidth = median_heuristic(Z);
  for (auto _ : state) benchmark::DoNotOptimize(gram_matrix(k, Z));
}
BENCHMARK(BM_gram_matrix)->Arg(250)->Arg(500)->Arg(1000);

void BM_kpca_basis(benchmark::State& state) {
  auto [d, tr] = generate_binary_synthetic(1000, 7);
  Eigen::MatrixXd Z = encode_points(d);
  KernelSpec k;
  k.bandwidth = median_heuristic(Z);
  for (auto _ : state)
    benchmark::DoNotOptimize(kpca_basis(k, d, state.range(0)));
}
BENCHMARK(BM_kpca_basis)->Arg(16)->Arg(64)->Arg(256);

void BM_box_dual(benchmark::State& state) {
  auto [d, tr] = generate_binary_synthetic(state.range(0), 7);
  Policy pol = Policy::logistic(default_eval_beta());
  Eigen::MatrixXd Z = encode_points(d);
  KernelSpec k;
  k.bandwidth = median_heuristic(Z);
  ConstraintBasis basis = kpca_basis(k, d, 16);
  SensitivityModel m;
  m.type = SensitivityModel::Type::box;
  m.gamma_box = 1.5;
  for (auto _ : state)
    benchmark::DoNotOptimize(kcmc_bound(d, pol, m, basis, Direction::lower));
}
BENCHMARK(BM_box_dual)->Arg(500)->Arg(1000)->Arg(2000);

void BM_f_dual(benchmark::State& state) {
  auto [d, tr] = generate_binary_synthetic(1000, 7);
  Policy pol = Policy::logistic(default_eval_beta());
  Eigen::MatrixXd Z = encode_points(d);
  KernelSpec k;
  k.bandwidth = median_heuristic(Z);
  ConstraintBasis basis = kpca_basis(k, d, 8);
  SensitivityModel m;
  m.type = SensitivityModel::Type::fdiv;
  m.gen = FGenerator::kl;
  m.budget = 0.05;
  for (auto _ : state)
    benchmark::DoNotOptimize(kcmc_bound(d, pol, m, basis, Direction::lower));
}
BENCHMARK(BM_f_dual);

}  // namespace

BENCHMARK_MAIN();
