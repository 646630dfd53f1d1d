#include <benchmark/benchmark.h>

#include "giet/affine.hpp"
#include "giet/rigidity.hpp"

using namespace giet;

namespace {

CombinatoricsSequence seed_loop() { return make_sequence(make_pi("ABC", "CAB"), {1, 0, 1, 0, 0, 1, 0}); }

GiemConfig charted(const char* c2, const char* c3, const char* c4) {
  const PsiResult psi = psi_p(seed_loop());
  double m = 0;
  for (const auto& x : psi.central_basis[0]) m = std::max(m, std::abs(static_cast<double>(x)));
  VecD omega;
  for (const auto& x : psi.central_basis[0]) omega.push_back(0.3 * static_cast<double>(x) / m);
  GiemConfig c = to_config(model_from_prefix(seed_loop(), omega).model);
  c.chart = std::array<std::string, 3>{c2, c3, c4};
  return c;
}

template <class T>
std::shared_ptr<const Giem<T>> map(const char* c2, const char* c3, const char* c4) {
  return std::make_shared<const Giem<T>>(build_giem<T>(charted(c2, c3, c4)));
}

void BM_CocycleProduct(benchmark::State& state) {
  const auto seq = periodic_extension(seed_loop(), static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(cocycle_range(seq, 0, seq.size()));
}
BENCHMARK(BM_CocycleProduct)->Arg(60)->Arg(240)->Arg(960);

void BM_PsiP(benchmark::State& state) {
  const auto loop = seed_loop();
  for (auto _ : state) benchmark::DoNotOptimize(psi_p(loop));
}
BENCHMARK(BM_PsiP);

template <class T>
void BM_Renormalize(benchmark::State& state) {
  set_precision_bits(256);
  const auto f = map<T>("0.1", "0.2", "0");
  for (auto _ : state) benchmark::DoNotOptimize(renormalize(f, static_cast<std::size_t>(state.range(0))));
}
BENCHMARK(BM_Renormalize<Quad>)->Arg(40)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Renormalize<Real>)->Arg(40)->Unit(benchmark::kMillisecond);

void BM_TowerMass(benchmark::State& state) {
  set_precision_bits(256);
  const auto st = renormalize(map<Real>("0.1", "0.2", "0"), 40).back();
  for (auto _ : state) benchmark::DoNotOptimize(st.tower_mass());
}
BENCHMARK(BM_TowerMass)->Unit(benchmark::kMillisecond);

void BM_SlopeExtraction(benchmark::State& state) {
  const auto f = map<Quad>("0.1", "0.2", "0");
  for (auto _ : state) benchmark::DoNotOptimize(extract_slope_vector(*f, 60));
}
BENCHMARK(BM_SlopeExtraction)->Unit(benchmark::kMillisecond);

void BM_Conjugacy(benchmark::State& state) {
  const auto f = map<Quad>("0", "0", "2"), g = map<Quad>("0", "0", "-3");
  for (auto _ : state) benchmark::DoNotOptimize(build_conjugacy(f, g, static_cast<std::size_t>(state.range(0))));
}
BENCHMARK(BM_Conjugacy)->Arg(15)->Arg(25)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
