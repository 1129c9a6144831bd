#include <benchmark/benchmark.h>

#include <filesystem>
#include <random>

#include "cellsim/engine.hpp"
#include "cellsim/linalg.hpp"
#include "cellsim/oracle.hpp"
#include "cellsim/waveforms.hpp"

namespace {

cellsim::Circuit load(const char* name) {
    return cellsim::load_netlist(std::filesystem::path(CELLSIM_NETLIST_DIR) / name);
}

void BM_AveragedRun(benchmark::State& state, const char* name) {
    const auto c = load(name);
    for (auto _ : state) {
        auto tr = cellsim::run(c);
        benchmark::DoNotOptimize(tr.periods.back().x.data());
    }
}
BENCHMARK_CAPTURE(BM_AveragedRun, buck_syn, "buck_syn.cir")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_AveragedRun, buck_diode, "buck_diode.cir")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_AveragedRun, flyback_diode, "flyback_diode.cir")->Unit(benchmark::kMillisecond);

void BM_Oracle(benchmark::State& state) {
    const auto c = load("buck_syn.cir");
    const auto cfg = cellsim::SimConfig::from_circuit(c);
    cellsim::OracleOptions opt;
    opt.substeps = static_cast<int>(state.range(0));
    opt.keep_samples = false;
    for (auto _ : state) {
        auto tr = cellsim::simulate_switched(c, cfg, opt);
        benchmark::DoNotOptimize(tr.periods.back().mean.data());
    }
}
BENCHMARK(BM_Oracle)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_Reconstruct(benchmark::State& state) {
    const auto c = load("buck_syn.cir");
    const auto tr = cellsim::run(c);
    for (auto _ : state) {
        auto il = cellsim::reconstruct_inductor(tr, 0);
        auto vc = cellsim::reconstruct_capacitor(c, tr, 0);
        benchmark::DoNotOptimize(il.size() + vc.size());
    }
}
BENCHMARK(BM_Reconstruct)->Unit(benchmark::kMicrosecond);

void BM_LuSolve(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    cellsim::DenseMatrix a(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) a(i, j) = u(rng);
        a(i, i) += static_cast<double>(n);
    }
    std::vector<double> z(n, 1.0);
    for (auto _ : state) {
        const cellsim::LuFactorization lu(a);
        auto x = lu.solve(z);
        benchmark::DoNotOptimize(x.data());
    }
}
BENCHMARK(BM_LuSolve)->Arg(13)->Arg(29)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
