#include <benchmark/benchmark.h>

#include "bioz/app.hpp"

using namespace bioz;

namespace {

void BM_DemodEngine(benchmark::State& st) {
    const auto engine = st.range(0) ? afe::Engine::Reference : afe::Engine::PeriodMap;
    const auto p = afe::ChainParams::defaults();
    afe::AfeConfig cfg;
    cfg.freq_index = 0;  // 2 MHz, the longest period
    const auto v = afe::sense_period(tissue::ParallelRC{1000.0, 1e-7, 0.0}, cfg);
    for (auto _ : st) {
        afe::DemodChain d(v, cfg.fundamental(), cfg, p, 7, engine);
        double acc = 0.0;
        for (int n = 0; n < 256; ++n) acc += d.step_block();
        benchmark::DoNotOptimize(acc);
    }
    st.SetItemsProcessed(st.iterations() * 256);
    st.SetLabel(st.range(0) ? "reference" : "period_map");
}
BENCHMARK(BM_DemodEngine)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Sweep(benchmark::State& st) {
    auto s = app::parse_scenario(R"({"tissue": {"type": "builtin", "name": "saline"}, "gain": "111"})");
    app::SweepOptions o;
    o.repeats = 4;
    o.exec = st.range(0) ? Exec::Parallel : Exec::Serial;
    for (auto _ : st) benchmark::DoNotOptimize(app::run_sweep(s, o));
    st.SetLabel(st.range(0) ? "openmp" : "serial");
}
BENCHMARK(BM_Sweep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
