#include "railscope/kernels.hpp"
#include "railscope/scenario_io.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace railscope;

namespace {

const Scenario& preset()
{
    static const Scenario s = visual_servoing_preset().scenario;
    return s;
}

void BM_SampleFrames(benchmark::State& state, bool parallel)
{
    const Scenario& s = preset();
    const DutModel model(s);
    std::vector<std::uint16_t> out(static_cast<std::size_t>(state.range(0)) * s.adc.channels);
    std::uint64_t first = 45000;
    for (auto _ : state) {
        if (parallel) {
            kernels::sample_frames_parallel(model, s.adc, s.rails, first, out);
        } else {
            kernels::sample_frames_serial(model, s.adc, s.rails, first, out);
        }
        benchmark::DoNotOptimize(out.data());
        first += static_cast<std::uint64_t>(state.range(0));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

std::vector<std::int32_t> noise_series(std::size_t n)
{
    std::mt19937 rng(1);
    std::normal_distribution<double> g(1000.0, 3.0);
    std::vector<std::int32_t> x(n);
    for (auto& v : x) v = static_cast<std::int32_t>(g(rng));
    return x;
}

void BM_RollingMedian(benchmark::State& state, bool parallel)
{
    const auto x = noise_series(static_cast<std::size_t>(state.range(0)));
    const std::size_t window = 2251;   // 10 ms at 225 kSPS
    for (auto _ : state) {
        auto m = parallel ? kernels::rolling_median_parallel(x, window) : kernels::rolling_median_serial(x, window);
        benchmark::DoNotOptimize(m.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_TrapezoidSum(benchmark::State& state, bool parallel)
{
    std::mt19937 rng(2);
    std::vector<std::uint16_t> v(static_cast<std::size_t>(state.range(0))), i(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) {
        v[k] = static_cast<std::uint16_t>(rng());
        i[k] = static_cast<std::uint16_t>(rng());
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(parallel ? kernels::trapezoid_product_sum_parallel(v, i)
                                          : kernels::trapezoid_product_sum_serial(v, i));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK_CAPTURE(BM_SampleFrames, serial, false)->Arg(1 << 14)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_SampleFrames, parallel, true)->Arg(1 << 14)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_RollingMedian, serial, false)->Arg(360000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_RollingMedian, parallel, true)->Arg(360000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_TrapezoidSum, serial, false)->Arg(360000)->Unit(benchmark::kMicrosecond);
BENCHMARK_CAPTURE(BM_TrapezoidSum, parallel, true)->Arg(360000)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
