#include "railscope/kernels.hpp"

#include "railscope/timebase.hpp"

#include <algorithm>
#include <cstdint>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace railscope::kernels {

void sample_frame(const DutModel& model, const AdcConfig& adc, std::span<const RailConfig> rails,
                  double t, std::span<std::uint16_t> row) noexcept
{
    std::fill(row.begin(), row.end(), std::uint16_t{0});
    for (const RailConfig& rail : rails) {
        const RailSample s = model.eval(rail.rail_id, t);
        row[rail.v_channel] = quantize_voltage(s.volts, adc);
        row[rail.i_channel] = quantize_voltage(current_to_sense(s.amperes, rail), adc);
    }
}

void sample_frames_serial(const DutModel& model, const AdcConfig& adc,
                          std::span<const RailConfig> rails, std::uint64_t first_frame,
                          std::span<std::uint16_t> out)
{
    const auto channels = static_cast<std::size_t>(adc.channels);
    const std::size_t frames = out.size() / channels;
    for (std::size_t f = 0; f < frames; ++f) {
        sample_frame(model, adc, rails, frame_time_s(first_frame + f, adc.sample_rate_hz),
                     out.subspan(f * channels, channels));
    }
}

void sample_frames_parallel(const DutModel& model, const AdcConfig& adc,
                            std::span<const RailConfig> rails, std::uint64_t first_frame,
                            std::span<std::uint16_t> out)
{
    const auto channels = static_cast<std::size_t>(adc.channels);
    const auto frames = static_cast<std::int64_t>(out.size() / channels);

    #pragma omp parallel for schedule(static)
    for (std::int64_t f = 0; f < frames; ++f) {
        const auto idx = static_cast<std::size_t>(f);
        sample_frame(model, adc, rails, frame_time_s(first_frame + idx, adc.sample_rate_hz),
                     out.subspan(idx * channels, channels));
    }
}

namespace {

// Counts per compressed value with k-th order statistic lookup.
class Fenwick {
public:
    explicit Fenwick(std::size_t n) : tree_(n + 1, 0)
    {
        while ((std::size_t{1} << log_) <= n) ++log_;
    }

    void add(std::size_t i, int delta) noexcept
    {
        for (++i; i < tree_.size(); i += i & (~i + 1)) tree_[i] += delta;
    }

    // Smallest index whose prefix count exceeds k (0-based k).
    [[nodiscard]] std::size_t kth(int k) const noexcept
    {
        std::size_t pos = 0;
        for (int step = log_; step >= 0; --step) {
            const std::size_t next = pos + (std::size_t{1} << step);
            if (next < tree_.size() && tree_[next] <= k) {
                pos = next;
                k -= tree_[next];
            }
        }
        return pos;
    }

private:
    std::vector<int> tree_;
    int log_ = 0;
};

struct Compressed {
    std::vector<std::int32_t> values;   // sorted unique
    std::vector<std::uint32_t> rank;    // per input sample
};

Compressed compress(std::span<const std::int32_t> x)
{
    Compressed c;
    c.values.assign(x.begin(), x.end());
    std::sort(c.values.begin(), c.values.end());
    c.values.erase(std::unique(c.values.begin(), c.values.end()), c.values.end());
    c.rank.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        c.rank[i] = static_cast<std::uint32_t>(
            std::lower_bound(c.values.begin(), c.values.end(), x[i]) - c.values.begin());
    }
    return c;
}

std::size_t window_start(std::size_t j, std::size_t n, std::size_t w) noexcept
{
    const std::size_t half = w / 2;
    const std::size_t s = j > half ? j - half : 0;
    return std::min(s, n - w);
}

// Medians for outputs [begin, end).
void median_range(const Compressed& c, std::size_t w, std::size_t begin, std::size_t end,
                  std::span<std::int32_t> out)
{
    if (begin >= end) return;
    const std::size_t n = c.rank.size();
    const int k = static_cast<int>((w - 1) / 2);
    Fenwick counts(c.values.size());
    std::size_t s = window_start(begin, n, w);
    for (std::size_t i = s; i < s + w; ++i) counts.add(c.rank[i], 1);
    for (std::size_t j = begin; j < end; ++j) {
        const std::size_t sj = window_start(j, n, w);
        while (s < sj) {
            counts.add(c.rank[s], -1);
            counts.add(c.rank[s + w], 1);
            ++s;
        }
        out[j] = c.values[counts.kth(k)];
    }
}

void check_window(std::size_t n, std::size_t w)
{
    if (w == 0 || w > n) throw std::invalid_argument("rolling median window must be in [1, n]");
}

}  // namespace

std::vector<std::int32_t> rolling_median_serial(std::span<const std::int32_t> x, std::size_t window)
{
    check_window(x.size(), window);
    const Compressed c = compress(x);
    std::vector<std::int32_t> out(x.size());
    median_range(c, window, 0, x.size(), out);
    return out;
}

std::vector<std::int32_t> rolling_median_parallel(std::span<const std::int32_t> x, std::size_t window)
{
    check_window(x.size(), window);
    const Compressed c = compress(x);
    std::vector<std::int32_t> out(x.size());
    const std::size_t n = x.size();
    const auto chunks = static_cast<std::int64_t>(std::max(1, parallel_threads()) * 4);

    #pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t ci = 0; ci < chunks; ++ci) {
        const std::size_t begin = n * static_cast<std::size_t>(ci) / static_cast<std::size_t>(chunks);
        const std::size_t end = n * static_cast<std::size_t>(ci + 1) / static_cast<std::size_t>(chunks);
        median_range(c, window, begin, end, out);
    }
    return out;
}

std::uint64_t trapezoid_product_sum_serial(std::span<const std::uint16_t> v,
                                           std::span<const std::uint16_t> i)
{
    if (v.size() != i.size()) throw std::invalid_argument("channel length mismatch");
    std::uint64_t sum = 0;
    for (std::size_t k = 0; k + 1 < v.size(); ++k) {
        sum += std::uint64_t{v[k]} * i[k] + std::uint64_t{v[k + 1]} * i[k + 1];
    }
    return sum;
}

std::uint64_t trapezoid_product_sum_parallel(std::span<const std::uint16_t> v,
                                             std::span<const std::uint16_t> i)
{
    if (v.size() != i.size()) throw std::invalid_argument("channel length mismatch");
    const auto n = static_cast<std::int64_t>(v.size());
    if (n < 2) return 0;
    std::uint64_t total = 0;

    #pragma omp parallel for reduction(+ : total) schedule(static)
    for (std::int64_t k = 0; k < n; ++k) {
        total += std::uint64_t{v[static_cast<std::size_t>(k)]} * i[static_cast<std::size_t>(k)];
    }

    // Interior samples appear in two trapezoids, the end points in one.
    const std::size_t last = v.size() - 1;
    return 2 * total - std::uint64_t{v[0]} * i[0] - std::uint64_t{v[last]} * i[last];
}

int parallel_threads() noexcept
{
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace railscope::kernels
