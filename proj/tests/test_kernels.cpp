#include <catch_amalgamated.hpp>

#include "railscope/kernels.hpp"
#include "railscope/ring_buffer.hpp"
#include "railscope/spsc_queue.hpp"
#include "railscope/timebase.hpp"

#include <algorithm>
#include <random>
#include <thread>

using namespace railscope;

namespace {

std::vector<std::int32_t> naive_rolling_median(const std::vector<std::int32_t>& x, std::size_t w)
{
    std::vector<std::int32_t> out(x.size());
    const std::size_t half = w / 2;
    for (std::size_t i = 0; i < x.size(); ++i) {
        std::size_t lo = i >= half ? i - half : 0;
        lo = std::min(lo, x.size() - w);
        std::vector<std::int32_t> win(x.begin() + lo, x.begin() + lo + w);
        std::nth_element(win.begin(), win.begin() + half, win.end());
        out[i] = win[half];
    }
    return out;
}

Scenario noisy_scenario()
{
    Scenario s;
    s.duration_s = 0.02;
    s.seed = 5;
    s.rails = default_rail_map();
    for (const RailConfig& r : s.rails) {
        RailWaveformSpec w;
        w.rail_id = r.rail_id;
        w.nominal_volts = 1.0 + 0.1 * r.rail_id;
        w.idle_current_a = 0.05 * (r.rail_id + 1);
        w.ripple_amp_a = 1e-3;
        w.noise_rms_a = 50e-6;
        s.waveforms.push_back(w);
    }
    return s;
}

}  // namespace

TEST_CASE("timestamps stay on the ideal grid", "[timebase][property]")
{
    CHECK(timestamp_of_frame(1, 225000) == 4444);
    CHECK(timestamp_of_frame(225000, 225000) == 1'000'000'000);
    for (const std::uint32_t fs : {225000u, 630000u, 1000u, 7u}) {
        for (const std::uint64_t k : {0ULL, 1ULL, 999ULL, 1'000'000'000ULL, 123'456'789'012ULL}) {
            const unsigned __int128 exact = static_cast<unsigned __int128>(k) * 1'000'000'000ULL / fs;
            REQUIRE(timestamp_of_frame(k, fs) == static_cast<std::uint64_t>(exact));
        }
    }
    // 1e9 increments accumulated by the timebase never drift past one tick.
    std::uint64_t prev = 0;
    for (std::uint64_t k = 1'000'000'000ULL - 300000; k < 1'000'000'000ULL; ++k) {
        const std::uint64_t ts = timestamp_of_frame(k, 225000);
        REQUIRE(ts >= prev);
        const unsigned __int128 exact = static_cast<unsigned __int128>(k) * 1'000'000'000ULL / 225000;
        REQUIRE(ts == static_cast<std::uint64_t>(exact));
        prev = ts;
    }
}

TEST_CASE("frame_index_at_or_after inverts timestamp_of_frame", "[timebase][property]")
{
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<std::uint64_t> dist(0, 10'000'000'000'000ULL);
    for (int n = 0; n < 100000; ++n) {
        const std::uint64_t ts = dist(rng);
        const std::uint64_t k = frame_index_at_or_after(ts, 225000);
        REQUIRE(timestamp_of_frame(k, 225000) >= ts);
        if (k > 0) REQUIRE(timestamp_of_frame(k - 1, 225000) < ts);
    }
}

TEST_CASE("parallel sampling equals the serial reference", "[kernels][property]")
{
    const Scenario s = noisy_scenario();
    const DutModel model(s);
    const std::size_t frames = 3000;
    std::vector<std::uint16_t> a(frames * 18), b(frames * 18);
    kernels::sample_frames_serial(model, s.adc, s.rails, 17, a);
    kernels::sample_frames_parallel(model, s.adc, s.rails, 17, b);
    CHECK(a == b);

    std::vector<std::uint16_t> row(18);
    kernels::sample_frame(model, s.adc, s.rails, frame_time_s(17 + 5, 225000), row);
    CHECK(std::equal(row.begin(), row.end(), a.begin() + 5 * 18));
}

TEST_CASE("rolling median matches a brute-force window", "[kernels][property]")
{
    std::mt19937 rng(2);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 1 + rng() % 700;
        std::vector<std::int32_t> x(n);
        std::uniform_int_distribution<std::int32_t> vals(trial % 2 ? -5 : -100000, trial % 2 ? 5 : 100000);
        for (auto& v : x) v = vals(rng);
        std::size_t w = 1 + 2 * (rng() % ((n + 1) / 2));
        if (w > n) w -= 2;
        const auto ref = naive_rolling_median(x, w);
        REQUIRE(kernels::rolling_median_serial(x, w) == ref);
        REQUIRE(kernels::rolling_median_parallel(x, w) == ref);
    }
}

TEST_CASE("trapezoid product sum is exact in both forms", "[kernels][property]")
{
    std::mt19937 rng(4);
    for (const std::size_t n : {0u, 1u, 2u, 3u, 1000u, 250001u}) {
        std::vector<std::uint16_t> v(n), i(n);
        for (std::size_t k = 0; k < n; ++k) {
            v[k] = static_cast<std::uint16_t>(rng());
            i[k] = static_cast<std::uint16_t>(rng());
        }
        unsigned __int128 ref = 0;
        for (std::size_t k = 0; k + 1 < n; ++k) {
            ref += std::uint64_t{v[k]} * i[k] + std::uint64_t{v[k + 1]} * i[k + 1];
        }
        REQUIRE(kernels::trapezoid_product_sum_serial(v, i) == static_cast<std::uint64_t>(ref));
        REQUIRE(kernels::trapezoid_product_sum_parallel(v, i) == static_cast<std::uint64_t>(ref));
    }
}

TEST_CASE("ring buffer keeps the newest elements in order", "[ring_buffer]")
{
    CHECK_THROWS(RingBuffer<int>(0));
    RingBuffer<int> ring(4);
    for (int k = 0; k < 4; ++k) CHECK_FALSE(ring.push(k).has_value());
    CHECK(ring.full());
    for (int k = 4; k < 11; ++k) CHECK(ring.push(k).value() == k - 4);
    CHECK(ring[0] == 7);
    CHECK(ring[3] == 10);
    CHECK(ring.drain() == std::vector<int>{7, 8, 9, 10});
    CHECK(ring.size() == 0);
    ring.push(1);
    CHECK(ring.drain() == std::vector<int>{1});
}

TEST_CASE("spsc queue delivers every item once and in order", "[spsc_queue]")
{
    SpscQueue<int> q(3);
    std::vector<int> got;
    std::thread consumer([&] {
        for (int k = 0; k < 20000; ++k) got.push_back(q.pop());
    });
    for (int k = 0; k < 20000; ++k) q.push(k);
    consumer.join();
    REQUIRE(got.size() == 20000);
    for (int k = 0; k < 20000; ++k) REQUIRE(got[k] == k);
}
