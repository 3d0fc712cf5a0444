#pragma once

#include <cstdint>

namespace railscope {

inline constexpr std::uint64_t kNanosPerSecond = 1'000'000'000ULL;

/// floor(k * 1e9 / rate) in exact integer arithmetic. Splitting k into whole
/// seconds and a remainder keeps the product far from overflow, so the result
/// never drifts from the ideal grid by a full nanosecond.
constexpr std::uint64_t timestamp_of_frame(std::uint64_t k, std::uint32_t rate_hz) noexcept
{
    const std::uint64_t whole = k / rate_hz;
    const std::uint64_t rem = k % rate_hz;
    return whole * kNanosPerSecond + (rem * kNanosPerSecond) / rate_hz;
}

/// Smallest k with timestamp_of_frame(k) >= ts_ns.
constexpr std::uint64_t frame_index_at_or_after(std::uint64_t ts_ns, std::uint32_t rate_hz) noexcept
{
    const std::uint64_t whole = ts_ns / kNanosPerSecond;
    const std::uint64_t rem = ts_ns % kNanosPerSecond;
    return whole * rate_hz + (rem * rate_hz + kNanosPerSecond - 1) / kNanosPerSecond;
}

/// Frame time in seconds as used for waveform evaluation (k / rate).
constexpr double frame_time_s(std::uint64_t k, std::uint32_t rate_hz) noexcept
{
    return static_cast<double>(k) / static_cast<double>(rate_hz);
}

}  // namespace railscope
