#pragma once

// PMBus LINEAR11 codec and the coarse supply-controller telemetry path.

#include "railscope/dut_synth.hpp"

#include <cstdint>

namespace railscope {

/// 5-bit two's-complement exponent in bits 15..11, 11-bit two's-complement
/// mantissa in bits 10..0; value = mantissa * 2^exponent.
struct Linear11 {
    std::uint16_t raw = 0;

    static constexpr int kMinExponent = -16;
    static constexpr int kMaxExponent = 15;
    static constexpr int kMinMantissa = -1024;
    static constexpr int kMaxMantissa = 1023;

    [[nodiscard]] constexpr int exponent() const noexcept
    {
        const int e = (raw >> 11) & 0x1F;
        return e >= 16 ? e - 32 : e;
    }
    [[nodiscard]] constexpr int mantissa() const noexcept
    {
        const int m = raw & 0x7FF;
        return m >= 1024 ? m - 2048 : m;
    }

    bool operator==(const Linear11&) const = default;
};

/// m = round(value / 2^exponent) clamped to [-1024, 1023]. Exponent must lie
/// in [-16, 15] (std::invalid_argument otherwise).
Linear11 linear11_encode(double value, int exponent);
double linear11_decode(Linear11 x) noexcept;

/// Quantization step for a given exponent.
constexpr double linear11_step(int exponent) noexcept
{
    double s = 1.0;
    for (int i = 0; i < exponent; ++i) s *= 2.0;
    for (int i = 0; i > exponent; --i) s /= 2.0;
    return s;
}

struct PmbusExponents {
    int voltage = -8;   // 3.9 mV
    int current = -5;   // 31.25 mA

    bool operator==(const PmbusExponents&) const = default;
};

struct PmbusRecord {
    std::uint64_t timestamp_ns = 0;
    std::uint8_t rail_id = 0;
    Linear11 v;
    Linear11 i;

    bool operator==(const PmbusRecord&) const = default;
};

/// Instantaneous reading of a rail (no on-device averaging).
PmbusRecord pmbus_read(const DutModel& model, std::size_t rail_id, double t,
                       std::uint64_t timestamp_ns, PmbusExponents exps = {});

/// Checked variant on a raw scenario: unknown rail or t outside the scenario
/// throws DataError.
PmbusRecord pmbus_read(const Scenario& scenario, std::size_t rail_id, double t,
                       PmbusExponents exps = {});

}  // namespace railscope
