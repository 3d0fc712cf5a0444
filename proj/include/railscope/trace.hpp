#pragma once

#include "railscope/pmbus.hpp"
#include "railscope/rail_model.hpp"

#include <cstdint>
#include <vector>

namespace railscope {

/// One block of simultaneously sampled frames. `codes` is row-major:
/// frame f, channel c at codes[f * channel_count + c].
struct SampleBlock {
    std::uint64_t timestamp_ns = 0;   // first frame of the block
    std::vector<std::uint16_t> codes;

    [[nodiscard]] std::size_t frame_count(std::size_t channel_count) const noexcept
    {
        return channel_count == 0 ? 0 : codes.size() / channel_count;
    }

    bool operator==(const SampleBlock&) const = default;
};

enum class TriggerSource : std::uint8_t { ExternalLine = 0 };

struct TriggerEvent {
    std::uint64_t timestamp_ns = 0;
    TriggerSource source = TriggerSource::ExternalLine;

    bool operator==(const TriggerEvent&) const = default;
};

struct TraceHeader {
    static constexpr std::uint16_t kVersion = 1;

    std::uint16_t version = kVersion;
    std::uint8_t channel_count = kDefaultChannels;
    std::uint32_t sample_rate_hz = 225000;
    std::uint16_t block_frames = 64;
    std::vector<RailConfig> rails;

    /// ADC description implied by the header (10 V, 16 bit).
    [[nodiscard]] AdcConfig adc() const;

    bool operator==(const TraceHeader&) const = default;
};

struct TraceFile {
    TraceHeader header;
    std::vector<SampleBlock> blocks;
    std::vector<PmbusRecord> pmbus;
    std::vector<TriggerEvent> triggers;

    [[nodiscard]] std::size_t frame_count() const noexcept;

    bool operator==(const TraceFile&) const = default;
};

}  // namespace railscope
