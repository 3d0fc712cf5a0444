#pragma once

// =============================================================================
// Raw little-endian capture format (.ptrc).
//
//   header   "PTRC" u16 version u8 channel_count u32 sample_rate_hz
//            u16 block_frames u8 rail_count
//            rail_count × { u8 name_len, name bytes, u32 shunt_micro_ohms,
//                           u32 gain_milli, u8 v_channel, u8 i_channel, u8 group }
//   records  0x01 block   { u64 timestamp_ns, u16 frame_count,
//                           frame_count × channel_count × u16 codes }
//            0x02 pmbus   { u64 timestamp_ns, u8 rail_id, u16 v, u16 i }
//            0x03 trigger { u64 timestamp_ns, u8 source }
//
// Records are written in nondecreasing timestamp order (ties: block, pmbus,
// trigger). The stream is append-only; a torn final record is dropped on read.
// =============================================================================

#include "railscope/trace.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace railscope {

inline constexpr std::uint8_t kTagBlock = 0x01;
inline constexpr std::uint8_t kTagPmbus = 0x02;
inline constexpr std::uint8_t kTagTrigger = 0x03;

inline constexpr std::size_t kFixedHeaderBytes = 4 + 2 + 1 + 4 + 2 + 1;
inline constexpr std::size_t kPmbusRecordBytes = 1 + 8 + 1 + 2 + 2;
inline constexpr std::size_t kTriggerRecordBytes = 1 + 8 + 1;

constexpr std::size_t block_record_bytes(std::size_t frames, std::size_t channels) noexcept
{
    return 1 + 8 + 2 + frames * channels * 2;
}

/// Size of the encoded header for this rail table.
std::size_t header_bytes(const TraceHeader& header) noexcept;

/// Throws DataError for traces that cannot be represented (unsorted records,
/// ragged blocks, names over 255 bytes, ...).
std::vector<std::uint8_t> encode(const TraceFile& trace);

struct DecodeResult {
    TraceFile trace;
    std::size_t warnings = 0;   // dropped torn tail records
};

/// Throws DataError: "not a trace", "unsupported trace version N",
/// "truncated header", "corrupt at offset N".
DecodeResult decode(std::span<const std::uint8_t> bytes);

void write_trace_file(const std::filesystem::path& path, const TraceFile& trace);
DecodeResult read_trace_file(const std::filesystem::path& path);

/// One row per frame: timestamp_ns, then <rail>_V,<rail>_I for every selected
/// rail (all rails when `rail_names` is empty). Raw codes, or volts/amperes
/// with six decimals when `engineering_units` is set.
std::string export_csv(const TraceFile& trace, std::span<const std::string> rail_names,
                       bool engineering_units);

}  // namespace railscope
