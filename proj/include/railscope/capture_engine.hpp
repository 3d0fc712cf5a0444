#pragma once

// =============================================================================
// Acquisition firmware model: all channels sampled at one instant per frame,
// frames grouped into timestamped blocks, a pre-trigger ring of blocks, a
// digital trigger line and round-robin PMBus polling interleaved with sampling.
// =============================================================================

#include "railscope/dut_synth.hpp"
#include "railscope/pmbus.hpp"
#include "railscope/trace.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace railscope {

inline constexpr double kMinPretriggerS = 0.150;
inline constexpr std::uint32_t kMaxPmbusRateSps = 1000;

struct CaptureConfig {
    AdcConfig adc;
    std::vector<RailConfig> rails;
    std::uint32_t block_frames = 64;
    double pretrigger_s = 0.160;
    double posttrigger_s = 0.5;
    std::uint32_t pmbus_rate_sps = 125;   // aggregate over pmbus_rails
    std::vector<std::uint8_t> pmbus_rails;
    PmbusExponents pmbus_exponents;

    void validate() const;
};

/// Capture-related knobs carried by a scenario document. Unset fields take the
/// CaptureConfig defaults.
struct CaptureSettings {
    std::optional<std::uint32_t> block_frames;
    std::optional<double> pretrigger_s;
    std::optional<double> posttrigger_s;
    std::optional<std::uint32_t> pmbus_rate_sps;
    std::optional<std::vector<std::string>> pmbus_rails;
    std::optional<PmbusExponents> pmbus_exponents;

    bool operator==(const CaptureSettings&) const = default;
};

/// Rails whose PMBus telemetry is polled when the document names none.
std::vector<std::string> default_pmbus_rail_names();

CaptureConfig make_capture_config(const Scenario& scenario, const CaptureSettings& settings = {});

struct PmbusPoll {
    std::uint64_t timestamp_ns = 0;
    double t = 0.0;
    std::uint8_t rail_id = 0;
};

/// Round-robin polls with timestamps in [t_begin, t_end]; poll i happens at
/// i / pmbus_rate_sps and reads pmbus_rails[i % n].
std::vector<PmbusPoll> pmbus_poll_schedule(const CaptureConfig& config, double t_begin, double t_end);

/// Frames whose time k / f_s lies within [0, duration_s].
std::uint64_t scenario_frame_count(const Scenario& scenario);

/// First sample tick at or after the scenario trigger time.
std::uint64_t trigger_frame(const Scenario& scenario);

/// Block range [first_block, end_block) the capture will contain.
struct CaptureWindow {
    std::uint64_t trigger_frame = 0;
    std::uint64_t first_block = 0;
    std::uint64_t end_block = 0;
    bool truncated_start = false;   // pre-trigger window reached before t = 0
    bool truncated_end = false;     // scenario ended before posttrigger_s
};

/// Throws DataError("no trigger") when the trigger does not fire in the scenario.
CaptureWindow plan_capture(const Scenario& scenario, const CaptureConfig& config);

/// ceil(pretrigger frames / block_frames) + 1, enough for any trigger phase.
std::size_t ring_capacity_blocks(const CaptureConfig& config);

/// Samples blocks [first_block, end_block) directly, with no ring or trigger
/// logic. Reference recording for the ring-buffer equivalence tests.
std::vector<SampleBlock> record_blocks(const DutModel& model, const CaptureConfig& config,
                                       std::uint64_t first_block, std::uint64_t end_block);

enum class Execution { Serial, Pipelined };

struct CaptureResult {
    TraceFile trace;
    CaptureWindow window;
    std::uint64_t frames_sampled = 0;   // including frames evicted from the ring
};

/// Runs the firmware model until the post-trigger span is stored or the
/// scenario ends. Serial and Pipelined produce identical traces. Progress lines
/// go to `log` when non-null.
CaptureResult run_capture(const Scenario& scenario, const CaptureConfig& config,
                          Execution execution = Execution::Pipelined, std::ostream* log = nullptr);

/// Header describing `config` (nominal rail table, rates).
TraceHeader make_trace_header(const CaptureConfig& config);

}  // namespace railscope
