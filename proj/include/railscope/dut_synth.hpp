#pragma once

// =============================================================================
// Deterministic synthetic device under test. Every rail waveform is a pure
// function of (scenario, rail, t): baseline + workload phases + Ethernet frame
// bursts + switching ripple + seeded Gaussian noise, with an optional parasitic
// ground offset on the rail voltage.
// =============================================================================

#include "railscope/rail_model.hpp"

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace railscope {

inline constexpr double kGigabitLineRate = 1e9;
inline constexpr std::uint32_t kMinFrameBytes = 64;
inline constexpr std::uint32_t kMaxFrameBytes = 1518;
// Preamble/SFD (8) plus minimum inter-frame gap (12).
inline constexpr std::uint32_t kFrameOverheadBytes = 20;

struct WorkloadPhase {
    double t_start_s = 0.0;
    double t_end_s = 0.0;
    double extra_current_a = 0.0;

    bool operator==(const WorkloadPhase&) const = default;
};

struct RailWaveformSpec {
    std::uint8_t rail_id = 0;
    double nominal_volts = 1.0;
    double idle_current_a = 0.0;
    double ripple_amp_a = 0.0;
    double noise_rms_a = 0.0;
    bool ground_referenced = false;
    std::vector<WorkloadPhase> phases;

    bool operator==(const RailWaveformSpec&) const = default;
};

enum class FrameDirection : std::uint8_t { Ingress, Egress };

std::string_view to_string(FrameDirection d) noexcept;
FrameDirection frame_direction_from_string(std::string_view s);

struct FrameSchedule {
    std::uint8_t rail_id = 0;
    FrameDirection direction = FrameDirection::Ingress;
    std::uint32_t frame_bytes = kMaxFrameBytes;
    double period_s = 1e-3;
    std::uint32_t count = 0;
    double first_arrival_s = 0.0;
    // Zero models traffic that leaves no trace on the rail (egress on PHY2).
    double burst_current_a = 0.0;

    bool operator==(const FrameSchedule&) const = default;
};

enum class TriggerMode : std::uint8_t { AfterNFrames, AtTime };

struct TriggerSpec {
    TriggerMode mode = TriggerMode::AtTime;
    std::uint32_t n = 0;          // AfterNFrames: ingress frame count
    std::size_t schedule = 0;     // AfterNFrames: index into Scenario::frames
    double t_s = 0.0;             // AtTime

    bool operator==(const TriggerSpec&) const = default;
};

struct ActivitySegment {
    double t_start_s = 0.0;
    double t_end_s = 0.0;
    double current_a = 0.0;

    bool operator==(const ActivitySegment&) const = default;
};

/// Shared-return parasitic: r_ground × (system activity current) appears as a
/// voltage error on ground-referenced rails.
struct GroundOffsetSpec {
    double r_ground_ohms = 0.0;
    std::vector<ActivitySegment> activity;

    [[nodiscard]] double activity_current(double t) const noexcept;

    bool operator==(const GroundOffsetSpec&) const = default;
};

struct Scenario {
    double duration_s = 1.0;
    std::uint64_t seed = 0;
    AdcConfig adc;
    std::vector<RailConfig> rails;
    std::vector<RailWaveformSpec> waveforms;   // one per rail, same order
    std::vector<FrameSchedule> frames;
    std::optional<TriggerSpec> trigger;
    double ripple_hz = 500e3;
    double line_rate_bps = kGigabitLineRate;
    GroundOffsetSpec ground_offset;

    /// Throws DataError on the first violated invariant.
    void validate() const;

    bool operator==(const Scenario&) const = default;
};

struct RailSample {
    double volts = 0.0;
    double amperes = 0.0;
};

struct FrameInterval {
    double t_start = 0.0;
    double t_end = 0.0;
};

/// Wire time of one frame including preamble and inter-frame gap.
/// Throws DataError for sizes outside [64, 1518] or a non-positive rate.
double frame_duration(std::uint32_t frame_bytes, double line_rate_bps);

std::vector<FrameInterval> frame_event_times(const FrameSchedule& schedule,
                                             double line_rate_bps = kGigabitLineRate);

/// Scenario trigger instant in seconds. Throws DataError("no trigger") when the
/// scenario has none, and when an after-n-frames trigger asks for more frames
/// than are scheduled.
double trigger_time(const Scenario& scenario);

/// Unit-variance Gaussian keyed by (seed, stream, t). Identical keys give
/// identical values on every call and every thread.
double keyed_gaussian(std::uint64_t seed, std::uint64_t stream, double t) noexcept;

/// Validated, pre-indexed scenario for repeated evaluation.
class DutModel {
public:
    explicit DutModel(Scenario scenario);

    [[nodiscard]] const Scenario& scenario() const noexcept { return scenario_; }
    [[nodiscard]] std::size_t rail_count() const noexcept { return scenario_.rails.size(); }

    /// No range checks; callers guarantee rail_id < rail_count().
    [[nodiscard]] RailSample eval(std::size_t rail_id, double t) const noexcept;

    /// Current of rail_id with noise left out (the deterministic part).
    [[nodiscard]] double deterministic_current(std::size_t rail_id, double t) const noexcept;

private:
    struct Burst {
        double first = 0.0;
        double period = 0.0;
        double duration = 0.0;
        double current = 0.0;
        std::uint32_t count = 0;
    };

    Scenario scenario_;
    std::vector<std::vector<Burst>> bursts_;
};

/// Checked single-point evaluation: throws DataError for an unknown rail or
/// t outside [0, duration_s].
RailSample eval_rail(const Scenario& scenario, std::size_t rail_id, double t);

}  // namespace railscope
