#pragma once

// =============================================================================
// Trace analytics: per-rail power and energy, spectra, frame-event detection
// and the high-rate versus PMBus comparison.
// =============================================================================

#include "railscope/trace.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace railscope {

enum class Quantity : std::uint8_t { Voltage, Current };

/// Frames of a trace laid out on one contiguous sample grid. Construction
/// throws DataError if blocks are ragged, overlap or leave gaps.
class TraceSeries {
public:
    explicit TraceSeries(const TraceFile& trace);

    [[nodiscard]] const TraceFile& trace() const noexcept { return *trace_; }
    [[nodiscard]] std::size_t frame_count() const noexcept { return frames_; }
    [[nodiscard]] std::uint64_t first_frame() const noexcept { return first_frame_; }
    [[nodiscard]] std::uint32_t sample_rate_hz() const noexcept { return rate_; }
    [[nodiscard]] std::uint64_t timestamp_ns(std::size_t j) const noexcept;

    /// Codes of one channel over the whole trace.
    [[nodiscard]] std::vector<std::uint16_t> channel(std::size_t ch) const;

    /// Index range [begin, end) of frames with timestamps in [t0_ns, t1_ns].
    /// Throws DataError if the window is empty-inverted or leaves the trace.
    [[nodiscard]] std::pair<std::size_t, std::size_t> frame_range(std::uint64_t t0_ns,
                                                                  std::uint64_t t1_ns) const;

private:
    const TraceFile* trace_;
    std::size_t frames_ = 0;
    std::uint64_t first_frame_ = 0;
    std::uint32_t rate_ = 1;
};

/// Seconds to the nearest nanosecond (negative clamps to 0).
std::uint64_t seconds_to_ns(double s) noexcept;

// -----------------------------------------------------------------------------
// Power and energy
// -----------------------------------------------------------------------------

struct PowerSeries {
    std::uint8_t rail_id = 0;
    std::vector<std::uint64_t> timestamps_ns;
    std::vector<double> power_w;
};

/// Same-frame V × I in watts (channels are simultaneously sampled).
PowerSeries power_series(const TraceFile& trace, std::string_view rail);

/// Trapezoidal integral of uniformly spaced samples.
double trapezoid_energy(std::span<const double> power_w, double dt_s) noexcept;

struct EnergyResult {
    double joules = 0.0;
    // Exact integer Σ (P_k + P_{k+1}) in code-product units; joules is this
    // times joules_per_unit. Sums over adjacent grid-aligned windows add exactly.
    std::uint64_t code_sum = 0;
    double joules_per_unit = 0.0;
    std::uint64_t t_from_ns = 0;
    std::uint64_t t_to_ns = 0;
    std::size_t frames = 0;
};

/// Energy over frames with timestamps in [t0, t1] (seconds; whole trace when
/// unset). Throws DataError when the window is outside the trace.
EnergyResult energy(const TraceFile& trace, std::string_view rail,
                    std::optional<double> t0_s = std::nullopt,
                    std::optional<double> t1_s = std::nullopt);

// -----------------------------------------------------------------------------
// Spectra
// -----------------------------------------------------------------------------

enum class Window : std::uint8_t { Rect, Hann };

std::string_view to_string(Window w) noexcept;

struct Spectrum {
    double bin_hz = 0.0;
    // One-sided power per bin, 0 .. f_s/2. With the rect window the bins sum
    // to Σ x² over the analysed segment; Hann is scaled to the same total for
    // white input.
    std::vector<double> power;
    Window window = Window::Rect;
    std::size_t segment_length = 0;

    /// Frequency of the largest bin, optionally ignoring bin 0.
    [[nodiscard]] double peak_frequency(bool skip_dc) const noexcept;
};

/// Truncates x to the largest power of two (>= 2) and transforms it.
Spectrum power_spectrum(std::span<const double> x, double sample_rate_hz, Window window);

/// Spectrum of one rail channel in engineering units over [t0, t1].
Spectrum psd(const TraceFile& trace, std::string_view rail, Quantity quantity,
             std::optional<double> t0_s = std::nullopt, std::optional<double> t1_s = std::nullopt,
             Window window = Window::Rect);

/// Folds f into [0, f_s/2].
double alias_frequency(double f_hz, double sample_rate_hz) noexcept;

// -----------------------------------------------------------------------------
// Frame-event detection
// -----------------------------------------------------------------------------

struct DetectParams {
    double baseline_window_s = 0.010;
    double k_sigma = 6.0;
    std::optional<double> min_duration_s;   // default: two sample periods
    double hysteresis_fraction = 0.5;       // exit at this fraction of the entry margin
    std::optional<double> sigma_floor_a;    // default: one quantum of the series
};

struct DetectedEvent {
    std::uint64_t t_start_ns = 0;
    std::uint64_t t_end_ns = 0;   // first frame back below the exit threshold
    double peak_current_a = 0.0;
    std::uint8_t rail_id = 0;

    bool operator==(const DetectedEvent&) const = default;
};

/// Detector over an integer-valued, uniformly sampled current series whose
/// value in amperes is units × amps_per_unit.
struct EventSeries {
    std::span<const std::int32_t> units;
    double amps_per_unit = 1.0;
    std::uint32_t sample_rate_hz = 1;
    std::uint64_t first_frame = 0;
    std::uint8_t rail_id = 0;
};

std::vector<DetectedEvent> detect_events(const EventSeries& series, const DetectParams& params);

/// Events on the rail's current channel, sorted and non-overlapping.
std::vector<DetectedEvent> detect_frames(const TraceFile& trace, std::string_view rail,
                                         const DetectParams& params = {});

struct MatchStats {
    std::size_t reference = 0;
    std::size_t detected = 0;
    std::size_t matched = 0;
    // Both are 0 when their denominator is 0.
    [[nodiscard]] double recall() const noexcept;
    [[nodiscard]] double precision() const noexcept;
};

/// Greedy one-to-one matching of event starts within `tolerance_ns`.
MatchStats match_events(std::span<const DetectedEvent> detected,
                        std::span<const std::uint64_t> reference_starts_ns,
                        std::uint64_t tolerance_ns);

// -----------------------------------------------------------------------------
// PMBus comparison
// -----------------------------------------------------------------------------

struct PmbusComparison {
    double mean_abs_error_a = 0.0;
    double highrate_mean_a = 0.0;
    double pmbus_mean_a = 0.0;
    std::size_t reference_events = 0;   // detect_frames on the high-rate series
    std::size_t pmbus_events = 0;       // detect_events on the held PMBus series
    std::size_t matched = 0;
    double recall = 0.0;
    bool detectable = false;            // recall >= 0.5
    std::size_t pmbus_samples = 0;
};

/// Zero-order-hold of the rail's PMBus current onto the frame grid, starting at
/// the first PMBus record. Throws DataError if the rail has no PMBus records.
PmbusComparison compare_pmbus(const TraceFile& trace, std::string_view rail,
                              const DetectParams& params = {});

/// Held PMBus current (amperes) on the frame grid; NaN before the first record.
std::vector<double> pmbus_hold_series(const TraceFile& trace, std::string_view rail);

}  // namespace railscope
