#pragma once

// =============================================================================
// Sense-circuit math: ADC code <-> voltage, shunt/gain current conversion and
// the channel-to-rail map of the 18-channel front end.
// =============================================================================

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace railscope {

inline constexpr int kDefaultChannels = 18;

/// Three six-channel simultaneously sampling 16-bit converters, unipolar 0..10 V.
struct AdcConfig {
    double full_scale_volts = 10.0;
    int bits = 16;
    std::uint32_t sample_rate_hz = 225000;
    int channels = kDefaultChannels;

    static constexpr std::uint32_t kMaxSampleRateHz = 630000;

    [[nodiscard]] double lsb_volts() const noexcept;
    [[nodiscard]] std::uint32_t max_code() const noexcept { return (1u << bits) - 1u; }

    /// Throws DataError when a field is outside the supported hardware envelope.
    void validate() const;

    bool operator==(const AdcConfig&) const = default;
};

enum class RailGroup : std::uint8_t { DUT = 0, PHY1 = 1, PHY2 = 2, HDMI = 3 };

std::string_view to_string(RailGroup g) noexcept;
RailGroup rail_group_from_string(std::string_view s);

struct RailConfig {
    std::uint8_t rail_id = 0;
    std::string name;
    double shunt_ohms = 0.1;
    double amp_gain = 50.0;
    std::uint8_t v_channel = 0;
    std::uint8_t i_channel = 1;
    RailGroup group = RailGroup::DUT;
    // Static relative deviation of the physical shunt from its nominal value
    // (e.g. +0.01 for a 1% part at its limit). Only the sampled sense voltage
    // sees it; conversions always use the nominal value.
    double shunt_error = 0.0;

    bool operator==(const RailConfig&) const = default;
};

double code_to_voltage(std::uint16_t code, const AdcConfig& adc) noexcept;

/// Round-to-nearest with clamping to the code range. NaN maps to 0.
std::uint16_t quantize_voltage(double volts, const AdcConfig& adc) noexcept;

double sense_to_current(double v_sense, const RailConfig& rail) noexcept;

/// Inverse of sense_to_current for the physical shunt (nominal × (1 + shunt_error)).
double current_to_sense(double amperes, const RailConfig& rail) noexcept;

/// Current resolution of one ADC step on this rail's sense channel.
double current_lsb(const RailConfig& rail, const AdcConfig& adc) noexcept;

/// Checks positive shunt/gain, channel range, v != i, no shared channels and
/// rail_id == position. Throws DataError naming the offending rail.
void validate_rails(std::span<const RailConfig> rails, const AdcConfig& adc);

/// Index of the rail called `name`; throws DataError if absent.
std::size_t find_rail(std::span<const RailConfig> rails, std::string_view name);

/// Nine rails on 18 channels: five DUT rails plus core and VccIO of each PHY.
/// Rail r uses channels 2r (voltage) and 2r+1 (current); gain 50, 0.1 ohm.
std::vector<RailConfig> default_rail_map();

}  // namespace railscope
