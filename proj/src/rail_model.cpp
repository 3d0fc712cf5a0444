#include "railscope/rail_model.hpp"

#include "railscope/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace railscope {

double AdcConfig::lsb_volts() const noexcept
{
    return full_scale_volts / std::ldexp(1.0, bits);
}

void AdcConfig::validate() const
{
    if (!(full_scale_volts > 0.0)) throw DataError("adc: full_scale_volts must be > 0");
    if (bits < 1 || bits > 16) throw DataError("adc: bits must be in [1, 16]");
    if (sample_rate_hz == 0 || sample_rate_hz > kMaxSampleRateHz) {
        throw DataError("adc: sample_rate_hz must be in [1, 630000]");
    }
    if (channels < 1 || channels > 255) throw DataError("adc: channels must be in [1, 255]");
}

std::string_view to_string(RailGroup g) noexcept
{
    switch (g) {
        case RailGroup::DUT: return "DUT";
        case RailGroup::PHY1: return "PHY1";
        case RailGroup::PHY2: return "PHY2";
        case RailGroup::HDMI: return "HDMI";
    }
    return "?";
}

RailGroup rail_group_from_string(std::string_view s)
{
    if (s == "DUT") return RailGroup::DUT;
    if (s == "PHY1") return RailGroup::PHY1;
    if (s == "PHY2") return RailGroup::PHY2;
    if (s == "HDMI") return RailGroup::HDMI;
    throw DataError("unknown rail group '" + std::string(s) + "'");
}

double code_to_voltage(std::uint16_t code, const AdcConfig& adc) noexcept
{
    return static_cast<double>(code) * adc.lsb_volts();
}

std::uint16_t quantize_voltage(double volts, const AdcConfig& adc) noexcept
{
    const double steps = std::round(volts / adc.lsb_volts());
    if (!(steps > 0.0)) return 0;
    const auto top = static_cast<double>(adc.max_code());
    return static_cast<std::uint16_t>(steps >= top ? top : steps);
}

double sense_to_current(double v_sense, const RailConfig& rail) noexcept
{
    return v_sense / (rail.amp_gain * rail.shunt_ohms);
}

double current_to_sense(double amperes, const RailConfig& rail) noexcept
{
    return amperes * rail.amp_gain * rail.shunt_ohms * (1.0 + rail.shunt_error);
}

double current_lsb(const RailConfig& rail, const AdcConfig& adc) noexcept
{
    return sense_to_current(adc.lsb_volts(), rail);
}

void validate_rails(std::span<const RailConfig> rails, const AdcConfig& adc)
{
    std::vector<int> owner(static_cast<std::size_t>(std::max(adc.channels, 0)), -1);
    for (std::size_t r = 0; r < rails.size(); ++r) {
        const RailConfig& rail = rails[r];
        const std::string who = "rail '" + rail.name + "'";
        if (rail.rail_id != r) throw DataError(who + ": rail_id must equal its position");
        if (rail.name.empty() || rail.name.size() > 255) throw DataError(who + ": name length must be 1..255");
        if (!(rail.shunt_ohms > 0.0)) throw DataError(who + ": shunt_ohms must be > 0");
        if (!(rail.amp_gain > 0.0)) throw DataError(who + ": amp_gain must be > 0");
        if (!std::isfinite(rail.shunt_error) || rail.shunt_error <= -1.0) {
            throw DataError(who + ": shunt_error must be > -1");
        }
        if (rail.v_channel == rail.i_channel) throw DataError(who + ": v_channel equals i_channel");
        for (const std::uint8_t ch : {rail.v_channel, rail.i_channel}) {
            if (ch >= owner.size()) throw DataError(who + ": channel " + std::to_string(ch) + " out of range");
            if (owner[ch] >= 0) {
                throw DataError(who + ": channel " + std::to_string(ch) + " already used by rail '" +
                                rails[static_cast<std::size_t>(owner[ch])].name + "'");
            }
            owner[ch] = static_cast<int>(r);
        }
        for (std::size_t q = 0; q < r; ++q) {
            if (rails[q].name == rail.name) throw DataError(who + ": duplicate name");
        }
    }
}

std::size_t find_rail(std::span<const RailConfig> rails, std::string_view name)
{
    const auto it = std::find_if(rails.begin(), rails.end(),
                                 [&](const RailConfig& r) { return r.name == name; });
    if (it == rails.end()) throw DataError("unknown rail '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - rails.begin());
}

std::vector<RailConfig> default_rail_map()
{
    struct Entry {
        const char* name;
        RailGroup group;
    };
    static constexpr Entry kRails[] = {
        {"pl_core", RailGroup::DUT},   {"pl_aux", RailGroup::DUT},    {"bram", RailGroup::DUT},
        {"ps_core", RailGroup::DUT},   {"ps_aux", RailGroup::DUT},    {"phy1_core", RailGroup::PHY1},
        {"phy1_io", RailGroup::PHY1},  {"phy2_core", RailGroup::PHY2}, {"phy2_io", RailGroup::PHY2},
    };
    std::vector<RailConfig> rails;
    for (std::size_t r = 0; r < std::size(kRails); ++r) {
        RailConfig cfg;
        cfg.rail_id = static_cast<std::uint8_t>(r);
        cfg.name = kRails[r].name;
        cfg.group = kRails[r].group;
        cfg.shunt_ohms = 0.1;
        cfg.amp_gain = 50.0;
        cfg.v_channel = static_cast<std::uint8_t>(2 * r);
        cfg.i_channel = static_cast<std::uint8_t>(2 * r + 1);
        rails.push_back(std::move(cfg));
    }
    return rails;
}

}  // namespace railscope
