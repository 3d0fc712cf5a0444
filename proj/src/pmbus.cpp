#include "railscope/pmbus.hpp"

#include "railscope/error.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace railscope {

Linear11 linear11_encode(double value, int exponent)
{
    if (exponent < Linear11::kMinExponent || exponent > Linear11::kMaxExponent) {
        throw std::invalid_argument("LINEAR11 exponent out of range: " + std::to_string(exponent));
    }
    double m = std::round(std::ldexp(value, -exponent));
    if (std::isnan(m)) m = 0.0;
    m = std::clamp(m, double{Linear11::kMinMantissa}, double{Linear11::kMaxMantissa});
    const auto mantissa = static_cast<int>(m);
    const auto e_bits = static_cast<std::uint16_t>((exponent & 0x1F) << 11);
    const auto m_bits = static_cast<std::uint16_t>(mantissa & 0x7FF);
    return Linear11{static_cast<std::uint16_t>(e_bits | m_bits)};
}

double linear11_decode(Linear11 x) noexcept
{
    return std::ldexp(static_cast<double>(x.mantissa()), x.exponent());
}

PmbusRecord pmbus_read(const DutModel& model, std::size_t rail_id, double t,
                       std::uint64_t timestamp_ns, PmbusExponents exps)
{
    const RailSample s = model.eval(rail_id, t);
    return PmbusRecord{timestamp_ns, static_cast<std::uint8_t>(rail_id),
                       linear11_encode(s.volts, exps.voltage), linear11_encode(s.amperes, exps.current)};
}

PmbusRecord pmbus_read(const Scenario& scenario, std::size_t rail_id, double t, PmbusExponents exps)
{
    if (rail_id >= scenario.rails.size()) throw DataError("unknown rail_id " + std::to_string(rail_id));
    if (!(t >= 0.0 && t <= scenario.duration_s)) throw DataError("t outside [0, duration_s]");
    const DutModel model(scenario);
    return pmbus_read(model, rail_id, t, static_cast<std::uint64_t>(std::llround(t * 1e9)), exps);
}

}  // namespace railscope
