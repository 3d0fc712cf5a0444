#include "railscope/analysis.hpp"

#include "railscope/error.hpp"
#include "railscope/kernels.hpp"
#include "railscope/timebase.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <string>

namespace railscope {

// -----------------------------------------------------------------------------
// TraceSeries
// -----------------------------------------------------------------------------

TraceSeries::TraceSeries(const TraceFile& trace) : trace_(&trace), rate_(trace.header.sample_rate_hz)
{
    const std::size_t ch = trace.header.channel_count;
    if (ch == 0 || rate_ == 0) throw DataError("trace header has zero channels or rate");
    std::uint64_t next = 0;
    for (std::size_t b = 0; b < trace.blocks.size(); ++b) {
        const SampleBlock& block = trace.blocks[b];
        if (block.codes.size() % ch != 0) throw DataError("ragged sample block");
        const std::uint64_t k0 = frame_index_at_or_after(block.timestamp_ns, rate_);
        if (timestamp_of_frame(k0, rate_) != block.timestamp_ns) throw DataError("block timestamp off the sample grid");
        if (b == 0) {
            first_frame_ = k0;
        } else if (k0 != next) {
            throw DataError("trace blocks are not contiguous");
        }
        const std::size_t frames = block.codes.size() / ch;
        next = k0 + frames;
        frames_ += frames;
    }
}

std::uint64_t TraceSeries::timestamp_ns(std::size_t j) const noexcept
{
    return timestamp_of_frame(first_frame_ + j, rate_);
}

std::vector<std::uint16_t> TraceSeries::channel(std::size_t ch) const
{
    const std::size_t width = trace_->header.channel_count;
    if (ch >= width) throw DataError("channel index out of range");
    std::vector<std::uint16_t> out;
    out.reserve(frames_);
    for (const SampleBlock& b : trace_->blocks) {
        for (std::size_t i = ch; i < b.codes.size(); i += width) out.push_back(b.codes[i]);
    }
    return out;
}

std::pair<std::size_t, std::size_t> TraceSeries::frame_range(std::uint64_t t0_ns, std::uint64_t t1_ns) const
{
    if (frames_ == 0) throw DataError("trace has no frames");
    if (t0_ns > t1_ns) throw DataError("window start after window end");
    if (t0_ns < timestamp_ns(0) || t1_ns > timestamp_ns(frames_ - 1)) throw DataError("window outside trace");
    const std::uint64_t begin = frame_index_at_or_after(t0_ns, rate_) - first_frame_;
    const std::uint64_t end = frame_index_at_or_after(t1_ns + 1, rate_) - first_frame_;
    return {static_cast<std::size_t>(begin), static_cast<std::size_t>(end)};
}

std::uint64_t seconds_to_ns(double s) noexcept
{
    return s <= 0.0 ? 0 : static_cast<std::uint64_t>(std::llround(s * 1e9));
}

namespace {

const RailConfig& rail_by_name(const TraceFile& trace, std::string_view name)
{
    return trace.header.rails[find_rail(trace.header.rails, name)];
}

std::pair<std::size_t, std::size_t> resolve_window(const TraceSeries& series, std::optional<double> t0_s,
                                                   std::optional<double> t1_s)
{
    if (!t0_s && !t1_s) return {0, series.frame_count()};
    if (series.frame_count() == 0) throw DataError("trace has no frames");
    const std::uint64_t t0 = t0_s ? seconds_to_ns(*t0_s) : series.timestamp_ns(0);
    const std::uint64_t t1 = t1_s ? seconds_to_ns(*t1_s) : series.timestamp_ns(series.frame_count() - 1);
    if ((t0_s && *t0_s < 0.0) || (t1_s && *t1_s < 0.0)) throw DataError("window outside trace");
    return series.frame_range(t0, t1);
}

std::vector<std::int32_t> to_units(std::span<const std::uint16_t> codes)
{
    return {codes.begin(), codes.end()};
}

std::uint64_t two_periods_ns(std::uint32_t rate)
{
    return (2 * kNanosPerSecond + rate - 1) / rate;
}

}  // namespace

// -----------------------------------------------------------------------------
// Power and energy
// -----------------------------------------------------------------------------

PowerSeries power_series(const TraceFile& trace, std::string_view rail_name)
{
    const RailConfig& rail = rail_by_name(trace, rail_name);
    const TraceSeries series(trace);
    const AdcConfig adc = trace.header.adc();
    const std::vector<std::uint16_t> v = series.channel(rail.v_channel);
    const std::vector<std::uint16_t> i = series.channel(rail.i_channel);

    PowerSeries out;
    out.rail_id = rail.rail_id;
    out.timestamps_ns.resize(v.size());
    out.power_w.resize(v.size());
    const auto n = static_cast<std::int64_t>(v.size());

    #pragma omp parallel for schedule(static)
    for (std::int64_t k = 0; k < n; ++k) {
        const auto j = static_cast<std::size_t>(k);
        out.timestamps_ns[j] = series.timestamp_ns(j);
        out.power_w[j] = code_to_voltage(v[j], adc) * sense_to_current(code_to_voltage(i[j], adc), rail);
    }
    return out;
}

double trapezoid_energy(std::span<const double> power_w, double dt_s) noexcept
{
    double sum = 0.0;
    for (std::size_t k = 0; k + 1 < power_w.size(); ++k) sum += 0.5 * (power_w[k] + power_w[k + 1]) * dt_s;
    return sum;
}

EnergyResult energy(const TraceFile& trace, std::string_view rail_name, std::optional<double> t0_s,
                    std::optional<double> t1_s)
{
    const RailConfig& rail = rail_by_name(trace, rail_name);
    const TraceSeries series(trace);
    const auto [begin, end] = resolve_window(series, t0_s, t1_s);
    const std::vector<std::uint16_t> v = series.channel(rail.v_channel);
    const std::vector<std::uint16_t> i = series.channel(rail.i_channel);

    const AdcConfig adc = trace.header.adc();
    EnergyResult r;
    r.frames = end - begin;
    r.code_sum = kernels::trapezoid_product_sum_parallel(std::span(v).subspan(begin, end - begin),
                                                         std::span(i).subspan(begin, end - begin));
    // One code-product unit: 1 V-LSB × 1 I-LSB over half a sample period.
    r.joules_per_unit = adc.lsb_volts() * current_lsb(rail, adc) / static_cast<double>(series.sample_rate_hz()) / 2.0;
    r.joules = static_cast<double>(r.code_sum) * r.joules_per_unit;
    if (series.frame_count() > 0) {
        r.t_from_ns = t0_s ? seconds_to_ns(*t0_s) : series.timestamp_ns(0);
        r.t_to_ns = t1_s ? seconds_to_ns(*t1_s) : series.timestamp_ns(series.frame_count() - 1);
    }
    return r;
}

// -----------------------------------------------------------------------------
// Spectra
// -----------------------------------------------------------------------------

std::string_view to_string(Window w) noexcept
{
    return w == Window::Hann ? "hann" : "rect";
}

double Spectrum::peak_frequency(bool skip_dc) const noexcept
{
    const std::size_t from = skip_dc ? 1 : 0;
    if (power.size() <= from) return 0.0;
    const auto it = std::max_element(power.begin() + static_cast<std::ptrdiff_t>(from), power.end());
    return static_cast<double>(it - power.begin()) * bin_hz;
}

Spectrum power_spectrum(std::span<const double> x, double sample_rate_hz, Window window)
{
    if (x.size() < 2) throw DataError("segment too short for a spectrum");
    std::size_t n = 1;
    while (n * 2 <= x.size()) n *= 2;

    std::vector<double> in(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n));
    double window_power = 1.0;
    if (window == Window::Hann) {
        double sum_sq = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double w = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n)));
            in[k] *= w;
            sum_sq += w * w;
        }
        window_power = sum_sq / static_cast<double>(n);
    }

    const std::size_t bins = n / 2 + 1;
    auto* out = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * bins));
    {
        // The FFTW planner is not reentrant.
        static std::mutex planner;
        fftw_plan plan;
        {
            std::lock_guard lock(planner);
            plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(), out, FFTW_ESTIMATE);
        }
        fftw_execute(plan);
        std::lock_guard lock(planner);
        fftw_destroy_plan(plan);
    }

    Spectrum s;
    s.window = window;
    s.segment_length = n;
    s.bin_hz = sample_rate_hz / static_cast<double>(n);
    s.power.resize(bins);
    const double scale = 1.0 / (static_cast<double>(n) * window_power);
    for (std::size_t k = 0; k < bins; ++k) {
        const double mag2 = out[k][0] * out[k][0] + out[k][1] * out[k][1];
        const bool edge = k == 0 || k == n / 2;
        s.power[k] = (edge ? 1.0 : 2.0) * mag2 * scale;
    }
    fftw_free(out);
    return s;
}

Spectrum psd(const TraceFile& trace, std::string_view rail_name, Quantity quantity, std::optional<double> t0_s,
             std::optional<double> t1_s, Window window)
{
    const RailConfig& rail = rail_by_name(trace, rail_name);
    const TraceSeries series(trace);
    const auto [begin, end] = resolve_window(series, t0_s, t1_s);
    const AdcConfig adc = trace.header.adc();
    const std::vector<std::uint16_t> codes =
        series.channel(quantity == Quantity::Voltage ? rail.v_channel : rail.i_channel);

    std::vector<double> x;
    x.reserve(end - begin);
    for (std::size_t k = begin; k < end; ++k) {
        const double v = code_to_voltage(codes[k], adc);
        x.push_back(quantity == Quantity::Voltage ? v : sense_to_current(v, rail));
    }
    return power_spectrum(x, series.sample_rate_hz(), window);
}

double alias_frequency(double f_hz, double sample_rate_hz) noexcept
{
    const double r = std::fmod(std::abs(f_hz), sample_rate_hz);
    return r <= sample_rate_hz / 2.0 ? r : sample_rate_hz - r;
}

// -----------------------------------------------------------------------------
// Detection
// -----------------------------------------------------------------------------

std::vector<DetectedEvent> detect_events(const EventSeries& series, const DetectParams& params)
{
    const std::size_t n = series.units.size();
    const double fs = series.sample_rate_hz;
    const auto w_raw = static_cast<std::size_t>(std::max(1.0, std::round(params.baseline_window_s * fs)));
    const std::size_t window = w_raw | 1u;
    if (window > n) throw DataError("baseline window longer than trace");

    const std::vector<std::int32_t> baseline = kernels::rolling_median_parallel(series.units, window);
    std::vector<std::int32_t> deviation(n);
    for (std::size_t k = 0; k < n; ++k) deviation[k] = std::abs(series.units[k] - baseline[k]);
    const std::vector<std::int32_t> mad = kernels::rolling_median_parallel(deviation, window);

    const double floor_units = params.sigma_floor_a ? *params.sigma_floor_a / series.amps_per_unit : 1.0;
    const double min_frames = params.min_duration_s ? *params.min_duration_s * fs : 2.0;

    std::vector<DetectedEvent> events;
    bool active = false;
    std::size_t start = 0;
    std::int32_t peak = 0;
    auto close = [&](std::size_t end) {
        if (static_cast<double>(end - start) + 1e-9 >= min_frames) {
            events.push_back({timestamp_of_frame(series.first_frame + start, series.sample_rate_hz),
                              timestamp_of_frame(series.first_frame + end, series.sample_rate_hz),
                              static_cast<double>(peak) * series.amps_per_unit, series.rail_id});
        }
        active = false;
    };

    for (std::size_t k = 0; k < n; ++k) {
        const double sigma = std::max(1.4826 * mad[k], floor_units);
        const double margin = params.k_sigma * sigma;
        const double excess = static_cast<double>(series.units[k] - baseline[k]);
        if (!active) {
            if (excess > margin) {
                active = true;
                start = k;
                peak = series.units[k];
            }
        } else if (excess < params.hysteresis_fraction * margin) {
            close(k);
        } else {
            peak = std::max(peak, series.units[k]);
        }
    }
    if (active) close(n);
    return events;
}

std::vector<DetectedEvent> detect_frames(const TraceFile& trace, std::string_view rail_name, const DetectParams& params)
{
    const RailConfig& rail = rail_by_name(trace, rail_name);
    const TraceSeries series(trace);
    const std::vector<std::int32_t> units = to_units(series.channel(rail.i_channel));
    return detect_events({units, current_lsb(rail, trace.header.adc()), series.sample_rate_hz(), series.first_frame(),
                          rail.rail_id},
                         params);
}

double MatchStats::recall() const noexcept
{
    return reference == 0 ? 0.0 : static_cast<double>(matched) / static_cast<double>(reference);
}

double MatchStats::precision() const noexcept
{
    return detected == 0 ? 0.0 : static_cast<double>(matched) / static_cast<double>(detected);
}

MatchStats match_events(std::span<const DetectedEvent> detected, std::span<const std::uint64_t> reference_starts_ns,
                        std::uint64_t tolerance_ns)
{
    MatchStats m;
    m.reference = reference_starts_ns.size();
    m.detected = detected.size();
    std::size_t i = 0, j = 0;
    while (i < detected.size() && j < reference_starts_ns.size()) {
        const std::uint64_t d = detected[i].t_start_ns;
        const std::uint64_t r = reference_starts_ns[j];
        if (d + tolerance_ns < r) {
            ++i;
        } else if (d > r + tolerance_ns) {
            ++j;
        } else {
            ++m.matched;
            ++i;
            ++j;
        }
    }
    return m;
}

// -----------------------------------------------------------------------------
// PMBus comparison
// -----------------------------------------------------------------------------

namespace {

struct HeldPmbus {
    std::size_t first = 0;              // first frame covered by a record
    std::vector<std::int32_t> units;    // per frame from `first`
    int exponent = 0;
    std::size_t records = 0;
};

HeldPmbus hold_pmbus(const TraceFile& trace, const RailConfig& rail, const TraceSeries& series)
{
    std::vector<PmbusRecord> recs;
    for (const PmbusRecord& r : trace.pmbus) {
        if (r.rail_id == rail.rail_id) recs.push_back(r);
    }
    if (recs.empty()) throw DataError("no PMBus records for rail '" + rail.name + "'");

    HeldPmbus h;
    h.records = recs.size();
    h.exponent = std::numeric_limits<int>::max();
    for (const PmbusRecord& r : recs) h.exponent = std::min(h.exponent, r.i.exponent());

    const std::size_t n = series.frame_count();
    while (h.first < n && series.timestamp_ns(h.first) < recs.front().timestamp_ns) ++h.first;
    if (h.first >= n) throw DataError("PMBus records for rail '" + rail.name + "' lie after the last frame");

    h.units.resize(n - h.first);
    std::size_t r = 0;
    for (std::size_t k = h.first; k < n; ++k) {
        const std::uint64_t ts = series.timestamp_ns(k);
        while (r + 1 < recs.size() && recs[r + 1].timestamp_ns <= ts) ++r;
        const std::int64_t u = std::int64_t{recs[r].i.mantissa()} << (recs[r].i.exponent() - h.exponent);
        if (u > std::numeric_limits<std::int32_t>::max() || u < std::numeric_limits<std::int32_t>::min()) {
            throw DataError("PMBus exponent spread too wide to compare");
        }
        h.units[k - h.first] = static_cast<std::int32_t>(u);
    }
    return h;
}

}  // namespace

std::vector<double> pmbus_hold_series(const TraceFile& trace, std::string_view rail_name)
{
    const RailConfig& rail = rail_by_name(trace, rail_name);
    const TraceSeries series(trace);
    const HeldPmbus h = hold_pmbus(trace, rail, series);
    std::vector<double> out(series.frame_count(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t k = 0; k < h.units.size(); ++k) out[h.first + k] = std::ldexp(h.units[k], h.exponent);
    return out;
}

PmbusComparison compare_pmbus(const TraceFile& trace, std::string_view rail_name, const DetectParams& params)
{
    const RailConfig& rail = rail_by_name(trace, rail_name);
    const TraceSeries series(trace);
    const HeldPmbus held = hold_pmbus(trace, rail, series);
    const AdcConfig adc = trace.header.adc();

    const std::vector<std::uint16_t> codes = series.channel(rail.i_channel);
    const std::span<const std::uint16_t> tail = std::span(codes).subspan(held.first);
    const double amps_per_code = current_lsb(rail, adc);
    const double pmbus_step = std::ldexp(1.0, held.exponent);

    PmbusComparison c;
    c.pmbus_samples = held.records;
    double abs_err = 0.0, hr_sum = 0.0, pm_sum = 0.0;
    for (std::size_t k = 0; k < tail.size(); ++k) {
        const double hr = static_cast<double>(tail[k]) * amps_per_code;
        const double pm = static_cast<double>(held.units[k]) * pmbus_step;
        abs_err += std::abs(pm - hr);
        hr_sum += hr;
        pm_sum += pm;
    }
    const auto count = static_cast<double>(tail.size());
    c.mean_abs_error_a = abs_err / count;
    c.highrate_mean_a = hr_sum / count;
    c.pmbus_mean_a = pm_sum / count;

    const std::vector<std::int32_t> hr_units = to_units(tail);
    const std::uint64_t first_frame = series.first_frame() + held.first;
    const auto reference = detect_events({hr_units, amps_per_code, series.sample_rate_hz(), first_frame, rail.rail_id}, params);
    const auto coarse = detect_events({held.units, pmbus_step, series.sample_rate_hz(), first_frame, rail.rail_id}, params);

    std::vector<std::uint64_t> starts;
    starts.reserve(reference.size());
    for (const DetectedEvent& e : reference) starts.push_back(e.t_start_ns);
    const MatchStats m = match_events(coarse, starts, two_periods_ns(series.sample_rate_hz()));
    c.reference_events = reference.size();
    c.pmbus_events = coarse.size();
    c.matched = m.matched;
    c.recall = m.recall();
    c.detectable = c.recall >= 0.5;
    return c;
}

}  // namespace railscope
