#include "railscope/dut_synth.hpp"

#include "railscope/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <string>

namespace railscope {

namespace {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Uniform in (0, 1] from the top 53 bits.
double unit_open(std::uint64_t h) noexcept
{
    return (static_cast<double>(h >> 11) + 1.0) * 0x1.0p-53;
}

}  // namespace

std::string_view to_string(FrameDirection d) noexcept
{
    return d == FrameDirection::Ingress ? "ingress" : "egress";
}

FrameDirection frame_direction_from_string(std::string_view s)
{
    if (s == "ingress") return FrameDirection::Ingress;
    if (s == "egress") return FrameDirection::Egress;
    throw DataError("unknown frame direction '" + std::string(s) + "'");
}

double GroundOffsetSpec::activity_current(double t) const noexcept
{
    double sum = 0.0;
    for (const ActivitySegment& seg : activity) {
        if (t >= seg.t_start_s && t < seg.t_end_s) sum += seg.current_a;
    }
    return sum;
}

double frame_duration(std::uint32_t frame_bytes, double line_rate_bps)
{
    if (frame_bytes < kMinFrameBytes || frame_bytes > kMaxFrameBytes) {
        throw DataError("frame_bytes " + std::to_string(frame_bytes) + " outside Ethernet limits [64, 1518]");
    }
    if (!(line_rate_bps > 0.0)) throw DataError("line rate must be > 0");
    return static_cast<double>(frame_bytes + kFrameOverheadBytes) * 8.0 / line_rate_bps;
}

std::vector<FrameInterval> frame_event_times(const FrameSchedule& schedule, double line_rate_bps)
{
    const double duration = frame_duration(schedule.frame_bytes, line_rate_bps);
    std::vector<FrameInterval> out;
    out.reserve(schedule.count);
    for (std::uint32_t k = 0; k < schedule.count; ++k) {
        const double start = schedule.first_arrival_s + static_cast<double>(k) * schedule.period_s;
        out.push_back({start, start + duration});
    }
    return out;
}

double trigger_time(const Scenario& scenario)
{
    if (!scenario.trigger) throw DataError("no trigger");
    const TriggerSpec& trig = *scenario.trigger;
    if (trig.mode == TriggerMode::AtTime) return trig.t_s;

    if (trig.schedule >= scenario.frames.size()) throw DataError("trigger: schedule index out of range");
    const FrameSchedule& sched = scenario.frames[trig.schedule];
    if (sched.direction != FrameDirection::Ingress) throw DataError("trigger: schedule is not ingress");
    if (trig.n == 0 || trig.n > sched.count) {
        throw DataError("trigger: n=" + std::to_string(trig.n) + " exceeds scheduled count " +
                        std::to_string(sched.count));
    }
    const double start = sched.first_arrival_s + static_cast<double>(trig.n - 1) * sched.period_s;
    return start + frame_duration(sched.frame_bytes, scenario.line_rate_bps);
}

double keyed_gaussian(std::uint64_t seed, std::uint64_t stream, double t) noexcept
{
    const std::uint64_t key = splitmix64(seed ^ splitmix64(stream + 0x632BE59BD9B4E019ULL)) ^
                              std::bit_cast<std::uint64_t>(t);
    const std::uint64_t h1 = splitmix64(key);
    const std::uint64_t h2 = splitmix64(h1 ^ 0xD1B54A32D192ED03ULL);
    const double r = std::sqrt(-2.0 * std::log(unit_open(h1)));
    return r * std::cos(2.0 * std::numbers::pi * unit_open(h2));
}

void Scenario::validate() const
{
    if (!(duration_s > 0.0) || !std::isfinite(duration_s)) throw DataError("duration_s must be > 0");
    adc.validate();
    validate_rails(rails, adc);
    if (!(ripple_hz >= 0.0)) throw DataError("ripple_hz must be >= 0");
    if (!(line_rate_bps > 0.0)) throw DataError("line_rate_bps must be > 0");
    if (waveforms.size() != rails.size()) throw DataError("every rail needs exactly one waveform");

    for (std::size_t r = 0; r < waveforms.size(); ++r) {
        const RailWaveformSpec& w = waveforms[r];
        const std::string who = "rail '" + rails[r].name + "'";
        if (w.rail_id != r) throw DataError(who + ": waveform rail_id mismatch");
        if (!(w.nominal_volts > 0.0)) throw DataError(who + ": nominal_volts must be > 0");
        if (!(w.idle_current_a >= 0.0)) throw DataError(who + ": idle_current_a must be >= 0");
        if (!(w.ripple_amp_a >= 0.0)) throw DataError(who + ": ripple_amp_a must be >= 0");
        if (!(w.noise_rms_a >= 0.0)) throw DataError(who + ": noise_rms_a must be >= 0");
        std::vector<WorkloadPhase> phases = w.phases;
        std::sort(phases.begin(), phases.end(),
                  [](const WorkloadPhase& a, const WorkloadPhase& b) { return a.t_start_s < b.t_start_s; });
        for (std::size_t p = 0; p < phases.size(); ++p) {
            if (!(phases[p].t_end_s > phases[p].t_start_s)) throw DataError(who + ": phase with t_end <= t_start");
            if (p > 0 && phases[p].t_start_s < phases[p - 1].t_end_s) throw DataError(who + ": overlapping phases");
        }
    }

    for (std::size_t s = 0; s < frames.size(); ++s) {
        const FrameSchedule& f = frames[s];
        const std::string who = "frames[" + std::to_string(s) + "]";
        if (f.rail_id >= rails.size()) throw DataError(who + ": unknown rail_id");
        const double dur = frame_duration(f.frame_bytes, line_rate_bps);
        if (!(f.period_s > dur)) throw DataError(who + ": period_s must exceed the frame duration");
        if (!(f.first_arrival_s >= 0.0)) throw DataError(who + ": first_arrival_s must be >= 0");
        if (!(f.burst_current_a >= 0.0)) throw DataError(who + ": burst_current_a must be >= 0");
        if (f.count > 0) {
            const double last_end = f.first_arrival_s + static_cast<double>(f.count - 1) * f.period_s + dur;
            if (last_end > duration_s) throw DataError(who + ": frames extend past duration_s");
        }
    }

    if (trigger) {
        if (trigger->mode == TriggerMode::AtTime && !(trigger->t_s >= 0.0)) {
            throw DataError("trigger: t_s must be >= 0");
        }
        if (trigger->mode == TriggerMode::AfterNFrames) (void)trigger_time(*this);
    }

    if (!(ground_offset.r_ground_ohms >= 0.0)) throw DataError("ground_offset: r_ground_ohms must be >= 0");
    for (const ActivitySegment& seg : ground_offset.activity) {
        if (!(seg.t_end_s > seg.t_start_s)) throw DataError("ground_offset: segment with t_end <= t_start");
    }
}

DutModel::DutModel(Scenario scenario) : scenario_(std::move(scenario))
{
    scenario_.validate();
    bursts_.resize(scenario_.rails.size());
    for (const FrameSchedule& f : scenario_.frames) {
        if (f.count == 0 || f.burst_current_a == 0.0) continue;
        bursts_[f.rail_id].push_back({f.first_arrival_s, f.period_s,
                                      frame_duration(f.frame_bytes, scenario_.line_rate_bps),
                                      f.burst_current_a, f.count});
    }
}

double DutModel::deterministic_current(std::size_t rail_id, double t) const noexcept
{
    const RailWaveformSpec& w = scenario_.waveforms[rail_id];
    double current = w.idle_current_a;
    for (const WorkloadPhase& p : w.phases) {
        if (t >= p.t_start_s && t < p.t_end_s) current += p.extra_current_a;
    }
    for (const Burst& b : bursts_[rail_id]) {
        if (t < b.first) continue;
        // Candidate frames around the floor estimate; starts are recomputed
        // exactly as frame_event_times does, so both agree at the edges.
        const double est = std::floor((t - b.first) / b.period);
        for (double k = est - 1.0; k <= est + 1.0; k += 1.0) {
            if (k < 0.0 || k >= static_cast<double>(b.count)) continue;
            const double start = b.first + k * b.period;
            if (t >= start && t < start + b.duration) {
                current += b.current;
                break;
            }
        }
    }
    if (w.ripple_amp_a != 0.0) {
        current += w.ripple_amp_a * std::sin(2.0 * std::numbers::pi * scenario_.ripple_hz * t);
    }
    return current;
}

RailSample DutModel::eval(std::size_t rail_id, double t) const noexcept
{
    const RailWaveformSpec& w = scenario_.waveforms[rail_id];
    double current = deterministic_current(rail_id, t);
    if (w.noise_rms_a != 0.0) current += w.noise_rms_a * keyed_gaussian(scenario_.seed, rail_id, t);

    double volts = w.nominal_volts;
    if (w.ground_referenced && scenario_.ground_offset.r_ground_ohms != 0.0) {
        volts += scenario_.ground_offset.r_ground_ohms * scenario_.ground_offset.activity_current(t);
    }
    return {volts, current};
}

RailSample eval_rail(const Scenario& scenario, std::size_t rail_id, double t)
{
    if (rail_id >= scenario.rails.size()) throw DataError("unknown rail_id " + std::to_string(rail_id));
    if (!(t >= 0.0 && t <= scenario.duration_s)) throw DataError("t outside [0, duration_s]");
    return DutModel(scenario).eval(rail_id, t);
}

}  // namespace railscope
