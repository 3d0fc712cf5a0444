#include <catch_amalgamated.hpp>

#include "railscope/capture_engine.hpp"
#include "railscope/error.hpp"
#include "railscope/kernels.hpp"
#include "railscope/scenario_io.hpp"
#include "railscope/timebase.hpp"

#include <algorithm>
#include <random>

using namespace railscope;

namespace {

Scenario small_scenario(double duration_s, double trigger_s, std::uint64_t seed = 3)
{
    Scenario s;
    s.duration_s = duration_s;
    s.seed = seed;
    s.rails = default_rail_map();
    for (const RailConfig& r : s.rails) {
        RailWaveformSpec w;
        w.rail_id = r.rail_id;
        w.nominal_volts = 1.0 + 0.25 * r.rail_id;
        w.idle_current_a = 0.02 * (r.rail_id + 1);
        w.ripple_amp_a = 2e-4;
        w.noise_rms_a = 30e-6;
        s.waveforms.push_back(w);
    }
    s.trigger = TriggerSpec{TriggerMode::AtTime, 0, 0, trigger_s};
    return s;
}

CaptureConfig config_for(const Scenario& s, double pre = 0.160, double post = 0.05, std::uint32_t bf = 64)
{
    CaptureSettings settings;
    settings.pretrigger_s = pre;
    settings.posttrigger_s = post;
    settings.block_frames = bf;
    return make_capture_config(s, settings);
}

std::vector<std::uint64_t> frame_timestamps(const TraceFile& t)
{
    std::vector<std::uint64_t> ts;
    const std::uint64_t base = t.blocks.empty() ? 0 : frame_index_at_or_after(t.blocks.front().timestamp_ns, t.header.sample_rate_hz);
    for (std::uint64_t k = 0; k < t.frame_count(); ++k) ts.push_back(timestamp_of_frame(base + k, t.header.sample_rate_hz));
    return ts;
}

}  // namespace

TEST_CASE("sample_frame quantizes both channels of a rail", "[capture_engine]")
{
    Scenario s = small_scenario(0.01, 0.005);
    s.waveforms[0].nominal_volts = 1.0;
    s.waveforms[0].idle_current_a = 0.1;
    s.waveforms[0].ripple_amp_a = 0;
    s.waveforms[0].noise_rms_a = 0;
    s.waveforms[1].nominal_volts = 12.0;
    const DutModel m(s);
    std::vector<std::uint16_t> row(18);
    kernels::sample_frame(m, s.adc, s.rails, 0.001, row);
    CHECK(row[0] == 6554);
    CHECK(row[1] == 3277);
    CHECK(row[2] == 65535);

    Scenario zero = s;
    for (RailWaveformSpec& w : zero.waveforms) {
        w = RailWaveformSpec{w.rail_id};
        w.nominal_volts = 1e-6;
    }
    const DutModel mz(zero);
    kernels::sample_frame(mz, zero.adc, zero.rails, 0.001, row);
    CHECK(std::all_of(row.begin(), row.end(), [](std::uint16_t c) { return c == 0; }));
}

TEST_CASE("PMBus poll schedule round-robins the aggregate rate", "[capture_engine]")
{
    const Scenario s = small_scenario(1.0, 0.5);
    CaptureConfig c = config_for(s);
    REQUIRE(c.pmbus_rails.size() == 5);
    const auto polls = pmbus_poll_schedule(c, 0.0, 1.0 - 1e-9);
    CHECK(polls.size() == 125);
    for (const std::uint8_t r : c.pmbus_rails) {
        CHECK(std::count_if(polls.begin(), polls.end(), [&](const PmbusPoll& p) { return p.rail_id == r; }) == 25);
    }
    CHECK(polls[5].timestamp_ns == 40'000'000);

    c.pmbus_rails = {3};
    CHECK(pmbus_poll_schedule(c, 0.0, 1.0 - 1e-9).size() == 125);
    c.pmbus_rails.clear();
    CHECK(pmbus_poll_schedule(c, 0.0, 1.0).empty());
}

TEST_CASE("capture window for the reference example", "[capture_engine]")
{
    Scenario s = small_scenario(2.0, 1.012304);
    const CaptureConfig c = config_for(s, 0.160, 0.5, 64);
    const CaptureWindow w = plan_capture(s, c);
    const std::uint64_t frames = (w.end_block - w.first_block) * 64;
    // (0.160 + 0.5) s at 225 kSPS, rounded out to whole blocks.
    CHECK(frames >= 148500);
    CHECK(frames <= 148500 + 2 * 64);
    CHECK_FALSE(w.truncated_start);
    CHECK_FALSE(w.truncated_end);
}

TEST_CASE("at_time trigger lands on the next sample tick", "[capture_engine]")
{
    const Scenario s = small_scenario(0.6, 0.5);
    const CaptureResult r = run_capture(s, config_for(s), Execution::Serial);
    REQUIRE(r.trace.triggers.size() == 1);
    CHECK(r.trace.triggers[0].timestamp_ns == 500'000'000);

    const Scenario s2 = small_scenario(0.6, 0.3000021);
    const CaptureResult r2 = run_capture(s2, config_for(s2), Execution::Serial);
    CHECK(r2.trace.triggers[0].timestamp_ns == timestamp_of_frame(67501, 225000));
}

TEST_CASE("serial and pipelined captures are identical", "[capture_engine][property]")
{
    for (const std::uint32_t bf : {1u, 7u, 64u, 1000u}) {
        const Scenario s = small_scenario(0.4, 0.2 + bf * 1e-5, bf);
        const CaptureConfig c = config_for(s, 0.160, 0.05, bf);
        const CaptureResult a = run_capture(s, c, Execution::Serial);
        const CaptureResult b = run_capture(s, c, Execution::Pipelined);
        REQUIRE(a.trace == b.trace);
        CHECK(a.frames_sampled == b.frames_sampled);
    }
}

TEST_CASE("ring capture equals slicing an unbounded recording", "[capture_engine][property]")
{
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> when(0.01, 0.29);
    for (int trial = 0; trial < 12; ++trial) {
        const std::uint32_t bf = 1 + static_cast<std::uint32_t>(rng() % 300);
        const Scenario s = small_scenario(0.3, when(rng), trial);
        const CaptureConfig c = config_for(s, 0.150 + 0.01 * (trial % 3), 0.02 * (trial % 4), bf);
        const CaptureResult r = run_capture(s, c, Execution::Serial);
        const DutModel model(s);
        const auto ref = record_blocks(model, c, r.window.first_block, r.window.end_block);
        REQUIRE(r.trace.blocks == ref);
    }
}

TEST_CASE("captured frames have no gaps or duplicates", "[capture_engine][property]")
{
    const Scenario s = small_scenario(0.5, 0.3);
    const CaptureConfig c = config_for(s, 0.160, 0.1, 50);
    const TraceFile t = run_capture(s, c).trace;
    REQUIRE(!t.blocks.empty());
    CHECK(t.frame_count() == t.blocks.size() * 50);
    for (std::size_t b = 1; b < t.blocks.size(); ++b) {
        REQUIRE(t.blocks[b].timestamp_ns > t.blocks[b - 1].timestamp_ns);
        const std::uint64_t k = frame_index_at_or_after(t.blocks[b - 1].timestamp_ns, 225000) + 50;
        REQUIRE(t.blocks[b].timestamp_ns == timestamp_of_frame(k, 225000));
    }
    const auto ts = frame_timestamps(t);
    for (std::size_t k = 1; k < ts.size(); ++k) REQUIRE((ts[k] - ts[k - 1] == 4444 || ts[k] - ts[k - 1] == 4445));

    const std::uint64_t first = t.blocks.front().timestamp_ns;
    const std::uint64_t last = ts.back();
    for (const PmbusRecord& p : t.pmbus) REQUIRE((p.timestamp_ns >= first && p.timestamp_ns <= last));
    for (const TriggerEvent& e : t.triggers) REQUIRE((e.timestamp_ns >= first && e.timestamp_ns <= last));
    // 0.26 s of window at 125 polls per second.
    CHECK(t.pmbus.size() >= 32);
    CHECK(t.pmbus.size() <= 34);
}

TEST_CASE("pre-trigger span holds on randomized scenarios", "[capture_engine][property]")
{
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> when(0.0, 0.39);
    for (int trial = 0; trial < 25; ++trial) {
        const double t_trig = when(rng);
        const Scenario s = small_scenario(0.4, t_trig, trial);
        const CaptureConfig c = config_for(s, 0.150 + 0.02 * (trial % 2), 0.01, 1 + rng() % 200);
        const CaptureResult r = run_capture(s, c, Execution::Serial);
        const double trig = r.trace.triggers.at(0).timestamp_ns * 1e-9;
        const double first = r.trace.blocks.front().timestamp_ns * 1e-9;
        REQUIRE(trig - first >= std::min(0.150, trig) - 1e-12);
        CHECK(r.window.truncated_start == (first == 0.0 && trig < c.pretrigger_s));
    }
}

TEST_CASE("simultaneity does not depend on rail order", "[capture_engine][property]")
{
    Scenario s = small_scenario(0.01, 0.005);
    s.waveforms[2].ripple_amp_a = 0.01;
    const DutModel model(s);
    std::vector<RailConfig> permuted(s.rails.rbegin(), s.rails.rend());
    std::mt19937 rng(5);
    std::vector<std::uint16_t> a(18), b(18);
    for (int k = 0; k < 2250; ++k) {
        const double t = frame_time_s(k, 225000);
        std::shuffle(permuted.begin(), permuted.end(), rng);
        kernels::sample_frame(model, s.adc, s.rails, t, a);
        kernels::sample_frame(model, s.adc, permuted, t, b);
        REQUIRE(a == b);
    }
}

TEST_CASE("captures truncate at either end of the scenario", "[capture_engine]")
{
    const Scenario early = small_scenario(0.5, 0.05);
    const CaptureResult a = run_capture(early, config_for(early));
    CHECK(a.window.truncated_start);
    CHECK(a.trace.blocks.front().timestamp_ns == 0);

    const Scenario late = small_scenario(0.5, 0.45);
    const CaptureResult b = run_capture(late, config_for(late, 0.160, 0.5));
    CHECK(b.window.truncated_end);
    CHECK(b.trace.frame_count() <= scenario_frame_count(late));
}

TEST_CASE("capture errors", "[capture_engine][errors]")
{
    Scenario s = small_scenario(0.3, 0.2);
    s.trigger.reset();
    CHECK_THROWS_WITH(run_capture(s, config_for(s)), Catch::Matchers::ContainsSubstring("no trigger"));
    s.trigger = TriggerSpec{TriggerMode::AtTime, 0, 0, 0.5};
    CHECK_THROWS_WITH(run_capture(s, config_for(s), Execution::Pipelined),
                      Catch::Matchers::ContainsSubstring("no trigger"));

    s.trigger->t_s = 0.2;
    CaptureConfig c = config_for(s);
    c.pretrigger_s = 0.1;
    CHECK_THROWS_AS(c.validate(), DataError);
    c = config_for(s);
    c.pmbus_rate_sps = 2000;
    CHECK_THROWS_AS(c.validate(), DataError);
    c = config_for(s);
    c.rails.pop_back();
    CHECK_THROWS_AS(run_capture(s, c), DataError);
}

TEST_CASE("ring capacity covers any trigger phase", "[capture_engine]")
{
    const Scenario s = small_scenario(1.0, 0.5);
    CHECK(ring_capacity_blocks(config_for(s, 0.160, 0.5, 64)) == (36000 + 63) / 64 + 1);
    CHECK(ring_capacity_blocks(config_for(s, 0.160, 0.5, 1)) == 36001);
}
