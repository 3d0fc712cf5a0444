#include "railscope/capture_engine.hpp"

#include "railscope/error.hpp"
#include "railscope/kernels.hpp"
#include "railscope/ring_buffer.hpp"
#include "railscope/spsc_queue.hpp"
#include "railscope/timebase.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <deque>
#include <exception>
#include <limits>
#include <ostream>
#include <thread>

namespace railscope {

namespace {

// Rounds x up to an integer, treating values within 1e-6 of an integer as
// exactly on it (guards against k / f_s round-off).
std::uint64_t ceil_tick(double x)
{
    const double r = std::round(x);
    if (std::abs(x - r) < 1e-6) return static_cast<std::uint64_t>(std::max(r, 0.0));
    return static_cast<std::uint64_t>(std::max(std::ceil(x), 0.0));
}

std::uint64_t pre_frames(const CaptureConfig& c) { return ceil_tick(c.pretrigger_s * c.adc.sample_rate_hz); }
std::uint64_t post_frames(const CaptureConfig& c) { return ceil_tick(c.posttrigger_s * c.adc.sample_rate_hz); }

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

void check_consistent(const Scenario& scenario, const CaptureConfig& config)
{
    if (!(scenario.adc == config.adc)) throw DataError("capture config ADC does not match the scenario");
    if (!(scenario.rails == config.rails)) throw DataError("capture config rails do not match the scenario");
}

// What the sampler hands to the firmware for each block.
struct AcquiredBlock {
    std::uint64_t index = 0;
    SampleBlock block;
    std::uint32_t line_high_from = 0;   // first frame offset with the trigger line high
    std::vector<PmbusRecord> pmbus;     // polls falling inside this block's time span
    bool end_of_stream = false;
};

class Sampler {
public:
    Sampler(const DutModel& model, const CaptureConfig& config, std::uint64_t trigger_frame)
        : model_(model), config_(config), trigger_frame_(trigger_frame)
    {
    }

    // Samples blocks [first, first + count) into `out`.
    void sample(std::uint64_t first, std::size_t count, bool parallel, std::vector<AcquiredBlock>& out) const
    {
        const std::size_t bf = config_.block_frames;
        const auto channels = static_cast<std::size_t>(config_.adc.channels);
        std::vector<std::uint16_t> codes(count * bf * channels);
        const std::uint64_t first_frame = first * bf;
        if (parallel) {
            kernels::sample_frames_parallel(model_, config_.adc, config_.rails, first_frame, codes);
        } else {
            kernels::sample_frames_serial(model_, config_.adc, config_.rails, first_frame, codes);
        }
        out.clear();
        out.reserve(count);
        for (std::size_t b = 0; b < count; ++b) {
            AcquiredBlock msg;
            msg.index = first + b;
            const std::uint64_t k0 = msg.index * bf;
            msg.block.timestamp_ns = timestamp_of_frame(k0, config_.adc.sample_rate_hz);
            const auto row_begin = codes.begin() + static_cast<std::ptrdiff_t>(b * bf * channels);
            msg.block.codes.assign(row_begin, row_begin + static_cast<std::ptrdiff_t>(bf * channels));
            msg.line_high_from = trigger_frame_ <= k0 ? 0
                                 : static_cast<std::uint32_t>(std::min<std::uint64_t>(trigger_frame_ - k0, bf));
            poll_pmbus(k0, k0 + bf, msg.pmbus);
            out.push_back(std::move(msg));
        }
    }

private:
    void poll_pmbus(std::uint64_t k_begin, std::uint64_t k_end, std::vector<PmbusRecord>& out) const
    {
        if (config_.pmbus_rails.empty()) return;
        const std::uint32_t rate = config_.pmbus_rate_sps;
        const std::uint64_t ts_begin = timestamp_of_frame(k_begin, config_.adc.sample_rate_hz);
        const std::uint64_t ts_end = timestamp_of_frame(k_end, config_.adc.sample_rate_hz);
        const std::size_t n = config_.pmbus_rails.size();
        for (std::uint64_t i = frame_index_at_or_after(ts_begin, rate);
             i < frame_index_at_or_after(ts_end, rate); ++i) {
            const std::uint8_t rail = config_.pmbus_rails[i % n];
            out.push_back(pmbus_read(model_, rail, frame_time_s(i, rate), timestamp_of_frame(i, rate),
                                     config_.pmbus_exponents));
        }
    }

    const DutModel& model_;
    const CaptureConfig& config_;
    std::uint64_t trigger_frame_;
};

class Firmware {
public:
    explicit Firmware(const CaptureConfig& config)
        : config_(config), ring_(ring_capacity_blocks(config)), pre_(pre_frames(config)), post_(post_frames(config))
    {
        result_.trace.header = make_trace_header(config);
    }

    [[nodiscard]] bool done() const noexcept { return state_ == State::Done; }

    void on_block(AcquiredBlock&& msg)
    {
        const bool edge = !line_high_ && msg.line_high_from < config_.block_frames;
        line_high_ = msg.line_high_from < config_.block_frames;

        if (state_ == State::Armed) {
            for (PmbusRecord& r : msg.pmbus) pending_pmbus_.push_back(r);
            ring_.push({msg.index, std::move(msg.block)});
            while (!pending_pmbus_.empty() && pending_pmbus_.front().timestamp_ns < ring_[0].second.timestamp_ns) {
                pending_pmbus_.pop_front();
            }
            if (edge) on_trigger(msg.index, msg.index * config_.block_frames + msg.line_high_from);
        } else if (state_ == State::Recording) {
            result_.trace.blocks.push_back(std::move(msg.block));
            for (PmbusRecord& r : msg.pmbus) result_.trace.pmbus.push_back(r);
            if (msg.index + 1 >= result_.window.end_block) state_ = State::Done;
        }
    }

    CaptureResult finish(std::uint64_t frames_sampled)
    {
        if (state_ == State::Armed) throw DataError("no trigger");
        if (state_ == State::Recording) result_.window.truncated_end = true;

        auto& trace = result_.trace;
        if (!trace.blocks.empty()) {
            const std::uint64_t last_k = frame_index_at_or_after(trace.blocks.back().timestamp_ns,
                                                                 config_.adc.sample_rate_hz) +
                                         config_.block_frames - 1;
            const std::uint64_t last_ts = timestamp_of_frame(last_k, config_.adc.sample_rate_hz);
            std::erase_if(trace.pmbus, [&](const PmbusRecord& r) { return r.timestamp_ns > last_ts; });
        }
        result_.frames_sampled = frames_sampled;
        return std::move(result_);
    }

private:
    enum class State { Armed, Recording, Done };

    void on_trigger(std::uint64_t block_index, std::uint64_t k_trig)
    {
        const std::uint64_t bf = config_.block_frames;
        CaptureWindow& w = result_.window;
        w.trigger_frame = k_trig;
        w.truncated_start = k_trig < pre_;
        w.first_block = w.truncated_start ? 0 : (k_trig - pre_) / bf;
        w.end_block = std::max(ceil_div(k_trig + post_, bf), block_index + 1);

        auto& trace = result_.trace;
        for (auto& [index, block] : ring_.drain()) {
            if (index >= w.first_block) trace.blocks.push_back(std::move(block));
        }
        const std::uint64_t first_ts = trace.blocks.front().timestamp_ns;
        for (const PmbusRecord& r : pending_pmbus_) {
            if (r.timestamp_ns >= first_ts) trace.pmbus.push_back(r);
        }
        pending_pmbus_.clear();
        trace.triggers.push_back({timestamp_of_frame(k_trig, config_.adc.sample_rate_hz), TriggerSource::ExternalLine});
        state_ = block_index + 1 >= w.end_block ? State::Done : State::Recording;
    }

    const CaptureConfig& config_;
    RingBuffer<std::pair<std::uint64_t, SampleBlock>> ring_;
    std::deque<PmbusRecord> pending_pmbus_;
    std::uint64_t pre_;
    std::uint64_t post_;
    bool line_high_ = false;
    State state_ = State::Armed;
    CaptureResult result_;
};

constexpr std::size_t kBatchBlocks = 64;

}  // namespace

void CaptureConfig::validate() const
{
    adc.validate();
    if (adc.bits != 16 || adc.full_scale_volts != 10.0) {
        throw DataError("capture: trace format assumes a 10 V, 16-bit converter");
    }
    validate_rails(rails, adc);
    if (block_frames < 1 || block_frames > 65535) throw DataError("capture: block_frames must be in [1, 65535]");
    if (!(pretrigger_s >= kMinPretriggerS)) throw DataError("capture: pretrigger_s must be >= 0.150 s");
    if (!(posttrigger_s >= 0.0)) throw DataError("capture: posttrigger_s must be >= 0");
    if (pmbus_rate_sps > kMaxPmbusRateSps) throw DataError("capture: pmbus_rate_sps must be <= 1000");
    if (!pmbus_rails.empty() && pmbus_rate_sps == 0) throw DataError("capture: pmbus_rate_sps must be > 0");
    for (std::size_t a = 0; a < pmbus_rails.size(); ++a) {
        if (pmbus_rails[a] >= rails.size()) throw DataError("capture: unknown PMBus rail id");
        for (std::size_t b = 0; b < a; ++b) {
            if (pmbus_rails[a] == pmbus_rails[b]) throw DataError("capture: duplicate PMBus rail");
        }
    }
    for (const int e : {pmbus_exponents.voltage, pmbus_exponents.current}) {
        if (e < Linear11::kMinExponent || e > Linear11::kMaxExponent) {
            throw DataError("capture: PMBus exponent out of range");
        }
    }
}

std::vector<std::string> default_pmbus_rail_names()
{
    return {"pl_core", "bram", "ps_core", "phy1_io", "phy2_io"};
}

CaptureConfig make_capture_config(const Scenario& scenario, const CaptureSettings& settings)
{
    CaptureConfig c;
    c.adc = scenario.adc;
    c.rails = scenario.rails;
    if (settings.block_frames) c.block_frames = *settings.block_frames;
    if (settings.pretrigger_s) c.pretrigger_s = *settings.pretrigger_s;
    if (settings.posttrigger_s) c.posttrigger_s = *settings.posttrigger_s;
    if (settings.pmbus_rate_sps) c.pmbus_rate_sps = *settings.pmbus_rate_sps;
    if (settings.pmbus_exponents) c.pmbus_exponents = *settings.pmbus_exponents;

    if (settings.pmbus_rails) {
        for (const std::string& name : *settings.pmbus_rails) {
            c.pmbus_rails.push_back(static_cast<std::uint8_t>(find_rail(c.rails, name)));
        }
    } else {
        const auto names = default_pmbus_rail_names();
        const bool all_present = std::all_of(names.begin(), names.end(), [&](const std::string& n) {
            return std::any_of(c.rails.begin(), c.rails.end(), [&](const RailConfig& r) { return r.name == n; });
        });
        if (all_present) {
            for (const std::string& n : names) c.pmbus_rails.push_back(static_cast<std::uint8_t>(find_rail(c.rails, n)));
        } else {
            for (std::size_t r = 0; r < std::min<std::size_t>(5, c.rails.size()); ++r) {
                c.pmbus_rails.push_back(static_cast<std::uint8_t>(r));
            }
        }
    }
    return c;
}

std::vector<PmbusPoll> pmbus_poll_schedule(const CaptureConfig& config, double t_begin, double t_end)
{
    std::vector<PmbusPoll> polls;
    if (config.pmbus_rails.empty() || config.pmbus_rate_sps == 0 || !(t_end >= t_begin)) return polls;
    const std::uint32_t rate = config.pmbus_rate_sps;
    const auto ts_begin = static_cast<std::uint64_t>(std::ceil(std::max(t_begin, 0.0) * 1e9 - 1e-3));
    const auto ts_end = static_cast<std::uint64_t>(std::floor(t_end * 1e9 + 1e-3));
    const std::size_t n = config.pmbus_rails.size();
    for (std::uint64_t i = frame_index_at_or_after(ts_begin, rate); timestamp_of_frame(i, rate) <= ts_end; ++i) {
        polls.push_back({timestamp_of_frame(i, rate), frame_time_s(i, rate), config.pmbus_rails[i % n]});
    }
    return polls;
}

std::uint64_t scenario_frame_count(const Scenario& scenario)
{
    const double x = scenario.duration_s * scenario.adc.sample_rate_hz;
    const double r = std::round(x);
    const double last = std::abs(x - r) < 1e-6 ? r : std::floor(x);
    return static_cast<std::uint64_t>(last) + 1;
}

std::uint64_t trigger_frame(const Scenario& scenario)
{
    return ceil_tick(trigger_time(scenario) * scenario.adc.sample_rate_hz);
}

CaptureWindow plan_capture(const Scenario& scenario, const CaptureConfig& config)
{
    const std::uint64_t bf = config.block_frames;
    const std::uint64_t total_blocks = scenario_frame_count(scenario) / bf;
    const std::uint64_t k_trig = trigger_frame(scenario);
    if (k_trig / bf >= total_blocks) throw DataError("no trigger");

    CaptureWindow w;
    w.trigger_frame = k_trig;
    const std::uint64_t pre = pre_frames(config);
    w.truncated_start = k_trig < pre;
    w.first_block = w.truncated_start ? 0 : (k_trig - pre) / bf;
    w.end_block = std::max(ceil_div(k_trig + post_frames(config), bf), k_trig / bf + 1);
    if (w.end_block > total_blocks) {
        w.end_block = total_blocks;
        w.truncated_end = true;
    }
    return w;
}

std::size_t ring_capacity_blocks(const CaptureConfig& config)
{
    return static_cast<std::size_t>(ceil_div(pre_frames(config), config.block_frames) + 1);
}

std::vector<SampleBlock> record_blocks(const DutModel& model, const CaptureConfig& config,
                                       std::uint64_t first_block, std::uint64_t end_block)
{
    std::vector<SampleBlock> blocks;
    const std::uint64_t no_trigger = std::numeric_limits<std::uint64_t>::max();
    const Sampler sampler(model, config, no_trigger);
    std::vector<AcquiredBlock> batch;
    for (std::uint64_t b = first_block; b < end_block; b += kBatchBlocks) {
        sampler.sample(b, static_cast<std::size_t>(std::min<std::uint64_t>(kBatchBlocks, end_block - b)), false, batch);
        for (AcquiredBlock& m : batch) blocks.push_back(std::move(m.block));
    }
    return blocks;
}

TraceHeader make_trace_header(const CaptureConfig& config)
{
    TraceHeader h;
    h.channel_count = static_cast<std::uint8_t>(config.adc.channels);
    h.sample_rate_hz = config.adc.sample_rate_hz;
    h.block_frames = static_cast<std::uint16_t>(config.block_frames);
    h.rails = config.rails;
    for (RailConfig& r : h.rails) r.shunt_error = 0.0;
    return h;
}

CaptureResult run_capture(const Scenario& scenario, const CaptureConfig& config, Execution execution,
                          std::ostream* log)
{
    config.validate();
    check_consistent(scenario, config);
    const DutModel model(scenario);
    const CaptureWindow plan = plan_capture(scenario, config);   // fails fast on "no trigger"
    const std::uint64_t total_blocks = scenario_frame_count(scenario) / config.block_frames;

    if (log) {
        *log << "capture: trigger at frame " << plan.trigger_frame << " ("
             << static_cast<double>(timestamp_of_frame(plan.trigger_frame, config.adc.sample_rate_hz)) * 1e-9
             << " s), ring " << ring_capacity_blocks(config) << " blocks\n";
    }

    const Sampler sampler(model, config, plan.trigger_frame);
    Firmware firmware(config);
    std::uint64_t sampled_blocks = 0;

    if (execution == Execution::Serial) {
        std::vector<AcquiredBlock> batch;
        for (std::uint64_t b = 0; b < total_blocks && !firmware.done(); b += kBatchBlocks) {
            sampler.sample(b, static_cast<std::size_t>(std::min<std::uint64_t>(kBatchBlocks, total_blocks - b)), false, batch);
            for (AcquiredBlock& m : batch) {
                if (firmware.done()) break;
                firmware.on_block(std::move(m));
                ++sampled_blocks;
            }
        }
    } else {
        SpscQueue<AcquiredBlock> queue(4 * kBatchBlocks);
        std::atomic<bool> stop{false};
        std::exception_ptr producer_error;

        std::thread producer([&] {
            try {
                std::vector<AcquiredBlock> batch;
                for (std::uint64_t b = 0; b < total_blocks && !stop.load(std::memory_order_acquire); b += kBatchBlocks) {
                    sampler.sample(b, static_cast<std::size_t>(std::min<std::uint64_t>(kBatchBlocks, total_blocks - b)), true, batch);
                    for (AcquiredBlock& m : batch) queue.push(std::move(m));
                }
            } catch (...) {
                producer_error = std::current_exception();
            }
            AcquiredBlock end;
            end.end_of_stream = true;
            queue.push(std::move(end));
        });

        for (;;) {
            AcquiredBlock m = queue.pop();
            if (m.end_of_stream) break;
            if (firmware.done()) continue;   // drain what the producer already queued
            firmware.on_block(std::move(m));
            ++sampled_blocks;
            if (firmware.done()) stop.store(true, std::memory_order_release);
        }
        producer.join();
        if (producer_error) std::rethrow_exception(producer_error);
    }

    CaptureResult result = firmware.finish(sampled_blocks * config.block_frames);
    if (log) {
        *log << "capture: " << result.trace.blocks.size() << " blocks, " << result.trace.frame_count()
             << " frames, " << result.trace.pmbus.size() << " PMBus records"
             << (result.window.truncated_start ? ", pre-trigger truncated at t=0" : "")
             << (result.window.truncated_end ? ", truncated at scenario end" : "") << "\n";
    }
    return result;
}

}  // namespace railscope
