#include "railscope/scenario_io.hpp"

#include "railscope/error.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace railscope {

using nlohmann::json;

namespace {

template <typename T>
T get_or(const json& j, const char* key, T fallback)
{
    const auto it = j.find(key);
    return it == j.end() || it->is_null() ? fallback : it->get<T>();
}

std::uint8_t rail_ref(const json& j, const std::vector<RailConfig>& rails)
{
    const json& ref = j.at("rail");
    if (ref.is_string()) return static_cast<std::uint8_t>(find_rail(rails, ref.get<std::string>()));
    const auto id = ref.get<std::size_t>();
    if (id >= rails.size()) throw DataError("unknown rail_id " + std::to_string(id));
    return static_cast<std::uint8_t>(id);
}

ScenarioDocument from_json(const json& j)
{
    ScenarioDocument doc;
    Scenario& s = doc.scenario;
    s.duration_s = j.at("duration_s").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.ripple_hz = get_or(j, "ripple_hz", 500e3);
    s.line_rate_bps = get_or(j, "line_rate_bps", kGigabitLineRate);

    if (j.contains("adc")) {
        const json& a = j.at("adc");
        s.adc.full_scale_volts = get_or(a, "full_scale_volts", s.adc.full_scale_volts);
        s.adc.bits = get_or(a, "bits", s.adc.bits);
        s.adc.sample_rate_hz = get_or(a, "sample_rate_hz", s.adc.sample_rate_hz);
        s.adc.channels = get_or(a, "channels", s.adc.channels);
    }

    for (const json& r : j.at("rails")) {
        RailConfig cfg;
        cfg.rail_id = static_cast<std::uint8_t>(s.rails.size());
        cfg.name = r.at("name").get<std::string>();
        cfg.group = rail_group_from_string(get_or<std::string>(r, "group", "DUT"));
        cfg.shunt_ohms = r.at("shunt_ohms").get<double>();
        cfg.amp_gain = r.at("amp_gain").get<double>();
        cfg.v_channel = r.at("v_channel").get<std::uint8_t>();
        cfg.i_channel = r.at("i_channel").get<std::uint8_t>();
        cfg.shunt_error = get_or(r, "shunt_error", 0.0);

        RailWaveformSpec w;
        w.rail_id = cfg.rail_id;
        w.nominal_volts = r.at("nominal_volts").get<double>();
        w.idle_current_a = get_or(r, "idle_current_a", 0.0);
        w.ripple_amp_a = get_or(r, "ripple_amp_a", 0.0);
        w.noise_rms_a = get_or(r, "noise_rms_a", 0.0);
        w.ground_referenced = get_or(r, "ground_referenced", false);
        if (r.contains("phases")) {
            for (const json& p : r.at("phases")) {
                w.phases.push_back({p.at("t_start_s").get<double>(), p.at("t_end_s").get<double>(),
                                    p.at("extra_current_a").get<double>()});
            }
        }
        s.rails.push_back(std::move(cfg));
        s.waveforms.push_back(std::move(w));
    }

    if (j.contains("frames")) {
        for (const json& f : j.at("frames")) {
            FrameSchedule fs;
            fs.rail_id = rail_ref(f, s.rails);
            fs.direction = frame_direction_from_string(get_or<std::string>(f, "direction", "ingress"));
            fs.frame_bytes = f.at("frame_bytes").get<std::uint32_t>();
            fs.period_s = f.at("period_s").get<double>();
            fs.count = f.at("count").get<std::uint32_t>();
            fs.first_arrival_s = f.at("first_arrival_s").get<double>();
            fs.burst_current_a = f.at("burst_current_a").get<double>();
            s.frames.push_back(fs);
        }
    }

    if (j.contains("trigger") && !j.at("trigger").is_null()) {
        const json& t = j.at("trigger");
        TriggerSpec spec;
        const auto mode = t.at("mode").get<std::string>();
        if (mode == "after_n_frames") {
            spec.mode = TriggerMode::AfterNFrames;
            spec.n = t.at("n").get<std::uint32_t>();
            spec.schedule = get_or<std::size_t>(t, "schedule", 0);
        } else if (mode == "at_time") {
            spec.mode = TriggerMode::AtTime;
            spec.t_s = t.at("t_s").get<double>();
        } else {
            throw DataError("trigger: unknown mode '" + mode + "'");
        }
        s.trigger = spec;
    }

    if (j.contains("ground_offset")) {
        const json& g = j.at("ground_offset");
        s.ground_offset.r_ground_ohms = get_or(g, "r_ground_ohms", 0.0);
        if (g.contains("activity")) {
            for (const json& a : g.at("activity")) {
                s.ground_offset.activity.push_back({a.at("t_start_s").get<double>(), a.at("t_end_s").get<double>(),
                                                    a.at("current_a").get<double>()});
            }
        }
    }

    if (j.contains("capture")) {
        const json& c = j.at("capture");
        CaptureSettings& cs = doc.capture;
        if (c.contains("block_frames")) cs.block_frames = c.at("block_frames").get<std::uint32_t>();
        if (c.contains("pretrigger_s")) cs.pretrigger_s = c.at("pretrigger_s").get<double>();
        if (c.contains("posttrigger_s")) cs.posttrigger_s = c.at("posttrigger_s").get<double>();
        if (c.contains("pmbus_rate_sps")) cs.pmbus_rate_sps = c.at("pmbus_rate_sps").get<std::uint32_t>();
        if (c.contains("pmbus_rails")) cs.pmbus_rails = c.at("pmbus_rails").get<std::vector<std::string>>();
        if (c.contains("pmbus_exponents")) {
            const json& e = c.at("pmbus_exponents");
            cs.pmbus_exponents = PmbusExponents{get_or(e, "voltage", -8), get_or(e, "current", -5)};
        }
    }
    return doc;
}

json to_json(const ScenarioDocument& doc)
{
    const Scenario& s = doc.scenario;
    json j;
    j["duration_s"] = s.duration_s;
    j["seed"] = s.seed;
    j["ripple_hz"] = s.ripple_hz;
    j["line_rate_bps"] = s.line_rate_bps;
    j["adc"] = {{"full_scale_volts", s.adc.full_scale_volts},
                {"bits", s.adc.bits},
                {"sample_rate_hz", s.adc.sample_rate_hz},
                {"channels", s.adc.channels}};

    j["rails"] = json::array();
    for (std::size_t r = 0; r < s.rails.size(); ++r) {
        const RailConfig& c = s.rails[r];
        const RailWaveformSpec& w = s.waveforms[r];
        json phases = json::array();
        for (const WorkloadPhase& p : w.phases) {
            phases.push_back({{"t_start_s", p.t_start_s}, {"t_end_s", p.t_end_s}, {"extra_current_a", p.extra_current_a}});
        }
        j["rails"].push_back({{"name", c.name},
                              {"group", std::string(to_string(c.group))},
                              {"shunt_ohms", c.shunt_ohms},
                              {"amp_gain", c.amp_gain},
                              {"v_channel", c.v_channel},
                              {"i_channel", c.i_channel},
                              {"shunt_error", c.shunt_error},
                              {"nominal_volts", w.nominal_volts},
                              {"idle_current_a", w.idle_current_a},
                              {"ripple_amp_a", w.ripple_amp_a},
                              {"noise_rms_a", w.noise_rms_a},
                              {"ground_referenced", w.ground_referenced},
                              {"phases", phases}});
    }

    j["frames"] = json::array();
    for (const FrameSchedule& f : s.frames) {
        j["frames"].push_back({{"rail", s.rails[f.rail_id].name},
                               {"direction", std::string(to_string(f.direction))},
                               {"frame_bytes", f.frame_bytes},
                               {"period_s", f.period_s},
                               {"count", f.count},
                               {"first_arrival_s", f.first_arrival_s},
                               {"burst_current_a", f.burst_current_a}});
    }

    if (s.trigger) {
        if (s.trigger->mode == TriggerMode::AfterNFrames) {
            j["trigger"] = {{"mode", "after_n_frames"}, {"n", s.trigger->n}, {"schedule", s.trigger->schedule}};
        } else {
            j["trigger"] = {{"mode", "at_time"}, {"t_s", s.trigger->t_s}};
        }
    } else {
        j["trigger"] = nullptr;
    }

    json activity = json::array();
    for (const ActivitySegment& a : s.ground_offset.activity) {
        activity.push_back({{"t_start_s", a.t_start_s}, {"t_end_s", a.t_end_s}, {"current_a", a.current_a}});
    }
    j["ground_offset"] = {{"r_ground_ohms", s.ground_offset.r_ground_ohms}, {"activity", activity}};

    json c = json::object();
    const CaptureSettings& cs = doc.capture;
    if (cs.block_frames) c["block_frames"] = *cs.block_frames;
    if (cs.pretrigger_s) c["pretrigger_s"] = *cs.pretrigger_s;
    if (cs.posttrigger_s) c["posttrigger_s"] = *cs.posttrigger_s;
    if (cs.pmbus_rate_sps) c["pmbus_rate_sps"] = *cs.pmbus_rate_sps;
    if (cs.pmbus_rails) c["pmbus_rails"] = *cs.pmbus_rails;
    if (cs.pmbus_exponents) c["pmbus_exponents"] = {{"voltage", cs.pmbus_exponents->voltage}, {"current", cs.pmbus_exponents->current}};
    j["capture"] = c;
    return j;
}

}  // namespace

ScenarioDocument parse_scenario(std::string_view json_text)
{
    ScenarioDocument doc;
    try {
        doc = from_json(json::parse(json_text));
    } catch (const json::exception& e) {
        throw DataError(std::string("scenario: ") + e.what());
    }
    doc.scenario.validate();
    make_capture_config(doc.scenario, doc.capture).validate();
    return doc;
}

std::string serialize_scenario(const ScenarioDocument& doc)
{
    return to_json(doc).dump(2) + "\n";
}

ScenarioDocument load_scenario(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str());
}

void save_scenario(const std::filesystem::path& path, const ScenarioDocument& doc)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    out << serialize_scenario(doc);
    if (!out) throw DataError("write to '" + path.string() + "' failed");
}

ScenarioDocument visual_servoing_preset()
{
    ScenarioDocument doc;
    Scenario& s = doc.scenario;
    s.duration_s = 2.0;
    s.seed = 1;
    s.rails = default_rail_map();

    const double lsb_a = current_lsb(s.rails.front(), s.adc);
    struct Load {
        double volts, idle, ripple;
    };
    // Order follows default_rail_map().
    const Load loads[] = {
        {1.0, 0.300, 0.0050},   // pl_core
        {1.8, 0.120, 0.0040},   // pl_aux
        {1.0, 0.015, 0.0005},   // bram
        {1.0, 0.350, 0.0050},   // ps_core
        {1.8, 0.100, 0.0030},   // ps_aux
        {1.8, 0.200, 0.0003},   // phy1_core
        {3.3, 0.040, 0.0003},   // phy1_io
        {1.2, 0.090, 0.0003},   // phy2_core
        {3.3, 0.030, 0.0003},   // phy2_io
    };
    for (std::size_t r = 0; r < s.rails.size(); ++r) {
        RailWaveformSpec w;
        w.rail_id = static_cast<std::uint8_t>(r);
        w.nominal_volts = loads[r].volts;
        w.idle_current_a = loads[r].idle;
        w.ripple_amp_a = loads[r].ripple;
        w.noise_rms_a = lsb_a;
        s.waveforms.push_back(std::move(w));
    }

    const auto id = [&](const char* name) { return static_cast<std::uint8_t>(find_rail(s.rails, name)); };
    // PL handles the camera stream; after the trigger the PS CPUs take over.
    s.waveforms[id("pl_core")].phases.push_back({0.2, 1.2, 0.250});
    s.waveforms[id("bram")].phases.push_back({0.2, 1.2, 0.004});
    s.waveforms[id("ps_core")].phases.push_back({1.2, 1.9, 0.300});
    s.waveforms[id("bram")].ground_referenced = true;

    // 1000 camera frames into PHY2, visible on its VccIO rail.
    s.frames.push_back({id("phy2_io"), FrameDirection::Ingress, 1518, 1e-3, 1000, 0.2004, 0.050});
    // Actuation traffic after the trigger: invisible on PHY2, visible on PHY1's core rail.
    s.frames.push_back({id("phy2_core"), FrameDirection::Egress, 1518, 2e-3, 300, 1.25, 0.0});
    s.frames.push_back({id("phy1_core"), FrameDirection::Egress, 512, 2e-3, 300, 1.251, 0.020});

    s.trigger = TriggerSpec{TriggerMode::AfterNFrames, 1000, 0, 0.0};

    // Storage bursts on the monitor's own supply shift the shared ground.
    s.ground_offset.r_ground_ohms = 0.02;
    s.ground_offset.activity = {{1.30, 1.35, 0.10}, {1.50, 1.55, 0.10}};

    // Keep the whole 1000-frame reception in the pre-trigger window.
    doc.capture.pretrigger_s = 1.1;
    doc.capture.posttrigger_s = 0.5;
    return doc;
}

}  // namespace railscope
