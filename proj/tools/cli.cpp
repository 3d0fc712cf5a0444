#include "cli.hpp"

#include "railscope/analysis.hpp"
#include "railscope/capture_engine.hpp"
#include "railscope/error.hpp"
#include "railscope/scenario_io.hpp"
#include "railscope/svg_plot.hpp"
#include "railscope/trace_codec.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

namespace railscope::cli {

namespace {

struct Options {
    // synth
    std::string preset;
    std::optional<std::uint64_t> seed;
    // capture
    std::string scenario_path;
    std::optional<double> pretrigger;
    std::optional<double> posttrigger;
    bool serial = false;
    // decode
    std::string csv_path;
    bool units = false;
    std::vector<std::string> rails;
    // analyze
    std::string kind;
    std::string trace_path;
    std::string rail;
    std::optional<double> from;
    std::optional<double> to;
    std::string plot_path;
    std::string quantity = "current";
    std::string window = "rect";
    DetectParams detect;
    std::optional<double> min_duration;
    // shared
    std::string out_path;
};

std::string num(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

void write_text(const std::string& path, const std::string& text)
{
    std::ofstream f(path, std::ios::trunc | std::ios::binary);
    if (!f) throw DataError("cannot open '" + path + "' for writing");
    f << text;
    if (!f) throw DataError("write to '" + path + "' failed");
}

void apply_seed_override(Scenario& s, std::ostream& err)
{
    const char* env = std::getenv("RAILSCOPE_SEED");
    if (env == nullptr || *env == '\0') return;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 0);
    if (end == env || *end != '\0') throw DataError(std::string("RAILSCOPE_SEED is not an integer: ") + env);
    s.seed = v;
    err << "seed overridden by RAILSCOPE_SEED=" << v << "\n";
}

TraceFile load_trace(const std::string& path, std::ostream& err)
{
    DecodeResult r = read_trace_file(path);
    if (r.warnings > 0) err << "warning: dropped " << r.warnings << " truncated record(s)\n";
    return std::move(r.trace);
}

double to_seconds(std::uint64_t ns) { return static_cast<double>(ns) * 1e-9; }

int cmd_synth(const Options& o, std::ostream& err)
{
    ScenarioDocument doc = visual_servoing_preset();
    if (o.seed) doc.scenario.seed = *o.seed;
    apply_seed_override(doc.scenario, err);
    save_scenario(o.out_path, doc);
    err << "wrote scenario '" << o.out_path << "'\n";
    return kExitOk;
}

int cmd_capture(const Options& o, std::ostream& err)
{
    ScenarioDocument doc = load_scenario(o.scenario_path);
    apply_seed_override(doc.scenario, err);
    if (o.pretrigger) doc.capture.pretrigger_s = *o.pretrigger;
    if (o.posttrigger) doc.capture.posttrigger_s = *o.posttrigger;
    const CaptureConfig config = make_capture_config(doc.scenario, doc.capture);
    const CaptureResult result =
        run_capture(doc.scenario, config, o.serial ? Execution::Serial : Execution::Pipelined, &err);
    write_trace_file(o.out_path, result.trace);
    err << "wrote trace '" << o.out_path << "'\n";
    return kExitOk;
}

int cmd_decode(const Options& o, std::ostream& out, std::ostream& err)
{
    const TraceFile trace = load_trace(o.trace_path, err);
    const std::string csv = export_csv(trace, o.rails, o.units);
    if (o.csv_path.empty()) {
        out << csv;
    } else {
        write_text(o.csv_path, csv);
        err << "wrote " << trace.frame_count() << " rows to '" << o.csv_path << "'\n";
    }
    return kExitOk;
}

int cmd_analyze(const Options& o, std::ostream& out, std::ostream& err)
{
    const TraceFile trace = load_trace(o.trace_path, err);
    DetectParams params = o.detect;
    if (o.min_duration) params.min_duration_s = *o.min_duration;
    std::optional<PlotSpec> plot;

    if (o.kind == "energy") {
        const EnergyResult e = energy(trace, o.rail, o.from, o.to);
        const double span = e.frames > 1 ? static_cast<double>(e.frames - 1) / trace.header.sample_rate_hz : 0.0;
        out << "rail,t_from_s,t_to_s,frames,energy_j,mean_power_w\n";
        out << o.rail << "," << num(to_seconds(e.t_from_ns)) << "," << num(to_seconds(e.t_to_ns)) << "," << e.frames
            << "," << num(e.joules) << "," << num(span > 0 ? e.joules / span : 0.0) << "\n";
        if (!o.plot_path.empty()) {
            const PowerSeries p = power_series(trace, o.rail);
            PlotSeries s{o.rail + " power", {}, p.power_w};
            for (const std::uint64_t ts : p.timestamps_ns) s.x.push_back(to_seconds(ts));
            plot = PlotSpec{"Power " + o.rail, "time [s]", "P [W]", false, {std::move(s)}, {}};
        }
    } else if (o.kind == "spectrum") {
        const Quantity q = o.quantity == "voltage" ? Quantity::Voltage : Quantity::Current;
        const Window w = o.window == "hann" ? Window::Hann : Window::Rect;
        const Spectrum s = psd(trace, o.rail, q, o.from, o.to, w);
        out << "frequency_hz,power\n";
        for (std::size_t k = 0; k < s.power.size(); ++k) {
            out << num(static_cast<double>(k) * s.bin_hz) << "," << num(s.power[k]) << "\n";
        }
        err << "spectrum: " << s.segment_length << " samples, bin " << num(s.bin_hz) << " Hz, peak (non-DC) "
            << num(s.peak_frequency(true)) << " Hz\n";
        if (!o.plot_path.empty()) {
            PlotSeries ps{o.rail + " " + o.quantity, {}, s.power};
            for (std::size_t k = 0; k < s.power.size(); ++k) ps.x.push_back(static_cast<double>(k) * s.bin_hz);
            plot = PlotSpec{"Spectrum " + o.rail, "frequency [Hz]", "power per bin", true, {std::move(ps)}, {}};
        }
    } else if (o.kind == "frames") {
        const std::vector<DetectedEvent> events = detect_frames(trace, o.rail, params);
        out << "t_start_ns,t_end_ns,peak_current_a\n";
        for (const DetectedEvent& e : events) {
            out << e.t_start_ns << "," << e.t_end_ns << "," << num(e.peak_current_a) << "\n";
        }
        err << "frames: " << events.size() << " events on '" << o.rail << "'\n";
        if (!o.plot_path.empty()) {
            const TraceSeries series(trace);
            const RailConfig& rail = trace.header.rails[find_rail(trace.header.rails, o.rail)];
            const std::vector<std::uint16_t> codes = series.channel(rail.i_channel);
            PlotSeries ps{o.rail + " current", {}, {}};
            for (std::size_t k = 0; k < codes.size(); ++k) {
                ps.x.push_back(to_seconds(series.timestamp_ns(k)));
                ps.y.push_back(codes[k] * current_lsb(rail, trace.header.adc()));
            }
            std::vector<double> markers;
            for (const DetectedEvent& e : events) markers.push_back(to_seconds(e.t_start_ns));
            plot = PlotSpec{"Detected frames " + o.rail, "time [s]", "I [A]", false, {std::move(ps)}, std::move(markers)};
        }
    } else if (o.kind == "compare") {
        const PmbusComparison c = compare_pmbus(trace, o.rail, params);
        out << "rail,mean_abs_error_a,highrate_mean_a,pmbus_mean_a,pmbus_samples,reference_events,pmbus_events,recall,"
               "detectable\n";
        out << o.rail << "," << num(c.mean_abs_error_a) << "," << num(c.highrate_mean_a) << "," << num(c.pmbus_mean_a)
            << "," << c.pmbus_samples << "," << c.reference_events << "," << c.pmbus_events << "," << num(c.recall)
            << "," << (c.detectable ? "true" : "false") << "\n";
        if (!o.plot_path.empty()) {
            const TraceSeries series(trace);
            const RailConfig& rail = trace.header.rails[find_rail(trace.header.rails, o.rail)];
            const std::vector<std::uint16_t> codes = series.channel(rail.i_channel);
            const std::vector<double> held = pmbus_hold_series(trace, o.rail);
            PlotSeries hr{"high-rate", {}, {}};
            PlotSeries pm{"PMBus", {}, held, "#d62728"};
            for (std::size_t k = 0; k < codes.size(); ++k) {
                hr.x.push_back(to_seconds(series.timestamp_ns(k)));
                hr.y.push_back(codes[k] * current_lsb(rail, trace.header.adc()));
            }
            pm.x = hr.x;
            plot = PlotSpec{"High-rate vs PMBus " + o.rail, "time [s]", "I [A]", false, {std::move(hr), std::move(pm)}, {}};
        }
    }

    if (plot) {
        write_text(o.plot_path, render_svg(*plot));
        err << "wrote plot '" << o.plot_path << "'\n";
    }
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"railscope: synthesize, capture and analyse multi-rail power traces", "railscope"};
    app.require_subcommand(1, 1);
    Options o;

    CLI::App* synth = app.add_subcommand("synth", "Write a scenario document from a preset");
    synth->add_option("--preset", o.preset, "Scenario preset")->required()->check(CLI::IsMember({"visual-servoing"}));
    synth->add_option("--out", o.out_path, "Output scenario (.json)")->required();
    synth->add_option("--seed", o.seed, "Noise seed");

    CLI::App* capture = app.add_subcommand("capture", "Run the acquisition model on a scenario");
    capture->add_option("--scenario", o.scenario_path, "Scenario document")->required();
    capture->add_option("--out", o.out_path, "Output trace (.ptrc)")->required();
    capture->add_option("--pretrigger", o.pretrigger, "Pre-trigger window [s] (>= 0.150)");
    capture->add_option("--posttrigger", o.posttrigger, "Post-trigger window [s]");
    capture->add_flag("--serial", o.serial, "Single-threaded reference path");

    CLI::App* decode_cmd = app.add_subcommand("decode", "Export a trace as CSV");
    decode_cmd->add_option("trace", o.trace_path, "Trace file (.ptrc)")->required();
    decode_cmd->add_option("--csv", o.csv_path, "Output CSV (default: standard output)");
    decode_cmd->alias("export");
    decode_cmd->add_flag("--units", o.units, "Volts/amperes instead of raw codes");
    decode_cmd->add_option("--rails", o.rails, "Rails to export (default: all)")->delimiter(',');

    CLI::App* analyze = app.add_subcommand("analyze", "Analyse a trace; prints a CSV table");
    analyze->add_option("kind", o.kind, "energy | spectrum | frames | compare")
        ->required()
        ->check(CLI::IsMember({"energy", "spectrum", "frames", "compare"}));
    analyze->add_option("--trace", o.trace_path, "Trace file (.ptrc)")->required();
    analyze->add_option("--rail", o.rail, "Rail name")->required();
    analyze->add_option("--from", o.from, "Window start [s]");
    analyze->add_option("--to", o.to, "Window end [s]");
    analyze->add_option("--plot", o.plot_path, "Also write an SVG plot");
    analyze->add_option("--quantity", o.quantity, "spectrum: current | voltage")->check(CLI::IsMember({"current", "voltage"}));
    analyze->add_option("--window", o.window, "spectrum: rect | hann")->check(CLI::IsMember({"rect", "hann"}));
    analyze->add_option("--baseline-window", o.detect.baseline_window_s, "frames/compare: rolling baseline [s]");
    analyze->add_option("--k-sigma", o.detect.k_sigma, "frames/compare: threshold in robust sigmas");
    analyze->add_option("--min-duration", o.min_duration, "frames/compare: minimum event length [s]");
    analyze->add_option("--hysteresis", o.detect.hysteresis_fraction, "frames/compare: exit fraction of the threshold");

    std::vector<std::string> argv_storage;
    argv_storage.reserve(args.size() + 1);
    argv_storage.emplace_back("railscope");
    argv_storage.insert(argv_storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (std::string& a : argv_storage) argv.push_back(a.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    try {
        if (synth->parsed()) return cmd_synth(o, err);
        if (capture->parsed()) return cmd_capture(o, err);
        if (decode_cmd->parsed()) return cmd_decode(o, out, err);
        if (analyze->parsed()) return cmd_analyze(o, out, err);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}

}  // namespace railscope::cli
