#include "railscope/trace_codec.hpp"

#include "railscope/error.hpp"
#include "railscope/timebase.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

namespace railscope {

AdcConfig TraceHeader::adc() const
{
    AdcConfig adc;
    adc.sample_rate_hz = sample_rate_hz;
    adc.channels = channel_count;
    return adc;
}

std::size_t TraceFile::frame_count() const noexcept
{
    std::size_t n = 0;
    for (const SampleBlock& b : blocks) n += b.frame_count(header.channel_count);
    return n;
}

namespace {

constexpr std::array<std::uint8_t, 4> kMagic = {'P', 'T', 'R', 'C'};

class Writer {
public:
    explicit Writer(std::vector<std::uint8_t>& out) : out_(out) {}

    void u8(std::uint8_t v) { out_.push_back(v); }
    void u16(std::uint16_t v) { put(v, 2); }
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void bytes(const void* p, std::size_t n)
    {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out_.insert(out_.end(), b, b + n);
    }

private:
    void put(std::uint64_t v, int n)
    {
        for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }

    std::vector<std::uint8_t>& out_;
};

// Bounds-checked little-endian reader; every accessor is preceded by has().
class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

    [[nodiscard]] bool has(std::size_t n) const noexcept { return data_.size() - pos_ >= n; }
    [[nodiscard]] std::size_t pos() const noexcept { return pos_; }
    [[nodiscard]] bool at_end() const noexcept { return pos_ == data_.size(); }

    std::uint8_t u8() { return data_[pos_++]; }
    std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::uint64_t u64() { return get(8); }
    std::string str(std::size_t n)
    {
        std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
        pos_ += n;
        return s;
    }

private:
    std::uint64_t get(int n)
    {
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= std::uint64_t{data_[pos_ + static_cast<std::size_t>(i)]} << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }

    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

std::uint32_t to_fixed(double value, double scale, const std::string& what)
{
    const double x = std::round(value * scale);
    if (!(x >= 1.0 && x <= static_cast<double>(std::numeric_limits<std::uint32_t>::max()))) {
        throw DataError("trace header: " + what + " not representable");
    }
    return static_cast<std::uint32_t>(x);
}

void write_header(Writer& w, const TraceHeader& h)
{
    if (h.rails.size() > 255) throw DataError("trace header: more than 255 rails");
    w.bytes(kMagic.data(), kMagic.size());
    w.u16(h.version);
    w.u8(h.channel_count);
    w.u32(h.sample_rate_hz);
    w.u16(h.block_frames);
    w.u8(static_cast<std::uint8_t>(h.rails.size()));
    for (const RailConfig& r : h.rails) {
        if (r.name.size() > 255) throw DataError("trace header: rail name longer than 255 bytes");
        w.u8(static_cast<std::uint8_t>(r.name.size()));
        w.bytes(r.name.data(), r.name.size());
        w.u32(to_fixed(r.shunt_ohms, 1e6, "shunt of '" + r.name + "'"));
        w.u32(to_fixed(r.amp_gain, 1e3, "gain of '" + r.name + "'"));
        w.u8(r.v_channel);
        w.u8(r.i_channel);
        w.u8(static_cast<std::uint8_t>(r.group));
    }
}

template <typename T>
void check_sorted(const std::vector<T>& v, const char* what)
{
    for (std::size_t k = 1; k < v.size(); ++k) {
        if (v[k].timestamp_ns < v[k - 1].timestamp_ns) {
            throw DataError(std::string("trace: ") + what + " timestamps decrease");
        }
    }
}

[[noreturn]] void corrupt(std::size_t offset)
{
    throw DataError("corrupt at offset " + std::to_string(offset));
}

}  // namespace

std::size_t header_bytes(const TraceHeader& header) noexcept
{
    std::size_t n = kFixedHeaderBytes;
    for (const RailConfig& r : header.rails) n += 1 + r.name.size() + 4 + 4 + 3;
    return n;
}

std::vector<std::uint8_t> encode(const TraceFile& trace)
{
    const std::size_t ch = trace.header.channel_count;
    if (ch == 0) throw DataError("trace: channel_count must be > 0");
    for (const SampleBlock& b : trace.blocks) {
        if (b.codes.size() % ch != 0) throw DataError("trace: block width is not a multiple of channel_count");
        if (b.codes.size() / ch > 65535) throw DataError("trace: block holds more than 65535 frames");
    }
    check_sorted(trace.blocks, "block");
    check_sorted(trace.pmbus, "PMBus");
    check_sorted(trace.triggers, "trigger");
    for (const PmbusRecord& r : trace.pmbus) {
        if (r.rail_id >= trace.header.rails.size()) throw DataError("trace: PMBus record for unknown rail");
    }

    std::vector<std::uint8_t> out;
    std::size_t total = header_bytes(trace.header) + trace.pmbus.size() * kPmbusRecordBytes +
                        trace.triggers.size() * kTriggerRecordBytes;
    for (const SampleBlock& b : trace.blocks) total += block_record_bytes(b.codes.size() / ch, ch);
    out.reserve(total);

    Writer w(out);
    write_header(w, trace.header);

    // Three-way merge by timestamp; ties resolve block, pmbus, trigger.
    std::size_t bi = 0, pi = 0, ti = 0;
    constexpr std::uint64_t kNone = std::numeric_limits<std::uint64_t>::max();
    while (bi < trace.blocks.size() || pi < trace.pmbus.size() || ti < trace.triggers.size()) {
        const std::uint64_t tb = bi < trace.blocks.size() ? trace.blocks[bi].timestamp_ns : kNone;
        const std::uint64_t tp = pi < trace.pmbus.size() ? trace.pmbus[pi].timestamp_ns : kNone;
        const std::uint64_t tt = ti < trace.triggers.size() ? trace.triggers[ti].timestamp_ns : kNone;
        if (bi < trace.blocks.size() && tb <= tp && tb <= tt) {
            const SampleBlock& b = trace.blocks[bi++];
            w.u8(kTagBlock);
            w.u64(b.timestamp_ns);
            w.u16(static_cast<std::uint16_t>(b.codes.size() / ch));
            for (const std::uint16_t c : b.codes) w.u16(c);
        } else if (pi < trace.pmbus.size() && tp <= tt) {
            const PmbusRecord& r = trace.pmbus[pi++];
            w.u8(kTagPmbus);
            w.u64(r.timestamp_ns);
            w.u8(r.rail_id);
            w.u16(r.v.raw);
            w.u16(r.i.raw);
        } else {
            const TriggerEvent& e = trace.triggers[ti++];
            w.u8(kTagTrigger);
            w.u64(e.timestamp_ns);
            w.u8(static_cast<std::uint8_t>(e.source));
        }
    }
    return out;
}

DecodeResult decode(std::span<const std::uint8_t> bytes)
{
    Reader r(bytes);
    if (!r.has(4) || std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
        throw DataError("not a trace");
    }
    r.str(4);
    if (!r.has(2)) throw DataError("truncated header");
    DecodeResult result;
    TraceHeader& h = result.trace.header;
    h.version = r.u16();
    if (h.version != TraceHeader::kVersion) throw DataError("unsupported trace version " + std::to_string(h.version));
    if (!r.has(1 + 4 + 2 + 1)) throw DataError("truncated header");
    h.channel_count = r.u8();
    h.sample_rate_hz = r.u32();
    h.block_frames = r.u16();
    const std::size_t rail_count = r.u8();
    for (std::size_t k = 0; k < rail_count; ++k) {
        if (!r.has(1)) throw DataError("truncated header");
        const std::size_t name_len = r.u8();
        if (!r.has(name_len + 4 + 4 + 3)) throw DataError("truncated header");
        RailConfig rail;
        rail.rail_id = static_cast<std::uint8_t>(k);
        rail.name = r.str(name_len);
        rail.shunt_ohms = static_cast<double>(r.u32()) / 1e6;
        rail.amp_gain = static_cast<double>(r.u32()) / 1e3;
        rail.v_channel = r.u8();
        rail.i_channel = r.u8();
        const std::uint8_t group = r.u8();
        if (group > static_cast<std::uint8_t>(RailGroup::HDMI)) throw DataError("corrupt header: rail group");
        rail.group = static_cast<RailGroup>(group);
        h.rails.push_back(std::move(rail));
    }
    if (h.channel_count == 0 || h.sample_rate_hz == 0) throw DataError("corrupt header: zero channel count or rate");
    try {
        AdcConfig adc;
        adc.channels = h.channel_count;
        validate_rails(h.rails, adc);
    } catch (const DataError& e) {
        throw DataError(std::string("corrupt header: ") + e.what());
    }

    TraceFile& t = result.trace;
    const std::size_t ch = h.channel_count;
    std::uint64_t last_ts = 0;
    auto check_order = [&](std::uint64_t ts, std::size_t offset) {
        if (ts < last_ts) corrupt(offset);
        last_ts = ts;
    };

    while (!r.at_end()) {
        const std::size_t offset = r.pos();
        const std::uint8_t tag = r.u8();
        if (tag == kTagBlock) {
            if (!r.has(10)) { ++result.warnings; break; }
            const std::uint64_t ts = r.u64();
            const std::size_t frames = r.u16();
            if (!r.has(frames * ch * 2)) { ++result.warnings; break; }
            check_order(ts, offset);
            SampleBlock b;
            b.timestamp_ns = ts;
            b.codes.resize(frames * ch);
            for (std::uint16_t& c : b.codes) c = r.u16();
            t.blocks.push_back(std::move(b));
        } else if (tag == kTagPmbus) {
            if (!r.has(kPmbusRecordBytes - 1)) { ++result.warnings; break; }
            PmbusRecord p;
            p.timestamp_ns = r.u64();
            p.rail_id = r.u8();
            p.v.raw = r.u16();
            p.i.raw = r.u16();
            if (p.rail_id >= h.rails.size()) corrupt(offset);
            check_order(p.timestamp_ns, offset);
            t.pmbus.push_back(p);
        } else if (tag == kTagTrigger) {
            if (!r.has(kTriggerRecordBytes - 1)) { ++result.warnings; break; }
            TriggerEvent e;
            e.timestamp_ns = r.u64();
            const std::uint8_t source = r.u8();
            if (source != static_cast<std::uint8_t>(TriggerSource::ExternalLine)) corrupt(offset);
            check_order(e.timestamp_ns, offset);
            t.triggers.push_back(e);
        } else {
            corrupt(offset);
        }
    }
    return result;
}

void write_trace_file(const std::filesystem::path& path, const TraceFile& trace)
{
    const std::vector<std::uint8_t> bytes = encode(trace);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write to '" + path.string() + "' failed");
}

DecodeResult read_trace_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode(bytes);
}

std::string export_csv(const TraceFile& trace, std::span<const std::string> rail_names, bool engineering_units)
{
    const TraceHeader& h = trace.header;
    std::vector<const RailConfig*> selected;
    if (rail_names.empty()) {
        for (const RailConfig& r : h.rails) selected.push_back(&r);
    } else {
        for (const std::string& name : rail_names) selected.push_back(&h.rails[find_rail(h.rails, name)]);
    }
    const AdcConfig adc = h.adc();
    const std::size_t ch = h.channel_count;

    std::string out = "timestamp_ns";
    for (const RailConfig* r : selected) out += "," + r->name + "_V," + r->name + "_I";
    out += '\n';

    char buf[64];
    for (const SampleBlock& b : trace.blocks) {
        const std::uint64_t k0 = frame_index_at_or_after(b.timestamp_ns, h.sample_rate_hz);
        const std::size_t frames = b.frame_count(ch);
        for (std::size_t f = 0; f < frames; ++f) {
            out += std::to_string(timestamp_of_frame(k0 + f, h.sample_rate_hz));
            const std::uint16_t* row = b.codes.data() + f * ch;
            for (const RailConfig* r : selected) {
                const std::uint16_t vc = row[r->v_channel];
                const std::uint16_t ic = row[r->i_channel];
                if (engineering_units) {
                    std::snprintf(buf, sizeof buf, ",%.6f,%.6f", code_to_voltage(vc, adc),
                                  sense_to_current(code_to_voltage(ic, adc), *r));
                } else {
                    std::snprintf(buf, sizeof buf, ",%u,%u", unsigned{vc}, unsigned{ic});
                }
                out += buf;
            }
            out += '\n';
        }
    }
    return out;
}

}  // namespace railscope
