#include <catch_amalgamated.hpp>

#include "railscope/error.hpp"
#include "railscope/trace_codec.hpp"

#include <filesystem>
#include <random>
#include <sstream>

using namespace railscope;

namespace {

TraceHeader default_header()
{
    TraceHeader h;
    h.rails = default_rail_map();
    return h;
}

TraceFile random_trace(std::mt19937_64& rng)
{
    TraceFile t;
    t.header.channel_count = static_cast<std::uint8_t>(2 + rng() % 17);
    t.header.sample_rate_hz = 1000 + static_cast<std::uint32_t>(rng() % 629000);
    t.header.block_frames = static_cast<std::uint16_t>(1 + rng() % 80);
    const std::size_t rails = rng() % (t.header.channel_count / 2 + 1);
    for (std::size_t r = 0; r < rails; ++r) {
        RailConfig rc;
        rc.rail_id = static_cast<std::uint8_t>(r);
        rc.name = "rail_" + std::to_string(rng() % 1000) + "_" + std::to_string(r);
        rc.shunt_ohms = static_cast<double>(1 + rng() % 2'000'000) / 1e6;   // representable in micro-ohms
        rc.amp_gain = static_cast<double>(1 + rng() % 200'000) / 1e3;
        rc.v_channel = static_cast<std::uint8_t>(2 * r);
        rc.i_channel = static_cast<std::uint8_t>(2 * r + 1);
        rc.group = static_cast<RailGroup>(rng() % 4);
        t.header.rails.push_back(rc);
    }
    std::uint64_t ts = rng() % 1'000'000;
    const std::size_t nblocks = rng() % 6;
    for (std::size_t b = 0; b < nblocks; ++b) {
        SampleBlock blk;
        blk.timestamp_ns = ts;
        blk.codes.resize(t.header.block_frames * t.header.channel_count);
        for (auto& c : blk.codes) c = static_cast<std::uint16_t>(rng());
        t.blocks.push_back(std::move(blk));
        ts += 1 + rng() % 1'000'000;
    }
    const std::uint64_t span = ts + 1;
    for (std::size_t k = rails == 0 ? 0 : rng() % 8; k > 0; --k) {
        t.pmbus.push_back({rng() % span, static_cast<std::uint8_t>(rng() % rails), Linear11{static_cast<std::uint16_t>(rng())},
                           Linear11{static_cast<std::uint16_t>(rng())}});
    }
    std::sort(t.pmbus.begin(), t.pmbus.end(), [](const auto& a, const auto& b) { return a.timestamp_ns < b.timestamp_ns; });
    if (rng() % 2) t.triggers.push_back({rng() % span, TriggerSource::ExternalLine});
    return t;
}

}  // namespace

TEST_CASE("empty trace encodes to the header alone", "[trace_codec]")
{
    TraceFile t;
    t.header = default_header();
    const auto bytes = encode(t);
    std::size_t expected = kFixedHeaderBytes;
    for (const RailConfig& r : t.header.rails) expected += 1 + r.name.size() + 4 + 4 + 3;
    CHECK(bytes.size() == expected);
    CHECK(bytes.size() == header_bytes(t.header));
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "PTRC");
    CHECK(decode(bytes).trace == t);
}

TEST_CASE("block record size", "[trace_codec]")
{
    TraceFile t;
    t.header = default_header();
    t.blocks.push_back({123, std::vector<std::uint16_t>(64 * 18, 7)});
    const auto bytes = encode(t);
    CHECK(block_record_bytes(64, 18) == 2315);
    // 2314 payload bytes after the one-byte tag.
    CHECK(bytes.size() - header_bytes(t.header) == 1 + 2314);
    CHECK(bytes[header_bytes(t.header)] == kTagBlock);
}

TEST_CASE("round trip is bit-exact on random traces", "[trace_codec][property]")
{
    std::mt19937_64 rng(5);
    for (int n = 0; n < 300; ++n) {
        const TraceFile t = random_trace(rng);
        const auto bytes = encode(t);
        const DecodeResult d = decode(bytes);
        REQUIRE(d.warnings == 0);
        REQUIRE(d.trace == t);
        REQUIRE(encode(d.trace) == bytes);
    }
}

TEST_CASE("records interleave by timestamp", "[trace_codec]")
{
    TraceFile t;
    t.header.channel_count = 2;
    t.header.block_frames = 1;
    t.header.rails = {RailConfig{0, "r"}};
    t.blocks = {{10, {1, 2}}, {20, {3, 4}}};
    t.pmbus = {{10, 0, {}, {}}, {15, 0, {}, {}}};
    t.triggers = {{10, TriggerSource::ExternalLine}};
    const auto bytes = encode(t);
    std::size_t at = header_bytes(t.header);
    std::vector<std::uint8_t> tags;
    while (at < bytes.size()) {
        tags.push_back(bytes[at]);
        at += bytes[at] == kTagBlock ? block_record_bytes(1, 2)
              : bytes[at] == kTagPmbus ? kPmbusRecordBytes
                                       : kTriggerRecordBytes;
    }
    CHECK(tags == std::vector<std::uint8_t>{kTagBlock, kTagPmbus, kTagTrigger, kTagPmbus, kTagBlock});
}

TEST_CASE("truncated stream keeps complete records and warns once", "[trace_codec]")
{
    TraceFile t;
    t.header = default_header();
    for (int b = 0; b < 3; ++b) t.blocks.push_back({b * 284'444ULL, std::vector<std::uint16_t>(64 * 18, b)});
    const auto bytes = encode(t);
    const std::size_t cut = header_bytes(t.header) + 2 * block_record_bytes(64, 18) + 100;
    const DecodeResult d = decode(std::span(bytes).first(cut));
    CHECK(d.warnings == 1);
    REQUIRE(d.trace.blocks.size() == 2);
    CHECK(d.trace.blocks[1] == t.blocks[1]);

    const DecodeResult tag_only = decode(std::span(bytes).first(header_bytes(t.header) + 1));
    CHECK(tag_only.warnings == 1);
    CHECK(tag_only.trace.blocks.empty());
}

TEST_CASE("decode rejects malformed streams", "[trace_codec][errors]")
{
    TraceFile t;
    t.header = default_header();
    auto bytes = encode(t);

    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_WITH(decode(bad_magic), Catch::Matchers::ContainsSubstring("not a trace"));

    auto bad_version = bytes;
    bad_version[4] = 2;
    CHECK_THROWS_WITH(decode(bad_version), Catch::Matchers::ContainsSubstring("unsupported trace version 2"));

    CHECK_THROWS_WITH(decode(std::span(bytes).first(10)), Catch::Matchers::ContainsSubstring("truncated header"));
    CHECK_THROWS_AS(decode(std::span(bytes).first(header_bytes(t.header) - 1)), DataError);

    auto bad_tag = bytes;
    bad_tag.push_back(0x7F);
    CHECK_THROWS_WITH(decode(bad_tag),
                      Catch::Matchers::ContainsSubstring("corrupt at offset " + std::to_string(bytes.size())));

    const std::vector<std::uint8_t> xxxx{'X', 'X', 'X', 'X', 1, 0};
    CHECK_THROWS_WITH(decode(xxxx), Catch::Matchers::ContainsSubstring("not a trace"));
}

TEST_CASE("decoder terminates on random bytes", "[trace_codec][property]")
{
    std::mt19937_64 rng(17);
    TraceFile seed;
    seed.header = default_header();
    seed.blocks.push_back({0, std::vector<std::uint16_t>(64 * 18, 1)});
    const auto valid = encode(seed);
    for (int n = 0; n < 5000; ++n) {
        std::vector<std::uint8_t> bytes;
        if (n % 2) {
            bytes = valid;
            for (int flips = 1 + rng() % 4; flips > 0; --flips) bytes[rng() % bytes.size()] = static_cast<std::uint8_t>(rng());
            bytes.resize(rng() % (bytes.size() + 1));
        } else {
            bytes.resize(rng() % 200);
            for (auto& b : bytes) b = static_cast<std::uint8_t>(rng());
            if (bytes.size() >= 4 && n % 4 == 0) std::copy_n("PTRC", 4, bytes.begin());
        }
        try {
            (void)decode(bytes);
        } catch (const DataError&) {
        }
    }
    SUCCEED();
}

TEST_CASE("encode rejects unrepresentable traces", "[trace_codec][errors]")
{
    TraceFile t;
    t.header = default_header();
    t.blocks = {{10, std::vector<std::uint16_t>(64 * 18)}, {5, std::vector<std::uint16_t>(64 * 18)}};
    CHECK_THROWS_AS(encode(t), DataError);
    t.blocks = {{10, std::vector<std::uint16_t>(17)}};
    CHECK_THROWS_AS(encode(t), DataError);
    t.blocks.clear();
    t.pmbus = {{0, 9, {}, {}}};
    CHECK_THROWS_AS(encode(t), DataError);
}

TEST_CASE("file round trip", "[trace_codec]")
{
    std::mt19937_64 rng(8);
    const TraceFile t = random_trace(rng);
    const auto path = std::filesystem::temp_directory_path() / "railscope_codec_test.ptrc";
    write_trace_file(path, t);
    CHECK(read_trace_file(path).trace == t);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(read_trace_file(path), DataError);
}

TEST_CASE("CSV export", "[trace_codec]")
{
    TraceFile t;
    t.header = default_header();
    CHECK(export_csv(t, {}, false).find('\n') == export_csv(t, {}, false).size() - 1);
    const std::vector<std::string> sel{"pl_core"};
    CHECK(export_csv(t, sel, true) == "timestamp_ns,pl_core_V,pl_core_I\n");

    std::vector<std::uint16_t> codes(18, 0);
    codes[0] = 6554;
    codes[1] = 3277;
    t.header.block_frames = 1;
    t.blocks = {{4444, codes}};
    CHECK(export_csv(t, sel, true) == "timestamp_ns,pl_core_V,pl_core_I\n4444,1.000061,0.100006\n");
    CHECK(export_csv(t, sel, false) == "timestamp_ns,pl_core_V,pl_core_I\n4444,6554,3277\n");

    t.header.block_frames = 3;
    t.blocks = {{0, std::vector<std::uint16_t>(3 * 18, 1)}, {13333, std::vector<std::uint16_t>(3 * 18, 2)}};
    const std::string csv = export_csv(t, {}, false);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 6);
    const std::vector<std::string> unknown{"nope"};
    CHECK_THROWS_AS(export_csv(t, unknown, false), DataError);
}
