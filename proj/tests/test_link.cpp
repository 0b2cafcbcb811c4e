#include <catch_amalgamated.hpp>

#include <cmath>

#include "bioz/link.hpp"

using namespace bioz;
using namespace bioz::link;
using Catch::Approx;

namespace {

ConfigWord word(int freq, int gain = 7, bool src = true, bool q = false, int pll = 0) {
    ConfigWord w;
    w.freq_sel = static_cast<std::uint8_t>(freq);
    w.gain = static_cast<std::uint8_t>(gain);
    w.source_enable = src;
    w.iq_sel = q;
    w.pll_cal = static_cast<std::uint8_t>(pll);
    return w;
}

}  // namespace

TEST_CASE("config word codec", "[link]") {
    CHECK(encode_config(ConfigWord{}) == 0);
    for (unsigned b = 0; b <= kConfigMask; ++b) {
        const auto w = decode_config(static_cast<std::uint16_t>(b));
        CHECK(encode_config(w) == b);
        CHECK(decode_config(encode_config(w)) == w);
    }
    // declared bit positions, MSB first
    CHECK(encode_config(word(0, 0, false, false, 3)) == 0b11000000000);
    CHECK(encode_config(word(15, 0, false)) == 0b00111100000);
    CHECK(encode_config(word(0, 0, true)) == 0b00000010000);
    CHECK(encode_config(word(0, 0, false, true)) == 0b00000001000);
    CHECK(encode_config(word(0, 5, false)) == 0b00000000101);
    CHECK_THROWS_AS(decode_config(0x800), ContractViolation);
    CHECK_THROWS_AS(encode_config(word(16)), ContractViolation);
}

TEST_CASE("reserved frequencies are rejected on use", "[link]") {
    CHECK_THROWS_AS(decode_for_use(encode_config(word(12))), ReservedFrequencyError);
    for (int f = 11; f < 16; ++f) CHECK_THROWS_AS(decode_for_use(encode_config(word(f))), RangeError);
    const auto cfg = decode_for_use(encode_config(word(3, 5, true, true)));
    CHECK(cfg.freq_index == 3);
    CHECK(cfg.gain == afe::kWord101);
    CHECK(cfg.iq == afe::IqPhase::Q);
    CHECK(cfg.source_enable);
    CHECK(from_afe(cfg, 2) == word(3, 5, true, true, 2));
}

TEST_CASE("frame golden bytes", "[link]") {
    CHECK(to_hex(encode_frame(make_ping(0x1234))) == "A5 11 12 34 57");
    CHECK(to_hex(encode_frame(make_read_result())) == "A5 14 14");
    CHECK(to_hex(encode_frame(make_start_measure(32))) == "A5 13 20 33");
    // 11-bit word 0x077 = freq 3, source on, gain 111
    CHECK(encode_config(word(3)) == 0x077);
    CHECK(to_hex(encode_frame(make_set_config(word(3)))) == "A5 12 00 77 89");
    CHECK(opcode_name(Opcode::SetConfig) == "set-config");
    CHECK(opcode_name(Opcode::Nak) == "nak");
    CHECK_THROWS_AS(make_start_measure(0), ContractViolation);
    CHECK_THROWS_AS(encode_frame(Frame{Opcode::Ping, {1}}), ContractViolation);
}

TEST_CASE("frame decode round trip and errors", "[link]") {
    for (const Frame& f : {make_ping(7), make_set_config(word(10, 1)), make_start_measure(255), make_read_result(),
                           Frame{Opcode::Result, {1, 2, 3, 4}}, Frame{Opcode::Nak, {3}}}) {
        const auto b = encode_frame(f);
        const auto d = decode_frame(b);
        CHECK(d.status == DecodeStatus::Ok);
        CHECK(d.frame == f);
        CHECK(payload_length(f.op) + 3 == static_cast<int>(b.size()));
        // every single-bit corruption is caught
        for (std::size_t i = 0; i < b.size(); ++i)
            for (int bit = 0; bit < 8; ++bit) {
                auto c = b;
                c[i] ^= static_cast<std::uint8_t>(1u << bit);
                CHECK(decode_frame(c).status != DecodeStatus::Ok);
            }
    }
    auto b = encode_frame(make_ping(1));
    CHECK(decode_frame({}).status == DecodeStatus::BadSync);
    auto s = b;
    s[0] = 0x5A;
    CHECK(decode_frame(s).status == DecodeStatus::BadSync);
    auto v = b;
    v[1] = 0x21;
    CHECK(decode_frame(v).status == DecodeStatus::BadVersion);
    auto o = b;
    o[1] = 0x1F;
    CHECK(decode_frame(o).status == DecodeStatus::BadOpcode);
    auto l = b;
    l.insert(l.begin() + 2, 0x00);
    CHECK(decode_frame(l).status == DecodeStatus::BadLength);
    auto c = b;
    c.back() ^= 0xff;
    CHECK(decode_frame(c).status == DecodeStatus::BadChecksum);
    CHECK(checksum({0xA5, 0xff, 0x02}, 1, 3) == 0x01);
}

TEST_CASE("power budget", "[link]") {
    CHECK(power_budget(all_blocks()) == Approx(165.5e-6).epsilon(1e-12));
    CHECK(power_budget({Block::Lpf}) == Approx(58.5e-6).epsilon(1e-12));
    CHECK(power_budget(std::vector<Block>{}) == 0.0);
    CHECK(power_budget({Block::Lpf, Block::Lpf}) == power_budget({Block::Lpf}));
    double sum = 0.0;
    for (const auto b : all_blocks()) sum += block_current(b);
    CHECK(sum == Approx(power_budget(all_blocks())));
}

TEST_CASE("UART framing and ASK round trip", "[link]") {
    const auto bits = uart_bits({0x0F});
    CHECK(bits == std::vector<int>{0, 1, 1, 1, 1, 0, 0, 0, 0, 1});
    ChannelParams ch;
    const Bytes msg = encode_frame(make_set_config(word(9, 3, true, true, 1)));
    const auto env = ask_modulate(msg, ch);
    CHECK(env.size() == (msg.size() * 10 + 2) * static_cast<std::size_t>(ch.samples_per_bit));
    CHECK(*std::min_element(env.begin(), env.end()) == Approx(1.0 - ch.ask_depth));
    CHECK(ask_demodulate(env, ch) == msg);
    // modest envelope noise stays below the half-depth decision margin
    ch.envelope_noise = 0.01;
    for (std::uint64_t s = 1; s <= 20; ++s) {
        ch.seed = s;
        CHECK(ask_demodulate(ask_modulate(msg, ch), ch) == msg);
    }
    // heavy noise corrupts frames, which the checksum then catches
    ch.envelope_noise = 0.2;
    int rejected = 0;
    for (std::uint64_t s = 1; s <= 20; ++s) {
        ch.seed = s;
        rejected += decode_frame(ask_demodulate(ask_modulate(msg, ch), ch)).status != DecodeStatus::Ok;
    }
    CHECK(rejected > 10);
}

TEST_CASE("reservoir rests at the clamp while harvesting", "[link]") {
    ChannelParams ch;
    PowerState ps;
    ps.reservoir_voltage = 2.5;
    Reservoir r(ps, ch);
    for (int i = 0; i < 200; ++i) r.run(1e-3, Activity::Idle, 1.0);
    CHECK(r.voltage() == Approx(3.0));
    CHECK_FALSE(r.browned_out());
    for (const auto& p : r.trace()) {
        CHECK(p.v <= 3.0);
        CHECK(p.v >= 0.0);
    }
    CHECK(r.trace().size() == 201);
}

TEST_CASE("reservoir droop follows I t / C", "[link]") {
    ChannelParams ch;
    PowerState ps;
    Reservoir r(ps, ch);
    const double t = 5.0 / ch.bit_rate;
    r.run(t, Activity::ImplantTx, 0.0);
    CHECK(3.0 - r.voltage() == Approx(ps.load_current * t / ps.reservoir_cap).epsilon(1e-9));
    CHECK(3.0 - r.voltage() == Approx(4.3e-3).margin(0.05e-3));
    // one implant byte with five zero bits, recharging in between
    Reservoir b(ps, ch);
    for (const int bit : uart_bits({0x0F})) b.run(1.0 / ch.bit_rate, Activity::ImplantTx, bit ? 1.0 : 0.0);
    const double droop = 3.0 - b.min_voltage();
    CHECK(droop == Approx(ps.load_current * t / ps.reservoir_cap).epsilon(0.10));
}

TEST_CASE("measurement duration", "[link]") {
    const double fb = 1953.125;
    CHECK(measurement_duration(32) == Approx(2.0 * (49 + 31 * 2 + 1) / fb));
    CHECK(measurement_duration(1) == Approx(2.0 * 50 / fb));
    CHECK(measurement_duration(32) > 2 * (0.025 + 0.031));
}

TEST_CASE("full measure transaction at default power", "[link]") {
    int calls = 0;
    const MeasureFn fn = [&](const afe::AfeConfig& cfg, int taps) {
        ++calls;
        CHECK(cfg.freq_index == 3);
        CHECK(taps == 32);
        return std::pair{600.25, 400.5};
    };
    const auto r = session({make_set_config(word(3)), make_start_measure(32), make_read_result()}, {}, PowerState{}, fn);
    CHECK_FALSE(r.brownout);
    CHECK(calls == 1);
    REQUIRE(r.responses.size() == 3);
    CHECK(r.responses[0] == Frame{Opcode::Ack, {0x02}});
    CHECK(r.responses[1] == Frame{Opcode::Ack, {0x03}});
    CHECK(r.responses[2] == Frame{Opcode::Result, {0x96, 0x10, 0x64, 0x20}});  // 600.25*64, 400.5*64
    CHECK(r.frames.size() == 6);
    CHECK(r.min_voltage > 1.9);
    CHECK(r.config == word(3));
    // frames alternate and never overlap
    for (std::size_t i = 1; i < r.frames.size(); ++i) {
        CHECK(r.frames[i].t_start >= r.frames[i - 1].t_end);
        CHECK(r.frames[i].dir != r.frames[i - 1].dir);
    }
    bool measuring = false;
    for (const auto& p : r.trace) measuring |= p.activity == Activity::Measuring;
    CHECK(measuring);
    CHECK(r.trace.back().t > measurement_duration(32));
}

TEST_CASE("protocol replies", "[link]") {
    auto r = session({make_set_config(word(5)), make_ping(0xBEEF), make_read_result()}, {}, PowerState{});
    REQUIRE(r.responses.size() == 3);
    CHECK(r.responses[1] == Frame{Opcode::Echo, {0xBE, 0xEF}});
    CHECK(r.responses[2] == Frame{Opcode::Nak, {static_cast<std::uint8_t>(NakReason::NoResult)}});
    CHECK(r.config == word(5));  // ping leaves the configuration alone

    r = session({make_set_config(word(12))}, {}, PowerState{});
    CHECK(r.responses[0] == Frame{Opcode::Nak, {static_cast<std::uint8_t>(NakReason::ReservedFrequency)}});
    CHECK(r.config == ConfigWord{});

    auto bad = encode_frame(make_ping(3));
    bad.back() ^= 0xff;
    auto bad_op = encode_frame(make_read_result());
    bad_op[1] = 0x1A;  // implant-side opcode sent by the reader
    bad_op.back() = checksum(bad_op, 1, bad_op.size() - 1);
    r = session(std::vector<ReaderCommand>{{bad, 0.0}, {bad_op, 0.0}}, {}, PowerState{});
    REQUIRE(r.responses.size() == 2);
    CHECK(r.responses[0] == Frame{Opcode::Nak, {static_cast<std::uint8_t>(NakReason::Checksum)}});
    CHECK(r.responses[1].op == Opcode::Nak);
}

TEST_CASE("sessions are deterministic", "[link]") {
    ChannelParams ch;
    ch.envelope_noise = 0.08;
    ch.seed = 1234;
    const std::vector<Frame> cmds{make_ping(1), make_set_config(word(2)), make_start_measure(4), make_read_result()};
    const auto a = session(cmds, ch, PowerState{});
    const auto b = session(cmds, ch, PowerState{});
    CHECK(a.responses == b.responses);
    REQUIRE(a.trace.size() == b.trace.size());
    for (std::size_t i = 0; i < a.trace.size(); ++i) CHECK(a.trace[i].v == b.trace[i].v);
    CHECK(a.min_voltage == b.min_voltage);
}

TEST_CASE("brown-out follows a transmit interval", "[link]") {
    ChannelParams ch;
    ch.harvester.source_resistance = 40e3;  // weak field
    PowerState ps;
    ps.reservoir_cap = 0.2e-6;
    std::vector<Frame> cmds;
    for (int i = 0; i < 20; ++i) cmds.push_back(make_ping(0x0000));
    const auto r = session(cmds, ch, ps);
    REQUIRE(r.brownout);
    CHECK(r.min_voltage < 1.9);
    CHECK(r.brownout_time > 0.0);
    REQUIRE(r.trace.size() >= 2);
    const auto act = r.trace.back().activity;
    CHECK((act == Activity::ImplantTx || act == Activity::ReaderTx));
    for (const auto& p : r.trace) CHECK(p.v >= 0.0);
    CHECK(r.responses.size() < cmds.size());
}
