#include "bioz/link.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

namespace bioz::link {

std::uint16_t encode_config(const ConfigWord& w) {
    require(w.pll_cal < 4 && w.freq_sel < 16 && w.gain < 8, "encode_config: field out of range");
    return static_cast<std::uint16_t>((w.pll_cal << 9) | (w.freq_sel << 5) | (w.source_enable ? 1 << 4 : 0) |
                                      (w.iq_sel ? 1 << 3 : 0) | w.gain);
}

ConfigWord decode_config(std::uint16_t bits) {
    require((bits & ~kConfigMask) == 0, "decode_config: more than 11 bits");
    ConfigWord w;
    w.pll_cal = static_cast<std::uint8_t>((bits >> 9) & 0x3);
    w.freq_sel = static_cast<std::uint8_t>((bits >> 5) & 0xf);
    w.source_enable = (bits >> 4) & 1;
    w.iq_sel = (bits >> 3) & 1;
    w.gain = static_cast<std::uint8_t>(bits & 0x7);
    return w;
}

afe::AfeConfig decode_for_use(std::uint16_t bits) {
    const ConfigWord w = decode_config(bits);
    if (w.freq_sel >= waveforms::kPlanSize)
        throw ReservedFrequencyError("freq_sel " + std::to_string(w.freq_sel) + " is reserved");
    afe::AfeConfig cfg;
    cfg.freq_index = w.freq_sel;
    cfg.source_enable = w.source_enable;
    cfg.iq = w.iq_sel ? afe::IqPhase::Q : afe::IqPhase::I;
    cfg.gain = afe::GainWord::from_bits(w.gain);
    return cfg;
}

ConfigWord from_afe(const afe::AfeConfig& cfg, std::uint8_t pll_cal) {
    ConfigWord w;
    w.pll_cal = pll_cal;
    w.freq_sel = static_cast<std::uint8_t>(cfg.freq_index);
    w.source_enable = cfg.source_enable;
    w.iq_sel = cfg.iq == afe::IqPhase::Q;
    w.gain = static_cast<std::uint8_t>(cfg.gain.bits());
    return w;
}

// ---- frames -----------------------------------------------------------------

int payload_length(Opcode op) {
    switch (op) {
        case Opcode::Ping: return 2;
        case Opcode::SetConfig: return 2;
        case Opcode::StartMeasure: return 1;
        case Opcode::ReadResult: return 0;
        case Opcode::Ack: return 1;
        case Opcode::Nak: return 1;
        case Opcode::Echo: return 2;
        case Opcode::Result: return 4;
    }
    return -1;
}

std::uint8_t checksum(const Bytes& bytes, std::size_t begin, std::size_t end) {
    unsigned s = 0;
    for (std::size_t i = begin; i < end; ++i) s += bytes[i];
    return static_cast<std::uint8_t>(s & 0xff);
}

Bytes encode_frame(const Frame& f) {
    const int n = payload_length(f.op);
    require(n >= 0 && static_cast<std::size_t>(n) == f.payload.size(), "encode_frame: payload length mismatch");
    Bytes b;
    b.push_back(kSync);
    b.push_back(static_cast<std::uint8_t>((kWireVersion << 4) | static_cast<std::uint8_t>(f.op)));
    b.insert(b.end(), f.payload.begin(), f.payload.end());
    b.push_back(checksum(b, 1, b.size()));
    return b;
}

Decoded decode_frame(const Bytes& bytes) {
    Decoded d;
    if (bytes.size() < 3 || bytes[0] != kSync) {
        d.status = DecodeStatus::BadSync;
        return d;
    }
    if ((bytes[1] >> 4) != kWireVersion) {
        d.status = DecodeStatus::BadVersion;
        return d;
    }
    const auto op = static_cast<Opcode>(bytes[1] & 0xf);
    const int n = payload_length(op);
    if (n < 0) {
        d.status = DecodeStatus::BadOpcode;
        return d;
    }
    if (bytes.size() != static_cast<std::size_t>(n) + 3) {
        d.status = DecodeStatus::BadLength;
        return d;
    }
    if (checksum(bytes, 1, bytes.size() - 1) != bytes.back()) {
        d.status = DecodeStatus::BadChecksum;
        return d;
    }
    d.frame.op = op;
    d.frame.payload.assign(bytes.begin() + 2, bytes.end() - 1);
    return d;
}

Frame make_ping(std::uint16_t nonce) {
    return {Opcode::Ping, {static_cast<std::uint8_t>(nonce >> 8), static_cast<std::uint8_t>(nonce & 0xff)}};
}

Frame make_set_config(const ConfigWord& w) {
    const std::uint16_t bits = encode_config(w);
    return {Opcode::SetConfig, {static_cast<std::uint8_t>(bits >> 8), static_cast<std::uint8_t>(bits & 0xff)}};
}

Frame make_start_measure(int taps) {
    require(taps >= 1 && taps <= 255, "make_start_measure: taps must be 1..255");
    return {Opcode::StartMeasure, {static_cast<std::uint8_t>(taps)}};
}

Frame make_read_result() { return {Opcode::ReadResult, {}}; }

std::string to_hex(const Bytes& bytes) {
    std::string s;
    char buf[4];
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%02X", bytes[i]);
        if (i) s += ' ';
        s += buf;
    }
    return s;
}

std::string opcode_name(Opcode op) {
    switch (op) {
        case Opcode::Ping: return "ping";
        case Opcode::SetConfig: return "set-config";
        case Opcode::StartMeasure: return "start-measure";
        case Opcode::ReadResult: return "read-result";
        case Opcode::Ack: return "ack";
        case Opcode::Nak: return "nak";
        case Opcode::Echo: return "echo";
        case Opcode::Result: return "result";
    }
    return "unknown";
}

// ---- power --------------------------------------------------------------------

double block_current(Block b) {
    switch (b) {
        case Block::PowerMgmt: return 16.5e-6;
        case Block::Pll: return 22.9e-6;
        case Block::SignalGen: return 29.0e-6;
        case Block::LnaMixer: return 17.4e-6;
        case Block::Tia: return 9.2e-6;
        case Block::Lpf: return 58.5e-6;
        case Block::Buffers: return 12.0e-6;
    }
    return 0.0;
}

double power_budget(const std::vector<Block>& active) {
    std::vector<Block> seen;
    double total = 0.0;
    for (const Block b : active) {
        if (std::find(seen.begin(), seen.end(), b) != seen.end()) continue;
        seen.push_back(b);
        total += block_current(b);
    }
    return total;
}

double power_budget(std::initializer_list<Block> active) { return power_budget(std::vector<Block>(active)); }

std::vector<Block> all_blocks() {
    return {Block::PowerMgmt, Block::Pll, Block::SignalGen, Block::LnaMixer, Block::Tia, Block::Lpf, Block::Buffers};
}

// ---- ASK ----------------------------------------------------------------------

std::vector<int> uart_bits(const Bytes& bytes) {
    std::vector<int> bits;
    bits.reserve(bytes.size() * 10);
    for (const auto b : bytes) {
        bits.push_back(0);
        for (int i = 0; i < 8; ++i) bits.push_back((b >> i) & 1);
        bits.push_back(1);
    }
    return bits;
}

std::vector<double> ask_modulate(const Bytes& bytes, const ChannelParams& ch) {
    require(ch.samples_per_bit >= 1 && ch.ask_depth > 0.0 && ch.ask_depth < 1.0, "ask_modulate: bad channel");
    std::vector<double> env;
    // One idle bit so the first start edge is visible.
    env.insert(env.end(), static_cast<std::size_t>(ch.samples_per_bit), 1.0);
    for (const int bit : uart_bits(bytes))
        env.insert(env.end(), static_cast<std::size_t>(ch.samples_per_bit), bit ? 1.0 : 1.0 - ch.ask_depth);
    env.insert(env.end(), static_cast<std::size_t>(ch.samples_per_bit), 1.0);
    if (ch.envelope_noise > 0.0) {
        std::mt19937_64 rng(ch.seed);
        std::normal_distribution<double> g(0.0, ch.envelope_noise);
        for (auto& e : env) e += g(rng);
    }
    return env;
}

Bytes ask_demodulate(const std::vector<double>& envelope, const ChannelParams& ch) {
    const double thr = 1.0 - 0.5 * ch.ask_depth;
    const auto spb = static_cast<std::size_t>(ch.samples_per_bit);
    auto bit_at = [&](std::size_t center) { return envelope[center] >= thr ? 1 : 0; };
    Bytes out;
    std::size_t i = 1;
    while (i < envelope.size()) {
        if (!(envelope[i - 1] >= thr && envelope[i] < thr)) {
            ++i;
            continue;
        }
        // Start edge at i; bit k is centered at i + k * spb + spb / 2.
        const std::size_t end = i + 10 * spb;
        if (end > envelope.size()) break;
        std::uint8_t byte = 0;
        for (int k = 1; k <= 8; ++k)
            if (bit_at(i + static_cast<std::size_t>(k) * spb + spb / 2)) byte |= static_cast<std::uint8_t>(1u << (k - 1));
        out.push_back(byte);
        // Resume searching inside the stop bit.
        i += 9 * spb + spb / 2;
    }
    return out;
}

// ---- reservoir ----------------------------------------------------------------

Reservoir::Reservoir(const PowerState& p, const ChannelParams& ch)
    : p_(p), h_(ch.harvester), dt_max_(1.0 / (8.0 * ch.bit_rate)), v_(p.reservoir_voltage), v_min_(v_) {
    require(p.reservoir_cap > 0.0 && p.load_current >= 0.0, "Reservoir: bad power state");
    trace_.push_back({0.0, v_, Activity::Idle});
}

void Reservoir::run(double duration, Activity act, double harvest) {
    if (brownout_ || duration <= 0.0) return;
    const int n = std::max(1, static_cast<int>(std::ceil(duration / dt_max_ - 1e-9)));
    const double dt = duration / n;
    for (int i = 0; i < n; ++i) {
        double i_ch = 0.0;
        if (p_.harvesting && harvest > 0.0) {
            i_ch = std::max(0.0, (h_.source_voltage * harvest - v_) / h_.source_resistance);
            i_ch = std::min(i_ch, h_.available_power / std::max(v_, 0.1));
        }
        v_ += (i_ch - p_.load_current) * dt / p_.reservoir_cap;
        v_ = std::clamp(v_, 0.0, h_.clamp);
        t_ += dt;
        v_min_ = std::min(v_min_, v_);
        if (v_ < h_.brownout) {
            brownout_ = true;
            t_brownout_ = t_;
            break;
        }
    }
    trace_.push_back({t_, v_, act});
}

PowerState Reservoir::state() const {
    PowerState s = p_;
    s.reservoir_voltage = v_;
    return s;
}

// ---- session ------------------------------------------------------------------

std::string activity_name(Activity a) {
    switch (a) {
        case Activity::Idle: return "idle";
        case Activity::ReaderTx: return "reader_tx";
        case Activity::ImplantTx: return "implant_tx";
        case Activity::Measuring: return "measuring";
    }
    return "?";
}

double measurement_duration(int taps, const acquire::SequenceOptions& seq) {
    const int per_phase = seq.settle_blocks + (taps - 1) * seq.tap_spacing_blocks + 1;
    return 2.0 * per_phase / afe::baseband_rate();
}

namespace {

Frame nak(NakReason r) { return {Opcode::Nak, {static_cast<std::uint8_t>(r)}}; }
Frame ack(Opcode op) { return {Opcode::Ack, {static_cast<std::uint8_t>(op)}}; }

struct Implant {
    ConfigWord config;
    std::optional<std::pair<std::uint16_t, std::uint16_t>> result;
};

}  // namespace

SessionResult session(const std::vector<ReaderCommand>& commands, const ChannelParams& ch, PowerState power,
                      const MeasureFn& measure) {
    require(power.harvesting, "session: harvesting must be on at session start");
    Reservoir res(power, ch);
    SessionResult out;
    Implant imp;
    const double tbit = 1.0 / ch.bit_rate;
    const double idle_chunk = 1e-3;

    auto idle = [&](double d, Activity act) {
        while (d > 1e-12 && !res.browned_out()) {
            const double step = std::min(d, idle_chunk);
            res.run(step, act, 1.0);
            d -= step;
        }
    };
    auto transmit = [&](const Bytes& bytes, Direction dir) {
        FrameEvent ev{res.time(), 0.0, dir, bytes};
        for (const int bit : uart_bits(bytes)) {
            double harvest = 1.0;
            if (dir == Direction::ImplantToReader) harvest = bit ? 1.0 : 0.0;  // a 0 bit shorts the tank
            else if (!bit && ch.ask_derates_harvest) harvest = 1.0 - ch.ask_depth;
            res.run(tbit, dir == Direction::ImplantToReader ? Activity::ImplantTx : Activity::ReaderTx, harvest);
            if (res.browned_out()) break;
        }
        ev.t_end = res.time();
        out.frames.push_back(ev);
    };

    std::uint64_t frame_no = 0;
    for (const auto& cmd : commands) {
        if (res.browned_out()) break;
        idle(cmd.idle_before, Activity::Idle);
        transmit(cmd.bytes, Direction::ReaderToImplant);
        if (res.browned_out()) break;

        ChannelParams rx = ch;
        rx.seed = derive_seed(ch.seed, {frame_no++});
        const Bytes received = ask_demodulate(ask_modulate(cmd.bytes, rx), rx);
        const Decoded d = decode_frame(received);
        Frame reply;
        if (d.status == DecodeStatus::BadChecksum) {
            reply = nak(NakReason::Checksum);
        } else if (d.status != DecodeStatus::Ok) {
            reply = nak(NakReason::Frame);
        } else {
            const Frame& f = d.frame;
            switch (f.op) {
                case Opcode::Ping: reply = {Opcode::Echo, f.payload}; break;
                case Opcode::SetConfig: {
                    const auto bits = static_cast<std::uint16_t>(((f.payload[0] << 8) | f.payload[1]) & kConfigMask);
                    try {
                        decode_for_use(bits);
                        imp.config = decode_config(bits);
                        reply = ack(f.op);
                    } catch (const ReservedFrequencyError&) {
                        reply = nak(NakReason::ReservedFrequency);
                    }
                    break;
                }
                case Opcode::StartMeasure: {
                    const int taps = f.payload[0];
                    if (taps < 1) {
                        reply = nak(NakReason::BadArgument);
                        break;
                    }
                    idle(ch.turnaround_bits * tbit, Activity::Idle);
                    idle(measurement_duration(taps), Activity::Measuring);
                    if (res.browned_out()) break;
                    const afe::AfeConfig cfg = decode_for_use(encode_config(imp.config));
                    std::pair<double, double> codes{512.0, 512.0};
                    if (measure) codes = measure(cfg, taps);
                    auto q16 = [](double c) {
                        return static_cast<std::uint16_t>(std::clamp(std::lround(c * 64.0), 0L, 65535L));
                    };
                    imp.result = {q16(codes.first), q16(codes.second)};
                    reply = ack(f.op);
                    break;
                }
                case Opcode::ReadResult:
                    if (!imp.result) {
                        reply = nak(NakReason::NoResult);
                    } else {
                        const auto [i, q] = *imp.result;
                        reply = {Opcode::Result,
                                 {static_cast<std::uint8_t>(i >> 8), static_cast<std::uint8_t>(i & 0xff),
                                  static_cast<std::uint8_t>(q >> 8), static_cast<std::uint8_t>(q & 0xff)}};
                    }
                    break;
                default: reply = nak(NakReason::Frame); break;
            }
        }
        if (res.browned_out()) break;
        idle(ch.turnaround_bits * tbit, Activity::Idle);
        const Bytes wire = encode_frame(reply);
        transmit(wire, Direction::ImplantToReader);
        if (res.browned_out()) break;
        out.responses.push_back(decode_frame(wire).frame);
        idle(ch.turnaround_bits * tbit, Activity::Idle);
    }

    out.trace = res.trace();
    out.brownout = res.browned_out();
    out.brownout_time = res.brownout_time();
    out.min_voltage = res.min_voltage();
    out.config = imp.config;
    out.final_power = res.state();
    return out;
}

SessionResult session(const std::vector<Frame>& commands, const ChannelParams& ch, PowerState power,
                      const MeasureFn& measure) {
    std::vector<ReaderCommand> cmds;
    for (const auto& f : commands) cmds.push_back({encode_frame(f), 0.0});
    return session(cmds, ch, power, measure);
}

}  // namespace bioz::link
