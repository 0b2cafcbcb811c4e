#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bioz/acquire.hpp"

namespace bioz::link {

using Bytes = std::vector<std::uint8_t>;

// ---- configuration word -----------------------------------------------------
// 11 bits, MSB first: pll_cal(2) | freq_sel(4) | source_enable(1) | iq_sel(1) | gain(3)
// gain is G0 G1 G2 with G0 as its most significant bit; iq_sel 1 selects Q.
struct ConfigWord {
    std::uint8_t pll_cal = 0;
    std::uint8_t freq_sel = 0;
    bool source_enable = false;
    bool iq_sel = false;
    std::uint8_t gain = 0;

    friend bool operator==(const ConfigWord&, const ConfigWord&) = default;
};

inline constexpr std::uint16_t kConfigMask = 0x7ff;

std::uint16_t encode_config(const ConfigWord& w);
ConfigWord decode_config(std::uint16_t bits);

struct ReservedFrequencyError : RangeError {
    using RangeError::RangeError;
};

// Rejects freq_sel 11..15.
afe::AfeConfig decode_for_use(std::uint16_t bits);
ConfigWord from_afe(const afe::AfeConfig& cfg, std::uint8_t pll_cal = 0);

// ---- frames -----------------------------------------------------------------
// Wire format v1: [0xA5][version << 4 | opcode][payload...][checksum]
// checksum = sum of every byte after the sync byte, modulo 256.
// Multi-byte payload fields are big-endian.
inline constexpr std::uint8_t kSync = 0xA5;
inline constexpr std::uint8_t kWireVersion = 1;

enum class Opcode : std::uint8_t {
    Ping = 0x1,          // 2 bytes nonce
    SetConfig = 0x2,     // 2 bytes, low 11 bits = config word
    StartMeasure = 0x3,  // 1 byte taps (1..255)
    ReadResult = 0x4,    // empty
    Ack = 0x8,           // 1 byte: acknowledged opcode
    Nak = 0x9,           // 1 byte: NakReason
    Echo = 0xA,          // 2 bytes: ping nonce
    Result = 0xB,        // 4 bytes: I and Q mean ADC code x 64, u16 each
};

enum class NakReason : std::uint8_t { Checksum = 1, Frame = 2, ReservedFrequency = 3, NoResult = 4, BadArgument = 5 };

struct Frame {
    Opcode op = Opcode::Ping;
    Bytes payload;

    friend bool operator==(const Frame&, const Frame&) = default;
};

int payload_length(Opcode op);  // -1 for unknown opcodes
Bytes encode_frame(const Frame& f);
std::uint8_t checksum(const Bytes& bytes, std::size_t begin, std::size_t end);

enum class DecodeStatus { Ok, BadSync, BadVersion, BadOpcode, BadLength, BadChecksum };
struct Decoded {
    DecodeStatus status = DecodeStatus::Ok;
    Frame frame;
};
Decoded decode_frame(const Bytes& bytes);

Frame make_ping(std::uint16_t nonce);
Frame make_set_config(const ConfigWord& w);
Frame make_start_measure(int taps);
Frame make_read_result();

std::string to_hex(const Bytes& bytes);
std::string opcode_name(Opcode op);

// ---- power --------------------------------------------------------------------
enum class Block { PowerMgmt, Pll, SignalGen, LnaMixer, Tia, Lpf, Buffers };

double block_current(Block b);  // amps
double power_budget(std::initializer_list<Block> active);
double power_budget(const std::vector<Block>& active);
std::vector<Block> all_blocks();

struct PowerState {
    double reservoir_voltage = 3.0;
    double reservoir_cap = 20e-6;
    double load_current = 165.5e-6;
    bool harvesting = true;
};

// Rectified source seen by the reservoir: Thevenin voltage and resistance, a power
// ceiling for the available field, the diode-chain clamp and the brown-out level.
struct Harvester {
    double source_voltage = 3.3;
    double source_resistance = 1750.0;
    double available_power = 10e-3;
    double clamp = 3.0;
    double brownout = 1.9;
};

struct ChannelParams {
    double bit_rate = 9600.0;
    int samples_per_bit = 8;          // envelope resolution for ASK
    double ask_depth = 0.1;           // reader carrier dip for a 0 bit
    double envelope_noise = 0.0;      // std of additive envelope noise, relative to carrier
    double turnaround_bits = 2.0;     // idle gap between frames
    bool ask_derates_harvest = true;  // reader 0 bits scale the source voltage by (1 - depth)
    std::uint64_t seed = 1;
    Harvester harvester;
};

// UART framing, LSB first: start 0, 8 data bits, stop 1.
std::vector<int> uart_bits(const Bytes& bytes);
std::vector<double> ask_modulate(const Bytes& bytes, const ChannelParams& ch);
// Comparator at 1 - depth/2; mid-bit sampling after each detected start edge.
Bytes ask_demodulate(const std::vector<double>& envelope, const ChannelParams& ch);

// ---- session ------------------------------------------------------------------
enum class Activity { Idle, ReaderTx, ImplantTx, Measuring };
std::string activity_name(Activity a);

struct TracePoint {
    double t = 0.0;
    double v = 0.0;
    Activity activity = Activity::Idle;
};

enum class Direction { ReaderToImplant, ImplantToReader };

struct FrameEvent {
    double t_start = 0.0;
    double t_end = 0.0;
    Direction dir = Direction::ReaderToImplant;
    Bytes bytes;
};

struct ReaderCommand {
    Bytes bytes;
    double idle_before = 0.0;  // seconds of carrier-only idle before the frame
};

// Runs one measurement for the configured word; returns mean I and Q ADC codes.
using MeasureFn = std::function<std::pair<double, double>(const afe::AfeConfig& cfg, int taps)>;

struct SessionResult {
    std::vector<Frame> responses;
    std::vector<FrameEvent> frames;
    std::vector<TracePoint> trace;
    bool brownout = false;
    double brownout_time = 0.0;
    double min_voltage = 0.0;
    ConfigWord config;
    PowerState final_power;
};

// Reservoir capacitor fed by the rectifier. run() integrates in sub-bit steps and
// appends one trace point per call.
class Reservoir {
public:
    Reservoir(const PowerState& p, const ChannelParams& ch);

    // harvest: 1 = full field, 0 = tank shorted, in between = derated source.
    void run(double duration, Activity act, double harvest);
    double voltage() const { return v_; }
    double time() const { return t_; }
    double min_voltage() const { return v_min_; }
    bool browned_out() const { return brownout_; }
    double brownout_time() const { return t_brownout_; }
    const std::vector<TracePoint>& trace() const { return trace_; }
    PowerState state() const;

private:
    PowerState p_;
    Harvester h_;
    double dt_max_;
    double v_;
    double t_ = 0.0;
    double v_min_;
    bool brownout_ = false;
    double t_brownout_ = 0.0;
    std::vector<TracePoint> trace_;
};

// Duration of a start-measure (I and Q phases) for the given taps.
double measurement_duration(int taps, const acquire::SequenceOptions& seq = {});

SessionResult session(const std::vector<ReaderCommand>& commands, const ChannelParams& ch, PowerState power,
                      const MeasureFn& measure = {});
SessionResult session(const std::vector<Frame>& commands, const ChannelParams& ch, PowerState power,
                      const MeasureFn& measure = {});

}  // namespace bioz::link
