#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bioz/calib.hpp"
#include "bioz/link.hpp"

namespace bioz::app {

struct Scenario {
    std::string name;
    tissue::TissueModel tissue = tissue::resistor(100.0);
    afe::ChainParams chain = afe::ChainParams::defaults();
    std::uint64_t seed = 1;
    int taps = 32;
    std::optional<afe::GainWord> gain;  // empty = auto ranging
    std::vector<int> freq_indices;      // plan indices, ordered by ascending frequency
    int repeats = 10;
    std::string format = "csv";
    double reference_r = 100.0;
    int cal_repeats = 128;
    bool include_interface = false;
    afe::Engine engine = afe::Engine::PeriodMap;
    std::string created_at;
    // link-demo only
    link::PowerState power;
    link::ChannelParams channel;
};

// Relative table paths resolve against base_dir.
Scenario parse_scenario(const std::string& text, const std::string& base_dir = ".");
Scenario load_scenario(const std::string& path);

calib::MeasurementSystem measurement_system(const Scenario& s, Exec exec = Exec::Parallel);

struct SweepRecord {
    double freq = 0.0;
    Complex z;
    double stderr_ohm = 0.0;  // sample std of |Z| over repeats; 0 for one repeat
    afe::GainWord word;
    unsigned flags = 0;
};

struct SweepOptions {
    int repeats = 10;
    const calib::CalibrationTable* table = nullptr;  // null = uncalibrated
    Exec exec = Exec::Parallel;
};

std::vector<SweepRecord> run_sweep(const Scenario& s, const SweepOptions& opts);

inline constexpr const char* kCsvHeader = "freq_hz,re_ohm,im_ohm,mag_ohm,phase_deg,stderr_ohm,gain_word,flags";
std::string to_csv(const std::vector<SweepRecord>& records);
std::string to_json(const std::vector<SweepRecord>& records, const Scenario& s, bool calibrated);

// ---- link-demo scripts ---------------------------------------------------------
// One command per line, '#' comments:
//   ping [nonce]
//   set-config <hex bits> | set-config freq=<0..15> gain=<G0G1G2> [iq=I|Q] [source=0|1] [pll=0..3]
//   start-measure [taps]
//   read-result
//   corrupt <command...>   same frame with the checksum byte inverted
//   wait <seconds>         carrier-only idle before the next frame
std::vector<link::ReaderCommand> parse_link_script(const std::string& text);

std::string format_session(const link::SessionResult& r);

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRange = 2;
inline constexpr int kExitBrownout = 3;

struct CliOptions {
    std::string scenario;
    std::string cal;
    std::string out;
    std::string script;
    bool uncalibrated = false;
    std::optional<int> repeats;
    std::optional<std::uint64_t> seed;
    std::string format;  // empty = scenario setting
    bool strict = false;
    bool serial = false;
};

int cmd_calibrate(const CliOptions& o, std::ostream& out, std::ostream& err);
int cmd_sweep(const CliOptions& o, std::ostream& out, std::ostream& err);
int cmd_link_demo(const CliOptions& o, std::ostream& out, std::ostream& err);
int cmd_plan(std::ostream& out);

}  // namespace bioz::app
