#include <fstream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "bioz/app.hpp"

namespace bioz::app {

namespace {

std::string read_file(const std::string& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw ParseError(std::string("cannot open ") + what + " '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_output(const std::string& text, const std::string& path, std::ostream& out) {
    if (path.empty()) {
        out << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ParseError("cannot write '" + path + "'");
    f << text;
}

Scenario scenario_for(const CliOptions& o) {
    Scenario s = o.scenario.empty() ? Scenario{} : load_scenario(o.scenario);
    if (o.scenario.empty())
        for (int k = static_cast<int>(waveforms::kPlanSize) - 1; k >= 0; --k) s.freq_indices.push_back(k);
    if (o.seed) s.seed = *o.seed;
    if (o.repeats) {
        if (*o.repeats < 1) throw ParseError("--repeats must be >= 1");
        s.repeats = *o.repeats;
    }
    if (!o.format.empty()) {
        if (o.format != "csv" && o.format != "json") throw ParseError("--format must be csv or json");
        s.format = o.format;
    }
    return s;
}

std::vector<afe::GainWord> words_for(const Scenario& s) {
    if (s.gain) return {*s.gain};
    return {afe::kWord111, afe::kWord101, afe::kWord001, afe::kWord000};
}

long parse_long(const std::string& tok, const std::string& line) {
    try {
        std::size_t used = 0;
        const long v = std::stol(tok, &used, 0);
        if (used != tok.size()) throw ParseError("");
        return v;
    } catch (...) {
        throw ParseError("link script: bad number '" + tok + "' in '" + line + "'");
    }
}

link::Frame parse_frame(std::istringstream& in, const std::string& line) {
    std::string verb;
    in >> verb;
    std::vector<std::string> args;
    for (std::string a; in >> a;) args.push_back(a);

    if (verb == "ping") {
        const long nonce = args.empty() ? 0x1234 : parse_long(args[0], line);
        if (nonce < 0 || nonce > 0xffff) throw ParseError("link script: ping nonce must fit 16 bits");
        return link::make_ping(static_cast<std::uint16_t>(nonce));
    }
    if (verb == "set-config") {
        if (args.size() == 1 && args[0].find('=') == std::string::npos) {
            const long bits = parse_long(args[0], line);
            if (bits < 0 || bits > link::kConfigMask) throw ParseError("link script: config word must fit 11 bits");
            return link::make_set_config(link::decode_config(static_cast<std::uint16_t>(bits)));
        }
        link::ConfigWord w;
        w.source_enable = true;
        w.gain = 7;
        for (const auto& a : args) {
            const auto eq = a.find('=');
            if (eq == std::string::npos) throw ParseError("link script: expected key=value in '" + line + "'");
            const std::string k = a.substr(0, eq), v = a.substr(eq + 1);
            if (k == "freq") w.freq_sel = static_cast<std::uint8_t>(parse_long(v, line) & 0xf);
            else if (k == "pll") w.pll_cal = static_cast<std::uint8_t>(parse_long(v, line) & 0x3);
            else if (k == "source") w.source_enable = parse_long(v, line) != 0;
            else if (k == "iq") {
                if (v != "I" && v != "Q") throw ParseError("link script: iq must be I or Q");
                w.iq_sel = v == "Q";
            } else if (k == "gain") {
                try {
                    w.gain = static_cast<std::uint8_t>(afe::GainWord::parse(v).bits());
                } catch (const ContractViolation& e) {
                    throw ParseError(std::string("link script: ") + e.what());
                }
            } else {
                throw ParseError("link script: unknown set-config key '" + k + "'");
            }
        }
        return link::make_set_config(w);
    }
    if (verb == "start-measure") {
        const long taps = args.empty() ? 32 : parse_long(args[0], line);
        if (taps < 1 || taps > 255) throw ParseError("link script: taps must be 1..255");
        return link::make_start_measure(static_cast<int>(taps));
    }
    if (verb == "read-result") {
        if (!args.empty()) throw ParseError("link script: read-result takes no arguments");
        return link::make_read_result();
    }
    throw ParseError("link script: unknown command '" + verb + "'");
}

}  // namespace

std::vector<link::ReaderCommand> parse_link_script(const std::string& text) {
    std::vector<link::ReaderCommand> cmds;
    std::istringstream lines(text);
    double pending_wait = 0.0;
    for (std::string line; std::getline(lines, line);) {
        if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
        std::istringstream in(line);
        std::string first;
        if (!(in >> first)) continue;
        if (first == "wait") {
            std::string d;
            if (!(in >> d)) throw ParseError("link script: wait needs a duration in seconds");
            try {
                pending_wait += std::stod(d);
            } catch (...) {
                throw ParseError("link script: bad duration '" + d + "'");
            }
            continue;
        }
        bool corrupt = first == "corrupt";
        std::istringstream rest(corrupt ? line.substr(line.find("corrupt") + 7) : line);
        link::ReaderCommand c{link::encode_frame(parse_frame(rest, line)), pending_wait};
        if (corrupt) c.bytes.back() = static_cast<std::uint8_t>(~c.bytes.back());
        pending_wait = 0.0;
        cmds.push_back(std::move(c));
    }
    return cmds;
}

std::string format_session(const link::SessionResult& r) {
    std::string s = "# frames\n";
    s += "t_start_ms,t_end_ms,dir,opcode,hex\n";
    for (const auto& f : r.frames) {
        const auto d = link::decode_frame(f.bytes);
        const std::string op = d.status == link::DecodeStatus::Ok ? link::opcode_name(d.frame.op) : "invalid";
        s += fmt::format("{:.4f},{:.4f},{},{},{}\n", f.t_start * 1e3, f.t_end * 1e3,
                         f.dir == link::Direction::ReaderToImplant ? "reader>implant" : "implant>reader", op,
                         link::to_hex(f.bytes));
    }
    s += "# power\n";
    s += "t_ms,v_reservoir,activity\n";
    for (const auto& p : r.trace) s += fmt::format("{:.4f},{:.6f},{}\n", p.t * 1e3, p.v, link::activity_name(p.activity));
    s += fmt::format("# min_voltage {:.6f}\n", r.min_voltage);
    if (r.brownout) s += fmt::format("# brownout at {:.4f} ms\n", r.brownout_time * 1e3);
    return s;
}

int cmd_plan(std::ostream& out) {
    const auto p = waveforms::frequency_plan();
    out << "index,divider_hz,sine_hz\n";
    for (std::size_t k = 0; k < waveforms::kPlanSize; ++k)
        out << fmt::format("{},{:.3f},{:.3f}\n", k, p.divider_outputs[k], p.sine_fundamentals[k]);
    return kExitOk;
}

int cmd_calibrate(const CliOptions& o, std::ostream& out, std::ostream& err) {
    if (o.out.empty()) throw ParseError("calibrate needs --out <file>");
    const Scenario s = scenario_for(o);
    const auto sys = measurement_system(s, o.serial ? Exec::Serial : Exec::Parallel);
    calib::EqualizationOptions eq;
    eq.reference_r = s.reference_r;
    eq.repeats = s.cal_repeats;
    calib::CalibrationTable table;
    try {
        table = calib::calibrate(sys, words_for(s), eq, s.created_at);
    } catch (const CalibrationError& e) {
        err << "calibration failed: " << e.what() << "\n";
        return kExitRange;
    }
    calib::save_table(table, o.out);
    out << "gain_word,freq_hz,coeff_mag,coeff_deg\n";
    for (const auto& [bits, wc] : table.words) {
        (void)bits;
        for (std::size_t k = 0; k < wc.freqs.size(); ++k)
            out << fmt::format("{},{:.3f},{:.6f},{:.4f}\n", wc.word.str(), wc.freqs[k], std::abs(wc.coeffs[k]),
                               deg(std::arg(wc.coeffs[k])));
    }
    return kExitOk;
}

int cmd_sweep(const CliOptions& o, std::ostream& out, std::ostream& err) {
    if (o.cal.empty() == !o.uncalibrated) throw ParseError("sweep needs exactly one of --cal <file> or --uncalibrated");
    const Scenario s = scenario_for(o);
    std::optional<calib::CalibrationTable> table;
    if (!o.cal.empty()) table = calib::load_table(o.cal);
    if (table)
        for (const auto w : words_for(s))
            if (!table->has(w)) throw ParseError("calibration table has no entry for gain word " + w.str());

    SweepOptions so;
    so.repeats = s.repeats;
    so.table = table ? &*table : nullptr;
    so.exec = o.serial ? Exec::Serial : Exec::Parallel;
    const auto records = run_sweep(s, so);

    write_output(s.format == "json" ? to_json(records, s, table.has_value()) : to_csv(records), o.out, out);

    bool flagged = false;
    for (const auto& r : records) {
        if (r.flags & (calib::kOutOfRange | calib::kSaturated)) {
            flagged = true;
            err << fmt::format("warning: {:.3f} Hz flagged {}\n", r.freq, calib::flag_string(r.flags));
        }
    }
    return flagged && o.strict ? kExitRange : kExitOk;
}

int cmd_link_demo(const CliOptions& o, std::ostream& out, std::ostream& err) {
    if (o.script.empty()) throw ParseError("link-demo needs a script file");
    const auto cmds = parse_link_script(read_file(o.script, "link script"));
    const Scenario s = scenario_for(o);
    const auto sys = measurement_system(s, Exec::Serial);

    link::ChannelParams ch = s.channel;
    ch.seed = s.seed;
    std::uint64_t n_measure = 0;
    const link::MeasureFn measure = [&](const afe::AfeConfig& cfg, int taps) {
        const auto v = afe::sense_period(sys.load, cfg, sys.seq.q, sys.seq.include_interface);
        auto seq = sys.seq;
        seq.source_enable = cfg.source_enable;
        const auto r = acquire::run_sequence(v, cfg.freq_index, cfg, sys.params, taps,
                                             derive_seed(s.seed, {0x11c4, n_measure++}), sys.adc, seq);
        const double lsb = sys.adc.lsb();
        return std::pair{(r.v_i_dc + sys.adc.midscale) / lsb, (r.v_q_dc + sys.adc.midscale) / lsb};
    };
    const auto result = link::session(cmds, ch, s.power, measure);
    write_output(format_session(result), o.out, out);
    if (result.brownout) {
        err << fmt::format("brown-out at {:.4f} ms, reservoir {:.4f} V\n", result.brownout_time * 1e3,
                           result.min_voltage);
        return kExitBrownout;
    }
    return kExitOk;
}

}  // namespace bioz::app
