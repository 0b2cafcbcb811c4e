#include "bioz/calib.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace bioz::calib {

namespace {

// Seed stream tags.
constexpr std::uint64_t kTagOffset = 0x0ff5e7;
constexpr std::uint64_t kTagEqualize = 0xe9a1;

}  // namespace

Complex extract_impedance(const RawIq& raw) {
    require(raw.i_amplitude > 0.0 && raw.gain_G > 0.0, "extract_impedance: |I| and G must be positive");
    const double k = 0.5 * kPi / (raw.i_amplitude * raw.gain_G);
    // The Q reference lags I by 90 degrees, so a positive V_Q means a negative angle.
    return {k * raw.v_i_dc, -k * raw.v_q_dc};
}

Complex derotate(Complex z) { return z * std::polar(1.0, kPi / 8.0); }

Offsets measure_offsets(const MeasurementSystem& sys, GainWord word, int repeats) {
    require(repeats >= 1, "measure_offsets: repeats must be >= 1");
    const int n = sys.params.noise_enabled ? repeats : 1;
    acquire::SequenceOptions seq = sys.seq;
    seq.source_enable = false;
    afe::AfeConfig cfg;
    cfg.gain = word;
    // The offset does not depend on frequency; the top plan frequency keeps the
    // mixer-translated LNA flicker out of the estimate.
    const int top = 0;
    cfg.freq_index = top;
    // The source stays off, so the load never reaches the chain.
    const auto v = afe::sense_period(tissue::resistor(1.0), cfg, seq.q);
    std::vector<acquire::SequenceResult> res(static_cast<std::size_t>(n));
    for_each_index(
        res.size(),
        [&](std::size_t r) {
            res[r] = acquire::run_sequence(v, top, cfg, sys.params, sys.taps,
                                           derive_seed(sys.master_seed, {kTagOffset, word.bits(), r}), sys.adc, seq);
        },
        sys.exec);
    Offsets o;
    for (const auto& r : res) {
        o.v_i += r.v_i_dc;
        o.v_q += r.v_q_dc;
    }
    o.v_i /= n;
    o.v_q /= n;
    return o;
}

const WordCalibration& CalibrationTable::at(GainWord w) const {
    const auto it = words.find(w.bits());
    if (it == words.end())
        throw CalibrationError("calibration table has no entry for gain word " + w.str());
    return it->second;
}

RawIq raw_from(const acquire::SequenceResult& r, const afe::ChainParams& params, const Offsets& offsets) {
    RawIq raw;
    raw.v_i_dc = r.v_i_dc - offsets.v_i;
    raw.v_q_dc = r.v_q_dc - offsets.v_q;
    raw.i_amplitude = afe::current_amplitude(r.config.gain);
    raw.gain_G = afe::total_gain(params, r.config.gain);
    raw.freq = r.config.fundamental();
    return raw;
}

void check_coefficients(const WordCalibration& wc) {
    for (std::size_t k = 0; k < wc.coeffs.size(); ++k) {
        const double m = std::abs(wc.coeffs[k]);
        if (!(m >= 0.5 && m <= 2.0))
            throw CalibrationError("equalization coefficient " + std::to_string(m) + " at " +
                                   std::to_string(wc.freqs[k]) + " Hz outside [0.5, 2]");
        if (k > 0) {
            const double ratio = m / std::abs(wc.coeffs[k - 1]);
            if (!(ratio >= 0.7 && ratio <= 1.0 / 0.7))
                throw CalibrationError("equalization coefficients jump between " + std::to_string(wc.freqs[k - 1]) +
                                       " and " + std::to_string(wc.freqs[k]) + " Hz");
        }
    }
}

WordCalibration build_equalization(const MeasurementSystem& sys, GainWord word, const Offsets& offsets,
                                   const EqualizationOptions& opts) {
    require(opts.reference_r > 0.0 && opts.repeats >= 1 && opts.offset_repeats >= 1, "build_equalization: bad options");
    const auto plan = waveforms::frequency_plan();
    const int reps = sys.params.noise_enabled ? opts.repeats : 1;
    const std::size_t nf = waveforms::kPlanSize;
    const auto ref = tissue::resistor(opts.reference_r);

    std::vector<waveforms::SampleSeries> v(nf);
    for (std::size_t k = 0; k < nf; ++k) {
        afe::AfeConfig cfg;
        cfg.gain = word;
        cfg.freq_index = static_cast<int>(k);
        v[k] = afe::sense_period(ref, cfg, sys.seq.q);
    }
    std::vector<acquire::SequenceResult> res(nf * static_cast<std::size_t>(reps));
    for_each_index(
        res.size(),
        [&](std::size_t t) {
            const std::size_t k = t / static_cast<std::size_t>(reps);
            const std::size_t r = t % static_cast<std::size_t>(reps);
            afe::AfeConfig cfg;
            cfg.gain = word;
            res[t] = acquire::run_sequence(v[k], static_cast<int>(k), cfg, sys.params, sys.taps,
                                           derive_seed(sys.master_seed, {kTagEqualize, word.bits(), k, r}), sys.adc,
                                           sys.seq);
        },
        sys.exec);

    WordCalibration wc;
    wc.word = word;
    wc.offsets = offsets;
    for (std::size_t k = 0; k < nf; ++k) {
        Complex mean = 0.0;
        for (int r = 0; r < reps; ++r) {
            const auto& s = res[k * static_cast<std::size_t>(reps) + static_cast<std::size_t>(r)];
            if (s.saturated)
                throw CalibrationError("saturation while measuring the reference at " +
                                       std::to_string(plan.sine_fundamentals[k]) + " Hz, word " + word.str());
            mean += derotate(extract_impedance(raw_from(s, sys.params, offsets)));
        }
        mean /= static_cast<double>(reps);
        wc.freqs[k] = plan.sine_fundamentals[k];
        wc.coeffs[k] = opts.reference_r / mean;
    }
    check_coefficients(wc);
    return wc;
}

CalibrationTable calibrate(const MeasurementSystem& sys, const std::vector<GainWord>& words,
                           const EqualizationOptions& opts, const std::string& created_at) {
    CalibrationTable t;
    t.reference_r = opts.reference_r;
    t.created_at = created_at;
    for (const auto w : words) {
        const Offsets o = measure_offsets(sys, w, opts.offset_repeats);
        t.words[w.bits()] = build_equalization(sys, w, o, opts);
    }
    return t;
}

std::string flag_string(unsigned flags) {
    std::string s;
    auto add = [&](unsigned bit, const char* name) {
        if (!(flags & bit)) return;
        if (!s.empty()) s += '|';
        s += name;
    };
    add(kSaturated, "saturated");
    add(kOutOfTable, "out_of_table");
    add(kOutOfRange, "out_of_range");
    return s;
}

ImpedanceReading apply_calibration(Complex z_raw, const CalibrationTable& table, double freq, GainWord word) {
    const WordCalibration& wc = table.at(word);
    ImpedanceReading out{derotate(z_raw), freq, word, 0};
    for (std::size_t k = 0; k < wc.freqs.size(); ++k) {
        if (wc.freqs[k] == freq) {
            out.z *= wc.coeffs[k];
            return out;
        }
    }
    out.flags |= kOutOfTable;
    return out;
}

ImpedanceReading measure_impedance(const MeasurementSystem& sys, const waveforms::SampleSeries& v_sense,
                                   int freq_index, GainWord word, const CalibrationTable* table,
                                   std::uint64_t seed) {
    afe::AfeConfig cfg;
    cfg.gain = word;
    const auto r = acquire::run_sequence(v_sense, freq_index, cfg, sys.params, sys.taps, seed, sys.adc, sys.seq);
    const Offsets off = table ? table->at(word).offsets : Offsets{};
    const Complex z_raw = extract_impedance(raw_from(r, sys.params, off));
    const double f = r.config.fundamental();
    ImpedanceReading out = table ? apply_calibration(z_raw, *table, f, word)
                                 : ImpedanceReading{derotate(z_raw), f, word, 0};
    if (r.saturated) out.flags |= kSaturated;
    return out;
}

ImpedanceReading measure_impedance(const MeasurementSystem& sys, int freq_index, GainWord word,
                                   const CalibrationTable* table, std::uint64_t seed) {
    afe::AfeConfig cfg;
    cfg.gain = word;
    cfg.freq_index = freq_index;
    const auto v = afe::sense_period(sys.load, cfg, sys.seq.q, sys.seq.include_interface);
    return measure_impedance(sys, v, freq_index, word, table, seed);
}

GainWord auto_gain(double z_estimate) {
    require(z_estimate >= 0.0, "auto_gain: negative impedance estimate");
    if (z_estimate < 400.0) return afe::kWord111;
    if (z_estimate < 1200.0) return afe::kWord101;
    if (z_estimate < 3600.0) return afe::kWord001;
    if (z_estimate <= 11000.0) return afe::kWord000;
    throw RangeError("impedance " + std::to_string(z_estimate) + " ohm above the 11 kohm measurement range");
}

// ---------------------------------------------------------------------------

std::string to_text(const CalibrationTable& table) {
    nlohmann::ordered_json j;
    j["format"] = "bioz-calibration";
    j["version"] = table.version;
    j["reference_r"] = table.reference_r;
    j["created_at"] = table.created_at;
    j["words"] = nlohmann::ordered_json::array();
    for (const auto& [bits, wc] : table.words) {
        nlohmann::ordered_json w;
        w["gain_word"] = wc.word.str();
        w["offset_i"] = wc.offsets.v_i;
        w["offset_q"] = wc.offsets.v_q;
        w["coefficients"] = nlohmann::ordered_json::array();
        for (std::size_t k = 0; k < wc.freqs.size(); ++k)
            w["coefficients"].push_back({{"freq_hz", wc.freqs[k]}, {"re", wc.coeffs[k].real()}, {"im", wc.coeffs[k].imag()}});
        j["words"].push_back(w);
    }
    return j.dump(2) + "\n";
}

CalibrationTable from_text(const std::string& text) {
    CalibrationTable t;
    try {
        const auto j = nlohmann::json::parse(text);
        if (j.at("format").get<std::string>() != "bioz-calibration")
            throw ParseError("not a calibration table");
        t.version = j.at("version").get<int>();
        if (t.version != 1) throw ParseError("unsupported calibration table version " + std::to_string(t.version));
        t.reference_r = j.at("reference_r").get<double>();
        t.created_at = j.value("created_at", std::string{});
        for (const auto& w : j.at("words")) {
            WordCalibration wc;
            wc.word = GainWord::parse(w.at("gain_word").get<std::string>());
            wc.offsets.v_i = w.at("offset_i").get<double>();
            wc.offsets.v_q = w.at("offset_q").get<double>();
            const auto& cs = w.at("coefficients");
            if (cs.size() != waveforms::kPlanSize) throw ParseError("calibration table needs 11 coefficients per word");
            for (std::size_t k = 0; k < cs.size(); ++k) {
                wc.freqs[k] = cs[k].at("freq_hz").get<double>();
                wc.coeffs[k] = {cs[k].at("re").get<double>(), cs[k].at("im").get<double>()};
            }
            t.words[wc.word.bits()] = wc;
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("calibration table: ") + e.what());
    }
    return t;
}

void save_table(const CalibrationTable& table, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write calibration table '" + path + "'");
    out << to_text(table);
}

CalibrationTable load_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open calibration table '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_text(ss.str());
}

}  // namespace bioz::calib
