#include <cmath>

#include <fmt/format.h>
#include <json.hpp>

#include "bioz/app.hpp"

namespace bioz::app {

namespace {

constexpr std::uint64_t kTagProbe = 0x9b0e;
constexpr std::uint64_t kTagSweep = 0x5e3e;

struct Probe {
    afe::GainWord word = afe::kWord000;
    unsigned flags = 0;
};

Probe probe_gain(const calib::MeasurementSystem& sys, const waveforms::SampleSeries& v, int k,
                 const calib::CalibrationTable* table) {
    Probe p;
    const calib::CalibrationTable* t = table && table->has(afe::kWord000) ? table : nullptr;
    const auto r = calib::measure_impedance(sys, v, k, afe::kWord000, t,
                                            derive_seed(sys.master_seed, {kTagProbe, static_cast<std::uint64_t>(k)}));
    if (r.flags & calib::kSaturated) {
        p.flags |= calib::kOutOfRange;
        return p;
    }
    try {
        p.word = calib::auto_gain(std::abs(r.z));
    } catch (const RangeError&) {
        p.flags |= calib::kOutOfRange;
    }
    return p;
}

}  // namespace

std::vector<SweepRecord> run_sweep(const Scenario& s, const SweepOptions& opts) {
    require(opts.repeats >= 1, "run_sweep: repeats must be >= 1");
    const auto sys = measurement_system(s, opts.exec);
    const std::size_t nf = s.freq_indices.size();
    const auto reps = static_cast<std::size_t>(opts.repeats);

    // Uncalibrated still subtracts offsets; only the equalization stays at unity.
    calib::CalibrationTable unity;
    const calib::CalibrationTable* table = opts.table;
    if (!table) {
        std::vector<afe::GainWord> words{afe::kWord111, afe::kWord101, afe::kWord001, afe::kWord000};
        if (s.gain) words = {*s.gain, afe::kWord000};
        const auto plan = waveforms::frequency_plan();
        for (const auto w : words) {
            calib::WordCalibration wc;
            wc.word = w;
            wc.offsets = calib::measure_offsets(sys, w);
            wc.freqs = plan.sine_fundamentals;
            wc.coeffs.fill(1.0);
            unity.words[w.bits()] = wc;
        }
        table = &unity;
    }

    std::vector<Probe> probe(nf);
    for_each_index(
        nf,
        [&](std::size_t i) {
            const int k = s.freq_indices[i];
            if (s.gain) {
                probe[i].word = *s.gain;
                return;
            }
            afe::AfeConfig cfg;
            cfg.gain = afe::kWord000;
            cfg.freq_index = k;
            probe[i] = probe_gain(sys, afe::sense_period(s.tissue, cfg, sys.seq.q, s.include_interface), k, table);
        },
        opts.exec);

    std::vector<waveforms::SampleSeries> v(nf);
    for_each_index(
        nf,
        [&](std::size_t i) {
            afe::AfeConfig cfg;
            cfg.gain = probe[i].word;
            cfg.freq_index = s.freq_indices[i];
            v[i] = afe::sense_period(s.tissue, cfg, sys.seq.q, s.include_interface);
        },
        opts.exec);

    std::vector<calib::ImpedanceReading> readings(nf * reps);
    for_each_index(
        readings.size(),
        [&](std::size_t t) {
            const std::size_t i = t / reps, r = t % reps;
            const int k = s.freq_indices[i];
            readings[t] = calib::measure_impedance(
                sys, v[i], k, probe[i].word, table,
                derive_seed(s.seed, {kTagSweep, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(r)}));
        },
        opts.exec);

    std::vector<SweepRecord> out(nf);
    for (std::size_t i = 0; i < nf; ++i) {
        SweepRecord& rec = out[i];
        rec.word = probe[i].word;
        rec.flags = probe[i].flags;
        Complex sum = 0.0;
        double mag_sum = 0.0;
        for (std::size_t r = 0; r < reps; ++r) {
            const auto& rd = readings[i * reps + r];
            rec.freq = rd.freq;
            rec.flags |= rd.flags;
            sum += rd.z;
            mag_sum += std::abs(rd.z);
        }
        rec.z = sum / static_cast<double>(reps);
        if (reps > 1) {
            const double mean_mag = mag_sum / static_cast<double>(reps);
            double ss = 0.0;
            for (std::size_t r = 0; r < reps; ++r) {
                const double d = std::abs(readings[i * reps + r].z) - mean_mag;
                ss += d * d;
            }
            rec.stderr_ohm = std::sqrt(ss / static_cast<double>(reps - 1));
        }
        if (s.gain && std::abs(rec.z) > afe::linear_limit_ohm(rec.word)) rec.flags |= calib::kOutOfRange;
    }
    return out;
}

std::string to_csv(const std::vector<SweepRecord>& records) {
    std::string s = std::string(kCsvHeader) + "\n";
    for (const auto& r : records) {
        s += fmt::format("{:.3f},{:.6f},{:.6f},{:.6f},{:.4f},{:.6f},{},{}\n", r.freq, r.z.real(), r.z.imag(),
                         std::abs(r.z), deg(std::arg(r.z)), r.stderr_ohm, r.word.str(), calib::flag_string(r.flags));
    }
    return s;
}

std::string to_json(const std::vector<SweepRecord>& records, const Scenario& s, bool calibrated) {
    nlohmann::ordered_json j;
    j["scenario"] = s.name;
    j["seed"] = s.seed;
    j["taps"] = s.taps;
    j["calibrated"] = calibrated;
    j["records"] = nlohmann::ordered_json::array();
    for (const auto& r : records) {
        nlohmann::ordered_json o;
        o["freq_hz"] = r.freq;
        o["re_ohm"] = r.z.real();
        o["im_ohm"] = r.z.imag();
        o["mag_ohm"] = std::abs(r.z);
        o["phase_deg"] = deg(std::arg(r.z));
        o["stderr_ohm"] = r.stderr_ohm;
        o["gain_word"] = r.word.str();
        o["flags"] = calib::flag_string(r.flags);
        j["records"].push_back(o);
    }
    return j.dump(2) + "\n";
}

}  // namespace bioz::app
