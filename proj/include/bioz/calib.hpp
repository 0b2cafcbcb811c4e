#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bioz/acquire.hpp"
#include "bioz/parallel.hpp"

namespace bioz::calib {

using afe::GainWord;

struct RawIq {
    double v_i_dc = 0.0;
    double v_q_dc = 0.0;
    double i_amplitude = 0.0;
    double gain_G = 0.0;
    double freq = 0.0;
};

// Uncorrected impedance; still carries the -pi/8 source lag.
Complex extract_impedance(const RawIq& raw);
Complex derotate(Complex z);

// Everything needed to run a measurement; sequences take seeds derived from master_seed.
struct MeasurementSystem {
    tissue::TissueModel load = tissue::resistor(100.0);
    afe::ChainParams params = afe::ChainParams::defaults();
    acquire::AdcSpec adc;
    acquire::SequenceOptions seq;
    int taps = 32;
    std::uint64_t master_seed = 1;
    Exec exec = Exec::Parallel;
};

struct Offsets {
    double v_i = 0.0;
    double v_q = 0.0;
};

Offsets measure_offsets(const MeasurementSystem& sys, GainWord word, int repeats = 64);

struct WordCalibration {
    GainWord word;
    Offsets offsets;
    std::array<double, waveforms::kPlanSize> freqs{};
    std::array<Complex, waveforms::kPlanSize> coeffs{};
};

struct CalibrationTable {
    int version = 1;
    double reference_r = 100.0;
    std::string created_at;
    std::map<unsigned, WordCalibration> words;  // keyed by GainWord::bits()

    bool has(GainWord w) const { return words.count(w.bits()) != 0; }
    const WordCalibration& at(GainWord w) const;
};

struct EqualizationOptions {
    double reference_r = 100.0;
    int repeats = 128;        // collapsed to 1 when the chain is noise free
    int offset_repeats = 64;  // same
};

// Measures the reference resistor at every plan frequency; coeff = reference_r / derotated reading.
WordCalibration build_equalization(const MeasurementSystem& sys, GainWord word, const Offsets& offsets,
                                   const EqualizationOptions& opts = {});

CalibrationTable calibrate(const MeasurementSystem& sys, const std::vector<GainWord>& words,
                           const EqualizationOptions& opts = {}, const std::string& created_at = "");

// Throws CalibrationError if coefficients leave the sanity envelope.
void check_coefficients(const WordCalibration& wc);

enum Flag : unsigned { kSaturated = 1u, kOutOfTable = 2u, kOutOfRange = 4u };
std::string flag_string(unsigned flags);

struct ImpedanceReading {
    Complex z;
    double freq = 0.0;
    GainWord word;
    unsigned flags = 0;
};

// z_raw must come from offset-corrected voltages.
ImpedanceReading apply_calibration(Complex z_raw, const CalibrationTable& table, double freq, GainWord word);

RawIq raw_from(const acquire::SequenceResult& r, const afe::ChainParams& params, const Offsets& offsets);

// One sequence on sys.load, then extraction; calibrated when table is non-null,
// otherwise derotated only.
ImpedanceReading measure_impedance(const MeasurementSystem& sys, const waveforms::SampleSeries& v_sense,
                                   int freq_index, GainWord word, const CalibrationTable* table,
                                   std::uint64_t seed);
ImpedanceReading measure_impedance(const MeasurementSystem& sys, int freq_index, GainWord word,
                                   const CalibrationTable* table, std::uint64_t seed);

GainWord auto_gain(double z_estimate);

std::string to_text(const CalibrationTable& table);
CalibrationTable from_text(const std::string& text);
void save_table(const CalibrationTable& table, const std::string& path);
CalibrationTable load_table(const std::string& path);

}  // namespace bioz::calib
