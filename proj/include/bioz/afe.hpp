#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "bioz/common.hpp"
#include "bioz/filters.hpp"
#include "bioz/noise.hpp"
#include "bioz/tissue.hpp"
#include "bioz/waveforms.hpp"

namespace bioz::afe {

using waveforms::IqPhase;
using waveforms::SampleSeries;

// Gain word written G0 G1 G2, e.g. "111". G0/G1 pick the current, G2 the LNA GM.
struct GainWord {
    bool g0 = true, g1 = true, g2 = true;

    unsigned bits() const { return (g0 ? 4u : 0u) | (g1 ? 2u : 0u) | (g2 ? 1u : 0u); }
    static GainWord from_bits(unsigned b) { return {(b & 4u) != 0, (b & 2u) != 0, (b & 1u) != 0}; }
    static GainWord parse(const std::string& s);
    std::string str() const;
    friend bool operator==(GainWord a, GainWord b) { return a.bits() == b.bits(); }
};

inline constexpr GainWord kWord111{true, true, true};
inline constexpr GainWord kWord101{true, false, true};
inline constexpr GainWord kWord001{false, false, true};
inline constexpr GainWord kWord000{false, false, false};

double current_amplitude(GainWord w);  // amps, envelope of the stepped sine
double transconductance(GainWord w);   // siemens

struct AfeConfig {
    GainWord gain = kWord111;
    IqPhase iq = IqPhase::I;
    bool source_enable = true;
    int freq_index = 10;

    double fundamental() const;
};

struct ChainParams {
    double lna_pole = 2.2e6;
    bool lna_pole_enabled = true;
    double tia_gain = 0.0;  // ohms; defaults() sets it so G(111) = 100 pi
    double tia_pole = 10e3;
    double lpf_cutoff = 50.0;
    int lpf_order = 2;
    double lpf_ripple_db = 0.5;
    bool compression_enabled = true;
    std::array<double, 8> compression_knee{};  // volts, indexed by GainWord::bits()
    double offset = 0.015;
    bool noise_enabled = true;
    double noise_floor = 0.0;  // V/sqrt(Hz), white part at the output
    double flicker_corner = 200.0;
    double lna_noise_floor = 0.0;  // V/sqrt(Hz) referred to the LNA input
    double lna_flicker_corner = 1e6;

    static ChainParams defaults();
    // Flicker corner matching the measured 1.63 mVrms output noise.
    static ChainParams measured_corner();
    // No LNA pole, no noise, no offset, no compression.
    static ChainParams ideal();
};

// Dimensionless gain in the Re/Im extraction: GM * tia_gain * mixing efficiency.
double total_gain(const ChainParams& p, GainWord w);

// Ohms at which each word reaches the edge of its linear range.
double linear_limit_ohm(GainWord w);
// Output voltage produced by a resistor of linear_limit_ohm(w), full I/Q vector.
double linear_limit_volts(const ChainParams& p, GainWord w);
// Magnitude loss of a resistor reading exactly at the linear limit.
inline constexpr double kKneeDeviation = 0.0095;

double apply_compression(double v, GainWord w, const ChainParams& p);
double apply_compression(double v, GainWord w);

// Integrated 1..100 Hz output noise of the ideal white + 1/f shape.
double output_noise_rms(const ChainParams& p);

// One-sided PSD of the LNA input noise translated to baseband by the square mixer.
double lna_baseband_psd(const ChainParams& p, double f0);

Complex lna_response(const ChainParams& p, double f);

// DC at the filter output from the harmonic sum; offset included, noise/compression excluded.
double analytic_dc_oracle(const tissue::TissueModel& model, double f0, const AfeConfig& config,
                          const ChainParams& params, int n_max = 63, bool include_interface = false);

SampleSeries noise_process(const ChainParams& params, std::uint64_t seed, double duration, double sample_rate);

// Output (baseband) rate of the engine: one block per period of the lowest plan frequency.
double baseband_rate();
inline constexpr double kMinSettle = 0.025;

enum class Engine { PeriodMap, Reference };

// One period of injected current for a config, sampled at q cells per period.
SampleSeries injected_current(const AfeConfig& config, int q = 64);
// Cell-averaged sense voltage for one period.
SampleSeries sense_period(const tissue::TissueModel& model, const AfeConfig& config, int q = 64,
                          bool include_interface = false);

// Stateful demodulator chain. The sense voltage is one (or more) whole periods treated
// as periodic. Filter states persist across I/Q and source switching.
class DemodChain {
public:
    DemodChain(const SampleSeries& v_sense, double fundamental, const AfeConfig& config, const ChainParams& params,
               std::uint64_t seed, Engine engine = Engine::PeriodMap);
    ~DemodChain();
    DemodChain(DemodChain&&) noexcept;
    DemodChain& operator=(DemodChain&&) noexcept;

    void set_iq(IqPhase phase);
    void set_source(bool enable);
    IqPhase iq() const;
    bool source() const;

    // Advance one baseband block and return the chain output at its end (volts).
    double step_block();
    // Filter output before compression/offset/noise, for the last block.
    double last_linear() const;
    double time() const;  // seconds elapsed
    std::size_t blocks() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

SampleSeries demodulate_time_domain(const SampleSeries& v_sense, double fundamental, const AfeConfig& config,
                                    const ChainParams& params, std::uint64_t seed, double duration,
                                    Engine engine = Engine::PeriodMap);

}  // namespace bioz::afe
