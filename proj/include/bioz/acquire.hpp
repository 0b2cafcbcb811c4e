#pragma once

#include <cstdint>
#include <vector>

#include "bioz/afe.hpp"

namespace bioz::acquire {

struct AdcSpec {
    int bits = 10;
    double full_scale = 1.8;
    double midscale = 0.9;  // the chain output rides on this common mode

    int max_code() const { return (1 << bits) - 1; }
    double lsb() const { return full_scale / static_cast<double>(1 << bits); }
};

// v is the absolute pin voltage; out-of-range inputs clamp.
int adc_sample(double v, const AdcSpec& spec = {});

struct SequenceOptions {
    // Timing counted in baseband blocks (512 us each): 49 blocks = 25.088 ms settle,
    // taps every 2 blocks = 1.024 ms.
    int settle_blocks = 49;
    int tap_spacing_blocks = 2;
    afe::Engine engine = afe::Engine::PeriodMap;
    bool source_enable = true;
    int q = 64;  // samples per period in the high-rate section
    bool include_interface = false;
};

struct PhaseWindow {
    afe::IqPhase phase;
    double start;  // s
    double end;    // s
    double first_tap;
};

struct SequenceResult {
    double v_i_dc = 0.0;  // volts relative to midscale
    double v_q_dc = 0.0;
    int taps_used = 0;
    double settle_time = 0.0;
    afe::AfeConfig config;
    bool saturated = false;
    double clamp_fraction = 0.0;
    double duration = 0.0;
    std::vector<PhaseWindow> windows;
};

SequenceResult run_sequence(const tissue::TissueModel& model, int freq_index, afe::AfeConfig config,
                            const afe::ChainParams& params, int taps = 32, std::uint64_t seed = 0,
                            const AdcSpec& adc = {}, const SequenceOptions& opts = {});

// Same, reusing an already computed sense-voltage period.
SequenceResult run_sequence(const waveforms::SampleSeries& v_sense, int freq_index, afe::AfeConfig config,
                            const afe::ChainParams& params, int taps, std::uint64_t seed, const AdcSpec& adc,
                            const SequenceOptions& opts);

}  // namespace bioz::acquire
