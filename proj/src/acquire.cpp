#include "bioz/acquire.hpp"

#include <algorithm>
#include <cmath>

namespace bioz::acquire {

int adc_sample(double v, const AdcSpec& spec) {
    const double code = std::round(v / spec.lsb());
    if (!(code > 0.0)) return 0;  // also catches NaN
    return static_cast<int>(std::min(code, static_cast<double>(spec.max_code())));
}

SequenceResult run_sequence(const tissue::TissueModel& model, int freq_index, afe::AfeConfig config,
                            const afe::ChainParams& params, int taps, std::uint64_t seed, const AdcSpec& adc,
                            const SequenceOptions& opts) {
    config.freq_index = freq_index;
    const auto v = afe::sense_period(model, config, opts.q, opts.include_interface);
    return run_sequence(v, freq_index, config, params, taps, seed, adc, opts);
}

SequenceResult run_sequence(const waveforms::SampleSeries& v_sense, int freq_index, afe::AfeConfig config,
                            const afe::ChainParams& params, int taps, std::uint64_t seed, const AdcSpec& adc,
                            const SequenceOptions& opts) {
    require(taps >= 1, "run_sequence: taps must be >= 1");
    require(opts.settle_blocks >= 1 && opts.tap_spacing_blocks >= 1, "run_sequence: bad timing");
    config.freq_index = freq_index;
    config.source_enable = opts.source_enable;
    config.iq = afe::IqPhase::I;
    afe::DemodChain chain(v_sense, config.fundamental(), config, params, seed, opts.engine);
    const double tb = 1.0 / afe::baseband_rate();

    SequenceResult r;
    r.config = config;
    r.taps_used = taps;
    r.settle_time = opts.settle_blocks * tb;
    int clamped = 0;
    for (const auto phase : {afe::IqPhase::I, afe::IqPhase::Q}) {
        chain.set_iq(phase);
        PhaseWindow w{phase, chain.time(), 0.0, 0.0};
        long long sum = 0;
        for (int b = 1; b < opts.settle_blocks; ++b) chain.step_block();
        for (int k = 0; k < taps; ++k) {
            if (k > 0)
                for (int b = 1; b < opts.tap_spacing_blocks; ++b) chain.step_block();
            const double y = chain.step_block();
            if (k == 0) w.first_tap = chain.time();
            const double pin = adc.midscale + y;
            const int code = adc_sample(pin, adc);
            if (pin < -0.5 * adc.lsb() || pin > (adc.max_code() + 0.5) * adc.lsb()) ++clamped;
            sum += code;
        }
        w.end = chain.time();
        r.windows.push_back(w);
        const double v = static_cast<double>(sum) / taps * adc.lsb() - adc.midscale;
        (phase == afe::IqPhase::I ? r.v_i_dc : r.v_q_dc) = v;
    }
    chain.set_source(false);
    r.duration = chain.time();
    r.clamp_fraction = static_cast<double>(clamped) / (2.0 * taps);
    r.saturated = r.clamp_fraction >= 0.01;
    return r;
}

}  // namespace bioz::acquire
