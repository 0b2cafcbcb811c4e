#include "bioz/afe.hpp"

#include <algorithm>
#include <cmath>

namespace bioz::afe {

GainWord GainWord::parse(const std::string& s) {
    if (s.size() != 3 || s.find_first_not_of("01") != std::string::npos)
        throw ParseError("gain word must be three bits G0G1G2, got '" + s + "'");
    return {s[0] == '1', s[1] == '1', s[2] == '1'};
}

std::string GainWord::str() const {
    return std::string{g0 ? '1' : '0', g1 ? '1' : '0', g2 ? '1' : '0'};
}

double current_amplitude(GainWord w) {
    if (w.g0 && w.g1) return 10e-6;
    if (w.g0 || w.g1) return 10e-6 / 3.0;
    return 10e-6 / 9.0;
}

double transconductance(GainWord w) { return w.g2 ? 20e-6 : 20e-6 / 3.0; }

double AfeConfig::fundamental() const {
    require(freq_index >= 0 && freq_index < static_cast<int>(waveforms::kPlanSize),
            "AfeConfig: freq_index out of 0..10");
    return waveforms::frequency_plan().sine_fundamentals[static_cast<std::size_t>(freq_index)];
}

namespace {

// u = V_limit / V_knee such that a resistor reading at the linear limit, whose raw
// I/Q vector sits at 22.5 deg, loses exactly d of its magnitude.
double knee_ratio(double d) {
    const double c = std::cos(kPi / 8.0), sn = std::sin(kPi / 8.0);
    auto loss = [&](double u) { return 1.0 - std::hypot(std::tanh(u * c), std::tanh(u * sn)) / u; };
    double lo = 1e-6, hi = 3.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (loss(mid) < d) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

ChainParams ChainParams::defaults() {
    ChainParams p;
    p.tia_gain = 100.0 * kPi / (transconductance(kWord111) * waveforms::mixing_efficiency());
    // 1.3 mVrms over 1..100 Hz with a 200 Hz flicker corner.
    p.noise_floor = std::sqrt(1.69e-6 / (99.0 + p.flicker_corner * std::log(100.0)));
    p.lna_noise_floor = 0.105e-6;
    const double u = knee_ratio(kKneeDeviation);
    for (unsigned b = 0; b < 8; ++b) p.compression_knee[b] = linear_limit_volts(p, GainWord::from_bits(b)) / u;
    return p;
}

ChainParams ChainParams::measured_corner() {
    ChainParams p = defaults();
    p.flicker_corner = 327.0;
    return p;
}

ChainParams ChainParams::ideal() {
    ChainParams p = defaults();
    p.lna_pole_enabled = false;
    p.noise_enabled = false;
    p.compression_enabled = false;
    p.offset = 0.0;
    return p;
}

double total_gain(const ChainParams& p, GainWord w) {
    return transconductance(w) * p.tia_gain * waveforms::mixing_efficiency();
}

double linear_limit_ohm(GainWord w) {
    if (w.g2) return 400.0 * current_amplitude(kWord111) / current_amplitude(w);
    return 11000.0 * current_amplitude(kWord000) / current_amplitude(w);
}

double linear_limit_volts(const ChainParams& p, GainWord w) {
    return total_gain(p, w) * (2.0 / kPi) * current_amplitude(w) * linear_limit_ohm(w);
}

double apply_compression(double v, GainWord w, const ChainParams& p) {
    if (!p.compression_enabled) return v;
    const double k = p.compression_knee[w.bits()];
    if (!(k > 0.0)) return v;
    return k * std::tanh(v / k);
}

double apply_compression(double v, GainWord w) {
    static const ChainParams p = ChainParams::defaults();
    return apply_compression(v, w, p);
}

double output_noise_rms(const ChainParams& p) {
    return p.noise_floor * std::sqrt(99.0 + p.flicker_corner * std::log(100.0));
}

Complex lna_response(const ChainParams& p, double f) {
    if (!p.lna_pole_enabled) return 1.0;
    return 1.0 / Complex(1.0, f / p.lna_pole);
}

double lna_baseband_psd(const ChainParams& p, double f0) {
    const double sw = p.lna_noise_floor * p.lna_noise_floor;
    double s = 0.0;
    for (int n = 1; n <= 63; n += 2) {
        const double f = n * f0;
        s += 8.0 / (kPi * kPi * n * n) * sw * (1.0 + p.lna_flicker_corner / f) * std::norm(lna_response(p, f));
    }
    return s;
}

double analytic_dc_oracle(const tissue::TissueModel& model, double f0, const AfeConfig& config,
                          const ChainParams& params, int n_max, bool include_interface) {
    require(!params.noise_enabled && !params.compression_enabled,
            "analytic_dc_oracle: noise and compression must be disabled");
    require(n_max >= 1, "analytic_dc_oracle: n_max must be >= 1");
    if (!config.source_enable) return params.offset;
    const auto levels = waveforms::stepped_sine_levels(current_amplitude(config.gain));
    const auto a = waveforms::harmonic_coefficients(levels, n_max);
    double acc = 0.0;
    for (int n = 1; n <= n_max; ++n) {
        const Complex s = waveforms::clock_coefficient(config.iq, n);
        if (s == 0.0 || a[static_cast<std::size_t>(n)] == 0.0) continue;
        const double f = n * f0;
        const Complex v = a[static_cast<std::size_t>(n)] * tissue::sensed_impedance(model, f, include_interface) *
                          lna_response(params, f);
        acc += 0.5 * (v * std::conj(s)).real();
    }
    return params.offset + transconductance(config.gain) * params.tia_gain * acc;
}

SampleSeries noise_process(const ChainParams& params, std::uint64_t seed, double duration, double sample_rate) {
    require(duration >= 0.0, "noise_process: negative duration");
    ColoredNoise gen(params.noise_floor, params.flicker_corner, sample_rate, seed);
    SampleSeries out{sample_rate, 0.0, {}};
    out.samples.resize(static_cast<std::size_t>(std::llround(duration * sample_rate)));
    for (auto& s : out.samples) s = gen.next();
    return out;
}

double baseband_rate() { return waveforms::frequency_plan().sine_fundamentals[waveforms::kPlanSize - 1]; }

SampleSeries injected_current(const AfeConfig& config, int q) {
    const double f0 = config.fundamental();
    const auto levels = waveforms::stepped_sine_levels(current_amplitude(config.gain));
    SampleSeries s{q * f0, 0.5 / (q * f0), {}};
    waveforms::samples_per_period(f0, s.sample_rate);
    s.samples.resize(static_cast<std::size_t>(q));
    for (int m = 0; m < q; ++m) s.samples[static_cast<std::size_t>(m)] = waveforms::stepped_value(levels, m, q);
    return s;
}

SampleSeries sense_period(const tissue::TissueModel& model, const AfeConfig& config, int q,
                          bool include_interface) {
    tissue::SenseOptions opts;
    opts.include_interface = include_interface;
    return tissue::sense_voltage(model, injected_current(config, q), config.fundamental(), opts);
}

// ---------------------------------------------------------------------------

namespace {

struct BlockMap {
    double a[2][2]{};
    double b[2]{};
    double c[2]{};
    double d = 0.0;
};

}  // namespace

struct DemodChain::Impl {
    int q = 0;
    int periods = 0;  // periods per baseband block
    double fb = 0.0;
    std::vector<double> v;
    std::vector<double> clk[2];
    filters::FirstOrder lna, tia;
    double scale = 0.0;  // GM * tia_gain / samples per block
    IqPhase iq = IqPhase::I;
    bool source = true;
    Engine engine = Engine::PeriodMap;
    GainWord word;
    ChainParams params;
    std::vector<filters::Biquad> lpf;
    bool have_map[4]{};
    BlockMap maps[4];
    std::unique_ptr<ColoredNoise> out_noise;
    std::mt19937_64 lna_rng;
    std::normal_distribution<double> gauss{0.0, 1.0};
    double lna_sigma = 0.0;
    double last_linear = 0.0;
    std::size_t nblocks = 0;

    // Runs one period through LNA, mixer and TIA starting from (z1, z2); returns the TIA output sum.
    double run_period(double& z1, double& z2, IqPhase ph, bool src, bool drive) const {
        filters::FirstOrder l = lna, t = tia;
        l.z = z1;
        t.z = z2;
        const auto& ck = clk[ph == IqPhase::I ? 0 : 1];
        double acc = 0.0;
        for (int m = 0; m < q; ++m) {
            const double x = (src && drive) ? v[static_cast<std::size_t>(m)] : 0.0;
            acc += t.step(ck[static_cast<std::size_t>(m)] * l.step(x));
        }
        z1 = l.z;
        z2 = t.z;
        return acc;
    }

    const BlockMap& block_map() {
        const int key = (iq == IqPhase::I ? 0 : 2) + (source ? 1 : 0);
        if (have_map[key]) return maps[key];
        // Affine one-period map s' = A s + b, sum = c.s + d, from three probe runs.
        double pa[2][2], pb[2], pc[2], pd;
        {
            double z1 = 0.0, z2 = 0.0;
            pd = run_period(z1, z2, iq, source, true);
            pb[0] = z1;
            pb[1] = z2;
        }
        for (int k = 0; k < 2; ++k) {
            double z1 = k == 0 ? 1.0 : 0.0, z2 = k == 1 ? 1.0 : 0.0;
            pc[k] = run_period(z1, z2, iq, source, false);
            pa[0][k] = z1;
            pa[1][k] = z2;
        }
        // Compose `periods` copies: s_k = M s_0 + m.
        BlockMap bm;
        double mm[2][2] = {{1.0, 0.0}, {0.0, 1.0}};
        double mv[2] = {0.0, 0.0};
        for (int p = 0; p < periods; ++p) {
            for (int k = 0; k < 2; ++k) bm.c[k] += pc[0] * mm[0][k] + pc[1] * mm[1][k];
            bm.d += pc[0] * mv[0] + pc[1] * mv[1] + pd;
            double nm[2][2], nv[2];
            for (int r = 0; r < 2; ++r) {
                for (int k = 0; k < 2; ++k) nm[r][k] = pa[r][0] * mm[0][k] + pa[r][1] * mm[1][k];
                nv[r] = pa[r][0] * mv[0] + pa[r][1] * mv[1] + pb[r];
            }
            std::copy(&nm[0][0], &nm[0][0] + 4, &mm[0][0]);
            mv[0] = nv[0];
            mv[1] = nv[1];
        }
        std::copy(&mm[0][0], &mm[0][0] + 4, &bm.a[0][0]);
        bm.b[0] = mv[0];
        bm.b[1] = mv[1];
        maps[key] = bm;
        have_map[key] = true;
        return maps[key];
    }

    double block_sum() {
        if (engine == Engine::Reference) {
            double acc = 0.0;
            for (int p = 0; p < periods; ++p) acc += run_period(lna.z, tia.z, iq, source, true);
            return acc;
        }
        const BlockMap& bm = block_map();
        const double s0 = lna.z, s1 = tia.z;
        const double sum = bm.c[0] * s0 + bm.c[1] * s1 + bm.d;
        lna.z = bm.a[0][0] * s0 + bm.a[0][1] * s1 + bm.b[0];
        tia.z = bm.a[1][0] * s0 + bm.a[1][1] * s1 + bm.b[1];
        return sum;
    }
};

DemodChain::DemodChain(const SampleSeries& v_sense, double fundamental, const AfeConfig& config,
                       const ChainParams& params, std::uint64_t seed, Engine engine)
    : impl_(std::make_unique<Impl>()) {
    auto& s = *impl_;
    s.q = waveforms::samples_per_period(fundamental, v_sense.sample_rate);
    require(v_sense.size() >= static_cast<std::size_t>(s.q), "DemodChain: sense voltage shorter than one period");
    s.fb = baseband_rate();
    const double ratio = fundamental / s.fb;
    s.periods = static_cast<int>(std::llround(ratio));
    require(s.periods >= 1 && std::abs(ratio - s.periods) < 1e-9 * ratio,
            "DemodChain: fundamental must be an integer multiple of the baseband rate");
    s.v.assign(v_sense.samples.begin(), v_sense.samples.begin() + s.q);
    for (int ph = 0; ph < 2; ++ph) {
        s.clk[ph].resize(static_cast<std::size_t>(s.q));
        for (int m = 0; m < s.q; ++m)
            s.clk[ph][static_cast<std::size_t>(m)] =
                waveforms::clock_value(ph == 0 ? IqPhase::I : IqPhase::Q, m, s.q);
    }
    const double fs = v_sense.sample_rate;
    if (params.lna_pole_enabled) s.lna = filters::first_order_lowpass(params.lna_pole, fs, fundamental);
    s.tia = filters::first_order_lowpass(params.tia_pole, fs, std::min(params.tia_pole, 0.25 * fs));
    s.word = config.gain;
    s.params = params;
    s.iq = config.iq;
    s.source = config.source_enable;
    s.engine = engine;
    s.scale = transconductance(config.gain) * params.tia_gain / (static_cast<double>(s.periods) * s.q);
    s.lpf = filters::chebyshev1_lowpass(params.lpf_order, params.lpf_cutoff, params.lpf_ripple_db, s.fb);
    if (params.noise_enabled) {
        s.out_noise = std::make_unique<ColoredNoise>(params.noise_floor, params.flicker_corner, s.fb,
                                                     derive_seed(seed, {1}));
        s.lna_rng.seed(derive_seed(seed, {2}));
        s.lna_sigma = std::sqrt(lna_baseband_psd(params, fundamental) * 0.5 * s.fb);
    }
}

DemodChain::~DemodChain() = default;
DemodChain::DemodChain(DemodChain&&) noexcept = default;
DemodChain& DemodChain::operator=(DemodChain&&) noexcept = default;

void DemodChain::set_iq(IqPhase phase) { impl_->iq = phase; }
void DemodChain::set_source(bool enable) { impl_->source = enable; }
IqPhase DemodChain::iq() const { return impl_->iq; }
bool DemodChain::source() const { return impl_->source; }
double DemodChain::last_linear() const { return impl_->last_linear; }
double DemodChain::time() const { return static_cast<double>(impl_->nblocks) / impl_->fb; }
std::size_t DemodChain::blocks() const { return impl_->nblocks; }

double DemodChain::step_block() {
    auto& s = *impl_;
    const double gm_r = transconductance(s.word) * s.params.tia_gain;
    double x = s.scale * s.block_sum();
    if (s.params.noise_enabled) x += gm_r * s.lna_sigma * s.gauss(s.lna_rng);
    for (auto& sec : s.lpf) x = sec.step(x);
    s.last_linear = x;
    double y = apply_compression(x, s.word, s.params) + s.params.offset;
    if (s.out_noise) y += s.out_noise->next();
    ++s.nblocks;
    return y;
}

SampleSeries demodulate_time_domain(const SampleSeries& v_sense, double fundamental, const AfeConfig& config,
                                    const ChainParams& params, std::uint64_t seed, double duration, Engine engine) {
    require(duration >= kMinSettle, "demodulate_time_domain: duration shorter than the 25 ms settling time");
    DemodChain chain(v_sense, fundamental, config, params, seed, engine);
    const double fb = baseband_rate();
    const auto n = static_cast<std::size_t>(std::ceil(duration * fb - 1e-9));
    SampleSeries out{fb, 1.0 / fb, {}};
    out.samples.resize(n);
    for (auto& y : out.samples) y = chain.step_block();
    return out;
}

}  // namespace bioz::afe
