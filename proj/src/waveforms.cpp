#include "bioz/waveforms.hpp"

#include <cmath>

namespace bioz::waveforms {

namespace {

int floor_div(int a, int b) {
    int q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

}  // namespace

FrequencyPlan frequency_plan() {
    FrequencyPlan plan;
    const double pll_out = plan.ref_clock * plan.pll_multiplier;
    for (std::size_t k = 0; k < kPlanSize; ++k) {
        plan.divider_outputs[k] = std::ldexp(pll_out, -static_cast<int>(k));
        plan.sine_fundamentals[k] = plan.divider_outputs[k] / kSteps;
    }
    return plan;
}

int plan_index(double fundamental_hz) {
    const auto plan = frequency_plan();
    for (std::size_t k = 0; k < kPlanSize; ++k)
        if (plan.sine_fundamentals[k] == fundamental_hz) return static_cast<int>(k);
    return -1;
}

std::array<double, kSteps> stepped_sine_levels(double amplitude) {
    require(amplitude >= 0.0, "stepped_sine_levels: negative amplitude");
    std::array<double, kSteps> levels{};
    for (int k = 0; k < kSteps; ++k)
        levels[k] = amplitude * std::sin(2.0 * kPi * (k + 0.5) / kSteps);
    // Exact antisymmetry instead of whatever sin() rounds to in the second half.
    for (int k = 0; k < kSteps / 2; ++k) levels[k + 4] = -levels[k];
    return levels;
}

SteppedSine make_stepped_sine(double amplitude, double fundamental) {
    require(fundamental > 0.0, "make_stepped_sine: fundamental must be positive");
    SteppedSine s;
    s.amplitude = amplitude;
    s.levels = stepped_sine_levels(amplitude);
    s.fundamental = fundamental;
    return s;
}

int samples_per_period(double fundamental, double sample_rate) {
    require(fundamental > 0.0 && sample_rate > 0.0, "samples_per_period: rates must be positive");
    const double ratio = sample_rate / fundamental;
    const double q = std::round(ratio);
    // The half-step offset puts step edges on sixteenths of a period.
    if (std::abs(ratio - q) > 1e-9 * ratio || static_cast<long long>(q) % 16 != 0)
        throw ContractViolation("sample rate must be an integer multiple of 16 x fundamental");
    if (q < kMinOversampling)
        throw ContractViolation("sample rate must be at least 64 x fundamental");
    return static_cast<int>(q);
}

double stepped_value(const std::array<double, kSteps>& levels, int p, int q) {
    // Step k spans [(k + 1/2) T/8, (k + 3/2) T/8); the first half-step holds level 7.
    int k = floor_div(16 * p + 8 - q, 2 * q);
    k = ((k % kSteps) + kSteps) % kSteps;
    return levels[k];
}

double clock_value(IqPhase phase, int p, int q) {
    const int c = 2 * p + 1;  // cell center in units of T/(2q)
    if (phase == IqPhase::I) return c < q ? 1.0 : -1.0;
    const int c2 = 2 * c;
    return (c2 >= q && c2 < 3 * q) ? 1.0 : -1.0;
}

namespace {

std::size_t sample_count(double sample_rate, double duration) {
    require(duration >= 0.0, "synthesize: negative duration");
    return static_cast<std::size_t>(std::llround(duration * sample_rate));
}

}  // namespace

SampleSeries synthesize(const SteppedSine& spec, double sample_rate, double duration) {
    const int q = samples_per_period(spec.fundamental, sample_rate);
    SampleSeries out;
    out.sample_rate = sample_rate;
    out.t0 = 0.5 / sample_rate;
    const std::size_t n = sample_count(sample_rate, duration);
    out.samples.resize(n);
    for (std::size_t m = 0; m < n; ++m)
        out.samples[m] = stepped_value(spec.levels, static_cast<int>(m % q), q);
    return out;
}

SampleSeries synthesize(const IqClock& spec, double sample_rate, double duration) {
    const int q = samples_per_period(spec.fundamental, sample_rate);
    SampleSeries out;
    out.sample_rate = sample_rate;
    out.t0 = 0.5 / sample_rate;
    const std::size_t n = sample_count(sample_rate, duration);
    out.samples.resize(n);
    for (std::size_t m = 0; m < n; ++m)
        out.samples[m] = clock_value(spec.phase, static_cast<int>(m % q), q);
    return out;
}

std::vector<Complex> harmonic_coefficients(const std::array<double, kSteps>& levels, int n_max) {
    require(n_max >= 0, "harmonic_coefficients: n_max must be non-negative");
    std::vector<Complex> a(static_cast<std::size_t>(n_max) + 1);
    double mean = 0.0;
    for (double l : levels) mean += l;
    a[0] = mean / kSteps;
    const Complex j(0.0, 1.0);
    for (int n = 1; n <= n_max; ++n) {
        Complex c = 0.0;
        for (int k = 0; k < kSteps; ++k) {
            const double ta = (k + 0.5) / kSteps;
            const double tb = (k + 1.5) / kSteps;
            c += levels[k] * (std::exp(-j * (2.0 * kPi * n * ta)) - std::exp(-j * (2.0 * kPi * n * tb)));
        }
        c /= j * (2.0 * kPi * n);
        a[n] = 2.0 * c;
    }
    return a;
}

Complex clock_coefficient(IqPhase phase, int n) {
    if (n <= 0 || n % 2 == 0) return 0.0;
    const Complex a_i(0.0, -4.0 / (kPi * n));
    if (phase == IqPhase::I) return a_i;
    return a_i * std::exp(Complex(0.0, -kPi * n / 2.0));
}

std::vector<Complex> sampled_harmonic_coefficients(const std::array<double, kSteps>& levels, int q) {
    require(q >= 16 && q % 16 == 0, "sampled_harmonic_coefficients: q must be a multiple of 16");
    std::vector<Complex> a(static_cast<std::size_t>(q / 2) + 1);
    for (int n = 0; n <= q / 2; ++n) {
        Complex acc = 0.0;
        for (int m = 0; m < q; ++m) {
            const double ph = -2.0 * kPi * n * (m + 0.5) / q;
            acc += stepped_value(levels, m, q) * Complex(std::cos(ph), std::sin(ph));
        }
        acc /= static_cast<double>(q);
        a[n] = (n == 0 || 2 * n == q) ? acc : 2.0 * acc;
    }
    return a;
}

double mixing_dc(const std::array<double, kSteps>& levels, IqPhase phase) {
    double acc = 0.0;
    for (int p = 0; p < 16; ++p) acc += stepped_value(levels, p, 16) * clock_value(phase, p, 16);
    return acc / 16.0;
}

double mixing_efficiency() {
    const auto unit = stepped_sine_levels(1.0);
    return mixing_dc(unit, IqPhase::I) / ((2.0 / kPi) * std::cos(kPi / 8.0));
}

}  // namespace bioz::waveforms
