#pragma once

#include <array>
#include <cstddef>
#include <variant>
#include <vector>

#include "bioz/common.hpp"

namespace bioz::waveforms {

inline constexpr std::size_t kPlanSize = 11;
inline constexpr int kSteps = 8;
// Minimum samples per period accepted by synthesize and the AFE engine.
inline constexpr int kMinOversampling = 64;

struct FrequencyPlan {
    double ref_clock = 500e3;
    int pll_multiplier = 32;
    std::array<double, kPlanSize> divider_outputs{};
    std::array<double, kPlanSize> sine_fundamentals{};
};

FrequencyPlan frequency_plan();

// Index into the plan for an exact fundamental, or -1.
int plan_index(double fundamental_hz);

struct SteppedSine {
    double amplitude = 0.1;  // differential peak, volts
    std::array<double, kSteps> levels{};
    double fundamental = 0.0;
    double common_mode = 0.9;
};

enum class IqPhase { I, Q };

struct IqClock {
    double fundamental = 0.0;
    IqPhase phase = IqPhase::I;
};

// samples[m] holds the value over [m/fs, (m+1)/fs); t0 is the first cell center.
struct SampleSeries {
    double sample_rate = 0.0;
    double t0 = 0.0;
    std::vector<double> samples;

    std::size_t size() const { return samples.size(); }
    double time_at(std::size_t m) const { return t0 + static_cast<double>(m) / sample_rate; }
};

std::array<double, kSteps> stepped_sine_levels(double amplitude);
SteppedSine make_stepped_sine(double amplitude, double fundamental);

// Samples per period for a rate that satisfies the synthesis contract.
int samples_per_period(double fundamental, double sample_rate);

SampleSeries synthesize(const SteppedSine& spec, double sample_rate, double duration);
SampleSeries synthesize(const IqClock& spec, double sample_rate, double duration);

// Value of the waveform over cell p of a period split into q cells.
double stepped_value(const std::array<double, kSteps>& levels, int p, int q);
double clock_value(IqPhase phase, int p, int q);

// One-sided complex amplitudes A_n, n = 0..n_max, of the continuous ZOH staircase,
// so that x(t) = Re sum A_n exp(j 2 pi n f t) with t = 0 at the I clock rising edge.
std::vector<Complex> harmonic_coefficients(const std::array<double, kSteps>& levels, int n_max);

// Same convention for the I/Q square clocks (exact Fourier series of a +-1 square).
Complex clock_coefficient(IqPhase phase, int n);

// One-sided amplitudes of the waveform sampled at q cell centers per period,
// n = 0..q/2. These reconstruct the sampled series exactly.
std::vector<Complex> sampled_harmonic_coefficients(const std::array<double, kSteps>& levels, int q);

// Exact period average of staircase times clock, from the 16 half-step intervals.
double mixing_dc(const std::array<double, kSteps>& levels, IqPhase phase);

// DC produced by unit-amplitude staircase and square clock relative to a pure sine
// of the same amplitude with the clock fundamental 4/pi: sinc(pi/8) times the
// in-band harmonic pair contribution.
double mixing_efficiency();

}  // namespace bioz::waveforms
