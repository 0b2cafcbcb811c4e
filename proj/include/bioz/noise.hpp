#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace bioz {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Counter-based seed: the same (master, keys...) always gives the same stream.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> keys) {
    std::uint64_t h = splitmix64(master);
    for (auto k : keys) h = splitmix64(h ^ splitmix64(k + 0x632be59bd9b4e019ULL));
    return h;
}

// White plus 1/f noise. PSD (one-sided) is approximately
//   S(f) = white^2 * (1 + corner / f)   for f above the flicker floor,
// flattening below it. The 1/f part is a bank of first-order autoregressive
// processes, one pole per half decade, scaled so its integral over 1..100 Hz
// matches the ideal 1/f shape exactly.
class ColoredNoise {
public:
    ColoredNoise(double white_density, double flicker_corner, double sample_rate, std::uint64_t seed,
                 double flicker_floor_hz = 1.0);

    double next();
    double sample_rate() const { return fs_; }

    // One-sided PSD of the generated process (V^2/Hz).
    double psd(double f) const;
    // Integral of psd over [f1, f2].
    double band_power(double f1, double f2) const;
    // Same integral for the ideal white + corner/f shape.
    double ideal_band_power(double f1, double f2) const;

private:
    struct Pole {
        double rho;
        double sigma;  // innovation std
        double state;
    };
    double fs_;
    double white_sigma_;
    double white_psd_;
    double corner_ = 0.0;
    std::vector<Pole> poles_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> gauss_{0.0, 1.0};
};

}  // namespace bioz
