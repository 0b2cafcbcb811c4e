#include "bioz/noise.hpp"

#include <cmath>

#include "bioz/common.hpp"

namespace bioz {

namespace {

double ar1_psd(double rho, double sigma, double f, double fs) {
    const double w = 2.0 * kPi * f / fs;
    const double den = 1.0 - 2.0 * rho * std::cos(w) + rho * rho;
    return 2.0 / fs * sigma * sigma / den;
}

template <class F>
double log_simpson(F&& psd, double f1, double f2) {
    // Integrate psd(f) df with f = exp(u); 2048 intervals is far below 1e-6 relative error here.
    const int n = 2048;
    const double u1 = std::log(f1), u2 = std::log(f2);
    const double h = (u2 - u1) / n;
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double u = u1 + i * h;
        const double g = psd(std::exp(u)) * std::exp(u);
        acc += g * ((i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0));
    }
    return acc * h / 3.0;
}

}  // namespace

ColoredNoise::ColoredNoise(double white_density, double flicker_corner, double sample_rate, std::uint64_t seed,
                           double flicker_floor_hz)
    : fs_(sample_rate), rng_(seed) {
    require(white_density >= 0.0 && flicker_corner >= 0.0, "ColoredNoise: densities must be non-negative");
    require(sample_rate > 200.0, "ColoredNoise: sample rate must exceed 200 Hz");
    white_psd_ = white_density * white_density;
    white_sigma_ = white_density * std::sqrt(0.5 * fs_);
    if (flicker_corner > 0.0 && white_density > 0.0) {
        corner_ = flicker_corner;
        for (int k = 0;; ++k) {
            const double fp = flicker_floor_hz * std::pow(10.0, 0.5 * k);
            if (fp > fs_) break;
            const double rho = std::exp(-2.0 * kPi * fp / fs_);
            // Lorentzian DC level proportional to 1/fp gives a 1/f envelope.
            const double sigma = std::sqrt((1.0 / fp) * fs_ * (1.0 - rho) * (1.0 - rho) / 2.0);
            poles_.push_back({rho, sigma, 0.0});
        }
        auto bank = [&](double f) {
            double s = 0.0;
            for (const auto& p : poles_) s += ar1_psd(p.rho, p.sigma, f, fs_);
            return s;
        };
        const double want = white_psd_ * flicker_corner * std::log(100.0);
        const double scale = std::sqrt(want / log_simpson(bank, 1.0, 100.0));
        for (auto& p : poles_) p.sigma *= scale;
    }
    for (auto& p : poles_) p.state = gauss_(rng_) * p.sigma / std::sqrt(1.0 - p.rho * p.rho);
}

double ColoredNoise::next() {
    double v = white_sigma_ * gauss_(rng_);
    for (auto& p : poles_) {
        p.state = p.rho * p.state + p.sigma * gauss_(rng_);
        v += p.state;
    }
    return v;
}

double ColoredNoise::psd(double f) const {
    double s = white_psd_;
    for (const auto& p : poles_) s += ar1_psd(p.rho, p.sigma, f, fs_);
    return s;
}

double ColoredNoise::band_power(double f1, double f2) const {
    require(f1 > 0.0 && f2 > f1 && f2 <= 0.5 * fs_, "band_power: need 0 < f1 < f2 <= fs/2");
    return log_simpson([&](double f) { return psd(f); }, f1, f2);
}

double ColoredNoise::ideal_band_power(double f1, double f2) const {
    return white_psd_ * ((f2 - f1) + corner_ * std::log(f2 / f1));
}

}  // namespace bioz
