#include "bioz/filters.hpp"

#include <cmath>

namespace bioz::filters {

namespace {

Complex zinv(double f, double fs) { return std::exp(Complex(0.0, -2.0 * kPi * f / fs)); }

}  // namespace

Complex FirstOrder::response(double f, double fs) const {
    const Complex z1 = zinv(f, fs);
    return (b0 + b1 * z1) / (1.0 + a1 * z1);
}

Complex Biquad::response(double f, double fs) const {
    const Complex z1 = zinv(f, fs);
    return (b0 + b1 * z1 + b2 * z1 * z1) / (1.0 + a1 * z1 + a2 * z1 * z1);
}

FirstOrder first_order_lowpass(double pole_hz, double fs, double f_match) {
    require(pole_hz > 0.0 && fs > 0.0, "first_order_lowpass: pole and rate must be positive");
    require(f_match > 0.0 && f_match < 0.5 * fs, "first_order_lowpass: match frequency must be below Nyquist");
    const double wm = 2.0 * kPi * f_match;
    const double k = wm / std::tan(wm / (2.0 * fs));
    const double wp = 2.0 * kPi * pole_hz;
    FirstOrder s;
    s.b0 = wp / (k + wp);
    s.b1 = s.b0;
    s.a1 = (wp - k) / (k + wp);
    return s;
}

std::vector<Complex> chebyshev1_poles(int order, double ripple_db) {
    require(order >= 1, "chebyshev1_poles: order must be >= 1");
    require(ripple_db > 0.0, "chebyshev1_poles: ripple must be positive");
    const double eps = std::sqrt(std::pow(10.0, ripple_db / 10.0) - 1.0);
    const double v = std::asinh(1.0 / eps) / order;
    std::vector<Complex> poles;
    for (int k = 1; k <= order; ++k) {
        const double theta = kPi * (2.0 * k - 1.0) / (2.0 * order);
        poles.emplace_back(-std::sinh(v) * std::sin(theta), std::cosh(v) * std::cos(theta));
    }
    return poles;
}

std::vector<Biquad> chebyshev1_lowpass(int order, double cutoff_hz, double ripple_db, double fs) {
    require(cutoff_hz > 0.0 && cutoff_hz < 0.5 * fs, "chebyshev1_lowpass: cutoff must be below Nyquist");
    const auto proto = chebyshev1_poles(order, ripple_db);
    const double k = 2.0 * fs;
    const double wc = k * std::tan(kPi * cutoff_hz / fs);
    std::vector<Biquad> out;
    for (const auto& p0 : proto) {
        if (p0.imag() < -1e-12) continue;  // conjugate handled with its partner
        const Complex p = wc * p0;
        Biquad s;
        if (std::abs(p.imag()) <= 1e-12 * std::abs(p)) {
            const double a = -p.real();
            const double d = k + a;
            s.b0 = a / d;
            s.b1 = a / d;
            s.a1 = (a - k) / d;
        } else {
            const double alpha = -2.0 * p.real();
            const double beta = std::norm(p);
            const double d = k * k + alpha * k + beta;
            s.b0 = beta / d;
            s.b1 = 2.0 * beta / d;
            s.b2 = beta / d;
            s.a1 = (2.0 * beta - 2.0 * k * k) / d;
            s.a2 = (k * k - alpha * k + beta) / d;
        }
        out.push_back(s);
    }
    return out;
}

Complex cascade_response(const std::vector<Biquad>& sections, double f, double fs) {
    Complex h = 1.0;
    for (const auto& s : sections) h *= s.response(f, fs);
    return h;
}

}  // namespace bioz::filters
