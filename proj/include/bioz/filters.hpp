#pragma once

#include <vector>

#include "bioz/common.hpp"

namespace bioz::filters {

// Transposed direct form II; one state per order.
struct FirstOrder {
    double b0 = 1.0, b1 = 0.0, a1 = 0.0;
    double z = 0.0;

    double step(double x) {
        const double y = b0 * x + z;
        z = b1 * x - a1 * y;
        return y;
    }
    Complex response(double f, double fs) const;
};

struct Biquad {
    double b0 = 1.0, b1 = 0.0, b2 = 0.0, a1 = 0.0, a2 = 0.0;
    double z1 = 0.0, z2 = 0.0;

    double step(double x) {
        const double y = b0 * x + z1;
        z1 = b1 * x - a1 * y + z2;
        z2 = b2 * x - a2 * y;
        return y;
    }
    Complex response(double f, double fs) const;
};

// Unity-DC single-pole low-pass, bilinear with the response matched exactly at f_match.
FirstOrder first_order_lowpass(double pole_hz, double fs, double f_match);

// Normalized Chebyshev type I prototype poles (ripple band edge at 1 rad/s), left half plane.
std::vector<Complex> chebyshev1_poles(int order, double ripple_db);

// Chebyshev type I low-pass as a cascade of second-order sections (the real pole of an odd
// order becomes a section with b2 = a2 = 0). Bilinear with prewarping at the cutoff; DC gain 1.
std::vector<Biquad> chebyshev1_lowpass(int order, double cutoff_hz, double ripple_db, double fs);

Complex cascade_response(const std::vector<Biquad>& sections, double f, double fs);

}  // namespace bioz::filters
