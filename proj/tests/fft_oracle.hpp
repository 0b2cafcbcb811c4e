#pragma once

// FFTW-backed helpers shared by the unit tests. Kept separate from the library so
// the spectral checks do not depend on the code under test.

#include <cmath>
#include <complex>
#include <vector>

#include <fftw3.h>

namespace bioz::test {

// One-sided complex amplitudes: x[m] = Re sum_n A_n exp(j 2 pi n m / N).
inline std::vector<std::complex<double>> one_sided_amplitudes(const std::vector<double>& x) {
    const int n = static_cast<int>(x.size());
    std::vector<double> in(x);
    std::vector<fftw_complex> out(static_cast<std::size_t>(n / 2 + 1));
    fftw_plan plan = fftw_plan_dft_r2c_1d(n, in.data(), out.data(), FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);
    std::vector<std::complex<double>> a(out.size());
    for (std::size_t k = 0; k < out.size(); ++k) {
        const double scale = (k == 0 || (n % 2 == 0 && static_cast<int>(k) == n / 2)) ? 1.0 / n : 2.0 / n;
        a[k] = std::complex<double>(out[k][0], out[k][1]) * scale;
    }
    return a;
}

// Mean periodogram over non-overlapping Hann segments, one-sided V^2/Hz.
inline std::vector<double> welch_psd(const std::vector<double>& x, int seg, double fs) {
    std::vector<double> win(static_cast<std::size_t>(seg));
    double wss = 0.0;
    for (int i = 0; i < seg; ++i) {
        win[static_cast<std::size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * 3.14159265358979323846 * i / seg);
        wss += win[static_cast<std::size_t>(i)] * win[static_cast<std::size_t>(i)];
    }
    std::vector<double> psd(static_cast<std::size_t>(seg / 2 + 1), 0.0);
    std::vector<double> buf(static_cast<std::size_t>(seg));
    std::vector<fftw_complex> out(static_cast<std::size_t>(seg / 2 + 1));
    fftw_plan plan = fftw_plan_dft_r2c_1d(seg, buf.data(), out.data(), FFTW_ESTIMATE);
    int count = 0;
    for (std::size_t start = 0; start + static_cast<std::size_t>(seg) <= x.size(); start += static_cast<std::size_t>(seg / 2)) {
        double mean = 0.0;
        for (int i = 0; i < seg; ++i) mean += x[start + static_cast<std::size_t>(i)];
        mean /= seg;
        for (int i = 0; i < seg; ++i)
            buf[static_cast<std::size_t>(i)] = (x[start + static_cast<std::size_t>(i)] - mean) * win[static_cast<std::size_t>(i)];
        fftw_execute(plan);
        for (std::size_t k = 0; k < psd.size(); ++k) psd[k] += out[k][0] * out[k][0] + out[k][1] * out[k][1];
        ++count;
    }
    fftw_destroy_plan(plan);
    for (std::size_t k = 0; k < psd.size(); ++k) {
        psd[k] /= count * fs * wss;
        if (k != 0 && static_cast<int>(k) != seg / 2) psd[k] *= 2.0;
    }
    return psd;
}

inline double integrate_band(const std::vector<double>& psd, int seg, double fs, double f1, double f2) {
    const double df = fs / seg;
    double p = 0.0;
    for (std::size_t k = 1; k < psd.size(); ++k) {
        const double f = static_cast<double>(k) * df;
        if (f >= f1 && f <= f2) p += psd[k] * df;
    }
    return p;
}

}  // namespace bioz::test
