// End-to-end acceptance run. Prints one PASS/FAIL line per criterion.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>

#include <fftw3.h>
#include <fmt/format.h>

#include "bioz/app.hpp"

using namespace bioz;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

// Criteria that cannot hold for an ideal 8-step source; see the README section on
// harmonic structure. They are still evaluated with their stated bands.
const std::set<int> kUnattainable = {2, 3};

const auto kPlan = waveforms::frequency_plan();

int seeds_for_noise() {
    if (const char* e = std::getenv("BIOZ_NOISE_SEEDS")) return std::max(100, std::atoi(e));
    return 200;
}

// Noise-off DC outputs of the analog chain (volts above midscale, offset removed).
std::pair<double, double> settled_iq(const tissue::TissueModel& load, int k, afe::GainWord w,
                                     const afe::ChainParams& p, afe::Engine engine = afe::Engine::PeriodMap) {
    afe::AfeConfig cfg;
    cfg.gain = w;
    cfg.freq_index = k;
    const auto v = afe::sense_period(load, cfg);
    afe::DemodChain chain(v, cfg.fundamental(), cfg, p, 0, engine);
    double vi = 0.0, vq = 0.0;
    for (int b = 0; b < 400; ++b) vi = chain.step_block();
    chain.set_iq(afe::IqPhase::Q);
    for (int b = 0; b < 400; ++b) vq = chain.step_block();
    return {vi - p.offset, vq - p.offset};
}

afe::ChainParams quiet(afe::ChainParams p) {
    p.noise_enabled = false;
    return p;
}

calib::CalibrationTable calibrate_all(const calib::MeasurementSystem& sys) {
    return calib::calibrate(sys, {afe::kWord111, afe::kWord101, afe::kWord001, afe::kWord000});
}

// ---------------------------------------------------------------------------

Outcome c1_resolution() {
    const auto t0 = std::chrono::steady_clock::now();
    app::Scenario s;
    s.tissue = tissue::resistor(100.0);
    s.seed = 2024;
    s.taps = 32;
    for (int k = 10; k >= 0; --k) s.freq_indices.push_back(k);
    const auto table = calibrate_all(app::measurement_system(s));
    app::SweepOptions so;
    so.repeats = 10;
    so.table = &table;
    const auto rec = app::run_sweep(s, so);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    double worst = 0.0, worst_f = 0.0;
    for (const auto& r : rec) {
        const double e = std::abs(r.z - 100.0);
        if (e > worst) {
            worst = e;
            worst_f = r.freq;
        }
    }
    return {rec.size() == 11 && worst <= 1.0 && secs < 60.0,
            fmt::format("worst |mean-100| {:.3f} ohm at {:.0f} Hz, limit 1 ohm; {:.1f} s", worst, worst_f, secs)};
}

Outcome c2_harmonics() {
    const int per = 1024, periods = 16, n = per * periods;
    const double f0 = kPlan.sine_fundamentals[10];
    const auto x = waveforms::synthesize(waveforms::make_stepped_sine(0.1, f0), per * f0, periods / f0);
    std::vector<double> in(x.samples);
    std::vector<fftw_complex> out(static_cast<std::size_t>(n / 2 + 1));
    fftw_plan plan = fftw_plan_dft_r2c_1d(n, in.data(), out.data(), FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);
    auto mag = [&](int bin) { return std::hypot(out[static_cast<std::size_t>(bin)][0], out[static_cast<std::size_t>(bin)][1]); };
    const double fund = mag(periods);
    double stray = 0.0;
    for (int b = 1; b <= n / 2; ++b) {
        const bool harmonic = b % periods == 0;
        const int h = b / periods;
        const bool allowed = harmonic && (h % 8 == 1 || h % 8 == 7);
        if (!allowed) stray = std::max(stray, mag(b) / fund);
    }
    const double d7 = 20.0 * std::log10(fund / mag(7 * periods));
    const double d9 = 20.0 * std::log10(fund / mag(9 * periods));
    const bool ok = stray < 1e-9 && d7 >= 17.0 && d7 <= 23.0 && d9 >= 17.0 && d9 <= 23.0;
    return {ok, fmt::format("stray {:.1e}; 7th {:.2f} dB, 9th {:.2f} dB below, band [17, 23]", stray, d7, d9)};
}

Outcome c3_mixing() {
    auto p = afe::ChainParams::defaults();
    p.noise_enabled = false;
    p.compression_enabled = false;
    auto ideal = p;
    ideal.lna_pole_enabled = false;
    ideal.offset = 0.0;

    auto vec = [&](const tissue::TissueModel& m, int k, afe::GainWord w, int n_max, const afe::ChainParams& cp) {
        afe::AfeConfig cfg;
        cfg.gain = w;
        cfg.freq_index = k;
        const double f0 = cfg.fundamental();
        const double vi = afe::analytic_dc_oracle(m, f0, cfg, cp, n_max) - cp.offset;
        cfg.iq = afe::IqPhase::Q;
        const double vq = afe::analytic_dc_oracle(m, f0, cfg, cp, n_max) - cp.offset;
        return Complex(vi, -vq);
    };
    auto mixing_error = [&](const tissue::TissueModel& m, int k) {
        const Complex a = vec(m, k, afe::kWord111, 9, ideal), b = vec(m, k, afe::kWord111, 1, ideal);
        return std::abs(a - b) / std::abs(a);
    };

    const double flat = mixing_error(tissue::resistor(100.0), 10);
    double rc = 0.0;
    const tissue::ParallelRC tissue_rc{1000.0, 1e-7, 0.0};
    for (int k = 0; k < 11; ++k) rc = std::max(rc, mixing_error(tissue_rc, k));

    // Time-domain engine against the harmonic oracle.
    double worst = 0.0;
    for (unsigned bits = 0; bits < 8; ++bits) {
        const auto w = afe::GainWord::from_bits(bits);
        const double r = 0.5 * afe::linear_limit_ohm(w);
        const tissue::ParallelRC load{r, 1.0 / (2.0 * kPi * 100e3 * r), 0.0};
        for (int k = 0; k < 11; ++k) {
            const auto [vi, vq] = settled_iq(load, k, w, p);
            const Complex o = vec(load, k, w, 63, p);
            const double scale = std::abs(o);
            worst = std::max({worst, std::abs(vi - o.real()) / scale, std::abs(-vq - o.imag()) / scale});
        }
    }
    const bool ok = flat >= 0.005 && flat <= 0.02 && rc < 0.01 && worst <= 0.005;
    return {ok, fmt::format("flat load {:.2f}% (target ~1%, band [0.5, 2]); RC {:.2f}% (< 1%); engine vs oracle "
                            "{:.3f}% (<= 0.5%, 88 cases x I/Q)",
                            100 * flat, 100 * rc, 100 * worst)};
}

Outcome c4_rc_response() {
    app::Scenario s;
    s.tissue = tissue::ParallelRC{1000.0, 1e-7, 0.0};
    s.seed = 17;
    s.freq_indices = {10, 4};
    const auto table = calibrate_all(app::measurement_system(s));
    app::SweepOptions so;
    so.repeats = 10;
    so.table = &table;
    const auto rec = app::run_sweep(s, so);
    bool ok = true;
    std::string detail;
    for (const auto& r : rec) {
        const Complex truth = tissue::impedance_at(s.tissue, r.freq);
        const double em = std::abs(r.z) / std::abs(truth) - 1.0;
        const double ep = deg(std::arg(r.z)) - deg(std::arg(truth));
        ok = ok && std::abs(em) <= 0.05 && std::abs(ep) <= 2.0;
        detail += fmt::format("{:.0f} Hz |Z| {:.2f} vs {:.2f} ({:+.2f}%), phase {:+.2f} deg off; ", r.freq,
                              std::abs(r.z), std::abs(truth), 100 * em, ep);
    }
    return {ok, detail + "limits 5%, 2 deg"};
}

Outcome c5_equalization() {
    calib::MeasurementSystem sys;
    sys.params = quiet(afe::ChainParams::defaults());
    const auto w = afe::kWord111;
    const auto off = calib::measure_offsets(sys, w);
    calib::CalibrationTable table;
    table.words[w.bits()] = calib::build_equalization(sys, w, off);

    // Offsets subtracted, equalization left at unity.
    auto unity = table;
    unity.words[w.bits()].coeffs.fill(1.0);

    const tissue::TissueModel saline = tissue::builtin_table("saline");
    double uncal = 0.0, worst_ref = 0.0, worst_r = 0.0, worst_s = 0.0;
    for (int k = 0; k < 11; ++k) {
        sys.load = tissue::resistor(100.0);
        if (k == 0) uncal = 1.0 - std::abs(calib::measure_impedance(sys, k, w, &unity, 0).z) / 100.0;
        worst_ref = std::max(worst_ref, std::abs(calib::measure_impedance(sys, k, w, &table, 0).z - 100.0) / 100.0);
        sys.load = tissue::resistor(200.0);
        worst_r = std::max(worst_r, std::abs(calib::measure_impedance(sys, k, w, &table, 0).z - 200.0) / 200.0);
        // Saline sits near the ADC step size without noise dither; reported only.
        sys.load = saline;
        const auto s = calib::measure_impedance(sys, k, w, &table, 0);
        const Complex truth = tissue::impedance_at(saline, kPlan.sine_fundamentals[static_cast<std::size_t>(k)]);
        worst_s = std::max(worst_s, std::abs(s.z - truth) / std::abs(truth));
    }
    const bool ok = uncal > 0.20 && worst_ref <= 0.01 && worst_r <= 0.01;
    return {ok, fmt::format("uncalibrated 2 MHz droop {:.1f}% (> 20%); calibrated worst error 100 ohm {:.2f}%, "
                            "200 ohm {:.2f}% (<= 1%); saline {:.2f}% (info)",
                            100 * uncal, 100 * worst_ref, 100 * worst_r, 100 * worst_s)};
}

Outcome c6_ranging() {
    const auto p = quiet(afe::ChainParams::defaults());
    auto lin = p;
    lin.compression_enabled = false;
    bool ok = true;
    std::string detail;
    for (const auto w : {afe::kWord111, afe::kWord101, afe::kWord001, afe::kWord000}) {
        auto dev = [&](double r) {
            const auto [ci, cq] = settled_iq(tissue::resistor(r), 10, w, p);
            const auto [li, lq] = settled_iq(tissue::resistor(r), 10, w, lin);
            return 1.0 - std::hypot(ci, cq) / std::hypot(li, lq);
        };
        const double lim = afe::linear_limit_ohm(w);
        const double at = dev(lim), beyond = dev(1.05 * lim);
        ok = ok && at <= 0.01 && beyond > 0.01;
        detail += fmt::format("{} {:.0f} ohm {:.2f}% / x1.05 {:.2f}%; ", w.str(), lim, 100 * at, 100 * beyond);
    }
    struct Case {
        double z;
        afe::GainWord w;
    };
    const Case cases[] = {{100, afe::kWord111},  {399.9, afe::kWord111}, {400, afe::kWord101},
                          {1199, afe::kWord101}, {1200, afe::kWord001},  {2000, afe::kWord001},
                          {3600, afe::kWord000}, {11000, afe::kWord000}};
    for (const auto& c : cases) ok = ok && calib::auto_gain(c.z) == c.w;
    bool threw = false;
    try {
        calib::auto_gain(11001.0);
    } catch (const RangeError&) {
        threw = true;
    }
    ok = ok && threw;
    return {ok, detail + "auto_gain table and 11 kohm limit checked"};
}

Outcome c7_noise() {
    const int n_seeds = seeds_for_noise();
    calib::MeasurementSystem sys;
    sys.master_seed = 99;
    const auto table = calib::calibrate(sys, {afe::kWord111});
    std::array<double, 11> sd{};
    for (int k = 0; k < 11; ++k) {
        afe::AfeConfig cfg;
        cfg.freq_index = k;
        const auto v = afe::sense_period(sys.load, cfg);
        std::vector<double> mags(static_cast<std::size_t>(n_seeds));
        for_each_index(mags.size(), [&](std::size_t i) {
            mags[i] = std::abs(calib::measure_impedance(sys, v, k, afe::kWord111, &table,
                                                        derive_seed(7, {static_cast<std::uint64_t>(k), i}))
                                   .z);
        });
        double m = 0.0;
        for (const double x : mags) m += x;
        m /= n_seeds;
        double ss = 0.0;
        for (const double x : mags) ss += (x - m) * (x - m);
        sd[static_cast<std::size_t>(k)] = std::sqrt(ss / (n_seeds - 1));
    }
    bool ok = sd[10] >= 1.3 && sd[10] <= 3.9;
    double worst_hi = 0.0;
    for (int k = 0; k <= 8; ++k) worst_hi = std::max(worst_hi, sd[static_cast<std::size_t>(k)]);
    ok = ok && worst_hi < 1.0;

    // Output noise of the chain with the source off, 1..100 Hz, Welch estimate.
    const auto p = afe::ChainParams::defaults();
    afe::AfeConfig cfg;
    cfg.source_enable = false;
    cfg.freq_index = 0;
    const auto v = afe::sense_period(tissue::resistor(100.0), cfg);
    const double fb = afe::baseband_rate();
    const auto y = afe::demodulate_time_domain(v, cfg.fundamental(), cfg, p, 5, 400.0);
    const int seg = 8192;
    std::vector<double> psd(seg / 2 + 1, 0.0), buf(seg);
    std::vector<fftw_complex> out(seg / 2 + 1);
    fftw_plan plan = fftw_plan_dft_r2c_1d(seg, buf.data(), out.data(), FFTW_ESTIMATE);
    double wss = 0.0;
    for (int i = 0; i < seg; ++i) {
        const double h = 0.5 - 0.5 * std::cos(2 * kPi * i / seg);
        wss += h * h;
    }
    int nseg = 0;
    const std::size_t skip = static_cast<std::size_t>(fb);  // drop the first second
    for (std::size_t start = skip; start + seg <= y.size(); start += seg / 2, ++nseg) {
        double mean = 0.0;
        for (int i = 0; i < seg; ++i) mean += y.samples[start + static_cast<std::size_t>(i)];
        mean /= seg;
        for (int i = 0; i < seg; ++i)
            buf[static_cast<std::size_t>(i)] = (y.samples[start + static_cast<std::size_t>(i)] - mean) *
                                               (0.5 - 0.5 * std::cos(2 * kPi * i / seg));
        fftw_execute(plan);
        for (int b = 0; b <= seg / 2; ++b)
            psd[static_cast<std::size_t>(b)] += 2.0 * (out[static_cast<std::size_t>(b)][0] * out[static_cast<std::size_t>(b)][0] +
                                                       out[static_cast<std::size_t>(b)][1] * out[static_cast<std::size_t>(b)][1]) /
                                                (fb * wss);
    }
    fftw_destroy_plan(plan);
    double band = 0.0;
    const double df = fb / seg;
    for (int b = 0; b <= seg / 2; ++b) {
        const double f = b * df;
        if (f >= 1.0 && f <= 100.0) band += psd[static_cast<std::size_t>(b)] / nseg * df;
    }
    const double rms = std::sqrt(band);
    ok = ok && rms >= 1.3e-3 * 0.7 && rms <= 1.3e-3 * 1.3;

    std::string per;
    for (int k = 10; k >= 0; --k) per += fmt::format(" {:.3g}", sd[static_cast<std::size_t>(k)]);
    return {ok, fmt::format("{} seeds, std |Z| 2k..2M:{} ohm; 2 kHz {:.2f} in [1.3, 3.9], >= 7.8 kHz worst {:.2f} "
                            "(< 1); output noise {:.3f} mVrms in [0.91, 1.69]",
                            n_seeds, per, sd[10], worst_hi, 1e3 * rms)};
}

Outcome c8_derotation() {
    const auto p = afe::ChainParams::ideal();
    double raw_err = 0.0, rot = 0.0;
    for (int k = 0; k < 11; ++k) {
        const auto [vi, vq] = settled_iq(tissue::resistor(100.0), k, afe::kWord111, p);
        raw_err = std::max(raw_err, std::abs(deg(std::atan2(vq, vi)) - 22.5));
        calib::RawIq raw{vi, vq, afe::current_amplitude(afe::kWord111), afe::total_gain(p, afe::kWord111), 0.0};
        rot = std::max(rot, std::abs(deg(std::arg(calib::derotate(calib::extract_impedance(raw))))));
    }
    return {raw_err < 0.1 && rot < 0.1,
            fmt::format("raw phase within {:.4f} deg of 22.5; derotated |phase| <= {:.4f} deg", raw_err, rot)};
}

Outcome c9_protocol() {
    int bad = 0;
    for (unsigned b = 0; b < 2048; ++b)
        if (link::encode_config(link::decode_config(static_cast<std::uint16_t>(b))) != b) ++bad;

    link::ConfigWord w;
    w.freq_sel = 3;
    w.source_enable = true;
    w.gain = 7;
    const auto res = link::session({link::make_set_config(w), link::make_start_measure(32), link::make_read_result()},
                                   {}, link::PowerState{});
    const bool txn = !res.brownout && res.responses.size() == 3 && res.responses[2].op == link::Opcode::Result;

    // One implant byte with five zero bits, starting at the clamp.
    link::ChannelParams ch;
    link::PowerState ps;
    link::Reservoir r(ps, ch);
    const double tbit = 1.0 / ch.bit_rate;
    int zeros = 0;
    for (const int bit : link::uart_bits({0x0F})) {
        zeros += bit == 0;
        r.run(tbit, link::Activity::ImplantTx, bit ? 1.0 : 0.0);
    }
    const double droop = ps.reservoir_voltage - r.min_voltage();
    const double expect = ps.load_current * zeros * tbit / ps.reservoir_cap;
    const bool droop_ok = droop >= 4e-3 && droop <= 9e-3 && std::abs(droop / expect - 1.0) <= 0.10;
    return {bad == 0 && txn && droop_ok,
            fmt::format("codec mismatches {}; transaction {} (min {:.3f} V); byte droop {:.2f} mV vs I*t/C {:.2f} mV",
                        bad, txn ? "complete" : "failed", res.min_voltage, 1e3 * droop, 1e3 * expect)};
}

Outcome c10_determinism(const std::string& exe) {
    const std::string dir = "acceptance_tmp";
    std::filesystem::create_directories(dir);
    {
        std::ofstream f(dir + "/scenario.json");
        f << R"({"name": "det", "tissue": {"type": "parallel_rc", "r": 1000, "c": 1e-7}, "seed": 31, "repeats": 4})";
    }
    auto run = [&](const std::string& out) {
        const std::string cmd = exe + " sweep --scenario " + dir + "/scenario.json --uncalibrated --out " + dir + "/" + out;
        return std::system(cmd.c_str());
    };
    auto slurp = [&](const std::string& name) {
        std::ifstream f(dir + "/" + name, std::ios::binary);
        std::ostringstream ss;
        ss << f.rdbuf();
        return ss.str();
    };
    const int a = run("a.csv"), b = run("b.csv");
    const std::string sa = slurp("a.csv"), sb = slurp("b.csv");
    const bool ok = a == 0 && b == 0 && !sa.empty() && sa == sb;
    return {ok, fmt::format("two CLI runs, {} bytes each, {}", sa.size(), sa == sb ? "identical" : "different")};
}

}  // namespace

int main(int argc, char** argv) {
    const std::string exe = argc > 1 ? argv[1] : "./bioz";
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"1 Ohm resolution on 100 Ohm", c1_resolution},
        {"harmonic structure", c2_harmonics},
        {"square-wave mixing error and oracle equivalence", c3_mixing},
        {"RC frequency response", c4_rc_response},
        {"equalization efficacy", c5_equalization},
        {"gain ranging", c6_ranging},
        {"noise and averaging", c7_noise},
        {"derotation", c8_derotation},
        {"protocol", c9_protocol},
        {"determinism", [&] { return c10_determinism(exe); }},
    };
    int unexpected = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const bool known = kUnattainable.count(id) != 0;
        std::printf("%s %2d %s: %s%s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), o.detail.c_str(),
                    !o.pass && known ? " [known unattainable]" : "");
        std::fflush(stdout);
        if (!o.pass && !known) ++unexpected;
    }
    return unexpected == 0 ? 0 : 1;
}
