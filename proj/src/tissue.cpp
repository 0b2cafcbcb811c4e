#include "bioz/tissue.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace bioz::tissue {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void validate_first_order(const FirstOrderModel& m) {
    std::visit(overloaded{
                   [](const ParallelRC& p) {
                       require(p.r > 0.0, "ParallelRC: r must be positive");
                       require(p.c >= 0.0, "ParallelRC: c must be non-negative");
                       require(p.r_interface >= 0.0, "ParallelRC: r_interface must be non-negative");
                   },
                   [](const ColeModel& c) {
                       require(c.r_inf > 0.0 && c.r0 > c.r_inf, "ColeModel: need r0 > r_inf > 0");
                       require(c.tau > 0.0, "ColeModel: tau must be positive");
                       require(c.alpha > 0.0 && c.alpha <= 1.0, "ColeModel: alpha must be in (0, 1]");
                       require(c.r_interface >= 0.0, "ColeModel: r_interface must be non-negative");
                   },
               },
               m);
}

Complex rc_z(const ParallelRC& p, double f) {
    const double w = 2.0 * kPi * f;
    return p.r / Complex(1.0, w * p.r * p.c);
}

Complex cole_z(const ColeModel& c, double f) {
    const double w = 2.0 * kPi * f;
    if (w == 0.0) return c.r0;
    const Complex jwt_a = std::pow(Complex(0.0, w * c.tau), c.alpha);
    return c.r_inf + (c.r0 - c.r_inf) / (1.0 + jwt_a);
}

Complex first_order_z(const FirstOrderModel& m, double f, bool interface) {
    return std::visit(overloaded{
                          [&](const ParallelRC& p) { return rc_z(p, f) + (interface ? p.r_interface : 0.0); },
                          [&](const ColeModel& c) { return cole_z(c, f) + (interface ? c.r_interface : 0.0); },
                      },
                      m);
}

// Log-frequency linear interpolation on Re and Im; exact at nodes.
Complex table_z(const TabulatedTwoPort& t, double f, bool clamp) {
    const auto& fr = t.freq;
    if (f <= fr.front() || f >= fr.back()) {
        if (f == fr.front()) return t.z21.front();
        if (f == fr.back()) return t.z21.back();
        if (!clamp)
            throw RangeError("frequency " + std::to_string(f) + " Hz outside table '" + t.name + "' range");
        return f < fr.front() ? t.z21.front() : t.z21.back();
    }
    const auto it = std::upper_bound(fr.begin(), fr.end(), f);
    const std::size_t hi = static_cast<std::size_t>(it - fr.begin());
    const std::size_t lo = hi - 1;
    if (fr[lo] == f) return t.z21[lo];
    const double w = (std::log(f) - std::log(fr[lo])) / (std::log(fr[hi]) - std::log(fr[lo]));
    return (1.0 - w) * t.z21[lo] + w * t.z21[hi];
}

double lerp(double a, double b, double w) { return a + (b - a) * w; }

double sinc(double x) { return x == 0.0 ? 1.0 : std::sin(x) / x; }

}  // namespace

void validate(const TissueModel& model) {
    std::visit(overloaded{
                   [](const ParallelRC& p) { validate_first_order(p); },
                   [](const ColeModel& c) { validate_first_order(c); },
                   [](const TabulatedTwoPort& t) {
                       if (t.freq.size() < 2 || t.freq.size() != t.z21.size())
                           throw ParseError("table '" + t.name + "' needs at least 2 rows");
                       for (std::size_t i = 0; i < t.freq.size(); ++i) {
                           if (!(t.freq[i] > 0.0)) throw ParseError("table frequencies must be positive");
                           if (i > 0 && !(t.freq[i] > t.freq[i - 1]))
                               throw ParseError("table frequencies must be strictly increasing");
                       }
                       require(t.r_interface >= 0.0, "table: r_interface must be non-negative");
                   },
                   [](const TimeVaryingModel& tv) {
                       require(!tv.schedule.empty(), "TimeVaryingModel: empty schedule");
                       for (std::size_t i = 0; i < tv.schedule.size(); ++i) {
                           validate_first_order(tv.schedule[i].second);
                           require(tv.schedule[i].second.index() == tv.schedule[0].second.index(),
                                   "TimeVaryingModel: mixed model kinds in schedule");
                           if (i > 0)
                               require(tv.schedule[i].first > tv.schedule[i - 1].first,
                                       "TimeVaryingModel: schedule times must be strictly increasing");
                       }
                   },
               },
               model);
}

FirstOrderModel frozen_at(const TimeVaryingModel& model, double t) {
    const auto& s = model.schedule;
    require(!s.empty(), "frozen_at: empty schedule");
    if (t <= s.front().first) return s.front().second;
    if (t >= s.back().first) return s.back().second;
    std::size_t hi = 1;
    while (s[hi].first < t) ++hi;
    const auto& [t0, m0] = s[hi - 1];
    const auto& [t1, m1] = s[hi];
    const double w = (t - t0) / (t1 - t0);
    if (const auto* a = std::get_if<ParallelRC>(&m0)) {
        const auto& b = std::get<ParallelRC>(m1);
        return ParallelRC{lerp(a->r, b.r, w), lerp(a->c, b.c, w), lerp(a->r_interface, b.r_interface, w)};
    }
    const auto& a = std::get<ColeModel>(m0);
    const auto& b = std::get<ColeModel>(m1);
    return ColeModel{lerp(a.r_inf, b.r_inf, w), lerp(a.r0, b.r0, w), lerp(a.tau, b.tau, w),
                     lerp(a.alpha, b.alpha, w), lerp(a.r_interface, b.r_interface, w)};
}

Complex impedance_at(const TissueModel& model, double freq) {
    require(freq > 0.0, "impedance_at: frequency must be positive");
    return std::visit(overloaded{
                          [&](const ParallelRC& p) { return first_order_z(p, freq, true); },
                          [&](const ColeModel& c) { return first_order_z(c, freq, true); },
                          [&](const TabulatedTwoPort& t) { return table_z(t, freq, false) + t.r_interface; },
                          [&](const TimeVaryingModel& tv) {
                              return first_order_z(frozen_at(tv, tv.evaluate_at_s), freq, true);
                          },
                      },
                      model);
}

Complex sensed_impedance(const TissueModel& model, double freq, bool include_interface) {
    const double f = std::abs(freq);
    const Complex z = std::visit(
        overloaded{
            [&](const ParallelRC& p) { return first_order_z(p, f, include_interface); },
            [&](const ColeModel& c) { return first_order_z(c, f, include_interface); },
            [&](const TabulatedTwoPort& t) {
                return table_z(t, f, true) + (include_interface ? t.r_interface : 0.0);
            },
            [&](const TimeVaryingModel& tv) {
                return first_order_z(frozen_at(tv, tv.evaluate_at_s), f, include_interface);
            },
        },
        model);
    return freq < 0.0 ? std::conj(z) : z;
}

std::vector<Complex> phasor_kernels(const TissueModel& model, double fundamental, int q,
                                    const SenseOptions& opts) {
    const int power = opts.output == SenseOptions::Output::CellAverage ? 2 : 1;
    const long long L = opts.alias_images;
    const long long n_edge = L * q + q / 2;
    std::vector<Complex> k(static_cast<std::size_t>(q));
#pragma omp parallel for schedule(static)
    for (int b = 0; b < q; ++b) {
        Complex acc = 0.0;
        double wsum = 0.0;
        // Symmetric window |n| <= n_edge keeps K[q-b] = conj(K[b]).
        for (long long n = b - ((n_edge + b) / q) * q; n <= n_edge; n += q) {
            if (n < -n_edge) continue;
            const double w = std::pow(sinc(kPi * static_cast<double>(n) / q), power);
            acc += w * sensed_impedance(model, static_cast<double>(n) * fundamental, opts.include_interface);
            wsum += w;
        }
        // The images beyond the window see the edge impedance; their weights sum to 1 - wsum.
        const double z_tail =
            sensed_impedance(model, static_cast<double>(n_edge) * fundamental, opts.include_interface).real();
        k[static_cast<std::size_t>(b)] = acc + z_tail * (1.0 - wsum);
    }
    return k;
}

namespace {

waveforms::SampleSeries sense_phasor(const TissueModel& model, const waveforms::SampleSeries& current,
                                     double fundamental, int q, const SenseOptions& opts) {
    const auto kern = phasor_kernels(model, fundamental, q, opts);
    std::vector<Complex> x(static_cast<std::size_t>(q));
    for (int b = 0; b < q; ++b) {
        Complex acc = 0.0;
        for (int m = 0; m < q; ++m) {
            const double ph = -2.0 * kPi * static_cast<double>(b) * m / q;
            acc += current.samples[static_cast<std::size_t>(m)] * Complex(std::cos(ph), std::sin(ph));
        }
        x[static_cast<std::size_t>(b)] = acc * kern[static_cast<std::size_t>(b)] / static_cast<double>(q);
    }
    std::vector<double> period(static_cast<std::size_t>(q));
    for (int m = 0; m < q; ++m) {
        Complex acc = 0.0;
        for (int b = 0; b < q; ++b) {
            const double ph = 2.0 * kPi * static_cast<double>(b) * m / q;
            acc += x[static_cast<std::size_t>(b)] * Complex(std::cos(ph), std::sin(ph));
        }
        period[static_cast<std::size_t>(m)] = acc.real();
    }
    waveforms::SampleSeries out{current.sample_rate, current.t0, {}};
    out.samples.resize(current.size());
    for (std::size_t m = 0; m < current.size(); ++m) out.samples[m] = period[m % static_cast<std::size_t>(q)];
    return out;
}

struct FirstOrderParts {
    double direct = 0.0;  // memoryless gain
    double gain = 0.0;    // low-pass branch DC gain
    double tau = 0.0;
};

FirstOrderParts parts_of(const FirstOrderModel& m, bool interface) {
    return std::visit(overloaded{
                          [&](const ParallelRC& p) {
                              FirstOrderParts fp;
                              fp.direct = interface ? p.r_interface : 0.0;
                              if (p.c == 0.0) fp.direct += p.r;
                              else { fp.gain = p.r; fp.tau = p.r * p.c; }
                              return fp;
                          },
                          [&](const ColeModel& c) {
                              if (c.alpha != 1.0)
                                  throw ContractViolation("Cole alpha < 1 has no finite-order realization");
                              return FirstOrderParts{c.r_inf + (interface ? c.r_interface : 0.0), c.r0 - c.r_inf,
                                                     c.tau};
                          },
                      },
                      m);
}

// Exact response of a first-order branch to a ZOH input, evaluated in periodic steady state.
waveforms::SampleSeries sense_discrete(const TissueModel& model, const waveforms::SampleSeries& current, int q,
                                       const SenseOptions& opts) {
    FirstOrderModel fo;
    if (const auto* p = std::get_if<ParallelRC>(&model)) fo = *p;
    else if (const auto* c = std::get_if<ColeModel>(&model)) fo = *c;
    else if (const auto* tv = std::get_if<TimeVaryingModel>(&model)) fo = frozen_at(*tv, tv->evaluate_at_s);
    else throw ContractViolation("tabulated models have no discrete-filter realization");
    const FirstOrderParts fp = parts_of(fo, opts.include_interface);
    const double h = 1.0 / current.sample_rate;
    const bool point = opts.output == SenseOptions::Output::Point;

    std::vector<double> period(static_cast<std::size_t>(q));
    if (fp.gain == 0.0) {
        for (int m = 0; m < q; ++m) period[m] = fp.direct * current.samples[m];
    } else {
        const double a = std::exp(-h / fp.tau);
        const double a_half = std::exp(-0.5 * h / fp.tau);
        const double avg_frac = -std::expm1(-h / fp.tau) * fp.tau / h;
        // State after one period from zero, then the periodic fixed point s* = B / (1 - A).
        double s = 0.0;
        for (int m = 0; m < q; ++m) {
            const double u = fp.gain * current.samples[m];
            s = u + (s - u) * a;
        }
        const double one_minus_a_period = -std::expm1(-static_cast<double>(q) * h / fp.tau);
        s = s / one_minus_a_period;
        for (int m = 0; m < q; ++m) {
            const double i = current.samples[m];
            const double u = fp.gain * i;
            const double y = point ? u + (s - u) * a_half : u + (s - u) * avg_frac;
            period[m] = fp.direct * i + y;
            s = u + (s - u) * a;
        }
    }
    waveforms::SampleSeries out{current.sample_rate, current.t0, {}};
    out.samples.resize(current.size());
    for (std::size_t m = 0; m < current.size(); ++m) out.samples[m] = period[m % static_cast<std::size_t>(q)];
    return out;
}

}  // namespace

waveforms::SampleSeries sense_voltage(const TissueModel& model, const waveforms::SampleSeries& current,
                                      double fundamental, const SenseOptions& opts) {
    const int q = waveforms::samples_per_period(fundamental, current.sample_rate);
    require(current.size() >= static_cast<std::size_t>(q) && current.size() % static_cast<std::size_t>(q) == 0,
            "sense_voltage: current must cover whole periods");
    if (opts.route == SenseOptions::Route::DiscreteFilter) return sense_discrete(model, current, q, opts);
    return sense_phasor(model, current, fundamental, q, opts);
}

TabulatedTwoPort parse_table(const std::string& text, const std::string& name) {
    TabulatedTwoPort t;
    t.name = name;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ls(line);
        double f, re, im;
        if (!(ls >> f)) continue;
        if (!(ls >> re >> im))
            throw ParseError(name + ":" + std::to_string(lineno) + ": expected 'freq_hz re_ohm im_ohm'");
        std::string extra;
        if (ls >> extra) throw ParseError(name + ":" + std::to_string(lineno) + ": trailing text");
        t.freq.push_back(f);
        t.z21.emplace_back(re, im);
    }
    validate(t);
    return t;
}

TabulatedTwoPort load_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open table file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_table(ss.str(), path);
}

std::vector<std::string> builtin_table_names() { return {"blood", "muscle", "saline"}; }

TabulatedTwoPort builtin_table(const std::string& name) {
    // Generated from smooth analytic shapes: 10 rows per decade, 1 kHz to 10 MHz.
    TissueModel shape;
    if (name == "blood") shape = ParallelRC{107.0, 1.0 / (2.0 * kPi * 107.0 * 4e6), 0.0};
    else if (name == "muscle") shape = ColeModel{610.0, 2491.0, 1.0 / (2.0 * kPi * 120e3), 0.8, 0.0};
    else if (name == "saline") shape = ParallelRC{47.0, 1.0 / (2.0 * kPi * 47.0 * 30e6), 0.0};
    else throw ParseError("unknown built-in table '" + name + "'");
    TabulatedTwoPort t;
    t.name = name;
    for (int i = 0; i <= 40; ++i) {
        const double f = 1e3 * std::pow(10.0, i / 10.0);
        t.freq.push_back(f);
        t.z21.push_back(impedance_at(shape, f));
    }
    return t;
}

}  // namespace bioz::tissue
