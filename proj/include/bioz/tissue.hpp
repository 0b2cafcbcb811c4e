#pragma once

#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "bioz/common.hpp"
#include "bioz/waveforms.hpp"

namespace bioz::tissue {

struct ParallelRC {
    double r = 100.0;
    double c = 0.0;
    double r_interface = 0.0;
};

struct ColeModel {
    double r_inf = 0.0;
    double r0 = 0.0;
    double tau = 0.0;
    double alpha = 1.0;
    double r_interface = 0.0;
};

struct TabulatedTwoPort {
    std::string name;
    std::vector<double> freq;
    std::vector<Complex> z21;
    double r_interface = 0.0;
};

using FirstOrderModel = std::variant<ParallelRC, ColeModel>;

// Piecewise-linear parameter schedule; every entry must hold the same model kind.
struct TimeVaryingModel {
    std::vector<std::pair<double, FirstOrderModel>> schedule;
    double evaluate_at_s = 0.0;
};

using TissueModel = std::variant<ParallelRC, ColeModel, TabulatedTwoPort, TimeVaryingModel>;

inline ParallelRC resistor(double r) { return ParallelRC{r, 0.0, 0.0}; }

void validate(const TissueModel& model);

// Parameters at time t, holding the first/last entry outside the schedule.
FirstOrderModel frozen_at(const TimeVaryingModel& model, double t);

// Ground-truth impedance between the injection electrodes, interface included.
Complex impedance_at(const TissueModel& model, double freq);

struct SenseOptions {
    bool include_interface = false;
    enum class Output { CellAverage, Point } output = Output::CellAverage;
    enum class Route { Phasor, DiscreteFilter } route = Route::Phasor;
    // Alias images folded on each side of the sampled band in the phasor route.
    int alias_images = 256;
};

// Impedance seen by the sense electrodes at frequency f >= 0. Tables hold their
// end rows outside the tabulated range so harmonic sums stay defined.
Complex sensed_impedance(const TissueModel& model, double freq, bool include_interface);

// Voltage across the sense pair for a ZOH current series that covers whole periods
// of `fundamental`. The series is treated as periodic (steady state).
waveforms::SampleSeries sense_voltage(const TissueModel& model, const waveforms::SampleSeries& current,
                                      double fundamental, const SenseOptions& opts = {});

// Per-bin kernels used by the phasor route; exposed for the AFE engine and benchmarks.
std::vector<Complex> phasor_kernels(const TissueModel& model, double fundamental, int q,
                                    const SenseOptions& opts);

TabulatedTwoPort parse_table(const std::string& text, const std::string& name = "table");
TabulatedTwoPort load_table(const std::string& path);

// Built-in reference tables: "blood", "muscle", "saline".
TabulatedTwoPort builtin_table(const std::string& name);
std::vector<std::string> builtin_table_names();

}  // namespace bioz::tissue
