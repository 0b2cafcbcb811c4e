#include <iostream>

#include <CLI11.hpp>

#include "bioz/app.hpp"

int main(int argc, char** argv) {
    using namespace bioz;
    CLI::App cli{"Bio-impedance spectroscopy simulator"};
    cli.require_subcommand(1);
    app::CliOptions o;
    std::uint64_t seed = 0;
    int repeats = 0;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--scenario", o.scenario, "Scenario JSON file");
        sub->add_option("--seed", seed, "Master seed (overrides the scenario)");
        sub->add_option("--out", o.out, "Write output to this file");
        sub->add_flag("--serial", o.serial, "Run without OpenMP");
    };

    auto* plan = cli.add_subcommand("plan", "Print the frequency plan");
    auto* cal = cli.add_subcommand("calibrate", "Measure offsets and equalization coefficients");
    common(cal);
    auto* sweep = cli.add_subcommand("sweep", "Calibrated frequency sweep");
    common(sweep);
    sweep->add_option("--cal", o.cal, "Calibration table");
    sweep->add_flag("--uncalibrated", o.uncalibrated, "Skip equalization");
    sweep->add_option("--repeats", repeats, "Sequences per frequency")->check(CLI::PositiveNumber);
    sweep->add_option("--format", o.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    sweep->add_flag("--strict", o.strict, "Exit 2 on flagged records");
    auto* demo = cli.add_subcommand("link-demo", "Run a reader command script over the link");
    common(demo);
    demo->add_option("script", o.script, "Command script")->required();

    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = cli.exit(e);
        return rc == 0 ? app::kExitOk : app::kExitUsage;
    }
    for (auto* sub : {cal, sweep, demo}) {
        if (sub->count("--seed")) o.seed = seed;
    }
    if (sweep->count("--repeats")) o.repeats = repeats;

    try {
        if (*plan) return app::cmd_plan(std::cout);
        if (*cal) return app::cmd_calibrate(o, std::cout, std::cerr);
        if (*sweep) return app::cmd_sweep(o, std::cout, std::cerr);
        if (*demo) return app::cmd_link_demo(o, std::cout, std::cerr);
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return app::kExitUsage;
    } catch (const CalibrationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return app::kExitUsage;
    } catch (const RangeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return app::kExitRange;
    } catch (const ContractViolation& e) {
        std::cerr << "error: " << e.what() << "\n";
        return app::kExitUsage;
    }
    return app::kExitUsage;
}
