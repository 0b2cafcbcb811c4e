#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "bioz/app.hpp"

namespace bioz::app {

using nlohmann::json;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ParseError(where + ": expected an object");
    for (const auto& [k, v] : j.items()) {
        (void)v;
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }))
            throw ParseError(where + ": unknown key '" + k + "'");
    }
}

tissue::FirstOrderModel first_order(const json& j, const std::string& where) {
    const auto type = j.at("type").get<std::string>();
    if (type == "resistor") {
        check_keys(j, {"type", "r", "r_interface"}, where);
        auto m = tissue::resistor(j.at("r").get<double>());
        m.r_interface = j.value("r_interface", 0.0);
        return m;
    }
    if (type == "parallel_rc") {
        check_keys(j, {"type", "r", "c", "r_interface"}, where);
        return tissue::ParallelRC{j.at("r").get<double>(), j.at("c").get<double>(), j.value("r_interface", 0.0)};
    }
    if (type == "cole") {
        check_keys(j, {"type", "r_inf", "r0", "tau", "fc", "alpha", "r_interface"}, where);
        tissue::ColeModel c;
        c.r_inf = j.at("r_inf").get<double>();
        c.r0 = j.at("r0").get<double>();
        if (j.contains("tau") == j.contains("fc")) throw ParseError(where + ": cole needs exactly one of tau, fc");
        c.tau = j.contains("tau") ? j.at("tau").get<double>() : 1.0 / (2.0 * kPi * j.at("fc").get<double>());
        c.alpha = j.value("alpha", 1.0);
        c.r_interface = j.value("r_interface", 0.0);
        return c;
    }
    throw ParseError(where + ": unknown tissue type '" + type + "'");
}

tissue::TissueModel tissue_from(const json& j, const std::string& base_dir) {
    const auto type = j.at("type").get<std::string>();
    if (type == "table") {
        check_keys(j, {"type", "path", "r_interface"}, "tissue");
        std::filesystem::path p = j.at("path").get<std::string>();
        if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
        auto t = tissue::load_table(p.string());
        t.r_interface = j.value("r_interface", 0.0);
        return t;
    }
    if (type == "builtin") {
        check_keys(j, {"type", "name", "r_interface"}, "tissue");
        auto t = tissue::builtin_table(j.at("name").get<std::string>());
        t.r_interface = j.value("r_interface", 0.0);
        return t;
    }
    if (type == "time_varying") {
        check_keys(j, {"type", "evaluate_at_s", "schedule"}, "tissue");
        tissue::TimeVaryingModel tv;
        tv.evaluate_at_s = j.value("evaluate_at_s", 0.0);
        for (const auto& e : j.at("schedule")) {
            check_keys(e, {"t", "model"}, "tissue.schedule");
            tv.schedule.emplace_back(e.at("t").get<double>(), first_order(e.at("model"), "tissue.schedule.model"));
        }
        return tv;
    }
    return std::visit([](const auto& m) -> tissue::TissueModel { return m; }, first_order(j, "tissue"));
}

afe::ChainParams chain_from(const json& j) {
    check_keys(j,
               {"preset", "lna_pole", "lna_pole_enabled", "tia_gain", "tia_pole", "lpf_cutoff", "lpf_order",
                "lpf_ripple_db", "compression_enabled", "compression_knee", "offset", "noise_enabled", "noise_floor",
                "flicker_corner", "lna_noise_floor", "lna_flicker_corner"},
               "chain");
    const auto preset = j.value("preset", std::string("defaults"));
    afe::ChainParams p;
    if (preset == "defaults") p = afe::ChainParams::defaults();
    else if (preset == "ideal") p = afe::ChainParams::ideal();
    else if (preset == "measured_corner") p = afe::ChainParams::measured_corner();
    else throw ParseError("chain: unknown preset '" + preset + "'");

    auto num = [&](const char* k, double& v) {
        if (j.contains(k)) v = j.at(k).get<double>();
    };
    auto flag = [&](const char* k, bool& v) {
        if (j.contains(k)) v = j.at(k).get<bool>();
    };
    num("lna_pole", p.lna_pole);
    flag("lna_pole_enabled", p.lna_pole_enabled);
    num("tia_gain", p.tia_gain);
    num("tia_pole", p.tia_pole);
    num("lpf_cutoff", p.lpf_cutoff);
    if (j.contains("lpf_order")) p.lpf_order = j.at("lpf_order").get<int>();
    num("lpf_ripple_db", p.lpf_ripple_db);
    flag("compression_enabled", p.compression_enabled);
    if (j.contains("compression_knee")) {
        const auto& k = j.at("compression_knee");
        if (!k.is_array() || k.size() != p.compression_knee.size())
            throw ParseError("chain.compression_knee: expected 8 values indexed by gain word bits");
        for (std::size_t i = 0; i < k.size(); ++i) p.compression_knee[i] = k[i].get<double>();
    }
    num("offset", p.offset);
    flag("noise_enabled", p.noise_enabled);
    num("noise_floor", p.noise_floor);
    num("flicker_corner", p.flicker_corner);
    num("lna_noise_floor", p.lna_noise_floor);
    num("lna_flicker_corner", p.lna_flicker_corner);
    return p;
}

void link_from(const json& j, Scenario& s) {
    check_keys(j,
               {"reservoir_voltage", "reservoir_cap", "load_current", "envelope_noise", "ask_depth",
                "source_resistance", "available_power", "ask_derates_harvest"},
               "link");
    auto& ps = s.power;
    auto& ch = s.channel;
    ps.reservoir_voltage = j.value("reservoir_voltage", ps.reservoir_voltage);
    ps.reservoir_cap = j.value("reservoir_cap", ps.reservoir_cap);
    ps.load_current = j.value("load_current", ps.load_current);
    ch.envelope_noise = j.value("envelope_noise", ch.envelope_noise);
    ch.ask_depth = j.value("ask_depth", ch.ask_depth);
    ch.ask_derates_harvest = j.value("ask_derates_harvest", ch.ask_derates_harvest);
    ch.harvester.source_resistance = j.value("source_resistance", ch.harvester.source_resistance);
    ch.harvester.available_power = j.value("available_power", ch.harvester.available_power);
    if (ps.reservoir_cap <= 0.0 || ps.load_current < 0.0 || ch.harvester.source_resistance <= 0.0)
        throw ParseError("link: cap and source resistance must be positive, load non-negative");
    if (ps.reservoir_voltage < 0.0 || ps.reservoir_voltage > ch.harvester.clamp)
        throw ParseError("link: reservoir_voltage must be within 0..3 V");
    if (ch.ask_depth <= 0.0 || ch.ask_depth >= 1.0 || ch.envelope_noise < 0.0)
        throw ParseError("link: ask_depth must be in (0, 1) and envelope_noise >= 0");
}

}  // namespace

Scenario parse_scenario(const std::string& text, const std::string& base_dir) {
    Scenario s;
    try {
        const json j = json::parse(text);
        check_keys(j,
                   {"name", "tissue", "chain", "seed", "taps", "gain", "frequencies", "repeats", "format",
                    "reference_r", "cal_repeats", "include_interface", "engine", "created_at", "link"},
                   "scenario");
        s.name = j.value("name", std::string{});
        if (j.contains("tissue")) s.tissue = tissue_from(j.at("tissue"), base_dir);
        if (j.contains("chain")) s.chain = chain_from(j.at("chain"));
        s.seed = j.value("seed", s.seed);
        s.taps = j.value("taps", s.taps);
        s.repeats = j.value("repeats", s.repeats);
        s.format = j.value("format", s.format);
        s.reference_r = j.value("reference_r", s.reference_r);
        s.cal_repeats = j.value("cal_repeats", s.cal_repeats);
        s.include_interface = j.value("include_interface", s.include_interface);
        s.created_at = j.value("created_at", s.created_at);
        if (j.contains("link")) link_from(j.at("link"), s);
        const auto gain = j.value("gain", std::string("auto"));
        if (gain != "auto") s.gain = afe::GainWord::parse(gain);
        const auto engine = j.value("engine", std::string("period_map"));
        if (engine == "period_map") s.engine = afe::Engine::PeriodMap;
        else if (engine == "reference") s.engine = afe::Engine::Reference;
        else throw ParseError("scenario: unknown engine '" + engine + "'");
        if (j.contains("frequencies") && !(j.at("frequencies").is_string() && j.at("frequencies") == "all")) {
            std::set<int> idx;
            for (const auto& f : j.at("frequencies")) {
                const int k = waveforms::plan_index(f.get<double>());
                if (k < 0) throw ParseError("scenario: " + f.dump() + " Hz is not a plan frequency");
                idx.insert(k);
            }
            s.freq_indices.assign(idx.rbegin(), idx.rend());
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("scenario: ") + e.what());
    } catch (const ContractViolation& e) {
        throw ParseError(std::string("scenario: ") + e.what());
    }
    if (s.freq_indices.empty())
        for (int k = static_cast<int>(waveforms::kPlanSize) - 1; k >= 0; --k) s.freq_indices.push_back(k);
    if (s.taps < 1) throw ParseError("scenario: taps must be >= 1");
    if (s.repeats < 1 || s.cal_repeats < 1) throw ParseError("scenario: repeats must be >= 1");
    if (s.format != "csv" && s.format != "json") throw ParseError("scenario: format must be csv or json");
    try {
        tissue::validate(s.tissue);
    } catch (const ContractViolation& e) {
        throw ParseError(std::string("scenario: ") + e.what());
    }
    return s;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open scenario '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    const auto dir = std::filesystem::path(path).parent_path();
    return parse_scenario(ss.str(), dir.empty() ? "." : dir.string());
}

calib::MeasurementSystem measurement_system(const Scenario& s, Exec exec) {
    calib::MeasurementSystem sys;
    sys.load = s.tissue;
    sys.params = s.chain;
    sys.taps = s.taps;
    sys.master_seed = s.seed;
    sys.exec = exec;
    sys.seq.engine = s.engine;
    sys.seq.include_interface = s.include_interface;
    return sys;
}

}  // namespace bioz::app
