#pragma once

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <CLI11.hpp>

#include "lpvcert/io.hpp"
#include "lpvcert/rng.hpp"

namespace lpvcert {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr std::uint64_t kDefaultSeed = 12345;

namespace cli_detail {

inline Property parse_property(const std::string& name) {
    if (name == "controllability")
        return Property::Controllability;
    if (name == "observability")
        return Property::Observability;
    if (name == "output-controllability")
        return Property::OutputControllability;
    if (name == "stabilizability")
        return Property::Stabilizability;
    if (name == "detectability")
        return Property::Detectability;
    if (name == "minimality")
        return Property::Minimality;
    throw ValidationError("unknown property '" + name + "'");
}

/// Domain priority: explicit file, then the system file's embedded domain,
/// then the singleton at the parameter origin.
inline BoxDomain resolve_domain(const ModelFile& model, const std::string& domain_path) {
    if (!domain_path.empty()) {
        const json j = read_json_file(domain_path);
        return io_detail::parse_domain(j, domain_path);
    }
    if (model.domain)
        return *model.domain;
    BoxDomain d;
    auto zeros = [](std::size_t q) {
        return std::vector<BoxDomain::ComplexInterval>(q, BoxDomain::ComplexInterval{});
    };
    d.zA = zeros(model.system.qA());
    d.zB = zeros(model.system.qB());
    d.zC = zeros(model.system.qC());
    d.zD = zeros(model.system.qD());
    if (model.delays) {
        d.zAd = zeros(model.delays->q_ad);
        d.zBd = zeros(model.delays->q_bd);
    }
    return d;
}

inline std::vector<double> parse_number_list(const std::string& text) {
    std::vector<double> out;
    std::string token;
    std::istringstream in(text);
    while (std::getline(in, token, ','))
        if (!token.empty())
            out.push_back(std::stod(token));
    return out;
}

inline std::pair<std::vector<double>, std::vector<double>> parse_delays(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos)
        return {parse_number_list(text), {}};
    return {parse_number_list(text.substr(0, colon)), parse_number_list(text.substr(colon + 1))};
}

inline std::vector<cplx> parse_s_grid(const std::vector<std::string>& entries) {
    std::vector<cplx> out;
    for (const auto& e : entries) {
        const auto nums = parse_number_list(e);
        if (nums.size() == 1)
            out.push_back({nums[0], 0.0});
        else if (nums.size() == 2)
            out.push_back({nums[0], nums[1]});
        else
            throw ValidationError("--s-grid entries are 're' or 're,im'");
    }
    return out;
}

struct ReportSink {
    std::string out_path;  // empty = stdout
    std::vector<std::string> command_echo;
    std::uint64_t seed = kDefaultSeed;
    bool timing = false;
    std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();

    void emit(json settings, json result, std::ostream& stdout_stream) const {
        json report;
        report["format"] = "lpvcert-report";
        report["version"] = kReportFormatVersion;
        report["tool"] = std::string("lpvcert ") + kToolVersion;
        report["command"] = command_echo;
        report["seed"] = seed;
        report["settings"] = std::move(settings);
        report["result"] = std::move(result);
        if (timing) {
            const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                std::chrono::steady_clock::now() - started)
                                .count();
            report["stats"] = {{"wall_ms", ms}};
        }
        if (out_path.empty())
            stdout_stream << report.dump(2) << "\n";
        else
            write_json_file(out_path, report);
    }
};

inline int verdict_exit_code(Verdict v) {
    switch (v) {
        case Verdict::Certified: return 0;
        case Verdict::ViolatedWithWitness: return 1;
        case Verdict::Inconclusive: return 2;
    }
    return 3;
}

inline int verdict_exit_code(const std::string& name) {
    if (name == "certified")
        return 0;
    if (name == "violated-with-witness")
        return 1;
    if (name == "inconclusive")
        return 2;
    return 0;
}

}  // namespace cli_detail

/// Command-line entry point; returns the process exit code.
/// 0 = certified / command ok, 1 = property violated (witness emitted),
/// 2 = inconclusive, 3 = usage/parse error.
inline int run_command(std::vector<std::string> args, std::ostream& out_stream = std::cout,
                       std::ostream& err_stream = std::cerr) {
    using namespace cli_detail;

    CLI::App app{"structural-property certification for parameter-varying systems"};
    app.require_subcommand(1);

    // Shared option state.
    std::string system_path, domain_path, out_path, delta_path, property_name_str = "controllability";
    std::string mode, delays_text, sigma_box_text, report_path, format = "json", cell_log_path;
    std::vector<std::string> s_grid_entries;
    double tol = kDefaultTol;
    double floor_value = 1e-6;
    std::size_t grid_points = 9;
    std::size_t budget = 100000;
    std::size_t omega_points = 129;
    std::size_t soundness_samples = 100;
    std::size_t soundness_points = 20;
    unsigned jobs = 0;
    std::uint64_t seed = kDefaultSeed;
    bool timing = false;
    bool certify = false;

    auto add_common = [&](CLI::App* cmd, bool wants_system = true) {
        if (wants_system)
            cmd->add_option("system", system_path, "system description file (JSON)")->required();
        cmd->add_option("--out,-o", out_path, "write the report to this file instead of stdout");
        cmd->add_option("--seed", seed, "seed for the sampling checks");
        cmd->add_option("--tol", tol, "relative rank tolerance");
        cmd->add_option("--jobs", jobs, "worker threads (0 = hardware)");
        cmd->add_flag("--timing", timing, "include wall-clock time in the report");
    };

    CLI::App* c_validate = app.add_subcommand("validate", "check a system description file");
    add_common(c_validate);

    CLI::App* c_analyze = app.add_subcommand("analyze", "decide a property over a parameter domain");
    add_common(c_analyze);
    c_analyze->add_option("--property", property_name_str, "property to test");
    c_analyze->add_option("--domain", domain_path, "domain file overriding the system's default");
    c_analyze->add_option("--grid", grid_points, "grid points per box coordinate");
    c_analyze->add_option("--budget", budget, "maximum evaluation points / cells");
    c_analyze->add_option("--delta-file", delta_path, "fixed uncertainty values (JSON)");
    c_analyze->add_option("--s-grid", s_grid_entries, "extra frequencies 're,im' for output controllability");
    c_analyze->add_flag("--certify", certify, "use the covering certificate instead of the grid sweep");
    c_analyze->add_option("--floor", floor_value, "determinant floor for --certify");
    c_analyze->add_option("--sigma-box", sigma_box_text, "frequency window 'slo,shi[,wlo,whi]' for --certify");
    c_analyze->add_option("--cell-log", cell_log_path, "write per-cell audit records (JSONL) for --certify");

    CLI::App* c_radius = app.add_subcommand("radius", "property-preservation radius for structured uncertainty");
    add_common(c_radius);
    c_radius->add_option("--property", property_name_str, "property to protect");
    c_radius->add_option("--domain", domain_path, "domain file overriding the system's default");
    c_radius->add_option("--grid", grid_points, "boundary/interior sampling density");
    c_radius->add_option("--omega-points", omega_points, "frequency samples per half axis");
    c_radius->add_option("--samples", soundness_samples, "random admissible perturbations to re-verify");
    c_radius->add_option("--sample-points", soundness_points, "domain points per sampled perturbation");

    CLI::App* c_attack = app.add_subcommand("attack", "construct a property-destroying perturbation");
    add_common(c_attack);
    c_attack->add_option("--property", property_name_str, "property to destroy");
    c_attack->add_option("--domain", domain_path, "domain file overriding the system's default");

    CLI::App* c_delay = app.add_subcommand("delay-analyze", "delay-independent or delay-dependent tests");
    add_common(c_delay);
    c_delay->add_option("--mode", mode, "independent | dependent")->required();
    c_delay->add_option("--property", property_name_str, "property to test");
    c_delay->add_option("--domain", domain_path, "domain file overriding the system's default");
    c_delay->add_option("--delays", delays_text, "concrete delays 'h1,h2,...:g1,g2,...' for dependent mode");
    c_delay->add_option("--sigma-box", sigma_box_text, "search window 'slo,shi[,wlo,whi]'");
    c_delay->add_option("--floor", floor_value, "determinant floor");
    c_delay->add_option("--budget", budget, "cell budget for the cover");
    c_delay->add_option("--cell-log", cell_log_path, "write per-cell audit records (JSONL)");

    CLI::App* c_report = app.add_subcommand("report", "re-render a report file");
    c_report->add_option("report_file", report_path, "report file (JSON)")->required();
    c_report->add_option("--format", format, "json | text");

    try {
        std::vector<const char*> argv;
        argv.push_back("lpvcert");
        for (const auto& a : args) argv.push_back(a.c_str());
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out_stream << app.help() << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        err_stream << "error: " << e.what() << "\n";
        return 3;
    }

    ReportSink sink;
    sink.out_path = out_path;
    sink.seed = seed;
    sink.timing = timing;
    // The output path stays out of the echo so identical analyses written to
    // different files produce byte-identical reports.
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--out" || args[i] == "-o") {
            ++i;
            continue;
        }
        sink.command_echo.push_back(args[i]);
    }

    auto parse_sigma_box = [&](const DelaySystem& dsys, const BoxDomain& domain,
                               Property prop) -> DelaySearchBox {
        if (sigma_box_text.empty())
            return default_search_box(dsys, domain, prop);
        const auto nums = parse_number_list(sigma_box_text);
        if (nums.size() == 2)
            return {nums[0], nums[1], nums[0], nums[1]};
        if (nums.size() == 4)
            return {nums[0], nums[1], nums[2], nums[3]};
        throw ValidationError("--sigma-box expects 'slo,shi' or 'slo,shi,wlo,whi'");
    };

    auto make_cover_options = [&]() {
        DelayTestOptions opts;
        opts.tol = tol;
        opts.cover.jobs = jobs;
        return opts;
    };

    std::ofstream cell_log_stream;
    auto wire_cell_log = [&](CoverOptions& cover) {
        if (cell_log_path.empty())
            return;
        cell_log_stream.open(cell_log_path);
        if (!cell_log_stream)
            throw Error(cell_log_path + ": cannot open for writing");
        cover.cell_log = [&](const CellRecord& rec) {
            json j;
            j["anchor"] = rec.anchor;
            j["widths"] = rec.widths;
            j["bounds"] = rec.bounds;
            j["value"] = rec.value;
            j["decrement"] = rec.decrement;
            j["depth"] = rec.depth;
            j["certified"] = rec.certified;
            cell_log_stream << j.dump() << "\n";
        };
    };

    try {
        if (*c_validate) {
            const ModelFile model = load_system(system_path);
            const auto diags = model.has_delays() ? validate(*model.delays) : validate(model.system);
            json result;
            result["type"] = "validation";
            result["ok"] = !has_errors(diags);
            json list = json::array();
            for (const auto& d : diags)
                list.push_back({{"severity", d.severity == Diagnostic::Severity::Error ? "error" : "warning"},
                                {"message", d.message}});
            result["diagnostics"] = std::move(list);
            result["has_delays"] = model.has_delays();
            sink.emit({{"tol", tol}}, result, out_stream);
            return 0;  // load_system already rejects files with hard errors
        }

        if (*c_analyze) {
            const ModelFile model = load_system(system_path);
            if (model.has_delays() &&
                (!model.delays->internal_entries.empty() || !model.delays->external_entries.empty()))
                throw ValidationError("system has delay terms: use delay-analyze");
            const Property prop = parse_property(property_name_str);
            const BoxDomain domain = resolve_domain(model, domain_path);

            if (certify) {
                DelaySystem wrapper;
                wrapper.base = model.system;
                const DelaySearchBox box = parse_sigma_box(wrapper, domain, prop);
                DelayTestOptions opts = make_cover_options();
                wire_cell_log(opts.cover);
                const auto rep =
                    delay_dependent_test(wrapper, domain, {}, {}, box, prop, floor_value, budget, opts);
                sink.emit({{"tol", tol}, {"floor", floor_value}, {"budget", budget}},
                          dump_delay_report(rep, {}, {}), out_stream);
                return verdict_exit_code(rep.verdict);
            }

            GridSpec grid;
            grid.points_per_dim = grid_points;
            grid.budget = budget;
            grid.jobs = jobs;
            PropertyCheckOptions check;
            check.tol = tol;
            check.s_grid = parse_s_grid(s_grid_entries);
            std::optional<DeltaAssignment> delta;
            if (!delta_path.empty())
                delta = load_delta(delta_path, model.system);
            const DomainReport rep =
                sweep_domain(model.system, prop, domain, grid, check, delta ? &*delta : nullptr);
            sink.emit({{"tol", tol}, {"grid", grid_points}, {"budget", budget}}, dump_domain_report(rep),
                      out_stream);
            return verdict_exit_code(rep.verdict);
        }

        if (*c_radius) {
            const ModelFile model = load_system(system_path);
            const Property prop = parse_property(property_name_str);
            const BoxDomain domain = resolve_domain(model, domain_path);
            RadiusOptions opts;
            opts.tol = tol;
            opts.omega_points = omega_points;
            opts.grid_points = grid_points;
            opts.jobs = jobs;

            auto radius_with_soundness = [&](Property p) {
                const RadiusResult r = preservation_radius(model.system, domain, p, opts);
                json rj = dump_radius(r);
                if (soundness_samples > 0) {
                    Rng rng(seed);
                    const SoundnessReport sr = sample_admissible_soundness(
                        model.system, domain, r, soundness_samples, soundness_points, rng, tol);
                    rj["soundness"] = {{"perturbations", sr.deltas_checked},
                                       {"points_per_perturbation", sr.points_per_delta},
                                       {"all_held", sr.all_held},
                                       {"worst_margin", sr.worst_margin}};
                }
                return rj;
            };

            json result;
            if (prop == Property::Minimality) {
                result["type"] = "radius-minimality";
                result["controllability"] = radius_with_soundness(Property::Controllability);
                result["observability"] = radius_with_soundness(Property::Observability);
                const double dc = result["controllability"]["delta"].get<double>();
                const double dob = result["observability"]["delta"].get<double>();
                result["delta"] = std::min(dc, dob);
            } else {
                result = radius_with_soundness(prop);
            }
            sink.emit({{"tol", tol}, {"grid", grid_points}, {"omega_points", omega_points}}, result, out_stream);
            return 0;
        }

        if (*c_attack) {
            const ModelFile model = load_system(system_path);
            const Property prop = parse_property(property_name_str);
            const BoxDomain domain = resolve_domain(model, domain_path);
            ViolationOptions opts;
            opts.tol = tol;
            opts.jobs = jobs;
            const ViolationWitness w = construct_violation(model.system, domain, prop, opts);
            double block_bound = std::numeric_limits<double>::quiet_NaN();
            try {
                RadiusOptions ropts;
                ropts.tol = tol;
                block_bound =
                    preservation_radius(model.system, domain,
                                        prop == Property::Minimality ? Property::Controllability : prop, ropts)
                        .block_bound;
            } catch (const Error&) {
            }
            json result = dump_violation(w, block_bound);
            result["property"] = property_name(prop);
            sink.emit({{"tol", tol}}, result, out_stream);
            return 0;
        }

        if (*c_delay) {
            const ModelFile model = load_system(system_path);
            const DelaySystem dsys = model.as_delay_system();
            const Property prop = parse_property(property_name_str);
            const BoxDomain domain = resolve_domain(model, domain_path);
            const DelaySearchBox box = parse_sigma_box(dsys, domain, prop);
            DelayTestOptions opts = make_cover_options();
            wire_cell_log(opts.cover);

            DelayDomainReport rep;
            std::vector<double> h, h2;
            if (mode == "independent") {
                rep = delay_independent_test(dsys, domain, box, prop, floor_value, budget, opts);
            } else if (mode == "dependent") {
                std::tie(h, h2) = parse_delays(delays_text);
                if (h.size() != dsys.eta() || h2.size() != dsys.kappa())
                    throw ValidationError("--delays must list one internal and one external value per delay term");
                rep = delay_dependent_test(dsys, domain, h, h2, box, prop, floor_value, budget, opts);
            } else {
                throw ValidationError("--mode must be 'independent' or 'dependent'");
            }
            sink.emit({{"tol", tol}, {"floor", floor_value}, {"budget", budget}}, dump_delay_report(rep, h, h2),
                      out_stream);
            return verdict_exit_code(rep.verdict);
        }

        if (*c_report) {
            const json j = read_json_file(report_path);
            if (j.value("format", "") != std::string("lpvcert-report"))
                throw ValidationError(report_path + ": not a report file");
            if (format == "json") {
                out_stream << j.dump(2) << "\n";
            } else if (format == "text") {
                out_stream << "tool:    " << j.value("tool", "?") << "\n";
                out_stream << "command:";
                for (const auto& a : j.value("command", json::array())) out_stream << " " << a.get<std::string>();
                out_stream << "\n";
                const json& result = j.contains("result") ? j["result"] : json::object();
                out_stream << "type:    " << result.value("type", "?") << "\n";
                if (result.contains("verdict"))
                    out_stream << "verdict: " << result["verdict"].get<std::string>() << "\n";
                for (const char* key : {"property", "min_sigma", "delta", "block_bound", "eps_c0", "delta_c0",
                                        "pert_norm", "points_tested", "floor"})
                    if (result.contains(key))
                        out_stream << key << ": " << result[key].dump() << "\n";
            } else {
                throw ValidationError("--format must be 'json' or 'text'");
            }
            if (j.contains("result") && j["result"].contains("verdict"))
                return verdict_exit_code(j["result"]["verdict"].get<std::string>());
            return 0;
        }
    } catch (const ParseError& e) {
        err_stream << "error: " << e.what() << "\n";
        return 3;
    } catch (const ValidationError& e) {
        err_stream << "error: " << e.what() << "\n";
        return 3;
    } catch (const MissingSGridError& e) {
        err_stream << "error: " << e.what() << "\n";
        return 3;
    } catch (const NominalPropertyFailsError& e) {
        err_stream << "error: " << e.what() << "\n";
        return 1;
    } catch (const NominalAlreadyViolatedError& e) {
        err_stream << "error: " << e.what() << "\n";
        return 1;
    } catch (const NotExpressibleError& e) {
        err_stream << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        err_stream << "error: " << e.what() << "\n";
        return 3;
    }
    return 3;
}

}  // namespace lpvcert
