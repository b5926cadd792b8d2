#include "hesm/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <future>
#include <ostream>
#include <thread>

namespace hesm::cli {

namespace fs = std::filesystem;
using config::json;

int exit_code_for(const config::ConfigError& e) {
    return e.kind() == config::ErrorKind::missing_file ? exit_io : exit_config;
}

std::string format_number(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", x);
    return buf;
}

void write_trace_csv(std::ostream& os, const sim::Trace& tr) {
    os << trace_header << '\n';
    for (std::size_t k = 0; k < tr.size(); ++k) {
        os << format_number(tr.t[k]) << ',' << format_number(tr.v_bus[k]) << ',' << format_number(tr.i_L[k]) << ','
           << format_number(tr.i_batt[k]) << ',' << format_number(tr.i_uc[k]) << ',' << format_number(tr.zeta[k])
           << ',' << format_number(tr.soc[k]) << ',' << format_number(tr.v_uc[k]) << ','
           << format_number(tr.i_limit[k]) << ',' << tr.ctrl_state[k] << ',' << tr.flags[k] << '\n';
    }
}

KclCheck kcl_check(const sim::Trace& tr, double C2) {
    KclCheck c;
    for (std::size_t k = 0; k < tr.size(); ++k) {
        const double lhs = (tr.i_hesm[k] - tr.i_branch[k]) / C2;
        c.max_residual = std::max(c.max_residual, std::abs(lhs - tr.dv_bus_dt[k]));
        c.max_dv = std::max(c.max_dv, std::abs(tr.dv_bus_dt[k]));
    }
    return c;
}

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json energy_json(const sim::EnergyLedger& e) {
    return {{"source_J", e.source},
            {"load_J", e.load},
            {"loss_J", e.loss},
            {"stored_delta_J", e.stored_delta},
            {"residual_J", e.residual()},
            {"gross_J", e.gross},
            {"residual_pct_of_gross", e.gross > 0.0 ? json(100.0 * std::abs(e.residual()) / e.gross) : json(nullptr)}};
}

std::optional<sim::Metrics> try_metrics(const sim::Trace& tr, const sim::LoadProfile& p, std::string* why) {
    try {
        return sim::compute_metrics(tr, p);
    } catch (const sim::MetricError& e) {
        if (why) *why = e.what();
        return std::nullopt;
    }
}

fs::path resolve(const fs::path& dir, const std::string& p) {
    const fs::path q(p);
    return q.is_absolute() ? q : dir / q;
}

// Throws std::runtime_error with the path on failure.
void write_file(const fs::path& p, const std::string& body) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    f << body;
    if (!f) throw std::runtime_error("write failed for " + p.string());
}

std::string trace_text(const sim::Trace& tr) {
    std::ostringstream os;
    write_trace_csv(os, tr);
    return os.str();
}

Chart bus_chart(const std::string& title) {
    Chart c;
    c.title = title;
    c.x_label = "time (s)";
    c.y_label = "bus voltage (V)";
    return c;
}

Chart currents_chart(const sim::Trace& tr) {
    Chart c;
    c.title = "Currents";
    c.x_label = "time (s)";
    c.y_label = "current (A)";
    c.series = {{"inductor i_L", tr.t, tr.i_L, ""},
                {"battery", tr.t, tr.i_batt, ""},
                {"ultracap", tr.t, tr.i_uc, ""},
                {"net load zeta", tr.t, tr.zeta, ""},
                {"battery limit", tr.t, tr.i_limit, ""}};
    return c;
}

std::string describe(const config::Config& c) {
    return std::string(sim::to_string(c.sim.controller.kind)) + "/" + sim::to_string(c.sim.integration.mode);
}

} // namespace

json metrics_json(const sim::Metrics& m) {
    return {{"swing_V", m.swing},
            {"swing_a_V", m.swing_a},
            {"swing_b_V", opt(m.swing_b)},
            {"sag_V", opt(m.sag)},
            {"sag_a_V", opt(m.sag_a)},
            {"cycles_a", m.cycles_a},
            {"cycles_b", m.cycles_b}};
}

json report_json(const config::Config& cfg, const sim::RunResult& r) {
    std::string why;
    const auto m = try_metrics(r.trace, cfg.sim.load, &why);
    const auto eq = kcl_check(r.trace, cfg.sim.plant.C2);
    json fault = nullptr;
    if (r.meta.fault) {
        fault = {{"kind", plant::to_string(r.meta.fault->kind)},
                 {"t_s", r.meta.fault->t},
                 {"message", r.meta.fault->message}};
    }
    return {{"tool", "hesm_sim"},
            {"version", version},
            {"config_digest", config::digest_hex(cfg)},
            {"controller", sim::to_string(cfg.sim.controller.kind)},
            {"model", sim::to_string(cfg.sim.integration.mode)},
            {"status", r.ok() ? "ok" : "fault"},
            {"fault", fault},
            {"metrics", m ? metrics_json(*m) : json(nullptr)},
            {"metrics_error", m ? json(nullptr) : json(why)},
            {"run",
             {{"steps", r.meta.steps},
              {"wall_seconds", r.meta.wall_seconds},
              {"tick_s", r.trace.tick},
              {"substeps_per_dt", r.meta.substeps},
              {"samples", r.trace.size()},
              {"decimation", r.trace.decimation},
              {"dcm_events", r.meta.dcm_events},
              {"uncovered_events", r.meta.uncovered_events},
              {"duty_checks", r.meta.duty_checks}}},
            {"energy", energy_json(r.meta.energy)},
            {"kcl", {{"max_residual_V_per_s", eq.max_residual}, {"max_abs_dv_V_per_s", eq.max_dv}}}};
}

int cmd_run(const config::Config& cfg, const fs::path& out_dir, std::ostream& log) {
    sim::RunResult r;
    try {
        r = sim::run(cfg.sim);
    } catch (const plant::SimulationFault& e) {
        log << "error: " << e.what() << '\n';
        return exit_config;
    }
    const json report = report_json(cfg, r);
    try {
        fs::create_directories(out_dir);
        write_file(resolve(out_dir, cfg.output.trace_path), trace_text(r.trace));
        write_file(out_dir / "report.json", report.dump(2) + "\n");
        if (cfg.output.plots) {
            Chart bus = bus_chart("Bus voltage (" + describe(cfg) + ")");
            bus.series.push_back({"v_bus", r.trace.t, r.trace.v_bus, ""});
            write_file(out_dir / "bus_voltage.svg", render_svg(bus));
            write_file(out_dir / "currents.svg", render_svg(currents_chart(r.trace)));
        }
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        return exit_io;
    }
    log << describe(cfg) << ": " << r.meta.steps << " steps in " << format_number(r.meta.wall_seconds) << " s";
    if (!report["metrics"].is_null()) {
        log << ", swing " << report["metrics"]["swing_V"].dump();
        log << " V, sag " << report["metrics"]["sag_V"].dump() << " V";
    }
    log << '\n';
    if (!r.ok()) {
        log << "fault: " << r.meta.fault->message << " (partial trace written)\n";
        return exit_divergence;
    }
    return exit_ok;
}

int cmd_compare(const config::Config& a, const config::Config& b, const fs::path& out_dir, std::ostream& log) {
    if (!(a.sim.load == b.sim.load)) {
        log << "error: the two configs use different load profiles; comparison refused\n";
        return exit_guard;
    }
    sim::RunResult ra, rb;
    try {
        auto fa = std::async(std::launch::async, [&] { return sim::run(a.sim); });
        rb = sim::run(b.sim);
        ra = fa.get();
    } catch (const plant::SimulationFault& e) {
        log << "error: " << e.what() << '\n';
        return exit_config;
    }
    const auto ma = try_metrics(ra.trace, a.sim.load, nullptr);
    const auto mb = try_metrics(rb.trace, b.sim.load, nullptr);
    std::string la = "a: " + describe(a), lb = "b: " + describe(b);

    json improvement = nullptr;
    if (ma && mb) {
        const auto imp = sim::compare(*ma, *mb);
        improvement = {{"swing_pct", opt(imp.swing_pct)},
                       {"swing_a_pct", opt(sim::improvement_pct(ma->swing_a, mb->swing_a))},
                       {"swing_b_pct", (ma->swing_b && mb->swing_b)
                                           ? opt(sim::improvement_pct(*ma->swing_b, *mb->swing_b))
                                           : json(nullptr)},
                       {"sag_pct", opt(imp.sag_pct)}};
    }
    const json report = {{"tool", "hesm_sim"},
                         {"version", version},
                         {"baseline", "a"},
                         {"a", report_json(a, ra)},
                         {"b", report_json(b, rb)},
                         {"improvement", improvement}};
    try {
        fs::create_directories(out_dir);
        write_file(out_dir / "compare.json", report.dump(2) + "\n");
        Chart c = bus_chart("Bus voltage, " + la + " vs " + lb);
        c.series.push_back({la, ra.trace.t, ra.trace.v_bus, "#d62728"});
        c.series.push_back({lb, rb.trace.t, rb.trace.v_bus, "#1f77b4"});
        write_file(out_dir / "bus_voltage_overlay.svg", render_svg(c));
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        return exit_io;
    }

    auto cell = [](const json& v) { return v.is_null() ? std::string("n/a") : format_number(v.get<double>()); };
    log << "metric        a            b            improvement %\n";
    if (ma && mb) {
        log << "swing_V       " << format_number(ma->swing) << "    " << format_number(mb->swing) << "    "
            << cell(improvement["swing_pct"]) << '\n';
        log << "sag_V         " << (ma->sag ? format_number(*ma->sag) : "n/a") << "    "
            << (mb->sag ? format_number(*mb->sag) : "n/a") << "    " << cell(improvement["sag_pct"]) << '\n';
    }
    if (!ra.ok() || !rb.ok()) {
        log << "fault in " << (!ra.ok() ? "a" : "b") << " (partial results written)\n";
        return exit_divergence;
    }
    return exit_ok;
}

int cmd_surface(const config::Config& cfg, const fs::path& out_file, std::size_t res, std::ostream& log) {
    if (cfg.sim.controller.kind != sim::ControllerKind::flc) {
        log << "error: surface export needs controller.type = flc\n";
        return exit_config;
    }
    if (res < 2) {
        log << "error: --res must be at least 2\n";
        return exit_config;
    }
    const auto& fc = cfg.sim.controller.flc;
    const auto& v = fc.bus_voltage();
    const auto& i = fc.hesm_current();
    std::ostringstream os;
    os << "v_bus_V,i_hesm_A,i_limit_A\n";
    const double n = static_cast<double>(res - 1);
    for (std::size_t a = 0; a < res; ++a) {
        const double vb = v.lo() + v.span() * static_cast<double>(a) / n;
        for (std::size_t b = 0; b < res; ++b) {
            const double ih = i.lo() + i.span() * static_cast<double>(b) / n;
            os << format_number(vb) << ',' << format_number(ih) << ','
               << format_number(fuzzy::infer(fc, vb, ih).value) << '\n';
        }
    }
    try {
        write_file(out_file, os.str());
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        return exit_io;
    }
    log << "surface " << res << "x" << res << " written to " << out_file.string() << '\n';
    return exit_ok;
}

int cmd_sweep(const config::Config& cfg, const std::string& key, const std::vector<std::string>& values,
              const fs::path& out_dir, unsigned threads, std::ostream& log) {
    if (values.empty()) {
        log << "error: --values is empty\n";
        return exit_config;
    }
    std::vector<config::Config> cfgs;
    std::vector<sim::SimConfig> sims;
    for (const auto& v : values) {
        // Numbers and literals parse as JSON; anything else is a string.
        json value = json::parse(v, nullptr, false);
        if (value.is_discarded()) value = v;
        try {
            cfgs.push_back(config::with_value(cfg, key, value));
        } catch (const config::ConfigError& e) {
            log << "error: " << e.what() << '\n';
            return exit_config;
        }
        sims.push_back(cfgs.back().sim);
    }
    const auto results = sim::sweep(sims, threads);

    std::ostringstream csv;
    csv << "value,status,swing_V,swing_a_V,swing_b_V,sag_V,steps,config_digest\n";
    json rows = json::array();
    bool faulted = false;
    for (std::size_t k = 0; k < results.size(); ++k) {
        const auto& r = results[k];
        faulted = faulted || r.meta.fault.has_value();
        const std::string status = r.meta.fault ? plant::to_string(r.meta.fault->kind) : "ok";
        auto num = [](const std::optional<double>& x) { return x ? format_number(*x) : std::string(); };
        csv << values[k] << ',' << status << ',';
        if (r.metrics) {
            csv << format_number(r.metrics->swing) << ',' << format_number(r.metrics->swing_a) << ','
                << num(r.metrics->swing_b) << ',' << num(r.metrics->sag);
        } else {
            csv << ",,,";
        }
        csv << ',' << r.meta.steps << ',' << config::digest_hex(cfgs[k]) << '\n';
        rows.push_back({{"value", values[k]},
                        {"status", status},
                        {"metrics", r.metrics ? metrics_json(*r.metrics) : json(nullptr)},
                        {"steps", r.meta.steps},
                        {"energy", energy_json(r.meta.energy)},
                        {"config_digest", config::digest_hex(cfgs[k])}});
    }
    try {
        fs::create_directories(out_dir);
        write_file(out_dir / "sweep.csv", csv.str());
        write_file(out_dir / "sweep.json",
                   json{{"tool", "hesm_sim"}, {"version", version}, {"key", key}, {"runs", rows}}.dump(2) + "\n");
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        return exit_io;
    }
    log << "sweep over " << key << ": " << results.size() << " runs\n";
    return faulted ? exit_divergence : exit_ok;
}

unsigned threads_from_env() {
    if (const char* s = std::getenv("HESM_SIM_THREADS")) {
        char* end = nullptr;
        const long n = std::strtol(s, &end, 10);
        if (end != s && *end == '\0' && n > 0) return static_cast<unsigned>(n);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

int main(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Battery/ultracapacitor HESM simulator with fuzzy and if-then supervision"};
    app.set_version_flag("--version", version);
    app.require_subcommand(1);

    std::string cfg_path, out_path, controller, model, cfg_b, key, values;
    double dt = 0.0;
    std::size_t res = 50;

    auto* run = app.add_subcommand("run", "Simulate one configuration");
    run->add_option("--config", cfg_path, "JSON config")->required();
    run->add_option("--out", out_path, "output directory")->required();
    run->add_option("--controller", controller, "override controller.type")
        ->check(CLI::IsMember({"flc", "ifthen"}));
    run->add_option("--model", model, "override integration.mode")->check(CLI::IsMember({"switched", "averaged"}));
    run->add_option("--dt", dt, "override integration.dt (s)");

    auto* cmp = app.add_subcommand("compare", "Run two configurations and compare; a is the baseline");
    cmp->add_option("--a", cfg_path, "baseline config")->required();
    cmp->add_option("--b", cfg_b, "candidate config")->required();
    cmp->add_option("--out", out_path, "output directory")->required();

    auto* surf = app.add_subcommand("surface", "Export the fuzzy control surface as CSV");
    surf->add_option("--config", cfg_path, "JSON config")->required();
    surf->add_option("--out", out_path, "output CSV file")->required();
    surf->add_option("--res", res, "grid points per axis");

    auto* sw = app.add_subcommand("sweep", "Run one configuration across values of a single key");
    sw->add_option("--config", cfg_path, "JSON config")->required();
    sw->add_option("--vary", key, "dotted key path, e.g. plant.C2")->required();
    sw->add_option("--values", values, "comma separated values")->required();
    sw->add_option("--out", out_path, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_config;
    }

    try {
        auto cfg = config::parse_file(cfg_path);
        if (run->parsed()) {
            if (!controller.empty()) cfg = config::with_value(cfg, "controller.type", controller);
            if (!model.empty()) cfg = config::with_value(cfg, "integration.mode", model);
            if (run->count("--dt")) cfg = config::with_value(cfg, "integration.dt", dt);
            return cmd_run(cfg, out_path, out);
        }
        if (cmp->parsed()) return cmd_compare(cfg, config::parse_file(cfg_b), out_path, out);
        if (surf->parsed()) return cmd_surface(cfg, out_path, res, out);
        std::vector<std::string> list;
        std::stringstream ss(values);
        for (std::string item; std::getline(ss, item, ',');) {
            if (!item.empty()) list.push_back(item);
        }
        return cmd_sweep(cfg, key, list, out_path, threads_from_env(), out);
    } catch (const config::ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
}

} // namespace hesm::cli
