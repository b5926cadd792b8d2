#include "hesm/sim.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

namespace hesm::sim {

using plant::FaultKind;
using plant::SimulationFault;

namespace {

void invalid(const std::string& what) { throw SimulationFault(FaultKind::invalid_parameter, 0.0, what); }

// Number of ticks in `interval`, which must be a whole multiple of `tick`.
std::uint64_t whole_ticks(double interval, double tick, const char* what) {
    const double ratio = interval / tick;
    const double n = std::round(ratio);
    if (n < 1.0 || std::abs(ratio - n) > 1e-6 * std::max(1.0, n)) {
        invalid(std::string(what) + " is not a whole number of integration ticks");
    }
    return static_cast<std::uint64_t>(n);
}

struct Schedule {
    double tick;
    std::size_t substeps;
    std::uint64_t total;
    std::uint64_t control_every;
    std::uint64_t supervise_every;
    std::uint64_t sample_every;
};

Schedule schedule(const SimConfig& cfg) {
    const double period = 1.0 / cfg.plant.f_sw;
    const double dt = cfg.integration.dt;
    Schedule s{};
    if (cfg.integration.mode == IntegrationMode::switched) {
        s.tick = dt;
        s.substeps = 1;
        s.control_every = whole_ticks(period, dt, "the PWM period");
        if (s.control_every < 20) invalid("integration.dt must be at most 1/(20 f_sw) in switched mode");
    } else {
        // One control update per PWM period at most: larger steps are split.
        s.substeps = static_cast<std::size_t>(std::max(1.0, std::ceil(dt / period - 1e-9)));
        s.tick = dt / static_cast<double>(s.substeps);
        s.control_every = 1;
    }
    if (cfg.integration.t_stop) s.total = whole_ticks(*cfg.integration.t_stop, s.tick, "integration.t_stop");
    else s.total = whole_ticks(cfg.load.t_end, s.tick, "load.t_end");
    s.supervise_every = whole_ticks(1.0 / cfg.controller.supervisor_rate_hz, s.tick, "the supervisor period");
    s.sample_every = whole_ticks(1.0 / cfg.decimation_hz, s.tick, "the decimation interval");
    return s;
}

control::Supervisor make_supervisor(const ControllerConfig& c) {
    if (c.kind == ControllerKind::flc) return control::FlcSupervisor(c.flc);
    return control::IfThenSupervisor(c.ifthen);
}

// Mean over [lo, hi], or [lo, hi) when the upper end belongs to the next phase.
double mean_in(const Trace& tr, double lo, double hi, bool closed = true) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < tr.size(); ++k) {
        if (tr.t[k] >= lo && (closed ? tr.t[k] <= hi : tr.t[k] < hi)) {
            sum += tr.v_bus[k];
            ++n;
        }
    }
    if (n == 0) throw MetricError("no samples in averaging window");
    return sum / static_cast<double>(n);
}

struct PhaseSwing {
    double worst = 0.0;
    std::size_t cycles = 0;
};

PhaseSwing phase_swing(const Trace& tr, double start, double end, double period) {
    const double eps = 1e-9 * std::max(1.0, end);
    const double last = tr.t.empty() ? 0.0 : tr.t.back();
    PhaseSwing out;
    for (double c0 = start; c0 + period <= end + eps && c0 + period <= last + eps; c0 += period) {
        const double c1 = c0 + period;
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (std::size_t k = 0; k < tr.size(); ++k) {
            if (tr.t[k] >= c0 - eps && tr.t[k] < c1 - eps) {
                lo = std::min(lo, tr.v_bus[k]);
                hi = std::max(hi, tr.v_bus[k]);
            }
        }
        if (hi < lo) continue;
        out.worst = std::max(out.worst, hi - lo);
        ++out.cycles;
    }
    return out;
}

std::optional<double> sag_between(const Trace& tr, double start, double end, bool closed) {
    constexpr double window = 2.0;
    if (end - start < 2.0 * window || tr.t.empty() || tr.t.back() + 1e-9 < end) return std::nullopt;
    return mean_in(tr, start, start + window) - mean_in(tr, end - window, end, closed);
}

} // namespace

void LoadProfile::validate() const {
    if (!(t_high > 0.0 && t_low > 0.0)) invalid("load.t_high and load.t_low must be positive");
    if (!(t_shift > 0.0 && t_shift < t_end)) invalid("load.t_shift must lie strictly inside (0, t_end)");
    for (double v : {phase_a.i_high, phase_a.i_low, phase_b.i_high, phase_b.i_low}) {
        if (!std::isfinite(v)) invalid("load currents must be finite");
    }
}

double load_current(const LoadProfile& p, double t) {
    const double eps = 1e-9 * std::max(1.0, p.t_end);
    if (!(t >= -eps && t <= p.t_end + eps)) {
        throw QueryError("load profile queried outside [0, t_end] at t=" + std::to_string(t));
    }
    const bool b = t >= p.t_shift - eps;
    const LoadPhase& ph = b ? p.phase_b : p.phase_a;
    const double local = std::max(0.0, b ? t - p.t_shift : t);
    double pos = std::fmod(local, p.period());
    if (p.period() - pos <= eps) pos = 0.0;
    return pos < p.t_high - eps ? -ph.i_high : -ph.i_low;
}

const char* to_string(ControllerKind k) { return k == ControllerKind::flc ? "flc" : "ifthen"; }
const char* to_string(IntegrationMode m) { return m == IntegrationMode::switched ? "switched" : "averaged"; }

void validate(const SimConfig& cfg) {
    cfg.plant.validate();
    cfg.battery.validate();
    cfg.ultracap.validate();
    cfg.load.validate();
    if (cfg.plant.textbook_mode) invalid("plant.textbook_mode is for equation checks and cannot be simulated");
    if (!(cfg.integration.dt > 0.0)) invalid("integration.dt must be positive");
    if (cfg.integration.t_stop && !(*cfg.integration.t_stop > 0.0 && *cfg.integration.t_stop <= cfg.load.t_end)) {
        invalid("integration.t_stop must lie in (0, load.t_end]");
    }
    if (!(cfg.decimation_hz > 0.0)) invalid("output.decimation_hz must be positive");
    if (!(cfg.controller.supervisor_rate_hz > 0.0)) invalid("controller.supervisor_rate_hz must be positive");
    const auto& g = cfg.controller.cascade;
    for (const auto* pi : {&g.discharge_voltage, &g.discharge_current, &g.recharge_voltage, &g.recharge_current}) {
        if (!(pi->out_lo < pi->out_hi)) invalid("PI output bounds need out_lo < out_hi");
        if (!(pi->kp >= 0.0 && pi->ki >= 0.0)) invalid("PI gains must be non-negative");
    }
    if (!(g.v_ref > 0.0)) invalid("controller.v_ref must be positive");
    if (!(g.dead_band >= 0.0)) invalid("controller.dead_band must be non-negative");
    const auto& it = cfg.controller.ifthen;
    if (!(it.v_low < it.v_high)) invalid("ifthen.v_low must be below ifthen.v_high");
    schedule(cfg);
}

RunResult run(const SimConfig& cfg) {
    validate(cfg);
    const auto wall0 = std::chrono::steady_clock::now();
    const Schedule sch = schedule(cfg);
    const plant::Plant plant(cfg.plant, cfg.battery, cfg.ultracap);
    auto supervisor = make_supervisor(cfg.controller);
    const auto& gains = cfg.controller.cascade;
    const bool switched = cfg.integration.mode == IntegrationMode::switched;
    const double control_dt = static_cast<double>(sch.control_every) * sch.tick;
    const double v_max = 2.0 * gains.v_ref;

    RunResult res;
    Trace& tr = res.trace;
    tr.decimation = sch.sample_every;
    tr.tick = sch.tick;
    const std::size_t expected = sch.total / sch.sample_every + 1;
    for (auto* v : {&tr.t, &tr.v_bus, &tr.i_L, &tr.i_batt, &tr.i_uc, &tr.zeta, &tr.soc, &tr.v_uc, &tr.i_limit,
                    &tr.i_ref, &tr.i_hesm, &tr.i_branch, &tr.dv_bus_dt}) {
        v->reserve(expected);
    }
    tr.ctrl_state.reserve(expected);
    tr.flags.reserve(expected);
    res.meta.substeps = sch.substeps;

    plant::PlantState s = plant.initial_state();
    const double stored0 = plant.stored_energy(s);
    control::CascadeState cst;
    control::SupervisorOutput limit;
    plant::DutyCommand duty;
    std::uint32_t pending_flags = 0;
    auto& E = res.meta.energy;

    try {
        for (std::uint64_t n = 0;; ++n) {
            s.t = static_cast<double>(n) * sch.tick;
            const double zeta = load_current(cfg.load, s.t);
            const auto ports = plant.ports(s, zeta);

            if (n % sch.supervise_every == 0) {
                const double dv = plant.derivatives(s, duty, zeta).dv_C2;
                limit = supervisor.update(s.v_C2, plant.hesm_current(s, ports, dv));
                if (limit.uncovered_input_flag) {
                    ++res.meta.uncovered_events;
                    pending_flags |= flag_uncovered_input;
                }
            }
            if (n % sch.control_every == 0) {
                duty = control::cascade_update(gains, cst, {s.v_C2, s.i_L, ports.i_V1}, limit, control_dt);
            }
            plant::check_duty(duty);
            ++res.meta.duty_checks;

            if (n % sch.sample_every == 0) {
                const double dv = plant.derivatives(s, duty, zeta).dv_C2;
                tr.t.push_back(s.t);
                tr.v_bus.push_back(s.v_C2);
                tr.i_L.push_back(s.i_L);
                tr.i_batt.push_back(ports.i_V1);
                tr.i_uc.push_back(ports.i_V2);
                tr.zeta.push_back(zeta);
                tr.soc.push_back(cfg.battery.soc(s.q_extracted));
                tr.v_uc.push_back(s.v_uc);
                tr.i_limit.push_back(limit.i_batt_limit);
                tr.ctrl_state.push_back(static_cast<int>(supervisor.mode()));
                tr.flags.push_back(pending_flags);
                tr.i_ref.push_back(cst.i_ref);
                tr.i_hesm.push_back(plant.hesm_current(s, ports, dv));
                tr.i_branch.push_back(plant.branch_current(s, ports));
                tr.dv_bus_dt.push_back(dv);
                pending_flags = 0;
            }
            if (n == sch.total) break;

            const plant::PlantState before = s;
            const auto p0 = plant.powers(s, zeta);
            const double phase = static_cast<double>(n % sch.control_every) * sch.tick;
            const auto step = switched ? plant.step_switched(s, duty, zeta, sch.tick, phase)
                                       : plant.step_averaged(s, duty, zeta, sch.tick);
            s = step.state;
            ++res.meta.steps;
            if (step.dcm) {
                ++res.meta.dcm_events;
                pending_flags |= flag_dcm;
            }
            if (!(s.v_C2 >= 0.0 && s.v_C2 <= v_max)) {
                throw SimulationFault(FaultKind::divergence, s.t,
                                      "bus voltage left [0, " + std::to_string(v_max) + "] V at t=" +
                                          std::to_string(s.t));
            }
            const auto p1 = plant.powers(s, zeta);
            E.source += 0.5 * (p0.source + p1.source) * sch.tick;
            E.load += 0.5 * (p0.load + p1.load) * sch.tick;
            E.loss += 0.5 * (p0.loss + p1.loss) * sch.tick + step.clamp_energy;
            const auto gross = [&](const plant::PlantState& st, double z) {
                const auto pc = plant.ports(st, z);
                return std::abs(cfg.battery.open_circuit(st.q_extracted) * pc.i_V1) + std::abs(st.v_uc * pc.i_V2);
            };
            E.gross += 0.5 * (gross(before, zeta) + gross(s, zeta)) * sch.tick;
        }
    } catch (const SimulationFault& f) {
        res.meta.fault = Fault{f.kind(), f.time() > 0.0 ? f.time() : s.t, f.what()};
    }
    E.stored_delta = plant.stored_energy(s) - stored0;
    res.meta.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
    return res;
}

Metrics compute_metrics(const Trace& tr, const LoadProfile& p) {
    if (tr.size() < 2 || tr.t.back() - tr.t.front() + 1e-9 < p.period()) {
        throw MetricError("trace shorter than one pulse cycle");
    }
    Metrics m;
    const auto a = phase_swing(tr, 0.0, p.t_shift, p.period());
    const auto b = phase_swing(tr, p.t_shift, p.t_end, p.period());
    if (a.cycles == 0 && b.cycles == 0) throw MetricError("trace holds no complete pulse cycle");
    m.swing_a = a.worst;
    m.cycles_a = a.cycles;
    m.cycles_b = b.cycles;
    if (b.cycles > 0) m.swing_b = b.worst;
    m.swing = std::max(a.worst, b.worst);
    m.sag = sag_between(tr, p.t_shift, p.t_end, true);
    m.sag_a = sag_between(tr, 0.0, p.t_shift, false);
    return m;
}

std::optional<double> improvement_pct(double baseline, double candidate) {
    if (baseline == 0.0) return std::nullopt;
    return (baseline - candidate) / baseline * 100.0;
}

Improvement compare(const Metrics& baseline, const Metrics& candidate) {
    Improvement out;
    out.swing_pct = improvement_pct(baseline.swing, candidate.swing);
    if (baseline.sag && candidate.sag) out.sag_pct = improvement_pct(*baseline.sag, *candidate.sag);
    return out;
}

std::vector<RunSummary> sweep(const std::vector<SimConfig>& configs, unsigned threads) {
    std::vector<RunSummary> out(configs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < configs.size(); i = next++) {
            try {
                auto r = run(configs[i]);
                out[i].meta = r.meta;
                out[i].metrics = compute_metrics(r.trace, configs[i].load);
            } catch (const SimulationFault& f) {
                out[i].meta.fault = Fault{f.kind(), f.time(), f.what()};
            } catch (const MetricError&) {
            }
        }
    };
    const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(configs.size())));
    std::vector<std::jthread> pool;
    for (unsigned k = 1; k < n; ++k) pool.emplace_back(worker);
    worker();
    return out;
}

} // namespace hesm::sim
