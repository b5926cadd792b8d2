#include "hesm/plant.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace hesm::plant {

const char* to_string(FaultKind kind) {
    switch (kind) {
    case FaultKind::divergence: return "divergence";
    case FaultKind::battery_depleted: return "battery depleted";
    case FaultKind::battery_overcharged: return "battery overcharged";
    case FaultKind::shoot_through: return "shoot-through";
    case FaultKind::invalid_parameter: return "invalid parameter";
    }
    return "unknown";
}

namespace {

void require_positive(double v, const char* name) {
    if (!(std::isfinite(v) && v > 0.0)) {
        throw SimulationFault(FaultKind::invalid_parameter, 0.0, std::string(name) + " must be positive");
    }
}

// Switch-node behaviour outside textbook mode.
enum class Conduction { upper, lower, floating };

Conduction conduction(const PlantState& s, const SwitchCommand& sw) {
    if (sw.s1) return Conduction::upper;
    if (sw.s2) return Conduction::lower;
    // Both off: the body diodes carry the inductor current.
    if (s.i_L > 0.0) return Conduction::lower;
    if (s.i_L < 0.0) return Conduction::upper;
    if (s.v_C2 < 0.0) return Conduction::lower;
    if (s.v_C1 < s.v_C2) return Conduction::upper;
    return Conduction::floating;
}

ConverterDerivative textbook(const PlantParams& p, const PlantState& s, ConverterState st, const PortCurrents& q) {
    const double iL = s.i_L;
    switch (st) {
    case ConverterState::discharge_on:
        return {(s.v_C1 - s.v_C2) / p.L, (iL - q.i_V1) / p.C1, (iL - q.i_V2 - q.zeta) / p.C2};
    case ConverterState::discharge_off:
        return {-s.v_C2 / p.L, -q.i_V1 / p.C1, (iL - q.i_V2 - q.zeta) / p.C2};
    case ConverterState::recharge_on:
        return {s.v_C2 / p.L, -q.i_V1 / p.C1, (q.i_V2 - iL - q.zeta) / p.C2};
    case ConverterState::recharge_off:
        return {(s.v_C2 - s.v_C1) / p.L, (iL - q.i_V1) / p.C1, (q.i_V2 - iL - q.zeta) / p.C2};
    }
    return {};
}

ConverterDerivative resistive(const PlantParams& p, const PlantState& s, const SwitchCommand& sw,
                              const PortCurrents& q) {
    const Conduction c = conduction(s, sw);
    ConverterDerivative d;
    if (c == Conduction::floating) {
        d.di_L = 0.0;
        d.dv_C1 = q.i_V1 / p.C1;
    } else {
        const double v_sw = c == Conduction::upper ? s.v_C1 : 0.0;
        d.di_L = (v_sw - s.v_C2 - p.series_resistance() * s.i_L) / p.L;
        d.dv_C1 = (q.i_V1 - (c == Conduction::upper ? s.i_L : 0.0)) / p.C1;
    }
    d.dv_C2 = (s.i_L + q.i_V2 + q.zeta) / p.C2;
    return d;
}

using Vec = std::array<double, 5>;

Vec pack(const PlantState& s) { return {s.i_L, s.v_C1, s.v_C2, s.q_extracted, s.v_uc}; }

PlantState unpack(const Vec& v, double t) { return {v[0], v[1], v[2], v[3], v[4], t}; }

template <class Rhs>
Vec rk4(const Vec& y, double t, double h, const Rhs& f) {
    auto axpy = [](const Vec& a, const Vec& k, double c) {
        Vec r;
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = a[i] + c * k[i];
        return r;
    };
    const Vec k1 = f(y, t);
    const Vec k2 = f(axpy(y, k1, h / 2), t + h / 2);
    const Vec k3 = f(axpy(y, k2, h / 2), t + h / 2);
    const Vec k4 = f(axpy(y, k3, h), t + h);
    Vec out;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return out;
}

void check_finite(const PlantState& s) {
    if (!(std::isfinite(s.i_L) && std::isfinite(s.v_C1) && std::isfinite(s.v_C2) && std::isfinite(s.q_extracted) &&
          std::isfinite(s.v_uc))) {
        throw SimulationFault(FaultKind::divergence, s.t, "non-finite plant state at t=" + std::to_string(s.t));
    }
}

// The freewheel diode cannot carry current against the active direction.
void clamp_reversal(StepResult& r, double i_before, Direction dir, double L) {
    const double i_after = r.state.i_L;
    const bool reversed = dir == Direction::discharge ? (i_before >= 0.0 && i_after < 0.0)
                                                      : (i_before <= 0.0 && i_after > 0.0);
    if (reversed) {
        r.clamp_energy += 0.5 * L * i_after * i_after;
        r.state.i_L = 0.0;
        r.dcm = true;
    }
}

} // namespace

void PlantParams::validate() const {
    require_positive(L, "plant.L");
    require_positive(esr_L, "plant.esr_L");
    require_positive(C1, "plant.C1");
    require_positive(C2, "plant.C2");
    require_positive(r_on, "plant.r_on");
    require_positive(f_sw, "plant.f_sw");
    if (f_sw < 1e3) throw SimulationFault(FaultKind::invalid_parameter, 0.0, "plant.f_sw must be at least 1 kHz");
}

void BatteryModel::validate() const {
    require_positive(v_nom, "battery.v_nom");
    require_positive(capacity_Ah, "battery.capacity_Ah");
    require_positive(r_int, "battery.r_int");
    require_positive(E0, "battery.E0");
    if (!(K >= 0.0 && A >= 0.0 && B >= 0.0)) {
        throw SimulationFault(FaultKind::invalid_parameter, 0.0, "battery.K, A and B must be non-negative");
    }
    if (!(soc0 > 0.0 && soc0 <= 1.0)) {
        throw SimulationFault(FaultKind::invalid_parameter, 0.0, "battery.soc0 must lie in (0, 1]");
    }
}

double BatteryModel::open_circuit(double q) const {
    return E0 - K * capacity_Ah / (capacity_Ah - q) * q + A * std::exp(-B * q);
}

void UltracapModel::validate() const {
    require_positive(capacitance, "ultracap.capacitance");
    require_positive(esr, "ultracap.esr");
    if (!(std::isfinite(v0) && v0 >= 0.0)) {
        throw SimulationFault(FaultKind::invalid_parameter, 0.0, "ultracap.v0 must be non-negative");
    }
}

ConverterState converter_state(const SwitchCommand& sw) {
    if (sw.s1 && sw.s2) throw SimulationFault(FaultKind::shoot_through, 0.0, "shoot-through: S1 and S2 both on");
    if (sw.s1) return ConverterState::discharge_on;
    if (sw.s2) return ConverterState::recharge_on;
    return sw.direction == Direction::discharge ? ConverterState::discharge_off : ConverterState::recharge_off;
}

void check_duty(const DutyCommand& duty) {
    if (!(duty.d1 >= 0.0 && duty.d1 <= 1.0 && duty.d2 >= 0.0 && duty.d2 <= 1.0)) {
        throw SimulationFault(FaultKind::invalid_parameter, 0.0, "duty fractions must lie in [0, 1]");
    }
    if (duty.d1 > 0.0 && duty.d2 > 0.0) {
        throw SimulationFault(FaultKind::shoot_through, 0.0, "shoot-through: both directions have duty");
    }
    if ((duty.direction == Direction::discharge && duty.d2 > 0.0) ||
        (duty.direction == Direction::recharge && duty.d1 > 0.0)) {
        throw SimulationFault(FaultKind::invalid_parameter, 0.0, "duty given for the inactive direction");
    }
}

ConverterDerivative derivatives(const PlantParams& p, const PlantState& s, const SwitchCommand& sw,
                                const PortCurrents& ports) {
    const ConverterState st = converter_state(sw);
    if (p.textbook_mode) return textbook(p, s, st, ports);
    return resistive(p, s, sw, ports);
}

ConverterDerivative averaged_derivatives(const PlantParams& p, const PlantState& s, const DutyCommand& duty,
                                         const PortCurrents& ports) {
    check_duty(duty);
    const bool dis = duty.direction == Direction::discharge;
    const double d = duty.active();
    const SwitchCommand on{dis, !dis, duty.direction};
    const SwitchCommand off{false, false, duty.direction};
    const auto a = derivatives(p, s, on, ports);
    const auto b = derivatives(p, s, off, ports);
    return {d * a.di_L + (1.0 - d) * b.di_L, d * a.dv_C1 + (1.0 - d) * b.dv_C1, d * a.dv_C2 + (1.0 - d) * b.dv_C2};
}

double battery_terminal(const BatteryModel& m, double q, double i) {
    if (q < 0.0) throw SimulationFault(FaultKind::battery_overcharged, 0.0, "battery overcharged");
    if (q >= m.capacity_Ah) throw SimulationFault(FaultKind::battery_depleted, 0.0, "battery depleted");
    return m.open_circuit(q) - m.r_int * i;
}

double ultracap_terminal(const UltracapModel& m, double v_uc, double i) { return v_uc - m.esr * i; }

double hesm_current(double i_c2, double i_branch) { return i_c2 + i_branch; }

Plant::Plant(PlantParams params, BatteryModel battery, UltracapModel ultracap)
    : params_(params), battery_(battery), ultracap_(ultracap) {
    params_.validate();
    battery_.validate();
    ultracap_.validate();
}

PlantState Plant::initial_state() const {
    PlantState s;
    s.q_extracted = battery_.q0();
    s.v_C1 = battery_terminal(battery_, s.q_extracted, 0.0);
    s.v_uc = ultracap_.v0;
    s.v_C2 = ultracap_.v0;
    return s;
}

PortCurrents Plant::ports(const PlantState& s, double zeta) const {
    if (s.q_extracted < 0.0) throw SimulationFault(FaultKind::battery_overcharged, s.t, "battery overcharged");
    if (s.q_extracted >= battery_.capacity_Ah) {
        throw SimulationFault(FaultKind::battery_depleted, s.t, "battery depleted");
    }
    PortCurrents p;
    p.i_V1 = (battery_.open_circuit(s.q_extracted) - s.v_C1) / battery_.r_int;
    p.i_V2 = (s.v_uc - s.v_C2) / ultracap_.esr;
    p.zeta = zeta;
    return p;
}

double Plant::branch_current(const PlantState& s, const PortCurrents& ports) const {
    return -(s.i_L + ports.i_V2);
}

double Plant::hesm_current(const PlantState& s, const PortCurrents& ports, double dv_c2_dt) const {
    return plant::hesm_current(params_.C2 * dv_c2_dt, branch_current(s, ports));
}

ConverterDerivative Plant::derivatives(const PlantState& s, const DutyCommand& duty, double zeta) const {
    return averaged_derivatives(params_, s, duty, ports(s, zeta));
}

PowerFlows Plant::powers(const PlantState& s, double zeta) const {
    const auto p = ports(s, zeta);
    PowerFlows f;
    f.source = battery_.open_circuit(s.q_extracted) * p.i_V1 + s.v_uc * p.i_V2;
    f.load = -zeta * s.v_C2;
    f.loss = battery_.r_int * p.i_V1 * p.i_V1 + ultracap_.esr * p.i_V2 * p.i_V2 +
             params_.series_resistance() * s.i_L * s.i_L;
    return f;
}

double Plant::stored_energy(const PlantState& s) const {
    return 0.5 * params_.L * s.i_L * s.i_L + 0.5 * params_.C1 * s.v_C1 * s.v_C1 + 0.5 * params_.C2 * s.v_C2 * s.v_C2;
}

StepResult Plant::step_averaged(const PlantState& s, const DutyCommand& duty, double zeta, double dt) const {
    check_duty(duty);
    auto rhs = [&](const Vec& y, double t) {
        const PlantState st = unpack(y, t);
        const auto pc = ports(st, zeta);
        const auto d = averaged_derivatives(params_, st, duty, pc);
        return Vec{d.di_L, d.dv_C1, d.dv_C2, pc.i_V1 / 3600.0, -pc.i_V2 / ultracap_.capacitance};
    };
    StepResult r;
    r.state = unpack(rk4(pack(s), s.t, dt, rhs), s.t + dt);
    check_finite(r.state);
    if (!params_.textbook_mode) clamp_reversal(r, s.i_L, duty.direction, params_.L);
    return r;
}

StepResult Plant::step_switched(const PlantState& s, const DutyCommand& duty, double zeta, double dt,
                                double period_offset) const {
    check_duty(duty);
    const double period = 1.0 / params_.f_sw;
    if (dt > period / 20.0 * (1.0 + 1e-9)) {
        throw SimulationFault(FaultKind::invalid_parameter, s.t, "switched step must resolve the PWM period");
    }
    const bool dis = duty.direction == Direction::discharge;
    const double on_start = (1.0 - duty.active()) * period;
    const double eps = 1e-12 * period;

    StepResult r;
    r.state = s;
    double pos = std::fmod(period_offset, period);
    double remaining = dt;
    while (remaining > eps) {
        const bool on = pos >= on_start - eps && duty.active() > 0.0;
        const double edge = on ? period : on_start;
        const double seg = std::min(remaining, std::max(edge - pos, 0.0));
        if (seg <= eps) {
            pos = edge >= period - eps ? 0.0 : edge;
            continue;
        }
        const SwitchCommand sw{on && dis, on && !dis, duty.direction};
        auto rhs = [&](const Vec& y, double t) {
            const PlantState st = unpack(y, t);
            const auto pc = ports(st, zeta);
            const auto d = plant::derivatives(params_, st, sw, pc);
            return Vec{d.di_L, d.dv_C1, d.dv_C2, pc.i_V1 / 3600.0, -pc.i_V2 / ultracap_.capacitance};
        };
        const double i_before = r.state.i_L;
        r.state = unpack(rk4(pack(r.state), r.state.t, seg, rhs), r.state.t + seg);
        check_finite(r.state);
        if (!params_.textbook_mode && !on) clamp_reversal(r, i_before, duty.direction, params_.L);
        pos += seg;
        if (pos >= period - eps) pos = 0.0;
        remaining -= seg;
    }
    r.state.t = s.t + dt;
    return r;
}

} // namespace hesm::plant
