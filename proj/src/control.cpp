#include "hesm/control.hpp"

#include <algorithm>
#include <cmath>

namespace hesm::control {

PIResult pi_update(const PIGains& g, const PIState& st, double error, double dt) {
    PIState next = st;
    next.integral = st.integral + error * dt;
    const double raw = g.kp * error + g.ki * next.integral;
    // conditional integration: stop at the value that just reaches the limit
    if (g.ki > 0.0 && raw > g.out_hi && error > 0.0)
        next.integral = std::clamp((g.out_hi - g.kp * error) / g.ki, st.integral, next.integral);
    else if (g.ki > 0.0 && raw < g.out_lo && error < 0.0)
        next.integral = std::clamp((g.out_lo - g.kp * error) / g.ki, next.integral, st.integral);
    if (g.ki > 0.0) next.integral = std::clamp(next.integral, g.out_lo / g.ki, g.out_hi / g.ki);
    const double out = std::clamp(g.kp * error + g.ki * next.integral, g.out_lo, g.out_hi);
    next.last_output = out;
    return {out, next};
}

const char* to_string(SupervisorMode m) {
    switch (m) {
    case SupervisorMode::idle: return "idle";
    case SupervisorMode::discharging: return "discharging";
    case SupervisorMode::recharging: return "recharging";
    }
    return "unknown";
}

IfThenStep if_then_supervise(const IfThenConfig& c, SupervisorMode mode, double v_bus) {
    const double mid = 0.5 * (c.v_low + c.v_high);
    switch (mode) {
    case SupervisorMode::idle:
        if (v_bus < c.v_low) mode = SupervisorMode::discharging;
        else if (v_bus > c.v_high) mode = SupervisorMode::recharging;
        break;
    case SupervisorMode::discharging:
        if (v_bus > c.v_high) mode = SupervisorMode::recharging;
        else if (v_bus >= mid) mode = SupervisorMode::idle;
        break;
    case SupervisorMode::recharging:
        if (v_bus < c.v_low) mode = SupervisorMode::discharging;
        else if (v_bus <= mid) mode = SupervisorMode::idle;
        break;
    }
    double limit = 0.0;
    if (mode == SupervisorMode::discharging) limit = c.i_discharge;
    if (mode == SupervisorMode::recharging) limit = c.i_recharge;
    return {{limit, false}, mode};
}

SupervisorOutput flc_supervise(const fuzzy::FuzzyController& fc, double v_bus, double i_hesm) {
    const auto r = fuzzy::infer(fc, v_bus, i_hesm);
    return {r.value, r.uncovered};
}

SupervisorOutput FlcSupervisor::update(double v_bus, double i_hesm) {
    const auto out = flc_supervise(fc_, v_bus, i_hesm);
    // Reported mode only; 0.5 A keeps near-zero limits reading as idle.
    if (out.i_batt_limit > 0.5) mode_ = SupervisorMode::discharging;
    else if (out.i_batt_limit < -0.5) mode_ = SupervisorMode::recharging;
    else mode_ = SupervisorMode::idle;
    return out;
}

SupervisorOutput IfThenSupervisor::update(double v_bus, double /*i_hesm*/) {
    const auto step = if_then_supervise(cfg_, mode_, v_bus);
    mode_ = step.mode;
    return step.output;
}

SupervisorOutput Supervisor::update(double v_bus, double i_hesm) {
    return std::visit([&](auto& s) { return s.update(v_bus, i_hesm); }, impl_);
}

SupervisorMode Supervisor::mode() const {
    return std::visit([](const auto& s) { return s.mode(); }, impl_);
}

plant::DutyCommand cascade_update(const CascadeGains& g, CascadeState& st, const Measurements& m,
                                  const SupervisorOutput& limit, double dt) {
    using plant::Direction;
    const double lim = limit.i_batt_limit;

    double ref = 0.0;
    if (lim >= 0.0) {
        const auto r = pi_update(g.discharge_voltage, st.discharge_voltage, g.v_ref - m.v_bus, dt);
        st.discharge_voltage = r.state;
        ref = std::clamp(r.output, 0.0, lim);
    } else {
        const auto r = pi_update(g.recharge_voltage, st.recharge_voltage, m.v_bus - g.v_ref, dt);
        st.recharge_voltage = r.state;
        ref = -std::clamp(r.output, 0.0, -lim);
    }
    st.i_ref = ref;

    const Direction before = st.direction;
    if (ref > g.dead_band) st.direction = Direction::discharge;
    else if (ref < -g.dead_band) st.direction = Direction::recharge;
    if (st.direction != before) {
        st.discharge_current = {};
        st.recharge_current = {};
    }

    plant::DutyCommand duty;
    duty.direction = st.direction;
    if (ref == 0.0) {
        st.discharge_current = {};
        st.recharge_current = {};
        return duty;
    }
    if (st.direction == Direction::discharge) {
        const auto r = pi_update(g.discharge_current, st.discharge_current, ref - m.i_batt, dt);
        st.discharge_current = r.state;
        duty.d1 = r.output;
    } else {
        const auto r = pi_update(g.recharge_current, st.recharge_current, m.i_batt - ref, dt);
        st.recharge_current = r.state;
        duty.d2 = r.output;
    }
    return duty;
}

} // namespace hesm::control
