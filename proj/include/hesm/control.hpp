#pragma once

#include "hesm/fuzzy.hpp"
#include "hesm/plant.hpp"

#include <variant>

namespace hesm::control {

struct PIGains {
    double kp = 0.0;
    double ki = 0.0;
    double out_lo = 0.0;
    double out_hi = 1.0;
};

struct PIState {
    double integral = 0.0;
    double last_output = 0.0;
};

struct PIResult {
    double output;
    PIState state;
};

// Forward-Euler integral with conditional anti-windup: the integral holds
// when the output is saturated and the error pushes further into saturation.
PIResult pi_update(const PIGains& g, const PIState& st, double error, double dt);

// Signed battery current limit: positive permits discharge up to the value,
// negative commands recharge.
struct SupervisorOutput {
    double i_batt_limit = 0.0;
    bool uncovered_input_flag = false;
};

enum class SupervisorMode { idle = 0, discharging = 1, recharging = 2 };

const char* to_string(SupervisorMode m);

struct IfThenConfig {
    double v_low = 23.5;
    double v_high = 24.5;
    double i_discharge = 16.0;
    double i_recharge = -5.0;
};

struct IfThenStep {
    SupervisorOutput output;
    SupervisorMode mode;
};

// Hysteretic three-state machine. Leaves discharging/recharging once the bus
// crosses the band midpoint.
IfThenStep if_then_supervise(const IfThenConfig& c, SupervisorMode mode, double v_bus);

SupervisorOutput flc_supervise(const fuzzy::FuzzyController& fc, double v_bus, double i_hesm);

class FlcSupervisor {
public:
    explicit FlcSupervisor(fuzzy::FuzzyController fc) : fc_(std::move(fc)) {}
    SupervisorOutput update(double v_bus, double i_hesm);
    SupervisorMode mode() const { return mode_; }
    const fuzzy::FuzzyController& controller() const { return fc_; }

private:
    fuzzy::FuzzyController fc_;
    SupervisorMode mode_ = SupervisorMode::idle;
};

class IfThenSupervisor {
public:
    explicit IfThenSupervisor(IfThenConfig cfg) : cfg_(cfg) {}
    SupervisorOutput update(double v_bus, double i_hesm);
    SupervisorMode mode() const { return mode_; }

private:
    IfThenConfig cfg_;
    SupervisorMode mode_ = SupervisorMode::idle;
};

// Either supervisor behind one call surface; the run loop never branches on
// which one it holds.
class Supervisor {
public:
    Supervisor(FlcSupervisor s) : impl_(std::move(s)) {}
    Supervisor(IfThenSupervisor s) : impl_(std::move(s)) {}

    SupervisorOutput update(double v_bus, double i_hesm);
    SupervisorMode mode() const;

private:
    std::variant<FlcSupervisor, IfThenSupervisor> impl_;
};

struct CascadeGains {
    PIGains discharge_voltage{0.2, 10.0, 0.0, 40.0};
    PIGains discharge_current{1.0, 200.0, 0.0, 1.0};
    PIGains recharge_voltage{0.028, 1.5, 0.0, 40.0};
    PIGains recharge_current{5.0, 1.0, 0.0, 1.0};
    double v_ref = 24.0;
    double dead_band = 0.5;
};

struct CascadeState {
    PIState discharge_voltage;
    PIState discharge_current;
    PIState recharge_voltage;
    PIState recharge_current;
    plant::Direction direction = plant::Direction::discharge;
    double i_ref = 0.0; // signed battery current reference after the limit clamp
};

struct Measurements {
    double v_bus = 0.0;
    double i_L = 0.0;
    double i_batt = 0.0; // battery terminal current, positive discharging
};

// Outer voltage loop of the direction the limit allows, clamp of its current
// reference by the limit, then the inner battery-current loop for the active
// direction. A direction change needs the reference to leave the dead band.
plant::DutyCommand cascade_update(const CascadeGains& g, CascadeState& st, const Measurements& m,
                                  const SupervisorOutput& limit, double dt);

} // namespace hesm::control
