#pragma once

#include <stdexcept>
#include <string>

// Bidirectional half-bridge converter between a battery (C1 side) and the DC
// bus (C2 side), an ultracapacitor branch on the bus and an external net
// current zeta (generation minus load) injected into the bus.
//
// Sign conventions outside textbook mode:
//   i_L  > 0  inductor current flowing from the battery side to the bus
//   i_V1 > 0  battery sourcing into the C1 node
//   i_V2 > 0  ultracapacitor sourcing into the bus node
//   zeta > 0  generation exceeds load
// Textbook mode evaluates the four switching-state equations exactly as
// printed, including their mixed conventions, and has no resistive terms.
namespace hesm::plant {

enum class FaultKind { divergence, battery_depleted, battery_overcharged, shoot_through, invalid_parameter };

class SimulationFault : public std::runtime_error {
public:
    SimulationFault(FaultKind kind, double t, const std::string& what)
        : std::runtime_error(what), kind_(kind), t_(t) {}
    FaultKind kind() const { return kind_; }
    double time() const { return t_; }

private:
    FaultKind kind_;
    double t_;
};

const char* to_string(FaultKind kind);

struct PlantParams {
    double L = 3.4e-3;     // H
    double esr_L = 1.5e-3; // ohm
    double C1 = 5e-3;      // F, battery-side filter
    double C2 = 0.1;       // F, bus bulk capacitance
    double r_on = 0.1;     // ohm
    double f_sw = 40e3;    // Hz
    bool textbook_mode = false;

    // Throws SimulationFault(invalid_parameter) on a non-positive value or f_sw < 1 kHz.
    void validate() const;
    double series_resistance() const { return textbook_mode ? 0.0 : esr_L + r_on; }
};

// Shepherd open-circuit voltage with coulomb counting:
//   E(q) = E0 - K * Q / (Q - q) * q + A * exp(-B * q)
// with q the extracted charge in Ah and Q the rated capacity.
struct BatteryModel {
    double v_nom = 36.0;
    double capacity_Ah = 15.0;
    double soc0 = 0.5;
    double r_int = 0.05;
    double E0 = 37.5;
    double K = 0.05;
    double A = 4.0;
    double B = 3.0;

    void validate() const;
    double open_circuit(double q_extracted) const;
    double q0() const { return (1.0 - soc0) * capacity_Ah; }
    double soc(double q_extracted) const { return 1.0 - q_extracted / capacity_Ah; }
};

struct UltracapModel {
    double capacitance = 29.0; // F
    double esr = 0.044;        // ohm
    double v0 = 24.0;          // V

    void validate() const;
};

struct PlantState {
    double i_L = 0.0;
    double v_C1 = 0.0;
    double v_C2 = 0.0;
    double q_extracted = 0.0; // Ah
    double v_uc = 0.0;
    double t = 0.0;
};

enum class Direction { discharge, recharge };

// The four switching states: S1 on / freewheel while discharging toward the
// bus, S2 on / freewheel while recharging the battery.
enum class ConverterState { discharge_on = 1, discharge_off = 2, recharge_on = 3, recharge_off = 4 };

struct SwitchCommand {
    bool s1 = false;
    bool s2 = false;
    Direction direction = Direction::discharge;
};

struct DutyCommand {
    Direction direction = Direction::discharge;
    double d1 = 0.0;
    double d2 = 0.0;

    double active() const { return direction == Direction::discharge ? d1 : d2; }
};

struct PortCurrents {
    double i_V1 = 0.0;
    double i_V2 = 0.0;
    double zeta = 0.0;
};

struct ConverterDerivative {
    double di_L = 0.0;
    double dv_C1 = 0.0;
    double dv_C2 = 0.0;
};

// Throws SimulationFault(shoot_through) when both switches are commanded.
ConverterState converter_state(const SwitchCommand& sw);
void check_duty(const DutyCommand& duty);

// Converter network only; port currents are given.
ConverterDerivative derivatives(const PlantParams& p, const PlantState& s, const SwitchCommand& sw,
                                const PortCurrents& ports);

// Duty-weighted combination of the on/off pair for the active direction.
ConverterDerivative averaged_derivatives(const PlantParams& p, const PlantState& s, const DutyCommand& duty,
                                         const PortCurrents& ports);

// Terminal voltage for current i (i > 0 discharging). Throws when q is
// outside [0, capacity).
double battery_terminal(const BatteryModel& m, double q_extracted, double i);

// v_uc - esr * i with i > 0 sourcing.
double ultracap_terminal(const UltracapModel& m, double v_uc, double i);

// HESM current as the sum of the bus capacitor current and the branch current.
double hesm_current(double i_c2, double i_branch);

struct StepResult {
    PlantState state;
    bool dcm = false;          // i_L was clamped at zero
    double clamp_energy = 0.0; // J removed by the clamp
};

struct PowerFlows {
    double source = 0.0; // W released by battery chemistry and ultracap storage
    double load = 0.0;   // W delivered to the external net load
    double loss = 0.0;   // W dissipated
};

class Plant {
public:
    Plant(PlantParams params, BatteryModel battery, UltracapModel ultracap);

    const PlantParams& params() const { return params_; }
    const BatteryModel& battery() const { return battery_; }
    const UltracapModel& ultracap() const { return ultracap_; }

    // Steady start: bus at the ultracap voltage, battery node at open circuit.
    PlantState initial_state() const;

    PortCurrents ports(const PlantState& s, double zeta) const;

    // HESM current measured into the HESM from the bus: the filter capacitor
    // current plus the current drawn by the converter and ultracap branch.
    double hesm_current(const PlantState& s, const PortCurrents& ports, double dv_c2_dt) const;
    double branch_current(const PlantState& s, const PortCurrents& ports) const;

    ConverterDerivative derivatives(const PlantState& s, const DutyCommand& duty, double zeta) const;

    PowerFlows powers(const PlantState& s, double zeta) const;
    double stored_energy(const PlantState& s) const;

    // One RK4 step of the duty-averaged model.
    StepResult step_averaged(const PlantState& s, const DutyCommand& duty, double zeta, double dt) const;

    // One step resolving the switch pattern: leading-edge PWM, the switch
    // conducts during the last d*T of each period. period_offset is the time
    // since the current PWM period began. Requires dt <= T / 20.
    StepResult step_switched(const PlantState& s, const DutyCommand& duty, double zeta, double dt,
                             double period_offset) const;

private:
    PlantParams params_;
    BatteryModel battery_;
    UltracapModel ultracap_;
};

} // namespace hesm::plant
