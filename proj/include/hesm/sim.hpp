#pragma once

#include "hesm/control.hpp"
#include "hesm/fuzzy.hpp"
#include "hesm/plant.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hesm::sim {

struct LoadPhase {
    double i_high = 0.0; // A drawn during the high segment
    double i_low = 0.0;  // A drawn during the low segment

    bool operator==(const LoadPhase&) const = default;
};

// Pulse train starting in the high segment. Phase B restarts the pattern at
// t_shift so a segment boundary always falls on the shift.
struct LoadProfile {
    double t_high = 5.0;
    double t_low = 1.0;
    LoadPhase phase_a{20.0, 2.0};
    LoadPhase phase_b{30.0, 5.0};
    double t_shift = 30.0;
    double t_end = 60.0;

    double period() const { return t_high + t_low; }
    void validate() const;
    bool operator==(const LoadProfile&) const = default;
};

class QueryError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

class MetricError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Net external current zeta; negative while the load draws.
double load_current(const LoadProfile& p, double t);

enum class ControllerKind { flc, ifthen };
enum class IntegrationMode { switched, averaged };

const char* to_string(ControllerKind k);
const char* to_string(IntegrationMode m);

struct ControllerConfig {
    ControllerKind kind = ControllerKind::flc;
    control::CascadeGains cascade;
    double supervisor_rate_hz = 1000.0;
    fuzzy::FuzzyController flc = fuzzy::default_controller();
    control::IfThenConfig ifthen;
};

struct IntegrationConfig {
    IntegrationMode mode = IntegrationMode::averaged;
    double dt = 50e-6;
    std::optional<double> t_stop; // end the run early; the load profile is unchanged
};

struct SimConfig {
    plant::PlantParams plant;
    plant::BatteryModel battery;
    plant::UltracapModel ultracap;
    ControllerConfig controller;
    LoadProfile load;
    IntegrationConfig integration;
    double decimation_hz = 1000.0;
};

enum TraceFlag : std::uint32_t {
    flag_uncovered_input = 1u, // fuzzy aggregate was empty
    flag_dcm = 2u,             // inductor current clamped at zero
};

// Columnar samples at a fixed decimation of the integration tick.
struct Trace {
    std::vector<double> t;
    std::vector<double> v_bus;
    std::vector<double> i_L;
    std::vector<double> i_batt;
    std::vector<double> i_uc;
    std::vector<double> zeta;
    std::vector<double> soc;
    std::vector<double> v_uc;
    std::vector<double> i_limit;
    std::vector<int> ctrl_state;
    std::vector<std::uint32_t> flags;

    // Not part of the CSV: current reference, HESM current and its parts.
    std::vector<double> i_ref;
    std::vector<double> i_hesm;
    std::vector<double> i_branch;
    std::vector<double> dv_bus_dt;

    std::size_t decimation = 1; // ticks per sample
    double tick = 0.0;          // integration tick, s

    std::size_t size() const { return t.size(); }
};

struct EnergyLedger {
    double source = 0.0; // J from battery chemistry and ultracap storage
    double load = 0.0;   // J delivered to the net load
    double loss = 0.0;   // J dissipated, including diode clamp losses
    double stored_delta = 0.0;
    double gross = 0.0; // integral of |battery power| + |ultracap power|

    double residual() const { return source - load - loss - stored_delta; }
};

struct Fault {
    plant::FaultKind kind;
    double t;
    std::string message;
};

struct RunMeta {
    std::uint64_t steps = 0;
    double wall_seconds = 0.0;
    std::size_t substeps = 1; // integration ticks per configured dt
    std::uint64_t dcm_events = 0;
    std::uint64_t uncovered_events = 0;
    std::uint64_t duty_checks = 0; // shoot-through checks performed
    EnergyLedger energy;
    std::optional<Fault> fault;
};

struct RunResult {
    Trace trace;
    RunMeta meta;

    bool ok() const { return !meta.fault.has_value(); }
};

// Throws plant::SimulationFault(invalid_parameter) for configurations that
// cannot be scheduled on an integer tick grid.
void validate(const SimConfig& cfg);

// Fixed-step loop: zeta -> supervisor -> cascade -> plant -> log. Faults end
// the run early and are reported in meta with the partial trace.
RunResult run(const SimConfig& cfg);

struct Metrics {
    double swing_a = 0.0; // worst cycle of phase A, V
    std::optional<double> swing_b;
    double swing = 0.0; // worst over both phases
    std::optional<double> sag;   // phase B: first 2 s mean minus last 2 s mean
    std::optional<double> sag_a; // same definition within phase A
    std::size_t cycles_a = 0;
    std::size_t cycles_b = 0;
};

Metrics compute_metrics(const Trace& tr, const LoadProfile& p);

struct Improvement {
    std::optional<double> swing_pct;
    std::optional<double> sag_pct;
};

// (baseline - candidate) / baseline * 100; empty when the baseline is zero.
std::optional<double> improvement_pct(double baseline, double candidate);
Improvement compare(const Metrics& baseline, const Metrics& candidate);

struct RunSummary {
    RunMeta meta;
    std::optional<Metrics> metrics;
};

// Independent runs on up to `threads` workers; results keep input order.
std::vector<RunSummary> sweep(const std::vector<SimConfig>& configs, unsigned threads);

} // namespace hesm::sim
