#include "hesm/plant.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace hesm::plant;

namespace {

PlantParams textbook() {
    PlantParams p;
    p.textbook_mode = true;
    return p;
}

SwitchCommand command_for(int state) {
    switch (state) {
    case 1: return {true, false, Direction::discharge};
    case 2: return {false, false, Direction::discharge};
    case 3: return {false, true, Direction::recharge};
    default: return {false, false, Direction::recharge};
    }
}

} // namespace

TEST_CASE("State 1 and State 2 inductor slopes") {
    const auto p = textbook();
    PlantState s;
    s.v_C1 = 36;
    s.v_C2 = 24;
    auto d = derivatives(p, s, command_for(1), {});
    CHECK(d.di_L == doctest::Approx(3529.41).epsilon(1e-6));
    CHECK(d.di_L == doctest::Approx(12 / 3.4e-3).epsilon(1e-15));
    d = derivatives(p, s, command_for(2), {});
    CHECK(d.di_L == doctest::Approx(-7058.82).epsilon(1e-6));
    CHECK(d.dv_C2 == 0.0);
}

TEST_CASE("textbook derivatives transcribe every switching state") {
    testing::Gen g(31);
    for (int n = 0; n < 4000; ++n) {
        PlantParams p = textbook();
        p.L = g.uniform(1e-4, 1e-2);
        p.C1 = g.uniform(1e-4, 1);
        p.C2 = g.uniform(1e-4, 1);
        PlantState s;
        s.i_L = g.uniform(-50, 50);
        s.v_C1 = g.uniform(0, 60);
        s.v_C2 = g.uniform(0, 60);
        const PortCurrents q{g.uniform(-40, 40), g.uniform(-40, 40), g.uniform(-40, 40)};
        const int state = g.integer(1, 4);
        const auto d = derivatives(p, s, command_for(state), q);
        const auto want = testing::textbook_equations(state, p.L, p.C1, p.C2, s.i_L, s.v_C1, s.v_C2, q.i_V1, q.i_V2, q.zeta);
        CHECK(testing::rel_err(d.di_L, want[0]) <= 1e-12);
        CHECK(testing::rel_err(d.dv_C1, want[1]) <= 1e-12);
        CHECK(testing::rel_err(d.dv_C2, want[2]) <= 1e-12);
    }
}

TEST_CASE("switch states map onto the four converter states") {
    CHECK(converter_state(command_for(1)) == ConverterState::discharge_on);
    CHECK(converter_state(command_for(2)) == ConverterState::discharge_off);
    CHECK(converter_state(command_for(3)) == ConverterState::recharge_on);
    CHECK(converter_state(command_for(4)) == ConverterState::recharge_off);
}

TEST_CASE("shoot-through is rejected") {
    try {
        converter_state({true, true, Direction::discharge});
        FAIL("expected shoot-through");
    } catch (const SimulationFault& e) {
        CHECK(e.kind() == FaultKind::shoot_through);
    }
    CHECK_THROWS_AS(check_duty({Direction::discharge, 0.3, 0.2}), SimulationFault);
    CHECK_THROWS_AS(check_duty({Direction::discharge, 1.2, 0.0}), SimulationFault);
    CHECK_THROWS_AS(check_duty({Direction::recharge, 0.4, 0.0}), SimulationFault);
    CHECK_NOTHROW(check_duty({Direction::recharge, 0.0, 0.4}));
}

TEST_CASE("averaged derivatives are the duty-weighted state pair") {
    testing::Gen g(32);
    for (const bool tb : {true, false}) {
        PlantParams p;
        p.textbook_mode = tb;
        for (int n = 0; n < 500; ++n) {
            PlantState s;
            s.i_L = g.uniform(0.1, 30);
            s.v_C1 = g.uniform(30, 40);
            s.v_C2 = g.uniform(20, 28);
            const PortCurrents q{g.uniform(-5, 5), g.uniform(-5, 5), g.uniform(-30, 0)};
            const auto on = derivatives(p, s, command_for(1), q);
            const auto off = derivatives(p, s, command_for(2), q);
            auto at = [&](double d) { return averaged_derivatives(p, s, {Direction::discharge, d, 0.0}, q); };
            CHECK(at(1.0).di_L == on.di_L);
            CHECK(at(1.0).dv_C2 == on.dv_C2);
            CHECK(at(0.0).di_L == off.di_L);
            CHECK(at(0.0).dv_C1 == off.dv_C1);
            CHECK(at(0.5).di_L == doctest::Approx(0.5 * (on.di_L + off.di_L)).epsilon(1e-14));
            CHECK(at(0.5).dv_C1 == doctest::Approx(0.5 * (on.dv_C1 + off.dv_C1)).epsilon(1e-14));
        }
    }
}

TEST_CASE("battery open circuit at the initial charge is pinned") {
    const BatteryModel m;
    // 37.5 - 0.05*15/7.5*7.5 + 4*exp(-22.5)
    CHECK(battery_terminal(m, m.q0(), 0.0) == doctest::Approx(36.7500000006767592).epsilon(1e-15));
    CHECK(battery_terminal(m, m.q0(), 0.0) - battery_terminal(m, m.q0(), 15.0) ==
          doctest::Approx(m.r_int * 15.0).epsilon(1e-12));
    CHECK_THROWS_AS(battery_terminal(m, m.capacity_Ah, 0.0), SimulationFault);
    CHECK_THROWS_AS(battery_terminal(m, -1e-9, 0.0), SimulationFault);
}

TEST_CASE("open circuit voltage falls as charge is extracted") {
    const BatteryModel m;
    double prev = m.open_circuit(0.0);
    for (int k = 1; k < 140; ++k) {
        const double v = m.open_circuit(0.1 * k);
        CHECK(v < prev);
        prev = v;
    }
    CHECK(m.open_circuit(0.0) > 40.0);
    CHECK(m.open_circuit(13.5) > 30.0);
}

TEST_CASE("ultracap terminal voltage") {
    const UltracapModel m;
    CHECK(ultracap_terminal(m, 24, 0) == 24);
    CHECK(ultracap_terminal(m, 24, 10) == doctest::Approx(23.56).epsilon(1e-14));
}

TEST_CASE("29 A drawn from the ultracap for one second drops it by 1 V") {
    PlantParams p;
    const Plant plant(p, BatteryModel{}, UltracapModel{});
    PlantState s = plant.initial_state();
    // hold the ESR drop constant: the bus falls with the ultracap at 1 V/s
    s.v_C2 = s.v_uc - 29.0 * plant.ultracap().esr;
    const double zeta = -29.0 - p.C2 * 1.0;
    const double v0 = s.v_uc;
    const double dt = 25e-6;
    double worst = 0.0;
    for (int k = 0; k < 40000; ++k) {
        worst = std::max(worst, std::abs(plant.ports(s, zeta).i_V2 - 29.0));
        s = plant.step_averaged(s, {}, zeta, dt).state;
    }
    CHECK(worst < 1e-8);
    CHECK(v0 - s.v_uc == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("state of charge falls under sustained discharge") {
    const Plant plant(PlantParams{}, BatteryModel{}, UltracapModel{});
    PlantState s = plant.initial_state();
    double soc = plant.battery().soc(s.q_extracted);
    for (int k = 0; k < 2000; ++k) {
        s = plant.step_averaged(s, {Direction::discharge, 0.7, 0.0}, -10.0, 50e-6).state;
        const double now = plant.battery().soc(s.q_extracted);
        if (k > 10) CHECK(now < soc);
        soc = now;
    }
}

TEST_CASE("switched step holds the zero-duty equilibrium") {
    const Plant plant(PlantParams{}, BatteryModel{}, UltracapModel{});
    PlantState s = plant.initial_state();
    const double dt = 1e-6;
    for (int k = 0; k < 2000; ++k) {
        const auto r = plant.step_switched(s, {}, 0.0, dt, std::fmod(k * dt, 25e-6));
        CHECK(std::abs(r.state.v_C2 - s.v_C2) <= 1e-9);
        CHECK(std::abs(r.state.v_C1 - s.v_C1) <= 1e-9);
        CHECK(std::abs(r.state.i_L - s.i_L) <= 1e-9);
        s = r.state;
    }
}

TEST_CASE("one PWM period at half duty gives the piecewise-linear ripple") {
    PlantParams p = textbook();
    p.C1 = 1e9;
    p.C2 = 1e9;
    BatteryModel bm;
    const Plant plant(p, bm, UltracapModel{});
    PlantState s = plant.initial_state();
    s.i_L = 10.0;
    const double T = 1.0 / p.f_sw, dt = T / 100, L = p.L;
    const double v1 = s.v_C1, v2 = s.v_C2;
    double pos = 0.0;
    for (int k = 0; k < 50; ++k, pos += dt) s = plant.step_switched(s, {Direction::discharge, 0.5, 0.0}, 0.0, dt, pos).state;
    // leading-edge PWM: freewheel (State 2) first, then State 1
    const double valley = 10.0 - v2 / L * (T / 2);
    CHECK(s.i_L == doctest::Approx(valley).epsilon(1e-9));
    for (int k = 50; k < 100; ++k, pos += dt) s = plant.step_switched(s, {Direction::discharge, 0.5, 0.0}, 0.0, dt, pos).state;
    CHECK(s.i_L == doctest::Approx(valley + (v1 - v2) / L * (T / 2)).epsilon(1e-9));
}

TEST_CASE("switched step must resolve the PWM period") {
    const Plant plant(PlantParams{}, BatteryModel{}, UltracapModel{});
    CHECK_THROWS_AS(plant.step_switched(plant.initial_state(), {}, 0.0, 5e-6, 0.0), SimulationFault);
}

TEST_CASE("switched and averaged agree on mean bus voltage over 1 s of constant duty") {
    const Plant plant(PlantParams{}, BatteryModel{}, UltracapModel{});
    const DutyCommand duty{Direction::discharge, 0.66, 0.0};
    const double zeta = -10.0;

    PlantState a = plant.initial_state();
    double mean_a = 0;
    const int na = 20000;
    for (int k = 0; k < na; ++k) {
        a = plant.step_averaged(a, duty, zeta, 50e-6).state;
        mean_a += a.v_C2 / na;
    }
    PlantState s = plant.initial_state();
    double mean_s = 0;
    const int ns = 1000000;
    const double dt = 1e-6;
    for (int k = 0; k < ns; ++k) {
        s = plant.step_switched(s, duty, zeta, dt, std::fmod(k * dt, 25e-6)).state;
        mean_s += s.v_C2 / ns;
    }
    CHECK(std::abs(mean_s - mean_a) / mean_a < 0.02);
    CHECK(std::abs(s.v_uc - a.v_uc) / a.v_uc < 0.02);
}

TEST_CASE("ultracap charge balances the integrated branch current over 60 s") {
    const Plant plant(PlantParams{}, BatteryModel{}, UltracapModel{});
    PlantState s = plant.initial_state();
    const double dt = 50e-6;
    const double q0 = plant.ultracap().capacitance * s.v_uc;
    double integral = 0.0, prev = plant.ports(s, 0.0).i_V2;
    const int steps = 1200000;
    for (int k = 0; k < steps; ++k) {
        // pulsed load with the converter parked at a fixed duty
        const double t = k * dt;
        const double zeta = std::fmod(t, 6.0) < 5.0 ? -20.0 : -2.0;
        s = plant.step_averaged(s, {Direction::discharge, 0.655, 0.0}, zeta, dt).state;
        const double now = plant.ports(s, zeta).i_V2;
        integral += 0.5 * dt * (prev + now);
        prev = now;
    }
    const double dq = plant.ultracap().capacitance * s.v_uc - q0;
    CHECK(std::abs(dq + integral) <= 1e-4 * std::max(std::abs(integral), 1.0));
}

TEST_CASE("reverse inductor current is clamped and flagged") {
    const Plant plant(PlantParams{}, BatteryModel{}, UltracapModel{});
    PlantState s = plant.initial_state();
    s.i_L = 0.01;
    const auto r = plant.step_averaged(s, {Direction::discharge, 0.0, 0.0}, 0.0, 50e-6);
    CHECK(r.dcm);
    CHECK(r.state.i_L == 0.0);
    CHECK(r.clamp_energy >= 0.0);
}

TEST_CASE("non-finite state is reported as divergence") {
    const Plant plant(PlantParams{}, BatteryModel{}, UltracapModel{});
    PlantState s = plant.initial_state();
    s.v_C2 = std::numeric_limits<double>::infinity();
    try {
        plant.step_averaged(s, {}, 0.0, 50e-6);
        FAIL("expected divergence");
    } catch (const SimulationFault& e) {
        CHECK(e.kind() == FaultKind::divergence);
    }
}

TEST_CASE("HESM current is capacitor current plus branch current") {
    CHECK(hesm_current(2.0, 3.0) == 5.0);
    const Plant plant(PlantParams{}, BatteryModel{}, UltracapModel{});
    const auto s = plant.initial_state();
    const auto q = plant.ports(s, -5.0);
    CHECK(plant.hesm_current(s, q, 0.0) == plant.branch_current(s, q));
}

TEST_CASE("invalid parameters are rejected") {
    PlantParams p;
    p.L = -1;
    CHECK_THROWS_AS(Plant(p, BatteryModel{}, UltracapModel{}), SimulationFault);
    p = PlantParams{};
    p.f_sw = 500;
    CHECK_THROWS_AS(Plant(p, BatteryModel{}, UltracapModel{}), SimulationFault);
    BatteryModel b;
    b.soc0 = 0;
    CHECK_THROWS_AS(Plant(PlantParams{}, b, UltracapModel{}), SimulationFault);
    UltracapModel u;
    u.esr = 0;
    CHECK_THROWS_AS(Plant(PlantParams{}, BatteryModel{}, u), SimulationFault);
}
