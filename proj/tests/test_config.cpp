#include "hesm/config.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace hesm::config;

namespace {

ErrorKind kind_of(const std::string& text) {
    try {
        parse_text(text);
    } catch (const ConfigError& e) {
        return e.kind();
    }
    FAIL("expected a config error for " << text);
    return ErrorKind::malformed;
}

std::string path_of(const std::string& text) {
    try {
        parse_text(text);
    } catch (const ConfigError& e) {
        return e.path();
    }
    return "<accepted>";
}

void leaves(const json& j, const json::json_pointer& at, std::vector<json::json_pointer>& out) {
    if (j.is_object()) {
        for (auto it = j.begin(); it != j.end(); ++it) leaves(it.value(), at / it.key(), out);
    } else if (j.is_array()) {
        for (std::size_t i = 0; i < j.size(); ++i) leaves(j[i], at / i, out);
    } else {
        out.push_back(at);
    }
}

std::vector<json> mutations(const json& v) {
    if (v.is_boolean()) return {!v.get<bool>()};
    if (v.is_number()) {
        const double x = v.get<double>();
        if (v.is_number_unsigned()) return {v.get<std::uint64_t>() + 1, v.get<std::uint64_t>() * 2};
        return {x * 1.01, x * 0.99, x + 0.5, x - 0.5, x == 0.0 ? 1.0 : -x};
    }
    if (v.is_string()) {
        return {"flc", "ifthen", "averaged", "switched", "trapezoidal", "triangular", "No Flow", "High Recharge",
                "Low Discharge", "other.csv"};
    }
    return {};
}

} // namespace

TEST_CASE("an empty object yields the defaults") {
    const auto c = parse_text("{}");
    const auto& s = c.sim;
    CHECK(s.plant.L == 3.4e-3);
    CHECK(s.plant.r_on == 0.1);
    CHECK(s.plant.f_sw == 40e3);
    CHECK(s.ultracap.capacitance == 29.0);
    CHECK(s.ultracap.esr == 0.044);
    CHECK(s.ultracap.v0 == 24.0);
    CHECK(s.battery.v_nom == 36.0);
    CHECK(s.battery.capacity_Ah == 15.0);
    CHECK(s.battery.soc0 == 0.5);
    const auto& g = s.controller.cascade;
    CHECK(g.discharge_voltage.kp == 0.2);
    CHECK(g.discharge_voltage.ki == 10.0);
    CHECK(g.discharge_current.kp == 1.0);
    CHECK(g.discharge_current.ki == 200.0);
    CHECK(g.recharge_voltage.kp == 0.028);
    CHECK(g.recharge_voltage.ki == 1.5);
    CHECK(g.recharge_current.kp == 5.0);
    CHECK(g.recharge_current.ki == 1.0);
    CHECK(s.load.t_shift == 30.0);
    CHECK(s.load.t_end == 60.0);
    CHECK(s.controller.kind == hesm::sim::ControllerKind::flc);
    CHECK(s.integration.mode == hesm::sim::IntegrationMode::averaged);
    CHECK(s.integration.dt == 50e-6);
    CHECK(s.decimation_hz == 1000.0);
    CHECK(canonical_text(c) == canonical_text(Config{}));
}

TEST_CASE("the shipped defaults file matches the built-in defaults") {
    const auto c = parse_file(std::string(HESM_SOURCE_DIR) + "/configs/defaults.json");
    CHECK(canonical_text(c) == canonical_text(Config{}));
}

TEST_CASE("negative switching frequency names its key") {
    CHECK(kind_of(R"({"plant": {"f_sw": -1}})") == ErrorKind::schema);
    CHECK(path_of(R"({"plant": {"f_sw": -1}})") == "plant.f_sw");
    try {
        parse_text(R"({"plant": {"f_sw": -1}})");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("plant.f_sw") != std::string::npos);
    }
}

TEST_CASE("error classes") {
    CHECK(kind_of("{\"plant\": ") == ErrorKind::malformed);
    CHECK(kind_of(R"({"plant": {"Lx": 1}})") == ErrorKind::schema);
    CHECK(path_of(R"({"plant": {"Lx": 1}})") == "plant.Lx");
    CHECK(kind_of(R"({"extra": 1})") == ErrorKind::schema);
    CHECK(kind_of(R"({"plant": {"L": "big"}})") == ErrorKind::schema);
    CHECK(kind_of(R"({"plant": 3})") == ErrorKind::schema);
    CHECK(kind_of(R"({"controller": {"type": "pid"}})") == ErrorKind::schema);
    CHECK(kind_of(R"({"battery": {"soc0": 1.5}})") == ErrorKind::schema);
    CHECK(kind_of(R"({"load": {"t_shift": 70}})") == ErrorKind::invariant);
    CHECK(path_of(R"({"load": {"t_shift": 70}})") == "load.t_shift");
    CHECK(kind_of(R"({"integration": {"dt": 3.3e-5}})") == ErrorKind::invariant);
    CHECK(kind_of(R"({"flc": {"defuzz_resolution": 50}})") != ErrorKind::malformed);
    CHECK_THROWS_AS(parse_file("/nonexistent/dir/config.json"), ConfigError);
    try {
        parse_file("/nonexistent/dir/config.json");
    } catch (const ConfigError& e) {
        CHECK(e.kind() == ErrorKind::missing_file);
    }
}

TEST_CASE("custom rule tables must fill every cell") {
    auto j = to_json(Config{});
    j["flc"]["rules"]["No Flow"].erase("Good");
    CHECK_THROWS_AS(from_json(j), ConfigError);
    j = to_json(Config{});
    j["flc"]["rules"]["No Flow"]["Good"] = "Maybe";
    CHECK_THROWS_AS(from_json(j), ConfigError);
    j = to_json(Config{});
    j["flc"]["rules"]["No Flow"]["Good"] = "Low Discharge";
    const auto c = from_json(j);
    const auto& fc = c.sim.controller.flc;
    CHECK(fc.rules().at(fc.hesm_current().index_of("No Flow"), fc.bus_voltage().index_of("Good")) ==
          fc.battery_limit().index_of("Low Discharge"));
}

TEST_CASE("property: serialization is idempotent after one pass") {
    testing::Gen g(51);
    const auto base = to_json(Config{});
    std::vector<json::json_pointer> ptrs;
    leaves(base, json::json_pointer(), ptrs);
    int checked = 0;
    for (int n = 0; n < 400; ++n) {
        json j = base;
        const int edits = g.integer(1, 3);
        for (int k = 0; k < edits; ++k) {
            const auto& p = ptrs[std::size_t(g.integer(0, int(ptrs.size()) - 1))];
            const auto opts = mutations(j[p]);
            if (!opts.empty()) j[p] = opts[std::size_t(g.integer(0, int(opts.size()) - 1))];
        }
        try {
            const auto once = canonical_text(from_json(j));
            const auto twice = canonical_text(parse_text(once));
            CHECK(once == twice);
            ++checked;
        } catch (const ConfigError&) {
        }
    }
    CHECK(checked >= 100);
}

TEST_CASE("property: every field feeds the digest") {
    const Config base;
    const auto d0 = digest(base);
    CHECK(digest_hex(base).size() == 16);
    const auto j0 = to_json(base);
    std::vector<json::json_pointer> ptrs;
    leaves(j0, json::json_pointer(), ptrs);
    std::size_t exercised = 0;
    for (const auto& p : ptrs) {
        bool any = false;
        for (const auto& m : mutations(j0[p])) {
            if (m == j0[p]) continue;
            json j = j0;
            j[p] = m;
            try {
                const auto c = from_json(j);
                if (to_json(c)[p] == j0[p]) continue;
                CHECK_MESSAGE(digest(c) != d0, p.to_string());
                any = true;
            } catch (const ConfigError&) {
            }
        }
        if (any) ++exercised;
    }
    CHECK(exercised >= 100);

    // fields that only accept coupled edits
    auto j = j0;
    j["flc"]["defuzz_resolution"] = j0["flc"]["defuzz_resolution"].get<int>() + 1;
    CHECK(digest(from_json(j)) != d0);
    j = j0;
    j["controller"]["supervisor_rate_hz"] = j0["controller"]["supervisor_rate_hz"].get<double>() * 2;
    CHECK(digest(from_json(j)) != d0);
    j = j0;
    j["controller"]["type"] = "ifthen";
    CHECK(digest(from_json(j)) != d0);
}

TEST_CASE("with_value edits one dotted key") {
    const Config base;
    const auto c = with_value(base, "plant.C2", 0.2);
    CHECK(c.sim.plant.C2 == 0.2);
    CHECK(digest(c) != digest(base));
    CHECK(with_value(base, "integration.t_stop", 6.0).sim.integration.t_stop == 6.0);
    CHECK_THROWS_AS(with_value(base, "plant.C3", 1.0), ConfigError);
    CHECK_THROWS_AS(with_value(base, "nothing.here", 1.0), ConfigError);
    CHECK_THROWS_AS(with_value(base, "plant.C2", -1.0), ConfigError);
}
