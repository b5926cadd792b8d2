#include "hesm/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <utility>

namespace hesm::config {

const char* to_string(ErrorKind k) {
    switch (k) {
    case ErrorKind::missing_file: return "missing file";
    case ErrorKind::malformed: return "malformed config";
    case ErrorKind::schema: return "schema violation";
    case ErrorKind::invariant: return "invariant violation";
    }
    return "config error";
}

ConfigError::ConfigError(ErrorKind kind, std::string path, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + (path.empty() ? "" : " at " + path) + ": " + what),
      kind_(kind), path_(std::move(path)) {}

namespace {

enum class Range { finite, positive, non_negative, unit };

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

[[noreturn]] void schema(const std::string& path, const std::string& what) {
    throw ConfigError(ErrorKind::schema, path, what);
}

// One JSON object being read. Keys that are never asked for count as unknown.
class Section {
public:
    Section(const json* j, std::string path) : j_(j), path_(std::move(path)) {
        if (j_ && !j_->is_object()) schema(path_, "expected an object");
    }

    const std::string& path() const { return path_; }

    const json* get(const std::string& key) {
        known_.insert(key);
        if (!j_) return nullptr;
        auto it = j_->find(key);
        return it == j_->end() ? nullptr : &*it;
    }

    double number(const std::string& key, double def, Range r = Range::finite) {
        const json* v = get(key);
        if (!v) return def;
        const std::string p = join(path_, key);
        if (!v->is_number()) schema(p, "expected a number");
        const double x = v->get<double>();
        if (!std::isfinite(x)) schema(p, "must be finite");
        switch (r) {
        case Range::finite: break;
        case Range::positive:
            if (!(x > 0.0)) schema(p, "must be positive, got " + v->dump());
            break;
        case Range::non_negative:
            if (!(x >= 0.0)) schema(p, "must be non-negative, got " + v->dump());
            break;
        case Range::unit:
            if (!(x > 0.0 && x <= 1.0)) schema(p, "must lie in (0, 1], got " + v->dump());
            break;
        }
        return x;
    }

    std::optional<double> optional_number(const std::string& key, Range r) {
        const json* v = get(key);
        if (!v || v->is_null()) return std::nullopt;
        return number(key, 0.0, r);
    }

    bool boolean(const std::string& key, bool def) {
        const json* v = get(key);
        if (!v) return def;
        if (!v->is_boolean()) schema(join(path_, key), "expected true or false");
        return v->get<bool>();
    }

    std::string text(const std::string& key, const std::string& def) {
        const json* v = get(key);
        if (!v) return def;
        if (!v->is_string()) schema(join(path_, key), "expected a string");
        return v->get<std::string>();
    }

    std::size_t count(const std::string& key, std::size_t def) {
        const json* v = get(key);
        if (!v) return def;
        if (!v->is_number_integer() || v->get<std::int64_t>() < 0) schema(join(path_, key), "expected a non-negative integer");
        return v->get<std::size_t>();
    }

    void done() const {
        if (!j_) return;
        for (const auto& [k, _] : j_->items()) {
            if (!known_.count(k)) schema(join(path_, k), "unknown key");
        }
    }

private:
    const json* j_;
    std::string path_;
    std::set<std::string> known_;
};

template <class E>
E enum_value(Section& s, const std::string& key, E def, std::initializer_list<std::pair<const char*, E>> names) {
    const char* def_name = "";
    for (const auto& [n, e] : names) {
        if (e == def) def_name = n;
    }
    const std::string v = s.text(key, def_name);
    std::string allowed;
    for (const auto& [n, e] : names) {
        if (v == n) return e;
        allowed += allowed.empty() ? n : std::string(", ") + n;
    }
    schema(join(s.path(), key), "expected one of " + allowed + ", got \"" + v + "\"");
}

control::PIGains read_pi(Section& parent, const std::string& key, const control::PIGains& def) {
    Section s(parent.get(key), join(parent.path(), key));
    control::PIGains g;
    g.kp = s.number("kp", def.kp, Range::non_negative);
    g.ki = s.number("ki", def.ki, Range::non_negative);
    g.out_lo = s.number("out_lo", def.out_lo);
    g.out_hi = s.number("out_hi", def.out_hi);
    s.done();
    return g;
}

sim::LoadPhase read_phase(Section& parent, const std::string& key, const sim::LoadPhase& def) {
    Section s(parent.get(key), join(parent.path(), key));
    sim::LoadPhase ph{s.number("i_high", def.i_high), s.number("i_low", def.i_low)};
    s.done();
    return ph;
}

fuzzy::MembershipFunction read_mf(const json& j, const std::string& path) {
    Section s(&j, path);
    const auto kind = enum_value(s, "shape", fuzzy::ShapeKind::triangular,
                                 {{"triangular", fuzzy::ShapeKind::triangular},
                                  {"trapezoidal", fuzzy::ShapeKind::trapezoidal}});
    const json* pts = s.get("points");
    if (!pts || !pts->is_array()) schema(join(path, "points"), "expected an array of numbers");
    std::vector<double> p;
    for (const auto& x : *pts) {
        if (!x.is_number()) schema(join(path, "points"), "expected an array of numbers");
        p.push_back(x.get<double>());
    }
    s.done();
    try {
        return fuzzy::MembershipFunction(kind, p);
    } catch (const fuzzy::FuzzyError& e) {
        throw ConfigError(ErrorKind::invariant, join(path, "points"), e.what());
    }
}

fuzzy::LinguisticVariable read_variable(Section& parent, const std::string& key, const fuzzy::LinguisticVariable& def) {
    const json* j = parent.get(key);
    if (!j) return def;
    const std::string path = join(parent.path(), key);
    Section s(j, path);
    const double lo = s.number("lo", def.lo());
    const double hi = s.number("hi", def.hi());
    std::vector<fuzzy::FuzzySet> sets = def.sets();
    if (const json* arr = s.get("sets")) {
        const std::string sp = join(path, "sets");
        if (!arr->is_array()) schema(sp, "expected an array");
        sets.clear();
        for (std::size_t i = 0; i < arr->size(); ++i) {
            const std::string ip = sp + "[" + std::to_string(i) + "]";
            const json& item = (*arr)[i];
            if (!item.is_object()) schema(ip, "expected an object");
            const auto label = item.find("label");
            if (label == item.end() || !label->is_string()) schema(join(ip, "label"), "expected a string");
            json rest = item;
            rest.erase("label");
            sets.push_back({label->get<std::string>(), read_mf(rest, ip)});
        }
    }
    s.done();
    try {
        return fuzzy::LinguisticVariable(def.name(), lo, hi, std::move(sets));
    } catch (const fuzzy::FuzzyError& e) {
        throw ConfigError(ErrorKind::invariant, path, e.what());
    }
}

std::vector<std::string> labels(const fuzzy::LinguisticVariable& v) {
    std::vector<std::string> out;
    for (const auto& s : v.sets()) out.push_back(s.label);
    return out;
}

// Rule table keyed by current label, then voltage label.
std::vector<std::vector<std::string>> table_of(const fuzzy::FuzzyController& fc) {
    const auto& rb = fc.rules();
    std::vector<std::vector<std::string>> t(rb.rows(), std::vector<std::string>(rb.cols()));
    for (std::size_t r = 0; r < rb.rows(); ++r) {
        for (std::size_t c = 0; c < rb.cols(); ++c) t[r][c] = fc.battery_limit().set(rb.at(r, c)).label;
    }
    return t;
}

fuzzy::FuzzyController read_flc(Section& root) {
    const auto def = fuzzy::default_controller();
    Section s(root.get("flc"), "flc");
    fuzzy::InferenceConfig ic;
    ic.defuzz_resolution = s.count("defuzz_resolution", def.config().defuzz_resolution);

    Section vars(s.get("variables"), "flc.variables");
    auto voltage = read_variable(vars, "bus_voltage", def.bus_voltage());
    auto current = read_variable(vars, "hesm_current", def.hesm_current());
    auto limit = read_variable(vars, "battery_limit", def.battery_limit());
    vars.done();

    const auto rows = labels(current);
    const auto cols = labels(voltage);
    std::vector<std::vector<std::string>> table;
    if (const json* rj = s.get("rules")) {
        Section rs(rj, "flc.rules");
        for (const auto& row : rows) {
            const std::string rp = join("flc.rules", row);
            const json* rowj = rs.get(row);
            if (!rowj) schema(rp, "missing rule row");
            Section cs(rowj, rp);
            std::vector<std::string> line;
            for (const auto& col : cols) {
                const json* cell = cs.get(col);
                if (!cell) schema(join(rp, col), "missing rule");
                if (!cell->is_string()) schema(join(rp, col), "expected an output set label");
                line.push_back(cell->get<std::string>());
            }
            cs.done();
            table.push_back(std::move(line));
        }
        rs.done();
    } else {
        // Default table by label; fails if the set labels were renamed.
        const auto dt = table_of(def);
        const auto drows = labels(def.hesm_current());
        const auto dcols = labels(def.bus_voltage());
        if (rows != drows || cols != dcols) {
            throw ConfigError(ErrorKind::invariant, "flc.rules", "rules must be given when set labels change");
        }
        table = dt;
    }
    s.done();

    try {
        auto rb = fuzzy::rule_base_from_labels(current, voltage, limit, rows, cols, table);
        return fuzzy::FuzzyController(std::move(voltage), std::move(current), std::move(limit), std::move(rb), ic);
    } catch (const fuzzy::FuzzyError& e) {
        throw ConfigError(ErrorKind::invariant, "flc", e.what());
    }
}

json pi_json(const control::PIGains& g) {
    return {{"kp", g.kp}, {"ki", g.ki}, {"out_lo", g.out_lo}, {"out_hi", g.out_hi}};
}

json variable_json(const fuzzy::LinguisticVariable& v) {
    json sets = json::array();
    for (const auto& s : v.sets()) {
        sets.push_back({{"label", s.label},
                        {"shape", s.mf.kind() == fuzzy::ShapeKind::triangular ? "triangular" : "trapezoidal"},
                        {"points", s.mf.points()}});
    }
    return {{"lo", v.lo()}, {"hi", v.hi()}, {"sets", sets}};
}

// Invariant messages from the model start with the key path they concern.
std::string leading_path(const std::string& msg) {
    const auto sp = msg.find(' ');
    const std::string head = msg.substr(0, sp);
    return head.find('.') != std::string::npos ? head : std::string();
}

} // namespace

Config from_json(const json& j) {
    Section root(&j, "");
    Config c;
    sim::SimConfig& s = c.sim;

    {
        Section p(root.get("plant"), "plant");
        const plant::PlantParams d;
        s.plant.L = p.number("L", d.L, Range::positive);
        s.plant.esr_L = p.number("esr_L", d.esr_L, Range::positive);
        s.plant.C1 = p.number("C1", d.C1, Range::positive);
        s.plant.C2 = p.number("C2", d.C2, Range::positive);
        s.plant.r_on = p.number("r_on", d.r_on, Range::positive);
        s.plant.f_sw = p.number("f_sw", d.f_sw, Range::positive);
        s.plant.textbook_mode = p.boolean("textbook_mode", d.textbook_mode);
        p.done();
    }
    {
        Section b(root.get("battery"), "battery");
        const plant::BatteryModel d;
        s.battery.v_nom = b.number("v_nom", d.v_nom, Range::positive);
        s.battery.capacity_Ah = b.number("capacity_Ah", d.capacity_Ah, Range::positive);
        s.battery.soc0 = b.number("soc0", d.soc0, Range::unit);
        s.battery.r_int = b.number("r_int", d.r_int, Range::positive);
        s.battery.E0 = b.number("E0", d.E0, Range::positive);
        s.battery.K = b.number("K", d.K, Range::non_negative);
        s.battery.A = b.number("A", d.A, Range::non_negative);
        s.battery.B = b.number("B", d.B, Range::non_negative);
        b.done();
    }
    {
        Section u(root.get("ultracap"), "ultracap");
        const plant::UltracapModel d;
        s.ultracap.capacitance = u.number("capacitance", d.capacitance, Range::positive);
        s.ultracap.esr = u.number("esr", d.esr, Range::positive);
        s.ultracap.v0 = u.number("v0", d.v0, Range::non_negative);
        u.done();
    }
    {
        Section k(root.get("controller"), "controller");
        const sim::ControllerConfig d;
        s.controller.kind = enum_value(k, "type", d.kind,
                                       {{"flc", sim::ControllerKind::flc}, {"ifthen", sim::ControllerKind::ifthen}});
        s.controller.cascade.v_ref = k.number("v_ref", d.cascade.v_ref, Range::positive);
        s.controller.cascade.dead_band = k.number("dead_band", d.cascade.dead_band, Range::non_negative);
        s.controller.supervisor_rate_hz = k.number("supervisor_rate_hz", d.supervisor_rate_hz, Range::positive);
        k.done();
    }
    s.controller.flc = read_flc(root);
    {
        Section t(root.get("ifthen"), "ifthen");
        const control::IfThenConfig d;
        s.controller.ifthen.v_low = t.number("v_low", d.v_low, Range::positive);
        s.controller.ifthen.v_high = t.number("v_high", d.v_high, Range::positive);
        s.controller.ifthen.i_discharge = t.number("i_discharge", d.i_discharge, Range::non_negative);
        const double rc = t.number("i_recharge", d.i_recharge);
        if (rc > 0.0) schema("ifthen.i_recharge", "must be zero or negative");
        s.controller.ifthen.i_recharge = rc;
        t.done();
    }
    {
        Section p(root.get("pi"), "pi");
        const control::CascadeGains d;
        s.controller.cascade.discharge_voltage = read_pi(p, "discharge_voltage", d.discharge_voltage);
        s.controller.cascade.discharge_current = read_pi(p, "discharge_current", d.discharge_current);
        s.controller.cascade.recharge_voltage = read_pi(p, "recharge_voltage", d.recharge_voltage);
        s.controller.cascade.recharge_current = read_pi(p, "recharge_current", d.recharge_current);
        p.done();
    }
    {
        Section l(root.get("load"), "load");
        const sim::LoadProfile d;
        s.load.t_high = l.number("t_high", d.t_high, Range::positive);
        s.load.t_low = l.number("t_low", d.t_low, Range::positive);
        s.load.t_shift = l.number("t_shift", d.t_shift, Range::positive);
        s.load.t_end = l.number("t_end", d.t_end, Range::positive);
        s.load.phase_a = read_phase(l, "phase_a", d.phase_a);
        s.load.phase_b = read_phase(l, "phase_b", d.phase_b);
        l.done();
    }
    {
        Section i(root.get("integration"), "integration");
        const sim::IntegrationConfig d;
        s.integration.mode = enum_value(i, "mode", d.mode,
                                        {{"switched", sim::IntegrationMode::switched},
                                         {"averaged", sim::IntegrationMode::averaged}});
        s.integration.dt = i.number("dt", d.dt, Range::positive);
        s.integration.t_stop = i.optional_number("t_stop", Range::positive);
        i.done();
    }
    {
        Section o(root.get("output"), "output");
        c.output.trace_path = o.text("trace_path", c.output.trace_path);
        if (c.output.trace_path.empty()) schema("output.trace_path", "must not be empty");
        s.decimation_hz = o.number("decimation_hz", s.decimation_hz, Range::positive);
        c.output.plots = o.boolean("plots", c.output.plots);
        o.done();
    }
    root.done();

    try {
        sim::validate(s);
    } catch (const plant::SimulationFault& e) {
        throw ConfigError(ErrorKind::invariant, leading_path(e.what()), e.what());
    }
    return c;
}

Config parse_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(ErrorKind::malformed, "", e.what());
    }
    return from_json(j);
}

Config parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(ErrorKind::missing_file, "", "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_text(ss.str());
}

json to_json(const Config& c) {
    const auto& s = c.sim;
    const auto& g = s.controller.cascade;
    const auto& fc = s.controller.flc;

    json rules = json::object();
    const auto table = table_of(fc);
    for (std::size_t r = 0; r < table.size(); ++r) {
        for (std::size_t k = 0; k < table[r].size(); ++k) {
            rules[fc.hesm_current().set(r).label][fc.bus_voltage().set(k).label] = table[r][k];
        }
    }

    json integration = {{"mode", sim::to_string(s.integration.mode)}, {"dt", s.integration.dt}};
    if (s.integration.t_stop) integration["t_stop"] = *s.integration.t_stop;

    return {
        {"plant",
         {{"L", s.plant.L},
          {"esr_L", s.plant.esr_L},
          {"C1", s.plant.C1},
          {"C2", s.plant.C2},
          {"r_on", s.plant.r_on},
          {"f_sw", s.plant.f_sw},
          {"textbook_mode", s.plant.textbook_mode}}},
        {"battery",
         {{"v_nom", s.battery.v_nom},
          {"capacity_Ah", s.battery.capacity_Ah},
          {"soc0", s.battery.soc0},
          {"r_int", s.battery.r_int},
          {"E0", s.battery.E0},
          {"K", s.battery.K},
          {"A", s.battery.A},
          {"B", s.battery.B}}},
        {"ultracap", {{"capacitance", s.ultracap.capacitance}, {"esr", s.ultracap.esr}, {"v0", s.ultracap.v0}}},
        {"controller",
         {{"type", sim::to_string(s.controller.kind)},
          {"v_ref", g.v_ref},
          {"dead_band", g.dead_band},
          {"supervisor_rate_hz", s.controller.supervisor_rate_hz}}},
        {"flc",
         {{"defuzz_resolution", fc.config().defuzz_resolution},
          {"variables",
           {{"bus_voltage", variable_json(fc.bus_voltage())},
            {"hesm_current", variable_json(fc.hesm_current())},
            {"battery_limit", variable_json(fc.battery_limit())}}},
          {"rules", rules}}},
        {"ifthen",
         {{"v_low", s.controller.ifthen.v_low},
          {"v_high", s.controller.ifthen.v_high},
          {"i_discharge", s.controller.ifthen.i_discharge},
          {"i_recharge", s.controller.ifthen.i_recharge}}},
        {"pi",
         {{"discharge_voltage", pi_json(g.discharge_voltage)},
          {"discharge_current", pi_json(g.discharge_current)},
          {"recharge_voltage", pi_json(g.recharge_voltage)},
          {"recharge_current", pi_json(g.recharge_current)}}},
        {"load",
         {{"t_high", s.load.t_high},
          {"t_low", s.load.t_low},
          {"t_shift", s.load.t_shift},
          {"t_end", s.load.t_end},
          {"phase_a", {{"i_high", s.load.phase_a.i_high}, {"i_low", s.load.phase_a.i_low}}},
          {"phase_b", {{"i_high", s.load.phase_b.i_high}, {"i_low", s.load.phase_b.i_low}}}}},
        {"integration", integration},
        {"output", {{"trace_path", c.output.trace_path}, {"decimation_hz", s.decimation_hz}, {"plots", c.output.plots}}},
    };
}

std::string canonical_text(const Config& c) { return to_json(c).dump(); }

std::uint64_t digest(const Config& c) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : canonical_text(c)) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

std::string digest_hex(const Config& c) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(digest(c)));
    return buf;
}

Config with_value(const Config& c, const std::string& key_path, const json& value) {
    json j = to_json(c);
    json* node = &j;
    std::string part;
    std::istringstream ss(key_path);
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    if (parts.empty()) schema(key_path, "empty key path");
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        if (!node->is_object() || !node->contains(parts[i])) schema(key_path, "no such key");
        node = &(*node)[parts[i]];
    }
    const bool optional_leaf = key_path == "integration.t_stop";
    if (!node->is_object() || (!node->contains(parts.back()) && !optional_leaf)) schema(key_path, "no such key");
    (*node)[parts.back()] = value;
    return from_json(j);
}

} // namespace hesm::config
