#include "hesm/fuzzy.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace hesm::fuzzy {

MembershipFunction::MembershipFunction(ShapeKind kind, const std::vector<double>& points) : kind_(kind) {
    const std::size_t want = kind == ShapeKind::triangular ? 3 : 4;
    if (points.size() != want) {
        throw FuzzyError("membership function needs " + std::to_string(want) + " breakpoints, got " +
                         std::to_string(points.size()));
    }
    for (double p : points) {
        if (!std::isfinite(p)) throw FuzzyError("membership breakpoint is not finite");
    }
    if (!std::is_sorted(points.begin(), points.end())) {
        throw FuzzyError("membership breakpoints must be non-decreasing");
    }
    if (kind == ShapeKind::triangular) {
        p_ = {points[0], points[1], points[1], points[2]};
    } else {
        p_ = {points[0], points[1], points[2], points[3]};
    }
}

MembershipFunction MembershipFunction::triangular(double a, double b, double c) {
    return MembershipFunction(ShapeKind::triangular, {a, b, c});
}

MembershipFunction MembershipFunction::trapezoidal(double a, double b, double c, double d) {
    return MembershipFunction(ShapeKind::trapezoidal, {a, b, c, d});
}

double MembershipFunction::degree(double x) const {
    const auto [a, b, c, d] = p_;
    if (x >= b && x <= c) return 1.0;
    if (x <= a || x >= d) return 0.0;
    if (x < b) return (x - a) / (b - a);
    return (d - x) / (d - c);
}

std::vector<double> MembershipFunction::points() const {
    if (kind_ == ShapeKind::triangular) return {p_[0], p_[1], p_[3]};
    return {p_[0], p_[1], p_[2], p_[3]};
}

bool MembershipFunction::symmetric() const {
    const double left = p_[1] - p_[0];
    const double right = p_[3] - p_[2];
    return std::abs(left - right) <= 1e-12 * std::max(1.0, std::abs(p_[3] - p_[0]));
}

double membership_degree(const MembershipFunction& mf, double x) { return mf.degree(x); }

LinguisticVariable::LinguisticVariable(std::string name, double lo, double hi, std::vector<FuzzySet> sets)
    : name_(std::move(name)), lo_(lo), hi_(hi), sets_(std::move(sets)) {
    if (!(std::isfinite(lo_) && std::isfinite(hi_) && lo_ < hi_)) {
        throw FuzzyError(name_ + ": universe must satisfy lo < hi");
    }
    if (sets_.empty()) throw FuzzyError(name_ + ": no fuzzy sets");
    for (std::size_t i = 0; i < sets_.size(); ++i) {
        const auto& s = sets_[i];
        if (s.mf.support_lo() < lo_ || s.mf.support_hi() > hi_) {
            throw FuzzyError(name_ + ": set '" + s.label + "' extends outside the universe");
        }
        if (i > 0 && !(sets_[i - 1].mf.peak() < s.mf.peak())) {
            throw FuzzyError(name_ + ": set peaks must be strictly increasing ('" + sets_[i - 1].label +
                             "' before '" + s.label + "')");
        }
        for (std::size_t j = 0; j < i; ++j) {
            if (sets_[j].label == s.label) throw FuzzyError(name_ + ": duplicate label '" + s.label + "'");
        }
    }

    // Membership is linear between consecutive breakpoints, so checking every
    // breakpoint and every midpoint between them settles coverage exactly.
    std::vector<double> knots{lo_, hi_};
    for (const auto& s : sets_) {
        for (double p : s.mf.points()) knots.push_back(p);
    }
    std::sort(knots.begin(), knots.end());
    knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
    auto covered = [&](double x) {
        return std::any_of(sets_.begin(), sets_.end(), [x](const FuzzySet& s) { return s.mf.degree(x) > 0.0; });
    };
    for (std::size_t k = 0; k < knots.size(); ++k) {
        const double x = knots[k];
        if (x < lo_ || x > hi_) continue;
        if (!covered(x)) throw FuzzyError(name_ + ": universe not covered at " + std::to_string(x));
        if (k + 1 < knots.size() && knots[k + 1] <= hi_) {
            const double mid = 0.5 * (x + knots[k + 1]);
            if (!covered(mid)) throw FuzzyError(name_ + ": universe not covered near " + std::to_string(mid));
        }
    }
}

std::size_t LinguisticVariable::index_of(const std::string& label) const {
    for (std::size_t i = 0; i < sets_.size(); ++i) {
        if (sets_[i].label == label) return i;
    }
    throw FuzzyError(name_ + ": unknown set label '" + label + "'");
}

double LinguisticVariable::clamp(double x) const { return std::clamp(x, lo_, hi_); }

RuleBase::RuleBase(std::size_t rows, std::size_t cols, std::vector<std::size_t> cells, std::size_t n_outputs)
    : rows_(rows), cols_(cols), n_outputs_(n_outputs), cells_(std::move(cells)) {
    if (rows_ == 0 || cols_ == 0 || cells_.size() != rows_ * cols_) {
        throw FuzzyError("rule base shape does not match its cell count");
    }
    for (std::size_t c : cells_) {
        if (c >= n_outputs_) throw FuzzyError("rule names an output set that does not exist");
    }
}

RuleBase rule_base_from_labels(const LinguisticVariable& rows_var, const LinguisticVariable& cols_var,
                               const LinguisticVariable& out_var,
                               const std::vector<std::string>& row_labels,
                               const std::vector<std::string>& col_labels,
                               const std::vector<std::vector<std::string>>& table) {
    const std::size_t rows = rows_var.size();
    const std::size_t cols = cols_var.size();
    if (row_labels.size() != rows || col_labels.size() != cols || table.size() != rows) {
        throw FuzzyError("rule table must be " + std::to_string(rows) + "x" + std::to_string(cols));
    }
    std::vector<std::size_t> cells(rows * cols, out_var.size());
    for (std::size_t r = 0; r < rows; ++r) {
        if (table[r].size() != cols) throw FuzzyError("rule table row '" + row_labels[r] + "' has wrong width");
        const std::size_t ri = rows_var.index_of(row_labels[r]);
        for (std::size_t c = 0; c < cols; ++c) {
            const std::size_t ci = cols_var.index_of(col_labels[c]);
            cells[ri * cols + ci] = out_var.index_of(table[r][c]);
        }
    }
    for (std::size_t c : cells) {
        if (c == out_var.size()) throw FuzzyError("rule table has repeated row or column labels");
    }
    return RuleBase(rows, cols, std::move(cells), out_var.size());
}

FuzzyController::FuzzyController(LinguisticVariable bus_voltage, LinguisticVariable hesm_current,
                                 LinguisticVariable battery_limit, RuleBase rules, InferenceConfig cfg)
    : voltage_(std::move(bus_voltage)), current_(std::move(hesm_current)), output_(std::move(battery_limit)),
      rules_(std::move(rules)), cfg_(cfg) {
    for (const auto* v : {&voltage_, &current_, &output_}) {
        if (v->size() != 5) throw FuzzyError(v->name() + ": controller variables need exactly 5 sets");
    }
    if (rules_.rows() != current_.size() || rules_.cols() != voltage_.size() ||
        rules_.n_outputs() != output_.size()) {
        throw FuzzyError("rule base shape does not match the linguistic variables");
    }
    if (cfg_.defuzz_resolution < 101) throw FuzzyError("defuzz_resolution must be at least 101");
}

DegreeVector fuzzify(const LinguisticVariable& var, double x) {
    const double xc = var.clamp(x);
    DegreeVector out(var.size());
    for (std::size_t i = 0; i < var.size(); ++i) out[i] = var.set(i).mf.degree(xc);
    return out;
}

DegreeVector evaluate_rules(const RuleBase& rb, const DegreeVector& dv, const DegreeVector& di) {
    if (dv.size() != rb.cols() || di.size() != rb.rows()) {
        throw FuzzyError("degree vectors do not match the rule base shape");
    }
    DegreeVector act(rb.n_outputs(), 0.0);
    for (std::size_t r = 0; r < rb.rows(); ++r) {
        if (di[r] <= 0.0) continue;
        for (std::size_t c = 0; c < rb.cols(); ++c) {
            const double w = std::min(dv[c], di[r]);
            auto& slot = act[rb.at(r, c)];
            slot = std::max(slot, w);
        }
    }
    return act;
}

// The clipped aggregate is piecewise linear. Its kinks are set breakpoints,
// clip-level crossings and crossings of two clipped sets, so integrating
// between consecutive kinks is exact.
DefuzzResult defuzzify(const LinguisticVariable& out, const DegreeVector& activations, const InferenceConfig&) {
    if (activations.size() != out.size()) throw FuzzyError("activation vector does not match output variable");
    const double lo = out.lo(), hi = out.hi();
    std::vector<std::size_t> active;
    std::vector<double> xs{lo, hi};
    for (std::size_t j = 0; j < out.size(); ++j) {
        const double a = std::min(activations[j], 1.0);
        if (!(a > 0.0)) continue;
        active.push_back(j);
        const auto p = out.set(j).mf.points();
        const double a0 = p[0], b = p[1], c = p.size() == 3 ? p[1] : p[2], d = p.back();
        for (double x : {a0, b, c, d, a0 + a * (b - a0), d - a * (d - c)}) xs.push_back(x);
    }
    if (active.empty()) return {out.midpoint(), true};
    for (auto& x : xs) x = std::clamp(x, lo, hi);
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

    auto clipped = [&](std::size_t j, double x) { return std::min(activations[j], out.set(j).mf.degree(x)); };
    double mass = 0.0, moment = 0.0;
    std::vector<double> y0(active.size()), y1(active.size()), cuts;
    for (std::size_t k = 0; k + 1 < xs.size(); ++k) {
        const double x0 = xs[k], x1 = xs[k + 1], w = x1 - x0;
        // one-sided end values from two interior points, so step edges do not leak in
        for (std::size_t m = 0; m < active.size(); ++m) {
            const double ya = clipped(active[m], x0 + w / 3.0), yb = clipped(active[m], x0 + 2.0 * w / 3.0);
            y0[m] = 2.0 * ya - yb;
            y1[m] = 2.0 * yb - ya;
        }
        cuts.assign({0.0, 1.0});
        for (std::size_t m = 0; m < active.size(); ++m) {
            for (std::size_t n = m + 1; n < active.size(); ++n) {
                const double d0 = y0[m] - y0[n], d1 = y1[m] - y1[n];
                if ((d0 < 0.0 && d1 > 0.0) || (d0 > 0.0 && d1 < 0.0)) cuts.push_back(d0 / (d0 - d1));
            }
        }
        std::sort(cuts.begin(), cuts.end());
        auto agg = [&](double u) {
            double y = 0.0;
            for (std::size_t m = 0; m < active.size(); ++m) y = std::max(y, y0[m] + u * (y1[m] - y0[m]));
            return y;
        };
        for (std::size_t q = 0; q + 1 < cuts.size(); ++q) {
            const double u0 = cuts[q], u1 = cuts[q + 1];
            if (u1 <= u0) continue;
            const double xa = x0 + u0 * w, xb = x0 + u1 * w, h = xb - xa;
            const double ya = agg(u0), yb = agg(u1);
            mass += 0.5 * h * (ya + yb);
            moment += h * (xa * (2.0 * ya + yb) + xb * (ya + 2.0 * yb)) / 6.0;
        }
    }
    if (!(mass > 0.0)) return {out.midpoint(), true};
    return {std::clamp(moment / mass, lo, hi), false};
}

DefuzzResult infer(const FuzzyController& fc, double v_bus, double i_hesm) {
    const auto dv = fuzzify(fc.bus_voltage(), v_bus);
    const auto di = fuzzify(fc.hesm_current(), i_hesm);
    return defuzzify(fc.battery_limit(), evaluate_rules(fc.rules(), dv, di), fc.config());
}

FuzzyController default_controller() {
    using MF = MembershipFunction;
    LinguisticVariable voltage("bus_voltage", 18.0, 30.0,
                               {{"Very Low", MF::trapezoidal(18, 18, 21, 22.75)},
                                {"Low", MF::trapezoidal(19.25, 21, 23, 24.75)},
                                {"Good", MF::trapezoidal(21.25, 23, 25, 26.75)},
                                {"High", MF::trapezoidal(23.25, 25, 27, 28.75)},
                                {"Very High", MF::trapezoidal(25.25, 27, 30, 30)}});
    // Measured into the HESM from the bus: "In" means the bus is being drained.
    LinguisticVariable current("hesm_current", -60.0, 60.0,
                               {{"High In", MF::trapezoidal(-60, -60, -30, -15)},
                                {"Low In", MF::triangular(-30, -15, 0)},
                                {"No Flow", MF::triangular(-15, 0, 15)},
                                {"Low Out", MF::triangular(0, 15, 30)},
                                {"High Out", MF::trapezoidal(15, 30, 60, 60)}});
    LinguisticVariable limit("battery_limit", -30.0, 30.0,
                             {{"High Recharge", MF::trapezoidal(-30, -30, -25, -15)},
                              {"Low Recharge", MF::triangular(-20, -10, 0)},
                              {"No Flow", MF::triangular(-10, 0, 10)},
                              {"Low Discharge", MF::triangular(0, 10, 20)},
                              {"High Discharge", MF::trapezoidal(15, 25, 30, 30)}});

    const std::vector<std::string> rows{"High Out", "Low Out", "No Flow", "Low In", "High In"};
    const std::vector<std::string> cols{"Very Low", "Low", "Good", "High", "Very High"};
    const std::vector<std::vector<std::string>> table{
        {"No Flow", "Low Recharge", "High Recharge", "High Recharge", "High Recharge"},
        {"Low Discharge", "No Flow", "Low Recharge", "High Recharge", "High Recharge"},
        {"High Discharge", "Low Discharge", "No Flow", "Low Recharge", "High Recharge"},
        {"High Discharge", "High Discharge", "Low Discharge", "No Flow", "Low Recharge"},
        {"High Discharge", "High Discharge", "High Discharge", "Low Discharge", "No Flow"},
    };
    auto rules = rule_base_from_labels(current, voltage, limit, rows, cols, table);
    return FuzzyController(std::move(voltage), std::move(current), std::move(limit), std::move(rules));
}

} // namespace hesm::fuzzy
