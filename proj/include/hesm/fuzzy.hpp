#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

// Mamdani inference with min (AND), min (implication), max (aggregation) and
// centroid defuzzification. Everything here is immutable after construction.
namespace hesm::fuzzy {

class FuzzyError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class ShapeKind { triangular, trapezoidal };

class MembershipFunction {
public:
    // Throws FuzzyError unless the breakpoint count matches the kind
    // (3 or 4) and the breakpoints are finite and non-decreasing.
    MembershipFunction(ShapeKind kind, const std::vector<double>& points);

    static MembershipFunction triangular(double a, double b, double c);
    static MembershipFunction trapezoidal(double a, double b, double c, double d);

    // Piecewise linear; 1 on [b, c], 0 outside [a, d]. A vertical edge
    // (coincident breakpoints) takes the plateau value at the shared point.
    double degree(double x) const;

    ShapeKind kind() const { return kind_; }
    std::vector<double> points() const;
    double support_lo() const { return p_[0]; }
    double support_hi() const { return p_[3]; }
    double peak() const { return 0.5 * (p_[1] + p_[2]); }
    bool symmetric() const;

private:
    ShapeKind kind_;
    std::array<double, 4> p_{}; // triangles are stored as a, b, b, c
};

struct FuzzySet {
    std::string label;
    MembershipFunction mf;
};

using DegreeVector = std::vector<double>;

class LinguisticVariable {
public:
    // Validates: lo < hi, non-empty, every support inside [lo, hi], peaks
    // strictly increasing, and every point of the universe covered.
    LinguisticVariable(std::string name, double lo, double hi, std::vector<FuzzySet> sets);

    const std::string& name() const { return name_; }
    double lo() const { return lo_; }
    double hi() const { return hi_; }
    double span() const { return hi_ - lo_; }
    double midpoint() const { return 0.5 * (lo_ + hi_); }
    std::size_t size() const { return sets_.size(); }
    const FuzzySet& set(std::size_t i) const { return sets_.at(i); }
    const std::vector<FuzzySet>& sets() const { return sets_; }

    // Index of the set with this label; throws FuzzyError if absent.
    std::size_t index_of(const std::string& label) const;

    double clamp(double x) const;

private:
    std::string name_;
    double lo_;
    double hi_;
    std::vector<FuzzySet> sets_;
};

// Rows follow the current variable's sets, columns the voltage variable's
// sets, each cell holds an output set index.
class RuleBase {
public:
    RuleBase(std::size_t rows, std::size_t cols, std::vector<std::size_t> cells, std::size_t n_outputs);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t n_outputs() const { return n_outputs_; }
    std::size_t at(std::size_t row, std::size_t col) const { return cells_.at(row * cols_ + col); }

private:
    std::size_t rows_;
    std::size_t cols_;
    std::size_t n_outputs_;
    std::vector<std::size_t> cells_;
};

struct InferenceConfig {
    // Kept for configuration compatibility and validated (>= 101); the
    // centroid is integrated exactly and does not depend on it.
    std::size_t defuzz_resolution = 1001;
};

struct DefuzzResult {
    double value = 0.0;
    bool uncovered = false; // aggregate was identically zero
};

class FuzzyController {
public:
    FuzzyController(LinguisticVariable bus_voltage, LinguisticVariable hesm_current,
                    LinguisticVariable battery_limit, RuleBase rules, InferenceConfig cfg = {});

    const LinguisticVariable& bus_voltage() const { return voltage_; }
    const LinguisticVariable& hesm_current() const { return current_; }
    const LinguisticVariable& battery_limit() const { return output_; }
    const RuleBase& rules() const { return rules_; }
    const InferenceConfig& config() const { return cfg_; }

private:
    LinguisticVariable voltage_;
    LinguisticVariable current_;
    LinguisticVariable output_;
    RuleBase rules_;
    InferenceConfig cfg_;
};

double membership_degree(const MembershipFunction& mf, double x);

// Input outside the universe is clamped first.
DegreeVector fuzzify(const LinguisticVariable& var, double x);

// Firing strength of cell (r, c) is min(di[r], dv[c]); each output set takes
// the max over the cells naming it.
DegreeVector evaluate_rules(const RuleBase& rb, const DegreeVector& dv, const DegreeVector& di);

// Centroid of the max-aggregated clipped output sets, integrated exactly over
// the piecewise-linear aggregate. An all-zero aggregate returns the universe
// midpoint with uncovered set.
DefuzzResult defuzzify(const LinguisticVariable& out, const DegreeVector& activations,
                       const InferenceConfig& cfg);

DefuzzResult infer(const FuzzyController& fc, double v_bus, double i_hesm);

// Table-driven default design: bus voltage on [18, 30] V centred on 24 V,
// HESM current on [-60, 60] A, battery current limit on [-30, 30] A.
FuzzyController default_controller();

// Build a rule base from labels: table[row][col] names an output set, rows
// ordered as row_labels, columns as col_labels.
RuleBase rule_base_from_labels(const LinguisticVariable& rows_var, const LinguisticVariable& cols_var,
                               const LinguisticVariable& out_var,
                               const std::vector<std::string>& row_labels,
                               const std::vector<std::string>& col_labels,
                               const std::vector<std::vector<std::string>>& table);

} // namespace hesm::fuzzy
