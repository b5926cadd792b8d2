#pragma once

// Shared generators and brute-force oracles. Nothing here calls into the
// library's numerics; the oracles are written from the formulas directly.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

namespace testing {

class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
    bool coin(double p = 0.5) { return uniform(0.0, 1.0) < p; }

    // Activation vector in [0,1]^n with a few exact zeros and ones mixed in.
    std::vector<double> activations(std::size_t n) {
        std::vector<double> a(n);
        for (auto& x : a) {
            const int k = integer(0, 9);
            x = k == 0 ? 0.0 : k == 1 ? 1.0 : uniform(0.0, 1.0);
        }
        if (std::all_of(a.begin(), a.end(), [](double x) { return x == 0.0; })) a[integer(0, int(n) - 1)] = 0.5;
        return a;
    }

private:
    std::mt19937_64 rng_;
};

// Piecewise-linear membership from the raw breakpoints.
inline double shape(const std::vector<double>& p, double x) {
    const double a = p[0], b = p[1];
    const double c = p.size() == 3 ? p[1] : p[2];
    const double d = p.size() == 3 ? p[2] : p[3];
    if (x >= b && x <= c) return 1.0;
    if (x < a || x > d) return 0.0;
    if (x < b) return (x - a) / (b - a);
    return (d - x) / (d - c);
}

// Centroid of max_k min(a_k, mu_k(x)) by the trapezoid rule on n points.
// Membership is tabulated once per set so many activation vectors can reuse it.
class CentroidOracle {
public:
    CentroidOracle(double lo, double hi, const std::vector<std::vector<double>>& sets, std::size_t n = 1'000'000)
        : lo_(lo), hi_(hi), n_(n), x_(n) {
        const double h = (hi - lo) / double(n - 1);
        for (std::size_t i = 0; i < n; ++i) x_[i] = lo + h * double(i);
        x_.back() = hi;
        // sparse (set, degree) lists; adjacent sets overlap so lists are short
        idx_.assign(n + 1, 0);
        for (std::size_t i = 0; i < n; ++i) {
            idx_[i] = entries_.size();
            for (std::size_t k = 0; k < sets.size(); ++k) {
                const double m = shape(sets[k], x_[i]);
                if (m > 0.0) entries_.push_back({k, m});
            }
        }
        idx_[n] = entries_.size();
    }

    double centroid(const std::vector<double>& act) const {
        double num = 0.0, den = 0.0, prev_m = 0.0, prev_x = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            double m = 0.0;
            for (std::size_t e = idx_[i]; e < idx_[i + 1]; ++e) m = std::max(m, std::min(act[entries_[e].k], entries_[e].m));
            if (i > 0) {
                const double h = x_[i] - prev_x;
                num += 0.5 * h * (prev_x * prev_m + x_[i] * m);
                den += 0.5 * h * (prev_m + m);
            }
            prev_m = m;
            prev_x = x_[i];
        }
        return num / den;
    }

    double span() const { return hi_ - lo_; }

private:
    struct Entry {
        std::size_t k;
        double m;
    };
    double lo_, hi_;
    std::size_t n_;
    std::vector<double> x_;
    std::vector<std::size_t> idx_;
    std::vector<Entry> entries_;
};

// Eqs 1-12 written out per switching state: returns {di, dv1, dv2}.
inline std::array<double, 3> textbook_equations(int state, double L, double C1, double C2, double iL, double v1,
                                                double v2, double iV1, double iV2, double zeta) {
    switch (state) {
    case 1: return {(v1 - v2) / L, (iL - iV1) / C1, (iL - iV2 - zeta) / C2};
    case 2: return {-v2 / L, -iV1 / C1, (iL - iV2 - zeta) / C2};
    case 3: return {v2 / L, -iV1 / C1, (iV2 - iL - zeta) / C2};
    case 4: return {(v2 - v1) / L, (iL - iV1) / C1, (iV2 - iL - zeta) / C2};
    }
    return {0, 0, 0};
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

inline std::filesystem::path temp_dir(const std::string& tag) {
    auto d = std::filesystem::temp_directory_path() / ("hesm_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(d);
    std::filesystem::create_directories(d);
    return d;
}

inline double rel_err(double a, double b) {
    const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
    return std::abs(a - b) / scale;
}

} // namespace testing
