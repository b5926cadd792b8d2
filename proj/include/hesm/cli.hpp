#pragma once

#include "hesm/config.hpp"
#include "hesm/sim.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace hesm::cli {

enum ExitCode : int {
    exit_ok = 0,
    exit_config = 2,
    exit_divergence = 3,
    exit_guard = 4,
    exit_io = 5,
};

inline constexpr const char* version = "0.1.0";
inline constexpr const char* trace_header = "t_s,v_bus_V,i_L_A,i_batt_A,i_uc_A,zeta_A,soc,v_uc_V,i_limit_A,ctrl_state,flags";

int exit_code_for(const config::ConfigError& e);

// 9 significant digits, shortest of %g.
std::string format_number(double x);
void write_trace_csv(std::ostream& os, const sim::Trace& tr);

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::string color;
};

struct Chart {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
    int width = 960;
    int height = 440;
};

// Standalone SVG document. Long series are thinned to per-pixel min/max
// pairs so extremes survive.
std::string render_svg(const Chart& chart);

// Max over the trace of |(i_hesm - i_branch)/C2 - dv/dt| and of |dv/dt|.
struct KclCheck {
    double max_residual = 0.0;
    double max_dv = 0.0;
};
KclCheck kcl_check(const sim::Trace& tr, double C2);

config::json metrics_json(const sim::Metrics& m);
config::json report_json(const config::Config& cfg, const sim::RunResult& r);

int cmd_run(const config::Config& cfg, const std::filesystem::path& out_dir, std::ostream& log);
int cmd_compare(const config::Config& a, const config::Config& b, const std::filesystem::path& out_dir,
                std::ostream& log);
int cmd_surface(const config::Config& cfg, const std::filesystem::path& out_file, std::size_t res,
                std::ostream& log);
int cmd_sweep(const config::Config& cfg, const std::string& key, const std::vector<std::string>& values,
              const std::filesystem::path& out_dir, unsigned threads, std::ostream& log);

// HESM_SIM_THREADS if set and positive, else the hardware concurrency.
unsigned threads_from_env();

// Full command line entry point; returns the process exit code.
int main(int argc, char** argv, std::ostream& out, std::ostream& err);

} // namespace hesm::cli
