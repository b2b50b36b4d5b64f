// Experiment commands behind the CLI. Every command writes its outputs
// under an output directory and returns a process exit code:
//   0 success, 1 config error, 2 inconclusive analysis.
// Outputs are byte-reproducible for a fixed config and seed.

#ifndef WENSIM_HARNESS_HPP
#define WENSIM_HARNESS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "wensim/protocol.hpp"

namespace wensim {

// Fans trials out over worker threads; results are ordered by trial
// index, so the outcome is independent of scheduling. jobs <= 0 picks
// min(hardware threads, trials).
std::vector<SimResult> run_trials_parallel(const Topology& t, const SimConfig& c, int jobs);

// Least-squares slope of values[from..to) against times[from..to).
double linear_slope(const std::vector<double>& times, const std::vector<double>& values,
                    std::size_t from, std::size_t to);

struct AnalyzeCutsOpts {
    std::string config_path;
    int delay = 0; // > 0: analyze the delay-chain transform
    std::string out_dir = "out";
};
int cmd_analyze_cuts(const AnalyzeCutsOpts& o);

struct SimulateOpts {
    std::string config_path;
    Timing timing = Timing::Slotted;
    double lambda = -1.0;  // < 0: topology's rate
    double horizon = 1500; // slots or time units
    int trials = 1;
    std::uint64_t seed = kDefaultSeed;
    int jobs = 0;
    int delay = 0;
    bool record_events = false;
    double sample_interval = 1.0;
    std::string out_dir = "out";
};
int cmd_simulate(const SimulateOpts& o);

struct SweepOpts {
    std::string config_path;
    std::vector<double> lambda_grid; // empty: 0.30..0.70 step 0.05
    double horizon = 20000;
    int trials = 20;
    std::uint64_t seed = kDefaultSeed;
    int jobs = 0;
    std::string out_dir = "out";
};
int cmd_sweep(const SweepOpts& o);

struct DriftScanOpts {
    std::string config_path;
    double lambda = -1.0; // < 0: topology's rate
    double scale = 100.0; // N
    double delta = 0.01;
    int box_cap = 300;
    std::string out_dir = "out";
};
int cmd_drift_scan(const DriftScanOpts& o);

struct StationaryOpts {
    std::string config_path;
    double lambda = -1.0;
    int cap = 60;
    bool dump_generator_matrix = false;
    std::string out_dir = "out";
};
int cmd_stationary(const StationaryOpts& o);

struct Fig4Opts {
    std::string config_path; // empty: the checked-in configs/fig4.json
    double lambda = -1.0;    // < 0: config value (0.45)
    double horizon = 1500;
    int trials = 500;
    std::uint64_t seed = kDefaultSeed;
    int jobs = 0;
    std::string out_dir = "out";
};
int cmd_reproduce_fig4(const Fig4Opts& o);

// Default location of the checked-in example configs.
std::string default_config_dir();

} // namespace wensim

#endif // WENSIM_HARNESS_HPP
