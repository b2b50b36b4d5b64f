// wensim command line front end. See README.md for the config format and
// output files. Exit codes: 0 success, 1 config error, 2 inconclusive.

#include <string>

#include "CLI11.hpp"

#include "wensim/harness.hpp"

namespace {

wensim::Timing parse_timing(const std::string& s) {
    return s == "async" ? wensim::Timing::Async : wensim::Timing::Slotted;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"wireless erasure network simulator and cut/stability analyzer"};
    app.require_subcommand(1);

    std::string config;
    std::string out_dir = "out";
    std::string timing = "slotted";
    std::uint64_t seed = wensim::kDefaultSeed;
    int jobs = 0;
    int delay = 0;

    auto add_common = [&](CLI::App* sub, bool config_required = true) {
        sub->add_option("--config", config, "topology config (JSON)")->required(config_required);
        sub->add_option("--out", out_dir, "output directory")->capture_default_str();
        return sub;
    };

    // analyze-cuts
    auto* cuts = add_common(app.add_subcommand("analyze-cuts", "cut capacities and the min-cut"));
    cuts->add_option("--delay", delay, "apply the feedback delay-chain transform first");

    // simulate
    auto* sim = add_common(app.add_subcommand("simulate", "run the forwarding protocol"));
    double lambda = -1.0;
    double horizon = 1500;
    long long slots = -1;
    int trials = 1;
    bool record_events = false;
    sim->add_option("--lambda", lambda, "arrival rate override");
    sim->add_option("--slots", slots, "slot count (slotted timing)");
    sim->add_option("--horizon", horizon, "horizon in time units (async) or slots")->capture_default_str();
    sim->add_option("--trials", trials, "independent trials")->capture_default_str();
    sim->add_option("--seed", seed, "base RNG seed")->capture_default_str();
    sim->add_option("--jobs", jobs, "worker threads (0 = auto)")->capture_default_str();
    sim->add_option("--timing", timing, "slotted|async")->capture_default_str()
        ->check(CLI::IsMember({"slotted", "async"}));
    sim->add_option("--delay", delay, "feedback delay D (delay-chain transform)");
    double sample_interval = 1.0;
    sim->add_option("--sample-interval", sample_interval,
                    "async queue sampling grid (time units)")->capture_default_str();
    sim->add_flag("--events", record_events, "record the event log in memory");

    // sweep
    auto* sweep = add_common(app.add_subcommand("sweep", "arrival-rate stability sweep"));
    std::vector<double> grid;
    double sweep_horizon = 20000;
    int sweep_trials = 20;
    sweep->add_option("--lambda", grid, "grid values (repeatable; default 0.30..0.70)");
    sweep->add_option("--slots", sweep_horizon, "slots per run")->capture_default_str();
    sweep->add_option("--trials", sweep_trials, "trials per grid point")->capture_default_str();
    sweep->add_option("--seed", seed, "base RNG seed")->capture_default_str();
    sweep->add_option("--jobs", jobs, "worker threads (0 = auto)")->capture_default_str();

    // drift-scan
    auto* drift = add_common(app.add_subcommand("drift-scan", "Lyapunov drift sign scan"));
    double drift_lambda = -1.0;
    double scale = 100.0;
    double delta = 0.01;
    int box = 300;
    drift->add_option("--lambda", drift_lambda, "arrival rate (default: config value)");
    drift->add_option("--N", scale, "Lyapunov coefficient coupling N")->capture_default_str();
    drift->add_option("--delta", delta, "Lyapunov delta")->capture_default_str();
    drift->add_option("--box", box, "per-coordinate scan cap M")->capture_default_str();

    // stationary
    auto* stat = add_common(app.add_subcommand("stationary", "truncated-chain stationary solver"));
    double stat_lambda = -1.0;
    int cap = 60;
    bool dump_gen = false;
    stat->add_option("--lambda", stat_lambda, "arrival rate override");
    stat->add_option("--cap", cap, "per-coordinate truncation cap M")->capture_default_str();
    stat->add_flag("--dump-generator", dump_gen, "also write generator.txt triplets");

    // reproduce-fig4
    auto* fig4 = add_common(
        app.add_subcommand("reproduce-fig4", "canned 2-relay study: 1500 slots x 500 trials"),
        /*config_required=*/false);
    double fig4_lambda = -1.0;
    long long fig4_slots = 1500;
    int fig4_trials = 500;
    fig4->add_option("--lambda", fig4_lambda, "arrival rate override");
    fig4->add_option("--slots", fig4_slots, "slot count")->capture_default_str();
    fig4->add_option("--trials", fig4_trials, "trial count")->capture_default_str();
    fig4->add_option("--seed", seed, "base RNG seed")->capture_default_str();
    fig4->add_option("--jobs", jobs, "worker threads (0 = auto)")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    if (cuts->parsed())
        return wensim::cmd_analyze_cuts({config, delay, out_dir});
    if (sim->parsed()) {
        wensim::SimulateOpts o;
        o.config_path = config;
        o.timing = parse_timing(timing);
        o.lambda = lambda;
        o.horizon = slots >= 0 ? static_cast<double>(slots) : horizon;
        o.trials = trials;
        o.seed = seed;
        o.jobs = jobs;
        o.delay = delay;
        o.record_events = record_events;
        o.sample_interval = sample_interval;
        o.out_dir = out_dir;
        return wensim::cmd_simulate(o);
    }
    if (sweep->parsed()) {
        wensim::SweepOpts o;
        o.config_path = config;
        o.lambda_grid = grid;
        o.horizon = sweep_horizon;
        o.trials = sweep_trials;
        o.seed = seed;
        o.jobs = jobs;
        o.out_dir = out_dir;
        return wensim::cmd_sweep(o);
    }
    if (drift->parsed())
        return wensim::cmd_drift_scan({config, drift_lambda, scale, delta, box, out_dir});
    if (stat->parsed())
        return wensim::cmd_stationary({config, stat_lambda, cap, dump_gen, out_dir});
    if (fig4->parsed()) {
        wensim::Fig4Opts o;
        o.config_path = config;
        o.lambda = fig4_lambda;
        o.horizon = static_cast<double>(fig4_slots);
        o.trials = fig4_trials;
        o.seed = seed;
        o.jobs = jobs;
        o.out_dir = out_dir;
        return wensim::cmd_reproduce_fig4(o);
    }
    return 1;
}
