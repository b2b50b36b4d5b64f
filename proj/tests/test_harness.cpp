#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "test_util.hpp"
#include "wensim/harness.hpp"
#include "wensim/lyapunov.hpp"

using namespace wensim;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "wensim_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string fig4_config() { return default_config_dir() + "/fig4.json"; }
std::string n1_config() { return default_config_dir() + "/n1_half.json"; }

} // namespace

TEST_CASE("checked-in configs load") {
    const Topology t = load_topology_file(fig4_config());
    CHECK(t.relay_count() == 2);
    CHECK(t.arrival_rate() == 0.45);
    CHECK(min_cut(t).rate == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(load_topology_file(n1_config()).relay_count() == 1);
    CHECK_THROWS_AS(load_topology_file("/no/such/file.json"), ValidationError);
}

TEST_CASE("analyze-cuts writes the cut table") {
    const auto dir = scratch("cuts");
    AnalyzeCutsOpts o;
    o.config_path = fig4_config();
    o.out_dir = dir.string();
    CHECK(cmd_analyze_cuts(o) == 0);
    const std::string body = slurp(dir / "cuts.json");
    CHECK(body.find("\"capacity\": 0.5") != std::string::npos);
    CHECK(body.find("\"capacity\": 1.4") != std::string::npos);
    CHECK(body.find("\"mask\": 2") != std::string::npos);

    o.config_path = "/no/such/file.json";
    CHECK(cmd_analyze_cuts(o) == 1);
}

TEST_CASE("analyze-cuts is invariant under the delay transform") {
    const auto dir_a = scratch("cuts_plain");
    const auto dir_b = scratch("cuts_delay");
    AnalyzeCutsOpts a;
    a.config_path = fig4_config();
    a.out_dir = dir_a.string();
    AnalyzeCutsOpts b = a;
    b.delay = 2;
    b.out_dir = dir_b.string();
    CHECK(cmd_analyze_cuts(a) == 0);
    CHECK(cmd_analyze_cuts(b) == 0);
    // Same min-cut rate in both reports.
    CHECK(slurp(dir_a / "cuts.json").find("\"capacity\": 0.5") != std::string::npos);
    const std::string delayed = slurp(dir_b / "cuts.json");
    const auto pos = delayed.find("\"min_cut\"");
    REQUIRE(pos != std::string::npos);
    CHECK(delayed.find("\"capacity\": 0.5", pos) != std::string::npos);
}

TEST_CASE("simulate outputs are byte-identical across reruns and job counts") {
    SimulateOpts o;
    o.config_path = fig4_config();
    o.horizon = 300;
    o.trials = 8;
    o.seed = 20240101;

    const auto dir1 = scratch("sim1");
    const auto dir2 = scratch("sim2");
    const auto dir3 = scratch("sim3");
    o.out_dir = dir1.string();
    o.jobs = 1;
    CHECK(cmd_simulate(o) == 0);
    o.out_dir = dir2.string();
    o.jobs = 2;
    CHECK(cmd_simulate(o) == 0);
    o.out_dir = dir3.string();
    o.jobs = 2;
    o.seed = 999;
    CHECK(cmd_simulate(o) == 0);

    CHECK(slurp(dir1 / "trace.csv") == slurp(dir2 / "trace.csv"));
    CHECK(slurp(dir1 / "summary.json") == slurp(dir2 / "summary.json"));
    CHECK(slurp(dir1 / "trace.csv") != slurp(dir3 / "trace.csv"));

    const std::string head = slurp(dir1 / "trace.csv").substr(0, 16);
    CHECK(head == "t,node,queue_len");
}

TEST_CASE("sweep validates the grid and emits rows") {
    SweepOpts bad;
    bad.config_path = fig4_config();
    bad.lambda_grid = {1.5};
    bad.out_dir = scratch("sweep_bad").string();
    CHECK(cmd_sweep(bad) == 1);

    SweepOpts zero;
    zero.config_path = fig4_config();
    zero.lambda_grid = {0.0};
    zero.horizon = 200;
    zero.trials = 2;
    zero.out_dir = scratch("sweep_zero").string();
    CHECK(cmd_sweep(zero) == 0);
    const std::string body = slurp(fs::path(zero.out_dir) / "summary.json");
    CHECK(body.find("\"tail_mean_source_queue\": 0.0") != std::string::npos);
    CHECK(body.find("\"slope_per_slot\": 0.0") != std::string::npos);
}

TEST_CASE("drift-scan exit codes track the verdict") {
    DriftScanOpts o;
    o.config_path = n1_config();
    o.lambda = 0.2;
    o.box_cap = 400;
    o.out_dir = scratch("drift_ok").string();
    CHECK(cmd_drift_scan(o) == 0);
    CHECK(slurp(fs::path(o.out_dir) / "drift.json").find("interior-finite") !=
          std::string::npos);

    o.box_cap = 200; // positive states still touch this boundary
    o.out_dir = scratch("drift_small").string();
    CHECK(cmd_drift_scan(o) == 2);
    CHECK(slurp(fs::path(o.out_dir) / "drift.json").find("boundary-reaching") !=
          std::string::npos);

    // M = 0 scans only the zero state.
    o.lambda = 0.0;
    o.box_cap = 0;
    o.out_dir = scratch("drift_zero").string();
    CHECK(cmd_drift_scan(o) == 0);
    CHECK(slurp(fs::path(o.out_dir) / "drift.json").find("\"scanned\": 1") != std::string::npos);
}

TEST_CASE("drift-scan outputs are reproducible") {
    DriftScanOpts o;
    o.config_path = n1_config();
    o.lambda = 0.3;
    o.box_cap = 350;
    const auto d1 = scratch("drift_rep1");
    const auto d2 = scratch("drift_rep2");
    o.out_dir = d1.string();
    const int rc1 = cmd_drift_scan(o);
    o.out_dir = d2.string();
    const int rc2 = cmd_drift_scan(o);
    CHECK(rc1 == rc2);
    CHECK(slurp(d1 / "drift.json") == slurp(d2 / "drift.json"));
}

TEST_CASE("stationary command reports expectations") {
    StationaryOpts o;
    o.config_path = n1_config(); // lambda 0.3 from the file
    o.cap = 50;
    o.dump_generator_matrix = true;
    o.out_dir = scratch("stat").string();
    CHECK(cmd_stationary(o) == 0);
    const std::string body = slurp(fs::path(o.out_dir) / "summary.json");
    CHECK(body.find("\"mean_queue\"") != std::string::npos);
    CHECK(fs::exists(fs::path(o.out_dir) / "generator.txt"));

    // lambda above the min-cut violates the solver precondition.
    o.lambda = 0.9;
    o.out_dir = scratch("stat_bad").string();
    CHECK(cmd_stationary(o) == 1);
}

TEST_CASE("reproduce-fig4 with a single trial skips the ordering assertion") {
    Fig4Opts o;
    o.trials = 1;
    o.horizon = 300;
    o.out_dir = scratch("fig4_single").string();
    CHECK(cmd_reproduce_fig4(o) == 0);
    const std::string body = slurp(fs::path(o.out_dir) / "summary.json");
    CHECK(body.find("\"checked\": false") != std::string::npos);

    // lambda override 0: all-zero curves.
    Fig4Opts quiet;
    quiet.lambda = 0.0;
    quiet.trials = 3;
    quiet.horizon = 200;
    quiet.out_dir = scratch("fig4_quiet").string();
    CHECK(cmd_reproduce_fig4(quiet) == 0);
    const std::string trace = slurp(fs::path(quiet.out_dir) / "trace.csv");
    CHECK(trace.find(",s,0\n") != std::string::npos);
    CHECK(trace.find(",s,0.") == std::string::npos); // never a fractional mean
}

TEST_CASE("analyze-cuts on a bare source-destination link") {
    const auto dir = scratch("cuts_line");
    const fs::path cfg = dir / "line.json";
    {
        std::ofstream out(cfg);
        out << R"({"relays": 0, "arrival_rate": 0.1,
                   "edges": [{"from": "s", "to": "d", "erasure": 0.3}]})";
    }
    AnalyzeCutsOpts o;
    o.config_path = cfg.string();
    o.out_dir = dir.string();
    CHECK(cmd_analyze_cuts(o) == 0);
    CHECK(slurp(dir / "cuts.json").find("\"capacity\": 0.7") != std::string::npos);
}

TEST_CASE("config round trip preserves cuts for random networks") {
    const auto dir = scratch("roundtrip");
    Rng rng(404);
    for (int rep = 0; rep < 100; ++rep) {
        const int n = 1 + static_cast<int>(rng.below(6));
        const Topology t = testutil::random_topology(rng, n, rng.uniform());
        std::ostringstream cfg;
        cfg << "{\"relays\": " << n << ", \"arrival_rate\": " << t.arrival_rate()
            << ", \"edges\": [";
        cfg.precision(17);
        bool first = true;
        for (NodeId i = 0; i <= n; ++i)
            for (NodeId j = 1; j <= n + 1; ++j) {
                if (i == j || t.erasure(i, j) == 1.0) continue;
                if (!first) cfg << ",";
                first = false;
                cfg << "{\"from\": " << (i == 0 ? std::string("\"s\"") : std::to_string(i))
                    << ", \"to\": " << (j == n + 1 ? std::string("\"d\"") : std::to_string(j))
                    << ", \"erasure\": " << t.erasure(i, j) << "}";
            }
        cfg << "]}";
        const Topology back = topology_from_json_text(cfg.str());
        const MinCut a = min_cut(t);
        const MinCut b = min_cut(back);
        CHECK(a.cut.mask == b.cut.mask);
        CHECK(testutil::rel_err(a.rate, b.rate) < 1e-12);
        for (std::uint32_t mask = 0; mask < t.cut_count(); ++mask)
            CHECK(testutil::rel_err(cut_capacity(t, CutSet{mask}),
                                    cut_capacity(back, CutSet{mask})) < 1e-12);
    }
}

TEST_CASE("drift-scan near the stability threshold certifies a finite set") {
    const Topology t = load_topology_file(n1_config());
    DriftScanOpts o;
    o.config_path = n1_config();
    o.lambda = 0.9 * lemma_threshold(t, 100.0, 0.01);
    o.box_cap = 1300;
    o.out_dir = scratch("drift_thresh").string();
    CHECK(cmd_drift_scan(o) == 0);
    CHECK(slurp(fs::path(o.out_dir) / "drift.json").find("interior-finite") !=
          std::string::npos);
}

TEST_CASE("reproduce-fig4 confirms the queue ordering at moderate scale") {
    Fig4Opts o;
    o.trials = 60;
    o.horizon = 800;
    o.jobs = 2;
    o.out_dir = scratch("fig4_mid").string();
    CHECK(cmd_reproduce_fig4(o) == 0);
    const std::string body = slurp(fs::path(o.out_dir) / "summary.json");
    CHECK(body.find("\"source_ge_relay2_ge_relay1\": true") != std::string::npos);
}

TEST_CASE("slope fitting") {
    std::vector<double> t, v;
    for (int k = 0; k < 50; ++k) {
        t.push_back(k);
        v.push_back(3.0 + 2.0 * k);
    }
    CHECK(linear_slope(t, v, 0, t.size()) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(linear_slope(t, v, 10, 20) == doctest::Approx(2.0).epsilon(1e-12));
}
