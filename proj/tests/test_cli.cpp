#include "rotavg/cli.hpp"

#include "support.hpp"

#include <doctest.h>

#include <sstream>
#include <string>
#include <vector>

using namespace rotavg;
using namespace rotavg::test;

namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

Outcome cli_run(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  Outcome o;
  o.code = cli::run(args, out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

SummaryRow summary_row(Algorithm algo, std::uint64_t seed, std::optional<std::size_t> steps, double final_ape,
                       std::size_t iters = cli::kReferenceBudget) {
  SummaryRow r;
  r.env = "env_" + std::to_string(seed);
  r.algorithm = algo;
  r.seed = seed;
  r.iters = iters;
  r.convergence.steps_to_5deg = steps;
  r.convergence.nauc = final_ape * 2;
  r.convergence.final_ape_deg = final_ape;
  r.final_record.ape_mean_deg = final_ape;
  r.final_record.ape_median_deg = final_ape;
  return r;
}

}  // namespace

TEST_CASE("gen validates sizes and writes deterministic files") {
  const auto dir = scratch_dir("cli_gen");
  CHECK(cli_run({"gen", "--n", "1", "--out", dir.string()}).code == cli::kExitUsage);
  CHECK(cli_run({"gen", "--count", "0", "--out", dir.string()}).code == cli::kExitUsage);

  const Outcome pair = cli_run({"gen", "--n", "2", "--k", "1", "--seed", "4", "--out", (dir / "pair").string()});
  REQUIRE(pair.code == cli::kExitOk);
  const auto env = load_env(dir / "pair" / "env_4.txt");
  CHECK(env.size() == 2);
  CHECK(env.edges().size() == 1);

  REQUIRE(cli_run({"gen", "--seed", "3", "--count", "2", "--out", (dir / "a").string()}).code == cli::kExitOk);
  REQUIRE(cli_run({"gen", "--seed", "3", "--count", "2", "--out", (dir / "b").string()}).code == cli::kExitOk);
  for (const char* name : {"env_3.txt", "env_4.txt"}) {
    CHECK(read_file(dir / "a" / name) == read_file(dir / "b" / name));
  }
  CHECK(read_file(dir / "a" / "env_3.txt") != read_file(dir / "a" / "env_4.txt"));

  GeneratorConfig cfg;
  cfg.seed = 3;
  CHECK(load_env(dir / "a" / "env_3.txt") == generate_uniform_env(cfg));

  CHECK(cli_run({"gen", "--n", "50", "--epsilon", "1e-6", "--out", dir.string()}).code == cli::kExitData);
}

TEST_CASE("run writes a trace, estimates and a summary row") {
  const auto dir = scratch_dir("cli_run");
  const Outcome zero = cli_run({"run", "--env", "gen:n=20,seed=1", "--algo", "mrp", "--iters", "0", "--out",
                                dir.string()});
  REQUIRE(zero.code == cli::kExitOk);
  const auto trace = load_trace(dir / "trace_mrp_0.csv");
  REQUIRE(trace.size() == 1);
  CHECK(trace[0].step == 0);
  const auto rows = load_summary(dir / "summary.csv");
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].env == "env_n20_k3_1");
  CHECK(rows[0].iters == 0);
  CHECK(load_estimates(dir / "estimates_mrp_0.txt").size() == 20);

  // A rerun replaces its row; another algorithm appends.
  REQUIRE(cli_run({"run", "--env", "gen:n=20,seed=1", "--algo", "mrp", "--iters", "0", "--out", dir.string()}).code ==
          cli::kExitOk);
  REQUIRE(cli_run({"run", "--env", "gen:n=20,seed=1", "--algo", "so3", "--iters", "0", "--out", dir.string()}).code ==
          cli::kExitOk);
  CHECK(load_summary(dir / "summary.csv").size() == 2);
}

TEST_CASE("run is byte-identical across reruns") {
  const auto dir = scratch_dir("cli_rerun");
  for (const char* sub : {"a", "b"}) {
    for (const char* algo : {"so3", "quat", "mrp"}) {
      const Outcome o = cli_run({"run", "--env", "gen:n=30,seed=2", "--algo", algo, "--iters", "3000", "--seed", "5",
                                 "--checkpoint-every", "500", "--out", (dir / sub).string()});
      REQUIRE(o.code == cli::kExitOk);
    }
  }
  std::size_t files = 0;
  std::size_t traces = 0;
  for (const auto& entry : fs::directory_iterator(dir / "a")) {
    ++files;
    traces += entry.path().filename().string().rfind("trace_", 0) == 0 ? 1 : 0;
    CHECK(read_file(entry.path()) == read_file(dir / "b" / entry.path().filename()));
  }
  // Three traces, three estimate files and the summary.
  CHECK(traces == 3);
  CHECK(files == 7);
}

TEST_CASE("run reports usage and data errors with the documented codes") {
  const auto dir = scratch_dir("cli_errors");
  CHECK(cli_run({"run", "--env", "gen:n=10", "--algo", "newton", "--out", dir.string()}).code == cli::kExitUsage);
  CHECK(cli_run({"run", "--env", "gen:n=10", "--batch", "0", "--out", dir.string()}).code == cli::kExitUsage);
  CHECK(cli_run({"run", "--env", "gen:n=10", "--init", "zero", "--out", dir.string()}).code == cli::kExitUsage);
  CHECK(cli_run({"run", "--env", "gen:n=10,q=3", "--out", dir.string()}).code == cli::kExitUsage);
  CHECK(cli_run({"run", "--out", dir.string()}).code == cli::kExitUsage);
  CHECK(cli_run({"frobnicate"}).code == cli::kExitUsage);
  CHECK(cli_run({}).code == cli::kExitUsage);
  CHECK(cli_run({"--help"}).code == cli::kExitOk);

  const Outcome missing = cli_run({"run", "--env", (dir / "nope.txt").string(), "--out", dir.string()});
  CHECK(missing.code == cli::kExitData);
  CHECK(missing.err.find("nope.txt") != std::string::npos);

  write_file(dir / "broken.txt", "ROTAVG-ENV 1\nnodes 3\n");
  CHECK(cli_run({"run", "--env", (dir / "broken.txt").string(), "--out", dir.string()}).code == cli::kExitData);
}

TEST_CASE("an inert MRP clamp is reported") {
  const auto dir = scratch_dir("cli_eta");
  const Outcome o =
      cli_run({"run", "--env", "gen:n=10", "--algo", "mrp", "--eta", "1e9", "--iters", "10", "--out", dir.string()});
  CHECK(o.code == cli::kExitOk);
  CHECK(o.err.find("warning") != std::string::npos);
  const Outcome quiet =
      cli_run({"run", "--env", "gen:n=10", "--algo", "so3", "--eta", "1e9", "--iters", "10", "--out", dir.string()});
  CHECK(quiet.err.find("warning") == std::string::npos);
}

TEST_CASE("aggregate milestones count a run iff it converged by the milestone") {
  const std::vector<SummaryRow> rows{summary_row(Algorithm::mrp, 0, 80000, 0.01),
                                     summary_row(Algorithm::mrp, 1, 30000, 0.02),
                                     summary_row(Algorithm::mrp, 2, std::nullopt, 40.0),
                                     summary_row(Algorithm::mrp, 3, 300000, 4.9)};
  const auto agg = cli::aggregate(rows);
  REQUIRE(agg.size() == 1);
  const auto& a = agg[0];
  CHECK(a.runs == 4);
  CHECK(a.converged == 3);
  CHECK(a.pct_converged[0] == doctest::Approx(25.0));
  CHECK(a.pct_converged[1] == doctest::Approx(25.0));
  CHECK(a.pct_converged[2] == doctest::Approx(50.0));
  CHECK(a.pct_converged[3] == doctest::Approx(50.0));
  CHECK(a.pct_converged[4] == doctest::Approx(75.0));
  CHECK(*a.mean_steps == doctest::Approx((80000.0 + 30000 + 300000) / 3));
  CHECK(*a.max_steps == 300000);
  CHECK(*a.min_steps == 30000);
  CHECK(a.final_median_deg == doctest::Approx((0.02 + 4.9) / 2));

  // Short budgets scale the milestones: 30 of 100 steps lands between the 70K and 100K equivalents.
  CHECK(cli::scaled_milestone(30000, 100) == 10);
  const std::vector<SummaryRow> short_rows{summary_row(Algorithm::so3, 0, 30, 1.0, 100)};
  const auto short_agg = cli::aggregate(short_rows);
  CHECK(short_agg[0].pct_converged[1] == 0.0);
  CHECK(short_agg[0].pct_converged[2] == 100.0);

  const std::vector<SummaryRow> none{summary_row(Algorithm::so3, 0, std::nullopt, 90.0)};
  CHECK_FALSE(cli::aggregate(none)[0].mean_steps.has_value());
  CHECK(cli::format_aggregate_csv(cli::aggregate(none)).find("NotConverged") != std::string::npos);
}

TEST_CASE("a single run aggregates to its own summary") {
  const auto dir = scratch_dir("cli_single");
  REQUIRE(cli_run({"run", "--env", "gen:n=20,seed=3", "--algo", "quat", "--iters", "20000", "--checkpoint-every",
                   "1000", "--out", dir.string()})
              .code == cli::kExitOk);
  const auto rows = load_summary(dir / "summary.csv");
  REQUIRE(rows.size() == 1);
  const Outcome agg = cli_run({"aggregate", "--summary", (dir / "summary.csv").string()});
  REQUIRE(agg.code == cli::kExitOk);
  CHECK(fs::exists(dir / "aggregate.csv"));
  const auto a = cli::aggregate(rows);
  REQUIRE(a.size() == 1);
  CHECK(a[0].runs == 1);
  CHECK(a[0].mean_nauc == rows[0].convergence.nauc);
  CHECK(a[0].final_mean_deg == *rows[0].final_record.ape_mean_deg);
  CHECK(a[0].final_median_deg == *rows[0].final_record.ape_mean_deg);
  if (rows[0].convergence.steps_to_5deg) {
    CHECK(*a[0].mean_steps == static_cast<double>(*rows[0].convergence.steps_to_5deg));
  }
}

TEST_CASE("bench runs a grid and the aggregate recomputes identically") {
  const auto dir = scratch_dir("cli_bench");
  const std::vector<std::string> args{"bench", "--gen-count", "2", "--gen-seed", "7", "--n", "20", "--algos",
                                      "so3,mrp", "--seeds", "0,1", "--iters", "4000", "--checkpoint-every", "500",
                                      "--jobs", "2", "--out", (dir / "a").string()};
  const Outcome a = cli_run(args);
  REQUIRE(a.code == cli::kExitOk);
  auto args_b = args;
  args_b.back() = (dir / "b").string();
  args_b[args_b.size() - 3] = "1";
  REQUIRE(cli_run(args_b).code == cli::kExitOk);

  CHECK(load_summary(dir / "a" / "summary.csv").size() == 8);
  CHECK_FALSE(fs::exists(dir / "a" / "failures.csv"));
  // Job count does not change the outputs.
  CHECK(read_file(dir / "a" / "summary.csv") == read_file(dir / "b" / "summary.csv"));
  CHECK(read_file(dir / "a" / "aggregate.csv") == read_file(dir / "b" / "aggregate.csv"));
  CHECK(read_file(dir / "a" / "env_n20_k3_7" / "trace_mrp_1.csv") ==
        read_file(dir / "b" / "env_n20_k3_7" / "trace_mrp_1.csv"));

  const std::string before = read_file(dir / "a" / "aggregate.csv");
  REQUIRE(cli_run({"aggregate", "--summary", (dir / "a" / "summary.csv").string(), "--out",
                   (dir / "re").string()})
              .code == cli::kExitOk);
  CHECK(read_file(dir / "re" / "aggregate.csv") == before);
  CHECK(read_file(dir / "re" / "aggregate.txt") == read_file(dir / "a" / "aggregate.txt"));
}

TEST_CASE("bench records failed runs and continues") {
  const auto dir = scratch_dir("cli_bench_fail");
  write_file(dir / "bad.txt", "not an environment\n");
  const Outcome o = cli_run({"bench", "--env", (dir / "bad.txt").string(), "--env", "gen:n=10,seed=1", "--algos",
                             "mrp", "--iters", "100", "--checkpoint-every", "50", "--out", (dir / "out").string()});
  CHECK(o.code == cli::kExitData);
  CHECK(fs::exists(dir / "out" / "failures.csv"));
  CHECK(load_summary(dir / "out" / "summary.csv").size() == 1);
}

TEST_CASE("bench plans from JSON") {
  const auto dir = scratch_dir("cli_plan");
  write_file(dir / "plan.json", R"({
    "envs": [{"generate": {"n": 12, "k": 3, "seeds": [1, 2]}}],
    "algorithms": ["quat"],
    "seeds": [3],
    "config": {"gamma": 0.5, "eta": 0.1, "batch": 4, "iters": 200, "checkpoint_every": 100},
    "out": "results"
  })");
  const Outcome o = cli_run({"bench", "--plan", (dir / "plan.json").string(), "--jobs", "1"});
  REQUIRE(o.code == cli::kExitOk);
  const auto rows = load_summary(dir / "results" / "summary.csv");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].env == "env_n12_k3_1");
  CHECK(rows[0].algorithm == Algorithm::quaternion);
  CHECK(rows[0].seed == 3);
  CHECK(rows[0].iters == 200);

  const cli::BenchPlan plan = cli::parse_bench_plan(
      R"({"envs": [{"generate": {"seed_range": [0, 5]}}], "algorithms": ["mrp", "so3"], "out": "x"})", dir);
  CHECK(plan.envs.size() == 5);
  CHECK(plan.algorithms.size() == 2);
  CHECK(plan.out == dir / "x");
  CHECK_THROWS_AS(cli::parse_bench_plan(R"({"envs": [], "algorithms": ["mrp"]})").validate(), cli::UsageError);
  CHECK_THROWS_AS(cli::parse_bench_plan(R"({"envs": [{"path": "e.txt"}], "algorithms": ["bogus"]})"),
                  cli::UsageError);
  CHECK_THROWS_AS(cli::parse_bench_plan("{not json"), cli::UsageError);
  write_file(dir / "bad.json", "[1, 2");
  CHECK(cli_run({"bench", "--plan", (dir / "bad.json").string()}).code == cli::kExitUsage);
}

TEST_CASE("import then eval on ground truth reports zero error") {
  const auto dir = scratch_dir("cli_import");
  std::mt19937_64 rng(9);
  std::vector<RotationMatrix> r;
  for (int i = 0; i < 5; ++i) r.push_back(random_rotation(rng));
  std::string edges;
  std::string gt;
  for (int i = 0; i < 5; ++i) {
    const int j = (i + 1) % 5;
    const RotationMatrix m = r[j] * r[i].transpose();
    edges += std::to_string(i) + " " + std::to_string(j);
    for (int k = 0; k < 9; ++k) edges += " " + format_double(m(k / 3, k % 3));
    edges += "\n";
    const UnitQuaternion q = matrix_to_quat(r[i]);
    gt += std::to_string(i) + " " + format_double(q.rho) + " " + format_double(q.nu.x()) + " " +
          format_double(q.nu.y()) + " " + format_double(q.nu.z()) + "\n";
  }
  write_file(dir / "EGs.txt", edges);
  write_file(dir / "gt.txt", gt);

  const Outcome imp = cli_run({"import", "--in", (dir / "EGs.txt").string(), "--gt", (dir / "gt.txt").string(),
                               "--out", (dir / "env.txt").string()});
  REQUIRE(imp.code == cli::kExitOk);
  CHECK(imp.out.find("nodes 5") != std::string::npos);

  save_estimates(EstimateSet::from_rotations(Algorithm::so3, r), dir / "est.txt");
  const Outcome ev = cli_run({"eval", "--env", (dir / "env.txt").string(), "--estimates", (dir / "est.txt").string(),
                              "--out", (dir / "report.txt").string()});
  REQUIRE(ev.code == cli::kExitOk);
  std::istringstream report(read_file(dir / "report.txt"));
  std::size_t metrics = 0;
  for (std::string key, value; report >> key >> value;) {
    if (key.find("_deg") != std::string::npos) {
      ++metrics;
      CHECK(std::stod(value) < 1e-9);
    }
  }
  CHECK(metrics == 6);

  save_estimates(EstimateSet::from_rotations(Algorithm::so3, {r[0], r[1]}), dir / "short.txt");
  CHECK(cli_run({"eval", "--env", (dir / "env.txt").string(), "--estimates", (dir / "short.txt").string()}).code ==
        cli::kExitUsage);
  CHECK(cli_run({"import", "--in", (dir / "missing.txt").string(), "--out", (dir / "x.txt").string()}).code ==
        cli::kExitData);
  write_file(dir / "empty.txt", "# nothing\n");
  CHECK(cli_run({"import", "--in", (dir / "empty.txt").string(), "--out", (dir / "x.txt").string()}).code ==
        cli::kExitData);
  CHECK(cli_run({"import", "--in", (dir / "EGs.txt").string(), "--out", (dir / "x.txt").string(), "--convention",
                 "sideways"})
            .code == cli::kExitUsage);
}

TEST_CASE("environment sources and names") {
  CHECK(cli::env_name(cli::parse_env_source("gen:seed=4")) == "env_4");
  CHECK(cli::env_name(cli::parse_env_source("gen:n=50,k=5,seed=4")) == "env_n50_k5_4");
  CHECK(cli::env_name(cli::parse_env_source("data/env_9.txt")) == "env_9");
  CHECK_THROWS_AS(cli::parse_env_source("gen:n=1"), cli::UsageError);
  CHECK_THROWS_AS(cli::parse_env_source("gen:n=abc"), cli::UsageError);
  CHECK_THROWS_AS(cli::parse_env_source(""), cli::UsageError);
}
