#include "rotavg/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace rotavg::cli {

namespace {

using json = nlohmann::json;

template <typename T>
T parse_value(std::string_view text, std::string_view what) {
  T v{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw UsageError("invalid " + std::string(what) + " '" + std::string(text) + "'");
  }
  return v;
}

Algorithm algorithm_or_throw(std::string_view name) {
  const auto algo = parse_algorithm(name);
  if (!algo) throw UsageError("unknown algorithm '" + std::string(name) + "' (expected so3, quat or mrp)");
  return *algo;
}

BatchReduction reduction_or_throw(std::string_view name) {
  if (name == "sum") return BatchReduction::sum;
  if (name == "mean") return BatchReduction::mean;
  throw UsageError("unknown batch reduction '" + std::string(name) + "' (expected sum or mean)");
}

InitMode init_or_throw(std::string_view name) {
  if (name == "identity") return InitMode::identity;
  if (name == "haar" || name == "haar_random") return InitMode::haar_random;
  throw UsageError("unknown init mode '" + std::string(name) + "' (expected identity or haar)");
}

std::string sanitize(std::string name) {
  std::replace_if(name.begin(), name.end(), [](char c) { return c == ',' || c == '\n' || c == '\r'; }, '_');
  return name;
}

std::size_t default_jobs() {
  if (const char* env = std::getenv("ROTAVG_JOBS")) {
    std::size_t v = 0;
    const std::string_view s(env);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec == std::errc() && ptr == s.data() + s.size() && v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void check_config(const OptimizerConfig& cfg) {
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

std::string fmt(double v) { return std::isfinite(v) ? format_double(v) : std::string("n/a"); }
std::string fmt(const std::optional<double>& v) { return v ? format_double(*v) : std::string("n/a"); }

void warn_if_clamp_inert(const OptimizerConfig& cfg, std::ostream& err) {
  if (cfg.algorithm == Algorithm::mrp && cfg.eta >= 1e6) {
    err << "warning: eta=" << format_double(cfg.eta) << " leaves the MRP gradient clamp inert\n";
  }
}

// Replaces the row with the same (env, algorithm, seed) or appends it.
void merge_summary(const std::filesystem::path& path, const SummaryRow& row, std::ostream& err) {
  std::vector<SummaryRow> rows;
  if (std::filesystem::exists(path)) {
    try {
      rows = load_summary(path);
    } catch (const std::exception& e) {
      err << "warning: replacing unreadable " << path.string() << " (" << e.what() << ")\n";
    }
  }
  const auto same = [&](const SummaryRow& r) {
    return r.env == row.env && r.algorithm == row.algorithm && r.seed == row.seed;
  };
  if (auto it = std::find_if(rows.begin(), rows.end(), same); it != rows.end()) {
    *it = row;
  } else {
    rows.push_back(row);
  }
  export_summary(rows, path);
}

// ---------------------------------------------------------------------------

struct GenFlags {
  std::size_t n = 100;
  std::size_t k = 3;
  std::optional<double> epsilon;
  std::uint64_t seed = 0;
  std::size_t count = 1;
  std::string out = ".";
};

int cmd_gen(const GenFlags& f, std::ostream& out, std::ostream& err) {
  if (f.n < 2) throw UsageError("--n must be at least 2");
  if (!f.epsilon && f.k < 1) throw UsageError("--k must be at least 1");
  if (f.epsilon && !(*f.epsilon > 0.0)) throw UsageError("--epsilon must be positive");
  if (f.count < 1) throw UsageError("--count must be at least 1");
  int status = kExitOk;
  for (std::size_t c = 0; c < f.count; ++c) {
    GeneratorConfig cfg;
    cfg.n_nodes = f.n;
    cfg.seed = f.seed + c;
    if (f.epsilon) {
      cfg.neighborhood = EpsilonNeighborhood{*f.epsilon};
    } else {
      cfg.neighborhood = KnnNeighborhood{f.k};
    }
    const auto path = std::filesystem::path(f.out) / ("env_" + std::to_string(cfg.seed) + ".txt");
    try {
      save_env(generate_uniform_env(cfg), path);
      out << path.string() << '\n';
    } catch (const ConnectivityFailure& e) {
      err << "error: seed " << cfg.seed << ": " << e.what() << '\n';
      status = kExitData;
    }
  }
  return status;
}

struct RunFlags {
  std::string env;
  std::string algo = "mrp";
  double gamma = 0.5;
  double eta = 0.1;
  std::size_t batch = 8;
  std::size_t iters = 300000;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 1000;
  std::string init = "haar";
  std::string reduction = "sum";
  std::string out = ".";
};

int cmd_run(const RunFlags& f, std::ostream& out, std::ostream& err) {
  OptimizerConfig cfg;
  cfg.algorithm = algorithm_or_throw(f.algo);
  cfg.gamma = f.gamma;
  cfg.eta = f.eta;
  cfg.batch_size = f.batch;
  cfg.max_iters = f.iters;
  cfg.seed = f.seed;
  cfg.checkpoint_every = f.checkpoint_every;
  cfg.init = init_or_throw(f.init);
  cfg.reduction = reduction_or_throw(f.reduction);
  check_config(cfg);
  warn_if_clamp_inert(cfg, err);

  const EnvSource source = parse_env_source(f.env);
  const RotationEnvironment env = materialize(source);
  const RunResult result = run_averaging(env, cfg);

  const std::filesystem::path dir(f.out);
  const std::string tag = std::string(to_string(cfg.algorithm)) + "_" + std::to_string(cfg.seed);
  export_trace(result.trace, dir / ("trace_" + tag + ".csv"));
  save_estimates(result.estimates, dir / ("estimates_" + tag + ".txt"));
  const SummaryRow row = make_summary_row(env_name(source), cfg, result.trace);
  merge_summary(dir / "summary.csv", row, err);

  out << row.env << ' ' << to_string(cfg.algorithm) << " seed=" << cfg.seed << " steps_to_5deg="
      << (row.convergence.steps_to_5deg ? std::to_string(*row.convergence.steps_to_5deg)
                                        : std::string(kNotConverged))
      << " final_ape_mean_deg=" << fmt(row.final_record.ape_mean_deg)
      << " final_rel_mean_deg=" << fmt(row.final_record.rel_mean_deg) << '\n';
  return kExitOk;
}

void write_aggregate(std::span<const SummaryRow> rows, const std::filesystem::path& dir, std::ostream& out) {
  const auto agg = aggregate(rows);
  const std::string text = format_aggregate_text(agg);
  write_file(dir / "aggregate.txt", text);
  write_file(dir / "aggregate.csv", format_aggregate_csv(agg));
  out << text;
}

struct BenchFlags {
  std::string plan;
  std::vector<std::string> envs;
  std::size_t gen_count = 0;
  std::uint64_t gen_seed = 0;
  std::size_t n = 100;
  std::size_t k = 3;
  std::vector<std::string> algos;
  std::vector<std::uint64_t> seeds;
  double gamma = 0.5;
  double eta = 0.1;
  std::size_t batch = 8;
  std::size_t iters = 300000;
  std::size_t checkpoint_every = 1000;
  std::string init = "haar";
  std::string reduction = "sum";
  std::size_t jobs = 0;
  std::string out;
};

int cmd_bench(const BenchFlags& f, const CLI::App& app, std::ostream& out, std::ostream& err) {
  BenchPlan plan;
  if (!f.plan.empty()) {
    const std::filesystem::path plan_path(f.plan);
    plan = parse_bench_plan(read_file(plan_path), plan_path.parent_path());
  } else {
    plan.config.init = InitMode::haar_random;
  }
  // Explicit flags override the plan file.
  const auto given = [&](const char* name) { return app.count(name) > 0; };
  for (const auto& e : f.envs) plan.envs.push_back(parse_env_source(e));
  if (f.gen_count > 0) {
    for (std::size_t c = 0; c < f.gen_count; ++c) {
      GeneratorConfig g;
      g.n_nodes = f.n;
      g.seed = f.gen_seed + c;
      g.neighborhood = KnnNeighborhood{f.k};
      plan.envs.push_back(GeneratedSource{g});
    }
  }
  if (given("--algos")) {
    plan.algorithms.clear();
    for (const auto& a : f.algos) plan.algorithms.push_back(algorithm_or_throw(a));
  }
  if (plan.algorithms.empty() && f.plan.empty()) {
    plan.algorithms = {Algorithm::so3, Algorithm::quaternion, Algorithm::mrp};
  }
  if (given("--seeds")) plan.seeds = f.seeds;
  if (plan.seeds.empty() && f.plan.empty()) plan.seeds = {0};
  if (f.plan.empty() || given("--gamma")) plan.config.gamma = f.gamma;
  if (f.plan.empty() || given("--eta")) plan.config.eta = f.eta;
  if (f.plan.empty() || given("--batch")) plan.config.batch_size = f.batch;
  if (f.plan.empty() || given("--iters")) plan.config.max_iters = f.iters;
  if (f.plan.empty() || given("--checkpoint-every")) plan.config.checkpoint_every = f.checkpoint_every;
  if (f.plan.empty() || given("--init")) plan.config.init = init_or_throw(f.init);
  if (f.plan.empty() || given("--reduction")) plan.config.reduction = reduction_or_throw(f.reduction);
  if (!f.out.empty()) plan.out = f.out;
  plan.validate();

  struct Cell {
    std::size_t env = 0;
    Algorithm algorithm = Algorithm::mrp;
    std::uint64_t seed = 0;
  };
  std::vector<Cell> cells;
  for (std::size_t e = 0; e < plan.envs.size(); ++e) {
    for (const Algorithm a : plan.algorithms) {
      for (const auto s : plan.seeds) cells.push_back({e, a, s});
    }
  }

  std::vector<std::string> names;
  std::vector<std::optional<RotationEnvironment>> envs(plan.envs.size());
  std::vector<std::string> env_errors(plan.envs.size());
  for (std::size_t e = 0; e < plan.envs.size(); ++e) {
    names.push_back(env_name(plan.envs[e]));
    try {
      envs[e] = materialize(plan.envs[e]);
    } catch (const std::exception& ex) {
      env_errors[e] = ex.what();
    }
  }
  {
    auto sorted = names;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw UsageError("environment names in the plan are not unique");
    }
  }
  if (std::count(plan.algorithms.begin(), plan.algorithms.end(), Algorithm::mrp) > 0) {
    OptimizerConfig probe = plan.config;
    probe.algorithm = Algorithm::mrp;
    warn_if_clamp_inert(probe, err);
  }

  std::vector<std::optional<SummaryRow>> results(cells.size());
  std::vector<std::string> failures(cells.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex log_mutex;
  const auto worker = [&] {
    for (std::size_t idx = next++; idx < cells.size(); idx = next++) {
      const Cell& cell = cells[idx];
      try {
        if (!envs[cell.env]) throw std::runtime_error(env_errors[cell.env]);
        OptimizerConfig cfg = plan.config;
        cfg.algorithm = cell.algorithm;
        cfg.seed = cell.seed;
        const RunResult result = run_averaging(*envs[cell.env], cfg);
        const std::string tag = std::string(to_string(cfg.algorithm)) + "_" + std::to_string(cfg.seed);
        export_trace(result.trace, plan.out / names[cell.env] / ("trace_" + tag + ".csv"));
        results[idx] = make_summary_row(names[cell.env], cfg, result.trace);
      } catch (const std::exception& ex) {
        failures[idx] = ex.what();
      }
      const std::size_t finished = ++done;
      const std::lock_guard lock(log_mutex);
      err << '[' << finished << '/' << cells.size() << "] " << names[cell.env] << ' ' << to_string(cell.algorithm)
          << " seed=" << cell.seed << (failures[idx].empty() ? "" : " FAILED: " + failures[idx]) << '\n';
    }
  };
  const std::size_t jobs = std::min(f.jobs > 0 ? f.jobs : default_jobs(), std::max<std::size_t>(cells.size(), 1));
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
  }

  std::vector<SummaryRow> rows;
  std::string failure_csv = "env,algorithm,seed,error\n";
  std::size_t failed = 0;
  for (std::size_t idx = 0; idx < cells.size(); ++idx) {
    if (results[idx]) {
      rows.push_back(*results[idx]);
    } else {
      ++failed;
      failure_csv += names[cells[idx].env] + ',' + std::string(to_string(cells[idx].algorithm)) + ',' +
                     std::to_string(cells[idx].seed) + ',' + sanitize(failures[idx]) + '\n';
    }
  }
  export_summary(rows, plan.out / "summary.csv");
  const auto failure_path = plan.out / "failures.csv";
  if (failed > 0) {
    write_file(failure_path, failure_csv);
  } else {
    std::error_code ec;
    std::filesystem::remove(failure_path, ec);
  }
  write_aggregate(rows, plan.out, out);
  if (failed > 0) {
    err << failed << " of " << cells.size() << " runs failed; see " << failure_path.string() << '\n';
    return kExitData;
  }
  return kExitOk;
}

struct ImportFlags {
  std::string in;
  std::string gt;
  std::string out;
  bool strict = false;
  std::string convention = "second_from_first";
};

int cmd_import(const ImportFlags& f, std::ostream& out) {
  ImportOptions opts;
  if (!f.gt.empty()) opts.ground_truth = f.gt;
  opts.strict = f.strict;
  if (f.convention == "second_from_first") {
    opts.convention = RelativeConvention::second_from_first;
  } else if (f.convention == "first_from_second") {
    opts.convention = RelativeConvention::first_from_second;
  } else {
    throw UsageError("unknown --convention '" + f.convention + "'");
  }
  const ImportResult result = import_1dsfm(f.in, opts);
  save_env(result.env, f.out);
  const ImportReport& r = result.report;
  out << "rows_read " << r.rows_read << '\n'
      << "rows_dropped_not_rotation " << r.rows_dropped_not_rotation << '\n'
      << "rows_dropped_self_loop " << r.rows_dropped_self_loop << '\n'
      << "rows_dropped_no_ground_truth " << r.rows_dropped_no_ground_truth << '\n'
      << "nodes_seen " << r.nodes_seen << '\n'
      << "nodes_dropped " << r.nodes_dropped << '\n'
      << "edges_dropped " << r.edges_dropped << '\n'
      << "nodes " << result.env.size() << '\n'
      << "edges " << result.env.edges().size() << '\n';
  return kExitOk;
}

struct EvalFlags {
  std::string env;
  std::string estimates;
  std::string out;
};

int cmd_eval(const EvalFlags& f, std::ostream& out) {
  const RotationEnvironment env = materialize(parse_env_source(f.env));
  const auto estimates = load_estimates(f.estimates);
  if (estimates.size() != env.size()) {
    throw UsageError("estimate set has " + std::to_string(estimates.size()) + " nodes, environment has " +
                     std::to_string(env.size()));
  }
  const TraceRecord rec = evaluate_checkpoint(0, estimates, env);
  std::ostringstream report;
  report << "nodes " << env.size() << '\n'
         << "edges " << env.edges().size() << '\n'
         << "ape_mean_deg " << fmt(rec.ape_mean_deg) << '\n'
         << "ape_median_deg " << fmt(rec.ape_median_deg) << '\n'
         << "rel_mean_deg " << fmt(rec.rel_mean_deg) << '\n'
         << "rel_median_deg " << fmt(rec.rel_median_deg) << '\n'
         << "abs_mean_deg " << fmt(rec.abs_mean_deg) << '\n'
         << "abs_median_deg " << fmt(rec.abs_median_deg) << '\n';
  if (!f.out.empty()) write_file(f.out, report.str());
  out << report.str();
  return kExitOk;
}

struct AggregateFlags {
  std::string summary;
  std::string out;
};

int cmd_aggregate(const AggregateFlags& f, std::ostream& out) {
  const auto rows = load_summary(f.summary);
  const std::filesystem::path dir =
      f.out.empty() ? std::filesystem::path(f.summary).parent_path() : std::filesystem::path(f.out);
  write_aggregate(rows, dir, out);
  return kExitOk;
}

}  // namespace

// ---------------------------------------------------------------------------

EnvSource parse_env_source(std::string_view spec) {
  if (spec.empty()) throw UsageError("empty environment source");
  if (spec.substr(0, 4) != "gen:" && spec != "gen") return FileSource{std::filesystem::path(spec)};
  GeneratedSource g;
  std::string_view rest = spec.size() > 4 ? spec.substr(4) : std::string_view{};
  while (!rest.empty()) {
    const std::size_t comma = rest.find(',');
    const std::string_view item = rest.substr(0, comma);
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    const std::size_t eq = item.find('=');
    if (eq == std::string_view::npos) throw UsageError("malformed generator key '" + std::string(item) + "'");
    const std::string_view key = item.substr(0, eq);
    const std::string_view value = item.substr(eq + 1);
    if (key == "n") {
      g.config.n_nodes = parse_value<std::size_t>(value, "n");
    } else if (key == "k") {
      g.config.neighborhood = KnnNeighborhood{parse_value<std::size_t>(value, "k")};
    } else if (key == "eps" || key == "epsilon") {
      g.config.neighborhood = EpsilonNeighborhood{parse_value<double>(value, "epsilon")};
    } else if (key == "seed") {
      g.config.seed = parse_value<std::uint64_t>(value, "seed");
    } else {
      throw UsageError("unknown generator key '" + std::string(key) + "'");
    }
  }
  if (g.config.n_nodes < 2) throw UsageError("generated environments need n >= 2");
  return g;
}

std::string env_name(const EnvSource& source) {
  if (const auto* file = std::get_if<FileSource>(&source)) return sanitize(file->path.stem().string());
  const auto& cfg = std::get<GeneratedSource>(source).config;
  const std::string seed = std::to_string(cfg.seed);
  if (const auto* knn = std::get_if<KnnNeighborhood>(&cfg.neighborhood)) {
    if (cfg.n_nodes == 100 && knn->k == 3) return "env_" + seed;
    return "env_n" + std::to_string(cfg.n_nodes) + "_k" + std::to_string(knn->k) + "_" + seed;
  }
  return "env_n" + std::to_string(cfg.n_nodes) + "_eps" +
         format_double(std::get<EpsilonNeighborhood>(cfg.neighborhood).epsilon) + "_" + seed;
}

RotationEnvironment materialize(const EnvSource& source) {
  if (const auto* file = std::get_if<FileSource>(&source)) return load_env(file->path);
  try {
    return generate_uniform_env(std::get<GeneratedSource>(source).config);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

void BenchPlan::validate() const {
  if (envs.empty()) throw UsageError("bench plan has no environments");
  if (algorithms.empty()) throw UsageError("bench plan has no algorithms");
  if (seeds.empty()) throw UsageError("bench plan has no seeds");
  if (out.empty()) throw UsageError("bench plan has no output directory");
  check_config(config);
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec || !std::filesystem::is_directory(out)) {
    throw FileError("cannot create output directory " + out.string());
  }
}

BenchPlan parse_bench_plan(std::string_view json_text, const std::filesystem::path& base_dir) {
  BenchPlan plan;
  try {
    const json doc = json::parse(json_text);
    const auto resolve = [&](const std::string& p) {
      const std::filesystem::path path(p);
      return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
    };
    for (const auto& e : doc.value("envs", json::array())) {
      if (e.contains("path")) {
        plan.envs.push_back(FileSource{resolve(e.at("path").get<std::string>())});
        continue;
      }
      const json& g = e.at("generate");
      GeneratorConfig base;
      base.n_nodes = g.value("n", std::size_t{100});
      if (g.contains("epsilon")) {
        base.neighborhood = EpsilonNeighborhood{g.at("epsilon").get<double>()};
      } else {
        base.neighborhood = KnnNeighborhood{g.value("k", std::size_t{3})};
      }
      std::vector<std::uint64_t> seeds;
      if (g.contains("seeds")) seeds = g.at("seeds").get<std::vector<std::uint64_t>>();
      if (g.contains("seed_range")) {
        const auto range = g.at("seed_range").get<std::array<std::uint64_t, 2>>();
        for (auto s = range[0]; s < range[1]; ++s) seeds.push_back(s);
      }
      if (g.contains("seed")) seeds.push_back(g.at("seed").get<std::uint64_t>());
      if (seeds.empty()) seeds.push_back(0);
      for (const auto s : seeds) {
        GeneratorConfig cfg = base;
        cfg.seed = s;
        plan.envs.push_back(GeneratedSource{cfg});
      }
    }
    for (const auto& a : doc.value("algorithms", json::array())) {
      plan.algorithms.push_back(algorithm_or_throw(a.get<std::string>()));
    }
    plan.seeds = doc.value("seeds", std::vector<std::uint64_t>{});
    if (doc.contains("config")) {
      const json& c = doc.at("config");
      plan.config.gamma = c.value("gamma", plan.config.gamma);
      plan.config.eta = c.value("eta", plan.config.eta);
      plan.config.batch_size = c.value("batch", plan.config.batch_size);
      plan.config.max_iters = c.value("iters", plan.config.max_iters);
      plan.config.checkpoint_every = c.value("checkpoint_every", plan.config.checkpoint_every);
      if (c.contains("init")) plan.config.init = init_or_throw(c.at("init").get<std::string>());
      if (c.contains("reduction")) {
        plan.config.reduction = reduction_or_throw(c.at("reduction").get<std::string>());
      }
    }
    if (doc.contains("out")) plan.out = resolve(doc.at("out").get<std::string>());
  } catch (const json::exception& e) {
    throw UsageError(std::string("invalid bench plan: ") + e.what());
  }
  return plan;
}

std::size_t scaled_milestone(std::size_t milestone, std::size_t iters) {
  if (iters == kReferenceBudget) return milestone;
  return static_cast<std::size_t>(std::llround(static_cast<double>(milestone) * static_cast<double>(iters) /
                                               static_cast<double>(kReferenceBudget)));
}

std::vector<AggregateRow> aggregate(std::span<const SummaryRow> rows) {
  std::vector<AggregateRow> out;
  for (const Algorithm algo : {Algorithm::so3, Algorithm::quaternion, Algorithm::mrp}) {
    std::vector<const SummaryRow*> group;
    for (const auto& r : rows) {
      if (r.algorithm == algo && r.final_record.ape_mean_deg && std::isfinite(r.convergence.nauc)) {
        group.push_back(&r);
      }
    }
    if (group.empty()) continue;
    AggregateRow a;
    a.algorithm = algo;
    a.runs = group.size();
    std::vector<double> steps;
    std::vector<double> naucs;
    std::vector<double> finals;
    for (const SummaryRow* r : group) {
      naucs.push_back(r->convergence.nauc);
      finals.push_back(*r->final_record.ape_mean_deg);
      if (const auto s = r->convergence.steps_to_5deg) {
        steps.push_back(static_cast<double>(*s));
        a.max_steps = std::max(a.max_steps.value_or(0), *s);
        a.min_steps = std::min(a.min_steps.value_or(std::numeric_limits<std::size_t>::max()), *s);
      }
      for (std::size_t m = 0; m < kMilestones.size(); ++m) {
        const auto s = r->convergence.steps_to_5deg;
        if (s && *s <= scaled_milestone(kMilestones[m], r->iters)) a.pct_converged[m] += 1.0;
      }
    }
    a.converged = steps.size();
    if (!steps.empty()) a.mean_steps = compensated_sum(steps) / static_cast<double>(steps.size());
    const auto n = static_cast<double>(group.size());
    a.mean_nauc = compensated_sum(naucs) / n;
    a.max_nauc = *std::max_element(naucs.begin(), naucs.end());
    a.min_nauc = *std::min_element(naucs.begin(), naucs.end());
    for (auto& p : a.pct_converged) p = 100.0 * p / n;
    a.final_mean_deg = compensated_sum(finals) / n;
    a.final_median_deg = median(finals);
    out.push_back(a);
  }
  return out;
}

std::string format_aggregate_csv(std::span<const AggregateRow> rows) {
  std::string out =
      "algorithm,runs,converged,mean_steps,max_steps,min_steps,mean_nauc,max_nauc,min_nauc,"
      "pct_conv_30K,pct_conv_70K,pct_conv_100K,pct_conv_150K,pct_conv_300K,final_mean_deg,final_median_deg\n";
  const auto opt = [](const auto& v) -> std::string {
    if (!v) return std::string(kNotConverged);
    if constexpr (std::is_same_v<std::decay_t<decltype(*v)>, double>) {
      return format_double(*v);
    } else {
      return std::to_string(*v);
    }
  };
  for (const auto& a : rows) {
    out += std::string(to_string(a.algorithm)) + ',' + std::to_string(a.runs) + ',' + std::to_string(a.converged) +
           ',' + opt(a.mean_steps) + ',' + opt(a.max_steps) + ',' + opt(a.min_steps) + ',' +
           format_double(a.mean_nauc) + ',' + format_double(a.max_nauc) + ',' + format_double(a.min_nauc);
    for (const double p : a.pct_converged) out += ',' + format_double(p);
    out += ',' + format_double(a.final_mean_deg) + ',' + format_double(a.final_median_deg) + '\n';
  }
  return out;
}

std::string format_aggregate_text(std::span<const AggregateRow> rows) {
  std::ostringstream s;
  const auto fixed = [](double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return std::string(buf);
  };
  const auto steps = [&](const auto& v) -> std::string {
    if (!v) return "NotConv";
    return fixed(static_cast<double>(*v) / 1000.0, 1) + "K";
  };
  char line[256];
  s << "Steps until mean pairwise error < 5 deg\n";
  std::snprintf(line, sizeof line, "%-6s %5s %6s %9s %9s %9s %10s %10s %10s\n", "algo", "runs", "conv", "mean",
                "max", "min", "nAUC mean", "nAUC max", "nAUC min");
  s << line;
  for (const auto& a : rows) {
    std::snprintf(line, sizeof line, "%-6s %5zu %6zu %9s %9s %9s %10s %10s %10s\n",
                  std::string(to_string(a.algorithm)).c_str(), a.runs, a.converged, steps(a.mean_steps).c_str(),
                  steps(a.max_steps).c_str(), steps(a.min_steps).c_str(), fixed(a.mean_nauc, 3).c_str(),
                  fixed(a.max_nauc, 3).c_str(), fixed(a.min_nauc, 3).c_str());
    s << line;
  }
  s << "\nPercent converged by milestone (milestones scale with iters/300K)\n";
  std::snprintf(line, sizeof line, "%-6s %7s %7s %7s %7s %7s %12s %12s\n", "algo", "30K", "70K", "100K", "150K",
                "300K", "final mean", "final median");
  s << line;
  for (const auto& a : rows) {
    std::snprintf(line, sizeof line, "%-6s %7s %7s %7s %7s %7s %12s %12s\n",
                  std::string(to_string(a.algorithm)).c_str(), fixed(a.pct_converged[0], 1).c_str(),
                  fixed(a.pct_converged[1], 1).c_str(), fixed(a.pct_converged[2], 1).c_str(),
                  fixed(a.pct_converged[3], 1).c_str(), fixed(a.pct_converged[4], 1).c_str(),
                  fixed(a.final_mean_deg, 4).c_str(), fixed(a.final_median_deg, 4).c_str());
    s << line;
  }
  return s.str();
}

// ---------------------------------------------------------------------------

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stochastic rotation averaging: SO(3), quaternion and MRP"};
  app.require_subcommand(1);

  GenFlags gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate random environments");
  gen_cmd->add_option("--n", gen.n, "Nodes per environment")->capture_default_str();
  gen_cmd->add_option("--k", gen.k, "Nearest neighbors per node")->capture_default_str();
  gen_cmd->add_option("--epsilon", gen.epsilon, "Neighborhood radius in radians (replaces --k)");
  gen_cmd->add_option("--seed", gen.seed, "First seed")->capture_default_str();
  gen_cmd->add_option("--count", gen.count, "Number of environments")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output directory")->capture_default_str();

  RunFlags runf;
  auto* run_cmd = app.add_subcommand("run", "Run one optimizer on one environment");
  run_cmd->add_option("--env", runf.env, "Environment file or gen:n=..,k=..,seed=..")->required();
  run_cmd->add_option("--algo", runf.algo, "so3, quat or mrp")->capture_default_str();
  run_cmd->add_option("--gamma", runf.gamma, "Learning rate")->capture_default_str();
  run_cmd->add_option("--eta", runf.eta, "MRP gradient clamp")->capture_default_str();
  run_cmd->add_option("--batch", runf.batch, "Batch size")->capture_default_str();
  run_cmd->add_option("--iters", runf.iters, "Iterations")->capture_default_str();
  run_cmd->add_option("--seed", runf.seed, "Optimizer seed")->capture_default_str();
  run_cmd->add_option("--checkpoint-every", runf.checkpoint_every, "Checkpoint interval")->capture_default_str();
  run_cmd->add_option("--init", runf.init, "identity or haar")->capture_default_str();
  run_cmd->add_option("--reduction", runf.reduction, "Batch update scaling: sum (gamma per pair) or mean")
      ->capture_default_str();
  run_cmd->add_option("--out", runf.out, "Output directory")->capture_default_str();

  BenchFlags bench;
  auto* bench_cmd = app.add_subcommand("bench", "Run an experiment grid");
  bench_cmd->add_option("--plan", bench.plan, "JSON plan file");
  bench_cmd->add_option("--env", bench.envs, "Environment file or gen spec (repeatable)");
  bench_cmd->add_option("--gen-count", bench.gen_count, "Generated environments to add");
  bench_cmd->add_option("--gen-seed", bench.gen_seed, "First seed of the generated environments");
  bench_cmd->add_option("--n", bench.n, "Nodes per generated environment")->capture_default_str();
  bench_cmd->add_option("--k", bench.k, "Neighbors per generated node")->capture_default_str();
  bench_cmd->add_option("--algos", bench.algos, "Algorithms (default: so3 quat mrp)")->delimiter(',');
  bench_cmd->add_option("--seeds", bench.seeds, "Optimizer seeds (default: 0)")->delimiter(',');
  bench_cmd->add_option("--gamma", bench.gamma, "Learning rate")->capture_default_str();
  bench_cmd->add_option("--eta", bench.eta, "MRP gradient clamp")->capture_default_str();
  bench_cmd->add_option("--batch", bench.batch, "Batch size")->capture_default_str();
  bench_cmd->add_option("--iters", bench.iters, "Iterations")->capture_default_str();
  bench_cmd->add_option("--checkpoint-every", bench.checkpoint_every, "Checkpoint interval")->capture_default_str();
  bench_cmd->add_option("--init", bench.init, "identity or haar")->capture_default_str();
  bench_cmd->add_option("--reduction", bench.reduction, "Batch update scaling: sum or mean")->capture_default_str();
  bench_cmd->add_option("--jobs", bench.jobs, "Concurrent runs (default: $ROTAVG_JOBS or core count)");
  bench_cmd->add_option("--out", bench.out, "Output directory");

  AggregateFlags agg;
  auto* agg_cmd = app.add_subcommand("aggregate", "Recompute the aggregate table from a summary file");
  agg_cmd->add_option("--summary", agg.summary, "summary.csv")->required();
  agg_cmd->add_option("--out", agg.out, "Output directory (default: next to the summary)");

  ImportFlags imp;
  auto* import_cmd = app.add_subcommand("import", "Import a 1DSfM edge list");
  import_cmd->add_option("--in", imp.in, "Edge list")->required();
  import_cmd->add_option("--gt", imp.gt, "Ground-truth rotations (i w x y z)");
  import_cmd->add_option("--out", imp.out, "Environment file to write")->required();
  import_cmd->add_flag("--strict", imp.strict, "Reject rows with unexpected columns");
  import_cmd->add_option("--convention", imp.convention, "second_from_first or first_from_second")
      ->capture_default_str();

  EvalFlags eval;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a saved estimate set");
  eval_cmd->add_option("--env", eval.env, "Environment file or gen spec")->required();
  eval_cmd->add_option("--estimates", eval.estimates, "Estimate file")->required();
  eval_cmd->add_option("--out", eval.out, "Report file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen(gen, out, err);
    if (run_cmd->parsed()) return cmd_run(runf, out, err);
    if (bench_cmd->parsed()) return cmd_bench(bench, *bench_cmd, out, err);
    if (agg_cmd->parsed()) return cmd_aggregate(agg, out);
    if (import_cmd->parsed()) return cmd_import(imp, out);
    if (eval_cmd->parsed()) return cmd_eval(eval, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const ChecksumMismatch& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const EmptyGraph& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const FileError& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const ConnectivityFailure& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  err << "internal error: no subcommand dispatched\n";
  return kExitInternal;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"rotavg"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace rotavg::cli
