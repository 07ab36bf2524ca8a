// Command-line driver: gen, run, bench, aggregate, import, eval.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
#pragma once

#include "rotavg/averaging.hpp"
#include "rotavg/envgraph.hpp"
#include "rotavg/io.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace rotavg::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitInternal = 3;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runs the CLI. args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// "gen:n=100,k=3,seed=7" (any subset of keys, plus eps=<radians>).
struct GeneratedSource {
  GeneratorConfig config;
};
struct FileSource {
  std::filesystem::path path;
};
using EnvSource = std::variant<GeneratedSource, FileSource>;

EnvSource parse_env_source(std::string_view spec);
/// Short name used for output directories and the summary env column.
std::string env_name(const EnvSource& source);
RotationEnvironment materialize(const EnvSource& source);

struct BenchPlan {
  std::vector<EnvSource> envs;
  std::vector<Algorithm> algorithms;
  std::vector<std::uint64_t> seeds;
  OptimizerConfig config;
  std::filesystem::path out;

  /// Throws UsageError on empty lists or an unusable config.
  void validate() const;
};

/// JSON plan:
///   {"envs": [{"generate": {"n": 100, "k": 3, "seeds": [0, 1]}},
///             {"generate": {"seed_range": [0, 50]}}, {"path": "env.txt"}],
///    "algorithms": ["so3", "quat", "mrp"], "seeds": [0],
///    "config": {"gamma": 0.5, "eta": 0.1, "batch": 8, "iters": 300000,
///               "checkpoint_every": 1000, "init": "haar", "reduction": "sum"},
///    "out": "bench_out"}
/// Relative paths resolve against the plan file's directory.
BenchPlan parse_bench_plan(std::string_view json_text, const std::filesystem::path& base_dir = {});

/// Milestones of the reference 300K-step budget; scaled by iters / 300K.
inline constexpr std::array<std::size_t, 5> kMilestones = {30000, 70000, 100000, 150000, 300000};
inline constexpr std::size_t kReferenceBudget = 300000;

std::size_t scaled_milestone(std::size_t milestone, std::size_t iters);

/// One aggregate row per algorithm over all of its runs.
struct AggregateRow {
  Algorithm algorithm = Algorithm::mrp;
  std::size_t runs = 0;
  std::size_t converged = 0;
  // Over converged runs only; empty when none converged.
  std::optional<double> mean_steps;
  std::optional<std::size_t> max_steps;
  std::optional<std::size_t> min_steps;
  double mean_nauc = 0.0;
  double max_nauc = 0.0;
  double min_nauc = 0.0;
  std::array<double, kMilestones.size()> pct_converged{};  // a run counts iff steps <= scaled milestone
  double final_mean_deg = 0.0;    // mean over runs of the final mean pairwise error
  double final_median_deg = 0.0;  // median over runs of the final mean pairwise error
};

/// Pure function of the summary rows; rows without pairwise errors are skipped.
std::vector<AggregateRow> aggregate(std::span<const SummaryRow> rows);
std::string format_aggregate_text(std::span<const AggregateRow> rows);
std::string format_aggregate_csv(std::span<const AggregateRow> rows);

}  // namespace rotavg::cli
