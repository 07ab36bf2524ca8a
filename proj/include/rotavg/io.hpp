// Text formats: environment files, 1DSfM edge-list import, trace and summary
// CSVs, saved estimate sets. All files are UTF-8 with LF line endings; lines
// starting with '#' are comments. Floats are written with 17 significant
// digits so a load/save cycle is bit-exact.
//
// Environment file:
//   ROTAVG-ENV 1
//   nodes <N>
//   edges <M>
//   ground_truth <0|1>
//   exact <0|1>
//   provenance <text>
//   gt <i> <w> <x> <y> <z>              N rows when ground_truth is 1
//   edge <i> <j> <w> <x> <y> <z>        M rows, q_i^j with R_i = R_i^j R_j
//   checksum fnv1a64 <16 hex digits>    optional, covers every byte before it
#pragma once

#include "rotavg/averaging.hpp"
#include "rotavg/envgraph.hpp"
#include "rotavg/metrics.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rotavg {

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& reason)
      : std::runtime_error("line " + std::to_string(line) + ": " + reason), line_(line), reason_(reason) {}
  std::size_t line() const { return line_; }
  const std::string& reason() const { return reason_; }

 private:
  std::size_t line_;
  std::string reason_;
};

class ChecksumMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptyGraph : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Write failures and unreadable paths, with the path in the message.
class FileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// %.17g
std::string format_double(double v);
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state = 0xcbf29ce484222325ULL);

std::string format_env(const RotationEnvironment& env, bool with_checksum = true);
RotationEnvironment parse_env(std::string_view text);
void save_env(const RotationEnvironment& env, const std::filesystem::path& path);
RotationEnvironment load_env(const std::filesystem::path& path);

/// How the rotation R in an import row "i j R" relates the two cameras.
enum class RelativeConvention {
  second_from_first,  // R_j = R R_i (1DSfM EG lists)
  first_from_second,  // R_i = R R_j (this library's edge convention)
};

struct ImportOptions {
  std::optional<std::filesystem::path> ground_truth;  // rows "i w x y z"
  bool strict = false;  // reject rows with columns other than 11 or 14
  RelativeConvention convention = RelativeConvention::second_from_first;
  double max_projection_distance = 1e-2;  // Frobenius distance to SO(3)
};

struct ImportReport {
  std::size_t rows_read = 0;
  std::size_t rows_dropped_not_rotation = 0;
  std::size_t rows_dropped_self_loop = 0;
  std::size_t rows_dropped_no_ground_truth = 0;
  std::size_t nodes_seen = 0;
  std::size_t nodes_dropped = 0;  // outside the largest connected component
  std::size_t edges_dropped = 0;  // outside the largest connected component
  std::vector<long long> original_ids;  // original id of each kept node
};

struct ImportResult {
  RotationEnvironment env;
  ImportReport report;
};

/// Rows "i j m11 m12 m13 m21 m22 m23 m31 m32 m33 [t1 t2 t3]". Matrices are
/// projected onto SO(3); rows farther than max_projection_distance are
/// dropped. Only the largest connected component is kept and its nodes are
/// renumbered in ascending original-id order. With a ground-truth file, edges
/// touching nodes without ground truth are dropped first.
ImportResult import_1dsfm(const std::filesystem::path& edges, const ImportOptions& options = {});

inline constexpr std::string_view kTraceHeader =
    "step,ape_mean_deg,ape_median_deg,rel_mean_deg,rel_median_deg,abs_mean_deg,abs_median_deg";

std::string format_trace(std::span<const TraceRecord> trace);
std::vector<TraceRecord> parse_trace(std::string_view text);
void export_trace(std::span<const TraceRecord> trace, const std::filesystem::path& path);
std::vector<TraceRecord> load_trace(const std::filesystem::path& path);

/// One row of summary.csv, i.e. one (environment, algorithm, seed) run.
struct SummaryRow {
  std::string env;
  Algorithm algorithm = Algorithm::mrp;
  std::uint64_t seed = 0;
  std::size_t iters = 0;
  ConvergenceSummary convergence;
  TraceRecord final_record;
};

inline constexpr std::string_view kNotConverged = "NotConverged";
inline constexpr std::string_view kSummaryHeader =
    "env,algorithm,seed,iters,nauc,steps_to_5deg,final_ape_mean_deg,final_ape_median_deg,"
    "final_rel_mean_deg,final_rel_median_deg,final_abs_mean_deg,final_abs_median_deg";

SummaryRow make_summary_row(std::string env, const OptimizerConfig& cfg, std::span<const TraceRecord> trace);
std::string format_summary(std::span<const SummaryRow> rows);
std::vector<SummaryRow> parse_summary(std::string_view text);
void export_summary(std::span<const SummaryRow> rows, const std::filesystem::path& path);
std::vector<SummaryRow> load_summary(const std::filesystem::path& path);

/// Estimates are stored as rotations: "est <i> <w> <x> <y> <z>".
std::string format_estimates(const EstimateSet& estimates);
std::vector<RotationMatrix> parse_estimates(std::string_view text);
void save_estimates(const EstimateSet& estimates, const std::filesystem::path& path);
std::vector<RotationMatrix> load_estimates(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace rotavg
