#include "rotavg/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace rotavg {

namespace {

constexpr double kUnitTolerance = 1e-6;

struct Line {
  std::size_t number = 0;
  std::string_view text;
  std::size_t offset = 0;  // byte offset of the line start
};

std::vector<Line> split_lines(std::string_view text) {
  std::vector<Line> out;
  std::size_t pos = 0;
  std::size_t number = 1;
  while (pos < text.size()) {
    const std::size_t end = text.find('\n', pos);
    const std::size_t stop = end == std::string_view::npos ? text.size() : end;
    out.push_back({number++, text.substr(pos, stop - pos), pos});
    if (end == std::string_view::npos) break;
    pos = end + 1;
  }
  return out;
}

bool is_skippable(std::string_view line) {
  const auto first = line.find_first_not_of(" \t\r");
  return first == std::string_view::npos || line[first] == '#';
}

std::vector<std::string_view> tokens(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    pos = line.find_first_not_of(" \t\r", pos);
    if (pos == std::string_view::npos) break;
    const std::size_t end = line.find_first_of(" \t\r", pos);
    out.push_back(line.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos));
    if (end == std::string_view::npos) break;
    pos = end;
  }
  return out;
}

double parse_number(std::string_view tok, std::size_t line) {
  double v = 0.0;
  const auto* first = tok.data();
  const auto* last = tok.data() + tok.size();
  if (!tok.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw ParseError(line, "invalid number '" + std::string(tok) + "'");
  }
  return v;
}

template <typename Int>
Int parse_integer(std::string_view tok, std::size_t line, const char* what) {
  Int v{};
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw ParseError(line, std::string("invalid ") + what + " '" + std::string(tok) + "'");
  }
  return v;
}

UnitQuaternion parse_quaternion(std::span<const std::string_view> toks, std::size_t line) {
  const UnitQuaternion q(parse_number(toks[0], line), parse_number(toks[1], line), parse_number(toks[2], line),
                         parse_number(toks[3], line));
  if (std::abs(q.norm() - 1.0) > kUnitTolerance) throw ParseError(line, "non-unit quaternion");
  return q;
}

std::string format_quaternion(const UnitQuaternion& q) {
  return format_double(q.rho) + ' ' + format_double(q.nu.x()) + ' ' + format_double(q.nu.y()) + ' ' +
         format_double(q.nu.z());
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string format_optional(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::optional<double> parse_optional(std::string_view tok, std::size_t line) {
  if (tok.empty()) return std::nullopt;
  return parse_number(tok, line);
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    out.push_back(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  if (!out.empty() && !out.back().empty() && out.back().back() == '\r') out.back().remove_suffix(1);
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, ptr);
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state) {
  for (const unsigned char c : bytes) {
    state ^= c;
    state *= 0x100000001b3ULL;
  }
  return state;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot open " + path.string() + " for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FileError("cannot open " + path.string() + " for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.flush();
  if (!out) throw FileError("failed writing " + path.string());
}

// ---------------------------------------------------------------------------
// Environment files

std::string format_env(const RotationEnvironment& env, bool with_checksum) {
  std::string out;
  out += "ROTAVG-ENV 1\n";
  out += "nodes " + std::to_string(env.size()) + "\n";
  out += "edges " + std::to_string(env.edges().size()) + "\n";
  out += std::string("ground_truth ") + (env.has_ground_truth() ? "1" : "0") + "\n";
  out += std::string("exact ") + (env.exact() ? "1" : "0") + "\n";
  out += "provenance " + (env.provenance().empty() ? std::string("-") : env.provenance()) + "\n";
  if (env.has_ground_truth()) {
    const auto& gt = env.ground_truth();
    for (std::size_t i = 0; i < gt.size(); ++i) {
      out += "gt " + std::to_string(i) + ' ' + format_quaternion(gt[i]) + '\n';
    }
  }
  for (const Edge& e : env.edges()) {
    out += "edge " + std::to_string(e.i) + ' ' + std::to_string(e.j) + ' ' + format_quaternion(e.rel) + '\n';
  }
  if (with_checksum) out += "checksum fnv1a64 " + hex64(fnv1a64(out)) + "\n";
  return out;
}

RotationEnvironment parse_env(std::string_view text) {
  const auto lines = split_lines(text);
  std::size_t idx = 0;
  std::size_t last_line = lines.empty() ? 1 : lines.back().number;

  // Next non-comment line, or nullptr at end of input.
  auto next = [&]() -> const Line* {
    while (idx < lines.size() && is_skippable(lines[idx].text)) ++idx;
    return idx < lines.size() ? &lines[idx++] : nullptr;
  };
  auto expect_key = [&](std::string_view key) {
    const Line* line = next();
    if (!line) throw ParseError(last_line + 1, "unexpected end of file, expected '" + std::string(key) + "'");
    const auto toks = tokens(line->text);
    if (toks.size() < 2 || toks[0] != key) {
      throw ParseError(line->number, "expected '" + std::string(key) + " <value>'");
    }
    return std::pair{line, toks};
  };

  {
    const Line* line = next();
    if (!line) throw ParseError(1, "empty file");
    const auto toks = tokens(line->text);
    if (toks.size() != 2 || toks[0] != "ROTAVG-ENV") throw ParseError(line->number, "missing ROTAVG-ENV header");
    if (toks[1] != "1") throw ParseError(line->number, "unsupported format version " + std::string(toks[1]));
  }
  auto [nodes_line, nodes_tok] = expect_key("nodes");
  const auto n = parse_integer<std::size_t>(nodes_tok[1], nodes_line->number, "node count");
  auto [edges_line, edges_tok] = expect_key("edges");
  const auto m = parse_integer<std::size_t>(edges_tok[1], edges_line->number, "edge count");
  auto [gt_line, gt_tok] = expect_key("ground_truth");
  const auto has_gt = parse_integer<int>(gt_tok[1], gt_line->number, "ground_truth flag");
  auto [exact_line, exact_tok] = expect_key("exact");
  const auto exact = parse_integer<int>(exact_tok[1], exact_line->number, "exact flag");
  if ((has_gt != 0 && has_gt != 1) || (exact != 0 && exact != 1)) {
    throw ParseError(exact_line->number, "flags must be 0 or 1");
  }
  std::string provenance;
  {
    const Line* line = next();
    if (!line) throw ParseError(last_line + 1, "unexpected end of file, expected 'provenance'");
    std::string_view t = line->text;
    if (!t.empty() && t.back() == '\r') t.remove_suffix(1);
    if (t.substr(0, 11) != "provenance ") throw ParseError(line->number, "expected 'provenance <text>'");
    provenance = std::string(t.substr(11));
    if (provenance == "-") provenance.clear();
  }

  std::optional<std::vector<UnitQuaternion>> gt;
  if (has_gt) {
    gt.emplace(n);
    std::vector<char> seen(n, 0);
    for (std::size_t k = 0; k < n; ++k) {
      const Line* line = next();
      if (!line) {
        throw ParseError(last_line + 1, "unexpected end of file: expected " + std::to_string(n) +
                                            " ground-truth rows, found " + std::to_string(k));
      }
      const auto toks = tokens(line->text);
      if (toks.size() != 6 || toks[0] != "gt") throw ParseError(line->number, "expected 'gt <i> <w> <x> <y> <z>'");
      const auto i = parse_integer<std::size_t>(toks[1], line->number, "node id");
      if (i >= n) throw ParseError(line->number, "node id out of range");
      if (seen[i]) throw ParseError(line->number, "duplicate ground-truth row");
      seen[i] = 1;
      (*gt)[i] = parse_quaternion(std::span(toks).subspan(2), line->number);
    }
  }

  std::vector<Edge> edges;
  edges.reserve(m);
  for (std::size_t k = 0; k < m; ++k) {
    const Line* line = next();
    if (!line) {
      throw ParseError(last_line + 1, "unexpected end of file: expected " + std::to_string(m) + " edges, found " +
                                          std::to_string(k));
    }
    const auto toks = tokens(line->text);
    if (toks.size() != 7 || toks[0] != "edge") {
      throw ParseError(line->number, "expected 'edge <i> <j> <w> <x> <y> <z>'");
    }
    const auto i = parse_integer<NodeId>(toks[1], line->number, "node id");
    const auto j = parse_integer<NodeId>(toks[2], line->number, "node id");
    if (i >= n || j >= n) throw ParseError(line->number, "node id out of range");
    if (i == j) throw ParseError(line->number, "self-loop edge");
    edges.push_back({i, j, parse_quaternion(std::span(toks).subspan(3), line->number)});
  }

  if (const Line* line = next()) {
    const auto toks = tokens(line->text);
    if (toks.size() != 3 || toks[0] != "checksum" || toks[1] != "fnv1a64") {
      throw ParseError(line->number, "unexpected content after the edge block");
    }
    const std::string expected = hex64(fnv1a64(text.substr(0, line->offset)));
    if (toks[2] != expected) {
      throw ChecksumMismatch("checksum mismatch at line " + std::to_string(line->number) + ": file says " +
                             std::string(toks[2]) + ", content hashes to " + expected);
    }
    if (const Line* extra = next()) throw ParseError(extra->number, "unexpected content after the checksum");
  }

  return RotationEnvironment(n, std::move(edges), std::move(gt), exact == 1, std::move(provenance));
}

void save_env(const RotationEnvironment& env, const std::filesystem::path& path) {
  write_file(path, format_env(env));
}

RotationEnvironment load_env(const std::filesystem::path& path) { return parse_env(read_file(path)); }

// ---------------------------------------------------------------------------
// 1DSfM import

namespace {

struct RawEdge {
  long long i = 0;
  long long j = 0;
  UnitQuaternion rel;
};

std::map<long long, UnitQuaternion> read_ground_truth(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::map<long long, UnitQuaternion> out;
  for (const Line& line : split_lines(text)) {
    if (is_skippable(line.text)) continue;
    const auto toks = tokens(line.text);
    if (toks.size() != 5) throw ParseError(line.number, "expected 'i w x y z' in ground-truth file");
    const auto id = parse_integer<long long>(toks[0], line.number, "node id");
    if (!out.emplace(id, parse_quaternion(std::span(toks).subspan(1), line.number)).second) {
      throw ParseError(line.number, "duplicate ground-truth row");
    }
  }
  return out;
}

struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

ImportResult import_1dsfm(const std::filesystem::path& edges_path, const ImportOptions& options) {
  ImportReport report;
  std::optional<std::map<long long, UnitQuaternion>> gt;
  if (options.ground_truth) gt = read_ground_truth(*options.ground_truth);

  const std::string text = read_file(edges_path);
  std::vector<RawEdge> raw;
  for (const Line& line : split_lines(text)) {
    if (is_skippable(line.text)) continue;
    const auto toks = tokens(line.text);
    if (toks.size() < 11) throw ParseError(line.number, "expected 'i j m11 .. m33 [t1 t2 t3]'");
    if (options.strict && toks.size() != 11 && toks.size() != 14) {
      throw ParseError(line.number, "unexpected trailing columns (" + std::to_string(toks.size()) + " fields)");
    }
    ++report.rows_read;
    const auto i = parse_integer<long long>(toks[0], line.number, "node id");
    const auto j = parse_integer<long long>(toks[1], line.number, "node id");
    if (i < 0 || j < 0) throw ParseError(line.number, "negative node id");
    Mat3 m;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) m(r, c) = parse_number(toks[static_cast<std::size_t>(2 + 3 * r + c)], line.number);
    }
    for (std::size_t t = 11; t < std::min<std::size_t>(toks.size(), 14); ++t) parse_number(toks[t], line.number);

    const RotationMatrix p = project_to_so3(m);
    if ((m - p).norm() > options.max_projection_distance) {
      ++report.rows_dropped_not_rotation;
      continue;
    }
    if (i == j) {
      ++report.rows_dropped_self_loop;
      continue;
    }
    if (gt && (!gt->contains(i) || !gt->contains(j))) {
      ++report.rows_dropped_no_ground_truth;
      continue;
    }
    const RotationMatrix rel = options.convention == RelativeConvention::second_from_first ? p.transpose() : p;
    raw.push_back({i, j, matrix_to_quat(rel)});
  }
  if (raw.empty()) throw EmptyGraph("no valid edges in " + edges_path.string());

  std::vector<long long> ids;
  for (const auto& e : raw) {
    ids.push_back(e.i);
    ids.push_back(e.j);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  report.nodes_seen = ids.size();
  auto index_of = [&](long long id) {
    return static_cast<std::size_t>(std::lower_bound(ids.begin(), ids.end(), id) - ids.begin());
  };

  DisjointSets sets(ids.size());
  for (const auto& e : raw) sets.unite(index_of(e.i), index_of(e.j));
  std::vector<std::size_t> component_size(ids.size(), 0);
  for (std::size_t k = 0; k < ids.size(); ++k) ++component_size[sets.find(k)];
  // Ties go to the component holding the smallest original id.
  const std::size_t largest = static_cast<std::size_t>(
      std::max_element(component_size.begin(), component_size.end()) - component_size.begin());

  std::vector<long long> compact_to_original;
  std::vector<NodeId> original_to_compact(ids.size(), 0);
  for (std::size_t k = 0; k < ids.size(); ++k) {
    if (sets.find(k) == largest) {
      original_to_compact[k] = static_cast<NodeId>(compact_to_original.size());
      compact_to_original.push_back(ids[k]);
    }
  }
  report.nodes_dropped = ids.size() - compact_to_original.size();

  std::vector<Edge> edges;
  for (const auto& e : raw) {
    const std::size_t a = index_of(e.i);
    if (sets.find(a) != largest) {
      ++report.edges_dropped;
      continue;
    }
    edges.push_back({original_to_compact[a], original_to_compact[index_of(e.j)], e.rel});
  }

  std::optional<std::vector<UnitQuaternion>> gt_nodes;
  if (gt) {
    gt_nodes.emplace();
    for (const long long id : compact_to_original) gt_nodes->push_back(gt->at(id));
  }

  std::string provenance = "1dsfm:" + edges_path.filename().string();
  if (options.ground_truth) provenance += ",gt=" + options.ground_truth->filename().string();
  report.original_ids = compact_to_original;
  return {RotationEnvironment(compact_to_original.size(), std::move(edges), std::move(gt_nodes), false,
                              std::move(provenance)),
          std::move(report)};
}

// ---------------------------------------------------------------------------
// Traces and summaries

std::string format_trace(std::span<const TraceRecord> trace) {
  std::string out(kTraceHeader);
  out += '\n';
  for (const auto& r : trace) {
    out += std::to_string(r.step) + ',' + format_optional(r.ape_mean_deg) + ',' + format_optional(r.ape_median_deg) +
           ',' + format_double(r.rel_mean_deg) + ',' + format_double(r.rel_median_deg) + ',' +
           format_optional(r.abs_mean_deg) + ',' + format_optional(r.abs_median_deg) + '\n';
  }
  return out;
}

std::vector<TraceRecord> parse_trace(std::string_view text) {
  const auto lines = split_lines(text);
  std::vector<TraceRecord> out;
  bool header = false;
  for (const Line& line : lines) {
    if (is_skippable(line.text)) continue;
    if (!header) {
      std::string_view h = line.text;
      if (!h.empty() && h.back() == '\r') h.remove_suffix(1);
      if (h != kTraceHeader) throw ParseError(line.number, "unexpected trace header");
      header = true;
      continue;
    }
    const auto cells = split_csv(line.text);
    if (cells.size() != 7) throw ParseError(line.number, "expected 7 columns");
    TraceRecord r;
    r.step = parse_integer<std::size_t>(cells[0], line.number, "step");
    r.ape_mean_deg = parse_optional(cells[1], line.number);
    r.ape_median_deg = parse_optional(cells[2], line.number);
    r.rel_mean_deg = parse_number(cells[3], line.number);
    r.rel_median_deg = parse_number(cells[4], line.number);
    r.abs_mean_deg = parse_optional(cells[5], line.number);
    r.abs_median_deg = parse_optional(cells[6], line.number);
    if (!out.empty() && r.step < out.back().step) throw ParseError(line.number, "steps out of order");
    out.push_back(r);
  }
  if (!header) throw ParseError(1, "missing trace header");
  return out;
}

void export_trace(std::span<const TraceRecord> trace, const std::filesystem::path& path) {
  write_file(path, format_trace(trace));
}

std::vector<TraceRecord> load_trace(const std::filesystem::path& path) { return parse_trace(read_file(path)); }

SummaryRow make_summary_row(std::string env, const OptimizerConfig& cfg, std::span<const TraceRecord> trace) {
  SummaryRow row;
  row.env = std::move(env);
  row.algorithm = cfg.algorithm;
  row.seed = cfg.seed;
  row.iters = cfg.max_iters;
  row.convergence = summarize(trace);
  if (!trace.empty()) row.final_record = trace.back();
  return row;
}

std::string format_summary(std::span<const SummaryRow> rows) {
  auto cell = [](double v) { return std::isfinite(v) ? format_double(v) : std::string(); };
  std::string out(kSummaryHeader);
  out += '\n';
  for (const auto& r : rows) {
    const auto& f = r.final_record;
    out += r.env + ',' + std::string(to_string(r.algorithm)) + ',' + std::to_string(r.seed) + ',' +
           std::to_string(r.iters) + ',' + cell(r.convergence.nauc) + ',' +
           (r.convergence.steps_to_5deg ? std::to_string(*r.convergence.steps_to_5deg) : std::string(kNotConverged)) +
           ',' + format_optional(f.ape_mean_deg) + ',' + format_optional(f.ape_median_deg) + ',' +
           format_double(f.rel_mean_deg) + ',' + format_double(f.rel_median_deg) + ',' +
           format_optional(f.abs_mean_deg) + ',' + format_optional(f.abs_median_deg) + '\n';
  }
  return out;
}

std::vector<SummaryRow> parse_summary(std::string_view text) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<SummaryRow> out;
  bool header = false;
  for (const Line& line : split_lines(text)) {
    if (is_skippable(line.text)) continue;
    if (!header) {
      std::string_view h = line.text;
      if (!h.empty() && h.back() == '\r') h.remove_suffix(1);
      if (h != kSummaryHeader) throw ParseError(line.number, "unexpected summary header");
      header = true;
      continue;
    }
    const auto cells = split_csv(line.text);
    if (cells.size() != 12) throw ParseError(line.number, "expected 12 columns");
    SummaryRow r;
    r.env = std::string(cells[0]);
    const auto algo = parse_algorithm(cells[1]);
    if (!algo) throw ParseError(line.number, "unknown algorithm '" + std::string(cells[1]) + "'");
    r.algorithm = *algo;
    r.seed = parse_integer<std::uint64_t>(cells[2], line.number, "seed");
    r.iters = parse_integer<std::size_t>(cells[3], line.number, "iteration count");
    r.convergence.nauc = cells[4].empty() ? nan : parse_number(cells[4], line.number);
    if (cells[5] != kNotConverged) {
      r.convergence.steps_to_5deg = parse_integer<std::size_t>(cells[5], line.number, "step count");
    }
    r.final_record.step = r.iters;
    r.final_record.ape_mean_deg = parse_optional(cells[6], line.number);
    r.final_record.ape_median_deg = parse_optional(cells[7], line.number);
    r.final_record.rel_mean_deg = parse_number(cells[8], line.number);
    r.final_record.rel_median_deg = parse_number(cells[9], line.number);
    r.final_record.abs_mean_deg = parse_optional(cells[10], line.number);
    r.final_record.abs_median_deg = parse_optional(cells[11], line.number);
    r.convergence.final_ape_deg = r.final_record.ape_mean_deg.value_or(nan);
    out.push_back(std::move(r));
  }
  if (!header) throw ParseError(1, "missing summary header");
  return out;
}

void export_summary(std::span<const SummaryRow> rows, const std::filesystem::path& path) {
  write_file(path, format_summary(rows));
}

std::vector<SummaryRow> load_summary(const std::filesystem::path& path) { return parse_summary(read_file(path)); }

// ---------------------------------------------------------------------------
// Estimates

std::string format_estimates(const EstimateSet& estimates) {
  std::string out = "ROTAVG-ESTIMATES 1\n";
  out += "nodes " + std::to_string(estimates.size()) + "\n";
  out += "parameterization " + std::string(to_string(estimates.algorithm())) + "\n";
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    out += "est " + std::to_string(i) + ' ' + format_quaternion(estimates.quaternion(i)) + '\n';
  }
  return out;
}

std::vector<RotationMatrix> parse_estimates(std::string_view text) {
  const auto lines = split_lines(text);
  std::size_t idx = 0;
  auto next = [&]() -> const Line* {
    while (idx < lines.size() && is_skippable(lines[idx].text)) ++idx;
    return idx < lines.size() ? &lines[idx++] : nullptr;
  };
  const std::size_t eof_line = (lines.empty() ? 0 : lines.back().number) + 1;

  const Line* line = next();
  if (!line || tokens(line->text) != std::vector<std::string_view>{"ROTAVG-ESTIMATES", "1"}) {
    throw ParseError(line ? line->number : 1, "missing ROTAVG-ESTIMATES 1 header");
  }
  line = next();
  if (!line) throw ParseError(eof_line, "unexpected end of file, expected 'nodes'");
  auto toks = tokens(line->text);
  if (toks.size() != 2 || toks[0] != "nodes") throw ParseError(line->number, "expected 'nodes <N>'");
  const auto n = parse_integer<std::size_t>(toks[1], line->number, "node count");
  line = next();
  if (!line) throw ParseError(eof_line, "unexpected end of file, expected 'parameterization'");
  toks = tokens(line->text);
  if (toks.size() != 2 || toks[0] != "parameterization" || !parse_algorithm(toks[1])) {
    throw ParseError(line->number, "expected 'parameterization <so3|quat|mrp>'");
  }

  std::vector<RotationMatrix> out(n, RotationMatrix::Identity());
  std::vector<char> seen(n, 0);
  for (std::size_t k = 0; k < n; ++k) {
    line = next();
    if (!line) {
      throw ParseError(eof_line, "unexpected end of file: expected " + std::to_string(n) + " estimates, found " +
                                     std::to_string(k));
    }
    toks = tokens(line->text);
    if (toks.size() != 6 || toks[0] != "est") throw ParseError(line->number, "expected 'est <i> <w> <x> <y> <z>'");
    const auto i = parse_integer<std::size_t>(toks[1], line->number, "node id");
    if (i >= n || seen[i]) throw ParseError(line->number, "node id out of range or repeated");
    seen[i] = 1;
    out[i] = quat_to_matrix(parse_quaternion(std::span(toks).subspan(2), line->number));
  }
  if (const Line* extra = next()) throw ParseError(extra->number, "unexpected content after the estimates");
  return out;
}

void save_estimates(const EstimateSet& estimates, const std::filesystem::path& path) {
  write_file(path, format_estimates(estimates));
}

std::vector<RotationMatrix> load_estimates(const std::filesystem::path& path) {
  return parse_estimates(read_file(path));
}

}  // namespace rotavg
