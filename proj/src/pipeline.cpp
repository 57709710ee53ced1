#include "mcoh/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>
#include <vector>

#include "mcoh/clustering.hpp"
#include "mcoh/coherence.hpp"
#include "mcoh/csv.hpp"
#include "mcoh/errors.hpp"
#include "mcoh/rng.hpp"
#include "mcoh/version.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace mcoh {

namespace {

// ---------------------------------------------------------------- config --

template <typename T>
std::string to_value(const T& v) {
  if constexpr (std::is_same_v<T, bool>) return v ? "true" : "false";
  else if constexpr (std::is_same_v<T, double>) return csv::format_double(v);
  else if constexpr (std::is_same_v<T, fs::path>) return v.string();
  else return std::to_string(v);
}

bool parse_bool(const std::string& value, const std::string& key) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw config_error("config key '" + key + "': expected boolean, got '" + value + "'");
}

}  // namespace

PipelineConfig PipelineConfig::load_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file: " + path.string());

  PipelineConfig config;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto fields = csv::split_line(line);  // trims; no commas expected
    std::string trimmed = fields.empty() ? "" : fields[0];
    if (trimmed.empty()) continue;

    const auto eq = trimmed.find('=');
    if (eq == std::string::npos)
      throw config_error(path.string() + ":" + std::to_string(lineno) +
                         ": expected key = value");
    auto strip = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    const std::string key = strip(trimmed.substr(0, eq));
    const std::string value = strip(trimmed.substr(eq + 1));
    const std::string ctx = "config key '" + key + "'";

    if (key == "input") config.input = value;
    else if (key == "output_dir") config.output_dir = value;
    else if (key == "sector_map") config.sector_map = value;
    else if (key == "window_width") config.window.width = static_cast<int>(csv::parse_long(value, ctx));
    else if (key == "window_step") config.window.step = static_cast<int>(csv::parse_long(value, ctx));
    else if (key == "omega") config.sim.omega = csv::parse_double(value, ctx);
    else if (key == "alpha") config.sim.alpha = csv::parse_double(value, ctx);
    else if (key == "dt") config.sim.dt = csv::parse_double(value, ctx);
    else if (key == "transient_steps") config.sim.transient_steps = static_cast<int>(csv::parse_long(value, ctx));
    else if (key == "measure_steps") config.sim.measure_steps = static_cast<int>(csv::parse_long(value, ctx));
    else if (key == "seed") config.sim.seed = static_cast<std::uint64_t>(csv::parse_long(value, ctx));
    else if (key == "epsilon") config.epsilon = csv::parse_double(value, ctx);
    else if (key == "neighbor_k") config.neighbor_k = static_cast<int>(csv::parse_long(value, ctx));
    else if (key == "clusters") config.clusters = static_cast<int>(csv::parse_long(value, ctx));
    else if (key == "restarts") config.restarts = static_cast<int>(csv::parse_long(value, ctx));
    else if (key == "window_begin") config.window_begin = static_cast<int>(csv::parse_long(value, ctx));
    else if (key == "window_end") config.window_end = static_cast<int>(csv::parse_long(value, ctx));
    else if (key == "jobs") config.jobs = static_cast<int>(csv::parse_long(value, ctx));
    else if (key == "dump_matrices") config.dump_matrices = parse_bool(value, key);
    else throw config_error(path.string() + ":" + std::to_string(lineno) +
                            ": unknown config key '" + key + "'");
  }
  return config;
}

void PipelineConfig::save_file(const fs::path& path) const {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write " + path.string());
  out << "input = " << to_value(input) << '\n'
      << "output_dir = " << to_value(output_dir) << '\n'
      << "sector_map = " << to_value(sector_map) << '\n'
      << "window_width = " << to_value(window.width) << '\n'
      << "window_step = " << to_value(window.step) << '\n'
      << "omega = " << to_value(sim.omega) << '\n'
      << "alpha = " << to_value(sim.alpha) << '\n'
      << "dt = " << to_value(sim.dt) << '\n'
      << "transient_steps = " << to_value(sim.transient_steps) << '\n'
      << "measure_steps = " << to_value(sim.measure_steps) << '\n'
      << "seed = " << std::to_string(sim.seed) << '\n'
      << "epsilon = " << to_value(epsilon) << '\n'
      << "neighbor_k = " << to_value(neighbor_k) << '\n'
      << "clusters = " << to_value(clusters) << '\n'
      << "restarts = " << to_value(restarts) << '\n'
      << "window_begin = " << to_value(window_begin) << '\n'
      << "window_end = " << to_value(window_end) << '\n'
      << "jobs = " << to_value(jobs) << '\n'
      << "dump_matrices = " << to_value(dump_matrices) << '\n';
}

namespace {

// ----------------------------------------------------------------- infra --

[[noreturn]] void rethrow_with_stage(const std::string& stage, int window) {
  const std::string where =
      "[stage " + stage + (window >= 0 ? ", window " + std::to_string(window) : "") + "] ";
  try {
    throw;
  } catch (const config_error& e) {
    throw config_error(where + e.what());
  } catch (const data_error& e) {
    throw data_error(where + e.what());
  } catch (const numerical_error& e) {
    throw numerical_error(where + e.what());
  } catch (const std::exception& e) {
    throw data_error(where + e.what());
  }
}

// Runs fn(w) for w in [0, n); exceptions are rethrown for the lowest window
// index so failures do not depend on scheduling.
void for_each_window(int n, int jobs, const std::function<void(int)>& fn) {
  jobs = std::max(1, std::min(jobs, n));
  if (jobs == 1) {
    for (int w = 0; w < n; ++w) fn(w);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<int> next{0};
  auto worker = [&] {
    while (true) {
      const int w = next.fetch_add(1);
      if (w >= n) break;
      try {
        fn(w);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(jobs);
  for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
  for (auto& thread : pool) thread.join();
  for (const auto& error : errors)
    if (error) std::rethrow_exception(error);
}

fs::path require_artifact(const fs::path& path, const std::string& producer) {
  if (!fs::exists(path))
    throw data_error("missing upstream artifact: " + path.string() +
                     " (produce it with '" + producer + "')");
  return path;
}

void append_warnings(const fs::path& out_dir, const std::string& stage,
                     const WarningLog& warnings, std::size_t from) {
  const auto lines = warnings.snapshot();
  if (from >= lines.size()) return;
  std::ofstream log(out_dir / "warnings.log", std::ios::app);
  log << "== " << stage << " ==\n";
  for (std::size_t i = from; i < lines.size(); ++i) log << lines[i] << '\n';
}

// ------------------------------------------------------------- artifacts --

struct WindowMeta {
  int index;
  int begin;
  std::string start_date;
  std::string end_date;
};

std::vector<WindowMeta> read_windows_csv(const fs::path& path) {
  const auto table = csv::read_file(path);
  std::vector<WindowMeta> metas;
  metas.reserve(table.rows.size());
  for (const auto& row : table.rows)
    metas.push_back(WindowMeta{
        static_cast<int>(csv::parse_long(row[0], "window_index")),
        static_cast<int>(csv::parse_long(row[1], "window begin")), row[2], row[3]});
  return metas;
}

struct StrengthsFile {
  std::vector<std::string> tickers;
  Eigen::MatrixXd values;  // windows x tickers
};

StrengthsFile read_strengths_csv(const fs::path& path) {
  const auto table = csv::read_file(path);
  StrengthsFile strengths;
  strengths.tickers.assign(table.header.begin() + 1, table.header.end());
  const int n = static_cast<int>(strengths.tickers.size());
  strengths.values.resize(static_cast<int>(table.rows.size()), n);
  for (std::size_t w = 0; w < table.rows.size(); ++w)
    for (int i = 0; i < n; ++i)
      strengths.values(static_cast<int>(w), i) =
          csv::parse_double(table.rows[w][i + 1], "strength");
  return strengths;
}

struct SummaryFile {
  std::vector<std::string> tickers;
  Eigen::VectorXd mean_velocity, velocity_std, final_phase;
};

SummaryFile read_summary_csv(const fs::path& path) {
  const auto table = csv::read_file(path);
  SummaryFile summary;
  const int n = static_cast<int>(table.rows.size());
  summary.tickers.resize(n);
  summary.mean_velocity.resize(n);
  summary.velocity_std.resize(n);
  summary.final_phase.resize(n);
  for (int i = 0; i < n; ++i) {
    summary.tickers[i] = table.rows[i][0];
    summary.mean_velocity(i) = csv::parse_double(table.rows[i][1], "mean_velocity");
    summary.velocity_std(i) = csv::parse_double(table.rows[i][2], "velocity_std");
    summary.final_phase(i) = csv::parse_double(table.rows[i][3], "final_phase");
  }
  return summary;
}

CoherenceMatrix read_chi_csv(const fs::path& path, std::vector<std::string>* tickers) {
  const auto table = csv::read_file(path);
  if (tickers) *tickers = table.header;
  CoherenceMatrix chi;
  const int n = static_cast<int>(table.header.size());
  chi.chi.resize(static_cast<int>(table.rows.size()), n);
  for (std::size_t t = 0; t < table.rows.size(); ++t)
    for (int i = 0; i < n; ++i) {
      const std::string& cell = table.rows[t][i];
      if (cell != "0" && cell != "1")
        throw data_error(path.string() + ": cell must be 0 or 1, got '" + cell + "'");
      chi.chi(static_cast<int>(t), i) = cell == "1" ? 1 : 0;
    }
  chi.counts.assign(n, 0);
  for (int i = 0; i < n; ++i)
    chi.counts[i] = static_cast<int>(chi.chi.col(i).cast<int>().sum());
  return chi;
}

void write_matrix_csv(const fs::path& path, const std::vector<std::string>& tickers,
                      const Eigen::MatrixXd& values) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write " + path.string());
  for (std::size_t i = 0; i < tickers.size(); ++i)
    out << (i ? "," : "") << tickers[i];
  out << '\n';
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c)
      out << (c ? "," : "") << csv::format_double(values(r, c));
    out << '\n';
  }
}

std::map<std::string, SectorInfo> read_sector_map(const fs::path& path) {
  const auto table = csv::read_file(path);
  std::map<std::string, SectorInfo> sectors;
  auto lower = [](std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
  };
  auto ingest_row = [&](const std::vector<std::string>& row) {
    if (row.size() < 2) throw data_error(path.string() + ": need ticker,sector");
    SectorInfo info;
    info.sector = row[1];
    if (row.size() > 2) info.classification = row[2];
    sectors[row[0]] = std::move(info);
  };
  // Header row is optional for sector maps.
  if (lower(table.header[0]) != "ticker") ingest_row(table.header);
  for (const auto& row : table.rows) ingest_row(row);
  return sectors;
}

std::string render_sector_table(const SectorTable& table) {
  const std::vector<std::string> headers = {"GICS sector", "High coherent",
                                            "Middle coherent", "Low coherent",
                                            "Cyclical or Defensive"};
  std::vector<std::vector<std::string>> cells;
  char buf[32];
  for (const auto& row : table.rows) {
    std::vector<std::string> line{row.sector};
    for (const double pct : {row.pct_high, row.pct_middle, row.pct_low}) {
      std::snprintf(buf, sizeof(buf), "%.2f%%", pct);
      line.emplace_back(buf);
    }
    line.push_back(row.classification);
    cells.push_back(std::move(line));
  }
  std::vector<std::size_t> width(headers.size());
  for (std::size_t c = 0; c < headers.size(); ++c) {
    width[c] = headers[c].size();
    for (const auto& line : cells) width[c] = std::max(width[c], line[c].size());
  }
  std::ostringstream out;
  auto emit = [&](const std::vector<std::string>& line) {
    for (std::size_t c = 0; c < line.size(); ++c) {
      if (c) out << " | ";
      out << line[c];
      for (std::size_t pad = line[c].size(); pad < width[c]; ++pad) out << ' ';
    }
    out << '\n';
  };
  emit(headers);
  std::size_t total = 0;
  for (std::size_t c = 0; c < width.size(); ++c) total += width[c] + (c ? 3 : 0);
  out << std::string(total, '-') << '\n';
  for (const auto& line : cells) emit(line);
  return out.str();
}

std::string render_size_series(const std::vector<WindowMeta>& metas,
                               const std::vector<int>& sizes, int n_stocks) {
  std::ostringstream out;
  if (sizes.empty()) return "coherent group size: no windows\n";
  const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
  double mean = 0.0;
  for (const int size : sizes) mean += size;
  mean /= static_cast<double>(sizes.size());
  out << "coherent group size over " << sizes.size() << " windows of " << n_stocks
      << " stocks: min " << *lo << ", mean " << mean << ", max " << *hi << '\n';

  // Coarse text rendering: bucket the series to at most 60 columns.
  const int columns = std::min<int>(60, static_cast<int>(sizes.size()));
  static const char levels[] = " .:-=+*#%@";
  out << "  [" << metas.front().start_date << " .. " << metas.back().start_date << "]\n  ";
  for (int c = 0; c < columns; ++c) {
    const std::size_t a = sizes.size() * c / columns;
    const std::size_t b = std::max(a + 1, sizes.size() * (c + 1) / columns);
    double bucket = 0.0;
    for (std::size_t i = a; i < b; ++i) bucket += sizes[i];
    bucket /= static_cast<double>(b - a);
    const int level = n_stocks > 0
                          ? std::min(9, static_cast<int>(std::floor(bucket / n_stocks * 9.999)))
                          : 0;
    out << levels[level];
  }
  out << '\n';
  return out.str();
}

std::uint64_t fnv1a64(const unsigned char* data, std::size_t size, std::uint64_t h) {
  for (std::size_t i = 0; i < size; ++i) {
    h ^= data[i];
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

std::string artifact_hash(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot hash missing artifact: " + path.string());
  std::uint64_t h = 14695981039346656037ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
    h = fnv1a64(reinterpret_cast<const unsigned char*>(buf),
                static_cast<std::size_t>(in.gcount()), h);
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

// ------------------------------------------------------------------ stages --

void stage_ingest(const PipelineConfig& config, WarningLog& warnings) {
  const std::size_t mark = warnings.size();
  try {
    if (config.input.empty()) throw config_error("no input file configured");
    fs::create_directories(config.output_dir);
    const PricePanel panel = load_prices(config.input, PanelLayout::detect, &warnings);
    save_panel(panel, config.output_dir / "panel.csv");
  } catch (...) {
    rethrow_with_stage("ingest", -1);
  }
  append_warnings(config.output_dir, "ingest", warnings, mark);
}

void stage_simulate(const PipelineConfig& config, WarningLog& warnings) {
  const std::size_t mark = warnings.size();
  std::vector<WindowRange> windows;
  PricePanel panel;
  ReturnMatrix returns;
  try {
    panel = load_prices(require_artifact(config.output_dir / "panel.csv",
                                         "mcoh ingest or mcoh synth"),
                        PanelLayout::wide, nullptr);
    returns = log_returns(panel);
    windows = sliding_windows(returns, config.window);
  } catch (...) {
    rethrow_with_stage("simulate", -1);
  }

  const int n = panel.size();
  const int m = static_cast<int>(windows.size());
  const fs::path summaries_dir = config.output_dir / "summaries";
  fs::create_directories(summaries_dir);

  Eigen::MatrixXd strengths(m, n);
  std::vector<SimulationSummary> summaries(m);
  std::vector<std::vector<std::string>> window_warnings(m);

  for_each_window(m, config.jobs, [&](int w) {
    try {
      WarningLog local;
      const CorrMatrix corr = correlation_matrix(returns, windows[w], &local);
      const CouplingMatrix coupling = coupling_matrix(corr);
      strengths.row(w) = coupling_strengths(coupling).strengths.transpose();

      SimParams params = config.sim;
      params.seed = mix_seed(config.sim.seed, static_cast<std::uint64_t>(w));
      summaries[w] = simulate(coupling, params);
      summaries[w].window_index = w;

      if (config.dump_matrices) {
        write_matrix_csv(config.output_dir / ("corr_" + std::to_string(w) + ".csv"),
                         panel.tickers, corr.values);
        write_matrix_csv(config.output_dir / ("coupling_" + std::to_string(w) + ".csv"),
                         panel.tickers, coupling.values);
      }
      window_warnings[w] = local.snapshot();
    } catch (...) {
      rethrow_with_stage("simulate", w);
    }
  });

  for (int w = 0; w < m; ++w)
    for (auto& message : window_warnings[w]) warnings.add(std::move(message));

  try {
    std::ofstream windows_csv(config.output_dir / "windows.csv");
    windows_csv << "window_index,begin,start_date,end_date\n";
    for (const auto& window : windows)
      windows_csv << window.index << ',' << window.begin << ','
                  << panel.dates[window.begin] << ','
                  << panel.dates[window.begin + window.width] << '\n';

    std::ofstream strengths_csv(config.output_dir / "strengths.csv");
    strengths_csv << "window_index";
    for (const auto& ticker : panel.tickers) strengths_csv << ',' << ticker;
    strengths_csv << '\n';
    for (int w = 0; w < m; ++w) {
      strengths_csv << w;
      for (int i = 0; i < n; ++i)
        strengths_csv << ',' << csv::format_double(strengths(w, i));
      strengths_csv << '\n';
    }

    for (int w = 0; w < m; ++w) {
      std::ofstream out(summaries_dir / ("summary_" + std::to_string(w) + ".csv"));
      out << "ticker,mean_velocity,velocity_std,final_phase\n";
      for (int i = 0; i < n; ++i)
        out << panel.tickers[i] << ','
            << csv::format_double(summaries[w].mean_velocity(i)) << ','
            << csv::format_double(summaries[w].velocity_std(i)) << ','
            << csv::format_double(summaries[w].final_phases(i)) << '\n';
    }
  } catch (...) {
    rethrow_with_stage("simulate", -1);
  }
  append_warnings(config.output_dir, "simulate", warnings, mark);
}

void stage_detect(const PipelineConfig& config, WarningLog& warnings) {
  const std::size_t mark = warnings.size();
  try {
    const auto metas = read_windows_csv(
        require_artifact(config.output_dir / "windows.csv", "mcoh simulate"));
    const auto strengths = read_strengths_csv(
        require_artifact(config.output_dir / "strengths.csv", "mcoh simulate"));
    const int n = static_cast<int>(strengths.tickers.size());

    std::vector<CoherencePartition> partitions;
    partitions.reserve(metas.size());
    for (const auto& meta : metas) {
      const SummaryFile summary = read_summary_csv(require_artifact(
          config.output_dir / "summaries" / ("summary_" + std::to_string(meta.index) + ".csv"),
          "mcoh simulate"));

      StrengthRanking ranking;
      ranking.strengths = strengths.values.row(meta.index).transpose();
      ranking.order.resize(n);
      std::iota(ranking.order.begin(), ranking.order.end(), 0);
      std::sort(ranking.order.begin(), ranking.order.end(), [&](int a, int b) {
        if (ranking.strengths(a) != ranking.strengths(b))
          return ranking.strengths(a) > ranking.strengths(b);
        return a < b;
      });

      SimulationSummary sim_summary;
      sim_summary.window_index = meta.index;
      sim_summary.mean_velocity = summary.mean_velocity;
      sim_summary.velocity_std = summary.velocity_std;
      sim_summary.final_phases = summary.final_phase;
      partitions.push_back(detect_coherent_set(sim_summary, ranking, config.epsilon));
    }

    const CoherenceMatrix chi = characteristic_matrix(partitions, n);
    const std::vector<int> sizes = coherent_size_series(partitions);

    std::ofstream jsonl(config.output_dir / "partitions.jsonl");
    for (const auto& partition : partitions) {
      json record;
      record["window_index"] = partition.window_index;
      record["epsilon"] = partition.epsilon;
      json coherent = json::array();
      for (const int i : partition.coherent) coherent.push_back(strengths.tickers[i]);
      record["coherent"] = std::move(coherent);
      jsonl << record.dump() << '\n';
    }

    std::ofstream chi_csv(config.output_dir / "chi.csv");
    for (int i = 0; i < n; ++i) chi_csv << (i ? "," : "") << strengths.tickers[i];
    chi_csv << '\n';
    for (int t = 0; t < chi.windows(); ++t) {
      for (int i = 0; i < n; ++i)
        chi_csv << (i ? "," : "") << static_cast<int>(chi.chi(t, i));
      chi_csv << '\n';
    }

    std::ofstream sizes_csv(config.output_dir / "coherent_sizes.csv");
    sizes_csv << "window_index,start_date,size\n";
    for (std::size_t t = 0; t < metas.size(); ++t)
      sizes_csv << metas[t].index << ',' << metas[t].start_date << ',' << sizes[t] << '\n';
  } catch (...) {
    rethrow_with_stage("detect", -1);
  }
  append_warnings(config.output_dir, "detect", warnings, mark);
}

void stage_cluster(const PipelineConfig& config, WarningLog& warnings) {
  const std::size_t mark = warnings.size();
  try {
    std::vector<std::string> tickers;
    const CoherenceMatrix full =
        read_chi_csv(require_artifact(config.output_dir / "chi.csv", "mcoh detect"),
                     &tickers);

    const int m = full.windows();
    const int begin = config.window_begin;
    const int end = config.window_end < 0 ? m : config.window_end;
    if (begin < 0 || begin >= end || end > m)
      throw config_error("window range [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") invalid for " + std::to_string(m) +
                         " windows");

    CoherenceMatrix chi;
    chi.chi = full.chi.middleRows(begin, end - begin);
    chi.counts.assign(full.size(), 0);
    for (int i = 0; i < full.size(); ++i)
      chi.counts[i] = static_cast<int>(chi.chi.col(i).cast<int>().sum());

    const Embedding embedding = laplacian_eigenmaps(chi, config.neighbor_k, &warnings);
    const KMeansResult raw =
        kmeans(embedding, config.clusters, mix_seed(config.sim.seed, 0x636c7573), config.restarts);

    std::vector<std::string> label_names(chi.counts.size());
    if (config.clusters == 3) {
      const ClusterAssignment assignment = label_groups(raw, chi.counts, &warnings);
      for (std::size_t i = 0; i < label_names.size(); ++i)
        label_names[i] = to_string(assignment.labels[i]);
    } else {
      for (std::size_t i = 0; i < label_names.size(); ++i)
        label_names[i] = "c" + std::to_string(raw.labels[i]);
    }

    std::ofstream embedding_csv(config.output_dir / "embedding.csv");
    embedding_csv << "ticker,x,y\n";
    for (int i = 0; i < embedding.size(); ++i)
      embedding_csv << tickers[i] << ',' << csv::format_double(embedding.coords(i, 0))
                    << ',' << csv::format_double(embedding.coords(i, 1)) << '\n';

    std::ofstream clusters_csv(config.output_dir / "clusters.csv");
    clusters_csv << "ticker,label,N_T\n";
    for (std::size_t i = 0; i < label_names.size(); ++i)
      clusters_csv << tickers[i] << ',' << label_names[i] << ',' << chi.counts[i] << '\n';
  } catch (...) {
    rethrow_with_stage("cluster", -1);
  }
  append_warnings(config.output_dir, "cluster", warnings, mark);
}

void stage_report(const PipelineConfig& config, WarningLog& warnings) {
  const std::size_t mark = warnings.size();
  try {
    const auto clusters = csv::read_file(
        require_artifact(config.output_dir / "clusters.csv", "mcoh cluster"));
    const auto metas = read_windows_csv(
        require_artifact(config.output_dir / "windows.csv", "mcoh simulate"));
    const auto sizes_table = csv::read_file(
        require_artifact(config.output_dir / "coherent_sizes.csv", "mcoh detect"));

    std::vector<int> sizes;
    sizes.reserve(sizes_table.rows.size());
    for (const auto& row : sizes_table.rows)
      sizes.push_back(static_cast<int>(csv::parse_long(row[2], "size")));

    std::ostringstream report;
    report << render_size_series(metas, sizes, static_cast<int>(clusters.rows.size()));

    if (!config.sector_map.empty()) {
      const auto sectors = read_sector_map(config.sector_map);

      std::vector<std::string> tickers;
      ClusterAssignment assignment;
      assignment.labels.reserve(clusters.rows.size());
      for (const auto& row : clusters.rows) {
        tickers.push_back(row[0]);
        if (row[1] == "low") assignment.labels.push_back(CoherenceGroup::low);
        else if (row[1] == "middle") assignment.labels.push_back(CoherenceGroup::middle);
        else if (row[1] == "high") assignment.labels.push_back(CoherenceGroup::high);
        else
          throw config_error("clusters.csv has unnamed label '" + row[1] +
                             "'; sector report needs a 3-cluster run");
      }

      const SectorTable table = sector_breakdown(assignment, tickers, sectors);
      for (const auto& ticker : table.unmapped)
        warnings.add("no sector for ticker " + ticker);

      std::ofstream table_csv(config.output_dir / "sector_table.csv");
      table_csv << "sector,high_pct,middle_pct,low_pct,classification\n";
      char buf[32];
      for (const auto& row : table.rows) {
        table_csv << row.sector;
        for (const double pct : {row.pct_high, row.pct_middle, row.pct_low}) {
          std::snprintf(buf, sizeof(buf), "%.2f", pct);
          table_csv << ',' << buf;
        }
        table_csv << ',' << row.classification << '\n';
      }

      const std::string rendered = render_sector_table(table);
      std::ofstream table_txt(config.output_dir / "sector_table.txt");
      table_txt << rendered;
      report << '\n' << rendered;
    }

    std::ofstream report_txt(config.output_dir / "report.txt");
    report_txt << report.str();
  } catch (...) {
    rethrow_with_stage("report", -1);
  }
  append_warnings(config.output_dir, "report", warnings, mark);
}

nlohmann::json run_pipeline(const PipelineConfig& config, WarningLog& warnings) {
  fs::create_directories(config.output_dir);
  config.save_file(config.output_dir / "config.ini");

  stage_ingest(config, warnings);
  stage_simulate(config, warnings);
  stage_detect(config, warnings);
  stage_cluster(config, warnings);
  stage_report(config, warnings);

  json manifest;
  manifest["version"] = {{"mcoh", kVersion},
                         {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                       std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                       std::to_string(EIGEN_MINOR_VERSION)}};

  json config_echo;
  {
    std::ifstream ini(config.output_dir / "config.ini");
    std::string line;
    while (std::getline(ini, line)) {
      const auto eq = line.find(" = ");
      if (eq != std::string::npos)
        config_echo[line.substr(0, eq)] = line.substr(eq + 3);
    }
  }
  manifest["config"] = std::move(config_echo);

  const auto metas = read_windows_csv(config.output_dir / "windows.csv");
  json stages;
  auto hash_into = [&](json& stage, const std::string& name) {
    stage[name] = artifact_hash(config.output_dir / name);
  };
  {
    json stage;
    hash_into(stage, "panel.csv");
    stages["ingest"] = std::move(stage);
  }
  {
    json stage;
    hash_into(stage, "windows.csv");
    hash_into(stage, "strengths.csv");
    std::uint64_t combined = 14695981039346656037ULL;
    for (const auto& meta : metas) {
      const std::string h = artifact_hash(
          config.output_dir / "summaries" / ("summary_" + std::to_string(meta.index) + ".csv"));
      combined = fnv1a64(reinterpret_cast<const unsigned char*>(h.data()), h.size(), combined);
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(combined));
    stage["summaries"] = hex;
    stages["simulate"] = std::move(stage);
  }
  {
    json stage;
    hash_into(stage, "partitions.jsonl");
    hash_into(stage, "chi.csv");
    hash_into(stage, "coherent_sizes.csv");
    stages["detect"] = std::move(stage);
  }
  {
    json stage;
    hash_into(stage, "embedding.csv");
    hash_into(stage, "clusters.csv");
    stages["cluster"] = std::move(stage);
  }
  {
    json stage;
    hash_into(stage, "report.txt");
    if (!config.sector_map.empty()) {
      hash_into(stage, "sector_table.csv");
      hash_into(stage, "sector_table.txt");
    }
    stages["report"] = std::move(stage);
  }
  manifest["stages"] = std::move(stages);

  std::ofstream out(config.output_dir / "manifest.json");
  out << manifest.dump(2) << '\n';
  return manifest;
}

}  // namespace mcoh
