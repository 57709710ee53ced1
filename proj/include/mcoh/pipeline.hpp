#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "mcoh/market_data.hpp"
#include "mcoh/oscillator_sim.hpp"
#include "mcoh/warnings.hpp"

namespace mcoh {

// Everything a full run needs; round-trips through a key=value file with
// unknown keys rejected.
struct PipelineConfig {
  std::filesystem::path input;
  std::filesystem::path output_dir;
  std::filesystem::path sector_map;  // optional
  WindowSpec window;
  SimParams sim;
  double epsilon = 1e-3;
  int neighbor_k = 10;
  int clusters = 3;
  int restarts = 10;
  int window_begin = 0;  // window range feeding the clustering stage
  int window_end = -1;   // -1: through the last window
  int jobs = 1;
  bool dump_matrices = false;

  static PipelineConfig load_file(const std::filesystem::path& path);
  void save_file(const std::filesystem::path& path) const;
};

// Stages communicate through files in config.output_dir so any stage can be
// rerun from the artifacts of the previous one.
void stage_ingest(const PipelineConfig& config, WarningLog& warnings);
void stage_simulate(const PipelineConfig& config, WarningLog& warnings);
void stage_detect(const PipelineConfig& config, WarningLog& warnings);
void stage_cluster(const PipelineConfig& config, WarningLog& warnings);
void stage_report(const PipelineConfig& config, WarningLog& warnings);

// ingest -> simulate -> detect -> cluster -> report, then manifest.json with
// the config echo and per-stage artifact hashes.
nlohmann::json run_pipeline(const PipelineConfig& config, WarningLog& warnings);

// FNV-1a 64 over the file bytes, hex encoded.
std::string artifact_hash(const std::filesystem::path& path);

}  // namespace mcoh
