// Command-line front end for the market-coherence pipeline.
//
// Stages communicate through files in the output directory, so each
// subcommand can be run on its own against the artifacts of the previous
// one, and `run` chains them all and writes a manifest.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "mcoh/errors.hpp"
#include "mcoh/market_data.hpp"
#include "mcoh/pipeline.hpp"
#include "mcoh/version.hpp"
#include "mcoh/warnings.hpp"

namespace {

struct Flags {
  std::string config_file;
  std::string input, out, sectors;
  int width = 0, step = 0, transient = 0, measure = 0;
  double omega = 0, alpha = 0, dt = 0, epsilon = 0;
  std::uint64_t seed = 0;
  int neighbor_k = 0, clusters = 0, restarts = 0;
  int window_begin = 0, window_end = 0, jobs = 0;
  bool dump_matrices = false;
};

// Registers the shared pipeline options on a subcommand. Values are applied
// on top of --config after parsing, so explicit flags win.
void add_pipeline_options(CLI::App* cmd, Flags& flags) {
  cmd->add_option("--config", flags.config_file, "key=value config file to start from");
  cmd->add_option("-i,--input", flags.input, "input price CSV (wide or long form)");
  cmd->add_option("-o,--out", flags.out, "output directory for artifacts");
  cmd->add_option("--width", flags.width, "window width in return days")->check(CLI::PositiveNumber);
  cmd->add_option("--step", flags.step, "window step in days")->check(CLI::PositiveNumber);
  cmd->add_option("--omega", flags.omega, "shared natural frequency");
  cmd->add_option("--alpha", flags.alpha, "phase lag");
  cmd->add_option("--dt", flags.dt, "integration step");
  cmd->add_option("--transient", flags.transient, "transient steps before measuring");
  cmd->add_option("--measure", flags.measure, "measurement steps");
  cmd->add_option("--seed", flags.seed, "master seed");
  cmd->add_option("--epsilon", flags.epsilon, "velocity-std threshold for coherence");
  cmd->add_option("--neighbor-k", flags.neighbor_k, "k for the embedding graph");
  cmd->add_option("--clusters", flags.clusters, "number of clusters");
  cmd->add_option("--restarts", flags.restarts, "k-means restarts");
  cmd->add_option("--window-begin", flags.window_begin, "first window fed to clustering");
  cmd->add_option("--window-end", flags.window_end, "one past the last clustered window (-1: all)");
  cmd->add_option("-j,--jobs", flags.jobs, "parallel window workers");
  cmd->add_option("--sectors", flags.sectors, "ticker,sector[,classification] CSV");
  cmd->add_flag("--dump-matrices", flags.dump_matrices,
                "write corr_<w>.csv and coupling_<w>.csv per window");
}

mcoh::PipelineConfig build_config(const CLI::App* cmd, const Flags& flags) {
  mcoh::PipelineConfig config;
  if (cmd->count("--config"))
    config = mcoh::PipelineConfig::load_file(flags.config_file);
  if (cmd->count("--input")) config.input = flags.input;
  if (cmd->count("--out")) config.output_dir = flags.out;
  if (cmd->count("--sectors")) config.sector_map = flags.sectors;
  if (cmd->count("--width")) config.window.width = flags.width;
  if (cmd->count("--step")) config.window.step = flags.step;
  if (cmd->count("--omega")) config.sim.omega = flags.omega;
  if (cmd->count("--alpha")) config.sim.alpha = flags.alpha;
  if (cmd->count("--dt")) config.sim.dt = flags.dt;
  if (cmd->count("--transient")) config.sim.transient_steps = flags.transient;
  if (cmd->count("--measure")) config.sim.measure_steps = flags.measure;
  if (cmd->count("--seed")) config.sim.seed = flags.seed;
  if (cmd->count("--epsilon")) config.epsilon = flags.epsilon;
  if (cmd->count("--neighbor-k")) config.neighbor_k = flags.neighbor_k;
  if (cmd->count("--clusters")) config.clusters = flags.clusters;
  if (cmd->count("--restarts")) config.restarts = flags.restarts;
  if (cmd->count("--window-begin")) config.window_begin = flags.window_begin;
  if (cmd->count("--window-end")) config.window_end = flags.window_end;
  if (cmd->count("--jobs")) config.jobs = flags.jobs;
  if (cmd->count("--dump-matrices")) config.dump_matrices = flags.dump_matrices;
  if (config.output_dir.empty())
    throw mcoh::config_error("an output directory is required (--out)");
  return config;
}

void print_warnings(const mcoh::WarningLog& warnings) {
  for (const auto& line : warnings.snapshot()) std::cerr << "warning: " << line << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coupled-oscillator coherence analysis of stock price panels"};
  app.set_version_flag("--version", mcoh::kVersion);
  app.require_subcommand(1);

  Flags flags;

  // synth has its own generator arguments.
  std::string blocks_arg = "20:0.85";
  int synth_noise = 30;
  int synth_days = 500;
  std::uint64_t synth_seed = 42;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "generate a synthetic factor-model panel");
  synth->add_option("-o,--out", synth_out, "output directory")->required();
  synth->add_option("--blocks", blocks_arg, "comma-separated count:loading blocks");
  synth->add_option("--noise", synth_noise, "independent noise stocks");
  synth->add_option("--days", synth_days, "price days");
  synth->add_option("--seed", synth_seed, "generator seed");

  auto* ingest = app.add_subcommand("ingest", "normalize an input panel to panel.csv");
  auto* simulate = app.add_subcommand("simulate", "window, couple and integrate the panel");
  auto* detect = app.add_subcommand("detect", "split each window into coherent/incoherent");
  auto* cluster = app.add_subcommand("cluster", "embed coherence histories and cluster");
  auto* report = app.add_subcommand("report", "render the size series and sector table");
  auto* run = app.add_subcommand("run", "run the whole pipeline and write a manifest");
  for (auto* cmd : {ingest, simulate, detect, cluster, report, run})
    add_pipeline_options(cmd, flags);

  try {
    app.parse(argc, argv);

    mcoh::WarningLog warnings;
    if (synth->parsed()) {
      std::vector<mcoh::BlockSpec> blocks;
      std::stringstream stream(blocks_arg);
      std::string item;
      while (std::getline(stream, item, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos)
          throw mcoh::config_error("--blocks expects count:loading, got '" + item + "'");
        blocks.push_back(mcoh::BlockSpec{std::stoi(item.substr(0, colon)),
                                         std::stod(item.substr(colon + 1))});
      }
      const mcoh::PricePanel panel = mcoh::synthetic_market_blocks(
          blocks, synth_noise, synth_days, synth_seed);
      std::filesystem::create_directories(synth_out);
      mcoh::save_panel(panel, std::filesystem::path(synth_out) / "panel.csv");
      std::cout << "wrote " << synth_out << "/panel.csv: " << panel.size()
                << " stocks x " << panel.days() << " days\n";
      return 0;
    }

    const CLI::App* active = app.get_subcommands().front();
    const mcoh::PipelineConfig config = build_config(active, flags);

    if (ingest->parsed()) {
      mcoh::stage_ingest(config, warnings);
      std::cout << "wrote " << (config.output_dir / "panel.csv").string() << '\n';
    } else if (simulate->parsed()) {
      mcoh::stage_simulate(config, warnings);
      std::cout << "wrote per-window summaries under "
                << (config.output_dir / "summaries").string() << '\n';
    } else if (detect->parsed()) {
      mcoh::stage_detect(config, warnings);
      std::cout << "wrote " << (config.output_dir / "partitions.jsonl").string() << '\n';
    } else if (cluster->parsed()) {
      mcoh::stage_cluster(config, warnings);
      std::cout << "wrote " << (config.output_dir / "clusters.csv").string() << '\n';
    } else if (report->parsed()) {
      mcoh::stage_report(config, warnings);
      std::ifstream rendered(config.output_dir / "report.txt");
      std::cout << rendered.rdbuf();
    } else if (run->parsed()) {
      mcoh::run_pipeline(config, warnings);
      std::cout << "pipeline complete; manifest at "
                << (config.output_dir / "manifest.json").string() << '\n';
    }
    print_warnings(warnings);
    return 0;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
    app.exit(e);
    return 1;
  } catch (const mcoh::config_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const mcoh::data_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const mcoh::numerical_error& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
