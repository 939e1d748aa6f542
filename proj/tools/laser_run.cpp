// Trains the recursive model under one compression mode for a list of seeds.
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "laser/config.hpp"
#include "laser/error.hpp"
#include "laser/harness.hpp"
#include "laser/metrics.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Train with activation compression"};
  std::string config_path, mode, seeds, out, data;
  std::size_t epochs = 0, max_steps = 0;
  app.add_option("--config", config_path, "Run config file; defaults apply when omitted");
  app.add_option("--mode", mode, "baseline | laser | oracle | static | random");
  app.add_option("--seeds", seeds, "Comma-separated seeds, e.g. 100,101,102");
  app.add_option("--out", out, "Output directory");
  app.add_option("--data", data, "Dataset file");
  app.add_option("--epochs", epochs, "Override train.epochs");
  app.add_option("--max-steps", max_steps, "Stop each seed after this many steps");
  CLI11_PARSE(app, argc, argv);
  laser::tune_allocator();

  laser::RunConfig config;
  try {
    config = config_path.empty() ? laser::RunConfig{} : laser::load_config(config_path);
    if (!mode.empty()) config.mode = laser::run_mode_from_name(mode);
    if (!seeds.empty()) config.seeds = laser::parse_seed_list(seeds);
    if (!out.empty()) config.output_dir = out;
    if (!data.empty()) config.dataset_path = data;
    if (epochs > 0) config.epochs = epochs;
    if (max_steps > 0) config.max_steps = max_steps;
    config.validate();
  } catch (const laser::Error& e) {
    std::cerr << "laser-run: " << e.what() << "\n";
    return 2;
  }

  try {
    const laser::RunMetrics metrics = laser::run_experiment(config, &std::cerr);
    laser::emit_metrics(metrics, config.output_dir);
    std::cout << laser::summary_table(std::span(&metrics, 1));
    std::cout << "outputs in " << config.output_dir << "\n";
    for (const auto& s : metrics.seeds) {
      if (s.aborted) {
        std::cerr << "laser-run: seed " << s.seed << " failed: " << s.abort_reason << "\n";
        return 1;
      }
    }
  } catch (const laser::Error& e) {
    std::cerr << "laser-run: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
