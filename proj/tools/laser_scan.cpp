// Oracle-SVD fidelity of saved checkpoints over a grid of ranks and bit depths.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "laser/checkpoint.hpp"
#include "laser/config.hpp"
#include "laser/error.hpp"
#include "laser/harness.hpp"
#include "laser/maze.hpp"
#include "laser/scan.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
  CLI::App app{"Spectral scan of training checkpoints"};
  std::string ckpt_dir, ranks = "8,16,32,64", bits = "0,8", out, scale = "maxabs", sites;
  std::size_t probe_count = 32;
  app.add_option("--ckpt-dir", ckpt_dir, "Directory searched recursively for checkpoints")->required();
  app.add_option("--ranks", ranks, "Comma-separated ranks");
  app.add_option("--bits", bits, "Comma-separated bit depths; 0 means unquantized");
  app.add_option("--scale", scale, "Quantizer scale: maxabs | foursigma");
  app.add_option("--sites", sites, "Comma-separated sites (default: all)");
  app.add_option("--probe", probe_count, "Validation mazes used as the probe set")->check(CLI::PositiveNumber);
  app.add_option("--out", out, "CSV output (default <ckpt-dir>/scan.csv)");
  CLI11_PARSE(app, argc, argv);
  laser::tune_allocator();

  try {
    laser::ScanOptions options;
    options.ranks = laser::parse_size_list(ranks);
    options.bit_depths.clear();
    for (std::size_t b : laser::parse_size_list(bits)) options.bit_depths.push_back(static_cast<int>(b));
    if (scale == "maxabs") {
      options.scale_mode = laser::quant::ScaleMode::MaxAbs;
    } else if (scale == "foursigma") {
      options.scale_mode = laser::quant::ScaleMode::FourSigma;
    } else {
      throw laser::Error(laser::ErrorKind::InvalidConfig, "unknown scale '" + scale + "'");
    }
    if (!sites.empty()) {
      options.sites.clear();
      std::stringstream ss(sites);
      std::string name;
      while (std::getline(ss, name, ',')) options.sites.push_back(laser::model::site_from_name(name));
    }

    std::vector<laser::Checkpoint> checkpoints;
    for (const fs::path& stem : laser::find_checkpoints(ckpt_dir)) checkpoints.push_back(laser::load_checkpoint(stem));
    if (checkpoints.empty()) throw laser::Error(laser::ErrorKind::Io, "no checkpoints under '" + ckpt_dir + "'");

    // Probe set: the head of the validation split of the run's own dataset.
    const auto& first = checkpoints.front().manifest;
    const auto& data_cfg = first.config.at("data");
    const auto all = laser::maze::read_dataset(first.dataset_path);
    const auto split = laser::maze::split_dataset(all, data_cfg.at("train_count").get<std::size_t>(),
                                                  data_cfg.at("val_count").get<std::size_t>());
    std::vector<laser::maze::MazeInstance> probe(split.val.begin(),
                                                 split.val.begin() + std::min(probe_count, split.val.size()));

    for (auto& ck : checkpoints) ck.stem = fs::relative(ck.stem, ckpt_dir);
    const auto rows = laser::spectral_scan(checkpoints, probe, options);
    const fs::path out_path = out.empty() ? fs::path(ckpt_dir) / "scan.csv" : fs::path(out);
    laser::write_scan_csv(rows, out_path);

    std::printf("%-28s %6s %-14s %5s %5s %10s\n", "checkpoint", "step", "site", "rank", "bits", "fidelity");
    for (const auto& r : rows) {
      std::printf("%-28s %6zu %-14s %5zu %5d %10.6f\n", r.run.c_str(), r.step, r.site.c_str(), r.rank, r.bits,
                  r.fidelity);
    }
    std::printf("%zu rows written to %s\n", rows.size(), out_path.c_str());
  } catch (const laser::Error& e) {
    std::cerr << "laser-scan: " << e.what() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "laser-scan: bad checkpoint manifest: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
