// Generates a dataset of perfect mazes with shortest-path targets.
#include <cstdio>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "laser/error.hpp"
#include "laser/maze.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate maze datasets"};
  std::size_t size = 7;
  std::size_t count = 2500;
  std::uint64_t seed = 100;
  std::string out = "data/mazes.bin";
  bool show = false;
  app.add_option("--size", size, "Grid side length (odd, >= 5)");
  app.add_option("--count", count, "Number of distinct mazes")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "Generator seed");
  app.add_option("--out", out, "Output file");
  app.add_flag("--show", show, "Print the first maze");
  CLI11_PARSE(app, argc, argv);

  try {
    const auto mazes = laser::maze::generate_dataset(count, size, seed);
    const std::filesystem::path path(out);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    laser::maze::write_dataset(mazes, out);
    std::printf("wrote %zu mazes (%zux%zu) to %s\n", mazes.size(), size, size, out.c_str());
    if (show) {
      std::cout << laser::maze::render(mazes.front().input, size) << "\n"
                << laser::maze::render(mazes.front().target, size);
    }
  } catch (const laser::Error& e) {
    std::cerr << "maze-gen: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
