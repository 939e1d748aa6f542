#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>

#include "laser/config.hpp"
#include "laser/maze.hpp"
#include "laser/metrics.hpp"
#include "laser/providers.hpp"

namespace laser {

// Reads config.dataset_path and splits it. Throws ErrorKind::InvalidConfig if
// the file holds too few instances or grids of the wrong size.
maze::DatasetSplit load_split(const RunConfig& config);

// Provider for `site` under config.mode at the site's initial rank; nullptr in
// Baseline mode.
std::unique_ptr<BasisProvider> make_provider(const RunConfig& config, model::Site site, std::uint64_t seed);

// Trains one seed. Errors raised by training abort the seed and are recorded
// in the result rather than thrown. Progress lines go to `log` if given.
SeedMetrics run_seed(const RunConfig& config, std::uint64_t seed, const maze::DatasetSplit& data,
                     std::ostream* log = nullptr);

// Keeps large freed blocks in the heap instead of returning them to the OS.
// Training reallocates the same tape-sized buffers every step, and on glibc
// the default mmap threshold turns each of them into fresh page faults.
void tune_allocator();

// Every seed in config.seeds, in order, plus the aggregate.
RunMetrics run_experiment(const RunConfig& config, std::ostream* log = nullptr);

}  // namespace laser
