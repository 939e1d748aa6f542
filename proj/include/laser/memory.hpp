#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "laser/config.hpp"

namespace laser {

// Analytical activation storage for one capture site over all cycles.
// Element counts are exact integers; bytes multiply by bytes_per_elem.
struct SiteMemory {
  std::string site;
  std::string label;
  std::size_t dim = 0;     // D
  std::size_t b_eff = 0;   // batch * seq_len
  std::size_t cycles = 0;  // n
  std::size_t rank = 0;    // k; equals dim for uncompressed sites
  bool compressed = false;
  std::uint64_t elems_full = 0;        // n * B_eff * D
  std::uint64_t elems_compressed = 0;  // n * B_eff * k + D * k, or elems_full if not compressed
  std::uint64_t bytes_full = 0;
  std::uint64_t bytes_compressed = 0;
  double savings_pct = 0.0;
};

struct MemoryReport {
  std::size_t bytes_per_elem = 2;
  std::vector<SiteMemory> sites;
  std::uint64_t total_bytes_full = 0;
  std::uint64_t total_bytes_compressed = 0;
  double total_savings_pct = 0.0;
  // Restricted to compressed sites.
  std::uint64_t eligible_bytes_full = 0;
  std::uint64_t eligible_bytes_compressed = 0;
  double eligible_savings_pct = 0.0;
};

SiteMemory site_memory(const std::string& site, std::size_t dim, std::size_t b_eff, std::size_t cycles,
                       std::size_t rank, bool compressed, std::size_t bytes_per_elem);

struct SiteRank {
  model::Site site;
  std::size_t rank;
};

// Every capture site of `cfg`; sites listed in `final_ranks` are compressed.
MemoryReport memory_report(const model::ModelConfig& cfg, std::size_t batch_size,
                           const std::vector<SiteRank>& final_ranks, std::size_t bytes_per_elem);

}  // namespace laser
