#include "laser/memory.hpp"

#include "laser/error.hpp"

namespace laser {
namespace {

double savings(std::uint64_t full, std::uint64_t compressed) {
  if (full == 0) return 0.0;
  return 100.0 * (1.0 - static_cast<double>(compressed) / static_cast<double>(full));
}

}  // namespace

SiteMemory site_memory(const std::string& site, std::size_t dim, std::size_t b_eff, std::size_t cycles,
                       std::size_t rank, bool compressed, std::size_t bytes_per_elem) {
  if (compressed && (rank == 0 || rank > dim)) {
    throw Error(ErrorKind::InvalidConfig, "memory: rank of site " + site + " must be in [1, D]");
  }
  SiteMemory m;
  m.site = site;
  m.dim = dim;
  m.b_eff = b_eff;
  m.cycles = cycles;
  m.compressed = compressed;
  m.rank = compressed ? rank : dim;
  const std::uint64_t rows = static_cast<std::uint64_t>(cycles) * b_eff;
  m.elems_full = rows * dim;
  m.elems_compressed = compressed ? rows * m.rank + static_cast<std::uint64_t>(dim) * m.rank : m.elems_full;
  m.bytes_full = m.elems_full * bytes_per_elem;
  m.bytes_compressed = m.elems_compressed * bytes_per_elem;
  m.savings_pct = savings(m.elems_full, m.elems_compressed);
  return m;
}

MemoryReport memory_report(const model::ModelConfig& cfg, std::size_t batch_size,
                           const std::vector<SiteRank>& final_ranks, std::size_t bytes_per_elem) {
  MemoryReport r;
  r.bytes_per_elem = bytes_per_elem;
  const std::size_t b_eff = batch_size * cfg.seq_len;
  for (model::Site s : model::kAllSites) {
    const SiteRank* hit = nullptr;
    for (const SiteRank& sr : final_ranks) {
      if (sr.site == s) hit = &sr;
    }
    SiteMemory m = site_memory(model::site_name(s), model::site_dim(cfg, s), b_eff, cfg.cycles,
                               hit ? hit->rank : 0, hit != nullptr, bytes_per_elem);
    m.label = model::site_label(cfg, s);
    r.total_bytes_full += m.bytes_full;
    r.total_bytes_compressed += m.bytes_compressed;
    if (m.compressed) {
      r.eligible_bytes_full += m.bytes_full;
      r.eligible_bytes_compressed += m.bytes_compressed;
    }
    r.sites.push_back(std::move(m));
  }
  r.total_savings_pct = savings(r.total_bytes_full, r.total_bytes_compressed);
  r.eligible_savings_pct = savings(r.eligible_bytes_full, r.eligible_bytes_compressed);
  return r;
}

}  // namespace laser
