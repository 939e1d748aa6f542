#include "laser/scan.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "laser/error.hpp"
#include "laser/linalg.hpp"
#include "laser/train.hpp"

namespace laser {

std::vector<ScanRow> spectral_scan(const std::vector<Checkpoint>& checkpoints,
                                   const std::vector<maze::MazeInstance>& probe, const ScanOptions& options) {
  if (checkpoints.size() < 2) {
    throw Error(ErrorKind::InvalidConfig, "spectral scan needs at least two checkpoints, got " +
                                              std::to_string(checkpoints.size()));
  }
  if (probe.empty()) throw Error(ErrorKind::InvalidConfig, "spectral scan: empty probe set");
  if (options.ranks.empty()) throw Error(ErrorKind::InvalidConfig, "spectral scan: no ranks given");

  std::vector<std::size_t> idx(probe.size());
  std::iota(idx.begin(), idx.end(), 0);
  const TokenBatch batch = make_batch(probe, idx);

  std::vector<ScanRow> rows;
  for (const Checkpoint& ck : checkpoints) {
    if (ck.model.seq_len != probe.front().cells()) {
      throw Error(ErrorKind::ShapeMismatch, "checkpoint '" + ck.stem.string() + "' expects sequences of " +
                                                std::to_string(ck.model.seq_len));
    }
    const auto fwd = model::forward_recursive(ck.params, ck.model, batch.inputs, batch.size);
    for (model::Site site : options.sites) {
      std::vector<Matrix> per_cycle;
      for (std::size_t c = 0; c < ck.model.cycles; ++c) per_cycle.push_back(fwd.tape.entry(site, c).value());
      const Matrix x = vstack(per_cycle);
      const double x_norm = linalg::frobenius_norm(x);
      const std::size_t dim = x.cols();

      std::size_t top = 0;
      for (std::size_t k : options.ranks) {
        if (k >= 1 && k <= dim) top = std::max(top, k);
      }
      if (top == 0) continue;
      const Matrix q = linalg::truncated_svd(x, std::min(top, x.rows()));

      for (std::size_t k : options.ranks) {
        if (k < 1 || k > dim || k > q.cols()) continue;
        const Matrix z = matmul(x, q.col_block(0, k));
        for (int bits : options.bit_depths) {
          ScanRow r;
          r.run = ck.stem.string();
          r.step = ck.manifest.step;
          r.site = model::site_name(site);
          r.dim = dim;
          r.rank = k;
          r.bits = bits;
          if (bits == 0) {
            r.fidelity = fidelity(z, x);
          } else {
            const Matrix zq = quant::fake_quantize(z, bits, options.scale_mode);
            const double zq_norm = linalg::frobenius_norm(zq);
            r.fidelity = (x_norm > 0.0 && zq_norm > 0.0) ? linalg::frobenius_dot(z, zq) / (x_norm * zq_norm) : 1.0;
          }
          rows.push_back(std::move(r));
        }
      }
    }
  }
  return rows;
}

void write_scan_csv(const std::vector<ScanRow>& rows, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path.string() + "'");
  out << "run,step,site,dim,rank,bits,fidelity\n";
  char buf[32];
  for (const ScanRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g", r.fidelity);
    out << r.run << ',' << r.step << ',' << r.site << ',' << r.dim << ',' << r.rank << ',' << r.bits << ',' << buf
        << '\n';
  }
}

}  // namespace laser
