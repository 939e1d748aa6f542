#include "laser/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "laser/error.hpp"

namespace laser {
namespace fs = std::filesystem;
namespace {

// Shortest round-trip representation, so text output is reproducible.
std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path.string() + "'");
  return out;
}

void write_traces(const fs::path& path, const std::vector<TraceRecord>& traces, const std::uint64_t* seed) {
  auto out = open_out(path);
  out << (seed ? "seed," : "") << "step,site,fidelity,rank,event\n";
  for (const TraceRecord& t : traces) {
    if (seed) out << *seed << ',';
    out << t.step << ',' << t.site << ',' << num(t.fidelity) << ',' << t.rank << ',' << t.event << '\n';
  }
}

nlohmann::ordered_json memory_json(const MemoryReport& m) {
  nlohmann::ordered_json j;
  j["bytes_per_elem"] = m.bytes_per_elem;
  j["sites"] = nlohmann::ordered_json::array();
  for (const SiteMemory& s : m.sites) {
    j["sites"].push_back({{"site", s.site},
                          {"label", s.label},
                          {"D", s.dim},
                          {"B_eff", s.b_eff},
                          {"n", s.cycles},
                          {"k_final", s.rank},
                          {"compressed", s.compressed},
                          {"elems_full", s.elems_full},
                          {"elems_compressed", s.elems_compressed},
                          {"bytes_full", s.bytes_full},
                          {"bytes_compressed", s.bytes_compressed},
                          {"savings_pct", s.savings_pct}});
  }
  j["total_bytes_full"] = m.total_bytes_full;
  j["total_bytes_compressed"] = m.total_bytes_compressed;
  j["total_savings_pct"] = m.total_savings_pct;
  j["eligible_bytes_full"] = m.eligible_bytes_full;
  j["eligible_bytes_compressed"] = m.eligible_bytes_compressed;
  j["eligible_savings_pct"] = m.eligible_savings_pct;
  return j;
}

nlohmann::ordered_json mean_std_json(const MeanStd& m) {
  return {{"mean", m.mean}, {"std", m.std}, {"count", m.count}};
}

std::string pm(const MeanStd& m) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f +/- %.2f", m.mean, m.std);
  return buf;
}

}  // namespace

MeanStd mean_std(std::span<const double> values) {
  MeanStd r;
  r.count = values.size();
  if (values.empty()) return r;
  r.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - r.mean) * (v - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return r;
}

Aggregate aggregate_seeds(const std::vector<SeedMetrics>& seeds) {
  Aggregate a;
  std::vector<double> acc, solve, savings;
  for (const SeedMetrics& s : seeds) {
    if (s.aborted) {
      ++a.aborted_seeds;
      continue;
    }
    acc.push_back(s.final_val_accuracy);
    solve.push_back(s.final_solve_rate);
    savings.push_back(s.memory.eligible_savings_pct);
  }
  a.val_accuracy = mean_std(acc);
  a.solve_rate = mean_std(solve);
  a.eligible_savings_pct = mean_std(savings);
  return a;
}

nlohmann::ordered_json to_json(const RunMetrics& m) {
  nlohmann::ordered_json j;
  j["config"] = to_json(m.config);
  j["aggregate"] = {{"val_accuracy", mean_std_json(m.aggregate.val_accuracy)},
                    {"solve_rate", mean_std_json(m.aggregate.solve_rate)},
                    {"eligible_savings_pct", mean_std_json(m.aggregate.eligible_savings_pct)},
                    {"aborted_seeds", m.aggregate.aborted_seeds}};
  j["seeds"] = nlohmann::ordered_json::array();
  for (const SeedMetrics& s : m.seeds) {
    nlohmann::ordered_json js;
    js["seed"] = s.seed;
    js["aborted"] = s.aborted;
    js["non_finite"] = s.non_finite;
    js["abort_reason"] = s.abort_reason;
    js["final"] = {{"val_accuracy", s.final_val_accuracy}, {"solve_rate", s.final_solve_rate}};
    js["skipped_steps"] = s.skipped_steps;
    js["hard_resets"] = s.hard_resets;
    js["memory"] = memory_json(s.memory);
    auto& steps = js["steps"] = nlohmann::ordered_json::array();
    for (const StepRecord& r : s.steps) {
      steps.push_back({{"step", r.step},
                       {"epoch", r.epoch},
                       {"loss", r.loss},
                       {"token_acc", r.token_accuracy},
                       {"lr", r.lr},
                       {"grad_norm", r.grad_norm},
                       {"skipped", r.skipped}});
    }
    auto& evals = js["evals"] = nlohmann::ordered_json::array();
    for (const EvalRecord& e : s.evals) {
      evals.push_back({{"epoch", e.epoch}, {"step", e.step}, {"val_acc", e.val_accuracy}, {"solve_rate", e.solve_rate}});
    }
    auto& traces = js["traces"] = nlohmann::ordered_json::array();
    for (const TraceRecord& t : s.traces) {
      traces.push_back({{"step", t.step}, {"site", t.site}, {"fidelity", t.fidelity}, {"rank", t.rank}, {"event", t.event}});
    }
    auto& shadows = js["shadows"] = nlohmann::ordered_json::array();
    for (const ShadowRecord& r : s.shadows) {
      shadows.push_back({{"step", r.step},
                         {"site", r.site},
                         {"rank", r.rank},
                         {"active", r.active},
                         {"oracle", r.oracle},
                         {"static", r.static_basis},
                         {"random", r.random}});
    }
    j["seeds"].push_back(std::move(js));
  }
  return j;
}

std::string summary_table(std::span<const RunMetrics> runs) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-10s %-6s %-18s %-18s %-16s %-16s %-10s\n", "mode", "seeds", "val_acc (%)",
                "solved (%)", "act_bytes_full", "act_bytes_ours", "saved (%)");
  out += line;
  for (const RunMetrics& r : runs) {
    const SeedMetrics* ref = nullptr;
    for (const SeedMetrics& s : r.seeds) {
      if (!s.aborted) {
        ref = &s;
        break;
      }
    }
    const std::uint64_t full = ref ? ref->memory.total_bytes_full : 0;
    const std::uint64_t ours = ref ? ref->memory.total_bytes_compressed : 0;
    const double saved = ref ? ref->memory.total_savings_pct : 0.0;
    std::snprintf(line, sizeof line, "%-10s %-6zu %-18s %-18s %-16llu %-16llu %-10.2f\n", to_string(r.config.mode),
                  r.aggregate.val_accuracy.count, pm(r.aggregate.val_accuracy).c_str(),
                  pm(r.aggregate.solve_rate).c_str(), static_cast<unsigned long long>(full),
                  static_cast<unsigned long long>(ours), saved);
    out += line;
  }
  return out;
}

void emit_metrics(const RunMetrics& m, const fs::path& dir) {
  fs::create_directories(dir / "plotdata");
  open_out(dir / "metrics.json") << to_json(m).dump(2) << '\n';
  open_out(dir / "config.toml") << to_text(m.config);

  {
    auto out = open_out(dir / "traces.csv");
    out << "seed,step,site,fidelity,rank,event\n";
  }
  for (const SeedMetrics& s : m.seeds) {
    const fs::path seed_dir = dir / ("seed_" + std::to_string(s.seed));
    fs::create_directories(seed_dir);
    write_traces(seed_dir / "traces.csv", s.traces, nullptr);
    {
      std::ofstream all(dir / "traces.csv", std::ios::binary | std::ios::app);
      for (const TraceRecord& t : s.traces) {
        all << s.seed << ',' << t.step << ',' << t.site << ',' << num(t.fidelity) << ',' << t.rank << ','
            << t.event << '\n';
      }
    }
    const std::string tag = std::to_string(s.seed);
    {
      auto out = open_out(dir / "plotdata" / ("loss_" + tag + ".csv"));
      out << "step,epoch,loss,token_acc,lr,grad_norm,skipped\n";
      for (const StepRecord& r : s.steps) {
        out << r.step << ',' << r.epoch << ',' << num(r.loss) << ',' << num(r.token_accuracy) << ',' << num(r.lr)
            << ',' << num(r.grad_norm) << ',' << (r.skipped ? 1 : 0) << '\n';
      }
    }
    {
      auto out = open_out(dir / "plotdata" / ("eval_" + tag + ".csv"));
      out << "epoch,step,val_acc,solve_rate\n";
      for (const EvalRecord& e : s.evals) {
        out << e.epoch << ',' << e.step << ',' << num(e.val_accuracy) << ',' << num(e.solve_rate) << '\n';
      }
    }
    {
      auto out = open_out(dir / "plotdata" / ("shadow_" + tag + ".csv"));
      out << "step,site,rank,active,oracle,static,random\n";
      for (const ShadowRecord& r : s.shadows) {
        out << r.step << ',' << r.site << ',' << r.rank << ',' << num(r.active) << ',' << num(r.oracle) << ','
            << num(r.static_basis) << ',' << num(r.random) << '\n';
      }
    }
  }
  {
    auto out = open_out(dir / "plotdata" / "memory.csv");
    out << "seed,site,label,D,B_eff,n,k_final,compressed,bytes_full,bytes_compressed,savings_pct\n";
    for (const SeedMetrics& s : m.seeds) {
      for (const SiteMemory& sm : s.memory.sites) {
        out << s.seed << ',' << sm.site << ',' << sm.label << ',' << sm.dim << ',' << sm.b_eff << ',' << sm.cycles
            << ',' << sm.rank << ',' << (sm.compressed ? 1 : 0) << ',' << sm.bytes_full << ','
            << sm.bytes_compressed << ',' << num(sm.savings_pct) << '\n';
      }
    }
  }

  auto summary = open_out(dir / "summary.txt");
  summary << summary_table(std::span(&m, 1));
  summary << "\nper seed:\n";
  for (const SeedMetrics& s : m.seeds) {
    char line[256];
    if (s.aborted) {
      std::snprintf(line, sizeof line, "  seed %llu: ABORTED (%s)\n", static_cast<unsigned long long>(s.seed),
                    s.abort_reason.c_str());
    } else {
      std::snprintf(line, sizeof line,
                    "  seed %llu: val_acc %.2f  solved %.2f  skipped %zu  resets %zu  eligible saved %.2f%%\n",
                    static_cast<unsigned long long>(s.seed), s.final_val_accuracy, s.final_solve_rate,
                    s.skipped_steps, s.hard_resets, s.memory.eligible_savings_pct);
    }
    summary << line;
  }
  summary << "\nstd is the sample standard deviation over completed seeds (n - 1 denominator).\n";
}

}  // namespace laser
