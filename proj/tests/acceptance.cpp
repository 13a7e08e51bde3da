// Acceptance suite: every release criterion as one pass/fail line, run via
// ctest or directly. Exit status is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cil/analysis.hpp"
#include "cil/config.hpp"
#include "cil/errors.hpp"
#include "cil/etf.hpp"
#include "cil/losses.hpp"
#include "cil/network.hpp"
#include "cil/ops.hpp"
#include "cil/protocol.hpp"
#include "cil/rng.hpp"
#include "oracles.hpp"

using namespace cil;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;
  double seconds = 0.0;
};

void check(Outcome& o, bool ok, const std::string& what) {
  if (!ok) {
    o.pass = false;
    if (!o.detail.empty()) o.detail += "; ";
    o.detail += what;
  }
}

// The shared incremental stream for criteria 5-8: eight 16-d blob classes,
// four base + two per increment, engine defaults otherwise.
RunConfig stream_config(std::uint64_t seed) {
  RunConfig cfg;
  cfg.blobs_classes = 8;
  cfg.blobs_per_class = 100;
  cfg.blobs_dim = 16;
  cfg.blobs_separation = 2.0;
  cfg.blobs_noise = 0.2;
  cfg.split_base = 4;
  cfg.split_inc = 2;
  cfg.seed = seed;
  return cfg;
}

const std::vector<std::uint64_t> kSeeds = {1, 2, 3, 4, 5};

// ---------------------------------------------------------------------------
// 1. ETF geometry across K, d, E_W, plus the 2->64 expansion chain
// ---------------------------------------------------------------------------
Outcome criterion_etf_geometry() {
  Outcome o;
  for (std::size_t K = 2; K <= 64; ++K) {
    for (std::size_t d : {K, K + 7}) {
      for (double E_W : {0.25, 1.0, 4.0}) {
        EtfClassifier c = build_etf(K, d, E_W, 1000 + K);
        const double res = verify_etf(c);
        check(o, res < 1e-9,
              "residual " + std::to_string(res) + " at K=" + std::to_string(K));
        if (!o.pass) return o;
      }
    }
  }
  for (double E_W : {0.25, 1.0, 4.0}) {
    EtfClassifier c = build_etf(2, 71, E_W, 99);
    for (std::size_t K = 3; K <= 64; ++K) {
      c = expand_etf(c, K);
      check(o, verify_etf(c) < 1e-9,
            "chain residual at K=" + std::to_string(K));
      for (std::size_t id = 0; id < K; ++id) {
        check(o, c.column_of(static_cast<int>(id)) == id,
              "class " + std::to_string(id) + " moved at K=" + std::to_string(K));
      }
      if (!o.pass) return o;
    }
  }
  return o;
}

// ---------------------------------------------------------------------------
// 2. Reverse-mode gradients vs central finite differences, 100 cases each
// ---------------------------------------------------------------------------
bool grads_match(Tensor& x, const std::function<Tensor()>& forward,
                 std::string& why) {
  auto ad = oracle::tape_gradient(x, forward);
  auto fd = oracle::fd_gradient(x, [&]() {
    NoGradScope ng;
    return forward().item();
  });
  for (std::size_t i = 0; i < ad.size(); ++i) {
    if (!oracle::close(ad[i], fd[i], 1e-4, 1e-7)) {
      std::ostringstream os;
      os << "component " << i << ": ad=" << ad[i] << " fd=" << fd[i];
      why = os.str();
      return false;
    }
  }
  return true;
}

Outcome criterion_gradient_suite() {
  Outcome o;
  Rng rng(2024);
  EtfClassifier etf = build_etf(4, 6, 2.0, 5);
  LossConfig cfg;
  cfg.E_Z = 1.5;
  cfg.lambda = 0.5;
  std::string why;

  auto rand_t = [&rng](std::vector<std::size_t> shape, bool rg = true) {
    Tensor t = Tensor::zeros(std::move(shape), rg);
    for (std::size_t i = 0; i < t.size(); ++i) t.at(i) = rng.gaussian(0, 1);
    return t;
  };

  for (int trial = 0; trial < 100 && o.pass; ++trial) {
    Tensor z = rand_t({6});
    Tensor w = rand_t({6}, false);
    check(o, grads_match(z, [&]() { return dot_regression_loss(z, w, 2.0, 1.5); }, why),
          "dot_regression_loss: " + why);

    Tensor prev = rand_t({5}, false);
    Tensor curr = rand_t({5});
    check(o, grads_match(curr, [&]() { return distill_pair_loss(prev, curr); }, why),
          "distill_pair_loss: " + why);

    check(o,
          grads_match(curr,
                      [&]() {
                        return total_loss(dot_regression_loss(z, w, 2.0, 1.5),
                                          distill_pair_loss(prev, curr), cfg);
                      },
                      why),
          "total_loss: " + why);
  }

  NetworkConfig nc;
  nc.input_dim = 6;
  nc.width = 6;
  nc.head_dim = 6;
  for (int trial = 0; trial < 100 && o.pass; ++trial) {
    ModelState m(nc, 3000 + trial);
    Tensor mu = rand_t({2, 6}, false);
    for (auto& [name, p] : m.named_params()) {
      if (name.rfind("adapt.", 0) != 0) continue;
      check(o,
            grads_match(p, [&]() { return mean_all(square(m.adapt_forward(mu))); },
                        why),
            "adapt layer " + name + ": " + why);
    }

    Rng brng(4000 + trial);
    ResidualBlock blk(4, 4, brng);
    ResidualBlock wide(8, 4, brng);
    Tensor x = rand_t({2, 4}, false);
    Tensor xw = rand_t({2, 8}, false);
    for (Tensor* p : {&blk.a1.W, &blk.a2.W, &blk.a1.b, &blk.a2.b}) {
      check(o,
            grads_match(*p, [&]() { return mean_all(square(blk.forward(x))); },
                        why),
            "residual block: " + why);
    }
    check(o,
          grads_match(wide.proj,
                      [&]() { return mean_all(square(wide.forward(xw))); }, why),
          "projection skip: " + why);
  }
  return o;
}

// ---------------------------------------------------------------------------
// 3. Metric oracles from the published benchmark rows
// ---------------------------------------------------------------------------
Outcome criterion_metric_oracles() {
  Outcome o;
  const std::vector<double> ours = {78.62, 74.67, 73.04, 68.20, 66.28, 64.69};
  check(o, std::abs(acc_avg(ours) - 70.92) <= 0.005, "acc_avg headline");
  check(o, std::abs(performance_drop(ours) - 13.93) <= 0.005, "pd headline");
  const std::vector<double> der = {76.50, 72.78, 71.40, 68.14, 65.84, 64.10};
  check(o, std::abs(performance_drop(der) - 12.40) <= 0.005, "pd reference row");
  return o;
}

// ---------------------------------------------------------------------------
// 4. Neural collapse on well-separated blobs, single task
// ---------------------------------------------------------------------------
Outcome criterion_collapse() {
  Outcome o;
  RunConfig cfg;
  cfg.blobs_classes = 6;
  cfg.blobs_per_class = 100;
  cfg.blobs_dim = 16;
  cfg.blobs_separation = 6.0;
  cfg.blobs_noise = 0.5;
  cfg.split_base = 6;
  cfg.split_inc = 0;
  cfg.schedule.epochs_base = 100;
  cfg.seed = 1;
  RunReport r = run_config(cfg);
  check(o, r.stages[0].acc >= 95.0,
        "test accuracy " + std::to_string(r.stages[0].acc));
  for (const auto& c : r.collapse.classes) {
    check(o, c.cos_to_prototype >= 0.9,
          "class " + std::to_string(c.class_id) + " cosine " +
              std::to_string(c.cos_to_prototype));
  }
  return o;
}

// ---------------------------------------------------------------------------
// 5. Incremental protocol invariants on the B4Inc2 stream
// ---------------------------------------------------------------------------
std::string frozen_blob(const ModelState& m) {
  std::string s;
  for (const auto& [name, p] : m.named_params()) {
    if (p.requires_grad()) continue;
    s += name;
    s.append(reinterpret_cast<const char*>(p.data()), p.size() * sizeof(double));
  }
  return s;
}

Outcome criterion_protocol() {
  Outcome o;
  RunConfig cfg = stream_config(1);
  std::map<std::size_t, std::uint64_t> start_hash, end_hash;
  RunHooks hooks;
  hooks.on_task_start = [&](std::size_t t, ModelState& m) {
    start_hash[t] = oracle::fnv1a(frozen_blob(m));
  };
  hooks.on_task_end = [&](std::size_t t, ModelState& m) {
    end_hash[t] = oracle::fnv1a(frozen_blob(m));
  };
  RunReport r = run_config(cfg, hooks);

  for (std::size_t t : {std::size_t{1}, std::size_t{2}}) {
    check(o, start_hash.at(t) == end_hash.at(t),
          "frozen hash changed in task " + std::to_string(t));
  }
  const std::vector<std::size_t> want_k = {4, 6, 8};
  for (std::size_t t = 0; t < 3; ++t) {
    check(o, r.stages[t].classes_seen == want_k[t],
          "K at stage " + std::to_string(t));
    check(o, r.stages[t].etf_residual < 1e-9,
          "Gram residual at stage " + std::to_string(t));
  }
  check(o, r.forbidden_reads == 0,
        std::to_string(r.forbidden_reads) + " forbidden train reads");
  return o;
}

// ---------------------------------------------------------------------------
// 6. Parallel expansion beats serial on mean pairwise expand-layer CKA
// ---------------------------------------------------------------------------
Outcome criterion_cka_direction() {
  Outcome o;
  int wins = 0;
  std::ostringstream detail;
  for (std::uint64_t s : kSeeds) {
    RunConfig par = stream_config(s);
    RunConfig ser = stream_config(s);
    ser.wiring = "serial";
    const double p = run_config(par).mean_offdiag_cka;
    const double q = run_config(ser).mean_offdiag_cka;
    if (p > q) ++wins;
    detail << " s" << s << ":" << (p > q ? "+" : "-");
  }
  check(o, wins >= 4, "parallel won " + std::to_string(wins) + "/5 only");
  o.detail += detail.str();
  return o;
}

// ---------------------------------------------------------------------------
// 7. Distillation benefit and lambda stability
// ---------------------------------------------------------------------------
Outcome criterion_distillation() {
  Outcome o;
  int wins = 0;
  for (std::uint64_t s : kSeeds) {
    RunConfig with = stream_config(s);  // lambda 0.5 default
    RunConfig without = stream_config(s);
    without.loss.lambda = 0.0;
    const double a = run_config(with).stages.back().old_class_acc;
    const double b = run_config(without).stages.back().old_class_acc;
    if (a >= b) ++wins;
  }
  check(o, wins >= 4,
        "lambda=0.5 >= lambda=0 on " + std::to_string(wins) + "/5 seeds only");

  // mean Acc_avg over the same seeds, per lambda; range across the grid
  double lo = 1e9, hi = -1e9;
  for (double lam : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    double mean = 0.0;
    for (std::uint64_t s : kSeeds) {
      RunConfig cfg = stream_config(s);
      cfg.loss.lambda = lam;
      mean += run_config(cfg).acc_average;
    }
    mean /= static_cast<double>(kSeeds.size());
    lo = std::min(lo, mean);
    hi = std::max(hi, mean);
  }
  std::ostringstream os;
  os << "lambda range " << hi - lo << " points";
  check(o, hi - lo <= 5.0, os.str());
  o.detail += (o.detail.empty() ? "" : "; ") + os.str();
  return o;
}

// ---------------------------------------------------------------------------
// 8. Full configuration vs single-component ablations
// ---------------------------------------------------------------------------
Outcome criterion_ablation_order() {
  Outcome o;
  int beats_fc = 0, beats_noadapt = 0;
  for (std::uint64_t s : kSeeds) {
    const double full = run_config(stream_config(s)).acc_average;
    RunConfig fc = stream_config(s);
    fc.head = "fc";
    RunConfig na = stream_config(s);
    na.adapt = false;
    if (full >= run_config(fc).acc_average) ++beats_fc;
    if (full >= run_config(na).acc_average) ++beats_noadapt;
  }
  check(o, beats_fc >= 3,
        "full >= fc head on " + std::to_string(beats_fc) + "/5 seeds only");
  check(o, beats_noadapt >= 3,
        "full >= no-adapt on " + std::to_string(beats_noadapt) + "/5 seeds only");
  o.detail += "fc " + std::to_string(beats_fc) + "/5, no-adapt " +
              std::to_string(beats_noadapt) + "/5";
  return o;
}

// ---------------------------------------------------------------------------
// 9. Byte-identical reports for identical configs
// ---------------------------------------------------------------------------
std::string file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

Outcome criterion_determinism() {
  Outcome o;
  RunConfig cfg = stream_config(2);
  cfg.blobs_per_class = 40;
  cfg.schedule.epochs_base = 25;
  cfg.schedule.epochs_inc = 15;
  write_report(run_config(cfg), "/tmp/cil_acc_det_a");
  write_report(run_config(cfg), "/tmp/cil_acc_det_b");
  check(o,
        file_bytes("/tmp/cil_acc_det_a/report.json") ==
            file_bytes("/tmp/cil_acc_det_b/report.json"),
        "report.json bytes differ between identical runs");
  return o;
}

struct Criterion {
  const char* name;
  double budget_s;
  std::function<Outcome()> fn;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"1 etf geometry", 5.0, criterion_etf_geometry},
      {"2 gradient suite", 30.0, criterion_gradient_suite},
      {"3 metric oracles", 5.0, criterion_metric_oracles},
      {"4 neural collapse", 60.0, criterion_collapse},
      {"5 incremental protocol", 90.0, criterion_protocol},
      {"6 parallel vs serial cka", 300.0, criterion_cka_direction},
      {"7 distillation benefit", 600.0, criterion_distillation},
      {"8 ablation ordering", 600.0, criterion_ablation_order},
      {"9 determinism", 60.0, criterion_determinism},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    o.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    if (o.seconds > c.budget_s) {
      o.pass = false;
      o.detail += (o.detail.empty() ? "" : "; ") + std::string("over budget");
    }
    std::printf("%s: criterion %s (%.1fs)%s%s\n", o.pass ? "PASS" : "FAIL",
                c.name, o.seconds, o.detail.empty() ? "" : " -- ",
                o.detail.c_str());
    if (!o.pass) ++failures;
  }
  return failures;
}
