#include "cil/protocol.hpp"

#include <algorithm>
#include <cmath>

#include "cil/errors.hpp"
#include "cil/ops.hpp"
#include "cil/optim.hpp"
#include "cil/rng.hpp"

namespace cil {

const char* to_string(DecayMode m) {
  switch (m) {
    case DecayMode::none: return "none";
    case DecayMode::step_mult: return "step_mult";
    case DecayMode::per_epoch_mult: return "per_epoch_mult";
  }
  return "none";
}

DecayMode decay_from_string(const std::string& s) {
  if (s == "none") return DecayMode::none;
  if (s == "step_mult") return DecayMode::step_mult;
  if (s == "per_epoch_mult") return DecayMode::per_epoch_mult;
  throw ConfigError("decay_mode must be none|step_mult|per_epoch_mult, got '" +
                    s + "'");
}

namespace {
double decayed(const TrainSchedule& s, double lr0, std::size_t epoch) {
  switch (s.decay_mode) {
    case DecayMode::none:
      return lr0;
    case DecayMode::step_mult:
      return epoch >= s.decay_at ? lr0 * s.decay_factor : lr0;
    case DecayMode::per_epoch_mult: {
      const std::size_t n = epoch > s.decay_at ? epoch - s.decay_at : 0;
      return lr0 * std::pow(s.decay_factor, static_cast<double>(n));
    }
  }
  return lr0;
}
}  // namespace

double lr_at(const TrainSchedule& s, std::size_t epoch) {
  return decayed(s, s.lr0, epoch);
}

double lr_at_stage(const TrainSchedule& s, std::size_t task, std::size_t epoch) {
  return decayed(s, s.stage_lr0(task), epoch);
}

namespace {

// Per-class shuffled rows interleaved round-robin, so minibatches stay
// class-balanced within the current task.
std::vector<std::size_t> balanced_order(const Task& task, const Dataset& ds,
                                        Rng& rng) {
  std::vector<std::vector<std::size_t>> per_class;
  std::size_t longest = 0;
  for (int label : task.labels) {
    std::vector<std::size_t> rows;
    for (std::size_t r : task.train_rows)
      if (ds.labels[r] == label) rows.push_back(r);
    rng.shuffle(rows.begin(), rows.end());
    longest = std::max(longest, rows.size());
    per_class.push_back(std::move(rows));
  }
  std::vector<std::size_t> order;
  order.reserve(task.train_rows.size());
  for (std::size_t k = 0; k < longest; ++k)
    for (const auto& rows : per_class)
      if (k < rows.size()) order.push_back(rows[k]);
  return order;
}

std::vector<std::size_t> head_columns(const ModelState& m,
                                      const std::vector<int>& labels) {
  std::vector<std::size_t> cols(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto it = m.fc().class_map.find(labels[i]);
    if (it == m.fc().class_map.end()) {
      throw LabelError("protocol: class id " + std::to_string(labels[i]) +
                       " not in the fc head");
    }
    cols[i] = it->second;
  }
  return cols;
}

}  // namespace

RunReport run_incremental(ModelState& m, TaskStream& stream,
                          const TrainSchedule& sched, EtfClassifier etf,
                          const LossConfig& loss_cfg, const RunHooks& hooks) {
  const std::size_t T = stream.num_tasks();
  const bool etf_head = m.config().head == HeadKind::etf;

  if (etf_head) {
    if (etf.d < stream.total_classes()) {
      throw CapacityError("protocol: capacity exceeded, classifier dim " + std::to_string(etf.d) +
                          " cannot hold " +
                          std::to_string(stream.total_classes()) + " classes");
    }
    if (etf.K != stream.task(0).labels.size()) {
      throw ContractError("protocol: classifier starts at K=" +
                          std::to_string(etf.K) + " but the base task has " +
                          std::to_string(stream.task(0).labels.size()) +
                          " classes");
    }
    etf.assign_class_ids(stream.task(0).labels);
    m.set_etf(std::move(etf));
  }

  RunReport report;
  report.seed = sched.seed;
  std::map<int, std::vector<double>> prev_centroids;

  for (std::size_t t = 0; t < T; ++t) {
    const Task& task = stream.task(t);

    if (t == 0) {
      if (!etf_head) {
        Rng head_rng(derive_seed(sched.seed, 0xFC0));
        const std::size_t in_dim = m.config().use_adapt ? m.config().head_dim
                                                        : m.config().width;
        m.fc().init(in_dim, task.labels, head_rng);
      }
    } else {
      m.add_expand_layer(derive_seed(sched.seed, 0xE0 + t));
      if (etf_head) {
        m.set_etf(expand_etf(m.etf(), stream.classes_through(t), task.labels));
      } else {
        Rng head_rng(derive_seed(sched.seed, 0xFC0 + t));
        m.fc().grow(task.labels, head_rng);
      }
    }
    m.freeze_for_stage(t);
    stream.begin_task(t);
    if (hooks.on_task_start) hooks.on_task_start(t, m);

    // Backbone parameters train at the stage rate; at incremental stages the
    // adapt layer and classifier head follow at a reduced rate.
    std::vector<Tensor> backbone_params, head_params;
    for (auto& [name, p] : m.named_params()) {
      if (!p.requires_grad()) continue;
      const bool slow = t > 0 && (name.rfind("adapt.", 0) == 0 ||
                                  name.rfind("head.", 0) == 0);
      (slow ? head_params : backbone_params).push_back(p);
    }
    const double scale = t == 0 ? 1.0 : sched.adapt_lr_scale;
    SgdMomentum opt(backbone_params, lr_at_stage(sched, t, 0), sched.momentum);
    SgdMomentum opt_slow(head_params, std::max(1e-12, lr_at_stage(sched, t, 0) * scale),
                         sched.momentum);
    Rng batch_rng(derive_seed(sched.seed, 0xBA7C4 + 131 * t));
    const std::size_t epochs = t == 0 ? sched.epochs_base : sched.epochs_inc;

    m.begin_training();
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
      opt.set_lr(lr_at_stage(sched, t, epoch));
      opt_slow.set_lr(std::max(1e-12, lr_at_stage(sched, t, epoch) * scale));
      const std::vector<std::size_t> order =
          balanced_order(task, stream.dataset(), batch_rng);
      for (std::size_t start = 0; start < order.size(); start += sched.batch) {
        const std::size_t stop = std::min(order.size(), start + sched.batch);
        const std::vector<std::size_t> rows(order.begin() + start,
                                            order.begin() + stop);
        Tensor xb = stream.read_train_features(t, rows);
        if (hooks.augment) xb = hooks.augment(xb);
        const std::vector<int> yb = stream.dataset().gather_labels(rows);

        GradTape::active().clear();
        StageOutput out = m.forward_stage(xb, t);
        Tensor task_loss =
            etf_head ? dot_regression_total(out.mu_a, yb, m.etf(), loss_cfg)
                     : softmax_cross_entropy(out.logits, head_columns(m, yb));
        std::vector<std::pair<Tensor, Tensor>> pairs;
        for (std::size_t i = 1; i <= t; ++i)
          pairs.emplace_back(out.mu_e[i - 1], out.mu_e[i]);
        Tensor loss = total_loss(task_loss, distill_total(pairs), loss_cfg);
        GradTape::active().backward(loss);
        if (sched.max_grad_norm > 0.0) {
          std::vector<Tensor> all = backbone_params;
          all.insert(all.end(), head_params.begin(), head_params.end());
          clip_global_grad_norm(all, sched.max_grad_norm);
        }
        opt.step();
        opt_slow.step();
        opt.zero_grad();
        opt_slow.zero_grad();
      }
      if (hooks.on_epoch_end) hooks.on_epoch_end(t, epoch, m);
    }
    m.end_training();
    if (hooks.on_task_end) hooks.on_task_end(t, m);

    // -- evaluate on the union of all seen classes' test data --
    StageRecord rec;
    std::vector<std::size_t> union_rows;
    std::vector<std::size_t> task_of_row;
    for (std::size_t j = 0; j <= t; ++j) {
      for (std::size_t r : stream.task(j).test_rows) {
        union_rows.push_back(r);
        task_of_row.push_back(j);
      }
    }
    Tensor xt = stream.test_features(union_rows);
    const std::vector<int> yt = stream.dataset().gather_labels(union_rows);
    const std::vector<int> preds = m.predict(xt, t);

    std::vector<std::size_t> correct_per_task(t + 1, 0), count_per_task(t + 1, 0);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      count_per_task[task_of_row[i]] += 1;
      if (preds[i] == yt[i]) {
        ++correct;
        correct_per_task[task_of_row[i]] += 1;
      }
    }
    rec.n_test = preds.size();
    rec.acc = 100.0 * static_cast<double>(correct) /
              static_cast<double>(preds.size());
    for (std::size_t j = 0; j <= t; ++j) {
      rec.task_acc.push_back(100.0 * static_cast<double>(correct_per_task[j]) /
                             static_cast<double>(count_per_task[j]));
      rec.task_test_counts.push_back(count_per_task[j]);
    }
    if (t > 0) {
      std::size_t old_correct = 0, old_count = 0;
      for (std::size_t j = 0; j < t; ++j) {
        old_correct += correct_per_task[j];
        old_count += count_per_task[j];
      }
      rec.old_class_acc = 100.0 * static_cast<double>(old_correct) /
                          static_cast<double>(old_count);
    }
    rec.classes_seen = stream.classes_through(t);
    rec.etf_residual = etf_head ? verify_etf(m.etf()) : 0.0;
    rec.params = param_count(m);

    Tensor feats = m.embed(xt, t);
    auto centroids = class_centroids(feats, yt);
    if (t > 0) rec.drift = centroid_drift(prev_centroids, feats, yt);
    prev_centroids = std::move(centroids);

    report.stages.push_back(std::move(rec));
  }

  // -- final diagnostics over the full seen test set --
  {
    NoGradScope ng;
    std::vector<std::size_t> union_rows;
    for (std::size_t j = 0; j < T; ++j)
      for (std::size_t r : stream.task(j).test_rows) union_rows.push_back(r);
    Tensor xt = stream.test_features(union_rows);
    const std::vector<int> yt = stream.dataset().gather_labels(union_rows);
    StageOutput out = m.forward_stage(xt, T - 1);

    const std::size_t L = out.mu_e.size();
    report.cka.assign(L, std::vector<double>(L, 0.0));
    for (std::size_t i = 0; i < L; ++i) {
      for (std::size_t j = i; j < L; ++j) {
        const double v = linear_cka(out.mu_e[i], out.mu_e[j]);
        report.cka[i][j] = v;
        report.cka[j][i] = v;
      }
    }
    if (etf_head) {
      report.collapse = collapse_diagnostics(out.mu_a, yt, m.etf());
    }
  }

  report.forbidden_reads = stream.forbidden_reads();
  report.finalize();
  report.validate();
  return report;
}

}  // namespace cil
