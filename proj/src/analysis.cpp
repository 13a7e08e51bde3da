#include "cil/analysis.hpp"

#include <cmath>

#include "cil/errors.hpp"

namespace cil {

double acc_avg(const std::vector<double>& accs) {
  if (accs.empty()) throw ContractError("acc_avg: no recorded stages");
  double s = 0.0;
  for (double a : accs) s += a;
  return s / static_cast<double>(accs.size());
}

double performance_drop(const std::vector<double>& accs) {
  if (accs.size() < 2) {
    throw ContractError("performance_drop: need at least 2 stages, got " +
                        std::to_string(accs.size()));
  }
  return accs.front() - accs.back();
}

double linear_cka(const Tensor& X, const Tensor& Y) {
  if (X.rows() != Y.rows()) {
    throw DimensionError("cka: row count mismatch " + X.shape_str() + " vs " +
                         Y.shape_str());
  }
  const std::size_t n = X.rows();
  if (n < 2) throw ContractError("cka: need at least 2 rows");
  const std::size_t p = X.cols(), q = Y.cols();

  auto centered = [n](const Tensor& M, std::size_t w) {
    std::vector<double> c(n * w);
    for (std::size_t j = 0; j < w; ++j) {
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += M.at2(i, j);
      mean /= static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) c[i * w + j] = M.at2(i, j) - mean;
    }
    return c;
  };
  std::vector<double> xc = centered(X, p);
  std::vector<double> yc = centered(Y, q);

  auto cross_fro2 = [n](const std::vector<double>& a, std::size_t wa,
                        const std::vector<double>& b, std::size_t wb) {
    // |A^T B|_F^2 computed via the wa x wb cross product
    double total = 0.0;
    for (std::size_t i = 0; i < wa; ++i) {
      for (std::size_t j = 0; j < wb; ++j) {
        double s = 0.0;
        for (std::size_t r = 0; r < n; ++r) s += a[r * wa + i] * b[r * wb + j];
        total += s * s;
      }
    }
    return total;
  };

  const double num = cross_fro2(xc, p, yc, q);
  const double xx = std::sqrt(cross_fro2(xc, p, xc, p));
  const double yy = std::sqrt(cross_fro2(yc, q, yc, q));
  if (xx < 1e-30 || yy < 1e-30) return 0.0;  // a constant input
  return num / (xx * yy);
}

std::map<int, std::vector<double>> class_centroids(
    const Tensor& feats, const std::vector<int>& labels) {
  if (feats.rows() != labels.size()) {
    throw DimensionError("centroids: " + std::to_string(labels.size()) +
                         " labels for " + feats.shape_str());
  }
  const std::size_t d = feats.cols();
  std::map<int, std::vector<double>> sums;
  std::map<int, std::size_t> counts;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto& s = sums[labels[i]];
    if (s.empty()) s.assign(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) s[j] += feats.at2(i, j);
    counts[labels[i]] += 1;
  }
  for (auto& [id, s] : sums)
    for (double& v : s) v /= static_cast<double>(counts[id]);
  return sums;
}

CollapseReport collapse_diagnostics(const Tensor& feats,
                                    const std::vector<int>& labels,
                                    const EtfClassifier& etf) {
  const std::size_t d = feats.cols();
  if (d != etf.d) {
    throw DimensionError("collapse: feature width " + std::to_string(d) +
                         " vs classifier dim " + std::to_string(etf.d));
  }
  auto centroids = class_centroids(feats, labels);
  std::map<int, std::size_t> counts;
  for (int l : labels) {
    etf.column_of(l);  // LabelError when unmapped
    counts[l] += 1;
  }

  CollapseReport rep;
  std::vector<double> global(d, 0.0);
  for (const auto& [id, c] : centroids)
    for (std::size_t j = 0; j < d; ++j) global[j] += c[j];
  for (double& v : global) v /= static_cast<double>(centroids.size());

  double within_total = 0.0;
  double cos_total = 0.0;
  for (const auto& [id, centroid] : centroids) {
    ClassCollapse cc;
    cc.class_id = id;
    cc.count = counts[id];
    cc.flagged = cc.count < 2;

    const std::size_t col = etf.column_of(id);
    double dot = 0.0, nc = 0.0, nw = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      dot += centroid[j] * etf.W.at2(j, col);
      nc += centroid[j] * centroid[j];
      nw += etf.W.at2(j, col) * etf.W.at2(j, col);
    }
    cc.cos_to_prototype = dot / std::sqrt(std::max(nc * nw, 1e-30));

    double within = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] != id) continue;
      double dist2 = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = feats.at2(i, j) - centroid[j];
        dist2 += diff * diff;
      }
      within += dist2;
    }
    cc.within_var = within / static_cast<double>(cc.count);
    within_total += cc.within_var;
    cos_total += cc.cos_to_prototype;
    rep.classes.push_back(cc);
  }

  double between = 0.0;
  for (const auto& [id, centroid] : centroids) {
    double dist2 = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = centroid[j] - global[j];
      dist2 += diff * diff;
    }
    between += dist2;
  }
  const double k = static_cast<double>(centroids.size());
  rep.between_var = between / k;
  rep.within_var = within_total / k;
  rep.ratio = rep.between_var / std::max(rep.within_var, 1e-12);
  rep.mean_cos = cos_total / k;
  return rep;
}

std::vector<DriftEntry> centroid_drift(
    const std::map<int, std::vector<double>>& old_centroids,
    const Tensor& feats, const std::vector<int>& labels) {
  auto fresh = class_centroids(feats, labels);
  std::vector<DriftEntry> out;
  for (const auto& [id, old_c] : old_centroids) {
    DriftEntry e;
    e.class_id = id;
    auto it = fresh.find(id);
    if (it == fresh.end()) {
      e.missing = true;
    } else {
      double dist2 = 0.0;
      for (std::size_t j = 0; j < old_c.size(); ++j) {
        const double diff = it->second[j] - old_c[j];
        dist2 += diff * diff;
      }
      e.displacement = std::sqrt(dist2);
    }
    out.push_back(e);
  }
  return out;
}

std::size_t ParamCount::total() const {
  std::size_t t = base + adapt + head;
  for (std::size_t e : expands) t += e;
  return t;
}

ParamCount param_count(const ModelState& m) {
  ParamCount out;
  out.base = m.base_param_count();
  out.expands = m.expand_param_counts();
  out.adapt = m.adapt_param_count();
  out.head = m.head_param_count();
  return out;
}

void RunReport::finalize() {
  accs.clear();
  for (const auto& s : stages) accs.push_back(s.acc);
  acc_average = acc_avg(accs);
  pd = accs.size() >= 2 ? performance_drop(accs) : 0.0;
  if (!cka.empty()) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < cka.size(); ++i) {
      for (std::size_t j = i + 1; j < cka[i].size(); ++j) {
        sum += cka[i][j];
        ++count;
      }
    }
    mean_offdiag_cka = count ? sum / static_cast<double>(count) : 0.0;
  }
}

void RunReport::validate() const {
  if (stages.empty()) throw ContractError("report: no stages recorded");
  for (const auto& s : stages) {
    if (s.acc < 0.0 || s.acc > 100.0) {
      throw ContractError("report: accuracy out of [0,100]");
    }
  }
  const double mean = acc_avg(accs);
  if (std::abs(mean - acc_average) > 1e-9) {
    throw ContractError("report: acc_average does not match stage accuracies");
  }
  if (accs.size() >= 2 &&
      std::abs(pd - (accs.front() - accs.back())) > 1e-9) {
    throw ContractError("report: pd does not match first minus last accuracy");
  }
}

}  // namespace cil
