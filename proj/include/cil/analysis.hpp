#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cil/etf.hpp"
#include "cil/network.hpp"
#include "cil/tensor.hpp"

namespace cil {

// Mean accuracy over all recorded stages, the base stage included.
double acc_avg(const std::vector<double>& accs);

// Base-stage accuracy minus final-stage accuracy.
double performance_drop(const std::vector<double>& accs);

// Linear centered kernel alignment in [0,1]; 0 when either input is constant.
double linear_cka(const Tensor& X, const Tensor& Y);

struct ClassCollapse {
  int class_id = 0;
  double cos_to_prototype = 0.0;
  double within_var = 0.0;  // mean squared distance to the class mean
  std::size_t count = 0;
  bool flagged = false;  // fewer than 2 samples
};

struct CollapseReport {
  std::vector<ClassCollapse> classes;
  double between_var = 0.0;
  double within_var = 0.0;
  double ratio = 0.0;  // between / max(within, 1e-12)
  double mean_cos = 0.0;
};

// Per-class cosine(class mean, prototype) and within-class spread for
// classifier-space features.
CollapseReport collapse_diagnostics(const Tensor& feats,
                                    const std::vector<int>& labels,
                                    const EtfClassifier& etf);

struct DriftEntry {
  int class_id = 0;
  double displacement = 0.0;
  bool missing = false;  // class absent from the new features
};

// Euclidean displacement of each old class centroid given fresh features.
std::vector<DriftEntry> centroid_drift(
    const std::map<int, std::vector<double>>& old_centroids,
    const Tensor& feats, const std::vector<int>& labels);

std::map<int, std::vector<double>> class_centroids(
    const Tensor& feats, const std::vector<int>& labels);

struct ParamCount {
  std::size_t base = 0;
  std::vector<std::size_t> expands;
  std::size_t adapt = 0;
  std::size_t head = 0;
  std::size_t total() const;
};

ParamCount param_count(const ModelState& m);

// ---------------------------------------------------------------------------
// Run record
// ---------------------------------------------------------------------------

struct StageRecord {
  double acc = 0.0;                  // percent on the union of seen classes
  double old_class_acc = -1.0;       // tasks < t only; -1 at the base stage
  std::size_t n_test = 0;
  std::size_t classes_seen = 0;
  std::vector<double> task_acc;      // accuracy per seen task's own test set
  std::vector<std::size_t> task_test_counts;
  double etf_residual = 0.0;
  ParamCount params;
  std::vector<DriftEntry> drift;     // vs the previous stage
};

struct RunReport {
  std::vector<double> accs;  // A_t per stage
  double acc_average = 0.0;
  double pd = 0.0;
  std::vector<StageRecord> stages;
  std::vector<std::vector<double>> cka;  // pairwise expand-layer CKA
  double mean_offdiag_cka = 0.0;
  CollapseReport collapse;
  std::size_t forbidden_reads = 0;
  std::uint64_t seed = 0;
  std::string config_echo;

  void finalize();  // fills accs/acc_average/pd/mean_offdiag_cka from stages
  void validate() const;
};

std::string report_to_json(const RunReport& r);
// Writes report.json, accuracy.csv, cka.csv and drift.csv into outdir.
void write_report(const RunReport& r, const std::string& outdir);

}  // namespace cil
