#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "cil/analysis.hpp"
#include "cil/errors.hpp"

namespace cil {

namespace {

using nlohmann::json;

json collapse_json(const CollapseReport& c) {
  json classes = json::array();
  for (const auto& cc : c.classes) {
    classes.push_back({{"class", cc.class_id},
                       {"cos_to_prototype", cc.cos_to_prototype},
                       {"within_var", cc.within_var},
                       {"count", cc.count},
                       {"flagged", cc.flagged}});
  }
  return {{"classes", classes},
          {"between_var", c.between_var},
          {"within_var", c.within_var},
          {"ratio", c.ratio},
          {"mean_cos", c.mean_cos}};
}

json stage_json(const StageRecord& s, std::size_t idx) {
  json drift = json::array();
  for (const auto& d : s.drift) {
    drift.push_back({{"class", d.class_id},
                     {"displacement", d.displacement},
                     {"missing", d.missing}});
  }
  json params = {{"base", s.params.base},
                 {"expands", s.params.expands},
                 {"adapt", s.params.adapt},
                 {"head", s.params.head},
                 {"total", s.params.total()}};
  json j = {{"stage", idx},
            {"acc", s.acc},
            {"n_test", s.n_test},
            {"classes_seen", s.classes_seen},
            {"task_acc", s.task_acc},
            {"task_test_counts", s.task_test_counts},
            {"etf_residual", s.etf_residual},
            {"params", params},
            {"drift", drift}};
  if (s.old_class_acc >= 0.0) j["old_class_acc"] = s.old_class_acc;
  return j;
}

}  // namespace

std::string report_to_json(const RunReport& r) {
  json stages = json::array();
  for (std::size_t i = 0; i < r.stages.size(); ++i) {
    stages.push_back(stage_json(r.stages[i], i));
  }
  json j = {{"accs", r.accs},
            {"acc_avg", r.acc_average},
            {"pd", r.pd},
            {"stages", stages},
            {"cka", r.cka},
            {"mean_offdiag_cka", r.mean_offdiag_cka},
            {"collapse", collapse_json(r.collapse)},
            {"forbidden_reads", r.forbidden_reads},
            {"seed", r.seed},
            {"config", r.config_echo}};
  return j.dump(2) + "\n";
}

void write_report(const RunReport& r, const std::string& outdir) {
  namespace fs = std::filesystem;
  fs::create_directories(outdir);
  const fs::path dir(outdir);

  {
    std::ofstream f(dir / "report.json");
    if (!f) throw ParseError("report: cannot write to " + outdir);
    f << report_to_json(r);
  }

  {
    std::ofstream f(dir / "accuracy.csv");
    const std::size_t T = r.stages.size();
    f << "stage,n_test,acc,old_class_acc";
    for (std::size_t t = 0; t < T; ++t) f << ",acc_task" << t;
    f << "\n";
    for (std::size_t s = 0; s < T; ++s) {
      const auto& st = r.stages[s];
      f << s << "," << st.n_test << "," << st.acc << ",";
      if (st.old_class_acc >= 0.0) f << st.old_class_acc;
      for (std::size_t t = 0; t < T; ++t) {
        f << ",";
        if (t < st.task_acc.size()) f << st.task_acc[t];
      }
      f << "\n";
    }
  }

  {
    std::ofstream f(dir / "cka.csv");
    f << "layer";
    for (std::size_t j = 0; j < r.cka.size(); ++j) f << ",e" << j;
    f << "\n";
    for (std::size_t i = 0; i < r.cka.size(); ++i) {
      f << "e" << i;
      for (std::size_t j = 0; j < r.cka[i].size(); ++j) f << "," << r.cka[i][j];
      f << "\n";
    }
  }

  {
    std::ofstream f(dir / "drift.csv");
    f << "stage,class,displacement,missing\n";
    for (std::size_t s = 0; s < r.stages.size(); ++s) {
      for (const auto& d : r.stages[s].drift) {
        f << s << "," << d.class_id << "," << d.displacement << ","
          << (d.missing ? 1 : 0) << "\n";
      }
    }
  }
}

}  // namespace cil
