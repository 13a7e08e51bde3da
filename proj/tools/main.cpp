// Config-driven experiment runner: single runs, ablation grids, and lambda
// sweeps over the class-incremental training engine.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cil/analysis.hpp"
#include "cil/config.hpp"
#include "cil/errors.hpp"

namespace fs = std::filesystem;

namespace {

std::string default_out_root() {
  const char* env = std::getenv("CIL_OUT");
  return env && *env ? env : "out";
}

std::string out_dir_for(const std::string& config_path, const std::string& flag) {
  if (!flag.empty()) return flag;
  return default_out_root() + "/" + fs::path(config_path).stem().string();
}

void print_stage_table(const cil::RunReport& r) {
  std::cout << "stage  classes  n_test     acc  old_acc\n";
  for (std::size_t t = 0; t < r.stages.size(); ++t) {
    const auto& s = r.stages[t];
    std::cout << std::setw(5) << t << std::setw(9) << s.classes_seen
              << std::setw(8) << s.n_test << std::fixed << std::setprecision(2)
              << std::setw(8) << s.acc;
    if (s.old_class_acc >= 0.0) {
      std::cout << std::setw(9) << s.old_class_acc;
    } else {
      std::cout << std::setw(9) << "-";
    }
    std::cout << "\n";
  }
  std::cout << "acc_avg " << std::fixed << std::setprecision(2) << r.acc_average
            << "  pd " << r.pd << "  mean_offdiag_cka " << std::setprecision(4)
            << r.mean_offdiag_cka << "\n";
}

struct CellResult {
  std::string name;
  bool ok = false;
  std::string error;
  cil::RunReport report;
};

CellResult run_cell(const cil::RunConfig& cfg, const std::string& name,
                    const std::string& outdir) {
  CellResult cell;
  cell.name = name;
  try {
    cell.report = cil::run_config(cfg);
    cil::write_report(cell.report, outdir);
    cell.ok = true;
  } catch (const std::exception& e) {
    cell.error = e.what();
  }
  return cell;
}

void write_cells_csv(const std::vector<CellResult>& cells,
                     const std::string& path, const std::string& label) {
  std::size_t max_stages = 0;
  for (const auto& c : cells)
    if (c.ok) max_stages = std::max(max_stages, c.report.stages.size());
  std::ofstream f(path);
  f << label;
  for (std::size_t t = 0; t < max_stages; ++t) f << ",acc_t" << t;
  f << ",acc_avg,pd,mean_offdiag_cka,status\n";
  for (const auto& c : cells) {
    f << c.name;
    if (c.ok) {
      for (std::size_t t = 0; t < max_stages; ++t) {
        f << ",";
        if (t < c.report.accs.size()) f << c.report.accs[t];
      }
      f << "," << c.report.acc_average << "," << c.report.pd << ","
        << c.report.mean_offdiag_cka << ",ok\n";
    } else {
      for (std::size_t t = 0; t < max_stages; ++t) f << ",";
      f << ",,,error: " << c.error << "\n";
    }
  }
}

void print_cells(const std::vector<CellResult>& cells) {
  for (const auto& c : cells) {
    std::cout << std::left << std::setw(28) << c.name << std::right;
    if (!c.ok) {
      std::cout << "  ERROR: " << c.error << "\n";
      continue;
    }
    std::cout << " ";
    for (double a : c.report.accs)
      std::cout << " " << std::fixed << std::setprecision(2) << std::setw(6) << a;
    std::cout << "  avg " << std::setw(6) << c.report.acc_average << "  pd "
              << std::setw(6) << c.report.pd << "  cka " << std::setprecision(4)
              << c.report.mean_offdiag_cka << "\n";
  }
}

int cmd_run(const std::string& config_path, const std::string& out_flag) {
  cil::RunConfig cfg = cil::parse_config_file(config_path);
  cil::RunReport report = cil::run_config(cfg);
  const std::string outdir = out_dir_for(config_path, out_flag);
  cil::write_report(report, outdir);
  print_stage_table(report);
  std::cout << "report written to " << outdir << "\n";
  return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& out_flag,
               const std::vector<std::string>& axes) {
  if (axes.empty()) {
    std::cerr << "error: ablate needs at least one axis "
                 "(--axes wiring,head,adapt)\n";
    return 2;
  }
  for (const auto& a : axes) {
    if (a != "wiring" && a != "head" && a != "adapt") {
      std::cerr << "error: unknown ablation axis '" << a << "'\n";
      return 2;
    }
  }
  const bool ax_wiring = std::count(axes.begin(), axes.end(), "wiring") > 0;
  const bool ax_head = std::count(axes.begin(), axes.end(), "head") > 0;
  const bool ax_adapt = std::count(axes.begin(), axes.end(), "adapt") > 0;

  cil::RunConfig base = cil::parse_config_file(config_path);
  const std::string outdir = out_dir_for(config_path, out_flag);

  std::vector<CellResult> cells;
  for (const std::string& wiring :
       ax_wiring ? std::vector<std::string>{"parallel", "serial"}
                 : std::vector<std::string>{base.wiring}) {
    for (const std::string& head :
         ax_head ? std::vector<std::string>{"etf", "fc"}
                 : std::vector<std::string>{base.head}) {
      for (bool adapt : ax_adapt ? std::vector<bool>{true, false}
                                 : std::vector<bool>{base.adapt}) {
        cil::RunConfig cfg = base;
        cfg.wiring = wiring;
        cfg.head = head;
        cfg.adapt = adapt;
        std::string name;
        if (ax_wiring) name += "wiring=" + wiring;
        if (ax_head) name += (name.empty() ? "" : "_") + ("head=" + head);
        if (ax_adapt)
          name += (name.empty() ? "" : "_") +
                  std::string("adapt=") + (adapt ? "on" : "off");
        cells.push_back(run_cell(cfg, name, outdir + "/" + name));
      }
    }
  }
  write_cells_csv(cells, outdir + "/ablate.csv", "variant");
  print_cells(cells);
  std::cout << "tables written to " << outdir << "\n";
  for (const auto& c : cells)
    if (!c.ok) return 1;
  return 0;
}

int cmd_sweep_lambda(const std::string& config_path, const std::string& out_flag,
                     std::vector<double> values) {
  if (values.empty()) {
    std::cerr << "error: sweep-lambda needs --values\n";
    return 2;
  }
  for (double v : values) {
    if (v < 0.0) {
      std::cerr << "error: negative lambda " << v << " rejected\n";
      return 2;
    }
  }
  std::vector<double> unique;
  for (double v : values) {
    if (std::count(unique.begin(), unique.end(), v)) {
      std::cerr << "warning: duplicate lambda " << v << " ignored\n";
      continue;
    }
    unique.push_back(v);
  }

  cil::RunConfig base = cil::parse_config_file(config_path);
  const std::string outdir = out_dir_for(config_path, out_flag);
  std::vector<CellResult> cells;
  for (double v : unique) {
    cil::RunConfig cfg = base;
    cfg.loss.lambda = v;
    std::ostringstream name;
    name << "lambda=" << v;
    cells.push_back(run_cell(cfg, name.str(), outdir + "/" + name.str()));
  }
  write_cells_csv(cells, outdir + "/sweep.csv", "lambda");
  print_cells(cells);
  std::cout << "tables written to " << outdir << "\n";
  for (const auto& c : cells)
    if (!c.ok) return 1;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"class-incremental training engine with a dynamic ETF classifier"};
  app.require_subcommand(1);

  std::string config_path, out_flag;
  std::vector<std::string> axes;
  std::vector<double> lambda_values;

  CLI::App* run = app.add_subcommand("run", "execute one configured run");
  run->add_option("-c,--config", config_path, "config file")->required();
  run->add_option("-o,--out", out_flag, "output directory");

  CLI::App* ablate =
      app.add_subcommand("ablate", "grid of wiring/head/adapt variants");
  ablate->add_option("-c,--config", config_path, "config file")->required();
  ablate->add_option("-o,--out", out_flag, "output directory");
  ablate->add_option("--axes", axes, "axes: wiring, head, adapt")
      ->delimiter(',');

  CLI::App* sweep =
      app.add_subcommand("sweep-lambda", "one run per distillation weight");
  sweep->add_option("-c,--config", config_path, "config file")->required();
  sweep->add_option("-o,--out", out_flag, "output directory");
  sweep->add_option("--values", lambda_values, "lambda values")->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, out_flag);
    if (ablate->parsed()) return cmd_ablate(config_path, out_flag, axes);
    if (sweep->parsed()) return cmd_sweep_lambda(config_path, out_flag, lambda_values);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
