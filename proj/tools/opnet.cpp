// opnet: generate cases, analyse snapshot matrices, train and compare
// operator surrogates.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "opnet/cases.hpp"
#include "opnet/errors.hpp"
#include "opnet/experiment.hpp"
#include "opnet/flex_deeponet.hpp"
#include "opnet/operator_model.hpp"
#include "opnet/snapshot_io.hpp"
#include "opnet/svd.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace opnet;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitFailure = 1;

struct ExperimentFlags {
  std::string config_path;
  std::string case_id;
  std::string arch;
  int p = 0;
  std::size_t epochs = 0;
  long long seed = -1;
  std::string out;
  std::vector<std::string> sets;
  bool quiet = false;
};

void add_experiment_flags(CLI::App* cmd, ExperimentFlags& f, bool with_arch) {
  cmd->add_option("--config", f.config_path, "JSON experiment config");
  cmd->add_option("--case", f.case_id, "tc1 | tc2 | tc4 | external");
  if (with_arch) cmd->add_option("--arch", f.arch, "vanilla | pod | svd | svd-shared | flex");
  cmd->add_option("--p", f.p, "number of latent outputs");
  cmd->add_option("--epochs", f.epochs, "training epochs (rescales the lr schedule)");
  cmd->add_option("--seed", f.seed, "data seed");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--set", f.sets, "override a config key, e.g. train.batch_size=16");
  cmd->add_flag("--quiet", f.quiet, "no per-epoch progress");
}

void require_file(const std::string& path) {
  if (!fs::exists(path)) throw Error(ErrorKind::Usage, "file not found: " + path);
}

json read_json_file(const std::string& path) {
  require_file(path);
  std::ifstream in(path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Usage, path + " is not valid JSON: " + e.what());
  }
}

void rescale_schedule(TrainConfig& c, std::size_t epochs) {
  const std::size_t old = std::max<std::size_t>(c.epochs, 1);
  for (std::size_t i = 0; i < c.lr_schedule.size(); ++i) {
    if (i > 0) c.lr_schedule[i].epoch = std::max(c.lr_schedule[i].epoch * epochs / old, c.lr_schedule[i - 1].epoch + 1);
  }
  c.epochs = epochs;
}

ExperimentConfig resolve_config(const ExperimentFlags& f, const std::string& arch_override = "") {
  json j = f.config_path.empty() ? json::object() : read_json_file(f.config_path);
  if (!f.case_id.empty()) j["case"] = f.case_id;
  if (!arch_override.empty()) {
    j["arch"] = arch_override;
  } else if (!f.arch.empty()) {
    j["arch"] = f.arch;
  }
  if (f.p > 0) j["p"] = f.p;
  if (f.seed >= 0) j["seed"] = static_cast<std::uint64_t>(f.seed);
  if (!f.out.empty()) j["output_dir"] = f.out;
  for (const auto& s : f.sets) apply_override(j, s);
  ExperimentConfig cfg = parse_config(j.dump());
  if (f.epochs > 0) rescale_schedule(cfg.train, f.epochs);
  cfg.validate();
  return cfg;
}

EpochCallback progress(bool quiet) {
  if (quiet) return {};
  return [](std::size_t epoch, double train, double val) {
    if (epoch % 10 == 0) {
      std::cerr << "epoch " << epoch << " train " << train;
      if (!std::isnan(val)) std::cerr << " val " << val;
      std::cerr << '\n';
    }
    return true;
  };
}

void print_row(const ReportRow& r) {
  std::cout << std::left << std::setw(11) << r.arch << " p=" << std::setw(4) << r.p << " params=" << std::setw(8)
            << r.param_count;
  for (std::size_t v = 0; v < r.variables.size(); ++v) {
    std::cout << " rmse[" << r.variables[v] << "]=" << std::scientific << std::setprecision(4) << r.rmse[v]
              << std::defaultfloat;
  }
  for (const auto& [k, v] : r.extra) std::cout << ' ' << k << '=' << std::scientific << std::setprecision(4) << v << std::defaultfloat;
  std::cout << " train_s=" << std::fixed << std::setprecision(1) << r.train_seconds << " predict_ms/10k="
            << std::setprecision(2) << r.predict_ms_per_10k << std::defaultfloat << '\n';
}

// ---- gen -------------------------------------------------------------------

int cmd_gen(const ExperimentFlags& f) {
  ExperimentConfig cfg = resolve_config(f, "vanilla");
  const fs::path out = f.out.empty() ? fs::path("data") / cfg.case_id : fs::path(f.out);
  fs::create_directories(out);
  json manifest{{"case", cfg.case_id}, {"seed", cfg.seed}, {"test_seed", test_seed(cfg.seed)}, {"data", cfg.data}};
  json files = json::array();
  const auto& d = cfg.data;
  if (cfg.case_id == "tc1" || cfg.case_id == "tc2") {
    ScenarioSet train, test;
    if (cfg.case_id == "tc1") {
      Tc1Options opt;
      opt.scenarios = d.scenarios;
      opt.times = d.times;
      manifest["bounds"] = opt.bounds;
      manifest["grid"] = {{"t_start", 0.0}, {"t_end", opt.t_end}, {"times", opt.times}};
      train = tc1_scenarios(opt, cfg.seed);
      opt.scenarios = d.test_scenarios;
      test = tc1_scenarios(opt, test_seed(cfg.seed));
    } else {
      Tc2Options opt;
      opt.scenarios = d.scenarios;
      opt.times = d.times;
      opt.random_times = d.random_times;
      manifest["bounds"] = opt.bounds;
      manifest["grid"] = {{"t_end", opt.t_end}, {"times", opt.times}, {"random", opt.random_times}};
      train = tc2_scenarios(opt, cfg.seed);
      opt.scenarios = d.test_scenarios;
      test = tc2_scenarios(opt, test_seed(cfg.seed));
    }
    for (const auto& [tag, set] : {std::pair<std::string, const ScenarioSet*>{"train", &train}, {"test", &test}}) {
      for (std::size_t v = 0; v < set->variables.size(); ++v) {
        const fs::path path = out / (tag + "_" + set->variables[v] + ".csv");
        SnapshotCsvNames names;
        names.coord_names = {"t"};
        names.meta_names = cfg.case_id == "tc1" ? std::vector<std::string>{"x0", "v0"} : std::vector<std::string>{"x0"};
        write_snapshot_csv(path, assemble_scenario_matrix(*set, v), names);
        files.push_back(path.filename().string());
      }
    }
  } else if (cfg.case_id == "tc4") {
    Tc4Options opt;
    opt.grid = d.grid;
    opt.times = d.snapshot_times;
    opt.train_points = d.train_points;
    opt.half_width = d.half_width;
    opt.train_half_width = d.train_half_width;
    manifest["grid"] = {{"nx", opt.grid}, {"ny", opt.grid}, {"half_width", opt.half_width}, {"times", opt.times},
                        {"row_order", "row-major over (x, y): row = ix * ny + iy"}};
    manifest["bounds"] = {{-opt.train_half_width, opt.train_half_width}, {-opt.train_half_width, opt.train_half_width},
                          {0.0, opt.params.t_end}};
    SnapshotCsvNames names;
    names.coord_names = {"x", "y"};
    write_snapshot_csv(out / "snapshots.csv", tc4_snapshots(opt), names);
    files.push_back("snapshots.csv");
    const PointData pts = tc4_training_points(opt, cfg.seed);
    std::ofstream csv(out / "train_points.csv");
    csv << std::setprecision(std::numeric_limits<double>::max_digits10) << "t,x,y,z\n";
    for (Eigen::Index k = 0; k < pts.size(); ++k) {
      csv << pts.u(0, k) << ',' << pts.y(0, k) << ',' << pts.y(1, k) << ',' << pts.values(0, k) << '\n';
    }
    files.push_back("train_points.csv");
  } else {
    throw Error(ErrorKind::Usage, "gen supports tc1, tc2 and tc4");
  }
  manifest["files"] = files;
  std::ofstream(out / "manifest.json") << manifest.dump(2) << '\n';
  std::cout << "wrote " << files.size() << " data files and manifest.json to " << out.string() << '\n';
  return 0;
}

// ---- svd -------------------------------------------------------------------

struct SvdFlags {
  std::string case_id;
  std::string input;
  std::string variable;
  std::string preprocess = "center-scale";
  std::string out = ".";
  long long seed = 1;
  Eigen::Index max_rank = 20;
  std::vector<std::string> sets;
};

int cmd_svd(const SvdFlags& f) {
  SnapshotMatrix x;
  std::string label;
  if (!f.input.empty()) {
    require_file(f.input);
    x = load_snapshot_csv(f.input);
    label = fs::path(f.input).stem().string();
  } else {
    if (f.case_id.empty()) throw Error(ErrorKind::Usage, "svd needs --case or --input");
    json j{{"case", f.case_id}, {"seed", f.seed}};
    for (const auto& s : f.sets) apply_override(j, s);
    const ExperimentConfig cfg = parse_config(j.dump());
    const auto& d = cfg.data;
    if (cfg.case_id == "tc4") {
      Tc4Options opt;
      opt.grid = d.grid;
      opt.times = d.snapshot_times;
      opt.half_width = d.half_width;
      x = tc4_snapshots(opt);
      label = "tc4_z";
    } else {
      ScenarioSet set;
      if (cfg.case_id == "tc1") {
        Tc1Options opt;
        opt.scenarios = d.scenarios;
        opt.times = d.times;
        set = tc1_scenarios(opt, cfg.seed);
      } else if (cfg.case_id == "tc2") {
        Tc2Options opt;
        opt.scenarios = d.scenarios;
        opt.times = d.times;
        opt.random_times = d.random_times;
        set = tc2_scenarios(opt, cfg.seed);
      } else {
        throw Error(ErrorKind::Usage, "svd supports tc1, tc2 and tc4, or --input");
      }
      std::size_t v = 0;
      if (!f.variable.empty()) {
        auto it = std::find(set.variables.begin(), set.variables.end(), f.variable);
        if (it == set.variables.end()) throw Error(ErrorKind::Usage, "unknown variable '" + f.variable + "'");
        v = static_cast<std::size_t>(it - set.variables.begin());
      }
      x = assemble_scenario_matrix(set, v);
      label = cfg.case_id + "_" + set.variables[v];
    }
  }
  CenterMethod center = CenterMethod::None;
  ScaleMethod scale = ScaleMethod::None;
  if (f.preprocess == "center") {
    center = CenterMethod::Mean;
  } else if (f.preprocess == "center-scale") {
    center = CenterMethod::Mean;
    scale = ScaleMethod::Auto;
  } else if (f.preprocess != "raw") {
    throw Error(ErrorKind::Usage, "--preprocess must be raw, center or center-scale");
  }
  const auto [xs, prep] = center_scale(x, center, scale);
  const Decomposition dec = svd(xs.values());

  fs::create_directories(f.out);
  const fs::path energy_path = fs::path(f.out) / (label + "_energy.csv");
  std::ofstream energy(energy_path);
  energy << std::setprecision(std::numeric_limits<double>::max_digits10)
         << "k,sigma,cumulative_energy_squared,cumulative_energy_linear\n";
  for (Eigen::Index k = 1; k <= dec.rank(); ++k) {
    energy << k << ',' << dec.sigma(k - 1) << ',' << cumulative_energy(dec, k, EnergyConvention::Squared) << ','
           << cumulative_energy(dec, k, EnergyConvention::Linear) << '\n';
  }
  const fs::path recon_path = fs::path(f.out) / (label + "_reconstruction.csv");
  std::ofstream recon(recon_path);
  recon << std::setprecision(std::numeric_limits<double>::max_digits10) << "r,relative_error\n";
  const Eigen::Index rmax = std::min(f.max_rank, dec.rank());
  for (Eigen::Index r = 1; r <= rmax; ++r) {
    const Decomposition t = truncate(dec, r);
    const Eigen::MatrixXd approx = principal_components(t) * principal_directions(t).transpose();
    recon << r << ',' << relative_error(xs.values(), approx) << '\n';
  }

  std::cout << label << ": " << x.rows() << " x " << x.cols() << " (" << f.preprocess << ")\n";
  std::cout << std::setprecision(12);
  for (Eigen::Index k = 1; k <= std::min<Eigen::Index>(3, dec.rank()); ++k) {
    std::cout << "  k=" << k << " cumulative_energy_squared=" << cumulative_energy(dec, k) << " linear="
              << cumulative_energy(dec, k, EnergyConvention::Linear) << '\n';
  }
  for (double th : {0.95, 0.99, 0.9999}) {
    std::cout << "  rank for " << th << ": squared=" << rank_for_energy(dec, th).rank
              << " linear=" << rank_for_energy(dec, th, EnergyConvention::Linear).rank << '\n';
  }
  std::cout << "wrote " << energy_path.string() << " and " << recon_path.string() << '\n';
  return 0;
}

// ---- train / eval / compare / report ---------------------------------------

void write_experiment(const ExperimentConfig& cfg, const ExperimentResult& res) {
  fs::create_directories(cfg.output_dir);
  const fs::path dir(cfg.output_dir);
  save_model((dir / "model.txt").string(), res.model);
  write_loss_csv((dir / "loss.csv").string(), res.runs);
  write_report_csv((dir / "report.csv").string(), {res.row});
  std::ofstream(dir / "config.json") << serialize_config(cfg) << '\n';
}

int cmd_train(const ExperimentFlags& f) {
  const ExperimentConfig cfg = resolve_config(f);
  const ExperimentResult res = run_experiment(cfg, progress(f.quiet));
  write_experiment(cfg, res);
  print_row(res.row);
  std::cout << "model written to " << (fs::path(cfg.output_dir) / "model.txt").string() << '\n';
  return 0;
}

struct EvalFlags {
  std::string model;
  ExperimentFlags exp;
};

std::pair<OperatorModel, CaseData> load_for_eval(const EvalFlags& f) {
  require_file(f.model);
  OperatorModel model = load_model(f.model);
  ExperimentFlags exp = f.exp;
  // without --case or --config, evaluate on the case the model was trained on
  if (exp.case_id.empty() && exp.config_path.empty()) exp.case_id = model.case_id;
  const ExperimentConfig cfg = resolve_config(exp, std::string(to_string(model.variant)) == "pod" ? "pod" : "vanilla");
  if (model.case_id != cfg.case_id) {
    throw Error(ErrorKind::Usage, "model " + f.model + " was trained on case '" + model.case_id +
                                      "', not '" + cfg.case_id + "'");
  }
  return {std::move(model), make_case_data(cfg)};
}

int cmd_eval(const EvalFlags& f) {
  auto [model, data] = load_for_eval(f);
  const Evaluation ev = evaluate(model, data);
  const fs::path out = f.exp.out.empty() ? fs::path(f.model).parent_path() : fs::path(f.exp.out);
  if (!out.empty()) fs::create_directories(out);
  std::ofstream pred(out / "predictions.csv");
  std::ofstream err(out / "rmse.csv");
  pred << std::setprecision(std::numeric_limits<double>::max_digits10);
  err << std::setprecision(std::numeric_limits<double>::max_digits10);
  const GridData& test = data.test;
  pred << "scenario,variable";
  for (Eigen::Index k = 0; k < test.u.rows(); ++k) pred << ",u" << k;
  for (Eigen::Index k = 0; k < test.y.rows(); ++k) pred << ",y" << k;
  pred << ",truth,prediction\n";
  err << "scenario,variable,rmse\n";
  for (std::size_t v = 0; v < test.variables.size(); ++v) {
    for (Eigen::Index j = 0; j < test.scenarios(); ++j) {
      for (Eigen::Index i = 0; i < test.points(); ++i) {
        pred << j << ',' << test.variables[v];
        for (Eigen::Index k = 0; k < test.u.rows(); ++k) pred << ',' << test.u(k, j);
        for (Eigen::Index k = 0; k < test.y.rows(); ++k) pred << ',' << test.y(k, i);
        pred << ',' << test.values[v](i, j) << ',' << ev.prediction[v](i, j) << '\n';
      }
      err << j << ',' << test.variables[v] << ',' << rmse(ev.prediction[v].col(j), test.values[v].col(j)) << '\n';
    }
    std::cout << "rmse[" << test.variables[v] << "] = " << std::scientific << ev.rmse[v] << std::defaultfloat << '\n';
  }
  for (const auto& [k, v] : ev.extra) std::cout << k << " = " << std::scientific << v << std::defaultfloat << '\n';
  std::cout << "wrote " << (out / "predictions.csv").string() << " and " << (out / "rmse.csv").string() << '\n';
  return 0;
}

struct ArchSpec {
  std::string arch;
  std::vector<std::string> sets;
};

std::vector<ArchSpec> parse_archs(const std::string& text) {
  std::vector<ArchSpec> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    if (item.empty()) continue;
    std::stringstream is(item);
    ArchSpec a;
    std::getline(is, a.arch, ':');
    for (std::string kv; std::getline(is, kv, ':');) {
      if (kv.rfind("epochs=", 0) == 0) {
        a.sets.push_back("train.epochs=" + kv.substr(7));
      } else {
        a.sets.push_back(kv);
      }
    }
    out.push_back(std::move(a));
  }
  if (out.empty()) throw Error(ErrorKind::Usage, "--archs is empty");
  return out;
}

int cmd_compare(const ExperimentFlags& f, const std::string& archs) {
  if (f.case_id.empty()) throw Error(ErrorKind::Usage, "--case is required");
  const fs::path out = f.out.empty() ? fs::path("out") / ("compare-" + f.case_id) : fs::path(f.out);
  std::vector<ReportRow> rows;
  for (const auto& a : parse_archs(archs)) {
    ExperimentFlags ef = f;
    ef.out.clear();
    ef.sets.insert(ef.sets.end(), a.sets.begin(), a.sets.end());
    ExperimentConfig cfg = resolve_config(ef, a.arch);
    std::string tag = a.arch + "-p" + std::to_string(cfg.p);
    cfg.output_dir = (out / tag).string();
    std::cerr << "== " << tag << '\n';
    const ExperimentResult res = run_experiment(cfg, progress(f.quiet));
    write_experiment(cfg, res);
    rows.push_back(res.row);
  }
  fs::create_directories(out);
  write_report_csv((out / "report.csv").string(), rows);
  for (const auto& r : rows) print_row(r);
  std::cout << "report written to " << (out / "report.csv").string() << '\n';
  return 0;
}

int cmd_report(const EvalFlags& f) {
  auto [model, data] = load_for_eval(f);
  const fs::path out = f.exp.out.empty() ? fs::path(f.model).parent_path() / "report" : fs::path(f.exp.out);
  fs::create_directories(out);
  const Evaluation ev = evaluate(model, data);
  const GridData& test = data.test;
  {
    std::ofstream curves(out / "test_curves.csv");
    curves << std::setprecision(10) << "scenario,variable,point,truth,prediction\n";
    for (std::size_t v = 0; v < test.variables.size(); ++v) {
      for (Eigen::Index j = 0; j < test.scenarios(); ++j) {
        for (Eigen::Index i = 0; i < test.points(); ++i) {
          curves << j << ',' << test.variables[v] << ',' << i << ',' << test.values[v](i, j) << ','
                 << ev.prediction[v](i, j) << '\n';
        }
      }
    }
    std::ofstream pts(out / "points.csv");
    pts << std::setprecision(10) << "point";
    for (Eigen::Index k = 0; k < test.y.rows(); ++k) pts << ",y" << k;
    pts << '\n';
    for (Eigen::Index i = 0; i < test.points(); ++i) {
      pts << i;
      for (Eigen::Index k = 0; k < test.y.rows(); ++k) pts << ',' << test.y(k, i);
      pts << '\n';
    }
  }
  if (const auto* flex = std::get_if<FlexDeepONet>(&model.net)) {
    for (std::size_t v = 0; v < flex->variables().size(); ++v) {
      const AlignmentReport rep = alignment_diagnostics(*flex, test.u, test.y, v);
      const std::string var = flex->variables()[v];
      std::ofstream frames(out / ("alignment_" + var + ".csv"));
      frames << std::setprecision(10) << "scenario";
      for (Eigen::Index k = 0; k < test.u.rows(); ++k) frames << ",u" << k;
      frames << ",scale,angle";
      for (Eigen::Index k = 0; k < test.y.rows(); ++k) frames << ",shift" << k;
      frames << ",centering,amplitude\n";
      std::ofstream aligned(out / ("aligned_curves_" + var + ".csv"));
      aligned << std::setprecision(10) << "scenario,point";
      for (Eigen::Index k = 0; k < test.y.rows(); ++k) aligned << ",y" << k << "_transformed";
      aligned << ",value\n";
      for (std::size_t j = 0; j < rep.rows.size(); ++j) {
        const auto& r = rep.rows[j];
        frames << j;
        for (Eigen::Index k = 0; k < r.u.size(); ++k) frames << ',' << r.u(k);
        frames << ',' << r.frame.scale << ',' << r.frame.angle;
        for (Eigen::Index k = 0; k < r.frame.shift.size(); ++k) frames << ',' << r.frame.shift(k);
        frames << ',' << r.centering << ',' << r.amplitude << '\n';
        for (Eigen::Index i = 0; i < test.points(); ++i) {
          aligned << j << ',' << i;
          for (Eigen::Index k = 0; k < test.y.rows(); ++k) aligned << ',' << rep.transformed[j](k, i);
          aligned << ',' << test.values[v](i, static_cast<Eigen::Index>(j)) << '\n';
        }
      }
    }
  }
  std::cout << "plot-ready CSVs written to " << out.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Operator-network surrogates: data generation, SVD analysis, training and comparison"};
  app.require_subcommand(1);

  ExperimentFlags gen_flags;
  auto* gen = app.add_subcommand("gen", "generate a case dataset and manifest");
  add_experiment_flags(gen, gen_flags, false);

  SvdFlags svd_flags;
  auto* svd_cmd = app.add_subcommand("svd", "cumulative energy and reconstruction error of a snapshot matrix");
  svd_cmd->add_option("--case", svd_flags.case_id, "tc1 | tc2 | tc4");
  svd_cmd->add_option("--input", svd_flags.input, "snapshot CSV instead of a generated case");
  svd_cmd->add_option("--variable", svd_flags.variable, "variable of a multi-variable case");
  svd_cmd->add_option("--preprocess", svd_flags.preprocess, "raw | center | center-scale");
  svd_cmd->add_option("--max-rank", svd_flags.max_rank, "largest truncation rank in the reconstruction table");
  svd_cmd->add_option("--seed", svd_flags.seed, "data seed");
  svd_cmd->add_option("--out", svd_flags.out, "output directory");
  svd_cmd->add_option("--set", svd_flags.sets, "override a config key, e.g. data.grid=50");

  ExperimentFlags train_flags;
  auto* train_cmd = app.add_subcommand("train", "train one model");
  add_experiment_flags(train_cmd, train_flags, true);

  EvalFlags eval_flags;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a model on the held-out scenarios of its case");
  eval_cmd->add_option("--model", eval_flags.model, "model file")->required();
  add_experiment_flags(eval_cmd, eval_flags.exp, false);

  ExperimentFlags cmp_flags;
  std::string archs;
  auto* cmp = app.add_subcommand("compare", "train several architectures and tabulate them");
  add_experiment_flags(cmp, cmp_flags, false);
  cmp->add_option("--archs", archs, "e.g. vanilla:p=8,flex:p=1")->required();

  EvalFlags report_flags;
  auto* report = app.add_subcommand("report", "plot-ready CSVs for a trained model");
  report->add_option("--model", report_flags.model, "model file")->required();
  add_experiment_flags(report, report_flags.exp, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*gen) return cmd_gen(gen_flags);
    if (*svd_cmd) return cmd_svd(svd_flags);
    if (*train_cmd) return cmd_train(train_flags);
    if (*eval_cmd) return cmd_eval(eval_flags);
    if (*cmp) return cmd_compare(cmp_flags, archs);
    if (*report) return cmd_report(report_flags);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    switch (e.kind()) {
      case ErrorKind::Usage:
      case ErrorKind::MetaMissing: return kExitUsage;
      default: return kExitFailure;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}
