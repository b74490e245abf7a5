#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <json.hpp>

#include "adaptfeat/csv.hpp"
#include "adaptfeat/penalty.hpp"
#include "adaptfeat/solvers.hpp"
#include "adaptfeat/svg.hpp"
#include "adaptfeat/trainer.hpp"
#include "checks.hpp"
#include "manifest.hpp"

namespace adaptfeat::tools {

namespace {

using Json = nlohmann::ordered_json;

constexpr double kHeatmapMaxInit = 4.0;
constexpr double kHeatmapMaxAdapted = 10.0;
constexpr double kHeatmapMaxLabel = 2.0;

struct Common {
  std::uint64_t seed = 0;
  std::string out = "out";
  std::string config;
  std::vector<std::string> argv;
};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Inline JSON object or a path to a JSON file.
Json load_config(const std::string& text) {
  if (text.empty()) return Json::object();
  const auto first = text.find_first_not_of(" \t\r\n");
  const std::string body = first != std::string::npos && text[first] == '{' ? text : read_file(text);
  try {
    Json j = Json::parse(body);
    if (!j.is_object()) throw Error("--config must be a JSON object");
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("--config: ") + e.what());
  }
}

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

template <typename Body>
int with_recorder(const std::string& command, const Common& common, Body&& body) {
  RunRecorder recorder(command, common.argv, common.seed, common.out);
  int code = 0;
  try {
    code = body(recorder);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    recorder.set_error(e.what());
    code = 2;
  }
  recorder.set_exit_code(code);
  recorder.finish();
  return code;
}

// ---------------------------------------------------------------- penalty-curve

struct CurveArgs {
  std::vector<std::string> penalties = {"power:2", "power:1", "joint(power:2,power:1)"};
  double vmin = 0.0;
  double vmax = 4.0;
  int steps = 81;
  bool svg = false;
};

int penalty_curve(const Common& common, CurveArgs args, const CLI::App& sub) {
  return with_recorder("penalty-curve", common, [&](RunRecorder& rec) {
    const Json cfg = load_config(common.config);
    if (cfg.contains("penalties") && sub.count("--penalty") == 0) args.penalties = cfg["penalties"].get<std::vector<std::string>>();
    if (cfg.contains("vmin") && sub.count("--vmin") == 0) args.vmin = cfg["vmin"].get<double>();
    if (cfg.contains("vmax") && sub.count("--vmax") == 0) args.vmax = cfg["vmax"].get<double>();
    if (cfg.contains("steps") && sub.count("--steps") == 0) args.steps = cfg["steps"].get<int>();
    if (args.steps < 2 || !(args.vmax > args.vmin) || args.vmin < 0.0) {
      throw Error("penalty-curve: need steps >= 2 and 0 <= vmin < vmax");
    }
    std::vector<ScalarPenalty> penalties;
    for (const std::string& p : args.penalties) penalties.push_back(ScalarPenalty::parse(p));

    const Index rows = args.steps;
    const Index cols = static_cast<Index>(penalties.size()) + 2;
    Matrix table(rows, cols);
    for (Index i = 0; i < rows; ++i) {
      const double v = args.vmin + (args.vmax - args.vmin) * static_cast<double>(i) / (rows - 1);
      table(i, 0) = v;
      for (std::size_t k = 0; k < penalties.size(); ++k) {
        table(i, static_cast<Index>(k) + 1) = effective_scalar_penalty(penalties[k], v).value;
      }
      table(i, cols - 1) = v * v;
    }
    Json config;
    config["penalties"] = args.penalties;
    config["vmin"] = args.vmin;
    config["vmax"] = args.vmax;
    config["steps"] = args.steps;
    Json columns = Json::array({"v"});
    for (const ScalarPenalty& p : penalties) columns.push_back("effective(" + p.to_string() + ")");
    columns.push_back("v^2");
    config["columns"] = columns;
    rec.set_config(config);
    rec.write_matrix("penalty_curve.csv", table);
    if (args.svg) {
      std::vector<svg::Series> series;
      for (Index k = 1; k < cols; ++k) series.push_back({columns[static_cast<std::size_t>(k)].get<std::string>(), table.col(k)});
      rec.write_text("penalty_curve.svg", svg::line_plot(table.col(0), series));
    }
    std::cout << "wrote " << (rec.out_dir() / "penalty_curve.csv").string() << '\n';
    return 0;
  });
}

// ---------------------------------------------------------------- check

int default_trials(const std::string& suite) {
  static const std::map<std::string, int> defaults = {{"theorem1", 20}, {"theorem2", 20}, {"lemma5", 20},
                                                      {"prop3", 4},     {"prop4", 10},    {"diag-l1", 100},
                                                      {"jacobian", 20}, {"eq2-path", 10}};
  const auto it = defaults.find(suite);
  return it == defaults.end() ? 10 : it->second;
}

int check(const Common& common, const std::string& suite, int trials) {
  return with_recorder("check", common, [&](RunRecorder& rec) {
    const int n = trials > 0 ? trials : default_trials(suite);
    rec.set_config(Json{{"suite", suite}, {"trials", n}});
    const SuiteReport report = run_suite(suite, n, common.seed);
    rec.write_text("check_" + suite + ".json", report.to_json() + "\n");
    for (const CheckResult& c : report.checks) {
      std::cout << (c.passed ? "PASS " : "FAIL ") << suite << '.' << c.name << " value=" << csv::format_double(c.value)
                << " threshold=" << csv::format_double(c.threshold) << '\n';
    }
    return report.passed() ? 0 : 1;
  });
}

// ---------------------------------------------------------------- kernel-align

struct AlignArgs {
  std::string data = "synthetic:200,20,4";
  std::vector<std::uint64_t> seeds;
  int epochs = 0;
  int path_points = 0;
};

struct DecileMeans {
  double low = 0.0;
  double high = 0.0;
};

DecileMeans decile_means(const Vector& y, const Vector& diag) {
  std::vector<Index> idx(static_cast<std::size_t>(y.size()));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::stable_sort(idx.begin(), idx.end(), [&](Index a, Index b) { return std::abs(y(a)) < std::abs(y(b)); });
  const std::size_t m = std::max<std::size_t>(1, idx.size() / 10);
  DecileMeans out;
  for (std::size_t i = 0; i < m; ++i) {
    out.low += diag(idx[i]);
    out.high += diag(idx[idx.size() - 1 - i]);
  }
  out.low /= static_cast<double>(m);
  out.high /= static_cast<double>(m);
  return out;
}

int kernel_align(const Common& common, AlignArgs args, const CLI::App& sub) {
  return with_recorder("kernel-align", common, [&](RunRecorder& rec) {
    const Json cfg = load_config(common.config);
    if (cfg.contains("data") && sub.count("--data") == 0) args.data = cfg["data"].get<std::string>();
    const DataSource source = DataSource::parse(args.data);
    std::vector<Index> hidden = {128, 128};
    if (cfg.contains("hidden")) hidden = cfg["hidden"].get<std::vector<Index>>();
    TrainConfig train_cfg = cfg.contains("train") ? TrainConfig::from_json(cfg["train"].dump()) : TrainConfig{};
    if (args.epochs > 0) train_cfg.epochs = args.epochs;
    int path_points = cfg.value("n_path_points", kDefaultPathPoints);
    if (args.path_points > 0) path_points = args.path_points;
    Index subset = cfg.value("n", Index{500});
    std::vector<int> classes = {2, 3};
    if (cfg.contains("classes")) classes = cfg["classes"].get<std::vector<int>>();
    if (classes.size() != 2) throw Error("kernel-align: classes must list two digits");
    if (args.seeds.empty()) {
      args.seeds = cfg.contains("seeds") ? cfg["seeds"].get<std::vector<std::uint64_t>>()
                                         : std::vector<std::uint64_t>{common.seed};
    }

    Dataset idx_data;
    if (source.kind == DataSource::Kind::kIdx) {
      const auto images = resolve_data_path(source.images);
      const auto labels = resolve_data_path(source.labels);
      rec.add_input_file(images);
      rec.add_input_file(labels);
      idx_data = load_idx(images, labels);
    }

    Json config;
    config["data"] = source.to_string();
    config["hidden"] = hidden;
    config["train"] = Json::parse(train_cfg.to_json());
    config["n_path_points"] = path_points;
    config["seeds"] = args.seeds;
    if (source.kind == DataSource::Kind::kIdx) {
      config["n"] = subset;
      config["classes"] = classes;
    }
    rec.set_config(config);

    Json summary;
    summary["data"] = source.to_string();
    summary["seeds"] = Json::array();
    std::vector<double> easy_align;
    std::vector<double> hard_align;
    std::vector<double> decile_gap;
    std::vector<double> low_decile;
    std::vector<double> high_decile;
    for (const std::uint64_t seed : args.seeds) {
      const BinaryDataset data = source.kind == DataSource::Kind::kSynthetic
                                     ? synthetic_clusters(source.n, source.d, source.separation, seed)
                                     : filter_classes(idx_data, classes[0], classes[1], subset, seed);
      MlpSpec spec;
      spec.layer_widths.push_back(data.data.x.cols());
      spec.layer_widths.insert(spec.layer_widths.end(), hidden.begin(), hidden.end());
      spec.layer_widths.push_back(1);
      TrainConfig seed_cfg = train_cfg;
      seed_cfg.seed = seed;
      const AlignmentResult r = run_alignment_experiment(data.data.x, data.labels, spec, seed_cfg, path_points, seed);

      const std::string dir = "seed_" + std::to_string(seed) + "/";
      const std::pair<const char*, const KernelMatrix*> kernels[] = {
          {"K0", &r.k0}, {"K_easy", &r.k_easy}, {"K_hard", &r.k_hard}, {"Ky_easy", &r.ky_easy}, {"Ky_hard", &r.ky_hard}};
      const double maxima[] = {kHeatmapMaxInit, kHeatmapMaxAdapted, kHeatmapMaxAdapted, kHeatmapMaxLabel,
                               kHeatmapMaxLabel};
      const int cell = r.y.size() > 250 ? 1 : 2;
      for (std::size_t k = 0; k < std::size(kernels); ++k) {
        rec.write_matrix(dir + kernels[k].first + ".csv", kernels[k].second->gram());
        rec.write_text(dir + kernels[k].first + ".svg", svg::heatmap(kernels[k].second->gram(), maxima[k], cell));
      }
      Matrix diag_table(r.y.size(), 6);
      diag_table << r.y, r.hard, r.residual, r.k_hard.diagonal_mass(), r.k_easy.diagonal_mass(), r.k0.diagonal_mass();
      rec.write_matrix(dir + "diag_mass.csv", diag_table);
      Matrix losses(static_cast<Index>(r.loss_easy.size()), 2);
      for (std::size_t e = 0; e < r.loss_easy.size(); ++e) {
        losses(static_cast<Index>(e), 0) = r.loss_easy[e];
        losses(static_cast<Index>(e), 1) = r.loss_hard[e];
      }
      rec.write_matrix(dir + "loss.csv", losses);
      save_checkpoint(rec.out_dir() / (dir + "theta0.ckpt"), {spec, seed, r.theta0});
      rec.record(dir + "theta0.ckpt");
      save_checkpoint(rec.out_dir() / (dir + "theta_easy.ckpt"), {spec, seed, r.theta_easy});
      rec.record(dir + "theta_easy.ckpt");
      save_checkpoint(rec.out_dir() / (dir + "theta_hard.ckpt"), {spec, seed, r.theta_hard});
      rec.record(dir + "theta_hard.ckpt");

      double correct = 0.0;
      for (Index i = 0; i < r.y.size(); ++i) {
        correct += r.hard(i) == data.labels(r.order[static_cast<std::size_t>(i)]) ? 1.0 : 0.0;
      }
      const DecileMeans deciles = decile_means(r.y, r.k_hard.diagonal_mass());
      Json entry;
      entry["seed"] = seed;
      entry["alignment"] = r.alignments;
      entry["final_loss"] = {{"easy", r.loss_easy.back()}, {"hard", r.loss_hard.back()}};
      entry["easy_target_accuracy"] = correct / static_cast<double>(r.y.size());
      entry["hard_diag_low_abs_y_decile"] = deciles.low;
      entry["hard_diag_high_abs_y_decile"] = deciles.high;
      summary["seeds"].push_back(entry);
      easy_align.push_back(r.alignments.at("easy_label"));
      hard_align.push_back(r.alignments.at("hard_label"));
      decile_gap.push_back(deciles.low - deciles.high);
      low_decile.push_back(deciles.low);
      high_decile.push_back(deciles.high);
      std::cout << "seed " << seed << ": alignment easy=" << csv::format_double(easy_align.back())
                << " hard=" << csv::format_double(hard_align.back()) << '\n';
    }
    summary["alignment_easy_label"] = median(easy_align);
    summary["alignment_hard_label"] = median(hard_align);
    summary["hard_diag_low_abs_y_decile"] = median(low_decile);
    summary["hard_diag_high_abs_y_decile"] = median(high_decile);
    summary["hard_diag_decile_gap"] = median(decile_gap);
    const bool directional = median(hard_align) > median(easy_align);
    const bool concentrated = median(decile_gap) > 0.0;
    summary["hard_exceeds_easy"] = directional;
    summary["low_decile_exceeds_high"] = concentrated;
    rec.write_text("summary.json", summary.dump(2) + "\n");
    std::cout << "median alignment easy=" << csv::format_double(median(easy_align))
              << " hard=" << csv::format_double(median(hard_align)) << (directional ? " (hard > easy)" : " (hard <= easy)")
              << '\n';
    return directional && concentrated ? 0 : 1;
  });
}

// ---------------------------------------------------------------- solve

Matrix json_matrix(const Json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  if (rows.empty()) throw Error("problem: empty matrix");
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.front().size()) throw ShapeError("problem: ragged matrix");
    for (std::size_t k = 0; k < rows[i].size(); ++k) m(static_cast<Index>(i), static_cast<Index>(k)) = rows[i][k];
  }
  return m;
}

Vector json_vector(const Json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

Json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

int solve(const Common& common, const std::string& problem_path, const std::string& method) {
  return with_recorder("solve", common, [&](RunRecorder& rec) {
    rec.add_input_file(problem_path);
    const Json problem = Json::parse(read_file(problem_path));
    Matrix phi;
    if (problem.contains("phi_csv")) {
      std::filesystem::path p = problem["phi_csv"].get<std::string>();
      if (p.is_relative()) p = std::filesystem::path(problem_path).parent_path() / p;
      rec.add_input_file(p);
      phi = csv::read_matrix(p);
    } else {
      phi = json_matrix(problem.at("phi"));
    }
    const Vector targets = json_vector(problem.at("targets"));
    const Vector offsets = problem.contains("offsets") ? json_vector(problem["offsets"]) : Vector::Zero(targets.size());
    const Index output_dim = problem.value("output_dim", Index{1});
    std::vector<BlockSpec> blocks;
    if (problem.contains("blocks")) {
      for (const Json& b : problem["blocks"]) {
        blocks.push_back(BlockSpec{b.at("rows").get<Index>(), b.at("cols").get<Index>(),
                                   ScalarPenalty::parse(b.value("left", std::string("power:2"))),
                                   ScalarPenalty::parse(b.value("right", std::string("char1")))});
      }
    } else {
      blocks.push_back(BlockSpec{phi.cols(), 1, ScalarPenalty::power_deviation(2.0), ScalarPenalty::characteristic_at_one()});
    }
    const BlockStructure structure(blocks);
    const FeatureOperator op{phi, structure.column_ranges(), offsets, targets, output_dim};
    const SolverConfig solver_cfg = SolverConfig::from_json(load_config(common.config).dump());
    rec.set_config(Json{{"method", method}, {"solver", Json::parse(solver_cfg.to_json())}});

    AdaptiveSolution sol;
    if (method == "effective") {
      sol = solve_effective(op, structure, solver_cfg);
    } else if (method == "bilinear") {
      sol = solve_bilinear(op, structure, solver_cfg);
    } else if (method == "min-norm") {
      sol = solve_min_norm(op, solver_cfg.tol);
      // Report in the problem's block shapes; transforms stay frozen.
      const Vector b = sol.coefficients();
      const ScalarPenalty frozen = ScalarPenalty::characteristic_at_one();
      sol.blocks.clear();
      sol.factorizations.clear();
      for (std::size_t l = 0; l < structure.size(); ++l) {
        const ColumnRange r = op.block_ranges[l];
        sol.blocks.push_back(unvec(b.segment(r.begin, r.size), structure[l].rows, structure[l].cols));
        sol.factorizations.push_back(factorize_block(sol.blocks.back(), frozen, frozen));
      }
    } else {
      throw Error("solve: unknown method " + method);
    }
    Json factors = Json::array();
    for (std::size_t l = 0; l < sol.blocks.size(); ++l) {
      const std::string tag = std::to_string(l);
      rec.write_matrix("B_" + tag + ".csv", sol.blocks[l]);
      const BlockFactorization& f = sol.factorizations[l];
      rec.write_matrix("U_" + tag + ".csv", f.u);
      rec.write_matrix("V_" + tag + ".csv", f.v);
      factors.push_back({{"block", l},
                         {"d", vector_json(f.d)},
                         {"s1", vector_json(f.s1)},
                         {"sigma", vector_json(f.sigma)},
                         {"s2", vector_json(f.s2)}});
    }
    rec.write_text("factorization.json", factors.dump(2) + "\n");
    Json summary;
    summary["method"] = method;
    summary["objective"] = sol.objective;
    summary["constraint_residual"] = sol.constraint_residual;
    summary["converged"] = sol.converged;
    summary["iterations"] = sol.iterations;
    summary["diagnostics"] = sol.diagnostics;
    rec.write_text("summary.json", summary.dump(2) + "\n");
    std::cout << "objective=" << csv::format_double(sol.objective)
              << " residual=" << csv::format_double(sol.constraint_residual)
              << (sol.converged ? " converged" : " NOT converged") << '\n';
    return sol.converged ? 0 : 1;
  });
}

}  // namespace

DataSource DataSource::parse(const std::string& text) {
  DataSource out;
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw Error("--data: expected synthetic:<n>,<d>,<sep> or idx:<img>,<lbl>");
  const std::string kind = text.substr(0, colon);
  std::vector<std::string> parts;
  std::stringstream rest(text.substr(colon + 1));
  for (std::string item; std::getline(rest, item, ',');) parts.push_back(item);
  if (kind == "synthetic") {
    if (parts.size() != 3) throw Error("--data synthetic: expected <n>,<d>,<sep>");
    try {
      out.n = std::stoll(parts[0]);
      out.d = std::stoll(parts[1]);
      out.separation = std::stod(parts[2]);
    } catch (const std::exception&) {
      throw Error("--data synthetic: malformed numbers in " + text);
    }
    out.kind = Kind::kSynthetic;
  } else if (kind == "idx") {
    if (parts.size() != 2 || parts[0].empty() || parts[1].empty()) throw Error("--data idx: expected <images>,<labels>");
    out.kind = Kind::kIdx;
    out.images = parts[0];
    out.labels = parts[1];
  } else {
    throw Error("--data: unknown source '" + kind + "'");
  }
  return out;
}

std::string DataSource::to_string() const {
  if (kind == Kind::kIdx) return "idx:" + images.string() + "," + labels.string();
  return "synthetic:" + std::to_string(n) + "," + std::to_string(d) + "," + csv::format_double(separation);
}

std::filesystem::path resolve_data_path(const std::filesystem::path& path) {
  if (std::filesystem::exists(path) || path.is_absolute()) return path;
  const std::filesystem::path cached = cache_dir() / path;
  return std::filesystem::exists(cached) ? cached : path;
}

int run_cli(const std::vector<std::string>& argv) {
  CLI::App app{"Adaptive tangent-feature toolkit"};
  app.require_subcommand(1);
  Common common;
  common.argv.assign(argv.begin() + (argv.empty() ? 0 : 1), argv.end());

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", common.seed, "Random seed");
    sub->add_option("--out", common.out, "Output directory");
    sub->add_option("--config", common.config, "JSON object or path to a JSON file");
  };

  CurveArgs curve;
  CLI::App* curve_cmd = app.add_subcommand("penalty-curve", "Effective penalty curves as CSV (and SVG)");
  add_common(curve_cmd);
  curve_cmd->add_option("--penalty", curve.penalties, "Penalty spec: power:<p> | char1 | quad | joint(a,b)");
  curve_cmd->add_option("--vmin", curve.vmin, "Smallest v");
  curve_cmd->add_option("--vmax", curve.vmax, "Largest v");
  curve_cmd->add_option("--steps", curve.steps, "Grid points");
  curve_cmd->add_flag("--svg", curve.svg, "Also emit an SVG line plot");

  std::string suite;
  int trials = 0;
  CLI::App* check_cmd = app.add_subcommand("check", "Run an invariant suite; exit code 0 iff it passes");
  add_common(check_cmd);
  check_cmd->add_option("--suite", suite, "Suite name")->required()->check(CLI::IsMember(suite_names()));
  check_cmd->add_option("--trials", trials, "Trial count (suite default when omitted)");

  AlignArgs align;
  CLI::App* align_cmd = app.add_subcommand("kernel-align", "Easy/hard target kernel alignment experiment");
  add_common(align_cmd);
  align_cmd->add_option("--data", align.data, "synthetic:<n>,<d>,<sep> or idx:<images>,<labels>");
  align_cmd->add_option("--seeds", align.seeds, "Experiment seeds (default: --seed)");
  align_cmd->add_option("--epochs", align.epochs, "Override training epochs");
  align_cmd->add_option("--path-points", align.path_points, "Points on the averaging path");

  std::string problem;
  std::string method = "effective";
  CLI::App* solve_cmd = app.add_subcommand("solve", "Solve an adaptive interpolation problem from JSON");
  add_common(solve_cmd);
  solve_cmd->add_option("--problem", problem, "Problem JSON")->required()->check(CLI::ExistingFile);
  solve_cmd->add_option("--method", method, "effective | bilinear | min-norm")
      ->check(CLI::IsMember({"effective", "bilinear", "min-norm"}));

  std::vector<const char*> raw;
  for (const std::string& a : argv) raw.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(raw.size()), raw.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (curve_cmd->parsed()) return penalty_curve(common, curve, *curve_cmd);
    if (check_cmd->parsed()) return check(common, suite, trials);
    if (align_cmd->parsed()) return kernel_align(common, align, *align_cmd);
    if (solve_cmd->parsed()) return solve(common, problem, method);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}

}  // namespace adaptfeat::tools
