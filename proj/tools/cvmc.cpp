// Command line front end: one-shot estimates, replicated benchmarks,
// Bayesian evidence studies, and concentration-bound evaluation.

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cvmc/bounds.hpp"
#include "cvmc/harness.hpp"

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw cvmc::IoError("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw cvmc::IoError("failed while reading " + path);
  return buf.str();
}

void emit_both(const cvmc::ExperimentReport& report, const std::string& prefix) {
  cvmc::emit_report(report, "csv", prefix);
  cvmc::emit_report(report, "json", prefix);
  std::cout << "wrote " << prefix << "_data.csv, " << prefix << "_summary.csv, " << prefix
            << ".json\n";
}

void emit_both(const cvmc::BayesReport& report, const std::string& prefix) {
  cvmc::emit_report(report, "csv", prefix);
  cvmc::emit_report(report, "json", prefix);
  std::cout << "wrote " << prefix << "_data.csv, " << prefix << "_summary.csv, " << prefix
            << ".json\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo integration with large families of control variates"};
  app.require_subcommand(1);

  // integrate: one estimate from one fresh sample
  auto* integrate = app.add_subcommand("integrate", "One-shot estimate on a fresh sample");
  cvmc::ExperimentConfig one;
  one.replicates = 1;
  std::string method = "ols", family = "legendre", selector = "dichotomic";
  int deg = 3;
  integrate->add_option("--integrand", one.integrand, "phi | f | g")->capture_default_str();
  integrate->add_option("--d", one.d, "dimension")->capture_default_str();
  integrate->add_option("--j", one.j, "integrand parameter j")->capture_default_str();
  integrate->add_option("--family", family, "legendre | fourier")->capture_default_str();
  integrate->add_option("--k", one.k, "per-coordinate degree cap")->capture_default_str();
  integrate->add_option("--deg", deg, "total degree cap")->capture_default_str();
  integrate->add_option("--n", one.n, "sample size")->capture_default_str();
  integrate->add_option("--N", one.N, "subsample size for lasso/lslasso")->capture_default_str();
  integrate->add_option("--method", method, "mc | ols | lasso | lslasso | lslassox | halton")
      ->capture_default_str();
  integrate->add_option("--selector", selector, "dichotomic | kfold")->capture_default_str();
  integrate->add_option("--seed", one.master_seed, "master seed")->capture_default_str();

  // bench: replicated study driven by a config file
  auto* bench = app.add_subcommand("bench", "Replicated benchmark from a JSON config");
  std::string bench_config;
  std::string bench_output;
  bench->add_option("config", bench_config, "path to ExperimentConfig JSON")->required();
  bench->add_option("--output", bench_output, "report path prefix (overrides config)");

  // bayes: evidence study on the capture or sonar posterior
  auto* bayes = app.add_subcommand("bayes", "Bayesian evidence benchmark");
  cvmc::BayesConfig bc;
  std::string bayes_selector = "dichotomic";
  std::vector<int> bayes_degs;
  bayes->add_option("--dataset", bc.dataset, "capture | sonar")->capture_default_str();
  bayes->add_option("--data-path", bc.data_path, "sonar CSV path");
  bayes->add_option("--k", bc.k, "per-coordinate degree cap")->capture_default_str();
  bayes->add_option("--order", bc.order, "interaction order (1 or 2)")->capture_default_str();
  bayes->add_option("--deg", bayes_degs, "total degree caps (repeatable)");
  bayes->add_option("--n", bc.n, "sample size per replicate")->capture_default_str();
  bayes->add_option("--N", bc.N, "subsample size for lasso/lslasso")->capture_default_str();
  bayes->add_option("--replicates", bc.replicates, "replicates")->capture_default_str();
  bayes->add_option("--methods", bc.methods, "methods (repeatable)");
  bayes->add_option("--selector", bayes_selector, "dichotomic | kfold")->capture_default_str();
  bayes->add_option("--n-gold", bc.n_gold, "gold-standard sample size")->capture_default_str();
  bayes->add_option("--seed", bc.master_seed, "master seed")->capture_default_str();
  bayes->add_option("--output", bc.output, "report path prefix");

  // bounds: evaluate the concentration bounds for given problem constants
  auto* bounds = app.add_subcommand("bounds", "Evaluate concentration bounds from JSON params");
  std::string bounds_params;
  std::string bounds_output;
  bounds->add_option("params", bounds_params, "path to BoundParams JSON")->required();
  bounds->add_option("--output", bounds_output, "write the report here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*integrate) {
      // Reuse the replicated pipeline with one replicate and one method.
      nlohmann::json cfg_obj = nlohmann::json::parse(one.to_json());
      cfg_obj["family"] = family;
      cfg_obj["selector"] = selector;
      cfg_obj["deg_list"] = std::vector<int>{deg};
      cfg_obj["methods"] = std::vector<std::string>{method};
      cvmc::ExperimentConfig cfg = cvmc::experiment_config_from_json(cfg_obj.dump());
      cvmc::ExperimentReport report = cvmc::run_experiment(cfg);
      const cvmc::MethodRow& row = report.rows.at(0);
      nlohmann::json out;
      out["method"] = row.method;
      out["m"] = static_cast<std::int64_t>(row.m);
      out["n"] = static_cast<std::int64_t>(cfg.n);
      out["seed"] = cfg.master_seed;
      out["estimate"] = row.estimates.at(0);
      out["true_value"] = report.true_value;
      out["abs_error"] = std::abs(row.estimates.at(0) - report.true_value);
      std::cout << out.dump(2) << '\n';
    } else if (*bench) {
      cvmc::ExperimentConfig cfg = cvmc::experiment_config_from_json(slurp(bench_config));
      if (!bench_output.empty()) cfg.output = bench_output;
      cvmc::ExperimentReport report = cvmc::run_experiment(cfg);
      emit_both(report, cfg.output.empty() ? "cvmc_report" : cfg.output);
    } else if (*bayes) {
      bc.selector = bayes_selector == "kfold" ? cvmc::Selector::KFold
                    : bayes_selector == "dichotomic"
                        ? cvmc::Selector::Dichotomic
                        : throw cvmc::ConfigError("unknown selector '" + bayes_selector + "'");
      if (!bayes_degs.empty()) bc.deg_list = bayes_degs;
      cvmc::BayesReport report = cvmc::run_bayes(bc);
      std::cout << "log_z " << report.gold.log_z << "  rel_se " << report.gold.rel_se << '\n';
      emit_both(report, bc.output.empty() ? "cvmc_bayes" : bc.output);
    } else if (*bounds) {
      cvmc::BoundParams p = cvmc::bound_params_from_json(slurp(bounds_params));
      std::string text = cvmc::bounds_report_json(p);
      if (bounds_output.empty()) {
        std::cout << text << '\n';
      } else {
        std::ofstream out(bounds_output);
        if (!out) throw cvmc::IoError("cannot open " + bounds_output + " for writing");
        out << text << '\n';
        out.flush();
        if (!out) throw cvmc::IoError("failed while writing " + bounds_output);
      }
    }
  } catch (const cvmc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const cvmc::IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
