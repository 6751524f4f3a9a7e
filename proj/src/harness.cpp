#include "cvmc/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "cvmc/qmc.hpp"

namespace cvmc {
namespace {

using nlohmann::json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string family_name(BasisFamily family) {
  return family == BasisFamily::Fourier ? "fourier" : "legendre";
}

BasisFamily family_from_name(const std::string& name) {
  if (name == "legendre") return BasisFamily::LegendreShifted;
  if (name == "fourier") return BasisFamily::Fourier;
  throw ConfigError("unknown basis family '" + name + "'");
}

std::string selector_name(Selector selector) {
  return selector == Selector::KFold ? "kfold" : "dichotomic";
}

Selector selector_from_name(const std::string& name) {
  if (name == "dichotomic") return Selector::Dichotomic;
  if (name == "kfold") return Selector::KFold;
  throw ConfigError("unknown selector '" + name + "'");
}

bool is_pointwise(const std::string& method) { return method == "mc" || method == "halton"; }

bool needs_subsample(const std::string& method) {
  return method == "lasso" || method == "lslasso";
}

void validate_methods(const std::vector<std::string>& methods,
                      const std::vector<std::string>& allowed, Eigen::Index n, Eigen::Index N) {
  if (methods.empty()) throw ConfigError("no methods requested");
  for (const auto& method : methods) {
    if (std::find(allowed.begin(), allowed.end(), method) == allowed.end())
      throw ConfigError("unknown method '" + method + "'");
    if (needs_subsample(method) && (N < 1 || N > n))
      throw ConfigError("method '" + method + "' needs a subsample size N in [1, n]");
  }
}

void validate_config(const ExperimentConfig& cfg) {
  if (cfg.integrand != "phi" && cfg.integrand != "f" && cfg.integrand != "g")
    throw ConfigError("unknown integrand '" + cfg.integrand + "'");
  if (cfg.d < 1) throw ConfigError("dimension d must be >= 1");
  if (cfg.integrand != "phi" && (cfg.j < 1 || cfg.j > cfg.d))
    throw ConfigError("integrand parameter j must be in [1, d]");
  if (cfg.k < 1) throw ConfigError("per-coordinate degree k must be >= 1");
  if (cfg.deg_list.empty()) throw ConfigError("deg_list must not be empty");
  for (int deg : cfg.deg_list)
    if (deg < 1) throw ConfigError("every total degree must be >= 1");
  if (cfg.max_active != -1 && cfg.max_active < 1)
    throw ConfigError("max_active must be -1 or >= 1");
  if (cfg.n < 1) throw ConfigError("sample size n must be >= 1");
  if (cfg.replicates < 1) throw ConfigError("replicates must be >= 1");
  static const std::vector<std::string> allowed{"mc",      "ols",      "lasso",
                                                "lslasso", "lslassox", "halton"};
  validate_methods(cfg.methods, allowed, cfg.n, cfg.N);
  if (cfg.d > 20 &&
      std::find(cfg.methods.begin(), cfg.methods.end(), "halton") != cfg.methods.end())
    throw ConfigError("halton baseline supports d <= 20");
}

void validate_config(const BayesConfig& cfg) {
  if (cfg.dataset != "capture" && cfg.dataset != "sonar")
    throw ConfigError("unknown dataset '" + cfg.dataset + "'");
  if (cfg.k < 1) throw ConfigError("per-coordinate degree k must be >= 1");
  if (cfg.order != 1 && cfg.order != 2)
    throw ConfigError("interaction order must be 1 or 2");
  if (cfg.deg_list.empty()) throw ConfigError("deg_list must not be empty");
  for (int deg : cfg.deg_list)
    if (deg < 1) throw ConfigError("every total degree must be >= 1");
  if (cfg.n < 1) throw ConfigError("sample size n must be >= 1");
  if (cfg.replicates < 1) throw ConfigError("replicates must be >= 1");
  if (cfg.n_gold < 2) throw ConfigError("gold-standard sample size must be >= 2");
  static const std::vector<std::string> allowed{"mc", "ols", "lasso", "lslasso", "lslassox"};
  validate_methods(cfg.methods, allowed, cfg.n, cfg.N);
}

Integrand pick_integrand(const ExperimentConfig& cfg) {
  if (cfg.integrand == "phi") return make_phi(cfg.d);
  if (cfg.integrand == "f") return make_f(cfg.d, cfg.j);
  return make_g(cfg.d, cfg.j);
}

// One output row of a replicated study: a method, and for design-based
// methods the index of the basis it runs against.
struct RowPlan {
  std::string method;
  int spec_index = -1;  // -1 for mc/halton
  Eigen::Index m = 0;
};

std::vector<RowPlan> plan_rows(const std::vector<std::string>& methods,
                               const std::vector<BasisSpec>& specs) {
  std::vector<RowPlan> plan;
  for (const auto& method : methods) {
    if (is_pointwise(method)) {
      plan.push_back({method, -1, 0});
    } else {
      for (std::size_t i = 0; i < specs.size(); ++i)
        plan.push_back({method, static_cast<int>(i), specs[i].m()});
    }
  }
  return plan;
}

// Runs `compute(r, est, ms)` for r in [0, replicates) on thread_count()
// workers and reduces in replicate order, so results do not depend on the
// parallelism degree. `est`/`ms` are per-row outputs for one replicate.
std::vector<MethodRow> run_replicated(
    const std::vector<RowPlan>& plan, int replicates, double target,
    const std::function<void(int, std::vector<double>&, std::vector<double>&)>& compute) {
  const std::size_t nrows = plan.size();
  std::vector<std::vector<double>> est(nrows, std::vector<double>(replicates, 0.0));
  std::vector<std::vector<double>> wall(nrows, std::vector<double>(replicates, 0.0));

  auto one = [&](int r) {
    std::vector<double> e(nrows, 0.0), w(nrows, 0.0);
    compute(r, e, w);
    for (std::size_t i = 0; i < nrows; ++i) {
      est[i][r] = e[i];
      wall[i][r] = w[i];
    }
  };

  int workers = std::min(thread_count(), replicates);
  if (workers <= 1) {
    for (int r = 0; r < replicates; ++r) one(r);
  } else {
    std::atomic<int> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          int r = next.fetch_add(1);
          if (r >= replicates) break;
          try {
            one(r);
          } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  std::vector<MethodRow> rows(nrows);
  for (std::size_t i = 0; i < nrows; ++i) {
    rows[i].method = plan[i].method;
    rows[i].m = plan[i].m;
    rows[i].estimates = est[i];
    double acc = 0.0, ms = 0.0;
    for (int r = 0; r < replicates; ++r) {
      double err = est[i][r] - target;
      acc += err * err;
      ms += wall[i][r];
    }
    rows[i].mse = acc / replicates;
    rows[i].wall_ms = ms;
  }
  double mc_mse = kNaN;
  for (const auto& row : rows)
    if (row.method == "mc") {
      mc_mse = row.mse;
      break;
    }
  for (auto& row : rows) row.efficiency = mc_mse / row.mse;
  return rows;
}

double now_ms() {
  auto t = std::chrono::steady_clock::now().time_since_epoch();
  return std::chrono::duration<double, std::milli>(t).count();
}

double norm_cdf(double x) { return 0.5 * std::erfc(-x * 0.7071067811865475); }

// Inverse standard normal CDF, rational approximation with |error| < 1.2e-9.
// The proposal density below is evaluated exactly at the drawn points, so the
// approximation only perturbs the proposal shape, never the estimate's bias.
double norm_quantile(double p) {
  static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                              -2.759285104469687e+02, 1.383577518672690e+02,
                              -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                              -1.556989798598866e+02, 6.680131188771972e+01,
                              -1.328068155288572e+01};
  static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                              -2.400758277161838e+00, -2.549732539343734e+00,
                              4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                              2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  if (p < plow) {
    double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - plow) {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  double q = p - 0.5, r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_csv_pair(const std::vector<MethodRow>& rows, double target, const std::string& prefix) {
  const std::string data_path = prefix + "_data.csv";
  std::ofstream data(data_path);
  if (!data) throw IoError("cannot open " + data_path + " for writing");
  data << "method,m,replicate,estimate,abs_error\n";
  for (const auto& row : rows)
    for (std::size_t r = 0; r < row.estimates.size(); ++r)
      data << row.method << ',' << row.m << ',' << r << ',' << fmt17(row.estimates[r]) << ','
           << fmt17(std::abs(row.estimates[r] - target)) << '\n';
  data.flush();
  if (!data) throw IoError("failed while writing " + data_path);

  const std::string summary_path = prefix + "_summary.csv";
  std::ofstream summary(summary_path);
  if (!summary) throw IoError("cannot open " + summary_path + " for writing");
  summary << "method,m,mse,efficiency\n";
  for (const auto& row : rows)
    summary << row.method << ',' << row.m << ',' << fmt17(row.mse) << ','
            << fmt17(row.efficiency) << '\n';
  summary.flush();
  if (!summary) throw IoError("failed while writing " + summary_path);
}

void write_json_file(const std::string& text, const std::string& prefix) {
  const std::string path = prefix + ".json";
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << text << '\n';
  out.flush();
  if (!out) throw IoError("failed while writing " + path);
}

json rows_to_json(const std::vector<MethodRow>& rows) {
  json arr = json::array();
  for (const auto& row : rows) {
    json obj;
    obj["method"] = row.method;
    obj["m"] = static_cast<std::int64_t>(row.m);
    obj["estimates"] = row.estimates;
    obj["mse"] = row.mse;
    obj["efficiency"] = row.efficiency;
    obj["wall_ms"] = row.wall_ms;
    arr.push_back(std::move(obj));
  }
  return arr;
}

json parse_config_blob(const std::string& text) {
  if (text.empty()) return nullptr;
  return json::parse(text);
}

json parse_or_io_error(const std::string& text) {
  try {
    json obj = json::parse(text);
    if (!obj.is_object()) throw IoError("config must be a JSON object");
    return obj;
  } catch (const IoError&) {
    throw;
  } catch (const std::exception& e) {
    throw IoError(std::string("config parse: ") + e.what());
  }
}

// Wraps type errors (e.g. a string where a number belongs) as ConfigError;
// the text was valid JSON, its content is not a valid configuration.
template <typename Fn>
void read_fields(Fn&& fn) {
  try {
    fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
}

}  // namespace

int thread_count() {
  if (const char* env = std::getenv("CVMC_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<int>(std::min(v, 1024L));
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

std::string ExperimentConfig::to_json() const {
  json obj;
  obj["integrand"] = integrand;
  obj["d"] = d;
  obj["j"] = j;
  obj["family"] = family_name(family);
  obj["k"] = k;
  obj["deg_list"] = deg_list;
  obj["max_active"] = max_active;
  obj["n"] = static_cast<std::int64_t>(n);
  obj["N"] = static_cast<std::int64_t>(N);
  obj["replicates"] = replicates;
  obj["master_seed"] = master_seed;
  obj["methods"] = methods;
  obj["selector"] = selector_name(selector);
  obj["output"] = output;
  return obj.dump();
}

ExperimentConfig experiment_config_from_json(const std::string& text) {
  json obj = parse_or_io_error(text);
  ExperimentConfig cfg;
  read_fields([&] {
    cfg.integrand = obj.value("integrand", cfg.integrand);
    cfg.d = obj.value("d", cfg.d);
    cfg.j = obj.value("j", cfg.j);
    if (obj.contains("family")) cfg.family = family_from_name(obj["family"].get<std::string>());
    cfg.k = obj.value("k", cfg.k);
    if (obj.contains("deg_list")) cfg.deg_list = obj["deg_list"].get<std::vector<int>>();
    cfg.max_active = obj.value("max_active", cfg.max_active);
    cfg.n = obj.value("n", static_cast<std::int64_t>(cfg.n));
    cfg.N = obj.value("N", static_cast<std::int64_t>(cfg.N));
    cfg.replicates = obj.value("replicates", cfg.replicates);
    cfg.master_seed = obj.value("master_seed", cfg.master_seed);
    if (obj.contains("methods")) cfg.methods = obj["methods"].get<std::vector<std::string>>();
    if (obj.contains("selector"))
      cfg.selector = selector_from_name(obj["selector"].get<std::string>());
    cfg.output = obj.value("output", cfg.output);
  });
  validate_config(cfg);
  return cfg;
}

std::string BayesConfig::to_json() const {
  json obj;
  obj["dataset"] = dataset;
  obj["data_path"] = data_path;
  obj["k"] = k;
  obj["order"] = order;
  obj["deg_list"] = deg_list;
  obj["n"] = static_cast<std::int64_t>(n);
  obj["N"] = static_cast<std::int64_t>(N);
  obj["replicates"] = replicates;
  obj["master_seed"] = master_seed;
  obj["methods"] = methods;
  obj["selector"] = selector_name(selector);
  obj["n_gold"] = static_cast<std::int64_t>(n_gold);
  obj["output"] = output;
  return obj.dump();
}

BayesConfig bayes_config_from_json(const std::string& text) {
  json obj = parse_or_io_error(text);
  BayesConfig cfg;
  read_fields([&] {
    cfg.dataset = obj.value("dataset", cfg.dataset);
    cfg.data_path = obj.value("data_path", cfg.data_path);
    cfg.k = obj.value("k", cfg.k);
    cfg.order = obj.value("order", cfg.order);
    if (obj.contains("deg_list")) cfg.deg_list = obj["deg_list"].get<std::vector<int>>();
    cfg.n = obj.value("n", static_cast<std::int64_t>(cfg.n));
    cfg.N = obj.value("N", static_cast<std::int64_t>(cfg.N));
    cfg.replicates = obj.value("replicates", cfg.replicates);
    cfg.master_seed = obj.value("master_seed", cfg.master_seed);
    if (obj.contains("methods")) cfg.methods = obj["methods"].get<std::vector<std::string>>();
    if (obj.contains("selector"))
      cfg.selector = selector_from_name(obj["selector"].get<std::string>());
    cfg.n_gold = obj.value("n_gold", static_cast<std::int64_t>(cfg.n_gold));
    cfg.output = obj.value("output", cfg.output);
  });
  validate_config(cfg);
  return cfg;
}

EstimateResult run_method(const std::string& method, const SampleBatch& batch, Eigen::Index N,
                          Selector selector, const LassoOptions& opts) {
  if (method == "mc") return mc_estimate(batch.f_vals);
  if (method == "ols") return ols_estimate(batch);
  if (method == "lslasso") return lslasso_estimate(batch, N, selector, opts);
  if (method == "lslassox") {
    Eigen::Index nx = static_cast<Eigen::Index>(
        std::floor(15.0 * std::sqrt(static_cast<double>(batch.n()))));
    nx = std::max<Eigen::Index>(1, std::min(nx, batch.n()));
    return lslasso_estimate(batch, nx, selector, opts);
  }
  if (method == "lasso") {
    if (N < 1 || N > batch.n())
      throw ConfigError("lasso needs a subsample size N in [1, n]");
    SelectionResult sel =
        selector == Selector::Dichotomic
            ? dichotomic_search(batch, N, 3, 12, 60, opts)
            : kfold_cv(batch, N, default_lambda_grid(lambda_max(batch, N)), 5, opts);
    // Full-sample solve at the selected penalty, warm started from the
    // subsample solution rescaled to full-sample standardized units.
    Eigen::VectorXd warm =
        sel.beta_N.cwiseProduct(batch.col_norms) / std::sqrt(static_cast<double>(batch.n()));
    LassoFit fit = lasso_cd(batch, sel.lambda, opts, &warm);
    EstimateResult res;
    res.method = Method::Lasso;
    res.beta = fit.beta;
    res.alpha = batch.f_mean - fit.beta.dot(batch.col_means);
    res.iterations = fit.sweeps;
    res.lambda_used = sel.lambda;
    res.subsample_N = N;
    res.range_unreachable = sel.range_unreachable;
    for (Eigen::Index i = 0; i < fit.beta.size(); ++i)
      if (fit.beta(i) != 0.0) res.active_set.push_back(i);
    return res;
  }
  throw ConfigError("method '" + method + "' cannot run on a prepared batch");
}

BasisSpec build_interaction_basis(int d, int k, int order, int deg_cap) {
  if (order < 1) throw ConfigError("interaction order must be >= 1");
  int deg = deg_cap < 0 ? order * k : deg_cap;
  return make_basis(BasisFamily::LegendreShifted, d, k, deg, order);
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  const Integrand fn = pick_integrand(cfg);

  bool any_design = false, any_halton = false;
  for (const auto& method : cfg.methods) {
    if (!is_pointwise(method)) any_design = true;
    if (method == "halton") any_halton = true;
  }

  std::vector<BasisSpec> specs;
  std::size_t max_spec = 0;
  if (any_design) {
    specs.reserve(cfg.deg_list.size());
    for (int deg : cfg.deg_list)
      specs.push_back(make_basis(cfg.family, cfg.d, cfg.k, deg, cfg.max_active));
    for (std::size_t i = 1; i < specs.size(); ++i)
      if (cfg.deg_list[i] > cfg.deg_list[max_spec]) max_spec = i;
  }

  double halton_est = 0.0;
  if (any_halton) halton_est = fn(halton_points(cfg.d, cfg.n)).mean();

  const std::vector<RowPlan> plan = plan_rows(cfg.methods, specs);

  auto compute = [&](int r, std::vector<double>& est, std::vector<double>& wall) {
    Eigen::MatrixXd x = sample_uniform(cfg.d, cfg.n, stream_seed(cfg.master_seed, r));
    Eigen::VectorXd f = fn(x);
    // Design built once at the largest degree; lower degrees are leading
    // column blocks because indices are ordered by total degree.
    std::vector<SampleBatch> batches(specs.size());
    if (any_design) {
      Eigen::MatrixXd h = build_design(specs[max_spec], x);
      for (std::size_t i = 0; i < specs.size(); ++i)
        batches[i] = SampleBatch::from_design(x, f, h.leftCols(specs[i].m()));
    }
    for (std::size_t i = 0; i < plan.size(); ++i) {
      double t0 = now_ms();
      if (plan[i].method == "mc") {
        est[i] = mc_estimate(f).alpha;
      } else if (plan[i].method == "halton") {
        est[i] = halton_est;
      } else {
        est[i] = run_method(plan[i].method, batches[plan[i].spec_index], cfg.N, cfg.selector)
                     .alpha;
      }
      wall[i] = now_ms() - t0;
    }
  };

  ExperimentReport report;
  report.config_json = cfg.to_json();
  report.true_value = fn.true_value.value_or(kNaN);
  report.rows = run_replicated(plan, cfg.replicates, report.true_value, compute);
  return report;
}

BayesReport run_bayes(const BayesConfig& cfg) {
  validate_config(cfg);

  int dim = 0;
  std::function<Eigen::VectorXd(const Eigen::MatrixXd&)> loglik;
  if (cfg.dataset == "capture") {
    dim = 12;
    const CaptureData data = dipper_data();
    loglik = [data](const Eigen::MatrixXd& u) {
      Eigen::VectorXd out(u.rows());
      Eigen::RowVectorXd buf(u.cols());
      for (Eigen::Index i = 0; i < u.rows(); ++i) {
        buf = u.row(i);
        out(i) = capture_loglik(data, buf.data());
      }
      return out;
    };
  } else {
    if (cfg.data_path.empty())
      throw ConfigError("sonar dataset needs a data_path to the CSV file");
    SonarData data;
    try {
      data = load_sonar(cfg.data_path);
    } catch (const std::exception& e) {
      throw IoError(e.what());
    }
    dim = static_cast<int>(data.X.cols());
    // Coefficients live on [-1,1]^61; the cube volume cancels in the
    // evidence ratio, so points stay in u-space.
    loglik = [data = std::move(data)](const Eigen::MatrixXd& u) {
      return sonar_loglik_batch(data, (2.0 * u.array() - 1.0).matrix());
    };
  }

  // Disjoint deterministic streams for pilot, gold standard, and replicates.
  const std::uint64_t pilot_seed = mix64(cfg.master_seed ^ 0x70696C6F74ULL);
  const std::uint64_t gold_seed = mix64(cfg.master_seed ^ 0x676F6C64ULL);

  // Pilot pass picks the log-shift that keeps exp() in range and the anchor
  // point for the gold-standard proposal.
  Eigen::MatrixXd pilot = sample_uniform(dim, 1000, pilot_seed);
  Eigen::VectorXd pilot_ll = loglik(pilot);
  Eigen::Index pilot_best = 0;
  const double shift = pilot_ll.maxCoeff(&pilot_best);

  GoldStandard gold;
  gold.shift_c = shift;
  gold.n_gold = cfg.n_gold;
  gold.seed = gold_seed;

  // The evidence integrands concentrate almost all of their mass in a tiny
  // region, so plain uniform sampling cannot price them at desk scale. The
  // gold budget therefore goes into importance sampling from a half-uniform,
  // half-Gaussian mixture adapted around the pilot anchor. The uniform half
  // bounds the weights by 2, so the estimate never degrades much below plain
  // Monte Carlo, while the Gaussian half soaks up the peak.
  Eigen::VectorXd mu = pilot.row(pilot_best).transpose();
  Eigen::VectorXd sd = Eigen::VectorXd::Constant(dim, 0.25);
  Eigen::VectorXd lo_cdf(dim), width_cdf(dim), log_norm(dim);
  auto refresh_proposal = [&] {
    for (int j = 0; j < dim; ++j) {
      mu(j) = std::min(0.99, std::max(0.01, mu(j)));
      sd(j) = std::min(0.35, std::max(0.02, sd(j)));
      double lo = norm_cdf((0.0 - mu(j)) / sd(j));
      double hi = norm_cdf((1.0 - mu(j)) / sd(j));
      lo_cdf(j) = lo;
      width_cdf(j) = hi - lo;
      log_norm(j) =
          -std::log(sd(j)) - 0.918938533204672742 - std::log(hi - lo);  // log sqrt(2 pi)
    }
  };
  refresh_proposal();

  // One draw per row of a (dim+1)-column uniform table: column 0 picks the
  // mixture component, the rest map through the truncated-normal quantile.
  Eigen::MatrixXd pts;
  auto draw_points = [&](const Eigen::MatrixXd& u) {
    pts.resize(u.rows(), dim);
    for (Eigen::Index i = 0; i < u.rows(); ++i) {
      if (u(i, 0) < 0.5) {
        for (int j = 0; j < dim; ++j) pts(i, j) = u(i, j + 1);
      } else {
        for (int j = 0; j < dim; ++j)
          pts(i, j) = mu(j) + sd(j) * norm_quantile(lo_cdf(j) + u(i, j + 1) * width_cdf(j));
      }
    }
  };
  auto log_mix_density = [&](Eigen::Index i) {
    double s = 0.0;
    for (int j = 0; j < dim; ++j) {
      double z = (pts(i, j) - mu(j)) / sd(j);
      s += log_norm(j) - 0.5 * z * z;
    }
    return s <= 0.0 ? -0.6931471805599453 + std::log1p(std::exp(s))
                    : -0.6931471805599453 + s + std::log1p(std::exp(-s));
  };

  // Two adaptation rounds re-fit the Gaussian to weighted moments; skipped
  // when the budget is too small to spare the points.
  const Eigen::Index adapt_n = std::min<Eigen::Index>(50000, cfg.n_gold / 4);
  Eigen::Index spent = 0;
  if (adapt_n >= 200) {
    for (int round = 0; round < 2; ++round) {
      draw_points(sample_uniform(dim + 1, adapt_n, stream_seed(gold_seed, 17 + round)));
      Eigen::VectorXd ll = loglik(pts);
      double wsum = 0.0;
      Eigen::VectorXd m1 = Eigen::VectorXd::Zero(dim), m2 = Eigen::VectorXd::Zero(dim);
      for (Eigen::Index i = 0; i < adapt_n; ++i) {
        double w = std::exp(ll(i) - shift - log_mix_density(i));
        wsum += w;
        m1 += w * pts.row(i).transpose();
        m2 += w * pts.row(i).cwiseProduct(pts.row(i)).transpose();
      }
      spent += adapt_n;
      if (wsum > 0.0) {
        mu = m1 / wsum;
        Eigen::VectorXd var = (m2 / wsum - mu.cwiseProduct(mu)).cwiseMax(0.0);
        sd = 1.5 * var.cwiseSqrt();
        refresh_proposal();
      }
    }
  }

  const Eigen::Index n_final = cfg.n_gold - spent;
  double sum = 0.0, sumsq = 0.0;
  const Eigen::Index block = 100000;
  for (Eigen::Index done = 0; done < n_final;) {
    Eigen::Index take = std::min(block, n_final - done);
    draw_points(sample_uniform_rows(dim + 1, done, take, gold_seed));
    Eigen::VectorXd ll = loglik(pts);
    for (Eigen::Index i = 0; i < take; ++i) {
      double v = std::exp(ll(i) - shift - log_mix_density(i));
      sum += v;
      sumsq += v * v;
    }
    done += take;
  }
  const double ng = static_cast<double>(n_final);
  const double gold_mean = sum / ng;
  gold.log_z = shift + std::log(gold_mean);
  double var = std::max(0.0, (sumsq - ng * gold_mean * gold_mean) / (ng - 1.0));
  gold.rel_se = std::sqrt(var) / (gold_mean * std::sqrt(ng));

  std::vector<BasisSpec> specs;
  specs.reserve(cfg.deg_list.size());
  for (int deg : cfg.deg_list) specs.push_back(build_interaction_basis(dim, cfg.k, cfg.order, deg));
  std::size_t max_spec = 0;
  for (std::size_t i = 1; i < specs.size(); ++i)
    if (cfg.deg_list[i] > cfg.deg_list[max_spec]) max_spec = i;
  bool any_design = false;
  for (const auto& method : cfg.methods)
    if (!is_pointwise(method)) any_design = true;

  const std::vector<RowPlan> plan = plan_rows(cfg.methods, specs);

  auto compute = [&](int r, std::vector<double>& est, std::vector<double>& wall) {
    Eigen::MatrixXd u = sample_uniform(dim, cfg.n, stream_seed(cfg.master_seed, r));
    Eigen::VectorXd f = loglik(u);
    for (Eigen::Index i = 0; i < f.size(); ++i) f(i) = std::exp(f(i) - shift);
    std::vector<SampleBatch> batches(specs.size());
    if (any_design) {
      Eigen::MatrixXd h = build_design(specs[max_spec], u);
      for (std::size_t i = 0; i < specs.size(); ++i)
        batches[i] = SampleBatch::from_design(u, f, h.leftCols(specs[i].m()));
    }
    for (std::size_t i = 0; i < plan.size(); ++i) {
      double t0 = now_ms();
      double a = plan[i].method == "mc"
                     ? mc_estimate(f).alpha
                     : run_method(plan[i].method, batches[plan[i].spec_index], cfg.N, cfg.selector)
                           .alpha;
      est[i] = a / gold_mean;  // evidence ratio Zhat/Z*
      wall[i] = now_ms() - t0;
    }
  };

  BayesReport report;
  report.config_json = cfg.to_json();
  report.gold = gold;
  report.rows = run_replicated(plan, cfg.replicates, 1.0, compute);
  return report;
}

std::string ExperimentReport::to_json() const {
  json obj;
  obj["config"] = parse_config_blob(config_json);
  obj["true_value"] = true_value;
  obj["rows"] = rows_to_json(rows);
  return obj.dump(2);
}

std::string BayesReport::to_json() const {
  json obj;
  obj["config"] = parse_config_blob(config_json);
  json g;
  g["log_z"] = gold.log_z;
  g["shift_c"] = gold.shift_c;
  g["rel_se"] = gold.rel_se;
  g["n_gold"] = static_cast<std::int64_t>(gold.n_gold);
  g["seed"] = gold.seed;
  obj["gold"] = g;
  obj["rows"] = rows_to_json(rows);
  return obj.dump(2);
}

void emit_report(const ExperimentReport& report, const std::string& format,
                 const std::string& prefix) {
  if (format == "csv")
    write_csv_pair(report.rows, report.true_value, prefix);
  else if (format == "json")
    write_json_file(report.to_json(), prefix);
  else
    throw ConfigError("unknown report format '" + format + "'");
}

void emit_report(const BayesReport& report, const std::string& format, const std::string& prefix) {
  if (format == "csv")
    write_csv_pair(report.rows, 1.0, prefix);
  else if (format == "json")
    write_json_file(report.to_json(), prefix);
  else
    throw ConfigError("unknown report format '" + format + "'");
}

}  // namespace cvmc
