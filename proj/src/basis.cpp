#include "cvmc/basis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace cvmc {

namespace {
void check_point(int j, double x) {
  if (j < 0) throw std::invalid_argument("basis: negative degree");
  if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument("basis: point outside [0,1]");
}
}  // namespace

double legendre_eval(int j, double x) {
  check_point(j, x);
  const double t = 2.0 * x - 1.0;
  if (j == 0) return 1.0;
  double prev = 1.0;
  double cur = t;
  for (int l = 1; l < j; ++l) {
    double next = ((2.0 * l + 1.0) * t * cur - l * prev) / (l + 1.0);
    prev = cur;
    cur = next;
  }
  return cur;
}

void legendre_all(int k, double x, double* out) {
  check_point(k, x);
  const double t = 2.0 * x - 1.0;
  out[0] = 1.0;
  if (k == 0) return;
  out[1] = t;
  for (int l = 1; l < k; ++l)
    out[l + 1] = ((2.0 * l + 1.0) * t * out[l] - l * out[l - 1]) / (l + 1.0);
}

double fourier_eval(int j, double x) {
  check_point(j, x);
  if (j < 1) throw std::invalid_argument("fourier_eval: j >= 1");
  const double root2 = std::sqrt(2.0);
  if (j % 2 == 1) return root2 * std::cos((j + 1) * M_PI * x);
  return root2 * std::sin(j * M_PI * x);
}

std::vector<MultiIndex> enumerate_indices(int d, int k, int deg, int max_active,
                                          std::size_t cap) {
  if (d < 1 || k < 1 || deg < 1) throw std::invalid_argument("enumerate_indices: d,k,deg >= 1");
  std::vector<MultiIndex> out;
  std::vector<int> cur(static_cast<std::size_t>(d), 0);

  // Depth-first over coordinates with degree and activity budgets; prunes the
  // whole subtree when either budget is exhausted.
  auto rec = [&](auto&& self, int pos, int rem_deg, int active) -> void {
    if (pos == d) {
      int total = deg - rem_deg;
      if (total > 0) {
        if (out.size() >= cap) throw std::length_error("enumerate_indices: index cap exceeded");
        out.push_back({cur, total});
      }
      return;
    }
    int top = std::min(k, rem_deg);
    for (int v = 0; v <= top; ++v) {
      if (v > 0 && max_active >= 0 && active + 1 > max_active) break;
      cur[static_cast<std::size_t>(pos)] = v;
      self(self, pos + 1, rem_deg - v, active + (v > 0 ? 1 : 0));
    }
    cur[static_cast<std::size_t>(pos)] = 0;
  };
  rec(rec, 0, deg, 0);

  std::sort(out.begin(), out.end(), [](const MultiIndex& a, const MultiIndex& b) {
    if (a.total_degree != b.total_degree) return a.total_degree < b.total_degree;
    return a.degrees < b.degrees;
  });
  return out;
}

BasisSpec make_basis(BasisFamily family, int d, int k, int deg, int max_active) {
  if (family == BasisFamily::Fourier && d != 1)
    throw std::invalid_argument("make_basis: the trigonometric family is univariate");
  BasisSpec spec;
  spec.family = family;
  spec.d = d;
  spec.k = k;
  spec.deg = deg;
  spec.max_active = max_active;
  spec.indices = enumerate_indices(d, k, deg, max_active);
  return spec;
}

double eval_control(const BasisSpec& spec, const MultiIndex& idx, const double* x) {
  double prod = 1.0;
  for (int c = 0; c < spec.d; ++c) {
    int l = idx.degrees[static_cast<std::size_t>(c)];
    if (l == 0) continue;
    prod *= spec.family == BasisFamily::LegendreShifted ? legendre_eval(l, x[c])
                                                        : fourier_eval(l, x[c]);
  }
  return prod;
}

Eigen::MatrixXd build_design(const BasisSpec& spec,
                             const Eigen::Ref<const Eigen::MatrixXd>& points) {
  if (points.cols() != spec.d) throw std::invalid_argument("build_design: dimension mismatch");
  const Eigen::Index n = points.rows();
  const Eigen::Index m = spec.m();
  Eigen::MatrixXd h(n, m);

  if (spec.family == BasisFamily::Fourier) {
    for (Eigen::Index j = 0; j < m; ++j) {
      int l = spec.indices[static_cast<std::size_t>(j)].degrees[0];
      for (Eigen::Index i = 0; i < n; ++i) h(i, j) = fourier_eval(l, points(i, 0));
    }
    return h;
  }

  // Tabulate every univariate polynomial once per coordinate, then assemble
  // each column as a product over its index's active coordinates.
  std::vector<Eigen::MatrixXd> tab(static_cast<std::size_t>(spec.d));
  std::vector<double> row(static_cast<std::size_t>(spec.k) + 1);
  for (int c = 0; c < spec.d; ++c) {
    tab[static_cast<std::size_t>(c)].resize(n, spec.k + 1);
    for (Eigen::Index i = 0; i < n; ++i) {
      legendre_all(spec.k, points(i, c), row.data());
      for (int l = 0; l <= spec.k; ++l) tab[static_cast<std::size_t>(c)](i, l) = row[static_cast<std::size_t>(l)];
    }
  }

  std::vector<std::vector<std::pair<int, int>>> active(static_cast<std::size_t>(m));
  for (Eigen::Index j = 0; j < m; ++j)
    for (int c = 0; c < spec.d; ++c) {
      int l = spec.indices[static_cast<std::size_t>(j)].degrees[static_cast<std::size_t>(c)];
      if (l > 0) active[static_cast<std::size_t>(j)].push_back({c, l});
    }

  for (Eigen::Index j = 0; j < m; ++j) {
    const auto& pairs = active[static_cast<std::size_t>(j)];
    auto col = h.col(j);
    col = tab[static_cast<std::size_t>(pairs[0].first)].col(pairs[0].second);
    for (std::size_t p = 1; p < pairs.size(); ++p)
      col.array() *= tab[static_cast<std::size_t>(pairs[p].first)].col(pairs[p].second).array();
  }
  return h;
}

BasisDiagnostics diagnostics(const BasisSpec& spec) {
  BasisDiagnostics diag;
  const Eigen::Index m = spec.m();
  diag.gram_diagonal.resize(m);
  if (spec.family == BasisFamily::Fourier) {
    diag.gram_diagonal.setOnes();
    diag.gamma = 1.0;
    diag.u_h = std::sqrt(2.0);
    diag.b_bound = 2.0 * static_cast<double>(m);
    return diag;
  }
  double b = 0.0;
  for (Eigen::Index j = 0; j < m; ++j) {
    double inv = 1.0;  // product of (2 l_c + 1) over the index
    for (int l : spec.indices[static_cast<std::size_t>(j)].degrees)
      if (l > 0) inv *= 2.0 * l + 1.0;
    diag.gram_diagonal(j) = 1.0 / inv;
    b += inv;
  }
  diag.gamma = diag.gram_diagonal.minCoeff();
  diag.u_h = 1.0;
  diag.b_bound = b;
  return diag;
}

std::string to_json(const BasisSpec& spec) {
  nlohmann::json j;
  j["family"] = spec.family == BasisFamily::LegendreShifted ? "legendre" : "fourier";
  j["d"] = spec.d;
  j["k"] = spec.k;
  j["deg"] = spec.deg;
  j["max_active"] = spec.max_active;
  return j.dump();
}

BasisSpec basis_from_json(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  auto family = j.at("family").get<std::string>();
  if (family != "legendre" && family != "fourier")
    throw std::invalid_argument("basis_from_json: unknown family");
  return make_basis(family == "legendre" ? BasisFamily::LegendreShifted : BasisFamily::Fourier,
                    j.at("d").get<int>(), j.at("k").get<int>(), j.at("deg").get<int>(),
                    j.value("max_active", -1));
}

}  // namespace cvmc
