#include "sdmd/dictionary.hpp"

#include <cmath>
#include <numbers>

#include "sdmd/errors.hpp"
#include "sdmd/rng.hpp"
#include "sdmd/special.hpp"
#include "sdmd/threads.hpp"

namespace sdmd {

void Dictionary::check_point(const Vec& x) const {
  if (x.size() != dim_) throw InvalidArgument(family_ + ": wrong point dimension");
}

Cplx Dictionary::derivative(int, const Vec&, const std::vector<int>&) const {
  throw NotAvailableError(family_ + ": high-order derivatives not available");
}

CVec Dictionary::eval_via_derivative(const Vec& x) const {
  CVec out(n_);
  std::vector<int> alpha(dim_, 0);
  for (int j = 0; j < n_; ++j) out(j) = derivative(j, x, alpha);
  return out;
}

CMat Dictionary::jacobian_via_derivative(const Vec& x) const {
  CMat out(n_, dim_);
  std::vector<int> alpha(dim_, 0);
  for (int p = 0; p < dim_; ++p) {
    alpha[p] = 1;
    for (int j = 0; j < n_; ++j) out(j, p) = derivative(j, x, alpha);
    alpha[p] = 0;
  }
  return out;
}

CMat Dictionary::hessian_via_derivative(const Vec& x) const {
  CMat out(n_, dim_ * dim_);
  std::vector<int> alpha(dim_, 0);
  for (int p = 0; p < dim_; ++p)
    for (int q = p; q < dim_; ++q) {
      alpha[p] += 1;
      alpha[q] += 1;
      for (int j = 0; j < n_; ++j) {
        Cplx v = derivative(j, x, alpha);
        out(j, p * dim_ + q) = v;
        out(j, q * dim_ + p) = v;
      }
      alpha[p] = 0;
      alpha[q] = 0;
    }
  return out;
}

namespace {

int total_order(const std::vector<int>& alpha) {
  int t = 0;
  for (int a : alpha) {
    if (a < 0) throw InvalidArgument("derivative: negative order");
    t += a;
  }
  return t;
}

// ---------------------------------------------------------------------------

class MonomialDictionary final : public Dictionary {
 public:
  MonomialDictionary(int dim, int max_degree)
      : Dictionary("monomial", dim, 0), max_degree_(max_degree) {
    if (dim < 1) throw InvalidArgument("monomial: dim must be >= 1");
    if (max_degree < 0) throw InvalidArgument("monomial: max_degree must be >= 0");
    std::vector<int> e(dim, 0);
    for (int deg = 0; deg <= max_degree; ++deg) enumerate(e, 0, deg);
    n_ = static_cast<int>(exps_.size());
  }

  CVec eval(const Vec& x) const override { return eval_via_derivative(x); }
  CMat jacobian(const Vec& x) const override { return jacobian_via_derivative(x); }
  CMat hessian(const Vec& x) const override { return hessian_via_derivative(x); }
  bool has_fourth_order() const override { return true; }

  Cplx derivative(int j, const Vec& x, const std::vector<int>& alpha) const override {
    check_point(x);
    total_order(alpha);
    const auto& e = exps_[j];
    double v = 1.0;
    for (int ax = 0; ax < dim_; ++ax) {
      int p = e[ax], k = alpha[ax];
      if (k > p) return 0.0;
      double c = 1.0;
      for (int t = 0; t < k; ++t) c *= (p - t);
      v *= c * std::pow(x(ax), p - k);
    }
    return v;
  }

  json describe() const override {
    return {{"family", "monomial"}, {"dim", dim_}, {"max_degree", max_degree_}};
  }

 private:
  void enumerate(std::vector<int>& e, int ax, int remaining) {
    if (ax == dim_ - 1) {
      e[ax] = remaining;
      exps_.push_back(e);
      return;
    }
    for (int k = remaining; k >= 0; --k) {
      e[ax] = k;
      enumerate(e, ax + 1, remaining - k);
    }
    e[ax] = 0;
  }

  int max_degree_;
  std::vector<std::vector<int>> exps_;
};

// ---------------------------------------------------------------------------

class HermiteDictionary final : public Dictionary {
 public:
  HermiteDictionary(int max_order, double center, double scale)
      : Dictionary("hermite", 1, max_order + 1), center_(center), scale_(scale) {
    if (max_order < 0) throw InvalidArgument("hermite: max_order must be >= 0");
    if (!(scale > 0)) throw InvalidArgument("hermite: scale must be positive");
  }

  CVec eval(const Vec& x) const override { return eval_via_derivative(x); }
  CMat jacobian(const Vec& x) const override { return jacobian_via_derivative(x); }
  CMat hessian(const Vec& x) const override { return hessian_via_derivative(x); }
  bool has_fourth_order() const override { return true; }

  Cplx derivative(int j, const Vec& x, const std::vector<int>& alpha) const override {
    check_point(x);
    total_order(alpha);
    const int k = alpha[0];
    if (k > j) return 0.0;
    // d^k/dx^k H_j(u) = 2^k j! / (j-k)! H_{j-k}(u) / scale^k
    double c = 1.0;
    for (int t = 0; t < k; ++t) c *= 2.0 * (j - t) / scale_;
    return c * hermite_h(j - k, (x(0) - center_) / scale_);
  }

  json describe() const override {
    return {{"family", "hermite"}, {"max_order", n_ - 1}, {"center", center_},
            {"scale", scale_}};
  }

 private:
  double center_, scale_;
};

// ---------------------------------------------------------------------------

class FourierDictionary final : public Dictionary {
 public:
  FourierDictionary(int angular_max, int radial_max, double r_min, double r_max)
      : Dictionary("fourier", 2, (2 * angular_max + 1) * (2 * radial_max + 1)),
        a_max_(angular_max),
        k_max_(radial_max),
        r_min_(r_min),
        r_max_(r_max) {
    if (angular_max < 0 || radial_max < 0)
      throw InvalidArgument("fourier: mode cutoffs must be >= 0");
    if (!(r_max > r_min)) throw InvalidArgument("fourier: need r_max > r_min");
    omega_ = 2.0 * std::numbers::pi / (r_max - r_min);
  }

  CVec eval(const Vec& x) const override { return eval_via_derivative(x); }
  CMat jacobian(const Vec& x) const override { return jacobian_via_derivative(x); }
  CMat hessian(const Vec& x) const override { return hessian_via_derivative(x); }
  bool complex_valued() const override { return true; }

  Cplx derivative(int j, const Vec& x, const std::vector<int>& alpha) const override {
    check_point(x);
    total_order(alpha);
    const int n = j / (2 * k_max_ + 1) - a_max_;
    const int k = j % (2 * k_max_ + 1) - k_max_;
    const double wr = omega_ * k;
    const Cplx base = std::polar(1.0, wr * (x(0) - r_min_) + n * x(1));
    Cplx factor(1.0, 0.0);
    for (int t = 0; t < alpha[0]; ++t) factor *= Cplx(0.0, wr);
    for (int t = 0; t < alpha[1]; ++t) factor *= Cplx(0.0, double(n));
    return factor * base;
  }

  json describe() const override {
    return {{"family", "fourier"}, {"angular_max", a_max_}, {"radial_max", k_max_},
            {"r_min", r_min_}, {"r_max", r_max_}};
  }

 private:
  int a_max_, k_max_;
  double r_min_, r_max_, omega_;
};

// ---------------------------------------------------------------------------

class GaussianRbfDictionary final : public Dictionary {
 public:
  GaussianRbfDictionary(const Mat& centers, const Vec& widths)
      : Dictionary("gaussian-rbf", static_cast<int>(centers.cols()),
                   static_cast<int>(centers.rows())),
        centers_(centers),
        widths_(widths) {
    if (centers.rows() < 1) throw InvalidArgument("gaussian-rbf: need at least one center");
    if (widths.size() != centers.rows())
      throw InvalidArgument("gaussian-rbf: one width per center required");
    if ((widths.array() <= 0).any())
      throw InvalidArgument("gaussian-rbf: widths must be positive");
  }

  CVec eval(const Vec& x) const override { return eval_via_derivative(x); }
  CMat jacobian(const Vec& x) const override { return jacobian_via_derivative(x); }
  CMat hessian(const Vec& x) const override { return hessian_via_derivative(x); }
  bool has_fourth_order() const override { return true; }

  Cplx derivative(int j, const Vec& x, const std::vector<int>& alpha) const override {
    check_point(x);
    total_order(alpha);
    const double w = widths_(j);
    double v = 1.0;
    for (int ax = 0; ax < dim_; ++ax) {
      const double u = (x(ax) - centers_(j, ax)) / w;
      const int k = alpha[ax];
      // d^k/dt^k exp(-t^2 / (2 w^2)) = (-1/w)^k He_k(t/w) exp(-t^2 / (2 w^2))
      double f = std::exp(-0.5 * u * u) * hermite_he(k, u);
      if (k % 2) f = -f;
      for (int t = 0; t < k; ++t) f /= w;
      v *= f;
    }
    return v;
  }

  json describe() const override {
    json c = json::array();
    for (Eigen::Index i = 0; i < centers_.rows(); ++i) {
      json row = json::array();
      for (Eigen::Index ax = 0; ax < centers_.cols(); ++ax) row.push_back(centers_(i, ax));
      c.push_back(row);
    }
    json w = json::array();
    for (Eigen::Index i = 0; i < widths_.size(); ++i) w.push_back(widths_(i));
    return {{"family", "gaussian-rbf"}, {"centers", c}, {"widths", w}};
  }

 private:
  Mat centers_;
  Vec widths_;
};

}  // namespace

DictionaryPtr make_monomial(int dim, int max_degree) {
  return std::make_shared<MonomialDictionary>(dim, max_degree);
}

DictionaryPtr make_hermite(int max_order, double center, double scale) {
  return std::make_shared<HermiteDictionary>(max_order, center, scale);
}

DictionaryPtr make_fourier(int angular_max, int radial_max, double r_min, double r_max) {
  return std::make_shared<FourierDictionary>(angular_max, radial_max, r_min, r_max);
}

DictionaryPtr make_gaussian_rbf(const Mat& centers, const Vec& widths) {
  return std::make_shared<GaussianRbfDictionary>(centers, widths);
}

DictionaryPtr make_dictionary(const json& spec, int state_dim) {
  const std::string family = spec.value("family", "");
  if (family == "monomial") return make_monomial(state_dim, spec.at("max_degree").get<int>());
  if (family == "hermite") {
    if (state_dim != 1) throw ConfigError("hermite dictionary requires a 1D state");
    return make_hermite(spec.at("max_order").get<int>(), spec.value("center", 0.0),
                        spec.at("scale").get<double>());
  }
  if (family == "fourier") {
    if (state_dim != 2) throw ConfigError("fourier dictionary requires a 2D state");
    return make_fourier(spec.at("angular_max").get<int>(), spec.at("radial_max").get<int>(),
                        spec.at("r_min").get<double>(), spec.at("r_max").get<double>());
  }
  if (family == "gaussian-rbf") {
    const auto& jc = spec.at("centers");
    Mat centers(jc.size(), state_dim);
    for (std::size_t i = 0; i < jc.size(); ++i) {
      if (static_cast<int>(jc[i].size()) != state_dim)
        throw ConfigError("gaussian-rbf: center dimension mismatch");
      for (int ax = 0; ax < state_dim; ++ax) centers(i, ax) = jc[i][ax].get<double>();
    }
    Vec widths(jc.size());
    if (spec.at("widths").is_array()) {
      for (std::size_t i = 0; i < jc.size(); ++i) widths(i) = spec["widths"][i].get<double>();
    } else {
      widths.setConstant(spec.at("widths").get<double>());
    }
    return make_gaussian_rbf(centers, widths);
  }
  throw ConfigError("unknown dictionary family '" + family + "'");
}

CMat evaluate_dictionary(const Dictionary& dict, const Mat& X) {
  if (X.cols() != dict.dim()) throw InvalidArgument("evaluate_dictionary: wrong dimension");
  CMat out(X.rows(), dict.size());
  parallel_blocks(X.rows(), 256, [&](std::int64_t b, std::int64_t e, int) {
    for (std::int64_t i = b; i < e; ++i) out.row(i) = dict.eval(X.row(i).transpose()).transpose();
  });
  return out;
}

CVec generator_action(const Dictionary& dict, const SdeModel& model, const Vec& x) {
  if (dict.dim() != model.dim) throw InvalidArgument("generator_action: dimension mismatch");
  const int d = dict.dim();
  const Vec b = model.drift(x);
  const Mat a = model.diff2(x);
  const CMat jac = dict.jacobian(x);
  const CMat hess = dict.hessian(x);
  CVec out = jac * b.cast<Cplx>();
  for (int p = 0; p < d; ++p)
    for (int q = 0; q < d; ++q)
      if (a(p, q) != 0.0) out += 0.5 * a(p, q) * hess.col(p * d + q);
  return out;
}

CVec generator_action_deterministic(const Dictionary& dict, const SdeModel& model,
                                    const Vec& x) {
  if (dict.dim() != model.dim) throw InvalidArgument("generator_action: dimension mismatch");
  return dict.jacobian(x) * model.drift(x).cast<Cplx>();
}

CVec generator_action_second(const Dictionary& dict, const SdeModel& model, const Vec& x) {
  if (dict.dim() != model.dim) throw InvalidArgument("generator_action_second: dimension mismatch");
  if (!dict.has_fourth_order())
    throw NotAvailableError("generator_action_second: dictionary family '" + dict.family() +
                            "' lacks fourth-order derivatives");
  if (!model.has_second_order_data())
    throw NotAvailableError("generator_action_second: model '" + model.name +
                            "' lacks coefficient derivatives");
  const int d = dict.dim();
  const Vec b = model.drift(x);
  const Mat jb = model.drift_jacobian(x);
  const auto hb = model.drift_hessian(x);
  const Mat a = model.diff2(x);
  const auto ja = model.diff2_jacobian(x);
  const auto ha = model.diff2_hessian(x);

  CVec out(dict.size());
  std::vector<int> alpha(d, 0);
  auto deriv = [&](int j, std::initializer_list<int> axes) {
    std::fill(alpha.begin(), alpha.end(), 0);
    for (int ax : axes) alpha[ax] += 1;
    return dict.derivative(j, x, alpha);
  };

  for (int f = 0; f < dict.size(); ++f) {
    // Cache tensors of mixed partials up to order 4 for this basis function.
    std::vector<Cplx> d1(d), d2(d * d), d3(d * d * d), d4(d * d * d * d);
    for (int i = 0; i < d; ++i) {
      d1[i] = deriv(f, {i});
      for (int j = 0; j < d; ++j) {
        d2[i * d + j] = deriv(f, {i, j});
        for (int k = 0; k < d; ++k) {
          d3[(i * d + j) * d + k] = deriv(f, {i, j, k});
          for (int l = 0; l < d; ++l) d4[((i * d + j) * d + k) * d + l] = deriv(f, {i, j, k, l});
        }
      }
    }
    // g = A psi; assemble dg/dx_k and d2g/dx_k dx_l, then apply A to g.
    std::vector<Cplx> dg(d, Cplx(0)), d2g(d * d, Cplx(0));
    for (int k = 0; k < d; ++k) {
      Cplx s(0);
      for (int i = 0; i < d; ++i) {
        s += jb(i, k) * d1[i] + b(i) * d2[i * d + k];
        for (int j = 0; j < d; ++j)
          s += 0.5 * (ja[k](i, j) * d2[i * d + j] + a(i, j) * d3[(i * d + j) * d + k]);
      }
      dg[k] = s;
      for (int l = 0; l < d; ++l) {
        Cplx t(0);
        for (int i = 0; i < d; ++i) {
          t += hb[i](k, l) * d1[i] + jb(i, k) * d2[i * d + l] + jb(i, l) * d2[i * d + k] +
               b(i) * d3[(i * d + k) * d + l];
          for (int j = 0; j < d; ++j)
            t += 0.5 * (ha[k][l](i, j) * d2[i * d + j] + ja[k](i, j) * d3[(i * d + j) * d + l] +
                        ja[l](i, j) * d3[(i * d + j) * d + k] +
                        a(i, j) * d4[((i * d + j) * d + k) * d + l]);
        }
        d2g[k * d + l] = t;
      }
    }
    Cplx val(0);
    for (int k = 0; k < d; ++k) {
      val += b(k) * dg[k];
      for (int l = 0; l < d; ++l) val += 0.5 * a(k, l) * d2g[k * d + l];
    }
    out(f) = val;
  }
  return out;
}

namespace {

CMat rows_of(const Dictionary& dict, const Mat& X,
             const std::function<CVec(const Vec&)>& fn) {
  CMat out(X.rows(), dict.size());
  parallel_blocks(X.rows(), 256, [&](std::int64_t b, std::int64_t e, int) {
    for (std::int64_t i = b; i < e; ++i) out.row(i) = fn(X.row(i).transpose()).transpose();
  });
  return out;
}

}  // namespace

CMat generator_matrix(const Dictionary& dict, const SdeModel& model, const Mat& X) {
  return rows_of(dict, X, [&](const Vec& x) { return generator_action(dict, model, x); });
}

CMat generator_matrix_deterministic(const Dictionary& dict, const SdeModel& model,
                                    const Mat& X) {
  return rows_of(dict, X,
                 [&](const Vec& x) { return generator_action_deterministic(dict, model, x); });
}

CMat generator_matrix_second(const Dictionary& dict, const SdeModel& model, const Mat& X) {
  return rows_of(dict, X, [&](const Vec& x) { return generator_action_second(dict, model, x); });
}

double min_gram_eigenvalue(const Dictionary& dict, const Mat& bounds, std::uint64_t seed) {
  if (bounds.rows() != dict.dim() || bounds.cols() != 2)
    throw InvalidArgument("min_gram_eigenvalue: bounds must be dim x 2");
  const std::int64_t m = 10LL * dict.size();
  Rng rng(derive_seed(seed, 0x4772616Du));
  Mat X(m, dict.dim());
  for (std::int64_t i = 0; i < m; ++i)
    for (int ax = 0; ax < dict.dim(); ++ax)
      X(i, ax) = bounds(ax, 0) + (bounds(ax, 1) - bounds(ax, 0)) * rng.uniform();
  const CMat psi = evaluate_dictionary(dict, X);
  const CMat g = hermitize((psi.adjoint() * psi) / double(m));
  Eigen::SelfAdjointEigenSolver<CMat> es(g);
  return es.eigenvalues().minCoeff();
}

}  // namespace sdmd
