#include "sdmd/models.hpp"

#include <cmath>
#include <numbers>

#include "sdmd/errors.hpp"
#include "sdmd/special.hpp"

namespace sdmd {

namespace {

constexpr double kPi = std::numbers::pi;

void require(bool ok, const char* msg) {
  if (!ok) throw InvalidArgument(msg);
}

void check_dim(const Vec& x, int dim, const char* who) {
  if (x.size() != dim) throw InvalidArgument(std::string(who) + ": wrong state dimension");
}

}  // namespace

Mat SdeModel::diff2(const Vec& x) const {
  if (diffusion_squared) return diffusion_squared(x);
  if (!diffusion) throw InvalidArgument("model '" + name + "' has no diffusion");
  Mat s = diffusion(x);
  return s * s.transpose();
}

SdeModel make_ou(double theta, double mu0, double sigma) {
  require(theta > 0, "ou: theta must be positive");
  require(sigma > 0, "ou: sigma must be positive");
  SdeModel m;
  m.name = "ou";
  m.dim = 1;
  m.noise_dim = 1;
  m.params = {{"theta", theta}, {"mu0", mu0}, {"sigma", sigma}};
  m.drift = [theta, mu0](const Vec& x) {
    check_dim(x, 1, "ou drift");
    Vec b(1);
    b(0) = theta * (mu0 - x(0));
    return b;
  };
  m.diffusion = [sigma](const Vec& x) {
    check_dim(x, 1, "ou diffusion");
    Mat s(1, 1);
    s(0, 0) = sigma;
    return s;
  };
  m.drift_jacobian = [theta](const Vec&) {
    Mat j(1, 1);
    j(0, 0) = -theta;
    return j;
  };
  m.drift_hessian = [](const Vec&) { return std::vector<Mat>{Mat::Zero(1, 1)}; };
  m.diffusion_squared = [sigma](const Vec&) {
    Mat a(1, 1);
    a(0, 0) = sigma * sigma;
    return a;
  };
  m.diff2_jacobian = [](const Vec&) { return std::vector<Mat>{Mat::Zero(1, 1)}; };
  m.diff2_hessian = [](const Vec&) {
    return std::vector<std::vector<Mat>>{{Mat::Zero(1, 1)}};
  };
  return m;
}

SdeModel make_stuart_landau_polar(double delta, double kappa, double eps, double gamma,
                                  double beta) {
  require(kappa > 0, "stuart-landau: kappa must be positive");
  require(delta > 0, "stuart-landau: delta must be positive");
  require(eps > 0, "stuart-landau: eps must be positive");
  SdeModel m;
  m.name = "stuart-landau-polar";
  m.dim = 2;
  m.noise_dim = 2;
  m.params = {{"delta", delta}, {"kappa", kappa}, {"eps", eps}, {"gamma", gamma},
              {"beta", beta}};
  auto need_r = [](const Vec& x) {
    check_dim(x, 2, "stuart-landau-polar");
    if (x(0) <= 0) throw DomainError("stuart-landau-polar: radius must be positive");
    return x(0);
  };
  m.drift = [=](const Vec& x) {
    double r = need_r(x);
    Vec b(2);
    b(0) = delta * r - kappa * r * r * r + eps * eps / (2.0 * r);
    b(1) = gamma - beta * r * r;
    return b;
  };
  m.diffusion = [=](const Vec& x) {
    double r = need_r(x);
    Mat s = Mat::Zero(2, 2);
    s(0, 0) = eps;
    s(1, 1) = eps / r;
    return s;
  };
  m.drift_jacobian = [=](const Vec& x) {
    double r = need_r(x);
    Mat j = Mat::Zero(2, 2);
    j(0, 0) = delta - 3.0 * kappa * r * r - eps * eps / (2.0 * r * r);
    j(1, 0) = -2.0 * beta * r;
    return j;
  };
  m.drift_hessian = [=](const Vec& x) {
    double r = need_r(x);
    std::vector<Mat> h(2, Mat::Zero(2, 2));
    h[0](0, 0) = -6.0 * kappa * r + eps * eps / (r * r * r);
    h[1](0, 0) = -2.0 * beta;
    return h;
  };
  m.diffusion_squared = [=](const Vec& x) {
    double r = need_r(x);
    Mat a = Mat::Zero(2, 2);
    a(0, 0) = eps * eps;
    a(1, 1) = eps * eps / (r * r);
    return a;
  };
  m.diff2_jacobian = [=](const Vec& x) {
    double r = need_r(x);
    std::vector<Mat> da(2, Mat::Zero(2, 2));
    da[0](1, 1) = -2.0 * eps * eps / (r * r * r);
    return da;
  };
  m.diff2_hessian = [=](const Vec& x) {
    double r = need_r(x);
    std::vector<std::vector<Mat>> d2a(2, std::vector<Mat>(2, Mat::Zero(2, 2)));
    d2a[0][0](1, 1) = 6.0 * eps * eps / (r * r * r * r);
    return d2a;
  };
  return m;
}

SdeModel make_stuart_landau_cartesian(double delta, double kappa, double eps, double gamma,
                                      double beta) {
  require(kappa > 0, "stuart-landau: kappa must be positive");
  require(delta > 0, "stuart-landau: delta must be positive");
  require(eps > 0, "stuart-landau: eps must be positive");
  SdeModel m;
  m.name = "stuart-landau-cartesian";
  m.dim = 2;
  m.noise_dim = 2;
  m.params = {{"delta", delta}, {"kappa", kappa}, {"eps", eps}, {"gamma", gamma},
              {"beta", beta}};
  m.drift = [=](const Vec& x) {
    check_dim(x, 2, "stuart-landau-cartesian");
    double s = x(0) * x(0) + x(1) * x(1);
    Vec b(2);
    b(0) = (delta - kappa * s) * x(0) - (gamma - beta * s) * x(1);
    b(1) = (gamma - beta * s) * x(0) + (delta - kappa * s) * x(1);
    return b;
  };
  m.diffusion = [=](const Vec&) {
    Mat s = Mat::Zero(2, 2);
    s(0, 0) = eps;
    s(1, 1) = eps;
    return s;
  };
  m.drift_jacobian = [=](const Vec& x) {
    double u = x(0), v = x(1);
    double s = u * u + v * v;
    Mat j(2, 2);
    j(0, 0) = (delta - kappa * s) - 2.0 * kappa * u * u + 2.0 * beta * u * v;
    j(0, 1) = -2.0 * kappa * u * v - (gamma - beta * s) + 2.0 * beta * v * v;
    j(1, 0) = (gamma - beta * s) - 2.0 * beta * u * u - 2.0 * kappa * u * v;
    j(1, 1) = -2.0 * beta * u * v + (delta - kappa * s) - 2.0 * kappa * v * v;
    return j;
  };
  m.drift_hessian = [=](const Vec& x) {
    double u = x(0), v = x(1);
    std::vector<Mat> h(2, Mat::Zero(2, 2));
    h[0](0, 0) = -6.0 * kappa * u + 2.0 * beta * v;
    h[0](0, 1) = h[0](1, 0) = -2.0 * kappa * v + 2.0 * beta * u;
    h[0](1, 1) = -2.0 * kappa * u + 6.0 * beta * v;
    h[1](0, 0) = -6.0 * beta * u - 2.0 * kappa * v;
    h[1](0, 1) = h[1](1, 0) = -2.0 * beta * v - 2.0 * kappa * u;
    h[1](1, 1) = -2.0 * beta * u - 6.0 * kappa * v;
    return h;
  };
  m.diffusion_squared = [=](const Vec&) {
    Mat a = Mat::Zero(2, 2);
    a(0, 0) = eps * eps;
    a(1, 1) = eps * eps;
    return a;
  };
  m.diff2_jacobian = [](const Vec&) { return std::vector<Mat>(2, Mat::Zero(2, 2)); };
  m.diff2_hessian = [](const Vec&) {
    return std::vector<std::vector<Mat>>(2, std::vector<Mat>(2, Mat::Zero(2, 2)));
  };
  return m;
}

namespace {

struct GaussianBump {
  double c, x0, y0;
};

constexpr GaussianBump kBumps[] = {
    {3.0, 0.0, 1.0 / 3.0},
    {-3.0, 0.0, 5.0 / 3.0},
    {-5.0, 1.0, 0.0},
    {-5.0, -1.0, 0.0},
};

}  // namespace

double triple_well_value(double x, double y) {
  double v = 0.2 * x * x * x * x + 0.2 * std::pow(y - 1.0 / 3.0, 4);
  for (const auto& g : kBumps) {
    double u = x - g.x0, w = y - g.y0;
    v += g.c * std::exp(-u * u - w * w);
  }
  return v;
}

Vec triple_well_gradient(double x, double y) {
  Vec grad(2);
  double w0 = y - 1.0 / 3.0;
  grad(0) = 0.8 * x * x * x;
  grad(1) = 0.8 * w0 * w0 * w0;
  for (const auto& g : kBumps) {
    double u = x - g.x0, w = y - g.y0;
    double f = g.c * std::exp(-u * u - w * w);
    grad(0) += -2.0 * u * f;
    grad(1) += -2.0 * w * f;
  }
  return grad;
}

Mat triple_well_hessian(double x, double y) {
  Mat h = Mat::Zero(2, 2);
  double w0 = y - 1.0 / 3.0;
  h(0, 0) = 2.4 * x * x;
  h(1, 1) = 2.4 * w0 * w0;
  for (const auto& g : kBumps) {
    double u = x - g.x0, w = y - g.y0;
    double f = g.c * std::exp(-u * u - w * w);
    h(0, 0) += (4.0 * u * u - 2.0) * f;
    h(1, 1) += (4.0 * w * w - 2.0) * f;
    h(0, 1) += 4.0 * u * w * f;
  }
  h(1, 0) = h(0, 1);
  return h;
}

std::vector<Mat> triple_well_third(double x, double y) {
  std::vector<Mat> t(2, Mat::Zero(2, 2));
  double w0 = y - 1.0 / 3.0;
  double vxxx = 4.8 * x, vyyy = 4.8 * w0, vxxy = 0.0, vxyy = 0.0;
  for (const auto& g : kBumps) {
    double u = x - g.x0, w = y - g.y0;
    double f = g.c * std::exp(-u * u - w * w);
    vxxx += (12.0 * u - 8.0 * u * u * u) * f;
    vyyy += (12.0 * w - 8.0 * w * w * w) * f;
    vxxy += (4.0 * w - 8.0 * u * u * w) * f;
    vxyy += (4.0 * u - 8.0 * w * w * u) * f;
  }
  t[0](0, 0) = vxxx;
  t[0](0, 1) = t[0](1, 0) = vxxy;
  t[0](1, 1) = vxyy;
  t[1](0, 0) = vxxy;
  t[1](0, 1) = t[1](1, 0) = vxyy;
  t[1](1, 1) = vyyy;
  return t;
}

SdeModel make_triple_well(double sigma) {
  require(sigma > 0, "triple-well: sigma must be positive");
  SdeModel m;
  m.name = "triple-well";
  m.dim = 2;
  m.noise_dim = 2;
  m.params = {{"sigma", sigma}};
  m.drift = [](const Vec& x) {
    check_dim(x, 2, "triple-well drift");
    return Vec(-triple_well_gradient(x(0), x(1)));
  };
  m.diffusion = [sigma](const Vec&) {
    Mat s = Mat::Zero(2, 2);
    s(0, 0) = sigma;
    s(1, 1) = sigma;
    return s;
  };
  m.drift_jacobian = [](const Vec& x) { return Mat(-triple_well_hessian(x(0), x(1))); };
  m.drift_hessian = [](const Vec& x) {
    auto t = triple_well_third(x(0), x(1));
    // b_i = -dV/dx_i, so Hess b_i = -t[i]
    std::vector<Mat> h(2);
    h[0] = -t[0];
    h[1] = -t[1];
    return h;
  };
  m.diffusion_squared = [sigma](const Vec&) {
    Mat a = Mat::Zero(2, 2);
    a(0, 0) = sigma * sigma;
    a(1, 1) = sigma * sigma;
    return a;
  };
  m.diff2_jacobian = [](const Vec&) { return std::vector<Mat>(2, Mat::Zero(2, 2)); };
  m.diff2_hessian = [](const Vec&) {
    return std::vector<std::vector<Mat>>(2, std::vector<Mat>(2, Mat::Zero(2, 2)));
  };
  return m;
}

SdeModel make_neural_mass(const NeuralMassParams& p) {
  require(p.Delta > 0, "neural-mass: Delta must be positive");
  require(p.sigma_r > 0 && p.sigma_v > 0, "neural-mass: noise levels must be positive");
  require(p.stay_prob > 0 && p.stay_prob < 1, "neural-mass: stay_prob must be in (0, 1)");
  SdeModel m;
  m.name = "neural-mass";
  m.dim = 2;
  m.noise_dim = 2;
  m.params = {{"Delta", p.Delta},       {"J", p.J},
              {"sigma_r", p.sigma_r},   {"sigma_v", p.sigma_v},
              {"input_low", p.input_low}, {"input_high", p.input_high},
              {"stay_prob", p.stay_prob}};
  m.input = MarkovInputSpec{p.input_low, p.input_high, p.stay_prob};
  m.drift_with_input = [p](const Vec& x, double input) {
    check_dim(x, 2, "neural-mass drift");
    double r = x(0), v = x(1);
    Vec b(2);
    b(0) = p.Delta / kPi + 2.0 * r * v;
    b(1) = v * v + p.J * r + input - kPi * kPi * r * r;
    return b;
  };
  m.diffusion = [p](const Vec&) {
    Mat s = Mat::Zero(2, 2);
    s(0, 0) = p.sigma_r;
    s(1, 1) = p.sigma_v;
    return s;
  };
  m.diffusion_squared = [p](const Vec&) {
    Mat a = Mat::Zero(2, 2);
    a(0, 0) = p.sigma_r * p.sigma_r;
    a(1, 1) = p.sigma_v * p.sigma_v;
    return a;
  };
  return m;
}

namespace {

double param(const SdeModel& m, const char* key) { return m.params.at(key).get<double>(); }

bool is_stuart_landau(const SdeModel& m) {
  return m.name == "stuart-landau-polar" || m.name == "stuart-landau-cartesian";
}

}  // namespace

std::vector<Cplx> analytic_generator_eigs(const SdeModel& model,
                                          const std::vector<ModeIndex>& modes) {
  std::vector<Cplx> out;
  out.reserve(modes.size());
  if (model.name == "ou") {
    double theta = param(model, "theta");
    for (const auto& mi : modes) {
      if (mi.n < 0 || mi.l != 0)
        throw InvalidArgument("ou spectrum: modes are indexed by n >= 0, l = 0");
      out.emplace_back(-theta * mi.n, 0.0);
    }
    return out;
  }
  if (is_stuart_landau(model)) {
    double delta = param(model, "delta");
    double kappa = param(model, "kappa");
    double eps = param(model, "eps");
    double gamma = param(model, "gamma");
    double beta = param(model, "beta");
    double r2 = delta / kappa;  // squared limit-cycle radius
    double omega = gamma - beta * r2;  // rotation frequency on the cycle
    for (const auto& mi : modes) {
      if (mi.l < 0) throw InvalidArgument("stuart-landau spectrum: l must be >= 0");
      double re = (mi.l == 0) ? -(double(mi.n) * mi.n * eps * eps) / (2.0 * r2)
                              : -2.0 * mi.l * delta;
      out.emplace_back(re, mi.n * omega);
    }
    return out;
  }
  throw NotAvailableError("no analytic spectrum for model '" + model.name + "'");
}

CVec analytic_eigenfunction_eval(const SdeModel& model, const ModeIndex& mode,
                                 const Mat& points) {
  if (points.cols() != model.dim)
    throw InvalidArgument("analytic_eigenfunction_eval: wrong point dimension");
  const Eigen::Index m = points.rows();
  CVec out(m);
  if (model.name == "ou") {
    if (mode.n < 0 || mode.l != 0)
      throw InvalidArgument("ou eigenfunctions: indexed by n >= 0, l = 0");
    double theta = param(model, "theta");
    double mu0 = param(model, "mu0");
    double sigma = param(model, "sigma");
    double scale = std::sqrt(sigma * sigma / (2.0 * theta));
    for (Eigen::Index i = 0; i < m; ++i)
      out(i) = hermite_h(mode.n, (points(i, 0) - mu0) / scale);
    return out;
  }
  if (is_stuart_landau(model)) {
    if (mode.l < 0) throw InvalidArgument("stuart-landau eigenfunctions: l must be >= 0");
    double delta = param(model, "delta");
    double kappa = param(model, "kappa");
    double eps = param(model, "eps");
    double beta = param(model, "beta");
    double R = std::sqrt(delta / kappa);
    double beta_tilde = beta / kappa;
    bool cartesian = model.name == "stuart-landau-cartesian";
    // Radial ladders carry the conventional 1/sqrt(2^|n| |n|!) normalization.
    double norm = (mode.l == 0)
                      ? 1.0
                      : 1.0 / std::sqrt(std::pow(2.0, std::abs(mode.n)) *
                                        factorial_d(std::abs(mode.n)));
    for (Eigen::Index i = 0; i < m; ++i) {
      double r, angle;
      if (cartesian) {
        r = std::hypot(points(i, 0), points(i, 1));
        angle = std::atan2(points(i, 1), points(i, 0));
      } else {
        r = points(i, 0);
        angle = points(i, 1);
      }
      if (r <= 0) throw DomainError("stuart-landau eigenfunctions: radius must be positive");
      double phase = mode.n * (angle - beta_tilde * std::log(r / R));
      Cplx val = std::polar(1.0, phase);
      if (mode.l > 0)
        val *= norm * hermite_h(mode.l, std::sqrt(2.0 * delta) * (r - R) / eps);
      out(i) = val;
    }
    return out;
  }
  throw NotAvailableError("no analytic eigenfunctions for model '" + model.name + "'");
}

}  // namespace sdmd
