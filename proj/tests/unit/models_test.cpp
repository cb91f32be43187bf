#include <doctest.h>

#include <cmath>
#include <complex>

#include "sdmd/models.hpp"

using namespace sdmd;

namespace {

// Central differences of the potential, oracle for the exported derivatives.
double fd1(double (*f)(double, double), double x, double y, int axis) {
  const double h = 1e-5;
  return axis == 0 ? (f(x + h, y) - f(x - h, y)) / (2 * h)
                   : (f(x, y + h) - f(x, y - h)) / (2 * h);
}

}  // namespace

TEST_CASE("triple-well gradient and hessian match finite differences of the potential") {
  const double pts[][2] = {{0.0, 0.0}, {1.0, 0.1}, {-1.2, 0.7}, {0.3, 1.5}, {-0.4, -0.6}};
  for (const auto& p : pts) {
    const double x = p[0], y = p[1];
    const Vec g = triple_well_gradient(x, y);
    CHECK(g(0) == doctest::Approx(fd1(&triple_well_value, x, y, 0)).epsilon(1e-6));
    CHECK(g(1) == doctest::Approx(fd1(&triple_well_value, x, y, 1)).epsilon(1e-6));

    const Mat h = triple_well_hessian(x, y);
    const double d = 1e-5;
    const Vec gxp = triple_well_gradient(x + d, y), gxm = triple_well_gradient(x - d, y);
    const Vec gyp = triple_well_gradient(x, y + d), gym = triple_well_gradient(x, y - d);
    CHECK(h(0, 0) == doctest::Approx((gxp(0) - gxm(0)) / (2 * d)).epsilon(1e-6));
    CHECK(h(0, 1) == doctest::Approx((gyp(0) - gym(0)) / (2 * d)).epsilon(1e-6));
    CHECK(h(1, 0) == h(0, 1));
    CHECK(h(1, 1) == doctest::Approx((gyp(1) - gym(1)) / (2 * d)).epsilon(1e-6));

    const auto third = triple_well_third(x, y);
    REQUIRE(third.size() == 2);
    const Mat hxp = triple_well_hessian(x + d, y), hxm = triple_well_hessian(x - d, y);
    const Mat hyp = triple_well_hessian(x, y + d), hym = triple_well_hessian(x, y - d);
    CHECK((third[0] - (hxp - hxm) / (2 * d)).cwiseAbs().maxCoeff() < 1e-5);
    CHECK((third[1] - (hyp - hym) / (2 * d)).cwiseAbs().maxCoeff() < 1e-5);
  }
}

TEST_CASE("triple-well drift is the negated gradient with isotropic noise") {
  const SdeModel m = make_triple_well(1.09);
  const Vec x = (Vec(2) << 0.4, -0.3).finished();
  CHECK((m.drift(x) + triple_well_gradient(x(0), x(1))).cwiseAbs().maxCoeff() < 1e-14);
  const Mat s = m.diffusion(x);
  CHECK(s(0, 0) == 1.09);
  CHECK(s(1, 1) == 1.09);
  CHECK(s(0, 1) == 0.0);
}

TEST_CASE("ou drift, diffusion and derivative bundles") {
  const SdeModel m = make_ou(1.3, 0.2, 0.1);
  const Vec x = Vec::Constant(1, 0.7);
  CHECK(m.drift(x)(0) == doctest::Approx(1.3 * (0.2 - 0.7)).epsilon(1e-15));
  CHECK(m.diffusion(x)(0, 0) == 0.1);
  CHECK(m.drift_jacobian(x)(0, 0) == doctest::Approx(-1.3));
  CHECK(m.diff2(x)(0, 0) == doctest::Approx(0.01));
  CHECK(m.has_second_order_data());
}

// Change of variables r = |X|, angle = atan2(y, x) by Ito's formula:
//   b_r     = (x b_x + y b_y) / r + eps^2 / (2 r)
//   b_angle = (x b_y - y b_x) / r^2
// and the squared diffusion transforms as J (eps^2 I) J^T = diag(eps^2, eps^2/r^2).
// The polar model must be exactly this transform of the Cartesian one.
TEST_CASE("stuart-landau polar form is the Ito transform of the cartesian form") {
  const double delta = 0.25, kappa = 1.0, eps = 0.05, gamma = 1.0, beta = 1.0;
  const SdeModel polar = make_stuart_landau_polar(delta, kappa, eps, gamma, beta);
  const SdeModel cart = make_stuart_landau_cartesian(delta, kappa, eps, gamma, beta);

  const double rs[] = {0.3, 0.5, 0.8};
  const double angles[] = {-2.0, 0.0, 1.3};
  for (double r : rs)
    for (double a : angles) {
      const Vec xp = (Vec(2) << r, a).finished();
      const Vec xc = (Vec(2) << r * std::cos(a), r * std::sin(a)).finished();
      const Vec bp = polar.drift(xp);
      const Vec bc = cart.drift(xc);

      const double br = (xc(0) * bc(0) + xc(1) * bc(1)) / r + eps * eps / (2 * r);
      const double ba = (xc(0) * bc(1) - xc(1) * bc(0)) / (r * r);
      CHECK(bp(0) == doctest::Approx(br).epsilon(1e-12));
      CHECK(bp(1) == doctest::Approx(ba).epsilon(1e-12));

      const Mat sp = polar.diffusion(xp);
      CHECK(sp(0, 0) == doctest::Approx(eps).epsilon(1e-14));
      CHECK(sp(1, 1) == doctest::Approx(eps / r).epsilon(1e-14));
      const Mat sc = cart.diffusion(xc);
      CHECK((sc - eps * Mat::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("neural-mass drift follows the firing-rate equations") {
  NeuralMassParams p;
  const SdeModel m = make_neural_mass(p);
  REQUIRE(m.has_input());
  const Vec x = (Vec(2) << 0.5, -1.2).finished();
  const double input = -4.0;
  const Vec b = m.drift_with_input(x, input);
  const double pi = std::numbers::pi;
  CHECK(b(0) == doctest::Approx(p.Delta / pi + 2 * 0.5 * -1.2).epsilon(1e-14));
  CHECK(b(1) ==
        doctest::Approx(1.2 * 1.2 + p.J * 0.5 + input - pi * pi * 0.5 * 0.5).epsilon(1e-14));
  const Mat s = m.diffusion(x);
  CHECK(s(0, 0) == p.sigma_r);
  CHECK(s(1, 1) == p.sigma_v);
}

TEST_CASE("ou analytic eigenvalues are the integer ladder") {
  const SdeModel m = make_ou(1.7, 0.0, 0.1);
  const auto eigs = analytic_generator_eigs(m, {{0, 0}, {0, 1}, {0, 4}});
  CHECK(eigs[0] == Cplx(0.0, 0.0));
  CHECK(eigs[1].real() == doctest::Approx(-1.7).epsilon(1e-15));
  CHECK(eigs[1].imag() == 0.0);
  CHECK(eigs[2].real() == doctest::Approx(-6.8).epsilon(1e-15));
}

TEST_CASE("stuart-landau l=0 ladder has the phase-diffusion decay and rotation rates") {
  const double delta = 0.25, kappa = 1.0, eps = 0.05, gamma = 1.0, beta = 1.0;
  const SdeModel m = make_stuart_landau_polar(delta, kappa, eps, gamma, beta);
  const double r2 = delta / kappa;  // limit-cycle radius squared
  const double omega = gamma - beta * r2;
  for (int n = -3; n <= 3; ++n) {
    const auto e = analytic_generator_eigs(m, {{0, n}});
    CHECK(e[0].real() == doctest::Approx(-n * n * eps * eps / (2 * r2)).epsilon(1e-12));
    CHECK(e[0].imag() == doctest::Approx(n * omega).epsilon(1e-12));
  }
}

TEST_CASE("ou analytic eigenfunctions are hermite polynomials in the rescaled state") {
  const double theta = 1.0, sigma = 0.1;
  const SdeModel m = make_ou(theta, 0.0, sigma);
  Mat pts(5, 1);
  pts << -0.21, -0.05, 0.02, 0.11, 0.19;
  const double alpha = std::sqrt(theta) / sigma;
  // H_2(z) = 4 z^2 - 2 and H_3(z) = 8 z^3 - 12 z, up to one common scale factor
  const CVec f2 = analytic_eigenfunction_eval(m, {0, 2}, pts);
  const CVec f3 = analytic_eigenfunction_eval(m, {0, 3}, pts);
  const auto h2 = [&](double x) { const double z = alpha * x; return 4 * z * z - 2; };
  const auto h3 = [&](double x) { const double z = alpha * x; return 8 * z * z * z - 12 * z; };
  const Cplx c2 = f2(0) / h2(pts(0, 0));
  const Cplx c3 = f3(0) / h3(pts(0, 0));
  for (int i = 0; i < pts.rows(); ++i) {
    CHECK(std::abs(f2(i) - c2 * h2(pts(i, 0))) < 1e-10 * std::abs(c2));
    CHECK(std::abs(f3(i) - c3 * h3(pts(i, 0))) < 1e-10 * std::abs(c3));
  }
}
