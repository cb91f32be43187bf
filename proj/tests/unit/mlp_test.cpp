#include <doctest.h>

#include <cmath>
#include <vector>

#include "sdmd/dictlearn.hpp"
#include "sdmd/mlp.hpp"
#include "sdmd/rng.hpp"

using namespace sdmd;

namespace {

Mlp small_net(std::uint64_t seed) {
  MlpSpec spec;
  spec.in_dim = 2;
  spec.hidden = {5, 4};
  spec.out_dim = 3;
  Mlp net(spec);
  Rng rng(seed);
  net.init_uniform(rng);
  return net;
}

// Scalar probe loss mixing the output values with the first- and second-order
// input derivatives: L = <W0, y> + sum_p <W1p, dy/dx_p> + sum_pq <W2pq, d2y>.
// Its gradient with respect to the parameters exercises every backward path.
struct ProbeLoss {
  Mat w0;
  std::vector<Mat> w1;
  std::vector<Mat> w2;

  ProbeLoss(int m, int out, int d, std::uint64_t seed) {
    Rng rng(seed);
    const auto fill = [&](Mat& a) {
      a.resize(m, out);
      for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = 2.0 * rng.uniform() - 1.0;
    };
    fill(w0);
    w1.resize(d);
    for (auto& a : w1) fill(a);
    w2.assign(d * d, Mat());
    for (int p = 0; p < d; ++p)
      for (int q = 0; q <= p; ++q) {
        fill(w2[p * d + q]);
        w2[q * d + p] = w2[p * d + q];  // symmetric seeds
      }
  }

  double eval(const Mlp& net, const Mat& x) const {
    const int d = static_cast<int>(x.cols());
    const MlpForward f = net.forward(x, 2);
    double loss = (w0.array() * f.value().array()).sum();
    for (int p = 0; p < d; ++p) loss += (w1[p].array() * f.dvalue(p).array()).sum();
    for (int p = 0; p < d; ++p)
      for (int q = 0; q < d; ++q)
        loss += (w2[p * d + q].array() * f.d2value(p, q, d).array()).sum();
    return loss;
  }
};

}  // namespace

TEST_CASE("forward input derivatives match finite differences") {
  const Mlp net = small_net(3);
  Mat x(4, 2);
  x << 0.2, -0.5, 1.1, 0.4, -0.8, -0.1, 0.0, 0.9;
  const MlpForward f = net.forward(x, 2);
  const double h = 1e-6;
  for (int p = 0; p < 2; ++p) {
    Mat xp = x, xm = x;
    xp.col(p).array() += h;
    xm.col(p).array() -= h;
    const Mat fd = (net.forward(xp, 0).value() - net.forward(xm, 0).value()) / (2 * h);
    CHECK((f.dvalue(p) - fd).cwiseAbs().maxCoeff() < 1e-8);
    for (int q = 0; q < 2; ++q) {
      const Mat fd2 = (net.forward(xp, 1).dvalue(q) - net.forward(xm, 1).dvalue(q)) / (2 * h);
      CHECK((f.d2value(p, q, 2) - fd2).cwiseAbs().maxCoeff() < 1e-6);
    }
  }
}

TEST_CASE("backward parameter gradient matches finite differences of the probe loss") {
  Mlp net = small_net(7);
  Mat x(6, 2);
  x << 0.3, -0.4, 1.0, 0.2, -0.7, 0.8, 0.1, -1.1, 0.5, 0.5, -0.2, 0.0;
  const ProbeLoss probe(6, 3, 2, 11);

  const MlpForward f = net.forward(x, 2);
  const MlpGrad g = net.backward(f, &probe.w0, &probe.w1, &probe.w2);

  Vec flat_g(net.param_count());
  {
    Eigen::Index at = 0;
    for (std::size_t l = 0; l < g.w.size(); ++l) {
      for (Eigen::Index i = 0; i < g.w[l].rows(); ++i)
        for (Eigen::Index j = 0; j < g.w[l].cols(); ++j) flat_g(at++) = g.w[l](i, j);
      for (Eigen::Index i = 0; i < g.b[l].size(); ++i) flat_g(at++) = g.b[l](i);
    }
    REQUIRE(at == net.param_count());
  }

  const Vec theta0 = net.flatten();
  Vec fd(net.param_count());
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < theta0.size(); ++i) {
    Vec tp = theta0, tm = theta0;
    tp(i) += h;
    tm(i) -= h;
    net.set_flat(tp);
    const double lp = probe.eval(net, x);
    net.set_flat(tm);
    const double lm = probe.eval(net, x);
    fd(i) = (lp - lm) / (2 * h);
  }
  net.set_flat(theta0);
  CHECK((flat_g - fd).norm() / fd.norm() < 1e-6);
}

TEST_CASE("flatten layout matches the gradient layout through step") {
  Mlp net = small_net(5);
  const Vec before = net.flatten();
  MlpGrad g = net.zero_grad();
  for (auto& w : g.w) w.setConstant(1.0);
  for (auto& b : g.b) b.setConstant(2.0);
  net.step(0.5, g);
  const Vec after = net.flatten();
  // every weight drops by 0.5, every bias by 1.0; flatten interleaves per layer
  int weights_seen = 0, biases_seen = 0;
  for (Eigen::Index i = 0; i < before.size(); ++i) {
    const double delta = before(i) - after(i);
    if (std::abs(delta - 0.5) < 1e-15) ++weights_seen;
    if (std::abs(delta - 1.0) < 1e-15) ++biases_seen;
  }
  CHECK(weights_seen == 2 * 5 + 5 * 4 + 4 * 3);
  CHECK(biases_seen == 5 + 4 + 3);
}

TEST_CASE("json round-trip preserves the parameters") {
  const Mlp a = small_net(9);
  const Mlp b = Mlp::from_json(a.to_json());
  CHECK(b.spec().in_dim == 2);
  CHECK(b.spec().hidden == std::vector<int>{5, 4});
  CHECK((a.flatten() - b.flatten()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("uniform init respects the fan-in bound and the input rescale") {
  MlpSpec spec;
  spec.in_dim = 2;
  spec.hidden = {30};
  spec.out_dim = 4;
  Mlp net(spec);
  Rng rng(13);
  const Vec x_scale = (Vec(2) << 0.05, 2.0).finished();
  net.init_uniform(rng, x_scale);

  const double lim0 = 1.0 / std::sqrt(2.0);
  CHECK(net.weights()[0].row(0).cwiseAbs().maxCoeff() <= lim0 / 0.05 + 1e-12);
  CHECK(net.weights()[0].row(0).cwiseAbs().maxCoeff() > lim0);  // rescale actually applied
  CHECK(net.weights()[0].row(1).cwiseAbs().maxCoeff() <= lim0 / 2.0 + 1e-12);
  CHECK(net.biases()[0].cwiseAbs().maxCoeff() <= lim0 + 1e-12);
  const double lim1 = 1.0 / std::sqrt(30.0);
  CHECK(net.weights()[1].cwiseAbs().maxCoeff() <= lim1 + 1e-12);
}

TEST_CASE("network dictionary appends identity and constant observables") {
  MlpSpec spec;
  spec.in_dim = 2;
  spec.hidden = {6};
  spec.out_dim = 4;
  Mlp net(spec);
  Rng rng(21);
  net.init_uniform(rng);
  const NetworkDictionary d(net);

  CHECK(d.size() == 4 + 2 + 1);
  CHECK(d.n_learned() == 4);
  const Vec x = (Vec(2) << 0.3, -0.7).finished();
  const CVec v = d.eval(x);
  CHECK(v(4) == Cplx(0.3));
  CHECK(v(5) == Cplx(-0.7));
  CHECK(v(6) == Cplx(1.0));

  Mat pts(3, 2);
  pts << 0.3, -0.7, 1.0, 0.1, -0.4, 0.6;
  const Mat batch = d.batch_values(pts);
  for (int i = 0; i < 3; ++i) {
    const CVec vi = d.eval(pts.row(i).transpose());
    for (int j = 0; j < d.size(); ++j) CHECK(batch(i, j) == vi(j).real());
  }

  // derivative consistency against the network forward caches
  const MlpForward f = net.forward(pts.topRows(1), 2);
  const CMat jac = d.jacobian(pts.row(0).transpose());
  for (int j = 0; j < 4; ++j)
    for (int p = 0; p < 2; ++p) CHECK(jac(j, p).real() == doctest::Approx(f.dvalue(p)(0, j)));
  CHECK(jac(4, 0).real() == 1.0);
  CHECK(jac(4, 1).real() == 0.0);
  CHECK(jac(6, 0).real() == 0.0);
  const CMat hes = d.hessian(pts.row(0).transpose());
  for (int j = 4; j < 7; ++j)
    for (int c = 0; c < 4; ++c) CHECK(hes(j, c) == Cplx(0.0));
}
