#include <doctest.h>

#include <cmath>

#include "sdmd/coef.hpp"

using namespace sdmd;

namespace {

// Deterministic affine pairs y = (1 - dt) x: the per-cell affine fit must be
// exact and the residual diffusion zero.
SnapshotEnsemble affine_pairs(int m, double dt) {
  SnapshotEnsemble ens;
  ens.x.resize(m, 1);
  ens.y.resize(m, 1);
  for (int i = 0; i < m; ++i) {
    const double x = -2.0 + 4.0 * i / (m - 1);
    ens.x(i, 0) = x;
    ens.y(i, 0) = (1.0 - dt) * x;
  }
  ens.delta_t = dt;
  ens.substeps = 1;
  ens.model_name = "affine";
  return ens;
}

}  // namespace

TEST_CASE("noiseless affine data is recovered exactly") {
  const double dt = 0.05;
  CoefConfig cfg;
  cfg.bins_per_axis = 10;
  const CoefficientEstimate est = CoefficientEstimate::fit(affine_pairs(4000, dt), cfg);
  CHECK(est.dim() == 1);
  CHECK(est.delta_t() == dt);
  for (double x : {-1.7, -0.4, 0.0, 0.9, 1.8}) {
    bool extrapolated = true;
    const Vec b = est.drift(Vec::Constant(1, x), &extrapolated);
    CHECK(!extrapolated);
    CHECK(b(0) == doctest::Approx(-x).epsilon(1e-9));
    CHECK(est.diffusion(Vec::Constant(1, x))(0, 0) < 1e-9);
  }
}

TEST_CASE("ou coefficients are recovered within sampling error") {
  const SdeModel m = make_ou(1.0, 0.0, 0.1);
  SamplerSpec s;
  s.bounds = Mat{{-2.0, 2.0}};
  s.count = 20000;
  EvolveSpec ev;
  ev.delta_t = 0.01;
  ev.substeps = 10;
  const SnapshotEnsemble data = generate_ensemble(m, s, ev, 2);

  CoefConfig cfg;
  cfg.bins_per_axis = 10;
  const CoefficientEstimate est = CoefficientEstimate::fit(data, cfg);
  for (double x : {-1.2, -0.5, 0.3, 1.4}) {
    CHECK(est.drift(Vec::Constant(1, x))(0) == doctest::Approx(-x).epsilon(0.12));
    CHECK(est.diffusion(Vec::Constant(1, x))(0, 0) == doctest::Approx(0.1).epsilon(0.08));
  }
}

TEST_CASE("queries outside the data box are clamped and flagged") {
  const CoefficientEstimate est = CoefficientEstimate::fit(affine_pairs(1000, 0.05));
  bool extrapolated = false;
  const Vec inside = est.drift(Vec::Constant(1, 5.0), &extrapolated);
  CHECK(extrapolated);
  CHECK(inside(0) == doctest::Approx(-2.0).epsilon(0.02));  // clamp to the box edge
}

TEST_CASE("the estimate acts as a plug-in model") {
  const CoefficientEstimate est = CoefficientEstimate::fit(affine_pairs(1000, 0.05));
  const SdeModel m = est.as_model("fitted");
  CHECK(m.name == "fitted");
  CHECK(m.dim == 1);
  CHECK(m.drift(Vec::Constant(1, 0.5))(0) == doctest::Approx(-0.5).epsilon(1e-6));
  CHECK(!m.has_second_order_data());
}

TEST_CASE("coefficient json round-trip preserves predictions") {
  const CoefficientEstimate a = CoefficientEstimate::fit(affine_pairs(500, 0.02));
  const CoefficientEstimate b = CoefficientEstimate::from_json(a.to_json());
  for (double x : {-1.5, 0.0, 1.1}) {
    CHECK(a.drift(Vec::Constant(1, x))(0) == b.drift(Vec::Constant(1, x))(0));
    CHECK(a.diffusion(Vec::Constant(1, x))(0, 0) == b.diffusion(Vec::Constant(1, x))(0, 0));
  }
}

TEST_CASE("too little data is rejected") {
  SnapshotEnsemble ens;
  ens.x = Mat::Zero(1, 1);
  ens.y = Mat::Zero(1, 1);
  ens.delta_t = 0.1;
  CHECK_THROWS_AS(CoefficientEstimate::fit(ens), NumericalError);
}
