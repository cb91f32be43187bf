#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "sdmd/rng.hpp"
#include "sdmd/simulate.hpp"

using namespace sdmd;
namespace fs = std::filesystem;

TEST_CASE("grid initial states iterate the last axis fastest") {
  SamplerSpec s;
  s.kind = SamplerSpec::Kind::UniformGrid;
  s.bounds = Mat{{0.0, 1.0}, {0.0, 2.0}};
  s.grid_counts = {2, 3};
  const Mat x = initial_states(s, 1);
  REQUIRE(x.rows() == 6);
  Mat expect(6, 2);
  expect << 0, 0, 0, 1, 0, 2, 1, 0, 1, 1, 1, 2;
  CHECK((x - expect).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("a single-count grid axis degenerates to one point") {
  SamplerSpec s;
  s.kind = SamplerSpec::Kind::UniformGrid;
  s.bounds = Mat{{1.0, 1.0}, {-1.0, -1.0}};
  s.grid_counts = {1, 1};
  const Mat x = initial_states(s, 9);
  REQUIRE(x.rows() == 1);
  CHECK(x(0, 0) == 1.0);
  CHECK(x(0, 1) == -1.0);
}

TEST_CASE("inverted bounds are rejected") {
  SamplerSpec s;
  s.bounds = Mat{{1.0, -1.0}};
  s.count = 5;
  CHECK_THROWS_AS(initial_states(s, 1), InvalidArgument);
}

TEST_CASE("random initial states respect bounds and the seed") {
  SamplerSpec s;
  s.bounds = Mat{{-2.0, 2.0}, {0.0, 1.0}};
  s.count = 500;
  const Mat a = initial_states(s, 3), b = initial_states(s, 3), c = initial_states(s, 4);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a - c).cwiseAbs().maxCoeff() > 0.0);
  CHECK(a.col(0).minCoeff() >= -2.0);
  CHECK(a.col(0).maxCoeff() < 2.0);
  CHECK(a.col(1).minCoeff() >= 0.0);
  CHECK(a.col(1).maxCoeff() < 1.0);
}

// The integrator contract, reconstructed draw for draw: one normal per noise
// axis per step, x <- x + h b(x) + sqrt(h) sigma(x) xi.
TEST_CASE("euler-maruyama path matches a manual reconstruction") {
  const SdeModel m = make_ou(1.0, 0.0, 0.1);
  const double h = 0.01;
  Rng rng(123);
  const Mat path = simulate_path(m, Vec::Constant(1, 1.5), h, 50, rng);
  REQUIRE(path.rows() == 51);

  Rng rng2(123);
  double x = 1.5;
  for (int s = 0; s < 50; ++s) {
    x = x + h * (-x) + std::sqrt(h) * 0.1 * rng2.normal();
    CHECK(path(s + 1, 0) == x);
  }
}

// The EM chain for the OU process has an exactly computable law:
//   x_{k+1} = a x_k + s sqrt(h) xi,  a = 1 - theta h
// so the pooled endpoint mean and variance are statistical checks with no
// discretization slack.
TEST_CASE("euler-maruyama endpoint moments match the exact chain law") {
  const double theta = 1.0, sigma = 0.1, h = 1e-3, x0 = 1.5;
  const int steps = 500, n = 20000;
  const SdeModel m = make_ou(theta, 0.0, sigma);

  double s1 = 0.0, s2 = 0.0;
  for (int k = 0; k < n; ++k) {
    Rng rng(derive_seed(77, static_cast<std::uint64_t>(k)));
    const Mat p = simulate_path(m, Vec::Constant(1, x0), h, steps, rng);
    const double xe = p(steps, 0);
    s1 += xe;
    s2 += xe * xe;
  }
  const double mean = s1 / n;
  const double var = s2 / n - mean * mean;
  const double a = 1.0 - theta * h;
  const double mean_exact = x0 * std::pow(a, steps);
  const double var_exact =
      sigma * sigma * h * (1.0 - std::pow(a, 2 * steps)) / (1.0 - a * a);
  CHECK(mean == doctest::Approx(mean_exact).epsilon(0.0025));  // ~6 sem
  CHECK(var == doctest::Approx(var_exact).epsilon(0.06));
}

TEST_CASE("markov input series switches at the binomial rate") {
  MarkovInputSpec spec;
  spec.low = -10.0;
  spec.high = -2.0;
  spec.stay_prob = 0.99;
  Rng rng(5);
  const Vec s = markov_input_series(spec, 20000, rng);
  int switches = 0;
  for (int i = 1; i < s.size(); ++i) {
    CHECK((s(i) == spec.low || s(i) == spec.high));
    if (s(i) != s(i - 1)) ++switches;
  }
  // Bin(19999, 0.01): mean 200, sd 14; bounds at 5 sd
  CHECK(switches > 130);
  CHECK(switches < 270);
}

TEST_CASE("snapshot pairs are path states delta_t apart") {
  const SdeModel m = make_ou(1.0, 0.0, 0.1);
  SamplerSpec s;
  s.bounds = Mat{{-2.0, 2.0}};
  s.count = 3;
  EvolveSpec ev;
  ev.delta_t = 0.1;
  ev.substeps = 4;
  ev.n_snapshots = 5;
  ev.store_paths = true;
  const SnapshotEnsemble ens = generate_ensemble(m, s, ev, 11);
  REQUIRE(ens.size() == 15);
  REQUIRE(ens.paths.has_value());
  for (int k = 0; k < 3; ++k) {
    const Mat& path = (*ens.paths)[k];
    REQUIRE(path.rows() == 21);
    for (int snap = 0; snap < 5; ++snap) {
      const int row = k * 5 + snap;
      CHECK((ens.x.row(row) - path.row(4 * snap)).cwiseAbs().maxCoeff() == 0.0);
      CHECK((ens.y.row(row) - path.row(4 * snap + 4)).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("ensembles are reproducible by seed") {
  const SdeModel m = make_ou(1.0, 0.0, 0.1);
  SamplerSpec s;
  s.bounds = Mat{{-2.0, 2.0}};
  s.count = 100;
  EvolveSpec ev;
  const SnapshotEnsemble a = generate_ensemble(m, s, ev, 21);
  const SnapshotEnsemble b = generate_ensemble(m, s, ev, 21);
  const SnapshotEnsemble c = generate_ensemble(m, s, ev, 22);
  CHECK((a.x - b.x).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.y - b.y).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.x - c.x).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("pairs_from_paths re-pairs at the integration resolution") {
  const SdeModel m = make_ou(1.0, 0.0, 0.1);
  SamplerSpec s;
  s.bounds = Mat{{-2.0, 2.0}};
  s.count = 2;
  EvolveSpec ev;
  ev.delta_t = 0.1;
  ev.substeps = 5;
  ev.n_snapshots = 3;
  ev.store_paths = true;
  const SnapshotEnsemble ens = generate_ensemble(m, s, ev, 31);
  const SnapshotEnsemble fine = pairs_from_paths(ens, 1);
  CHECK(fine.size() == 2 * 15);
  CHECK(fine.delta_t == doctest::Approx(0.02).epsilon(1e-15));
  const Mat& p0 = (*ens.paths)[0];
  CHECK((fine.x.row(0) - p0.row(0)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((fine.y.row(0) - p0.row(1)).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(pairs_from_paths(ens, 99), InvalidArgument);
}

TEST_CASE("ensemble export/import round-trips exactly") {
  const fs::path dir = fs::temp_directory_path() / "sdmd_ens_rt";
  fs::remove_all(dir);
  fs::create_directories(dir);

  NeuralMassParams p;
  p.stay_prob = 0.99;
  const SdeModel m = make_neural_mass(p);
  SamplerSpec s;
  s.kind = SamplerSpec::Kind::UniformGrid;
  s.bounds = Mat{{1.0, 1.0}, {-1.0, -1.0}};
  s.grid_counts = {1, 1};
  EvolveSpec ev;
  ev.delta_t = 0.01;
  ev.n_snapshots = 200;
  const SnapshotEnsemble a = generate_ensemble(m, s, ev, 13);
  REQUIRE(a.latent_input.has_value());

  export_ensemble(a, dir);
  const SnapshotEnsemble b = import_ensemble(dir);
  CHECK((a.x - b.x).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.y - b.y).cwiseAbs().maxCoeff() == 0.0);
  CHECK(b.delta_t == a.delta_t);
  CHECK(b.substeps == a.substeps);
  CHECK(b.seed == a.seed);
  CHECK(b.model_name == a.model_name);
  REQUIRE(b.latent_input.has_value());
  CHECK((*a.latent_input - *b.latent_input).cwiseAbs().maxCoeff() == 0.0);
  fs::remove_all(dir);
}
