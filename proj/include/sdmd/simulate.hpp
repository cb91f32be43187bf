#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sdmd/io.hpp"
#include "sdmd/models.hpp"
#include "sdmd/rng.hpp"

namespace sdmd {

// Initial-state sampler over an axis-aligned box.
struct SamplerSpec {
  enum class Kind { UniformGrid, UniformRandom };
  Kind kind = Kind::UniformRandom;
  Mat bounds;                    // dim x 2, [min, max] per axis
  std::vector<int> grid_counts;  // UniformGrid: points per axis, inclusive endpoints
  std::int64_t count = 0;        // UniformRandom: number of initial states

  json describe() const;
};

// How each initial state is evolved into snapshot pairs.
// h = delta_t / substeps is the integration step; each initial state yields
// n_snapshots consecutive pairs (x_k, x_{k+1}) sampled every delta_t.
struct EvolveSpec {
  double delta_t = 0.1;
  int substeps = 1;
  int n_snapshots = 1;
  bool store_paths = false;
};

// Snapshot data plus everything needed to reproduce or re-describe it.
struct SnapshotEnsemble {
  Mat x, y;  // m x dim, row i is a pair (x_i, y_i) separated by delta_t
  double delta_t = 0.0;
  int substeps = 1;
  std::uint64_t seed = 0;
  std::string model_name;
  json model_params;
  json provenance;  // sampler / evolve echo for the metadata sidecar

  // Input level in effect at each x snapshot (exogenous-input models only).
  std::optional<Vec> latent_input;
  // Full integrator paths per initial state, ((substeps * n_snapshots) + 1) x dim.
  std::optional<std::vector<Mat>> paths;

  std::int64_t size() const { return x.rows(); }
  int dim() const { return static_cast<int>(x.cols()); }
};

// Deterministic initial states; grid rows iterate the last axis fastest.
Mat initial_states(const SamplerSpec& spec, std::uint64_t seed);

// Euler-Maruyama path from x0: n_steps steps of size h, returning all
// n_steps + 1 states. For exogenous-input models the two-state input chain
// advances once per step; per step the order of draws is (noise..., chain),
// and `latent` (when given) receives the input level at every stored state.
// Throws OverflowError when a state leaves the representable range.
Mat simulate_path(const SdeModel& model, const Vec& x0, double h, std::int64_t n_steps,
                  Rng& rng, Vec* latent = nullptr);

// Two-state Markov chain sample of length n (values, not indices).
Vec markov_input_series(const MarkovInputSpec& spec, std::int64_t n, Rng& rng);

// Simulates every initial state with its own derived seed and pools the
// snapshot pairs in trajectory-major, time-minor order.
SnapshotEnsemble generate_ensemble(const SdeModel& model, const SamplerSpec& sampler,
                                   const EvolveSpec& evolve, std::uint64_t seed);

// Re-pairs stored integrator paths at a coarser lag (in substeps), e.g. to
// estimate coefficients at the integration resolution. Requires store_paths.
SnapshotEnsemble pairs_from_paths(const SnapshotEnsemble& ens, int lag);

// CSV pair (x/y) with 17-significant-digit decimals plus a JSON sidecar
// carrying model, sampling metadata and content hashes.
void export_ensemble(const SnapshotEnsemble& ens, const std::filesystem::path& dir,
                     const std::string& stem = "ensemble");
SnapshotEnsemble import_ensemble(const std::filesystem::path& dir,
                                 const std::string& stem = "ensemble");

}  // namespace sdmd
