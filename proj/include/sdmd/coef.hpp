#pragma once

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

#include "sdmd/linalg.hpp"
#include "sdmd/mlp.hpp"
#include "sdmd/models.hpp"
#include "sdmd/simulate.hpp"

namespace sdmd {

// Drift/diffusion estimation from snapshot pairs, for runs where the SDE
// coefficients are withheld. The default estimator fits one affine next-state
// predictor per cell of a uniform bin grid; a small network predictor is
// available behind `kind = "network"`. Diffusion is always the binned
// root-mean-square residual rescaled by the sampling step, reported diagonal.
struct CoefConfig {
  std::string kind = "binned";  // "binned" or "network"
  int bins_per_axis = 50;
  int network_hidden = 32;
  int network_epochs = 200;
  double network_lr = 1e-2;
  std::uint64_t seed = 1;
};

class CoefficientEstimate {
 public:
  static CoefficientEstimate fit(const SnapshotEnsemble& pairs, const CoefConfig& cfg = {});

  int dim() const { return dim_; }
  double delta_t() const { return delta_t_; }

  // Queries clamp to the training bounding box; `extrapolated` reports when
  // the clamp (or an empty-cell borrow) was active.
  Vec predict_next(const Vec& x, bool* extrapolated = nullptr) const;
  Vec drift(const Vec& x, bool* extrapolated = nullptr) const;
  Mat diffusion(const Vec& x, bool* extrapolated = nullptr) const;

  // Plug-in evaluator bundle; runs everywhere an analytic model is accepted
  // (no derivative bundles, so second-order generator actions are out).
  SdeModel as_model(const std::string& name = "estimated") const;

  nlohmann::json to_json() const;
  static CoefficientEstimate from_json(const nlohmann::json& j);
  const nlohmann::json& metadata() const { return meta_; }

 private:
  CoefficientEstimate() = default;

  std::int64_t cell_of(const Vec& x, bool* extrapolated) const;

  int dim_ = 0;
  double delta_t_ = 0.0;
  std::int64_t m_ = 0;
  std::string kind_;
  Vec lo_, hi_, width_;
  std::vector<int> nbins_;
  std::vector<Vec> center_;
  std::vector<Vec> c0_;     // per-cell affine offset (predicted y at the center)
  std::vector<Mat> cl_;     // per-cell affine slope
  std::vector<Vec> sigma_;  // per-cell diagonal diffusion
  std::vector<std::uint8_t> borrowed_;
  std::optional<Mlp> net_;
  nlohmann::json meta_;
};

}  // namespace sdmd
