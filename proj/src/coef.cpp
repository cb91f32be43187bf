#include "sdmd/coef.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "sdmd/errors.hpp"
#include "sdmd/io.hpp"

namespace sdmd {

namespace {

constexpr double kDegenerateWidth = 1e-12;

std::int64_t stride_product(const std::vector<int>& nbins, int axis) {
  std::int64_t s = 1;
  for (std::size_t e = axis + 1; e < nbins.size(); ++e) s *= nbins[e];
  return s;
}

}  // namespace

std::int64_t CoefficientEstimate::cell_of(const Vec& x, bool* extrapolated) const {
  std::int64_t idx = 0;
  for (int e = 0; e < dim_; ++e) {
    double u = (x(e) - lo_(e)) / width_(e);
    std::int64_t k = static_cast<std::int64_t>(std::floor(u));
    if (k < 0 || k >= nbins_[e]) {
      if (extrapolated) *extrapolated = true;
      k = std::clamp<std::int64_t>(k, 0, nbins_[e] - 1);
    }
    idx += k * stride_product(nbins_, e);
  }
  if (extrapolated && borrowed_[idx]) *extrapolated = true;
  return idx;
}

CoefficientEstimate CoefficientEstimate::fit(const SnapshotEnsemble& pairs,
                                             const CoefConfig& cfg) {
  const std::int64_t m = pairs.size();
  const int d = pairs.dim();
  if (!(pairs.delta_t > 0)) throw InvalidArgument("coefficient fit needs delta_t > 0");
  if (cfg.bins_per_axis < 1) throw InvalidArgument("bins_per_axis must be positive");
  if (cfg.kind != "binned" && cfg.kind != "network")
    throw InvalidArgument("unknown coefficient estimator kind: " + cfg.kind);
  if (m < d + 2)
    throw InsufficientDataError("coefficient fit needs at least dim + 2 samples, got " +
                                std::to_string(m));

  CoefficientEstimate est;
  est.dim_ = d;
  est.delta_t_ = pairs.delta_t;
  est.m_ = m;
  est.kind_ = cfg.kind;
  est.lo_ = pairs.x.colwise().minCoeff().transpose();
  est.hi_ = pairs.x.colwise().maxCoeff().transpose();
  est.nbins_.assign(d, cfg.bins_per_axis);
  est.width_ = Vec::Ones(d);
  for (int e = 0; e < d; ++e) {
    const double span = est.hi_(e) - est.lo_(e);
    if (span < kDegenerateWidth) {
      est.nbins_[e] = 1;  // axis carries no variation
      est.width_(e) = 1.0;
    } else {
      // nudge the top edge so the max sample lands in the last cell
      est.width_(e) = span * (1.0 + 1e-12) / est.nbins_[e];
    }
  }

  const std::int64_t n_cells = stride_product(est.nbins_, -1);
  est.center_.resize(n_cells);
  {
    std::vector<int> mi(d, 0);
    for (std::int64_t c = 0; c < n_cells; ++c) {
      Vec ctr(d);
      for (int e = 0; e < d; ++e) ctr(e) = est.lo_(e) + (mi[e] + 0.5) * est.width_(e);
      est.center_[c] = ctr;
      for (int e = d - 1; e >= 0; --e) {
        if (++mi[e] < est.nbins_[e]) break;
        mi[e] = 0;
      }
    }
  }

  std::vector<std::vector<std::int64_t>> members(n_cells);
  for (std::int64_t i = 0; i < m; ++i)
    members[est.cell_of(pairs.x.row(i).transpose(), nullptr)].push_back(i);

  if (cfg.kind == "network") {
    MlpSpec spec;
    spec.in_dim = d;
    spec.hidden = {cfg.network_hidden};
    spec.out_dim = d;
    Mlp net(spec);
    Rng rng(derive_seed(cfg.seed, 0x436F6566u));
    net.init_uniform(rng);
    for (int epoch = 0; epoch < cfg.network_epochs; ++epoch) {
      MlpForward f = net.forward(pairs.x, 0);
      const Mat gy = (2.0 / double(m)) * (f.value() - pairs.y);
      MlpGrad g = net.backward(f, &gy, nullptr, nullptr);
      net.step(cfg.network_lr, g);
      if (!net.flatten().allFinite())
        throw DivergenceError("network coefficient fit diverged at epoch " +
                              std::to_string(epoch) + " (lr = " + format_g17(cfg.network_lr) +
                              ")");
    }
    est.net_ = std::move(net);
  }

  est.c0_.assign(n_cells, Vec::Zero(d));
  est.cl_.assign(n_cells, Mat::Zero(d, d));
  est.sigma_.assign(n_cells, Vec::Zero(d));
  est.borrowed_.assign(n_cells, 0);

  const int p = d + 1;  // affine design width
  std::vector<std::uint8_t> empty(n_cells, 0);
  for (std::int64_t c = 0; c < n_cells; ++c) {
    const auto& rows = members[c];
    if (rows.empty()) {
      empty[c] = 1;
      continue;
    }
    const int count = static_cast<int>(rows.size());
    Vec ymean = Vec::Zero(d);
    for (auto i : rows) ymean += pairs.y.row(i).transpose();
    ymean /= count;
    if (count >= 2 * p && est.kind_ == "binned") {
      Mat design(count, p);
      Mat target(count, d);
      for (int r = 0; r < count; ++r) {
        design(r, 0) = 1.0;
        design.row(r).tail(d) =
            pairs.x.row(rows[r]) - est.center_[c].transpose();
        target.row(r) = pairs.y.row(rows[r]);
      }
      Mat normal = design.transpose() * design;
      normal.diagonal().array() += 1e-12 * std::max(1.0, normal.trace() / p);
      const Mat sol = normal.ldlt().solve(design.transpose() * target);
      if (sol.allFinite()) {
        est.c0_[c] = sol.row(0).transpose();
        est.cl_[c] = sol.bottomRows(d).transpose();
      } else {
        est.c0_[c] = ymean;
      }
    } else {
      est.c0_[c] = ymean;  // too few samples for a stable affine fit
    }
  }

  // Empty cells borrow the model of the nearest fitted cell so that queries
  // always resolve; the borrow is reported through the extrapolation flag.
  for (std::int64_t c = 0; c < n_cells; ++c) {
    if (!empty[c]) continue;
    std::int64_t best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::int64_t o = 0; o < n_cells; ++o) {
      if (empty[o]) continue;
      const double dist = (est.center_[o] - est.center_[c]).squaredNorm();
      if (dist < best_d) {
        best_d = dist;
        best = o;
      }
    }
    est.c0_[c] = est.c0_[best];
    est.cl_[c] = est.cl_[best];
    est.borrowed_[c] = 1;
  }

  // Residual second moments against the fitted predictor, per cell and axis.
  for (std::int64_t c = 0; c < n_cells; ++c) {
    const auto& rows = members[c];
    if (rows.empty()) continue;
    Vec acc = Vec::Zero(d);
    for (auto i : rows) {
      const Vec x = pairs.x.row(i).transpose();
      const Vec r = pairs.y.row(i).transpose() - est.predict_next(x, nullptr);
      acc += r.cwiseProduct(r);
    }
    est.sigma_[c] = (acc / (double(rows.size()) * est.delta_t_)).cwiseSqrt();
  }
  for (std::int64_t c = 0; c < n_cells; ++c) {
    if (!empty[c]) continue;
    std::int64_t best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::int64_t o = 0; o < n_cells; ++o) {
      if (empty[o]) continue;
      const double dist = (est.center_[o] - est.center_[c]).squaredNorm();
      if (dist < best_d) {
        best_d = dist;
        best = o;
      }
    }
    est.sigma_[c] = est.sigma_[best];
  }

  est.meta_ = {{"kind", est.kind_},
               {"samples", m},
               {"delta_t", est.delta_t_},
               {"bins_per_axis", cfg.bins_per_axis},
               {"model", pairs.model_name}};
  if (cfg.kind == "network") {
    est.meta_["network_hidden"] = cfg.network_hidden;
    est.meta_["network_epochs"] = cfg.network_epochs;
    est.meta_["network_lr"] = cfg.network_lr;
    est.meta_["seed"] = cfg.seed;
  }
  return est;
}

Vec CoefficientEstimate::predict_next(const Vec& x, bool* extrapolated) const {
  if (x.size() != dim_) throw InvalidArgument("coefficient query dimension mismatch");
  if (net_) {
    if (extrapolated) cell_of(x, extrapolated);
    Mat xb(1, dim_);
    xb.row(0) = x.transpose();
    return net_->forward(xb, 0).value().row(0).transpose();
  }
  const std::int64_t c = cell_of(x, extrapolated);
  return c0_[c] + cl_[c] * (x - center_[c]);
}

Vec CoefficientEstimate::drift(const Vec& x, bool* extrapolated) const {
  return (predict_next(x, extrapolated) - x) / delta_t_;
}

Mat CoefficientEstimate::diffusion(const Vec& x, bool* extrapolated) const {
  if (x.size() != dim_) throw InvalidArgument("coefficient query dimension mismatch");
  const std::int64_t c = cell_of(x, extrapolated);
  return sigma_[c].asDiagonal();
}

SdeModel CoefficientEstimate::as_model(const std::string& name) const {
  auto self = std::make_shared<const CoefficientEstimate>(*this);
  SdeModel model;
  model.name = name;
  model.dim = dim_;
  model.noise_dim = dim_;
  model.params = meta_;
  model.drift = [self](const Vec& x) { return self->drift(x); };
  model.diffusion = [self](const Vec& x) { return self->diffusion(x); };
  model.diffusion_squared = [self](const Vec& x) {
    const Mat s = self->diffusion(x);
    return Mat(s * s.transpose());
  };
  return model;
}

nlohmann::json CoefficientEstimate::to_json() const {
  auto vec_json = [](const Vec& v) {
    nlohmann::json a = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
  };
  nlohmann::json cells = nlohmann::json::array();
  for (std::size_t c = 0; c < c0_.size(); ++c) {
    nlohmann::json slope = nlohmann::json::array();
    for (int i = 0; i < dim_; ++i)
      for (int j = 0; j < dim_; ++j) slope.push_back(cl_[c](i, j));
    cells.push_back({{"c0", vec_json(c0_[c])},
                     {"slope", std::move(slope)},
                     {"sigma", vec_json(sigma_[c])},
                     {"borrowed", bool(borrowed_[c])}});
  }
  nlohmann::json j = {{"format", "sdmd-coef/1"},
                      {"kind", kind_},
                      {"dim", dim_},
                      {"delta_t", delta_t_},
                      {"samples", m_},
                      {"lo", vec_json(lo_)},
                      {"hi", vec_json(hi_)},
                      {"width", vec_json(width_)},
                      {"nbins", nbins_},
                      {"cells", std::move(cells)},
                      {"metadata", meta_}};
  if (net_) j["network"] = net_->to_json();
  return j;
}

CoefficientEstimate CoefficientEstimate::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "sdmd-coef/1")
    throw InvalidArgument("unknown coefficient estimator format");
  CoefficientEstimate est;
  est.kind_ = j.at("kind").get<std::string>();
  est.dim_ = j.at("dim").get<int>();
  est.delta_t_ = j.at("delta_t").get<double>();
  est.m_ = j.at("samples").get<std::int64_t>();
  est.nbins_ = j.at("nbins").get<std::vector<int>>();
  auto read_vec = [&](const nlohmann::json& a) {
    Vec v(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) v(i) = a[i].get<double>();
    return v;
  };
  est.lo_ = read_vec(j.at("lo"));
  est.hi_ = read_vec(j.at("hi"));
  est.width_ = read_vec(j.at("width"));
  const auto& cells = j.at("cells");
  const std::int64_t n_cells = stride_product(est.nbins_, -1);
  if (static_cast<std::int64_t>(cells.size()) != n_cells)
    throw InvalidArgument("coefficient estimator cell count mismatch");
  est.center_.resize(n_cells);
  {
    std::vector<int> mi(est.dim_, 0);
    for (std::int64_t c = 0; c < n_cells; ++c) {
      Vec ctr(est.dim_);
      for (int e = 0; e < est.dim_; ++e) ctr(e) = est.lo_(e) + (mi[e] + 0.5) * est.width_(e);
      est.center_[c] = ctr;
      for (int e = est.dim_ - 1; e >= 0; --e) {
        if (++mi[e] < est.nbins_[e]) break;
        mi[e] = 0;
      }
    }
  }
  for (const auto& cell : cells) {
    est.c0_.push_back(read_vec(cell.at("c0")));
    Mat slope(est.dim_, est.dim_);
    const auto& s = cell.at("slope");
    for (int i = 0; i < est.dim_; ++i)
      for (int k = 0; k < est.dim_; ++k) slope(i, k) = s[i * est.dim_ + k].get<double>();
    est.cl_.push_back(slope);
    est.sigma_.push_back(read_vec(cell.at("sigma")));
    est.borrowed_.push_back(cell.at("borrowed").get<bool>() ? 1 : 0);
  }
  if (j.contains("network")) est.net_ = Mlp::from_json(j.at("network"));
  est.meta_ = j.value("metadata", nlohmann::json::object());
  return est;
}

}  // namespace sdmd
