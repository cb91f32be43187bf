#include "sdmd/mlp.hpp"

#include <cmath>

#include "sdmd/errors.hpp"

namespace sdmd {

int MlpSpec::width_in(int layer) const {
  return layer == 0 ? in_dim : hidden[layer - 1];
}

int MlpSpec::width_out(int layer) const {
  return layer == layer_count() - 1 ? out_dim : hidden[layer];
}

void MlpGrad::axpy(double alpha, const MlpGrad& other) {
  for (std::size_t l = 0; l < w.size(); ++l) {
    w[l] += alpha * other.w[l];
    b[l] += alpha * other.b[l];
  }
}

void MlpGrad::scale(double alpha) {
  for (std::size_t l = 0; l < w.size(); ++l) {
    w[l] *= alpha;
    b[l] *= alpha;
  }
}

double MlpGrad::squared_norm() const {
  double s = 0.0;
  for (std::size_t l = 0; l < w.size(); ++l) s += w[l].squaredNorm() + b[l].squaredNorm();
  return s;
}

Mlp::Mlp(MlpSpec spec) : spec_(std::move(spec)) {
  if (spec_.in_dim < 1 || spec_.out_dim < 1)
    throw InvalidArgument("network needs positive input and output widths");
  if (spec_.hidden.size() > 2)
    throw InvalidArgument("network depth is capped at two hidden layers");
  for (int h : spec_.hidden)
    if (h < 1) throw InvalidArgument("hidden widths must be positive");
  for (int l = 0; l < spec_.layer_count(); ++l) {
    w_.push_back(Mat::Zero(spec_.width_in(l), spec_.width_out(l)));
    b_.push_back(Vec::Zero(spec_.width_out(l)));
  }
}

void Mlp::init_uniform(Rng& rng) {
  init_uniform(rng, Vec::Ones(spec_.in_dim));
}

void Mlp::init_uniform(Rng& rng, const Vec& x_scale) {
  if (x_scale.size() != spec_.in_dim) throw InvalidArgument("input scale width mismatch");
  for (int l = 0; l < spec_.layer_count(); ++l) {
    const double lim = 1.0 / std::sqrt(double(spec_.width_in(l)));
    for (Eigen::Index i = 0; i < w_[l].rows(); ++i) {
      const double row_lim = l == 0 ? lim / std::max(x_scale(i), 1e-12) : lim;
      for (Eigen::Index j = 0; j < w_[l].cols(); ++j)
        w_[l](i, j) = row_lim * (2.0 * rng.uniform() - 1.0);
    }
    for (Eigen::Index i = 0; i < b_[l].size(); ++i) b_[l](i) = lim * (2.0 * rng.uniform() - 1.0);
  }
}

MlpForward Mlp::forward(const Mat& x, int order) const {
  if (x.cols() != spec_.in_dim) throw InvalidArgument("network input width mismatch");
  if (order < 0 || order > 2) throw InvalidArgument("derivative order must be 0, 1, or 2");
  const int d = spec_.in_dim;
  const int nl = spec_.layer_count();
  const Eigen::Index m = x.rows();

  MlpForward f;
  f.order = order;
  f.a.resize(nl + 1);
  f.a[0] = x;
  if (order >= 1) {
    f.da.resize(nl + 1);
    f.dz.resize(nl);
    f.da[0].resize(d);
    for (int p = 0; p < d; ++p) {
      f.da[0][p] = Mat::Zero(m, d);
      f.da[0][p].col(p).setOnes();
    }
  }
  if (order >= 2) {
    f.d2a.resize(nl + 1);
    f.d2z.resize(nl);
    f.d2a[0].assign(d * d, Mat::Zero(m, d));
  }

  for (int l = 0; l < nl; ++l) {
    const bool last = (l == nl - 1);
    Mat z = (f.a[l] * w_[l]).rowwise() + b_[l].transpose();
    if (order >= 1) {
      f.dz[l].resize(d);
      for (int p = 0; p < d; ++p) f.dz[l][p] = f.da[l][p] * w_[l];
    }
    if (order >= 2) {
      f.d2z[l].resize(d * d);
      for (int pq = 0; pq < d * d; ++pq) f.d2z[l][pq] = f.d2a[l][pq] * w_[l];
    }
    if (last) {
      f.a[l + 1] = std::move(z);
      if (order >= 1) f.da[l + 1] = f.dz[l];
      if (order >= 2) f.d2a[l + 1] = f.d2z[l];
    } else {
      const Mat t = z.array().tanh().matrix();
      f.a[l + 1] = t;
      if (order >= 1) {
        const Mat t1 = (1.0 - t.array().square()).matrix();
        f.da[l + 1].resize(d);
        for (int p = 0; p < d; ++p)
          f.da[l + 1][p] = t1.cwiseProduct(f.dz[l][p]);
        if (order >= 2) {
          const Mat t2 = (-2.0 * t.array() * t1.array()).matrix();
          f.d2a[l + 1].resize(d * d);
          for (int p = 0; p < d; ++p)
            for (int q = 0; q < d; ++q)
              f.d2a[l + 1][p * d + q] =
                  t2.cwiseProduct(f.dz[l][p]).cwiseProduct(f.dz[l][q]) +
                  t1.cwiseProduct(f.d2z[l][p * d + q]);
        }
      }
    }
  }
  return f;
}

MlpGrad Mlp::zero_grad() const {
  MlpGrad g;
  for (int l = 0; l < spec_.layer_count(); ++l) {
    g.w.push_back(Mat::Zero(w_[l].rows(), w_[l].cols()));
    g.b.push_back(Vec::Zero(b_[l].size()));
  }
  return g;
}

MlpGrad Mlp::backward(const MlpForward& f, const Mat* gy, const std::vector<Mat>* gdy,
                      const std::vector<Mat>* gd2y) const {
  const int d = spec_.in_dim;
  const int nl = spec_.layer_count();
  const Eigen::Index m = f.a[0].rows();
  if (gdy && f.order < 1) throw InvalidArgument("backward: first-order seeds need order >= 1");
  if (gd2y && f.order < 2) throw InvalidArgument("backward: second-order seeds need order >= 2");

  MlpGrad g = zero_grad();

  Mat gz = gy ? *gy : Mat::Zero(m, spec_.out_dim);
  std::vector<Mat> gdz, gd2z;
  const bool second = gd2y != nullptr;
  // Hessian seeds feed the Jacobian adjoints through the chain rule, so the
  // first-order lane is live whenever the second-order one is.
  const bool first = (gdy != nullptr) || second;
  if (first) {
    if (gdy)
      gdz = *gdy;
    else
      gdz.assign(d, Mat::Zero(m, spec_.out_dim));
  }
  if (second) gd2z = *gd2y;

  for (int l = nl - 1; l >= 0; --l) {
    g.w[l] = f.a[l].transpose() * gz;
    if (first)
      for (int p = 0; p < d; ++p) g.w[l] += f.da[l][p].transpose() * gdz[p];
    if (second)
      for (int pq = 0; pq < d * d; ++pq) g.w[l] += f.d2a[l][pq].transpose() * gd2z[pq];
    g.b[l] = gz.colwise().sum().transpose();

    if (l == 0) break;

    Mat ga = gz * w_[l].transpose();
    std::vector<Mat> gda, gd2a;
    if (first) {
      gda.resize(d);
      for (int p = 0; p < d; ++p) gda[p] = gdz[p] * w_[l].transpose();
    }
    if (second) {
      gd2a.resize(d * d);
      for (int pq = 0; pq < d * d; ++pq) gd2a[pq] = gd2z[pq] * w_[l].transpose();
    }

    // Backprop through the tanh of layer l-1. Cached values: t = a[l],
    // pre-activation input derivatives dz[l-1], d2z[l-1].
    const Mat& t = f.a[l];
    const Mat t1 = (1.0 - t.array().square()).matrix();
    const Mat t2 = (-2.0 * t.array() * t1.array()).matrix();

    Mat gz_new = ga.cwiseProduct(t1);
    if (first)
      for (int p = 0; p < d; ++p)
        gz_new += gda[p].cwiseProduct(t2).cwiseProduct(f.dz[l - 1][p]);
    if (second) {
      const Mat t3 = (-2.0 * t1.array() * (t1.array() - 2.0 * t.array().square())).matrix();
      for (int p = 0; p < d; ++p)
        for (int q = 0; q < d; ++q) {
          const Mat& gpq = gd2a[p * d + q];
          gz_new += gpq.cwiseProduct(
              t3.cwiseProduct(f.dz[l - 1][p]).cwiseProduct(f.dz[l - 1][q]) +
              t2.cwiseProduct(f.d2z[l - 1][p * d + q]));
        }
    }

    std::vector<Mat> gdz_new, gd2z_new;
    if (first) {
      gdz_new.resize(d);
      for (int p = 0; p < d; ++p) gdz_new[p] = gda[p].cwiseProduct(t1);
      if (second)
        for (int p = 0; p < d; ++p)
          for (int q = 0; q < d; ++q) {
            gdz_new[p] += gd2a[p * d + q].cwiseProduct(t2).cwiseProduct(f.dz[l - 1][q]);
            gdz_new[q] += gd2a[p * d + q].cwiseProduct(t2).cwiseProduct(f.dz[l - 1][p]);
          }
    }
    if (second) {
      gd2z_new.resize(d * d);
      for (int pq = 0; pq < d * d; ++pq) gd2z_new[pq] = gd2a[pq].cwiseProduct(t1);
    }

    gz = std::move(gz_new);
    gdz = std::move(gdz_new);
    gd2z = std::move(gd2z_new);
  }
  return g;
}

void Mlp::step(double lr, const MlpGrad& g) {
  for (std::size_t l = 0; l < w_.size(); ++l) {
    w_[l] -= lr * g.w[l];
    b_[l] -= lr * g.b[l];
  }
}

std::int64_t Mlp::param_count() const {
  std::int64_t n = 0;
  for (std::size_t l = 0; l < w_.size(); ++l) n += w_[l].size() + b_[l].size();
  return n;
}

Vec Mlp::flatten() const {
  Vec v(param_count());
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < w_.size(); ++l) {
    for (Eigen::Index i = 0; i < w_[l].rows(); ++i)
      for (Eigen::Index j = 0; j < w_[l].cols(); ++j) v(k++) = w_[l](i, j);
    for (Eigen::Index j = 0; j < b_[l].size(); ++j) v(k++) = b_[l](j);
  }
  return v;
}

void Mlp::set_flat(const Vec& v) {
  if (v.size() != param_count()) throw InvalidArgument("flattened parameter length mismatch");
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < w_.size(); ++l) {
    for (Eigen::Index i = 0; i < w_[l].rows(); ++i)
      for (Eigen::Index j = 0; j < w_[l].cols(); ++j) w_[l](i, j) = v(k++);
    for (Eigen::Index j = 0; j < b_[l].size(); ++j) b_[l](j) = v(k++);
  }
}

nlohmann::json Mlp::to_json() const {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l < w_.size(); ++l) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < w_[l].rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index j = 0; j < w_[l].cols(); ++j) row.push_back(w_[l](i, j));
      rows.push_back(std::move(row));
    }
    nlohmann::json bias = nlohmann::json::array();
    for (Eigen::Index j = 0; j < b_[l].size(); ++j) bias.push_back(b_[l](j));
    layers.push_back({{"w", std::move(rows)}, {"b", std::move(bias)}});
  }
  return {{"in_dim", spec_.in_dim},
          {"hidden", spec_.hidden},
          {"out_dim", spec_.out_dim},
          {"layers", std::move(layers)}};
}

Mlp Mlp::from_json(const nlohmann::json& j) {
  MlpSpec spec;
  spec.in_dim = j.at("in_dim").get<int>();
  spec.hidden = j.at("hidden").get<std::vector<int>>();
  spec.out_dim = j.at("out_dim").get<int>();
  Mlp net(spec);
  const auto& layers = j.at("layers");
  if (static_cast<int>(layers.size()) != spec.layer_count())
    throw InvalidArgument("network JSON layer count mismatch");
  for (int l = 0; l < spec.layer_count(); ++l) {
    const auto& rows = layers[l].at("w");
    if (static_cast<Eigen::Index>(rows.size()) != net.w_[l].rows())
      throw InvalidArgument("network JSON weight shape mismatch");
    for (Eigen::Index i = 0; i < net.w_[l].rows(); ++i) {
      const auto& row = rows[i];
      if (static_cast<Eigen::Index>(row.size()) != net.w_[l].cols())
        throw InvalidArgument("network JSON weight shape mismatch");
      for (Eigen::Index jcol = 0; jcol < net.w_[l].cols(); ++jcol)
        net.w_[l](i, jcol) = row[jcol].get<double>();
    }
    const auto& bias = layers[l].at("b");
    if (static_cast<Eigen::Index>(bias.size()) != net.b_[l].size())
      throw InvalidArgument("network JSON bias shape mismatch");
    for (Eigen::Index jcol = 0; jcol < net.b_[l].size(); ++jcol)
      net.b_[l](jcol) = bias[jcol].get<double>();
  }
  return net;
}

}  // namespace sdmd
