#pragma once

#include <json.hpp>

#include <vector>

#include "sdmd/linalg.hpp"
#include "sdmd/rng.hpp"

namespace sdmd {

// Fully connected tanh network evaluated on sample batches, with exact
// propagation of derivatives with respect to the *inputs* (not the weights)
// up to second order. Batches are row-major: X is m x in_dim, outputs are
// m x out_dim, and the input-derivative caches hold one m x width matrix per
// input axis (first order) or per axis pair (second order, index p*d + q).
struct MlpSpec {
  int in_dim = 0;
  std::vector<int> hidden;  // at most two hidden layers
  int out_dim = 0;

  int layer_count() const { return static_cast<int>(hidden.size()) + 1; }
  int width_in(int layer) const;
  int width_out(int layer) const;
};

// Per-batch forward caches. For linear layer l (0-based):
//   a[l]      input values (a[0] is the batch itself, a[L] the network output)
//   da[l][p]  d a[l] / d x_p
//   d2a[l][p*d+q]
//   z-side caches dz/d2z hold the pre-activation derivatives of layer l,
//   which for the last layer are the output derivatives the caller reads.
struct MlpForward {
  int order = 0;
  std::vector<Mat> a;
  std::vector<std::vector<Mat>> da;
  std::vector<std::vector<Mat>> d2a;
  std::vector<std::vector<Mat>> dz;
  std::vector<std::vector<Mat>> d2z;

  const Mat& value() const { return a.back(); }
  const Mat& dvalue(int p) const { return dz.back()[p]; }
  const Mat& d2value(int p, int q, int d) const { return d2z.back()[p * d + q]; }
};

struct MlpGrad {
  std::vector<Mat> w;
  std::vector<Vec> b;

  void axpy(double alpha, const MlpGrad& other);
  void scale(double alpha);
  double squared_norm() const;
};

class Mlp {
 public:
  explicit Mlp(MlpSpec spec);

  const MlpSpec& spec() const { return spec_; }
  const std::vector<Mat>& weights() const { return w_; }
  const std::vector<Vec>& biases() const { return b_; }

  // Weights and biases uniform on +-1/sqrt(fan_in); draw order is layer by
  // layer, row-major weights then the bias vector. The overload rescales the
  // first-layer row for input j by 1/x_scale(j) so the active region of the
  // activations covers the data rather than the unit cube.
  void init_uniform(Rng& rng);
  void init_uniform(Rng& rng, const Vec& x_scale);

  MlpForward forward(const Mat& x, int order) const;

  // Reverse pass: seeds are the loss gradients with respect to the output
  // value, the output input-Jacobians, and the output input-Hessians (full
  // p*d+q grid, symmetric seeds expected). Null seeds are treated as zero.
  // The forward cache must have been computed with a sufficient order.
  MlpGrad backward(const MlpForward& f, const Mat* gy, const std::vector<Mat>* gdy,
                   const std::vector<Mat>* gd2y) const;

  MlpGrad zero_grad() const;
  void step(double lr, const MlpGrad& g);  // params -= lr * g

  std::int64_t param_count() const;
  Vec flatten() const;
  void set_flat(const Vec& v);

  nlohmann::json to_json() const;
  static Mlp from_json(const nlohmann::json& j);

 private:
  MlpSpec spec_;
  std::vector<Mat> w_;  // w[l] is width_in(l) x width_out(l)
  std::vector<Vec> b_;
};

}  // namespace sdmd
