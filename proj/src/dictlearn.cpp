#include "sdmd/dictlearn.hpp"

#include <cmath>
#include <utility>

#include "sdmd/errors.hpp"

namespace sdmd {

namespace {

constexpr std::int64_t kBlock = 8192;

int total_size(const MlpSpec& spec) { return spec.out_dim + spec.in_dim + 1; }

}  // namespace

NetworkDictionary::NetworkDictionary(Mlp net)
    : Dictionary("network", net.spec().in_dim, total_size(net.spec())), net_(std::move(net)) {}

Mat NetworkDictionary::batch_values(const Mat& x) const {
  if (x.cols() != dim_) throw InvalidArgument("dictionary input width mismatch");
  const MlpForward f = net_.forward(x, 0);
  Mat out(x.rows(), n_);
  out.leftCols(n_learned()) = f.value();
  out.middleCols(n_learned(), dim_) = x;
  out.col(n_ - 1).setOnes();
  return out;
}

CVec NetworkDictionary::eval(const Vec& x) const {
  check_point(x);
  Mat xb(1, dim_);
  xb.row(0) = x.transpose();
  return batch_values(xb).row(0).transpose().cast<Cplx>();
}

CMat NetworkDictionary::jacobian(const Vec& x) const {
  check_point(x);
  Mat xb(1, dim_);
  xb.row(0) = x.transpose();
  const MlpForward f = net_.forward(xb, 1);
  CMat out = CMat::Zero(n_, dim_);
  for (int p = 0; p < dim_; ++p) {
    for (int j = 0; j < n_learned(); ++j) out(j, p) = f.dvalue(p)(0, j);
    out(n_learned() + p, p) = 1.0;
  }
  return out;
}

CMat NetworkDictionary::hessian(const Vec& x) const {
  check_point(x);
  Mat xb(1, dim_);
  xb.row(0) = x.transpose();
  const MlpForward f = net_.forward(xb, 2);
  CMat out = CMat::Zero(n_, dim_ * dim_);
  for (int p = 0; p < dim_; ++p)
    for (int q = 0; q < dim_; ++q)
      for (int j = 0; j < n_learned(); ++j)
        out(j, p * dim_ + q) = f.d2value(p, q, dim_)(0, j);
  return out;
}

json NetworkDictionary::describe() const {
  return {{"family", "network"},
          {"dim", dim_},
          {"size", n_},
          {"n_learned", n_learned()},
          {"hidden", net_.spec().hidden},
          {"augmentation", {"identity", "constant"}}};
}

json NetworkDictionary::to_json() const {
  return {{"format", "sdmd-dict/1"}, {"family", "network"}, {"network", net_.to_json()}};
}

std::shared_ptr<const NetworkDictionary> NetworkDictionary::from_json(const json& j) {
  if (j.value("format", "") != "sdmd-dict/1" || j.value("family", "") != "network")
    throw InvalidArgument("not a learned-dictionary JSON document");
  return std::make_shared<const NetworkDictionary>(Mlp::from_json(j.at("network")));
}

DlMethod parse_dl_method(const std::string& name) {
  if (name == "sdmd-dl") return DlMethod::SdmdDl;
  if (name == "edmd-dl") return DlMethod::EdmdDl;
  if (name == "gedmd-dl") return DlMethod::GedmdDl;
  throw InvalidArgument("unknown dictionary-learning method: " + name);
}

std::string dl_method_name(DlMethod method) {
  switch (method) {
    case DlMethod::SdmdDl: return "sdmd-dl";
    case DlMethod::EdmdDl: return "edmd-dl";
    case DlMethod::GedmdDl: return "gedmd-dl";
  }
  return "?";
}

double loss_eval(const Mat& psi_x, const Mat& psi_target, const Mat& k, double gamma) {
  if (psi_x.rows() != psi_target.rows() || psi_x.cols() != psi_target.cols() ||
      k.rows() != psi_x.cols() || k.cols() != psi_x.cols())
    throw InvalidArgument("loss_eval: shape mismatch");
  return (psi_target - psi_x * k).squaredNorm() + gamma * k.squaredNorm();
}

namespace {

struct CoefTables {
  Mat b;  // m x d, drift at each x row
  Mat a;  // m x d*d, sigma sigma^T entries, column p*d+q
};

CoefTables make_coef_tables(const SdeModel& model, const Mat& x) {
  if (!model.drift)
    throw InvalidArgument(
        "this method needs drift/diffusion evaluators; pass an analytic model or a fitted "
        "coefficient estimate");
  const int d = static_cast<int>(x.cols());
  CoefTables ct;
  ct.b.resize(x.rows(), d);
  ct.a.resize(x.rows(), d * d);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Vec xi = x.row(i).transpose();
    ct.b.row(i) = model.drift(xi).transpose();
    const Mat ai = model.diff2(xi);
    for (int p = 0; p < d; ++p)
      for (int q = 0; q < d; ++q) ct.a(i, p * d + q) = ai(p, q);
  }
  return ct;
}

Mat augment_values(const MlpForward& f, const Mat& xb, int n_total) {
  const int nl = static_cast<int>(f.value().cols());
  const int d = static_cast<int>(xb.cols());
  Mat out(xb.rows(), n_total);
  out.leftCols(nl) = f.value();
  out.middleCols(nl, d) = xb;
  out.col(n_total - 1).setOnes();
  return out;
}

// Generator action on the augmented dictionary: learned columns combine the
// cached input derivatives with the per-sample coefficients; identity columns
// reduce to the drift components; the constant column vanishes.
Mat augment_generator(const MlpForward& f, const CoefTables& ct, std::int64_t lo,
                      std::int64_t len, int d, int n_total) {
  const int nl = static_cast<int>(f.value().cols());
  Mat out = Mat::Zero(len, n_total);
  for (int k = 0; k < d; ++k)
    out.leftCols(nl).array() +=
        f.dvalue(k).array().colwise() * ct.b.col(k).segment(lo, len).array();
  for (int k = 0; k < d; ++k)
    for (int l = 0; l < d; ++l)
      out.leftCols(nl).array() += 0.5 * (f.d2value(k, l, d).array().colwise() *
                                         ct.a.col(k * d + l).segment(lo, len).array());
  out.middleCols(nl, d) = ct.b.middleRows(lo, len);
  return out;
}

using Segments = std::vector<std::pair<std::int64_t, std::int64_t>>;  // [lo, hi)

// One pass over the given row segments: accumulates the loss and, when
// grad_out is set, the parameter gradient with the operator held fixed.
// Blocks are visited in a fixed sequential order, so results do not depend
// on any thread setting.
double data_pass(const Mlp& net, const SnapshotEnsemble& data, const CoefTables* ct,
                 DlMethod method, const Mat& k_op, double gamma, const Segments& segments,
                 MlpGrad* grad_out) {
  const int d = data.dim();
  const int nl = net.spec().out_dim;
  const int n_total = total_size(net.spec());
  double loss = 0.0;
  for (const auto& [seg_lo, seg_hi] : segments) {
    for (std::int64_t lo = seg_lo; lo < seg_hi; lo += kBlock) {
      const std::int64_t len = std::min(kBlock, seg_hi - lo);
      const Mat xb = data.x.middleRows(lo, len);
      if (method == DlMethod::GedmdDl) {
        const MlpForward f = net.forward(xb, 2);
        const Mat psi_x = augment_values(f, xb, n_total);
        const Mat psi_prime = augment_generator(f, *ct, lo, len, d, n_total);
        const Mat r = psi_prime - psi_x * k_op;
        loss += r.squaredNorm();
        if (grad_out) {
          const Mat rk = r * k_op.transpose();
          const Mat gy = -2.0 * rk.leftCols(nl);
          std::vector<Mat> gdy(d), gd2y(d * d);
          for (int p = 0; p < d; ++p)
            gdy[p] = 2.0 * (r.leftCols(nl).array().colwise() *
                            ct->b.col(p).segment(lo, len).array())
                               .matrix();
          for (int p = 0; p < d; ++p)
            for (int q = 0; q < d; ++q)
              gd2y[p * d + q] = (r.leftCols(nl).array().colwise() *
                                 ct->a.col(p * d + q).segment(lo, len).array())
                                    .matrix();
          grad_out->axpy(1.0, net.backward(f, &gy, &gdy, &gd2y));
        }
      } else {
        const Mat yb = data.y.middleRows(lo, len);
        const MlpForward fx = net.forward(xb, 0);
        const MlpForward fy = net.forward(yb, 0);
        const Mat psi_x = augment_values(fx, xb, n_total);
        const Mat psi_y = augment_values(fy, yb, n_total);
        const Mat r = psi_y - psi_x * k_op;
        loss += r.squaredNorm();
        if (grad_out) {
          const Mat rk = r * k_op.transpose();
          const Mat gyx = -2.0 * rk.leftCols(nl);
          const Mat gyy = 2.0 * r.leftCols(nl);
          grad_out->axpy(1.0, net.backward(fx, &gyx, nullptr, nullptr));
          grad_out->axpy(1.0, net.backward(fy, &gyy, nullptr, nullptr));
        }
      }
    }
  }
  return loss + gamma * k_op.squaredNorm();
}

struct OperatorState {
  Mat g;  // normalized Gram of Psi_X
  Mat t;  // normalized cross matrix (target per method)
  Mat k;  // updated operator
};

// Closed-form operator update from the current parameters. gamma < 0 is
// resolved by the trace-scaled default and written back.
OperatorState operator_update(const Mlp& net, const SnapshotEnsemble& data,
                              const CoefTables* ct, DlMethod method, double& gamma) {
  const std::int64_t m = data.size();
  const int d = data.dim();
  const int n_total = total_size(net.spec());
  Mat g = Mat::Zero(n_total, n_total);
  Mat t = Mat::Zero(n_total, n_total);
  for (std::int64_t lo = 0; lo < m; lo += kBlock) {
    const std::int64_t len = std::min(kBlock, m - lo);
    const Mat xb = data.x.middleRows(lo, len);
    if (method == DlMethod::EdmdDl) {
      const MlpForward fx = net.forward(xb, 0);
      const Mat yb = data.y.middleRows(lo, len);
      const MlpForward fy = net.forward(yb, 0);
      const Mat psi_x = augment_values(fx, xb, n_total);
      g.noalias() += psi_x.transpose() * psi_x;
      t.noalias() += psi_x.transpose() * augment_values(fy, yb, n_total);
    } else {
      const MlpForward f = net.forward(xb, 2);
      const Mat psi_x = augment_values(f, xb, n_total);
      g.noalias() += psi_x.transpose() * psi_x;
      t.noalias() += psi_x.transpose() * augment_generator(f, *ct, lo, len, d, n_total);
    }
  }
  g /= double(m);
  t /= double(m);
  g = 0.5 * (g + g.transpose()).eval();
  if (gamma < 0) gamma = 1e-8 * g.trace() / n_total;
  Eigen::LLT<Mat> llt(Mat(g + gamma * Mat::Identity(n_total, n_total)));
  if (llt.info() != Eigen::Success)
    throw SingularGramError("learned-dictionary Gram is not positive definite; increase gamma");
  OperatorState st;
  st.g = g;
  st.t = t;
  if (method == DlMethod::SdmdDl)
    st.k = Mat::Identity(n_total, n_total) + data.delta_t * llt.solve(t);
  else
    st.k = llt.solve(t);
  return st;
}

KoopmanApproximation wrap_operator(const OperatorState& st, DlMethod method, double delta_t,
                                   double gamma) {
  KoopmanApproximation op;
  op.k = st.k.cast<Cplx>();
  op.kind = method == DlMethod::SdmdDl    ? "sdmd-semigroup"
            : method == DlMethod::EdmdDl  ? "edmd-semigroup"
                                          : "gedmd-generator";
  op.delta_t = delta_t;
  op.gamma = gamma;
  return op;
}

SpectralResult epoch_spectrum(const OperatorState& st, DlMethod method, double delta_t,
                              double gamma) {
  if (method == DlMethod::SdmdDl) {
    GramPair gp;
    gp.g = st.g.cast<Cplx>();
    gp.h = st.t.cast<Cplx>();
    gp.m = 0;
    gp.gamma = gamma;
    gp.delta_t = delta_t;
    return spectrum(gp);
  }
  const KoopmanApproximation op = wrap_operator(st, method, delta_t, gamma);
  const CMat gc = st.g.cast<Cplx>();
  return operator_spectrum(op, &gc);
}

Vec standardized(const Vec& v) {
  const double mean = v.mean();
  const double var = (v.array() - mean).square().sum() / double(v.size());
  if (!(var > 0)) throw DomainError("undefined standardization: zero variance");
  return ((v.array() - mean) / std::sqrt(var)).matrix();
}

}  // namespace

double mode_similarity(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw InvalidArgument("similarity needs equal lengths");
  if (a.size() < 2) throw InvalidArgument("similarity needs at least two samples");
  const double ma = a.mean(), mb = b.mean();
  const Eigen::ArrayXd da = a.array() - ma;
  const Eigen::ArrayXd db = b.array() - mb;
  const double va = (da * da).sum(), vb = (db * db).sum();
  if (!(va > 0) || !(vb > 0)) throw DomainError("undefined correlation: zero variance");
  return (da * db).sum() / std::sqrt(va * vb);
}

Vec eigenfunction_series(const NetworkDictionary& dict, const SpectralResult& spec, int mode,
                         const Mat& points) {
  if (mode < 0 || mode >= static_cast<int>(spec.mu.size()))
    throw InvalidArgument("eigenfunction mode index out of range");
  const Mat values = dict.batch_values(points);
  const CVec series = values.cast<Cplx>() * spec.coeffs.col(mode);
  return standardized(series.real());
}

int select_epoch(const TrainTrace& trace, const Vec& reference,
                 const std::function<Vec(const EpochRecord&)>& extract) {
  bool any_snapshot = false;
  int best = -1;
  double best_score = -1.0;
  for (const auto& rec : trace.epochs) {
    if (!rec.spectrum && rec.params.is_null()) continue;
    any_snapshot = true;
    double score;
    try {
      score = std::abs(mode_similarity(standardized(extract(rec)), standardized(reference)));
    } catch (const Error&) {
      continue;
    }
    if (score > best_score) {
      best_score = score;
      best = rec.epoch;
    }
  }
  if (!any_snapshot) throw ConfigError("epoch selection needs recorded snapshots");
  if (best < 0) throw ConfigError("epoch selection: no epoch produced a usable series");
  return best;
}

TrainResult train(const SnapshotEnsemble& data, const SdeModel& model, const TrainConfig& cfg,
                  const Mat* score_points, const Vec* score_reference) {
  if (cfg.n_learned < 1) throw InvalidArgument("n_learned must be positive");
  if (cfg.outer_epochs < 1 || cfg.inner_steps < 1)
    throw InvalidArgument("epoch counts must be positive");
  if (cfg.hidden.empty() || cfg.hidden.size() > 2)
    throw InvalidArgument("hidden layout must have one or two layers");
  if (cfg.learning_rate < 0) throw InvalidArgument("learning rate must be nonnegative");
  if (cfg.momentum < 0 || cfg.momentum >= 1) throw InvalidArgument("momentum must be in [0, 1)");
  if (cfg.batch < 0) throw InvalidArgument("batch size must be nonnegative");
  if (data.size() < 2) throw InvalidArgument("training needs at least two snapshot pairs");
  if (!(data.delta_t > 0)) throw InvalidArgument("training data lacks delta_t");
  if ((score_points == nullptr) != (score_reference == nullptr))
    throw InvalidArgument("similarity scoring needs both evaluation points and a reference");
  if (score_points && score_points->cols() != data.dim())
    throw InvalidArgument("scoring points dimension mismatch");

  const std::int64_t m = data.size();
  const bool needs_prime = cfg.method != DlMethod::EdmdDl;
  CoefTables ct;
  if (needs_prime) ct = make_coef_tables(model, data.x);

  MlpSpec spec;
  spec.in_dim = data.dim();
  spec.hidden = cfg.hidden;
  spec.out_dim = cfg.n_learned;
  Mlp net(spec);
  Rng rng(derive_seed(cfg.seed, 0x444C5254u));
  const Vec x_scale =
      ((data.x.rowwise() - data.x.colwise().mean()).array().square().colwise().sum() / double(m))
          .sqrt()
          .matrix()
          .transpose();
  net.init_uniform(rng, x_scale);

  double gamma = cfg.gamma;
  OperatorState st = operator_update(net, data, needs_prime ? &ct : nullptr, cfg.method, gamma);

  const bool scoring = score_points != nullptr;
  Vec reference;
  if (scoring) reference = standardized(*score_reference);

  TrainResult result;
  result.trace.gamma = gamma;
  Vec best_theta;
  int best_epoch = -1;
  double best_score = -1.0;

  MlpGrad velocity = net.zero_grad();
  const Segments full_data = {{0, m}};
  std::int64_t cursor = 0;

  for (int epoch = 0; epoch < cfg.outer_epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = data_pass(net, data, needs_prime ? &ct : nullptr, cfg.method, st.k, gamma,
                         full_data, nullptr);
    if (!std::isfinite(rec.loss))
      throw DivergenceError("training loss diverged at epoch " + std::to_string(epoch) +
                            " (learning rate " + format_g17(cfg.learning_rate) + ")");

    for (int step = 0; step < cfg.inner_steps; ++step) {
      Segments rows;
      if (cfg.batch == 0 || cfg.batch >= m) {
        rows = full_data;
      } else {
        const std::int64_t hi = cursor + cfg.batch;
        if (hi <= m) {
          rows = {{cursor, hi}};
        } else {
          rows = {{cursor, m}, {0, hi - m}};
        }
        cursor = hi % m;
      }
      MlpGrad grad = net.zero_grad();
      data_pass(net, data, needs_prime ? &ct : nullptr, cfg.method, st.k, gamma, rows, &grad);
      if (cfg.momentum > 0) {
        velocity.scale(cfg.momentum);
        velocity.axpy(1.0, grad);
        net.step(cfg.learning_rate, velocity);
      } else {
        net.step(cfg.learning_rate, grad);
      }
      if (!net.flatten().allFinite())
        throw DivergenceError("network parameters diverged at epoch " + std::to_string(epoch) +
                              " (learning rate " + format_g17(cfg.learning_rate) + ")");
    }

    st = operator_update(net, data, needs_prime ? &ct : nullptr, cfg.method, gamma);

    if (cfg.record_snapshots || scoring) {
      const SpectralResult sr = epoch_spectrum(st, cfg.method, data.delta_t, gamma);
      if (cfg.record_snapshots) {
        rec.spectrum = sr;
        rec.params = net.to_json();
      }
      if (scoring) {
        double score = 0.0;
        try {
          const NetworkDictionary probe(net);
          score = std::abs(
              mode_similarity(eigenfunction_series(probe, sr, 1, *score_points), reference));
        } catch (const Error&) {
          score = 0.0;  // degenerate mode; never preferred over a scored epoch
        }
        rec.score = score;
        if (score > best_score) {
          best_score = score;
          best_epoch = epoch;
          best_theta = net.flatten();
        }
      }
    }
    result.trace.epochs.push_back(std::move(rec));
  }

  result.dict = std::make_shared<const NetworkDictionary>(net);
  result.op = wrap_operator(st, cfg.method, data.delta_t, gamma);
  result.spectrum = epoch_spectrum(st, cfg.method, data.delta_t, gamma);

  if (scoring && best_epoch >= 0) {
    Mlp selected = net;
    selected.set_flat(best_theta);
    double gamma_sel = gamma;  // frozen
    const OperatorState st_sel =
        operator_update(selected, data, needs_prime ? &ct : nullptr, cfg.method, gamma_sel);
    result.selected_dict = std::make_shared<const NetworkDictionary>(std::move(selected));
    result.selected_op = wrap_operator(st_sel, cfg.method, data.delta_t, gamma);
    result.selected_spectrum = epoch_spectrum(st_sel, cfg.method, data.delta_t, gamma);
    result.trace.selected_epoch = best_epoch;
    result.trace.selected_score = best_score;
  }
  return result;
}

void write_train_trace_csv(const TrainTrace& trace, const std::filesystem::path& path) {
  Mat rows(trace.epochs.size(), 3);
  for (std::size_t i = 0; i < trace.epochs.size(); ++i) {
    rows(i, 0) = trace.epochs[i].epoch;
    rows(i, 1) = trace.epochs[i].loss;
    rows(i, 2) = trace.epochs[i].score;
  }
  write_matrix_csv(path, {"epoch", "loss", "score"}, rows);
}

}  // namespace sdmd
