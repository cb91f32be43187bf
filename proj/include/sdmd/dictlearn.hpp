#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sdmd/core.hpp"
#include "sdmd/dictionary.hpp"
#include "sdmd/mlp.hpp"
#include "sdmd/simulate.hpp"

namespace sdmd {

// Learned dictionary: the network outputs come first, then one identity
// observable per state axis, then the constant. Total size is
// n_learned + dim + 1, so the span always contains the constant function and
// the state itself.
class NetworkDictionary final : public Dictionary {
 public:
  explicit NetworkDictionary(Mlp net);

  int n_learned() const { return net_.spec().out_dim; }
  const Mlp& net() const { return net_; }

  // Batched real values, one row per sample, columns in dictionary order.
  Mat batch_values(const Mat& x) const;

  CVec eval(const Vec& x) const override;
  CMat jacobian(const Vec& x) const override;
  CMat hessian(const Vec& x) const override;
  json describe() const override;

  json to_json() const;
  static std::shared_ptr<const NetworkDictionary> from_json(const json& j);

 private:
  Mlp net_;
};

enum class DlMethod { SdmdDl, EdmdDl, GedmdDl };

DlMethod parse_dl_method(const std::string& name);
std::string dl_method_name(DlMethod method);

struct TrainConfig {
  DlMethod method = DlMethod::SdmdDl;
  int n_learned = 17;
  std::vector<int> hidden = {50};
  int outer_epochs = 100;
  int inner_steps = 1;      // gradient steps on the parameters per outer epoch
  double learning_rate = 1e-4;
  double momentum = 0.0;
  double gamma = -1.0;      // < 0: resolved from the initial Gram, then frozen
  std::int64_t batch = 0;   // 0 = full batch; otherwise sequential slices
  std::uint64_t seed = 1;
  bool record_snapshots = false;  // keep per-epoch spectra and parameters
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double score = std::numeric_limits<double>::quiet_NaN();
  std::optional<SpectralResult> spectrum;
  json params;  // network snapshot, present when record_snapshots
};

struct TrainTrace {
  std::vector<EpochRecord> epochs;
  double gamma = 0.0;      // the frozen regularization actually used
  int selected_epoch = -1;
  double selected_score = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
  std::shared_ptr<const NetworkDictionary> dict;  // final epoch
  KoopmanApproximation op;
  SpectralResult spectrum;
  TrainTrace trace;
  // Populated when similarity scoring ran: the best-scoring epoch's state.
  std::shared_ptr<const NetworkDictionary> selected_dict;
  std::optional<KoopmanApproximation> selected_op;
  std::optional<SpectralResult> selected_spectrum;
};

// J(theta, K) = |Psi_Y - Psi_X K|_F^2 + gamma |K|_F^2 for the semigroup
// methods; the generator method scores |Psi'_X - Psi_X A|_F^2 + gamma |A|_F^2.
double loss_eval(const Mat& psi_x, const Mat& psi_target, const Mat& k, double gamma);

// Alternating fit: per outer epoch, `inner_steps` gradient steps on the
// network with the operator frozen, then one closed-form operator update.
// The operator is initialized from the initial parameters, so a zero learning
// rate degenerates to the fixed-dictionary solve. When score_points and
// score_reference are given, every epoch's second eigenfunction series is
// scored by |Pearson| against the reference and the best epoch is retained.
TrainResult train(const SnapshotEnsemble& data, const SdeModel& model, const TrainConfig& cfg,
                  const Mat* score_points = nullptr, const Vec* score_reference = nullptr);

// Pearson correlation; throws on zero variance.
double mode_similarity(const Vec& a, const Vec& b);

// Eigenfunction-value series of spectral mode `mode` along the given states,
// real part, standardized to zero mean and unit variance.
Vec eigenfunction_series(const NetworkDictionary& dict, const SpectralResult& spec, int mode,
                         const Mat& points);

// Epoch whose extracted series best matches the reference (|Pearson|, ties ->
// earliest). The extractor sees each recorded epoch; records for which it
// throws are skipped. Errors when the trace has no recorded snapshots.
int select_epoch(const TrainTrace& trace, const Vec& reference,
                 const std::function<Vec(const EpochRecord&)>& extract);

void write_train_trace_csv(const TrainTrace& trace, const std::filesystem::path& path);

}  // namespace sdmd
