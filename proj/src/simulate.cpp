#include "sdmd/simulate.hpp"

#include <cmath>

#include "sdmd/errors.hpp"
#include "sdmd/threads.hpp"

namespace sdmd {

namespace {

// States beyond this magnitude terminate the run instead of being clipped.
constexpr double kOverflowLimit = 1e12;

constexpr std::uint64_t kInitStream = 0x494E4954u;  // distinct stream for initial draws

void check_bounds(const Mat& bounds, const char* who) {
  if (bounds.cols() != 2 || bounds.rows() < 1)
    throw InvalidArgument(std::string(who) + ": bounds must be dim x 2");
  // lo == hi is allowed: the axis degenerates to a single point.
  for (Eigen::Index i = 0; i < bounds.rows(); ++i)
    if (!(bounds(i, 0) <= bounds(i, 1)))
      throw InvalidArgument(std::string(who) + ": inverted axis range");
}

}  // namespace

json SamplerSpec::describe() const {
  json j;
  j["kind"] = kind == Kind::UniformGrid ? "uniform-grid" : "uniform-random";
  json b = json::array();
  for (Eigen::Index i = 0; i < bounds.rows(); ++i)
    b.push_back({bounds(i, 0), bounds(i, 1)});
  j["bounds"] = b;
  if (kind == Kind::UniformGrid)
    j["grid_counts"] = grid_counts;
  else
    j["count"] = count;
  return j;
}

Mat initial_states(const SamplerSpec& spec, std::uint64_t seed) {
  check_bounds(spec.bounds, "initial_states");
  const int dim = static_cast<int>(spec.bounds.rows());
  if (spec.kind == SamplerSpec::Kind::UniformGrid) {
    if (static_cast<int>(spec.grid_counts.size()) != dim)
      throw InvalidArgument("initial_states: grid_counts size must match dim");
    std::int64_t total = 1;
    for (int c : spec.grid_counts) {
      if (c < 1) throw InvalidArgument("initial_states: grid counts must be >= 1");
      total *= c;
    }
    Mat out(total, dim);
    for (std::int64_t idx = 0; idx < total; ++idx) {
      std::int64_t rem = idx;
      for (int ax = dim - 1; ax >= 0; --ax) {
        int c = spec.grid_counts[ax];
        int pos = static_cast<int>(rem % c);
        rem /= c;
        double lo = spec.bounds(ax, 0), hi = spec.bounds(ax, 1);
        out(idx, ax) = (c == 1) ? 0.5 * (lo + hi)
                                : lo + (hi - lo) * double(pos) / double(c - 1);
      }
    }
    return out;
  }
  if (spec.count < 1) throw InvalidArgument("initial_states: count must be >= 1");
  Rng rng(derive_seed(seed, kInitStream));
  Mat out(spec.count, dim);
  for (std::int64_t i = 0; i < spec.count; ++i)
    for (int ax = 0; ax < dim; ++ax)
      out(i, ax) = spec.bounds(ax, 0) +
                   (spec.bounds(ax, 1) - spec.bounds(ax, 0)) * rng.uniform();
  return out;
}

Vec markov_input_series(const MarkovInputSpec& spec, std::int64_t n, Rng& rng) {
  if (n < 1) throw InvalidArgument("markov_input_series: n must be >= 1");
  if (!(spec.stay_prob > 0 && spec.stay_prob < 1))
    throw InvalidArgument("markov_input_series: stay_prob must be in (0, 1)");
  Vec series(n);
  bool low = rng.uniform() < 0.5;
  series(0) = low ? spec.low : spec.high;
  for (std::int64_t k = 1; k < n; ++k) {
    if (rng.uniform() >= spec.stay_prob) low = !low;
    series(k) = low ? spec.low : spec.high;
  }
  return series;
}

Mat simulate_path(const SdeModel& model, const Vec& x0, double h, std::int64_t n_steps,
                  Rng& rng, Vec* latent) {
  if (x0.size() != model.dim) throw InvalidArgument("simulate_path: wrong x0 dimension");
  if (!(h > 0)) throw InvalidArgument("simulate_path: step size must be positive");
  if (n_steps < 0) throw InvalidArgument("simulate_path: negative step count");
  const bool with_input = model.has_input();
  if (with_input && !model.drift_with_input)
    throw InvalidArgument("simulate_path: input model lacks drift_with_input");
  if (!with_input && !model.drift)
    throw InvalidArgument("simulate_path: model lacks drift");

  Mat path(n_steps + 1, model.dim);
  path.row(0) = x0.transpose();
  if (latent) latent->resize(n_steps + 1);

  double input = 0.0;
  bool low = false;
  if (with_input) {
    low = rng.uniform() < 0.5;
    input = low ? model.input->low : model.input->high;
  }
  if (latent) (*latent)(0) = input;

  const double sqrt_h = std::sqrt(h);
  Vec x = x0, noise(model.noise_dim);
  for (std::int64_t s = 0; s < n_steps; ++s) {
    Vec b = with_input ? model.drift_with_input(x, input) : model.drift(x);
    Mat sig = model.diffusion(x);
    for (int k = 0; k < model.noise_dim; ++k) noise(k) = rng.normal();
    x = x + h * b + sqrt_h * (sig * noise);
    if (!x.allFinite() || x.cwiseAbs().maxCoeff() > kOverflowLimit)
      throw OverflowError("state overflow at step " + std::to_string(s + 1));
    if (with_input) {
      if (rng.uniform() >= model.input->stay_prob) low = !low;
      input = low ? model.input->low : model.input->high;
    }
    path.row(s + 1) = x.transpose();
    if (latent) (*latent)(s + 1) = input;
  }
  return path;
}

SnapshotEnsemble generate_ensemble(const SdeModel& model, const SamplerSpec& sampler,
                                   const EvolveSpec& evolve, std::uint64_t seed) {
  if (evolve.substeps < 1) throw InvalidArgument("generate_ensemble: substeps must be >= 1");
  if (evolve.n_snapshots < 1)
    throw InvalidArgument("generate_ensemble: n_snapshots must be >= 1");
  if (!(evolve.delta_t > 0)) throw InvalidArgument("generate_ensemble: delta_t must be positive");

  const Mat starts = initial_states(sampler, seed);
  const std::int64_t n_init = starts.rows();
  const double h = evolve.delta_t / evolve.substeps;
  const std::int64_t steps_per_path =
      static_cast<std::int64_t>(evolve.substeps) * evolve.n_snapshots;

  SnapshotEnsemble ens;
  ens.delta_t = evolve.delta_t;
  ens.substeps = evolve.substeps;
  ens.seed = seed;
  ens.model_name = model.name;
  ens.model_params = model.params;
  ens.provenance = {{"sampler", sampler.describe()},
                    {"evolve",
                     {{"delta_t", evolve.delta_t},
                      {"substeps", evolve.substeps},
                      {"n_snapshots", evolve.n_snapshots},
                      {"store_paths", evolve.store_paths}}}};

  const std::int64_t m = n_init * evolve.n_snapshots;
  ens.x.resize(m, model.dim);
  ens.y.resize(m, model.dim);
  if (model.has_input()) ens.latent_input = Vec(m);
  if (evolve.store_paths) ens.paths = std::vector<Mat>(n_init);

  // One derived seed per initial state; block boundaries never affect content.
  parallel_blocks(n_init, 64, [&](std::int64_t begin, std::int64_t end, int) {
    for (std::int64_t k = begin; k < end; ++k) {
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
      Vec latent;
      Mat path;
      try {
        path = simulate_path(model, starts.row(k).transpose(), h, steps_per_path, rng,
                             model.has_input() ? &latent : nullptr);
      } catch (const OverflowError& e) {
        throw OverflowError("trajectory " + std::to_string(k) + ": " + e.what());
      }
      for (int snap = 0; snap < evolve.n_snapshots; ++snap) {
        const std::int64_t row = k * evolve.n_snapshots + snap;
        const std::int64_t i0 = static_cast<std::int64_t>(snap) * evolve.substeps;
        ens.x.row(row) = path.row(i0);
        ens.y.row(row) = path.row(i0 + evolve.substeps);
        if (ens.latent_input) (*ens.latent_input)(row) = latent(i0);
      }
      if (ens.paths) (*ens.paths)[k] = std::move(path);
    }
  });
  return ens;
}

SnapshotEnsemble pairs_from_paths(const SnapshotEnsemble& ens, int lag) {
  if (!ens.paths) throw InvalidArgument("pairs_from_paths: ensemble has no stored paths");
  if (lag < 1) throw InvalidArgument("pairs_from_paths: lag must be >= 1");
  const auto& paths = *ens.paths;
  const double h = ens.delta_t / ens.substeps;

  std::int64_t m = 0;
  for (const auto& p : paths) {
    if (p.rows() <= lag)
      throw InvalidArgument("pairs_from_paths: paths shorter than requested lag");
    m += p.rows() - lag;
  }
  SnapshotEnsemble out;
  out.delta_t = h * lag;
  out.substeps = lag;
  out.seed = ens.seed;
  out.model_name = ens.model_name;
  out.model_params = ens.model_params;
  out.provenance = ens.provenance;
  out.provenance["repaired_lag"] = lag;
  out.x.resize(m, ens.dim());
  out.y.resize(m, ens.dim());
  std::int64_t row = 0;
  for (const auto& p : paths) {
    for (Eigen::Index i = 0; i + lag < p.rows(); ++i, ++row) {
      out.x.row(row) = p.row(i);
      out.y.row(row) = p.row(i + lag);
    }
  }
  return out;
}

namespace {

std::vector<std::string> axis_header(int dim, const char* prefix) {
  std::vector<std::string> h;
  h.reserve(dim);
  for (int i = 0; i < dim; ++i) h.push_back(std::string(prefix) + std::to_string(i));
  return h;
}

}  // namespace

void export_ensemble(const SnapshotEnsemble& ens, const std::filesystem::path& dir,
                     const std::string& stem) {
  std::filesystem::create_directories(dir);
  const auto header = axis_header(ens.dim(), "x");
  const auto x_name = stem + "_x.csv";
  const auto y_name = stem + "_y.csv";
  write_matrix_csv(dir / x_name, header, ens.x);
  write_matrix_csv(dir / y_name, header, ens.y);
  json files = {{"x", x_name}, {"y", y_name}};
  json hashes = {{x_name, git_blob_hash_file(dir / x_name)},
                 {y_name, git_blob_hash_file(dir / y_name)}};
  if (ens.latent_input) {
    const auto l_name = stem + "_input.csv";
    write_matrix_csv(dir / l_name, {"input"}, Mat(*ens.latent_input));
    files["input"] = l_name;
    hashes[l_name] = git_blob_hash_file(dir / l_name);
  }
  json meta = {
      {"format", "sdmd-ensemble/1"},
      {"model", {{"name", ens.model_name}, {"params", ens.model_params}}},
      {"delta_t", ens.delta_t},
      {"substeps", ens.substeps},
      {"seed", ens.seed},
      {"m", ens.size()},
      {"dim", ens.dim()},
      {"files", files},
      {"content_hashes", hashes},
      {"provenance", ens.provenance},
  };
  write_json_file(dir / (stem + ".json"), meta);
}

SnapshotEnsemble import_ensemble(const std::filesystem::path& dir, const std::string& stem) {
  const json meta = read_json_file(dir / (stem + ".json"));
  if (meta.value("format", "") != "sdmd-ensemble/1")
    throw Error("import_ensemble: unknown metadata format in " + (dir / (stem + ".json")).string());
  SnapshotEnsemble ens;
  ens.delta_t = meta.at("delta_t").get<double>();
  ens.substeps = meta.at("substeps").get<int>();
  ens.seed = meta.at("seed").get<std::uint64_t>();
  ens.model_name = meta.at("model").at("name").get<std::string>();
  ens.model_params = meta.at("model").at("params");
  ens.provenance = meta.value("provenance", json::object());

  const auto& files = meta.at("files");
  auto load = [&](const std::string& key) {
    const auto name = files.at(key).get<std::string>();
    if (meta.contains("content_hashes")) {
      const auto want = meta["content_hashes"].value(name, "");
      if (!want.empty() && git_blob_hash_file(dir / name) != want)
        throw Error("import_ensemble: content hash mismatch for " + name);
    }
    return read_matrix_csv(dir / name);
  };
  auto xt = load("x");
  auto yt = load("y");
  ens.x = xt.values;
  ens.y = yt.values;
  if (ens.x.rows() != ens.y.rows() || ens.x.cols() != ens.y.cols())
    throw Error("import_ensemble: x/y shape mismatch");
  if (ens.x.rows() != meta.at("m").get<std::int64_t>() ||
      ens.x.cols() != meta.at("dim").get<int>())
    throw Error("import_ensemble: data does not match metadata shape");
  if (!ens.x.allFinite() || !ens.y.allFinite())
    throw Error("import_ensemble: non-finite samples");
  if (files.contains("input")) {
    auto lt = load("input");
    if (lt.values.rows() != ens.x.rows()) throw Error("import_ensemble: input length mismatch");
    ens.latent_input = Vec(lt.values.col(0));
  }
  return ens;
}

}  // namespace sdmd
