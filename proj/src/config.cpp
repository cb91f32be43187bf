#include "sdmd/config.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "sdmd/errors.hpp"

namespace sdmd {

namespace {

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
  if (obj.is_null()) return;
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& item : obj.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* k) {
          return item.key() == k;
        }) == allowed.end()) {
      std::string keys;
      for (const char* k : allowed) keys += std::string(keys.empty() ? "" : ", ") + k;
      throw ConfigError("unknown key \"" + item.key() + "\" in " + where + " (allowed: " + keys +
                        ")");
    }
  }
}

double require_number(const json& obj, const std::string& where, const char* key) {
  if (!obj.contains(key)) throw ConfigError(where + " needs \"" + key + "\"");
  if (!obj.at(key).is_number()) throw ConfigError(where + "." + key + " must be a number");
  return obj.at(key).get<double>();
}

Mat parse_bounds(const json& b, const std::string& where) {
  if (!b.is_array() || b.empty()) throw ConfigError(where + ".bounds must be a non-empty array");
  Mat bounds(b.size(), 2);
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (!b[i].is_array() || b[i].size() != 2)
      throw ConfigError(where + ".bounds entries must be [min, max] pairs");
    bounds(i, 0) = b[i][0].get<double>();
    bounds(i, 1) = b[i][1].get<double>();
    if (!(bounds(i, 0) <= bounds(i, 1)))
      throw ConfigError(where + ".bounds axis " + std::to_string(i) + " has min > max");
  }
  return bounds;
}

}  // namespace

SdeModel parse_model(const json& spec) {
  if (!spec.is_object() || !spec.contains("name"))
    throw ConfigError("model block needs a \"name\"");
  const std::string name = spec.at("name").get<std::string>();
  if (name == "ou") {
    check_keys(spec, "model", {"name", "theta", "mu0", "sigma"});
    return make_ou(require_number(spec, "model", "theta"), spec.value("mu0", 0.0),
                   require_number(spec, "model", "sigma"));
  }
  if (name == "stuart-landau-polar" || name == "stuart-landau-cartesian") {
    check_keys(spec, "model", {"name", "delta", "kappa", "eps", "gamma", "beta"});
    const double delta = require_number(spec, "model", "delta");
    const double kappa = require_number(spec, "model", "kappa");
    const double eps = require_number(spec, "model", "eps");
    const double gamma = require_number(spec, "model", "gamma");
    const double beta = require_number(spec, "model", "beta");
    return name == "stuart-landau-polar"
               ? make_stuart_landau_polar(delta, kappa, eps, gamma, beta)
               : make_stuart_landau_cartesian(delta, kappa, eps, gamma, beta);
  }
  if (name == "triple-well") {
    check_keys(spec, "model", {"name", "sigma"});
    return make_triple_well(require_number(spec, "model", "sigma"));
  }
  if (name == "neural-mass") {
    check_keys(spec, "model",
               {"name", "Delta", "J", "sigma_r", "sigma_v", "input_low", "input_high",
                "stay_prob"});
    NeuralMassParams p;
    p.Delta = spec.value("Delta", p.Delta);
    p.J = spec.value("J", p.J);
    p.sigma_r = spec.value("sigma_r", p.sigma_r);
    p.sigma_v = spec.value("sigma_v", p.sigma_v);
    p.input_low = spec.value("input_low", p.input_low);
    p.input_high = spec.value("input_high", p.input_high);
    p.stay_prob = spec.value("stay_prob", p.stay_prob);
    return make_neural_mass(p);
  }
  throw ConfigError("unknown model name \"" + name + "\"");
}

namespace {

SamplerSpec parse_sampler(const json& spec, int dim) {
  check_keys(spec, "sampler", {"kind", "bounds", "count", "grid_counts"});
  SamplerSpec s;
  const std::string kind = spec.value("kind", "uniform-random");
  if (kind == "uniform-random")
    s.kind = SamplerSpec::Kind::UniformRandom;
  else if (kind == "uniform-grid")
    s.kind = SamplerSpec::Kind::UniformGrid;
  else
    throw ConfigError("sampler.kind must be uniform-random or uniform-grid");
  if (!spec.contains("bounds")) throw ConfigError("sampler needs bounds");
  s.bounds = parse_bounds(spec.at("bounds"), "sampler");
  if (s.bounds.rows() != dim)
    throw ConfigError("sampler.bounds axis count does not match the model dimension");
  if (s.kind == SamplerSpec::Kind::UniformRandom) {
    if (!spec.contains("count")) throw ConfigError("uniform-random sampler needs count");
    s.count = spec.at("count").get<std::int64_t>();
    if (s.count < 1) throw ConfigError("sampler.count must be positive");
  } else {
    if (!spec.contains("grid_counts")) throw ConfigError("uniform-grid sampler needs grid_counts");
    s.grid_counts = spec.at("grid_counts").get<std::vector<int>>();
    if (static_cast<int>(s.grid_counts.size()) != dim)
      throw ConfigError("sampler.grid_counts length does not match the model dimension");
    for (int c : s.grid_counts)
      if (c < 1) throw ConfigError("sampler.grid_counts entries must be positive");
  }
  return s;
}

EvolveSpec parse_evolve(const json& spec) {
  check_keys(spec, "evolve", {"delta_t", "substeps", "n_snapshots", "store_paths"});
  EvolveSpec e;
  e.delta_t = require_number(spec, "evolve", "delta_t");
  e.substeps = spec.value("substeps", 1);
  e.n_snapshots = spec.value("n_snapshots", 1);
  e.store_paths = spec.value("store_paths", false);
  if (!(e.delta_t > 0)) throw ConfigError("evolve.delta_t must be positive");
  if (e.substeps < 1) throw ConfigError("evolve.substeps must be positive");
  if (e.n_snapshots < 1) throw ConfigError("evolve.n_snapshots must be positive");
  return e;
}

TrainConfig parse_train(const json& spec, double top_gamma, std::uint64_t seed) {
  check_keys(spec, "train",
             {"n_learned", "hidden", "outer_epochs", "inner_steps", "learning_rate", "momentum",
              "batch", "record_snapshots", "gamma"});
  TrainConfig t;
  t.n_learned = spec.value("n_learned", t.n_learned);
  if (spec.contains("hidden")) t.hidden = spec.at("hidden").get<std::vector<int>>();
  t.outer_epochs = spec.value("outer_epochs", t.outer_epochs);
  t.inner_steps = spec.value("inner_steps", t.inner_steps);
  t.learning_rate = spec.value("learning_rate", t.learning_rate);
  t.momentum = spec.value("momentum", t.momentum);
  t.batch = spec.value("batch", t.batch);
  t.record_snapshots = spec.value("record_snapshots", t.record_snapshots);
  t.gamma = spec.value("gamma", top_gamma);
  t.seed = seed;
  return t;
}

CoefConfig parse_coef(const json& spec, std::uint64_t seed) {
  check_keys(spec, "coef",
             {"kind", "bins_per_axis", "network_hidden", "network_epochs", "network_lr"});
  CoefConfig c;
  c.kind = spec.value("kind", c.kind);
  c.bins_per_axis = spec.value("bins_per_axis", c.bins_per_axis);
  c.network_hidden = spec.value("network_hidden", c.network_hidden);
  c.network_epochs = spec.value("network_epochs", c.network_epochs);
  c.network_lr = spec.value("network_lr", c.network_lr);
  c.seed = seed;
  return c;
}

const std::set<std::string> kExperiments = {"ou",           "stuart-landau", "triple-well",
                                            "neural-mass",  "convergence-m", "convergence-dt",
                                            "convergence-N", "custom"};

const std::set<std::string> kMethods = {"sdmd", "edmd", "gedmd", "sdmd-dl", "edmd-dl", "gedmd-dl"};

}  // namespace

json experiment_preset(const std::string& experiment) {
  const double pi = std::numbers::pi;
  if (experiment == "ou") {
    return {{"experiment", "ou"},
            {"model", {{"name", "ou"}, {"theta", 1.0}, {"mu0", 0.0}, {"sigma", 0.1}}},
            {"sampler",
             {{"kind", "uniform-random"}, {"bounds", {{-2.0, 2.0}}}, {"count", 4000}}},
            {"evolve", {{"delta_t", 0.1}, {"substeps", 10}, {"n_snapshots", 1}}},
            {"dictionary", {{"family", "monomial"}, {"max_degree", 5}}},
            {"method", "sdmd"},
            {"train",
             {{"n_learned", 18},
              {"hidden", {100}},
              {"outer_epochs", 150},
              {"inner_steps", 2},
              {"learning_rate", 1e-7}}},
            {"reference_modes", {{0, 0}, {0, 1}, {0, 2}, {0, 3}, {0, 4}, {0, 5}}}};
  }
  if (experiment == "stuart-landau") {
    json modes = json::array();
    for (int n = -5; n <= 5; ++n)
      if (n != 0) modes.push_back({0, n});
    return {{"experiment", "stuart-landau"},
            {"model",
             {{"name", "stuart-landau-polar"},
              {"delta", 0.25},
              {"kappa", 1.0},
              {"eps", 0.05},
              {"gamma", 1.0},
              {"beta", 1.0}}},
            {"sampler",
             {{"kind", "uniform-grid"},
              {"bounds", {{0.4, 0.8}, {-pi, pi}}},
              {"grid_counts", {20, 20}}}},
            {"evolve", {{"delta_t", 0.1}, {"substeps", 10000}, {"n_snapshots", 1}}},
            {"dictionary",
             {{"family", "fourier"},
              {"angular_max", 10},
              {"radial_max", 6},
              {"r_min", 0.3},
              {"r_max", 0.9}}},
            {"method", "sdmd"},
            {"reference_modes", modes}};
  }
  if (experiment == "triple-well") {
    return {{"experiment", "triple-well"},
            {"model", {{"name", "triple-well"}, {"sigma", 1.09}}},
            {"sampler",
             {{"kind", "uniform-grid"},
              {"bounds", {{-2.0, 2.0}, {-1.0, 2.0}}},
              {"grid_counts", {35, 35}}}},
            {"evolve", {{"delta_t", 0.1}, {"substeps", 100}, {"n_snapshots", 1}}},
            {"method", "sdmd-dl"},
            {"train",
             {{"n_learned", 7},
              {"hidden", {50}},
              {"outer_epochs", 200},
              {"inner_steps", 2},
              {"learning_rate", 1e-7}}},
            {"eigenfunction_grid",
             {{"nx", 100}, {"ny", 75}, {"bounds", {{-2.0, 2.0}, {-1.0, 2.0}}}}}};
  }
  if (experiment == "neural-mass") {
    return {{"experiment", "neural-mass"},
            {"model",
             {{"name", "neural-mass"},
              {"Delta", 1.0},
              {"J", 15.0},
              {"sigma_r", 0.01},
              {"sigma_v", 0.01},
              {"input_low", -10.0},
              {"input_high", -2.0},
              {"stay_prob", 0.999}}},
            {"sampler",
             {{"kind", "uniform-grid"},
              {"bounds", {{1.0, 1.0}, {-1.0, -1.0}}},
              {"grid_counts", {1, 1}}}},
            {"evolve", {{"delta_t", 0.01}, {"substeps", 1}, {"n_snapshots", 60000}}},
            {"duration", 600.0},
            {"methods", {"sdmd-dl", "edmd-dl"}},
            {"method", "sdmd-dl"},
            {"coefficients", "estimated"},
            {"train",
             {{"n_learned", 25},
              {"hidden", {50, 50}},
              {"outer_epochs", 300},
              {"inner_steps", 2},
              {"learning_rate", 3e-7}}}};
  }
  if (experiment == "convergence-m") {
    return {{"experiment", "convergence-m"},
            {"model", {{"name", "ou"}, {"theta", 1.0}, {"mu0", 0.0}, {"sigma", 0.1}}},
            {"sampler",
             {{"kind", "uniform-random"}, {"bounds", {{-2.0, 2.0}}}, {"count", 1000}}},
            {"evolve", {{"delta_t", 0.1}, {"substeps", 10}, {"n_snapshots", 1}}},
            {"dictionary", {{"family", "monomial"}, {"max_degree", 3}}},
            {"method", "sdmd"},
            {"sweep", {{"m_values", {1000, 4000, 16000}}, {"trials", 50}}}};
  }
  if (experiment == "convergence-dt") {
    return {{"experiment", "convergence-dt"},
            {"model", {{"name", "ou"}, {"theta", 1.0}, {"mu0", 0.0}, {"sigma", 0.1}}},
            {"sampler",
             {{"kind", "uniform-random"}, {"bounds", {{-2.0, 2.0}}}, {"count", 16}}},
            {"evolve", {{"delta_t", 0.1}, {"substeps", 1}, {"n_snapshots", 1}}},
            {"dictionary", {{"family", "monomial"}, {"max_degree", 2}}},
            {"method", "sdmd"},
            {"sweep", {{"dt_values", {1e-3, 3e-3, 1e-2, 3e-2, 1e-1}}}}};
  }
  if (experiment == "convergence-N") {
    return {{"experiment", "convergence-N"},
            {"model", {{"name", "ou"}, {"theta", 1.0}, {"mu0", 0.0}, {"sigma", 0.1}}},
            {"sampler",
             {{"kind", "uniform-random"}, {"bounds", {{-2.0, 2.0}}}, {"count", 4000}}},
            {"evolve", {{"delta_t", 0.1}, {"substeps", 10}, {"n_snapshots", 1}}},
            {"dictionary", {{"family", "monomial"}, {"max_degree", 2}}},
            {"method", "edmd"},
            {"sweep", {{"degrees", {2, 3, 4, 5, 6}}, {"trials", 8}}}};
  }
  if (experiment == "custom") return json::object();
  throw ConfigError("unknown experiment \"" + experiment + "\"");
}

ExperimentConfig parse_config(const json& user) {
  if (!user.is_object()) throw ConfigError("config must be a JSON object");
  const std::string experiment = user.value("experiment", "custom");
  if (!kExperiments.count(experiment))
    throw ConfigError("unknown experiment \"" + experiment + "\"");

  json doc = experiment_preset(experiment);
  doc.merge_patch(user);

  check_keys(doc, "config",
             {"experiment", "seed", "output", "threads", "method", "methods", "gamma",
              "coefficients", "coef", "model", "sampler", "evolve", "dictionary", "train",
              "sweep", "eigenfunction_grid", "reference_modes", "duration", "data_dir"});

  ExperimentConfig cfg;
  cfg.experiment = experiment;
  cfg.seed = doc.value("seed", 1ull);
  cfg.output = doc.value("output", std::string("out/") + experiment);
  cfg.threads = doc.value("threads", 0);
  if (cfg.threads < 0) throw ConfigError("threads must be nonnegative");

  cfg.method = doc.value("method", "sdmd");
  if (!kMethods.count(cfg.method)) throw ConfigError("unknown method \"" + cfg.method + "\"");
  if (doc.contains("methods")) {
    cfg.methods = doc.at("methods").get<std::vector<std::string>>();
    for (const auto& m : cfg.methods)
      if (!kMethods.count(m)) throw ConfigError("unknown method \"" + m + "\" in methods");
  }

  cfg.gamma = doc.value("gamma", -1.0);
  cfg.coefficients = doc.value("coefficients", "analytic");
  if (cfg.coefficients != "analytic" && cfg.coefficients != "estimated")
    throw ConfigError("coefficients must be \"analytic\" or \"estimated\"");
  cfg.coef = parse_coef(doc.value("coef", json::object()), cfg.seed);

  if (!doc.contains("model")) throw ConfigError("config needs a model block");
  cfg.model_spec = doc.at("model");
  cfg.model = parse_model(cfg.model_spec);

  if (!doc.contains("sampler")) throw ConfigError("config needs a sampler block");
  cfg.sampler = parse_sampler(doc.at("sampler"), cfg.model.dim);
  if (!doc.contains("evolve")) throw ConfigError("config needs an evolve block");
  cfg.evolve = parse_evolve(doc.at("evolve"));

  cfg.dictionary = doc.value("dictionary", json());
  if (!cfg.dictionary.is_null())
    check_keys(cfg.dictionary, "dictionary",
               {"family", "max_degree", "max_order", "center", "scale", "angular_max",
                "radial_max", "r_min", "r_max", "centers", "widths"});

  cfg.train = parse_train(doc.value("train", json::object()), cfg.gamma, cfg.seed);

  cfg.sweep = doc.value("sweep", json());
  if (!cfg.sweep.is_null())
    check_keys(cfg.sweep, "sweep", {"m_values", "trials", "dt_values", "degrees"});
  cfg.eigenfunction_grid = doc.value("eigenfunction_grid", json());
  if (!cfg.eigenfunction_grid.is_null())
    check_keys(cfg.eigenfunction_grid, "eigenfunction_grid", {"nx", "ny", "bounds"});

  if (doc.contains("reference_modes")) {
    for (const auto& mode : doc.at("reference_modes")) {
      if (!mode.is_array() || mode.size() != 2)
        throw ConfigError("reference_modes entries must be [l, n] pairs");
      cfg.reference_modes.push_back({mode[0].get<int>(), mode[1].get<int>()});
    }
  }

  cfg.duration = doc.value("duration", 600.0);
  if (!(cfg.duration > 0)) throw ConfigError("duration must be positive");
  cfg.data_dir = doc.value("data_dir", std::string());

  cfg.raw = doc;
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_json_file(path));
}

}  // namespace sdmd
