#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>

#include "sdmd/coef.hpp"
#include "sdmd/config.hpp"
#include "sdmd/core.hpp"
#include "sdmd/dictionary.hpp"
#include "sdmd/dictlearn.hpp"
#include "sdmd/errors.hpp"
#include "sdmd/experiments.hpp"
#include "sdmd/models.hpp"
#include "sdmd/simulate.hpp"
#include "sdmd/threads.hpp"

namespace py = pybind11;
using namespace sdmd;

namespace {

json json_from_py(const py::object& obj) {
  const py::object dumps = py::module_::import("json").attr("dumps");
  return json::parse(dumps(obj).cast<std::string>());
}

py::object json_to_py(const json& j) {
  const py::object loads = py::module_::import("json").attr("loads");
  return loads(j.dump());
}

// The C++ factories hand out shared_ptr<const Dictionary>; python bindings
// use the non-const holder, so every export goes through this cast. The
// wrapped objects are never mutated through the python side.
std::shared_ptr<Dictionary> unconst(DictionaryPtr p) {
  return std::const_pointer_cast<Dictionary>(std::move(p));
}

std::shared_ptr<NetworkDictionary> unconst_net(std::shared_ptr<const NetworkDictionary> p) {
  return std::const_pointer_cast<NetworkDictionary>(std::move(p));
}

SamplerSpec sampler_from_parts(const Mat& bounds, std::int64_t count,
                               const std::vector<int>& grid_counts) {
  SamplerSpec s;
  s.bounds = bounds;
  if (!grid_counts.empty()) {
    s.kind = SamplerSpec::Kind::UniformGrid;
    s.grid_counts = grid_counts;
  } else {
    s.kind = SamplerSpec::Kind::UniformRandom;
    s.count = count;
  }
  return s;
}

std::vector<ModeIndex> modes_from_pairs(const std::vector<std::pair<int, int>>& pairs) {
  std::vector<ModeIndex> modes;
  modes.reserve(pairs.size());
  for (const auto& [l, n] : pairs) modes.push_back({l, n});
  return modes;
}

EigConversion conv_of(const std::string& name) {
  return name == "exponential" ? EigConversion::Exponential : EigConversion::Linearized;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "stochastic Koopman spectral estimation core";

  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<InvariantFailure>(m, "InvariantFailure");
  static py::exception<Error> base_error(m, "SdmdError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError&) {
      throw;  // handled by its registered translator
    } catch (const InvariantFailure&) {
      throw;
    } catch (const Error& e) {
      py::set_error(base_error, e.what());
    }
  });

  py::class_<SdeModel>(m, "SdeModel")
      .def_readonly("name", &SdeModel::name)
      .def_readonly("dim", &SdeModel::dim)
      .def_readonly("noise_dim", &SdeModel::noise_dim)
      .def_property_readonly("params", [](const SdeModel& s) { return json_to_py(s.params); })
      .def("drift", [](const SdeModel& s, const Vec& x) { return s.drift(x); }, py::arg("x"))
      .def("diffusion", [](const SdeModel& s, const Vec& x) { return s.diffusion(x); },
           py::arg("x"))
      .def("__repr__", [](const SdeModel& s) {
        return "<SdeModel " + s.name + " dim=" + std::to_string(s.dim) + ">";
      });

  m.def("make_ou", &make_ou, py::arg("theta"), py::arg("mu0"), py::arg("sigma"));
  m.def("make_stuart_landau_polar", &make_stuart_landau_polar, py::arg("delta"),
        py::arg("kappa"), py::arg("eps"), py::arg("gamma"), py::arg("beta"));
  m.def("make_stuart_landau_cartesian", &make_stuart_landau_cartesian, py::arg("delta"),
        py::arg("kappa"), py::arg("eps"), py::arg("gamma"), py::arg("beta"));
  m.def("make_triple_well", &make_triple_well, py::arg("sigma"));
  m.def(
      "make_neural_mass",
      [](double Delta, double J, double sigma_r, double sigma_v, double input_low,
         double input_high, double stay_prob) {
        NeuralMassParams p;
        p.Delta = Delta;
        p.J = J;
        p.sigma_r = sigma_r;
        p.sigma_v = sigma_v;
        p.input_low = input_low;
        p.input_high = input_high;
        p.stay_prob = stay_prob;
        return make_neural_mass(p);
      },
      py::arg("Delta") = 1.0, py::arg("J") = 15.0, py::arg("sigma_r") = 0.01,
      py::arg("sigma_v") = 0.01, py::arg("input_low") = -10.0, py::arg("input_high") = -2.0,
      py::arg("stay_prob") = 0.9999);
  m.def(
      "model_from_spec", [](const py::dict& spec) { return parse_model(json_from_py(spec)); },
      py::arg("spec"),
      "Build a model from a config-style dict, e.g. {'name': 'ou', 'theta': 1.0, ...}");

  m.def(
      "analytic_generator_eigs",
      [](const SdeModel& model, const std::vector<std::pair<int, int>>& modes) {
        return analytic_generator_eigs(model, modes_from_pairs(modes));
      },
      py::arg("model"), py::arg("modes"),
      "Known generator eigenvalues for (l, n) mode labels.");
  m.def(
      "analytic_eigenfunction_eval",
      [](const SdeModel& model, int l, int n, const Mat& points) {
        return analytic_eigenfunction_eval(model, {l, n}, points);
      },
      py::arg("model"), py::arg("l"), py::arg("n"), py::arg("points"));

  py::class_<SnapshotEnsemble>(m, "SnapshotEnsemble")
      .def_readonly("x", &SnapshotEnsemble::x)
      .def_readonly("y", &SnapshotEnsemble::y)
      .def_readonly("delta_t", &SnapshotEnsemble::delta_t)
      .def_readonly("substeps", &SnapshotEnsemble::substeps)
      .def_readonly("seed", &SnapshotEnsemble::seed)
      .def_readonly("model_name", &SnapshotEnsemble::model_name)
      .def_property_readonly("latent_input",
                             [](const SnapshotEnsemble& e) -> py::object {
                               if (!e.latent_input) return py::none();
                               return py::cast(*e.latent_input);
                             })
      .def_property_readonly("size", &SnapshotEnsemble::size)
      .def_property_readonly("dim", &SnapshotEnsemble::dim)
      .def("__repr__", [](const SnapshotEnsemble& e) {
        return "<SnapshotEnsemble m=" + std::to_string(e.size()) +
               " dim=" + std::to_string(e.dim()) + ">";
      });

  m.def(
      "generate_ensemble",
      [](const SdeModel& model, const Mat& bounds, std::int64_t count,
         const std::vector<int>& grid_counts, double delta_t, int substeps, int n_snapshots,
         std::uint64_t seed) {
        EvolveSpec ev;
        ev.delta_t = delta_t;
        ev.substeps = substeps;
        ev.n_snapshots = n_snapshots;
        return generate_ensemble(model, sampler_from_parts(bounds, count, grid_counts), ev,
                                 seed);
      },
      py::arg("model"), py::arg("bounds"), py::arg("count") = 0,
      py::arg("grid_counts") = std::vector<int>{}, py::arg("delta_t") = 0.1,
      py::arg("substeps") = 1, py::arg("n_snapshots") = 1, py::arg("seed") = 1,
      "Pooled snapshot pairs from uniform-random starts (count) or a uniform grid "
      "(grid_counts), evolved by Euler-Maruyama.");
  m.def("export_ensemble", &export_ensemble, py::arg("ensemble"), py::arg("dir"),
        py::arg("stem") = "ensemble");
  m.def("import_ensemble", &import_ensemble, py::arg("dir"), py::arg("stem") = "ensemble");

  py::class_<Dictionary, std::shared_ptr<Dictionary>>(m, "Dictionary")
      .def_property_readonly("size", &Dictionary::size)
      .def_property_readonly("dim", &Dictionary::dim)
      .def_property_readonly("family", &Dictionary::family)
      .def("eval", &Dictionary::eval, py::arg("x"))
      .def("jacobian", &Dictionary::jacobian, py::arg("x"))
      .def("hessian", &Dictionary::hessian, py::arg("x"))
      .def("describe", [](const Dictionary& d) { return json_to_py(d.describe()); })
      .def("__repr__", [](const Dictionary& d) {
        return "<Dictionary " + d.family() + " N=" + std::to_string(d.size()) + ">";
      });

  m.def("make_monomial",
        [](int dim, int max_degree) { return unconst(make_monomial(dim, max_degree)); },
        py::arg("dim"), py::arg("max_degree"));
  m.def("make_hermite",
        [](int max_order, double center, double scale) {
          return unconst(make_hermite(max_order, center, scale));
        },
        py::arg("max_order"), py::arg("center") = 0.0, py::arg("scale") = 1.0);
  m.def("make_fourier",
        [](int angular_max, int radial_max, double r_min, double r_max) {
          return unconst(make_fourier(angular_max, radial_max, r_min, r_max));
        },
        py::arg("angular_max"), py::arg("radial_max"), py::arg("r_min"), py::arg("r_max"));
  m.def("make_gaussian_rbf",
        [](const Mat& centers, const Vec& widths) {
          return unconst(make_gaussian_rbf(centers, widths));
        },
        py::arg("centers"), py::arg("widths"));
  m.def("make_dictionary",
        [](const py::dict& spec, int state_dim) {
          return unconst(make_dictionary(json_from_py(spec), state_dim));
        },
        py::arg("spec"), py::arg("state_dim"));

  m.def("evaluate_dictionary", &evaluate_dictionary, py::arg("dictionary"), py::arg("X"),
        "Psi_X: row i holds the dictionary values at row i of X.");
  m.def("generator_matrix", &generator_matrix, py::arg("dictionary"), py::arg("model"),
        py::arg("X"), "Row-per-sample generator actions (drift plus diffusion curvature).");

  py::class_<GramPair>(m, "GramPair")
      .def_readonly("g", &GramPair::g)
      .def_readonly("h", &GramPair::h)
      .def_readonly("m", &GramPair::m)
      .def_readonly("gamma", &GramPair::gamma)
      .def_readonly("delta_t", &GramPair::delta_t);

  m.def("default_gamma", &default_gamma, py::arg("g"));
  m.def("make_gram", &make_gram, py::arg("psi_x"), py::arg("psi_prime_x"), py::arg("delta_t"),
        py::arg("gamma") = -1.0,
        "G = Psi_X^* Psi_X / m and H = Psi_X^* Psi'_X / m with ridge checking.");

  py::class_<KoopmanApproximation>(m, "KoopmanApproximation")
      .def_readonly("k", &KoopmanApproximation::k)
      .def_readonly("kind", &KoopmanApproximation::kind)
      .def_readonly("delta_t", &KoopmanApproximation::delta_t)
      .def_readonly("gamma", &KoopmanApproximation::gamma);

  m.def("sdmd_operator", &sdmd_operator, py::arg("gram"),
        "K = I + delta_t (G + gamma I)^{-1} H via Cholesky solve.");
  m.def("edmd_operator", &edmd_operator, py::arg("psi_x"), py::arg("psi_y"), py::arg("delta_t"),
        py::arg("gamma") = -1.0);
  m.def("gedmd_operator", &gedmd_operator, py::arg("psi_x"), py::arg("psi_prime_x"),
        py::arg("gamma") = -1.0);

  py::class_<SpectralResult>(m, "SpectralResult")
      .def_readonly("mu", &SpectralResult::mu)
      .def_readonly("lam", &SpectralResult::lambda)
      .def_readonly("coeffs", &SpectralResult::coeffs)
      .def_readonly("conversion", &SpectralResult::conversion)
      .def_readonly("source", &SpectralResult::source)
      .def_readonly("delta_t", &SpectralResult::delta_t)
      .def_readonly("gamma", &SpectralResult::gamma)
      .def("__repr__", [](const SpectralResult& s) {
        return "<SpectralResult N=" + std::to_string(s.mu.size()) + " from " + s.source + ">";
      });

  m.def(
      "spectrum",
      [](const GramPair& gp, const std::string& conversion) {
        return spectrum(gp, conv_of(conversion));
      },
      py::arg("gram"), py::arg("conversion") = "linearized",
      "Generalized eigenproblem H v = lambda (G + gamma I) v; mu = 1 + delta_t lambda.");
  m.def(
      "operator_spectrum",
      [](const KoopmanApproximation& op, const py::object& g_for_norm,
         const std::string& conversion) {
        if (g_for_norm.is_none()) return operator_spectrum(op, nullptr, conv_of(conversion));
        const CMat g = g_for_norm.cast<CMat>();
        return operator_spectrum(op, &g, conv_of(conversion));
      },
      py::arg("op"), py::arg("g_for_norm") = py::none(), py::arg("conversion") = "linearized");

  m.def(
      "semigroup_to_generator",
      [](const std::vector<Cplx>& mu, double delta_t, const std::string& conversion) {
        return semigroup_to_generator(mu, delta_t, conv_of(conversion));
      },
      py::arg("mu"), py::arg("delta_t"), py::arg("conversion") = "linearized");
  m.def(
      "generator_to_semigroup",
      [](const std::vector<Cplx>& lambda, double delta_t, const std::string& conversion) {
        return generator_to_semigroup(lambda, delta_t, conv_of(conversion));
      },
      py::arg("lam"), py::arg("delta_t"), py::arg("conversion") = "linearized");

  m.def(
      "match_modes",
      [](const std::vector<Cplx>& estimates, const std::vector<Cplx>& references) {
        const ModeMatch match = match_modes(estimates, references);
        py::list pairs;
        for (const auto& p : match.pairs)
          pairs.append(py::make_tuple(p.ref_index, p.est_index, p.abs_error));
        return py::make_tuple(pairs, match.unmatched_refs);
      },
      py::arg("estimates"), py::arg("references"),
      "Greedy nearest pairing; returns ([(ref, est, abs_err)...], unmatched_refs).");

  m.def("koopman_eigenfunction_eval", &koopman_eigenfunction_eval, py::arg("dictionary"),
        py::arg("coeffs"), py::arg("X"));

  py::class_<CoefficientEstimate>(m, "CoefficientEstimate")
      .def_static(
          "fit",
          [](const SnapshotEnsemble& pairs, const std::string& kind, int bins_per_axis,
             std::uint64_t seed) {
            CoefConfig cfg;
            cfg.kind = kind;
            cfg.bins_per_axis = bins_per_axis;
            cfg.seed = seed;
            return CoefficientEstimate::fit(pairs, cfg);
          },
          py::arg("pairs"), py::arg("kind") = "binned", py::arg("bins_per_axis") = 50,
          py::arg("seed") = 1)
      .def_property_readonly("dim", &CoefficientEstimate::dim)
      .def_property_readonly("delta_t", &CoefficientEstimate::delta_t)
      .def(
          "drift", [](const CoefficientEstimate& c, const Vec& x) { return c.drift(x); },
          py::arg("x"))
      .def(
          "diffusion", [](const CoefficientEstimate& c, const Vec& x) { return c.diffusion(x); },
          py::arg("x"))
      .def("as_model", &CoefficientEstimate::as_model, py::arg("name") = "estimated");

  py::class_<NetworkDictionary, Dictionary, std::shared_ptr<NetworkDictionary>>(
      m, "NetworkDictionary")
      .def_property_readonly("n_learned", &NetworkDictionary::n_learned)
      .def("batch_values", &NetworkDictionary::batch_values, py::arg("x"));

  py::class_<TrainTrace>(m, "TrainTrace")
      .def_property_readonly("losses",
                             [](const TrainTrace& t) {
                               std::vector<double> out;
                               out.reserve(t.epochs.size());
                               for (const auto& e : t.epochs) out.push_back(e.loss);
                               return out;
                             })
      .def_property_readonly("scores",
                             [](const TrainTrace& t) {
                               std::vector<double> out;
                               out.reserve(t.epochs.size());
                               for (const auto& e : t.epochs) out.push_back(e.score);
                               return out;
                             })
      .def_readonly("selected_epoch", &TrainTrace::selected_epoch)
      .def_readonly("selected_score", &TrainTrace::selected_score)
      .def_readonly("gamma", &TrainTrace::gamma);

  py::class_<TrainResult>(m, "TrainResult")
      .def_property_readonly("dict",
                             [](const TrainResult& r) { return unconst_net(r.dict); })
      .def_readonly("op", &TrainResult::op)
      .def_readonly("spectrum", &TrainResult::spectrum)
      .def_readonly("trace", &TrainResult::trace)
      .def_property_readonly("selected_dict",
                             [](const TrainResult& r) -> py::object {
                               if (!r.selected_dict) return py::none();
                               return py::cast(unconst_net(r.selected_dict));
                             })
      .def_property_readonly("selected_op",
                             [](const TrainResult& r) -> py::object {
                               if (!r.selected_op) return py::none();
                               return py::cast(*r.selected_op);
                             })
      .def_property_readonly("selected_spectrum", [](const TrainResult& r) -> py::object {
        if (!r.selected_spectrum) return py::none();
        return py::cast(*r.selected_spectrum);
      });

  m.def(
      "train",
      [](const SnapshotEnsemble& data, const SdeModel& model, const std::string& method,
         int n_learned, const std::vector<int>& hidden, int outer_epochs, int inner_steps,
         double learning_rate, double momentum, double gamma, std::int64_t batch,
         std::uint64_t seed, const py::object& score_points, const py::object& score_reference) {
        TrainConfig cfg;
        cfg.method = parse_dl_method(method);
        cfg.n_learned = n_learned;
        cfg.hidden = hidden;
        cfg.outer_epochs = outer_epochs;
        cfg.inner_steps = inner_steps;
        cfg.learning_rate = learning_rate;
        cfg.momentum = momentum;
        cfg.gamma = gamma;
        cfg.batch = batch;
        cfg.seed = seed;
        if (score_points.is_none() != score_reference.is_none())
          throw InvalidArgument("scoring needs both score_points and score_reference");
        if (score_points.is_none()) return train(data, model, cfg);
        const Mat pts = score_points.cast<Mat>();
        const Vec ref = score_reference.cast<Vec>();
        return train(data, model, cfg, &pts, &ref);
      },
      py::arg("data"), py::arg("model"), py::arg("method") = "sdmd-dl",
      py::arg("n_learned") = 17, py::arg("hidden") = std::vector<int>{50},
      py::arg("outer_epochs") = 100, py::arg("inner_steps") = 1,
      py::arg("learning_rate") = 1e-4, py::arg("momentum") = 0.0, py::arg("gamma") = -1.0,
      py::arg("batch") = 0, py::arg("seed") = 1, py::arg("score_points") = py::none(),
      py::arg("score_reference") = py::none(),
      "Alternating dictionary learning; methods: sdmd-dl, edmd-dl, gedmd-dl.");

  m.def("mode_similarity", &mode_similarity, py::arg("a"), py::arg("b"),
        "Pearson correlation coefficient.");
  m.def(
      "eigenfunction_series",
      [](const NetworkDictionary& dict, const SpectralResult& spec, int mode, const Mat& points) {
        return eigenfunction_series(dict, spec, mode, points);
      },
      py::arg("dictionary"), py::arg("spectrum"), py::arg("mode"), py::arg("points"),
      "Standardized real part of one eigenfunction along the given states.");

  m.def("run_invariant_preflight", &run_invariant_preflight,
        "Built-in exactness suite; raises InvariantFailure on violation.");
  m.def("set_thread_count", &set_thread_count, py::arg("n"));
  m.def("thread_count", &thread_count);

  m.def(
      "run_experiment",
      [](const py::dict& config, const std::string& out_dir, const py::object& seed) {
        json doc = json_from_py(config);
        doc["output"] = out_dir;
        if (!seed.is_none()) doc["seed"] = seed.cast<std::uint64_t>();
        const ExperimentConfig cfg = parse_config(doc);
        json report;
        if (cfg.experiment == "neural-mass")
          report = run_neuralmass(cfg);
        else if (cfg.experiment.rfind("convergence", 0) == 0)
          report = run_convergence(cfg);
        else
          report = run_spectrum(cfg);
        return json_to_py(report);
      },
      py::arg("config"), py::arg("out_dir"), py::arg("seed") = py::none(),
      "Run a config-dict experiment end to end, writing the usual artifacts into out_dir; "
      "returns the report document.");
}
