#include <doctest.h>

#include "sdmd/config.hpp"

using namespace sdmd;

TEST_CASE("unknown top-level keys are rejected") {
  json doc = experiment_preset("ou");
  doc["bogus"] = 1;
  CHECK_THROWS_AS(parse_config(doc), ConfigError);
}

TEST_CASE("every preset parses") {
  for (const char* name : {"ou", "stuart-landau", "triple-well", "neural-mass", "convergence-m",
                           "convergence-dt", "convergence-N"}) {
    const ExperimentConfig cfg = parse_config(experiment_preset(name));
    CHECK(cfg.experiment == name);
    CHECK(cfg.seed == 1);
  }
  CHECK_THROWS_AS(experiment_preset("nope"), ConfigError);
}

TEST_CASE("ou preset pins the benchmark data setup") {
  const ExperimentConfig cfg = parse_config(experiment_preset("ou"));
  CHECK(cfg.model.name == "ou");
  CHECK(cfg.sampler.kind == SamplerSpec::Kind::UniformRandom);
  CHECK(cfg.sampler.count == 4000);
  CHECK(cfg.sampler.bounds(0, 0) == -2.0);
  CHECK(cfg.sampler.bounds(0, 1) == 2.0);
  CHECK(cfg.evolve.delta_t == 0.1);
  CHECK(cfg.dictionary.at("max_degree") == 5);
  CHECK(cfg.method == "sdmd");
  CHECK(cfg.reference_modes.size() == 6);
  CHECK(cfg.reference_modes[3].n == 3);
}

TEST_CASE("top-level gamma flows into training defaults") {
  json doc = experiment_preset("triple-well");
  doc["gamma"] = 1e-6;
  const ExperimentConfig cfg = parse_config(doc);
  CHECK(cfg.gamma == 1e-6);
  CHECK(cfg.train.gamma == 1e-6);
  // and an explicit train.gamma wins
  doc["train"]["gamma"] = 1e-4;
  CHECK(parse_config(doc).train.gamma == 1e-4);
}

TEST_CASE("train block carries the dictionary-learning knobs") {
  const ExperimentConfig cfg = parse_config(experiment_preset("neural-mass"));
  CHECK(cfg.methods == std::vector<std::string>{"sdmd-dl", "edmd-dl"});
  CHECK(cfg.train.n_learned == 25);
  CHECK(cfg.train.hidden == std::vector<int>{50, 50});
  CHECK(cfg.train.outer_epochs == 300);
  CHECK(cfg.train.inner_steps == 2);
  CHECK(cfg.train.learning_rate == 3e-7);
  CHECK(cfg.duration == 600.0);
  CHECK(cfg.coefficients == "estimated");
}

TEST_CASE("seed and output are plumbed through") {
  json doc = experiment_preset("ou");
  doc["seed"] = 99;
  doc["output"] = "/tmp/somewhere";
  doc["threads"] = 2;
  const ExperimentConfig cfg = parse_config(doc);
  CHECK(cfg.seed == 99);
  CHECK(cfg.output == "/tmp/somewhere");
  CHECK(cfg.threads == 2);
  CHECK(cfg.train.seed == 99);
}

TEST_CASE("model specs parse standalone") {
  const SdeModel ou = parse_model({{"name", "ou"}, {"theta", 2.0}, {"mu0", 0.1}, {"sigma", 0.3}});
  CHECK(ou.dim == 1);
  CHECK(ou.drift(Vec::Constant(1, 0.0))(0) == doctest::Approx(0.2));
  CHECK_THROWS_AS(parse_model({{"name", "unknown-model"}}), ConfigError);
}

TEST_CASE("config file loading reports a missing path") {
  CHECK_THROWS_AS(load_config("/nonexistent/nowhere.json"), ConfigError);
}
