#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sdmd/coef.hpp"
#include "sdmd/dictlearn.hpp"
#include "sdmd/models.hpp"
#include "sdmd/simulate.hpp"

namespace sdmd {

// Fully resolved experiment description. Parsing merges the experiment
// preset with the user document (user keys win, deep merge) and rejects any
// key that is not in the schema, at every nesting level.
struct ExperimentConfig {
  std::string experiment;  // ou | stuart-landau | triple-well | neural-mass |
                           // convergence-m | convergence-dt | convergence-N | custom
  std::uint64_t seed = 1;
  std::string output = "out";
  int threads = 0;  // 0 = leave the global setting alone

  std::string method = "sdmd";        // sdmd | edmd | gedmd | sdmd-dl | edmd-dl | gedmd-dl
  std::vector<std::string> methods;   // compare runs
  double gamma = -1.0;
  std::string coefficients = "analytic";  // analytic | estimated
  CoefConfig coef;

  json model_spec;  // echo of the model block
  SdeModel model;

  SamplerSpec sampler;
  EvolveSpec evolve;
  json dictionary;    // fixed-family spec; ignored by the *-dl methods
  TrainConfig train;  // method/seed filled from the top-level fields

  json sweep;             // convergence grids (m_values/trials, dt_values, degrees)
  json eigenfunction_grid;  // heatmap lattice {nx, ny, bounds}, or null
  std::vector<ModeIndex> reference_modes;

  double duration = 600.0;  // neural-mass simulated seconds
  std::string data_dir;     // optional: import an exported ensemble instead of simulating

  json raw;  // resolved document, echoed into reports
};

// Preset document for one of the named experiments ("custom" is empty).
json experiment_preset(const std::string& experiment);

ExperimentConfig parse_config(const json& user);
ExperimentConfig load_config(const std::filesystem::path& path);

// Builds the SDE model described by a {"name": ...} block (strict keys).
SdeModel parse_model(const json& spec);

}  // namespace sdmd
