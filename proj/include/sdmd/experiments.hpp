#pragma once

#include "sdmd/config.hpp"

namespace sdmd {

// Experiment drivers behind the CLI subcommands. Each driver runs the
// core invariant preflight, writes its result CSVs plus a report.json into
// cfg.output (atomically), and returns the report document.
json run_simulate(const ExperimentConfig& cfg);
json run_spectrum(const ExperimentConfig& cfg);
json run_convergence(const ExperimentConfig& cfg);
json run_compare(const ExperimentConfig& cfg);
json run_neuralmass(const ExperimentConfig& cfg);

}  // namespace sdmd
