#pragma once

#include <ostream>
#include <string>

#include "plates/config.hpp"
#include "plates/experiments.hpp"

namespace plates {

// Subcommand drivers. Each returns the process exit code: 0 on success,
// 1 on a failed verification, 2 when any minimisation failed to converge.
// Config/schema errors are reported by throwing ConfigError (mapped to exit
// code 1 by the executable). Human-readable progress goes to `os`.

// Prints the homogenised moduli, the small-strain minimiser, and the
// large-strain minimiser set, as text followed by a JSON report. A non-empty
// json_out additionally writes the JSON document to that path.
int cmd_moduli(const RunConfig& cfg, const std::string& json_out, std::ostream& os);

// Builds the configured mesh, writes it in "plates-mesh v1" format to
// mesh_out (default: <output_dir>/mesh.txt) and prints size/quality stats.
int cmd_mesh(const RunConfig& cfg, const std::string& mesh_out, std::ostream& os);

// Runs the theta sweep and writes into out_dir (default: cfg.output_dir):
// resolved_config.json, records.csv, and per-theta state + VTK files. The
// PLATES_THREADS environment variable caps cold-start parallelism.
int cmd_sweep(const RunConfig& cfg, const std::string& out_dir, std::ostream& os);

// Runs the self-check suite (completed-square identity, gradient consistency,
// interpolated-integration decay, theta = 0 decoupling), printing one
// PASS/FAIL line per check. `terms` is a fault-injection hook used by tests
// to confirm the gradient check has teeth; the default is the exact gradient.
int cmd_verify(const RunConfig& cfg, std::ostream& os, const GradientTerms& terms = {});

}  // namespace plates
