#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "optresp/csv.hpp"
#include "optresp/dynamics.hpp"
#include "optresp/fourier.hpp"
#include "optresp/response.hpp"
#include "optresp/verify.hpp"

namespace optresp {

struct BasisConfig {
  BasisMode mode = BasisMode::Full;
  int N = 15;
  int p = 5;
  std::string weights_preset = "2pi-inverse";  // or "uniform"; ignored if weights is set
  std::vector<double> weights;

  BasisSpec spec(int dim) const;
};

struct VerifyConfig {
  SweepParams sweep;
  double tolerance_k = 3.0;
  std::string perturbation = "xopt";  // "xopt", "j:n1,...,nM", or "n" for the restricted family
};

/// Fully resolved run configuration: a preset overlaid with a JSON document.
///
///   { "preset": "solenoid2d",
///     "model": "solenoid2d" | { "dim": 2, "contraction": 0.5, ... },
///     "basis": { "mode": "full"|"restricted", "N": 15, "p": 5, "weights": "2pi-inverse"|[C_0..C_p] },
///     "engine": { "seg_len", "n_segments", "W", "warmup", "frame_warmup", "seed" },
///     "outputs": { "dir": "out" },
///     "verify": { "gammas": [...], "n_replicas", "steps", "warmup", "tolerance_k", "perturbation" },
///     "grid": { "lo": [...], "hi": [...], "n": [...] },
///     "flags": { "unstable_sign": -1|1, "parallel_workers": 1 } }
struct RunConfig {
  std::string preset;
  std::string model_name;
  bool custom_model = false;
  SolenoidParams custom;
  BasisConfig basis;
  EngineParams engine;
  std::string out_dir = "out";
  VerifyConfig verify;
  GridSpec grid;
  std::string resolved_json;  // canonical dump of the merged document

  std::unique_ptr<MapModel> make_model() const;
  int dim() const;
  /// Non-fatal findings, e.g. p below the Sobolev embedding bound.
  std::vector<std::string> warnings() const;
  /// FNV-1a of resolved_json.
  std::uint64_t hash() const;
};

std::vector<std::string> preset_names();
/// Preset document as JSON text.
std::string preset_document(const std::string& name);

/// Builds the configuration from `preset` (empty: the first overlay's "preset"
/// key, else solenoid2d) with the JSON overlays merged in order. Unknown keys
/// and ill-typed values raise ConfigError naming the field.
RunConfig resolve_config(const std::string& preset, const std::vector<std::string>& overlays);
/// Reads a JSON file into a string.
std::string read_text_file(const std::string& path);

}  // namespace optresp
