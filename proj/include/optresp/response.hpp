#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "optresp/fourier.hpp"
#include "optresp/shadowing.hpp"

namespace optresp {

struct EngineParams {
  std::size_t seg_len = 20;
  std::size_t n_segments = 4000;
  std::size_t W = 10;
  std::size_t warmup = 1000;
  std::size_t frame_warmup = 100;
  std::uint64_t seed = 1;
  /// Global sign on the unstable contribution (R2W + R3W). The unstable part
  /// is minus the transfer-operator derivative, so the estimate is
  /// R1 - (R2W + R3W); +1 flips it and is kept for debugging only.
  int unstable_sign = -1;
  std::size_t workers = 1;

  void validate() const;
};

/// Steps discarded at each end of the orbit before averaging: the shadowing
/// end buffer max(frame_warmup, 2W + 10) plus the W steps phi_W needs, rounded
/// up to whole segments so that batches coincide with segments.
std::size_t averaging_buffer(const EngineParams& p);

/// A perturbation direction in composition form, X_k and grad X_k per step.
/// Steps before `first_valid` are undefined (zero-filled).
struct PerturbationOnOrbit {
  int dim = 0;
  std::size_t length = 0;
  std::size_t first_valid = 0;
  std::string label;
  std::vector<double> x;     // length * dim
  std::vector<double> grad;  // length * dim * dim, column-major per step

  ConstVecMap at(std::size_t k) const { return {x.data() + k * dim, dim}; }
  ConstMatMap grad_at(std::size_t k) const { return {grad.data() + k * dim * dim, dim, dim}; }
};

struct ResponseBreakdown {
  std::string label;
  double r1 = 0.0;
  double r2w = 0.0;
  double r3w = 0.0;
  double total = 0.0;   // r1 + r2w + r3w (r2w, r3w carry the unstable sign)
  double std_error = 0.0;  // non-overlapping batch means, batch = one segment
  std::size_t W = 0;
  std::size_t T_used = 0;
};

/// phi_{W,k} = sum_{m=-W}^{W} (Phi(x_{k+m}) - mu_phi); NaN within W of the ends.
std::vector<double> phi_window(const Orbit& orbit, std::size_t W, double mu_phi);

/// trace(eps^T gradX e).
double equivariant_div_X(const Mat& e, const Mat& eps, const Mat& grad_x);

/// Per-step covector  Y -> tr(M_k^{-1} eps_{k+1}^T D^2 f_{x_k}(e_k, Y)),
/// M_k = eps_{k+1}^T df_k e_k, i.e. the Y-derivative of the log unstable
/// Jacobian with the frames held fixed. Flat length * dim; the last step is 0.
std::vector<double> equivariant_div_fstar(const Orbit& orbit, const FrameBundle& frames, const MapModel& model);

/// X_{k+1} = X'(x_k), gradX_{k+1} = gradX'(x_k) df_k^{-1}; step 0 is unusable.
PerturbationOnOrbit additive_to_composition(const Orbit& orbit, const VectorField& field, std::string label = {});
/// Composition-form field evaluated directly along the orbit.
PerturbationOnOrbit composition_on_orbit(const Orbit& orbit, const VectorField& field, std::string label = {});

/// Shared, read-only data of the fast adjoint response: orbit, frames, the two
/// shadowing covector paths, phi_W and the averaging window. Everything that
/// does not depend on the perturbation is computed once here.
class ResponseEngine {
 public:
  static ResponseEngine build(const MapModel& model, const EngineParams& params);
  static ResponseEngine from_orbit(const MapModel& model, Orbit orbit, const EngineParams& params);

  ResponseBreakdown response(const PerturbationOnOrbit& pert) const;
  std::vector<ResponseBreakdown> batch_response(const std::vector<PerturbationOnOrbit>& perts) const;

  /// Response of an additive perturbation f + gamma X'.
  ResponseBreakdown additive_response(const VectorField& field, std::string label = {}) const;

  /// Fast path for many additive separable fields (Fourier basis elements):
  /// identical in value to additive_to_composition + response, but contracted
  /// through per-step weight tables with the SIMD kernel.
  std::vector<ResponseBreakdown> separable_batch(const std::vector<BasisElement>& elements) const;

  const MapModel& model() const { return *model_; }
  const EngineParams& params() const { return params_; }
  const Orbit& orbit() const { return orbit_; }
  const FrameBundle& frames() const { return frames_; }
  const CovectorPath& omega_phi() const { return omega_phi_; }
  const CovectorPath& omega_div() const { return omega_div_; }
  const std::vector<double>& phi_w() const { return phi_w_; }
  double mu_phi() const { return mu_phi_; }
  StepRange window() const { return window_; }

 private:
  ResponseEngine() = default;
  ResponseBreakdown finish(std::string label, const std::vector<double>& s1, const std::vector<double>& s2,
                           const std::vector<double>& s3, double scale) const;

  const MapModel* model_ = nullptr;
  EngineParams params_;
  Orbit orbit_;
  FrameBundle frames_;
  CovectorPath omega_phi_;
  CovectorPath omega_div_;
  std::vector<double> phi_w_;
  double mu_phi_ = 0.0;
  StepRange window_;
};

/// Mean and batch-means standard error of equally sized batches.
struct BatchStats {
  double mean = 0.0;
  double std_error = 0.0;
};
BatchStats batch_stats(const std::vector<double>& batch_means);

}  // namespace optresp
