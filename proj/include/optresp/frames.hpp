#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "optresp/dynamics.hpp"

namespace optresp {

/// A recorded trajectory x_0..x_{T-1} with cached Jacobians df_k = Df(x_k) and
/// observable values Phi(x_k). Storage is flat and column-major per step.
struct Orbit {
  int dim = 0;
  std::size_t length = 0;
  std::size_t warmup = 0;
  std::uint64_t seed = 0;
  std::vector<double> states;     // length * dim
  std::vector<double> jacobians;  // length * dim * dim
  std::vector<double> phi;        // length

  ConstVecMap state(std::size_t k) const { return {states.data() + k * dim, dim}; }
  ConstMatMap jacobian(std::size_t k) const { return {jacobians.data() + k * dim * dim, dim, dim}; }

  /// Orbit with explicitly given Jacobians (states and phi zero-filled unless
  /// provided); used for fixed-point and linear-map constructions.
  static Orbit from_jacobians(const std::vector<Mat>& jacs, std::vector<double> phi = {});
  /// Orbit through given states, with Jacobians and Phi evaluated from `model`.
  static Orbit from_states(const MapModel& model, const std::vector<Vec>& states);
};

Orbit generate_orbit(const MapModel& model, std::size_t n_segments, std::size_t seg_len, std::size_t warmup,
                     std::uint64_t seed);

/// Binary cache format (little-endian):
///   magic "ORBT", u32 version=1, u32 M, u32 u, u64 T, u64 seed, u64 warmup,
///   then T records of  M doubles (state), M*M doubles (Jacobian, column-major),
///   1 double (Phi).
void write_orbit_cache(std::ostream& os, const Orbit& orbit, int unstable_dim);
Orbit read_orbit_cache(std::istream& is, int* unstable_dim = nullptr);

/// Unstable frames e_k (M x u, orthonormal columns) and adjoint coframes eps_k
/// (M x u, spanning the annihilator of the stable subspace) normalized so that
/// eps_k^T e_k = I.
struct FrameBundle {
  int dim = 0;
  int unstable_dim = 0;
  std::size_t length = 0;
  std::size_t frame_warmup = 0;
  std::vector<double> e;    // length * dim * u
  std::vector<double> eps;  // length * dim * u

  ConstMatMap frame(std::size_t k) const { return {e.data() + k * dim * unstable_dim, dim, unstable_dim}; }
  ConstMatMap coframe(std::size_t k) const { return {eps.data() + k * dim * unstable_dim, dim, unstable_dim}; }
  MatMap frame(std::size_t k) { return {e.data() + k * dim * unstable_dim, dim, unstable_dim}; }
  MatMap coframe(std::size_t k) { return {eps.data() + k * dim * unstable_dim, dim, unstable_dim}; }

  /// Steps whose frames are considered converged: [frame_warmup, length - frame_warmup).
  bool retained(std::size_t k) const { return k >= frame_warmup && k + frame_warmup < length; }
};

/// Forward pushforward with QR renormalization, positive diagonal of R.
/// Only `e` (and dims) of the returned bundle are filled.
FrameBundle unstable_frame(const Orbit& orbit, int unstable_dim, std::size_t frame_warmup, std::uint64_t seed);

/// Backward pullback of covectors with QR renormalization, then per-step
/// normalization eps_k = w_k (e_k^T w_k)^{-1}. Fills `eps` of `frames`.
void adjoint_frame(const Orbit& orbit, FrameBundle& frames, std::uint64_t seed);

FrameBundle compute_frames(const Orbit& orbit, int unstable_dim, std::size_t frame_warmup, std::uint64_t seed);

/// Largest angle (radians) between a vector of span(b) and span(a); zero iff
/// span(b) lies in span(a). Symmetric for subspaces of equal dimension.
double subspace_angle(const Mat& a, const Mat& b);

struct FrameDiagnostics {
  double max_duality_residual = 0.0;  // max_k |eps_k^T e_k - I|_inf over retained steps
  double max_equivariance_angle = 0.0;
};
FrameDiagnostics frame_diagnostics(const Orbit& orbit, const FrameBundle& frames);

}  // namespace optresp
