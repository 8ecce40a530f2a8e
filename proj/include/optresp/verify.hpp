#pragma once

#include <cstdint>
#include <vector>

#include "optresp/dynamics.hpp"

namespace optresp {

struct SweepParams {
  std::vector<double> gammas{-0.02, -0.01, -0.005, 0.0, 0.005, 0.01, 0.02};
  std::size_t steps = 1000000;  // averaged steps per replica
  std::size_t warmup = 1000;
  std::size_t n_replicas = 8;
  std::uint64_t seed = 1;
  std::size_t workers = 1;

  void validate() const;
};

struct SweepEntry {
  double gamma = 0.0;
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n_replicas = 0;
  bool diverged = false;
  std::vector<double> replica_means;  // replica r uses the same seed at every gamma
};

struct SweepResult {
  std::vector<SweepEntry> entries;
};

/// Long-orbit average of the observable under f + gamma X'. Throws
/// DivergedOrbitError if the orbit leaves the finite range.
double orbit_average(const MapModel& model, const VectorField* field, double gamma, std::size_t steps,
                     std::size_t warmup, std::uint64_t seed);

/// Seed of replica r; shared by every gamma so that the differences between
/// gammas are paired.
std::uint64_t replica_seed(std::uint64_t seed, std::size_t r);

/// Averages the observable over n_replicas independent orbits for every gamma.
/// A diverged replica marks its entry and the sweep continues.
SweepResult gamma_sweep(const MapModel& model, const VectorField& field, const SweepParams& params);

struct SlopeReport {
  double h = 0.0;
  double slope = 0.0;  // central difference
  double slope_std_error = 0.0;
  double quad_slope = 0.0;  // linear coefficient of a weighted quadratic fit
  double quad_slope_std_error = 0.0;
  double predicted = 0.0;
  double predicted_std_error = 0.0;
  double combined_std_error = 0.0;
  double k = 3.0;
  bool pass = false;
};

/// Compares the finite-difference slope at gamma = 0 with a predicted response.
/// h <= 0 selects the smallest h with both +h and -h in the sweep. Needs at
/// least three distinct gammas including -h and +h.
SlopeReport slope_check(const SweepResult& sweep, double predicted, double predicted_std_error, double k = 3.0,
                        double h = 0.0);

}  // namespace optresp
