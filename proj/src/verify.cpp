#include "optresp/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "optresp/parallel.hpp"

namespace optresp {

void SweepParams::validate() const {
  if (gammas.empty()) throw ConfigError("verify.gammas must not be empty");
  if (steps == 0) throw ConfigError("verify.steps must be positive");
  if (n_replicas == 0) throw ConfigError("verify.n_replicas must be positive");
  for (double g : gammas)
    if (!std::isfinite(g)) throw ConfigError("verify.gammas must be finite");
}

double orbit_average(const MapModel& model, const VectorField* field, double gamma, std::size_t steps,
                     std::size_t warmup, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  PerturbedModel pm{&model, field ? gamma : 0.0, field};
  const int m = model.dim();
  Vec x = model.sample_initial(rng), y(m), scratch(m);
  for (std::size_t k = 0; k < warmup; ++k) {
    pm.step(x, y, scratch);
    x.swap(y);
  }
  if (!x.allFinite()) throw DivergedOrbitError(warmup, "non-finite state during warmup");
  // Blocked summation keeps the rounding error flat in the orbit length.
  constexpr std::size_t kBlock = 4096;
  double total = 0.0, block = 0.0;
  for (std::size_t k = 0; k < steps; ++k) {
    block += model.observable(x);
    if ((k + 1) % kBlock == 0) {
      if (!std::isfinite(block)) throw DivergedOrbitError(warmup + k, "non-finite observable");
      total += block;
      block = 0.0;
    }
    pm.step(x, y, scratch);
    x.swap(y);
  }
  total += block;
  if (!std::isfinite(total)) throw DivergedOrbitError(warmup + steps, "non-finite observable");
  return total / static_cast<double>(steps);
}

std::uint64_t replica_seed(std::uint64_t seed, std::size_t r) {
  // splitmix64 step
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (r + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

SweepResult gamma_sweep(const MapModel& model, const VectorField& field, const SweepParams& params) {
  params.validate();
  const std::size_t ng = params.gammas.size(), nr = params.n_replicas;
  std::vector<double> means(ng * nr, std::numeric_limits<double>::quiet_NaN());
  std::vector<char> failed(ng * nr, 0);
  parallel_for(ng * nr, resolve_workers(params.workers), [&](std::size_t job) {
    const std::size_t g = job / nr, r = job % nr;
    try {
      means[job] = orbit_average(model, &field, params.gammas[g], params.steps, params.warmup,
                                 replica_seed(params.seed, r));
    } catch (const DivergedOrbitError&) {
      failed[job] = 1;
    }
  });

  SweepResult out;
  for (std::size_t g = 0; g < ng; ++g) {
    SweepEntry e;
    e.gamma = params.gammas[g];
    e.n_replicas = nr;
    e.replica_means.assign(means.begin() + g * nr, means.begin() + (g + 1) * nr);
    e.diverged = std::any_of(failed.begin() + g * nr, failed.begin() + (g + 1) * nr, [](char c) { return c != 0; });
    if (e.diverged) {
      e.mean = e.std_error = std::numeric_limits<double>::quiet_NaN();
    } else {
      double s = 0.0;
      for (double v : e.replica_means) s += v;
      e.mean = s / static_cast<double>(nr);
      if (nr > 1) {
        double ss = 0.0;
        for (double v : e.replica_means) ss += (v - e.mean) * (v - e.mean);
        e.std_error = std::sqrt(ss / static_cast<double>(nr - 1) / static_cast<double>(nr));
      }
    }
    out.entries.push_back(std::move(e));
  }
  return out;
}

namespace {

const SweepEntry* find_entry(const SweepResult& s, double gamma) {
  for (const auto& e : s.entries)
    if (!e.diverged && std::abs(e.gamma - gamma) <= 1e-12 * std::max(1.0, std::abs(gamma))) return &e;
  return nullptr;
}

}  // namespace

SlopeReport slope_check(const SweepResult& sweep, double predicted, double predicted_std_error, double k, double h) {
  std::vector<double> distinct;
  for (const auto& e : sweep.entries)
    if (!e.diverged && std::none_of(distinct.begin(), distinct.end(), [&](double g) { return g == e.gamma; }))
      distinct.push_back(e.gamma);
  if (distinct.size() < 3) throw ConfigError("slope check needs at least three distinct gamma values");

  if (h <= 0.0) {
    h = std::numeric_limits<double>::infinity();
    for (double g : distinct)
      if (g > 0.0 && find_entry(sweep, -g)) h = std::min(h, g);
    if (!std::isfinite(h)) throw ConfigError("slope check needs a symmetric pair of gammas -h, +h");
  }
  const SweepEntry* plus = find_entry(sweep, h);
  const SweepEntry* minus = find_entry(sweep, -h);
  if (!plus || !minus) throw ConfigError("slope check: gammas -h and +h must both be present and finite");

  SlopeReport rep;
  rep.h = h;
  rep.k = k;
  rep.predicted = predicted;
  rep.predicted_std_error = predicted_std_error;
  rep.slope = (plus->mean - minus->mean) / (2.0 * h);
  const std::size_t nr = plus->replica_means.size();
  if (nr > 1 && minus->replica_means.size() == nr) {
    // Paired replicas: the spread of per-replica slopes carries the
    // correlation between the two gammas.
    std::vector<double> d(nr);
    double s = 0.0;
    for (std::size_t r = 0; r < nr; ++r) s += d[r] = (plus->replica_means[r] - minus->replica_means[r]) / (2.0 * h);
    const double mean = s / static_cast<double>(nr);
    double ss = 0.0;
    for (double v : d) ss += (v - mean) * (v - mean);
    rep.slope_std_error = std::sqrt(ss / static_cast<double>(nr - 1) / static_cast<double>(nr));
  } else {
    rep.slope_std_error = std::hypot(plus->std_error, minus->std_error) / (2.0 * h);
  }

  // Quadratic fit mean ~ a + b gamma + c gamma^2 over every finite entry.
  std::vector<const SweepEntry*> pts;
  for (const auto& e : sweep.entries)
    if (!e.diverged) pts.push_back(&e);
  const bool weighted = std::all_of(pts.begin(), pts.end(), [](const SweepEntry* e) { return e->std_error > 0.0; });
  Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
  Eigen::Vector3d atb = Eigen::Vector3d::Zero();
  for (const auto* e : pts) {
    const Eigen::Vector3d row(1.0, e->gamma, e->gamma * e->gamma);
    const double w = weighted ? 1.0 / (e->std_error * e->std_error) : 1.0;
    ata += w * row * row.transpose();
    atb += w * row * e->mean;
  }
  const Eigen::Matrix3d cov = ata.inverse();
  const Eigen::Vector3d coef = cov * atb;
  rep.quad_slope = coef[1];
  if (weighted) {
    rep.quad_slope_std_error = std::sqrt(cov(1, 1));
  } else if (pts.size() > 3) {
    double rss = 0.0;
    for (const auto* e : pts) {
      const double r = e->mean - (coef[0] + coef[1] * e->gamma + coef[2] * e->gamma * e->gamma);
      rss += r * r;
    }
    rep.quad_slope_std_error = std::sqrt(rss / static_cast<double>(pts.size() - 3) * cov(1, 1));
  }

  rep.combined_std_error = std::hypot(rep.slope_std_error, predicted_std_error);
  rep.pass = std::abs(rep.slope - predicted) <= k * rep.combined_std_error;
  return rep;
}

}  // namespace optresp
