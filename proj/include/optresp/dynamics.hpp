#pragma once

#include <functional>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "optresp/types.hpp"

namespace optresp {

/// A diffeomorphism of the torus together with the observable whose long-time
/// average is being differentiated.
///
/// Implementations supply the unwrapped map value; `wrap` then reduces the
/// periodic coordinates. Jacobians and second derivatives refer to the
/// unwrapped map (wrapping is locally the identity).
class MapModel {
 public:
  virtual ~MapModel() = default;

  virtual std::string name() const = 0;
  virtual int dim() const = 0;
  virtual int unstable_dim() const = 0;

  virtual void raw_step(const Vec& x, Vec& out) const = 0;
  virtual void wrap(Vec& x) const = 0;
  virtual void jacobian(const Vec& x, Mat& out) const = 0;

  virtual bool has_second_derivative() const { return true; }
  /// D^2 f(a, b), an M-vector.
  virtual Vec second_derivative(const Vec& x, const Vec& a, const Vec& b) const = 0;
  /// Covector Y -> w . D^2 f(a, Y). The default goes through second_derivative
  /// one unit vector at a time; benchmarks override it with the sparse form.
  virtual Vec second_derivative_covector(const Vec& x, const Vec& w, const Vec& a) const;

  virtual double observable(const Vec& x) const = 0;
  virtual Vec observable_gradient(const Vec& x) const = 0;

  /// Uniform draw on the model's fundamental domain.
  virtual Vec sample_initial(std::mt19937_64& rng) const;

  Vec step(const Vec& x) const {
    Vec y(dim());
    raw_step(x, y);
    wrap(y);
    return y;
  }
  Mat jacobian(const Vec& x) const {
    Mat j(dim(), dim());
    jacobian(x, j);
    return j;
  }
};

/// Parameters of the solenoid-like family
///   x1' = a x1 + b sum_{i>=2} cos(2 pi x_i)
///   xi' = lambda x_i + c x1 sin(2 pi x_i)   (mod 1)
/// with observable  p1 x1 + p3 x1^3 + q sum_{i>=2} (x_i - 0.5)^2.
struct SolenoidParams {
  std::string name = "solenoid";
  int dim = 2;
  double contraction = 0.5;
  double cos_coupling = 0.01;
  double sin_coupling = 0.1;
  double expansion = 2.0;
  double phi_linear = 0.0;
  double phi_cubic = 1.0;
  double phi_quadratic = 0.5;
  double phi_first_quadratic = 0.0;  // weight of (x1 - 0.5)^2
};

/// The first coordinate is the contracting one and lives in [-0.5, 0.5]; it is
/// not reduced mod 1. Coordinates 2..M are expanding and wrapped into [0, 1).
///
/// For the two-dimensional benchmark the observable is read as
/// (x1)^3 + 0.5 (x2 - 0.5)^2, i.e. the bare "x" in the quadratic term is the
/// expanding coordinate, the same form the 3d and 21d observables take.
class SolenoidMap final : public MapModel {
 public:
  explicit SolenoidMap(SolenoidParams params);

  std::string name() const override { return params_.name; }
  int dim() const override { return params_.dim; }
  int unstable_dim() const override { return params_.dim - 1; }

  void raw_step(const Vec& x, Vec& out) const override;
  void wrap(Vec& x) const override;
  void jacobian(const Vec& x, Mat& out) const override;
  Vec second_derivative(const Vec& x, const Vec& a, const Vec& b) const override;
  Vec second_derivative_covector(const Vec& x, const Vec& w, const Vec& a) const override;
  double observable(const Vec& x) const override;
  Vec observable_gradient(const Vec& x) const override;
  Vec sample_initial(std::mt19937_64& rng) const override;

  const SolenoidParams& params() const noexcept { return params_; }

 private:
  SolenoidParams params_;
};

/// User-defined map assembled from callbacks. `second_derivative` may be left
/// empty, in which case the model reports no second-derivative capability.
struct MapCallbacks {
  std::string name;
  int dim = 0;
  int unstable_dim = 0;
  std::function<void(const Vec&, Vec&)> raw_step;
  std::function<void(Vec&)> wrap;
  std::function<void(const Vec&, Mat&)> jacobian;
  std::function<Vec(const Vec&, const Vec&, const Vec&)> second_derivative;
  std::function<double(const Vec&)> observable;
  std::function<Vec(const Vec&)> observable_gradient;
  std::function<Vec(std::mt19937_64&)> sample_initial;
};

class CallbackModel final : public MapModel {
 public:
  explicit CallbackModel(MapCallbacks cb);

  std::string name() const override { return cb_.name; }
  int dim() const override { return cb_.dim; }
  int unstable_dim() const override { return cb_.unstable_dim; }
  void raw_step(const Vec& x, Vec& out) const override { cb_.raw_step(x, out); }
  void wrap(Vec& x) const override;
  void jacobian(const Vec& x, Mat& out) const override { cb_.jacobian(x, out); }
  bool has_second_derivative() const override { return static_cast<bool>(cb_.second_derivative); }
  Vec second_derivative(const Vec& x, const Vec& a, const Vec& b) const override;
  double observable(const Vec& x) const override { return cb_.observable(x); }
  Vec observable_gradient(const Vec& x) const override { return cb_.observable_gradient(x); }
  Vec sample_initial(std::mt19937_64& rng) const override;

 private:
  MapCallbacks cb_;
};

enum class Benchmark { Solenoid2d, Solenoid3d, Solenoid21d };

SolenoidParams benchmark_params(Benchmark b);
std::unique_ptr<MapModel> make_model(Benchmark b);
/// Looks the name up in the global registry; throws ConfigError if unknown.
std::unique_ptr<MapModel> make_model(const std::string& name);

class ModelRegistry {
 public:
  using Factory = std::function<std::unique_ptr<MapModel>()>;

  static ModelRegistry& global();

  void add(const std::string& name, Factory factory);
  bool contains(const std::string& name) const;
  std::unique_ptr<MapModel> create(const std::string& name) const;
  std::vector<std::string> names() const;

 private:
  ModelRegistry();
  std::map<std::string, Factory> factories_;
};

/// Smooth vector field on the torus; used both as perturbation direction X'
/// and as X_opt.
class VectorField {
 public:
  virtual ~VectorField() = default;
  virtual int dim() const = 0;
  virtual void value(const Vec& x, Vec& out) const = 0;
  /// out(i, l) = d X_i / d x_l.
  virtual void gradient(const Vec& x, Mat& out) const = 0;
};

class ConstantField final : public VectorField {
 public:
  explicit ConstantField(Vec v) : v_(std::move(v)) {}
  int dim() const override { return static_cast<int>(v_.size()); }
  void value(const Vec&, Vec& out) const override { out = v_; }
  void gradient(const Vec&, Mat& out) const override { out.setZero(v_.size(), v_.size()); }

 private:
  Vec v_;
};

class LambdaField final : public VectorField {
 public:
  LambdaField(int dim, std::function<void(const Vec&, Vec&)> value,
              std::function<void(const Vec&, Mat&)> gradient)
      : dim_(dim), value_(std::move(value)), gradient_(std::move(gradient)) {}
  int dim() const override { return dim_; }
  void value(const Vec& x, Vec& out) const override { value_(x, out); }
  void gradient(const Vec& x, Mat& out) const override { gradient_(x, out); }

 private:
  int dim_;
  std::function<void(const Vec&, Vec&)> value_;
  std::function<void(const Vec&, Mat&)> gradient_;
};

/// f_gamma = f + gamma X'.
struct PerturbedModel {
  const MapModel* base = nullptr;
  double gamma = 0.0;
  const VectorField* field = nullptr;

  /// Same wrapping as the base map; with gamma == 0 the result is bit-identical
  /// to base->step(x).
  void step(const Vec& x, Vec& out, Vec& scratch) const;
  Vec step(const Vec& x) const;
};

}  // namespace optresp
