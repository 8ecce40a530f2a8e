#include "optresp/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace optresp {

using nlohmann::json;

namespace {

json preset_json(const std::string& name) {
  json j;
  j["model"] = name;
  j["engine"] = {{"seg_len", 20}, {"n_segments", 4000}, {"W", 10}, {"warmup", 1000}, {"frame_warmup", 100}, {"seed", 1}};
  j["outputs"] = {{"dir", "out"}};
  j["verify"] = {{"gammas", {-0.02, -0.01, -0.005, 0.0, 0.005, 0.01, 0.02}},
                 {"n_replicas", 8},
                 {"steps", 1000000},
                 {"warmup", 1000},
                 {"tolerance_k", 3.0},
                 {"perturbation", "xopt"}};
  j["flags"] = {{"unstable_sign", -1}, {"parallel_workers", 1}};
  if (name == "solenoid2d") {
    j["basis"] = {{"mode", "full"}, {"N", 15}, {"p", 5}, {"weights", "2pi-inverse"}};
    j["grid"] = {{"lo", {-0.5, 0.0}}, {"hi", {0.5, 1.0}}, {"n", {21, 21}}};
  } else if (name == "solenoid3d") {
    j["basis"] = {{"mode", "full"}, {"N", 11}, {"p", 5}, {"weights", "2pi-inverse"}};
    // slices at x3 = 0 and x3 = 0.5
    j["grid"] = {{"lo", {-0.5, 0.0, 0.0}}, {"hi", {0.5, 1.0, 0.5}}, {"n", {21, 21, 2}}};
  } else if (name == "solenoid21d") {
    j["basis"] = {{"mode", "restricted"}, {"N", 21}, {"p", 4}, {"weights", "2pi-inverse"}};
    std::vector<double> lo(21, 0.0), hi(21, 0.0);
    std::vector<int> n(21, 1);
    lo[0] = -0.5;
    hi[0] = 0.5;
    n[0] = 101;
    j["grid"] = {{"lo", lo}, {"hi", hi}, {"n", n}};
  } else {
    throw ConfigError("unknown preset '" + name + "' (known: solenoid2d, solenoid3d, solenoid21d)");
  }
  return j;
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

// Typed, key-checked access to one JSON object.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + " must be an object");
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError("unknown key " + path_ + "." + it.key());
  }

  bool has(const std::string& k) const { return j_.contains(k); }
  const json& raw(const std::string& k) {
    seen_.insert(k);
    return j_.at(k);
  }
  std::string name(const std::string& k) const { return path_ + "." + k; }

  template <class T>
  void get(const std::string& k, T& out) {
    if (!has(k)) return;
    const json& v = raw(k);
    try {
      if constexpr (std::is_unsigned_v<T>) {
        if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError(name(k) + " must be a nonnegative integer");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError(name(k) + " must be an integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError(name(k) + " must be a number");
      }
      out = v.get<T>();
    } catch (const json::exception&) {
      throw ConfigError(name(k) + " has the wrong type");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

BasisSpec BasisConfig::spec(int dim) const {
  BasisSpec s;
  s.mode = mode;
  s.dim = dim;
  s.n_per_dim = N;
  if (!weights.empty()) {
    s.weighting.p = p;
    s.weighting.c = weights;
  } else if (weights_preset == "2pi-inverse") {
    s.weighting = HpWeighting::inverse_two_pi(p);
  } else if (weights_preset == "uniform") {
    s.weighting = HpWeighting::uniform(p);
  } else {
    throw ConfigError("basis.weights: unknown preset '" + weights_preset + "'");
  }
  s.weighting.validate();
  return s;
}

std::unique_ptr<MapModel> RunConfig::make_model() const {
  if (custom_model) return std::make_unique<SolenoidMap>(custom);
  return optresp::make_model(model_name);
}

int RunConfig::dim() const {
  if (custom_model) return custom.dim;
  return make_model()->dim();
}

std::vector<std::string> RunConfig::warnings() const {
  std::vector<std::string> w;
  const int m = dim();
  if (basis.mode == BasisMode::Full && basis.p < 4 + m / 2)
    w.push_back("basis.p = " + std::to_string(basis.p) + " is below 4 + floor(M/2) = " + std::to_string(4 + m / 2) +
                "; the H^p space may not embed in C^3, proceeding anyway");
  return w;
}

std::uint64_t RunConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : resolved_json) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::string> preset_names() { return {"solenoid2d", "solenoid3d", "solenoid21d"}; }

std::string preset_document(const std::string& name) { return preset_json(name).dump(2); }

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig resolve_config(const std::string& preset_in, const std::vector<std::string>& overlays) {
  std::vector<json> docs;
  for (std::size_t i = 0; i < overlays.size(); ++i) {
    if (overlays[i].empty()) continue;
    docs.push_back(parse_json(overlays[i], "config overlay " + std::to_string(i)));
    if (!docs.back().is_object()) throw ConfigError("config document must be a JSON object");
  }
  std::string preset = preset_in;
  for (const auto& d : docs)
    if (preset.empty() && d.contains("preset")) {
      if (!d["preset"].is_string()) throw ConfigError("preset must be a string");
      preset = d["preset"].get<std::string>();
    }
  if (preset.empty()) preset = "solenoid2d";

  json merged = preset_json(preset);
  for (auto d : docs) {
    d.erase("preset");
    merged.merge_patch(d);
  }

  RunConfig c;
  c.preset = preset;
  Section top(merged, "config");

  {
    const json& m = top.raw("model");
    if (m.is_string()) {
      c.model_name = m.get<std::string>();
      if (!ModelRegistry::global().contains(c.model_name)) throw ConfigError("model: unknown model '" + c.model_name + "'");
    } else {
      c.custom_model = true;
      Section s(m, "model");
      s.get("name", c.custom.name);
      s.get("dim", c.custom.dim);
      s.get("contraction", c.custom.contraction);
      s.get("cos_coupling", c.custom.cos_coupling);
      s.get("sin_coupling", c.custom.sin_coupling);
      s.get("expansion", c.custom.expansion);
      s.get("phi_linear", c.custom.phi_linear);
      s.get("phi_cubic", c.custom.phi_cubic);
      s.get("phi_quadratic", c.custom.phi_quadratic);
      s.get("phi_first_quadratic", c.custom.phi_first_quadratic);
      if (c.custom.dim < 2) throw ConfigError("model.dim must be at least 2");
      c.model_name = c.custom.name;
    }
  }
  {
    Section s(top.raw("basis"), "basis");
    std::string mode = "full";
    s.get("mode", mode);
    if (mode == "full")
      c.basis.mode = BasisMode::Full;
    else if (mode == "restricted")
      c.basis.mode = BasisMode::Restricted;
    else
      throw ConfigError("basis.mode must be 'full' or 'restricted'");
    s.get("N", c.basis.N);
    s.get("p", c.basis.p);
    if (c.basis.N < 1) throw ConfigError("basis.N must be positive");
    if (c.basis.p < 0) throw ConfigError("basis.p must be nonnegative");
    if (s.has("weights")) {
      const json& w = s.raw("weights");
      if (w.is_string()) {
        c.basis.weights_preset = w.get<std::string>();
      } else if (w.is_array()) {
        for (const auto& v : w) {
          if (!v.is_number()) throw ConfigError("basis.weights entries must be numbers");
          c.basis.weights.push_back(v.get<double>());
        }
        if (c.basis.weights.size() != static_cast<std::size_t>(c.basis.p + 1))
          throw ConfigError("basis.weights must have p+1 entries");
      } else {
        throw ConfigError("basis.weights must be a preset name or an array");
      }
    }
  }
  {
    Section s(top.raw("engine"), "engine");
    s.get("seg_len", c.engine.seg_len);
    s.get("n_segments", c.engine.n_segments);
    s.get("W", c.engine.W);
    s.get("warmup", c.engine.warmup);
    s.get("frame_warmup", c.engine.frame_warmup);
    s.get("seed", c.engine.seed);
  }
  {
    Section s(top.raw("outputs"), "outputs");
    s.get("dir", c.out_dir);
  }
  {
    Section s(top.raw("verify"), "verify");
    s.get("gammas", c.verify.sweep.gammas);
    s.get("n_replicas", c.verify.sweep.n_replicas);
    s.get("steps", c.verify.sweep.steps);
    s.get("warmup", c.verify.sweep.warmup);
    s.get("tolerance_k", c.verify.tolerance_k);
    s.get("perturbation", c.verify.perturbation);
    if (!(c.verify.tolerance_k > 0.0)) throw ConfigError("verify.tolerance_k must be positive");
  }
  {
    Section s(top.raw("grid"), "grid");
    s.get("lo", c.grid.lo);
    s.get("hi", c.grid.hi);
    s.get("n", c.grid.n);
  }
  {
    Section s(top.raw("flags"), "flags");
    s.get("unstable_sign", c.engine.unstable_sign);
    s.get("parallel_workers", c.engine.workers);
  }
  c.verify.sweep.seed = c.engine.seed;
  c.verify.sweep.workers = c.engine.workers;

  c.engine.validate();
  c.verify.sweep.validate();
  const int dim = c.dim();
  c.grid.validate(dim);
  (void)c.basis.spec(dim);
  if (c.basis.mode == BasisMode::Restricted && dim < 2) throw ConfigError("basis.mode restricted needs dim >= 2");
  c.resolved_json = merged.dump();
  return c;
}

}  // namespace optresp
