#include "shadow/cli/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

namespace shadow::cli {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Reads one JSON object, remembering which keys were consumed so leftovers can be rejected.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  template <class T>
  T get(const std::string& key, T fallback) {
    seen_.insert(key);
    const auto it = obj_.find(key);
    if (it == obj_.end() || it->is_null()) return fallback;
    return convert<T>(*it, key);
  }

  template <class T>
  T require(const std::string& key) {
    seen_.insert(key);
    const auto it = obj_.find(key);
    if (it == obj_.end() || it->is_null()) throw ConfigError(where(key) + ": required key is missing");
    return convert<T>(*it, key);
  }

  template <class T>
  std::optional<T> optional(const std::string& key) {
    seen_.insert(key);
    const auto it = obj_.find(key);
    if (it == obj_.end() || it->is_null()) return std::nullopt;
    return convert<T>(*it, key);
  }

  const json* child(const std::string& key) {
    seen_.insert(key);
    const auto it = obj_.find(key);
    return it == obj_.end() || it->is_null() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& item : obj_.items()) {
      if (!seen_.count(item.key())) throw ConfigError(where(item.key()) + ": unknown key");
    }
  }

  [[nodiscard]] std::string where(const std::string& key = {}) const {
    if (key.empty()) return path_.empty() ? "<root>" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  template <class T>
  T convert(const json& value, const std::string& key) const {
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!value.is_number()) throw ConfigError(where(key) + ": expected a number");
      } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
        if (!value.is_number_integer()) throw ConfigError(where(key) + ": expected an integer");
        if (value.is_number_integer() && !value.is_number_unsigned() && value.get<long long>() < 0) {
          throw ConfigError(where(key) + ": expected a non-negative integer");
        }
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!value.is_boolean()) throw ConfigError(where(key) + ": expected true or false");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!value.is_string()) throw ConfigError(where(key) + ": expected a string");
      }
      return value.get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where(key) + ": " + e.what());
    }
  }

  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

SystemConfig parse_system(const json& doc) {
  ObjectReader r(doc, "system");
  SystemConfig sc;
  sc.type = r.require<std::string>("type");
  if (sc.type == "lorenz63") {
    sc.lorenz.sigma = r.get("sigma", sc.lorenz.sigma);
    sc.lorenz.rho = r.get("rho", sc.lorenz.rho);
    sc.lorenz.beta = r.get("beta", sc.lorenz.beta);
    sc.lorenz.s = r.get("s", sc.lorenz.s);
  } else if (sc.type == "ks") {
    sc.ks.length = r.get("length", sc.ks.length);
    sc.ks.dx = r.get("dx", sc.ks.dx);
    sc.ks.s = r.get("s", sc.ks.s);
    sc.ks.advection = parse_ks_advection(r.get<std::string>("advection", to_string(sc.ks.advection)));
    (void)sc.ks.interior_nodes();
  } else {
    throw ConfigError("system.type: unknown system '" + sc.type + "' (expected lorenz63 or ks)");
  }
  r.finish();
  return sc;
}

MarchConfig parse_march(const json& doc) {
  ObjectReader r(doc, "march");
  MarchConfig mc;
  mc.T = r.require<double>("T");
  mc.segment = r.require<double>("segment");
  mc.dt = r.require<double>("dt");
  mc.m = r.require<std::size_t>("m");
  mc.spinup_initial = r.get("spinup_initial", 0.0);
  mc.spinup_final = r.get("spinup_final", 0.0);
  mc.tol_neutral = r.optional<double>("tol_neutral");
  r.finish();
  return mc;
}

StudyConfig parse_study(const json& doc) {
  ObjectReader r(doc, "study");
  StudyConfig st;
  st.mode = r.require<std::string>("mode");
  if (st.mode != "T" && st.mode != "dt") throw ConfigError("study.mode: expected \"T\" or \"dt\"");
  const json* values = r.child("values");
  if (values == nullptr || !values->is_array()) throw ConfigError("study.values: expected an array of numbers");
  for (const auto& v : *values) {
    if (!v.is_number()) throw ConfigError("study.values: expected an array of numbers");
    st.values.push_back(v.get<double>());
  }
  st.reference = r.optional<double>("reference");
  if (st.mode == "T" && !st.reference) throw ConfigError("study.reference: required for mode \"T\"");
  r.finish();
  return st;
}

OracleConfig parse_oracle(const json& doc) {
  ObjectReader r(doc, "oracle");
  OracleConfig oc;
  oc.delta_s = r.get("delta_s", oc.delta_s);
  oc.window = r.get("window", oc.window);
  oc.spinup = r.get("spinup", oc.spinup);
  oc.ensemble = r.get("ensemble", oc.ensemble);
  r.finish();
  if (!(oc.delta_s > 0.0)) throw ConfigError("oracle.delta_s: must be positive");
  if (oc.ensemble == 0) throw ConfigError("oracle.ensemble: must be at least 1");
  return oc;
}

ordered_json canonical_of(const RunConfig& c) {
  ordered_json j;
  ordered_json sys;
  sys["type"] = c.system.type;
  if (c.system.type == "lorenz63") {
    sys["sigma"] = c.system.lorenz.sigma;
    sys["rho"] = c.system.lorenz.rho;
    sys["beta"] = c.system.lorenz.beta;
    sys["s"] = c.system.lorenz.s;
  } else {
    sys["length"] = c.system.ks.length;
    sys["dx"] = c.system.ks.dx;
    sys["s"] = c.system.ks.s;
    sys["advection"] = to_string(c.system.ks.advection);
  }
  j["system"] = sys;
  j["objective"] = c.objective;
  j["integrator"] = c.integrator;
  ordered_json m;
  m["T"] = c.march.T;
  m["segment"] = c.march.segment;
  m["dt"] = c.march.dt;
  m["m"] = c.march.m;
  m["spinup_initial"] = c.march.spinup_initial;
  m["spinup_final"] = c.march.spinup_final;
  m["tol_neutral"] = c.march.tol_neutral ? ordered_json(*c.march.tol_neutral) : ordered_json(nullptr);
  j["march"] = m;
  j["algorithm"] = to_string(c.algorithm);
  j["ensemble"] = c.ensemble;
  j["seed"] = c.seed;
  j["adjoint_samples"] = c.adjoint_samples;
  j["load_trajectory"] = c.load_trajectory;
  if (c.study) {
    ordered_json st;
    st["mode"] = c.study->mode;
    st["values"] = c.study->values;
    st["reference"] = c.study->reference ? ordered_json(*c.study->reference) : ordered_json(nullptr);
    j["study"] = st;
  }
  ordered_json o;
  o["delta_s"] = c.oracle.delta_s;
  o["window"] = c.oracle.window;
  o["spinup"] = c.oracle.spinup;
  o["ensemble"] = c.oracle.ensemble;
  j["oracle"] = o;
  return j;
}

}  // namespace

RunConfig parse_config(const json& doc) {
  ObjectReader r(doc, "");
  RunConfig c;
  const json* system = r.child("system");
  if (system == nullptr) throw ConfigError("system: required key is missing");
  c.system = parse_system(*system);
  c.objective = r.get<std::string>("objective", "default");
  c.integrator = r.get<std::string>("integrator", c.system.type == "ks" ? "ralston3" : "rk4");
  const json* march = r.child("march");
  if (march == nullptr) throw ConfigError("march: required key is missing");
  c.march = parse_march(*march);
  try {
    c.algorithm = parse_algorithm(r.get<std::string>("algorithm", "auto"));
    (void)ButcherTableau::by_name(c.integrator);
  } catch (const ConfigError&) {
    throw;
  } catch (const ContractViolation& e) {
    throw ConfigError(e.what());
  }
  c.ensemble = r.get<std::size_t>("ensemble", 1);
  c.seed = r.get<std::uint64_t>("seed", 0);
  c.threads = r.get<unsigned>("threads", 1);
  c.output_dir = r.get<std::string>("output_dir", "out");
  c.adjoint_samples = r.get<std::size_t>("adjoint_samples", 200);
  c.save_trajectory = r.get("save_trajectory", false);
  c.load_trajectory = r.get<std::string>("load_trajectory", "");
  if (const json* study = r.child("study")) c.study = parse_study(*study);
  if (const json* oracle = r.child("oracle")) c.oracle = parse_oracle(*oracle);
  r.finish();

  if (c.ensemble == 0) throw ConfigError("ensemble: must be at least 1");
  if (c.objective != "default" && c.objective != "z" && c.objective != "spatial_mean") {
    throw ConfigError("objective: unknown objective '" + c.objective + "'");
  }
  if ((c.objective == "z" && c.system.type != "lorenz63") ||
      (c.objective == "spatial_mean" && c.system.type != "ks")) {
    throw ConfigError("objective: '" + c.objective + "' does not apply to system " + c.system.type);
  }
  if (c.output_dir.empty()) throw ConfigError("output_dir: must not be empty");
  const auto system_ptr = make_system(c);
  try {
    c.march.validate(system_ptr->dimension(), true);
  } catch (const ContractViolation& e) {
    throw ConfigError(std::string("march: ") + e.what());
  }
  c.canonical = canonical_of(c);
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(in, nullptr, true, false);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(doc);
}

std::unique_ptr<DynamicalSystem> make_system(const RunConfig& config) {
  if (config.system.type == "lorenz63") return std::make_unique<Lorenz63>(config.system.lorenz);
  return std::make_unique<KuramotoSivashinsky>(config.system.ks);
}

Objective make_objective(const RunConfig& config) {
  if (config.system.type == "lorenz63") return lorenz_objective();
  return ks_objective(config.system.ks);
}

ButcherTableau make_tableau(const RunConfig& config) { return ButcherTableau::by_name(config.integrator); }

std::uint64_t config_hash(const RunConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : config.canonical.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::filesystem::path resolve_output_dir(const RunConfig& config) {
  std::filesystem::path dir(config.output_dir);
  if (dir.is_relative()) {
    if (const char* root = std::getenv("SHADOW_MARCH_OUTPUT_ROOT"); root != nullptr && *root != '\0') {
      return std::filesystem::path(root) / dir;
    }
  }
  return dir;
}

}  // namespace shadow::cli
