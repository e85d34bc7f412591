#include "config.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace phantom::cli {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

double number(const json& obj, const std::string& key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(where + "." + key + ": expected a number");
  return v.get<double>();
}

void read_number(const json& obj, const std::string& key, const std::string& where, double& out) {
  if (obj.contains(key)) out = number(obj, key, where);
}

void read_int(const json& obj, const std::string& key, const std::string& where, int& out) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) throw ConfigError(where + "." + key + ": expected an integer");
  out = v.get<int>();
}

double& param_ref(ParameterValues& v, const std::string& key) {
  if (key == "a0") return v.a0;
  if (key == "a1") return v.a1;
  if (key == "a2") return v.a2;
  if (key == "c") return v.c;
  if (key == "b1") return v.b1;
  if (key == "b2") return v.b2;
  if (key == "lambda1") return v.lambda1;
  if (key == "lambda3") return v.lambda3;
  if (key == "mu1") return v.mu1;
  if (key == "mu3") return v.mu3;
  if (key == "eps") return v.eps;
  if (key == "delta") return v.delta;
  throw ConfigError("unknown parameter '" + key + "'");
}

}  // namespace

std::vector<double> SweepAxis::values() const {
  std::vector<double> out;
  if (n == 1) return {from};
  for (int i = 0; i < n; ++i) out.push_back(from + (to - from) * i / (n - 1));
  return out;
}

ParameterSet RunConfig::parameter_set() const { return ParameterSet(params); }

void RunConfig::validate() const {
  (void)parameter_set();
  if (!(tol.abs > 0.0) || !(tol.rel > 0.0)) throw ConfigError("tolerances: abs and rel must be > 0");
  if (!(eta > 0.0)) throw ConfigError("sections.eta must be > 0");
  if (!(rho > 0.0)) throw ConfigError("sections.rho must be > 0");
  const auto& t = thresholds;
  if (!(t.surge_factor > 0.0) || !(t.pulse_factor > 0.0) || !(t.small_factor > 0.0) ||
      !(t.pause_radius > 0.0)) {
    throw ConfigError("classifier: thresholds must be > 0");
  }
  if (!(t.small_factor < t.pulse_factor)) throw ConfigError("classifier: small_factor must be < pulse_factor");
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
  if (sweep.workers < 1) throw ConfigError("sweep.workers must be >= 1");
  if (!(sweep.t_end > sweep.transient) || sweep.transient < 0.0) {
    throw ConfigError("sweep: need 0 <= transient < t_end");
  }
  for (const auto& ax : sweep.axes) {
    ParameterValues probe = params;
    param_ref(probe, ax.param);
    if (ax.n < 1) throw ConfigError("sweep.axes: n must be >= 1");
  }
}

ordered_json RunConfig::to_json() const {
  ordered_json j;
  const ParameterSet p = parameter_set();
  for (const auto& name : ParameterSet::field_names()) j[name] = p.get(name);
  j["tolerances"] = {{"abs", tol.abs}, {"rel", tol.rel}};
  j["sections"] = {{"eta", eta}, {"rho", rho}};
  j["classifier"] = {{"surge_factor", thresholds.surge_factor},
                     {"pulse_factor", thresholds.pulse_factor},
                     {"small_factor", thresholds.small_factor},
                     {"pause_radius", thresholds.pause_radius}};
  j["output_dir"] = output_dir;
  ordered_json axes = ordered_json::array();
  for (const auto& ax : sweep.axes) {
    axes.push_back({{"param", ax.param}, {"from", ax.from}, {"to", ax.to}, {"n", ax.n}});
  }
  j["sweep"] = {{"workers", sweep.workers},
                {"t_end", sweep.t_end},
                {"transient", sweep.transient},
                {"axes", axes}};
  return j;
}

RunConfig RunConfig::from_json(const json& j) {
  std::set<std::string> top(ParameterSet::field_names().begin(), ParameterSet::field_names().end());
  top.insert({"tolerances", "sections", "classifier", "output_dir", "sweep"});
  reject_unknown(j, top, "config");

  RunConfig cfg;
  for (const auto& name : ParameterSet::field_names()) {
    if (j.contains(name)) param_ref(cfg.params, name) = number(j, name, "config");
  }
  if (j.contains("tolerances")) {
    const json& t = j.at("tolerances");
    reject_unknown(t, {"abs", "rel"}, "tolerances");
    read_number(t, "abs", "tolerances", cfg.tol.abs);
    read_number(t, "rel", "tolerances", cfg.tol.rel);
  }
  if (j.contains("sections")) {
    const json& s = j.at("sections");
    reject_unknown(s, {"eta", "rho"}, "sections");
    read_number(s, "eta", "sections", cfg.eta);
    read_number(s, "rho", "sections", cfg.rho);
  }
  if (j.contains("classifier")) {
    const json& c = j.at("classifier");
    reject_unknown(c, {"surge_factor", "pulse_factor", "small_factor", "pause_radius"}, "classifier");
    read_number(c, "surge_factor", "classifier", cfg.thresholds.surge_factor);
    read_number(c, "pulse_factor", "classifier", cfg.thresholds.pulse_factor);
    read_number(c, "small_factor", "classifier", cfg.thresholds.small_factor);
    read_number(c, "pause_radius", "classifier", cfg.thresholds.pause_radius);
  }
  if (j.contains("output_dir")) {
    if (!j.at("output_dir").is_string()) throw ConfigError("output_dir: expected a string");
    cfg.output_dir = j.at("output_dir").get<std::string>();
  }
  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    reject_unknown(s, {"workers", "t_end", "transient", "axes"}, "sweep");
    read_int(s, "workers", "sweep", cfg.sweep.workers);
    read_number(s, "t_end", "sweep", cfg.sweep.t_end);
    read_number(s, "transient", "sweep", cfg.sweep.transient);
    if (s.contains("axes")) {
      if (!s.at("axes").is_array()) throw ConfigError("sweep.axes: expected an array");
      for (const json& a : s.at("axes")) {
        reject_unknown(a, {"param", "from", "to", "n"}, "sweep.axes");
        SweepAxis ax;
        if (!a.contains("param") || !a.at("param").is_string()) {
          throw ConfigError("sweep.axes: 'param' must be a string");
        }
        ax.param = a.at("param").get<std::string>();
        ax.from = number(a, "from", "sweep.axes");
        ax.to = number(a, "to", "sweep.axes");
        read_int(a, "n", "sweep.axes", ax.n);
        cfg.sweep.axes.push_back(ax);
      }
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  return from_json(j);
}

void apply_overrides(RunConfig& cfg, const std::vector<std::string>& overrides) {
  for (const auto& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--param expects key=value, got '" + item + "'");
    const std::string key = item.substr(0, eq);
    const std::string text = item.substr(eq + 1);
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (text.empty() || *end != '\0') throw ConfigError("--param " + key + ": '" + text + "' is not a number");
    param_ref(cfg.params, key) = v;
  }
  cfg.validate();
}

std::string resolve_output_dir(const RunConfig& cfg) {
  if (const char* env = std::getenv("PHANTOM_OUTPUT_DIR"); env && *env) return env;
  return cfg.output_dir;
}

std::string config_hash(const RunConfig& cfg) {
  const std::string text = cfg.to_json().dump();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace phantom::cli
