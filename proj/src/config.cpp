#include "coed/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace coed::config {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' needs a number, got '" + v + "'");
  }
}

long long parse_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' needs an integer, got '" + v + "'");
  }
}

std::vector<std::string> split_commas(const std::string& v) {
  std::vector<std::string> parts;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) parts.push_back(trim(item));
  return parts;
}

void assign(ExperimentConfig& c, const std::string& key, const std::string& value) {
  if (key == "mesh.n") {
    c.mesh_n = static_cast<int>(parse_int(key, value));
  } else if (key == "pde.kappa") {
    c.kappa = parse_double(key, value);
  } else if (key == "pde.gamma_h") {
    c.gamma_h = parse_double(key, value);
  } else if (key == "pde.gamma_a") {
    c.gamma_a = parse_double(key, value);
  } else if (key == "pde.velocity") {
    c.velocity = value;
  } else if (key == "pde.velocity_scale") {
    c.velocity_scale = parse_double(key, value);
  } else if (key == "control.region") {
    auto parts = split_commas(value);
    if (parts.size() != 4) {
      throw ConfigError("config: control.region needs 'x0,y0,x1,y1', got '" + value + "'");
    }
    c.region_x0 = parse_double(key, parts[0]);
    c.region_y0 = parse_double(key, parts[1]);
    c.region_x1 = parse_double(key, parts[2]);
    c.region_y1 = parse_double(key, parts[3]);
  } else if (key == "control.beta_reg") {
    c.beta_reg = parse_double(key, value);
  } else if (key == "control.T") {
    c.T = parse_double(key, value);
  } else if (key == "control.nt") {
    c.nt = static_cast<int>(parse_int(key, value));
  } else if (key == "control.target") {
    c.target = value;
  } else if (key == "prior.alpha") {
    c.alpha = parse_double(key, value);
  } else if (key == "prior.beta_pr") {
    c.beta_pr = parse_double(key, value);
  } else if (key == "noise.delta") {
    c.delta = parse_double(key, value);
  } else if (key == "sensors.grid") {
    auto parts = split_commas(value);
    if (parts.size() != 2) {
      throw ConfigError("config: sensors.grid needs 'rows,cols', got '" + value + "'");
    }
    c.sensor_rows = static_cast<int>(parse_int(key, parts[0]));
    c.sensor_cols = static_cast<int>(parse_int(key, parts[1]));
  } else if (key == "oed.k") {
    c.k = static_cast<int>(parse_int(key, value));
  } else if (key == "oed.criterion") {
    c.criterion = value;
  } else if (key == "oed.random_samples") {
    c.random_samples = static_cast<int>(parse_int(key, value));
  } else if (key == "lowrank.k_f") {
    c.k_f = static_cast<int>(parse_int(key, value));
  } else if (key == "lowrank.p") {
    c.p = static_cast<int>(parse_int(key, value));
  } else if (key == "lowrank.trace_probes") {
    c.trace_probes = static_cast<int>(parse_int(key, value));
  } else if (key == "seed") {
    long long s = parse_int(key, value);
    if (s < 0) throw ConfigError("config: seed must be nonnegative");
    c.seed = static_cast<uint64_t>(s);
  } else if (key == "output.dir") {
    c.output_dir = value;
  } else {
    throw ConfigError("config: unknown key '" + key + "'");
  }
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::function<Eigen::Vector2d(double, double)> ExperimentConfig::velocity_field() const {
  double s = velocity_scale;
  if (velocity == "drift-rotation") {
    return [s](double x, double y) { return Eigen::Vector2d{s * (-y - 0.5), s * (x - 0.5)}; };
  }
  if (velocity == "rotation") {
    return [s](double x, double y) { return Eigen::Vector2d{s * (0.5 - y), s * (x - 0.5)}; };
  }
  if (velocity == "zero") {
    return [](double, double) { return Eigen::Vector2d{0.0, 0.0}; };
  }
  throw ConfigError("config: unknown velocity preset '" + velocity + "'");
}

void validate(const ExperimentConfig& c) {
  if (c.mesh_n < 2) throw ConfigError("config: mesh.n must be >= 2");
  if (!(c.kappa > 0.0)) throw ConfigError("config: pde.kappa must be positive");
  c.velocity_field();  // rejects unknown presets
  if (!(c.region_x0 < c.region_x1) || !(c.region_y0 < c.region_y1)) {
    throw ConfigError("config: control.region must satisfy x0 < x1 and y0 < y1");
  }
  if (c.region_x0 < 0.0 || c.region_y0 < 0.0 || c.region_x1 > 1.0 || c.region_y1 > 1.0) {
    throw ConfigError("config: control.region must lie inside the unit square");
  }
  if (!(c.beta_reg > 0.0)) throw ConfigError("config: control.beta_reg must be positive");
  if (!(c.T > 0.0)) throw ConfigError("config: control.T must be positive");
  if (c.nt < 1) throw ConfigError("config: control.nt must be >= 1");
  if (c.target != "uniform" && c.target != "reachable") {
    throw ConfigError("config: control.target must be 'uniform' or 'reachable'");
  }
  if (!(c.alpha > 0.0) || !(c.beta_pr > 0.0)) {
    throw ConfigError("config: prior.alpha and prior.beta_pr must be positive");
  }
  if (!(c.delta > 0.0)) throw ConfigError("config: noise.delta must be positive");
  if (c.sensor_rows < 1 || c.sensor_cols < 1) {
    throw ConfigError("config: sensors.grid entries must be >= 1");
  }
  if (c.k < 1 || c.k > c.sensor_count()) {
    throw ConfigError("config: oed.k must be between 1 and the sensor count");
  }
  if (c.criterion != "coed" && c.criterion != "classical") {
    throw ConfigError("config: oed.criterion must be 'coed' or 'classical'");
  }
  if (c.random_samples < 1) throw ConfigError("config: oed.random_samples must be >= 1");
  if (c.k_f < 1 || c.p < 0) throw ConfigError("config: lowrank.k_f >= 1 and lowrank.p >= 0");
  if (c.trace_probes < 2) throw ConfigError("config: lowrank.trace_probes must be >= 2");
  if (c.output_dir.empty()) throw ConfigError("config: output.dir must not be empty");
}

void apply_assignment(ExperimentConfig& cfg, const std::string& line) {
  std::string body = trim(line);
  size_t eq = body.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("config: expected key=value, got '" + line + "'");
  }
  std::string key = trim(body.substr(0, eq));
  std::string value = trim(body.substr(eq + 1));
  if (key.empty()) throw ConfigError("config: missing key in '" + line + "'");
  assign(cfg, key, value);
}

ExperimentConfig parse(std::istream& in) {
  ExperimentConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string body = line;
    size_t hash = body.find('#');
    if (hash != std::string::npos) body = body.substr(0, hash);
    body = trim(body);
    if (body.empty()) continue;
    try {
      apply_assignment(cfg, body);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(e.what()) + " (line " + std::to_string(lineno) + ")");
    }
  }
  validate(cfg);
  return cfg;
}

ExperimentConfig parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  return parse(in);
}

std::string serialize(const ExperimentConfig& c) {
  std::ostringstream out;
  out << "mesh.n=" << c.mesh_n << "\n";
  out << "pde.kappa=" << fmt(c.kappa) << "\n";
  out << "pde.gamma_h=" << fmt(c.gamma_h) << "\n";
  out << "pde.gamma_a=" << fmt(c.gamma_a) << "\n";
  out << "pde.velocity=" << c.velocity << "\n";
  out << "pde.velocity_scale=" << fmt(c.velocity_scale) << "\n";
  out << "control.region=" << fmt(c.region_x0) << "," << fmt(c.region_y0) << ","
      << fmt(c.region_x1) << "," << fmt(c.region_y1) << "\n";
  out << "control.beta_reg=" << fmt(c.beta_reg) << "\n";
  out << "control.T=" << fmt(c.T) << "\n";
  out << "control.nt=" << c.nt << "\n";
  out << "control.target=" << c.target << "\n";
  out << "prior.alpha=" << fmt(c.alpha) << "\n";
  out << "prior.beta_pr=" << fmt(c.beta_pr) << "\n";
  out << "noise.delta=" << fmt(c.delta) << "\n";
  out << "sensors.grid=" << c.sensor_rows << "," << c.sensor_cols << "\n";
  out << "oed.k=" << c.k << "\n";
  out << "oed.criterion=" << c.criterion << "\n";
  out << "oed.random_samples=" << c.random_samples << "\n";
  out << "lowrank.k_f=" << c.k_f << "\n";
  out << "lowrank.p=" << c.p << "\n";
  out << "lowrank.trace_probes=" << c.trace_probes << "\n";
  out << "seed=" << c.seed << "\n";
  out << "output.dir=" << c.output_dir << "\n";
  return out.str();
}

}  // namespace coed::config
