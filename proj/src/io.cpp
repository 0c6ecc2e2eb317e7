#include "coed/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "coed/rng.hpp"

namespace coed::io {

namespace fs = std::filesystem;
using nlohmann::json;

void write_csv(const std::string& path, const std::vector<std::string>& header, const Mat& rows) {
  if (header.size() != static_cast<size_t>(rows.cols()) && rows.size() != 0) {
    throw std::invalid_argument("write_csv: header width does not match the data");
  }
  std::ofstream out(path);
  if (!out) throw ConfigError("io: cannot write '" + path + "'");
  for (size_t j = 0; j < header.size(); ++j) {
    if (j) out << ",";
    out << header[j];
  }
  out << "\n";
  char buf[32];
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < rows.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", rows(i, j));
      if (j) out << ",";
      out << buf;
    }
    out << "\n";
  }
  if (!out) throw ConfigError("io: write failed for '" + path + "'");
}

int CsvData::column(const std::string& name) const {
  for (size_t j = 0; j < header.size(); ++j) {
    if (header[j] == name) return static_cast<int>(j);
  }
  throw ConfigError("io: csv has no column '" + name + "'");
}

CsvData read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("io: cannot open '" + path + "'");
  CsvData data;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("io: '" + path + "' is empty");
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) data.header.push_back(cell);
  }
  std::vector<double> values;
  int nrows = 0;
  const int ncols = static_cast<int>(data.header.size());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    int c = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ConfigError("io: non-numeric cell '" + cell + "' in '" + path + "'");
      }
      ++c;
    }
    if (c != ncols) throw ConfigError("io: ragged row in '" + path + "'");
    ++nrows;
  }
  data.rows.resize(nrows, ncols);
  for (int i = 0; i < nrows; ++i) {
    for (int j = 0; j < ncols; ++j) data.rows(i, j) = values[i * ncols + j];
  }
  return data;
}

std::string file_checksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("io: cannot open '" + path + "' for checksum");
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string bytes = ss.str();
  uint64_t h = rng::fnv1a(bytes);
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct RunManifest::State {
  json j;
};

RunManifest RunManifest::open(const std::string& dir, const std::string& config_snapshot,
                              uint64_t seed) {
  RunManifest m;
  m.dir_ = dir;
  m.state_ = std::make_shared<State>();
  fs::create_directories(dir);
  fs::path path = fs::path(dir) / "manifest.json";
  if (fs::exists(path)) {
    std::ifstream in(path);
    try {
      in >> m.state_->j;
    } catch (const std::exception& e) {
      throw ConfigError("io: corrupt manifest in '" + dir + "': " + e.what());
    }
    std::string prev = m.state_->j.value("config", "");
    if (prev != config_snapshot || m.state_->j.value("seed", uint64_t{0}) != seed) {
      throw ConfigError("io: '" + dir +
                        "' holds artifacts of a different configuration or seed; "
                        "use a fresh output directory");
    }
  } else {
    m.state_->j["config"] = config_snapshot;
    m.state_->j["seed"] = seed;
    m.state_->j["version"] = "coed 1.0";
    m.state_->j["phases"] = json::object();
  }
  return m;
}

void RunManifest::record_phase(const std::string& phase, double wall_seconds,
                               const std::vector<std::string>& files,
                               const std::map<std::string, double>& stats) {
  json entry;
  entry["wall_seconds"] = wall_seconds;
  json inventory = json::object();
  for (const auto& f : files) {
    inventory[f] = file_checksum((fs::path(dir_) / f).string());
  }
  entry["files"] = inventory;
  for (const auto& [k, v] : stats) entry["stats"][k] = v;
  state_->j["phases"][phase] = entry;
}

bool RunManifest::has_phase(const std::string& phase) const {
  return state_->j["phases"].contains(phase);
}

double RunManifest::stat(const std::string& phase, const std::string& name) const {
  const auto& phases = state_->j["phases"];
  if (!phases.contains(phase) || !phases[phase].contains("stats") ||
      !phases[phase]["stats"].contains(name)) {
    throw ConfigError("io: manifest lacks stat '" + name + "' for phase '" + phase + "'");
  }
  return phases[phase]["stats"][name].get<double>();
}

std::string RunManifest::checksum(const std::string& file) const {
  for (const auto& [phase, entry] : state_->j["phases"].items()) {
    (void)phase;
    if (entry.contains("files") && entry["files"].contains(file)) {
      return entry["files"][file].get<std::string>();
    }
  }
  return "";
}

void RunManifest::write() const {
  fs::path path = fs::path(dir_) / "manifest.json";
  std::ofstream out(path);
  if (!out) throw ConfigError("io: cannot write manifest to '" + dir_ + "'");
  out << state_->j.dump(2) << "\n";
}

bool RunManifest::verify(std::string* first_problem) const {
  for (const auto& [phase, entry] : state_->j["phases"].items()) {
    (void)phase;
    if (!entry.contains("files")) continue;
    for (const auto& [file, sum] : entry["files"].items()) {
      fs::path path = fs::path(dir_) / file;
      if (!fs::exists(path)) {
        if (first_problem) *first_problem = file + ": missing";
        return false;
      }
      if (file_checksum(path.string()) != sum.get<std::string>()) {
        if (first_problem) *first_problem = file + ": checksum mismatch";
        return false;
      }
    }
  }
  return true;
}

}  // namespace coed::io
