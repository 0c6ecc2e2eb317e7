#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "coed/types.hpp"

namespace coed::io {

// Numeric CSV with a single header row; values serialized at full double
// precision (%.17g) so rewriting identical data is byte-identical.
void write_csv(const std::string& path, const std::vector<std::string>& header, const Mat& rows);

struct CsvData {
  std::vector<std::string> header;
  Mat rows;

  int column(const std::string& name) const;  // throws ConfigError when absent
};

CsvData read_csv(const std::string& path);

// FNV-1a over the raw file bytes, as fixed-width hex.
std::string file_checksum(const std::string& path);

// Phase-by-phase record of an experiment run: configuration snapshot, seed,
// wall times and an inventory of produced files with checksums. Stored as
// manifest.json in the output directory; phases append to it, and a phase
// rerun replaces its own entry.
class RunManifest {
 public:
  // Loads dir/manifest.json when present. An existing manifest whose
  // configuration snapshot differs is a hard error: mixing artifacts from
  // different experiments in one directory corrupts downstream phases.
  static RunManifest open(const std::string& dir, const std::string& config_snapshot,
                          uint64_t seed);

  void record_phase(const std::string& phase, double wall_seconds,
                    const std::vector<std::string>& files,
                    const std::map<std::string, double>& stats = {});

  bool has_phase(const std::string& phase) const;
  double stat(const std::string& phase, const std::string& name) const;  // ConfigError if absent
  std::string checksum(const std::string& file) const;                   // "" when unlisted

  void write() const;

  // Every listed file exists and matches its recorded checksum.
  bool verify(std::string* first_problem = nullptr) const;

  const std::string& dir() const { return dir_; }

 private:
  struct State;
  std::string dir_;
  std::shared_ptr<State> state_;
};

}  // namespace coed::io
