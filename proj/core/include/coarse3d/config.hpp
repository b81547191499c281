#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace coarse3d {

// Flat "key = value" configuration ('#' comments). Unknown keys are
// rejected; every key has a documented default.
class ExperimentConfig {
 public:
  ExperimentConfig();

  static ExperimentConfig from_file(const std::string& path);
  void apply_file(const std::string& path);
  // "key=value" form, as passed to --override
  void apply_override(const std::string& kv);
  void set(const std::string& key, const std::string& value);

  std::string get(const std::string& key) const;
  int get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::uint64_t get_seed(const std::string& key) const;  // honors COARSE3D_SEED fallback
  std::vector<int> get_int_list(const std::string& key) const;

  // effective config, one key per line, sorted
  std::string echo() const;
  static const std::map<std::string, std::string>& defaults();

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace coarse3d
