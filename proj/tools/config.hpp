#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "vkh/error.hpp"

namespace vkh::cli {

/// Experiment configuration: one JSON object addressed by dotted keys.
///
/// Every default handed to get() is written back, so resolved() holds every
/// value the run used.
class Config {
 public:
  static Config load(const std::filesystem::path& file);
  static Config from_json(nlohmann::json j, std::filesystem::path base_dir = {});

  /// `key=value`; the value is parsed as JSON, otherwise taken as a string.
  void set(const std::string& assignment);

  bool has(const std::string& key) const;

  template <class T>
  T get(const std::string& key, const T& fallback) {
    if (!has(key)) {
      root_[pointer(key)] = fallback;
      used_.insert(key);
      return fallback;
    }
    return require<T>(key);
  }

  template <class T>
  T require(const std::string& key) {
    const nlohmann::json& n = node(key);
    try {
      return n.get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(key, std::string("wrong type: ") + e.what());
    }
  }

  /// Marks the subtree as used.
  const nlohmann::json& node(const std::string& key);
  void put(const std::string& key, nlohmann::json value);

  /// Resolves a path against the config directory; throws if missing.
  std::filesystem::path existing_path(const std::string& key);

  const nlohmann::json& resolved() const { return root_; }
  const std::filesystem::path& base_dir() const { return base_dir_; }
  /// Leaves of the input never read by the run.
  std::vector<std::string> unused_keys() const;

 private:
  static nlohmann::json::json_pointer pointer(const std::string& key);

  nlohmann::json root_;
  nlohmann::json input_;
  std::filesystem::path base_dir_;
  std::set<std::string> used_;
};

double positive(const std::string& key, double v);
int positive(const std::string& key, int v);
/// Non-empty, positive, strictly decreasing.
void strictly_decreasing(const std::string& key, const std::vector<double>& v, std::size_t min_size = 1);

}  // namespace vkh::cli
