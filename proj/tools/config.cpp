#include "config.hpp"

#include <fstream>
#include <sstream>

namespace vkh::cli {

namespace fs = std::filesystem;
using nlohmann::json;

Config Config::load(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("config", "cannot open '" + file.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    // byte offset -> line and column
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') ++line, col = 1;
      else ++col;
    }
    throw ConfigError("config", file.string() + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " +
                                    e.what());
  }
  return from_json(std::move(j), fs::absolute(file).parent_path());
}

Config Config::from_json(json j, fs::path base_dir) {
  if (!j.is_object()) throw ConfigError("config", "top level must be an object");
  Config c;
  c.input_ = j;
  c.root_ = std::move(j);
  c.base_dir_ = std::move(base_dir);
  return c;
}

json::json_pointer Config::pointer(const std::string& key) {
  std::string p;
  std::size_t start = 0;
  while (start <= key.size()) {
    const std::size_t dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError(key, "malformed key");
    p += "/" + part;
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  return json::json_pointer(p);
}

void Config::set(const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set", "expected key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  try {
    root_[pointer(key)] = value;
    input_[pointer(key)] = value;
  } catch (const json::exception& e) {
    throw ConfigError(key, e.what());
  }
}

bool Config::has(const std::string& key) const {
  const auto p = pointer(key);
  return root_.contains(p) && !root_.at(p).is_null();
}

const json& Config::node(const std::string& key) {
  if (!has(key)) throw ConfigError(key, "missing");
  used_.insert(key);
  return root_.at(pointer(key));
}

void Config::put(const std::string& key, json value) {
  root_[pointer(key)] = std::move(value);
  used_.insert(key);
}

fs::path Config::existing_path(const std::string& key) {
  fs::path p = require<std::string>(key);
  if (p.is_relative()) p = base_dir_ / p;
  if (!fs::exists(p)) throw ConfigError(key, "file not found: " + p.string());
  return p;
}

std::vector<std::string> Config::unused_keys() const {
  std::vector<std::string> out;
  auto covered = [&](const std::string& k) {
    for (const auto& u : used_)
      if (k == u || (k.size() > u.size() && k.compare(0, u.size(), u) == 0 && k[u.size()] == '.')) return true;
    return false;
  };
  auto walk = [&](auto&& self, const json& j, const std::string& prefix) -> void {
    if (j.is_object() && !j.empty()) {
      for (const auto& [k, v] : j.items()) self(self, v, prefix.empty() ? k : prefix + "." + k);
    } else if (!covered(prefix)) {
      out.push_back(prefix);
    }
  };
  walk(walk, input_, "");
  return out;
}

double positive(const std::string& key, double v) {
  if (!(v > 0.0)) throw ConfigError(key, "must be positive");
  return v;
}

int positive(const std::string& key, int v) {
  if (v <= 0) throw ConfigError(key, "must be positive");
  return v;
}

void strictly_decreasing(const std::string& key, const std::vector<double>& v, std::size_t min_size) {
  if (v.size() < min_size) throw ConfigError(key, "at least " + std::to_string(min_size) + " value(s) required");
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] > 0.0)) throw ConfigError(key, "values must be positive");
    if (i > 0 && !(v[i] < v[i - 1])) throw ConfigError(key, "values must be strictly decreasing");
  }
}

}  // namespace vkh::cli
