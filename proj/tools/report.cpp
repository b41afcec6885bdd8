#include "report.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdlib>
#include <fstream>

#ifndef VKH_VERSION
#define VKH_VERSION "unknown"
#endif

namespace vkh::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::string num(double v) {
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + file.string() + "'");
  out << text;
  if (!out) throw Error("write failed for '" + file.string() + "'");
}

void Report::check(std::string name, bool pass, double value, double tolerance, std::string detail) {
  checks_.push_back({std::move(name), pass, value, tolerance, std::move(detail)});
}

void Report::flag(const std::string& f) {
  if (std::find(flags_.begin(), flags_.end(), f) == flags_.end()) flags_.push_back(f);
}

bool Report::all_pass() const {
  return std::all_of(checks_.begin(), checks_.end(), [](const Check& c) { return c.pass; });
}

void Report::write(const fs::path& dir, const Config& cfg) const {
  json checks = json::array();
  for (const auto& c : checks_) {
    json e = {{"name", c.name}, {"pass", c.pass}, {"value", c.value}, {"tolerance", c.tolerance}};
    if (!c.detail.empty()) e["detail"] = c.detail;
    checks.push_back(std::move(e));
  }
  char hash[32];
  std::snprintf(hash, sizeof hash, "fnv1a64:%016" PRIx64, fnv1a(cfg.resolved().dump()));
  json j = {{"command", command_},
            {"code_version", VKH_VERSION},
            {"config", cfg.resolved()},
            {"config_hash", hash},
            {"sections", sections_},
            {"checks", checks},
            {"flags", flags_},
            {"notes", notes_},
            {"unused_keys", cfg.unused_keys()},
            {"status", all_pass() ? "PASS" : "FAIL"}};
  write_text(dir / "report.json", j.dump(2) + "\n");

  std::string t = "label,seconds\n";
  for (const auto& [label, s] : timings_) t += label + "," + num(s) + "\n";
  write_text(dir / "timings.csv", t);
}

void Report::print_summary(std::FILE* out) const {
  for (const auto& c : checks_)
    std::fprintf(out, "%s  %s: %s (tol %s)%s%s\n", c.pass ? "PASS" : "FAIL", c.name.c_str(), num(c.value).c_str(),
                 num(c.tolerance).c_str(), c.detail.empty() ? "" : "; ", c.detail.c_str());
  for (const auto& f : flags_) std::fprintf(out, "FLAG  %s\n", f.c_str());
  std::fprintf(out, "%s: %zu check(s), %s\n", command_.c_str(), checks_.size(), all_pass() ? "PASS" : "FAIL");
}

}  // namespace vkh::cli
