#pragma once

#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "config.hpp"

namespace vkh::cli {

struct Check {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

/// Run record. report.json carries no timings, so identical configs give
/// identical bytes; wall times go to timings.csv.
class Report {
 public:
  explicit Report(std::string command) : command_(std::move(command)) {}

  nlohmann::json& section(const std::string& name) { return sections_[name]; }
  void check(std::string name, bool pass, double value, double tolerance, std::string detail = {});
  /// Deduplicated, in order of first appearance.
  void flag(const std::string& f);
  void note(std::string n) { notes_.push_back(std::move(n)); }
  void timing(std::string label, double seconds) { timings_.emplace_back(std::move(label), seconds); }

  const std::vector<Check>& checks() const { return checks_; }
  const std::vector<std::string>& flags() const { return flags_; }
  bool all_pass() const;

  /// Label of the running stage, for error messages.
  std::string stage;

  void write(const std::filesystem::path& dir, const Config& cfg) const;
  void print_summary(std::FILE* out) const;

 private:
  std::string command_;
  nlohmann::json sections_ = nlohmann::json::object();
  std::vector<Check> checks_;
  std::vector<std::string> flags_;
  std::vector<std::string> notes_;
  std::vector<std::pair<std::string, double>> timings_;
};

template <class F>
auto timed(Report& r, const std::string& label, F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  auto stop = [&] { r.timing(label, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()); };
  if constexpr (std::is_void_v<decltype(f())>) {
    f();
    stop();
  } else {
    auto v = f();
    stop();
    return v;
  }
}

/// Shortest round-trip decimal form, `.` separator.
std::string num(double v);
void write_text(const std::filesystem::path& file, const std::string& text);

/// Runs f(i) for i < n on the OpenMP pool; results keep index order, the first
/// exception (lowest index) is rethrown.
template <class T, class F>
std::vector<T> parallel_map(int n, F&& f) {
  std::vector<std::optional<T>> out(static_cast<std::size_t>(n));
  std::vector<std::exception_ptr> err(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(dynamic, 1)
  for (int i = 0; i < n; ++i) {
    try {
      out[i] = f(i);
    } catch (...) {
      err[i] = std::current_exception();
    }
  }
  for (auto& e : err)
    if (e) std::rethrow_exception(e);
  std::vector<T> v;
  v.reserve(out.size());
  for (auto& o : out) v.push_back(std::move(*o));
  return v;
}

}  // namespace vkh::cli
