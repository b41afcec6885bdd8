#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "config.hpp"
#include "report.hpp"
#include "vkh/effective.hpp"

namespace vkh::cli {

struct Context {
  Config& cfg;
  Report& report;
  std::filesystem::path out;
};

void cmd_effective(Context& ctx);
void cmd_properties(Context& ctx);
void cmd_griso(Context& ctx);
void cmd_plate(Context& ctx);
void cmd_pipeline(Context& ctx);

// Shared pieces.
MicrostructureField load_field(Config& cfg);
CorrectorOptions corrector_options(Config& cfg);
std::vector<double> h_list(Config& cfg);
Point2 point(const nlohmann::json& j, const std::string& key);
Rect rect(const nlohmann::json& j, const std::string& key);

/// Effective stage; returns the record at the smallest radius for every point.
std::vector<EffectiveDensity> run_effective(Context& ctx);
/// Plate stage. `records` feeds the "effective" density source.
void run_plate(Context& ctx, const std::vector<EffectiveDensity>* records);

}  // namespace vkh::cli
