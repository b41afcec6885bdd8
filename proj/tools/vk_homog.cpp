// vk-homog <effective|properties|griso|plate|pipeline> --config <path>
//          [--set key=value]... [--jobs N] [--out dir]
//
// Exit status: 0 all checks pass, 1 a check failed, 2 configuration or runtime error.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "commands.hpp"
#include "vkh/kernels.hpp"

namespace fs = std::filesystem;
using namespace vkh;
using namespace vkh::cli;

namespace {

int parse_jobs(const std::string& text, const char* source) {
  char* end = nullptr;
  const long n = std::strtol(text.c_str(), &end, 10);
  if (text.empty() || *end != '\0' || n < 1 || n > 4096)
    throw ConfigError(source, "expected a positive integer, got '" + text + "'");
  return static_cast<int>(n);
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<std::string, std::function<void(Context&)>> commands = {
      {"effective", cmd_effective}, {"properties", cmd_properties}, {"griso", cmd_griso},
      {"plate", cmd_plate},         {"pipeline", cmd_pipeline}};

  CLI::App app{"Effective plate densities, thin-domain decompositions and limit plate solves"};
  app.set_version_flag("--version", VKH_VERSION);
  std::string command, config_path, out_dir;
  std::vector<std::string> sets;
  int jobs = 0;
  app.add_option("command", command, "effective, properties, griso, plate or pipeline")
      ->required()
      ->check(CLI::IsMember({"effective", "properties", "griso", "plate", "pipeline"}));
  app.add_option("--config", config_path, "experiment JSON")->required();
  app.add_option("--set", sets, "override a config field, key=value with a JSON value");
  app.add_option("--jobs", jobs, "worker threads (default: $VK_HOMOG_JOBS, else OpenMP default)");
  app.add_option("--out", out_dir, "output directory (default: config field 'output')");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  Report report(command);
  try {
    Config cfg = Config::load(config_path);
    for (const auto& s : sets) cfg.set(s);

    if (jobs == 0)
      if (const char* env = std::getenv("VK_HOMOG_JOBS"); env && *env) jobs = parse_jobs(env, "VK_HOMOG_JOBS");
    if (jobs < 0) throw ConfigError("--jobs", "must be positive");
    if (jobs > 0) kernels::set_thread_count(jobs);

    if (!out_dir.empty() && cfg.has("output")) cfg.node("output");
    fs::path out = out_dir.empty() ? fs::path(cfg.get<std::string>("output", "vk-homog-out")) : fs::path(out_dir);
    if (out_dir.empty() && out.is_relative()) out = cfg.base_dir() / out;
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw Error("cannot create output directory '" + out.string() + "': " + ec.message());

    Context ctx{cfg, report, out};
    commands.at(command)(ctx);
    report.stage.clear();
    report.write(out, cfg);
    for (const auto& k : cfg.unused_keys()) std::fprintf(stderr, "warning: unused config key '%s'\n", k.c_str());
    report.print_summary(stdout);
    return report.all_pass() ? 0 : 1;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "vk-homog %s: configuration error%s%s: %s\n", command.c_str(),
                 report.stage.empty() ? "" : " in stage ", report.stage.c_str(), e.what());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "vk-homog %s: error%s%s: %s\n", command.c_str(), report.stage.empty() ? "" : " in stage ",
                 report.stage.c_str(), e.what());
  }
  return 2;
}
