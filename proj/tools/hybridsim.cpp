// hybridsim command line: run experiments and validate configs.
#include <cstdlib>
#include <future>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/cfg/helpers.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "hybridsim/hybridsim.hpp"

namespace {

int report_error(hybridsim::ErrorCode code, const std::string& message) {
  std::cerr << nlohmann::json{{"error", hybridsim::to_string(code)}, {"message", message}}.dump() << std::endl;
  return code == hybridsim::ErrorCode::kInvariantViolation ? 2 : 1;
}

std::pair<std::uint64_t, std::uint64_t> parse_seed_range(const std::string& text) {
  const auto dots = text.find("..");
  if (dots == std::string::npos) {
    throw hybridsim::Error(hybridsim::ErrorCode::kValidationError, "--seeds expects A..B");
  }
  try {
    const auto a = std::stoull(text.substr(0, dots));
    const auto b = std::stoull(text.substr(dots + 2));
    if (b < a) throw hybridsim::Error(hybridsim::ErrorCode::kValidationError, "--seeds range is empty");
    return {a, b};
  } catch (const std::logic_error&) {
    throw hybridsim::Error(hybridsim::ErrorCode::kValidationError, "--seeds expects A..B");
  }
}

int run_command(const std::string& config, std::optional<std::uint64_t> seed, std::optional<std::string> out,
                std::optional<std::string> seeds) {
  namespace hs = hybridsim;
  if (!seeds) {
    hs::RunOverrides ov;
    ov.seed = seed;
    if (out) ov.output_dir = *out;
    const auto result = hs::run(config, ov);
    std::cout << "wrote " << result.artifacts.size() << " artifacts to " << result.output_dir.string() << "\n";
    return 0;
  }

  const auto [first, last] = parse_seed_range(*seeds);
  const auto base = hs::load_run_config(config);
  const std::filesystem::path root = out ? std::filesystem::path(*out) : base.output_dir;
  std::vector<std::future<hs::RunResult>> jobs;
  for (auto s = first; s <= last; ++s) {
    jobs.push_back(std::async(std::launch::async, [&config, &root, s] {
      hs::RunOverrides ov;
      ov.seed = s;
      ov.output_dir = root / ("seed-" + std::to_string(s));
      return hs::run(config, ov);
    }));
  }
  for (auto& j : jobs) {
    const auto r = j.get();
    std::cout << "wrote " << r.artifacts.size() << " artifacts to " << r.output_dir.string() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("hybridsim");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* level = std::getenv("HYBRIDSIM_LOG")) spdlog::cfg::helpers::load_levels(level);

  CLI::App app{"hybridsim: hybrid-cloud distributed database simulator"};
  app.require_subcommand(1);

  std::string run_config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> seeds;
  auto* run = app.add_subcommand("run", "Run an experiment config");
  run->add_option("config", run_config, "Run config JSON")->required();
  run->add_option("--seed", seed, "Override the run seed");
  run->add_option("--out", out, "Output directory");
  run->add_option("--seeds", seeds, "Run seeds A..B in parallel, one directory per seed");

  std::string validate_config;
  auto* validate = app.add_subcommand("validate", "Validate a run config and everything it references");
  validate->add_option("config", validate_config, "Run config JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error(hybridsim::ErrorCode::kValidationError, std::string("usage: ") + e.what());
  }

  try {
    if (*run) return run_command(run_config, seed, out, seeds);
    hybridsim::validate_config(validate_config);
    std::cout << "ok\n";
    return 0;
  } catch (const hybridsim::Error& e) {
    return report_error(e.code(), e.what());
  } catch (const std::exception& e) {
    return report_error(hybridsim::ErrorCode::kInvariantViolation, e.what());
  }
}
