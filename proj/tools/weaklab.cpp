#include "weaklab/study.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

bool read_file(const std::string& path, std::string& text) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::ostringstream ss;
  ss << in.rdbuf();
  text = ss.str();
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"weaklab: weak-error studies for Euler schemes"};
  app.require_subcommand(1);

  std::string run_path, validate_path, list_path;
  auto* run = app.add_subcommand("run", "run the study described by a config file");
  run->add_option("config", run_path, "study config (JSON)")->required();
  auto* validate = app.add_subcommand("validate", "check a config file without running it");
  validate->add_option("config", validate_path, "study config (JSON)")->required();
  auto* list = app.add_subcommand("list-studies", "list available studies");
  list->add_option("config", list_path, "optional config; prints the study it selects");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : weaklab::kExitConfig;
  }

  if (*list) {
    if (!list_path.empty()) {
      std::string text;
      if (!read_file(list_path, text)) {
        std::cerr << "config error: cannot read '" << list_path << "'\n";
        return weaklab::kExitConfig;
      }
      try {
        const auto cfg = weaklab::parse_config(text);
        std::cout << cfg.study << "\n";
      } catch (const weaklab::Error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return weaklab::kExitConfig;
      }
      return weaklab::kExitPass;
    }
    for (const auto& [name, what] : weaklab::study_catalog()) std::cout << name << "\t" << what << "\n";
    return weaklab::kExitPass;
  }

  const std::string& path = *run ? run_path : validate_path;
  std::string text;
  if (!read_file(path, text)) {
    std::cerr << "config error: cannot read '" << path << "'\n";
    return weaklab::kExitConfig;
  }

  if (*validate) {
    try {
      const auto cfg = weaklab::parse_config(text);
      std::cout << "ok: " << cfg.study << " (" << cfg.model.name << ")\n";
      return weaklab::kExitPass;
    } catch (const weaklab::Error& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return weaklab::kExitConfig;
    }
  }

  const weaklab::StudyOutcome out = weaklab::execute_config(text);
  if (out.report) {
    for (const auto& g : out.report->gates)
      std::cout << (g.passed ? "PASS " : "FAIL ") << g.name << " value=" << g.value << " threshold=" << g.threshold
                << (g.detail.empty() ? "" : " (" + g.detail + ")") << "\n";
  }
  (out.exit_code == weaklab::kExitPass ? std::cout : std::cerr) << out.message << "\n";
  return out.exit_code;
}
