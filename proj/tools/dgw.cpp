// Command-line front end for the defective branching-process toolkit.
//
//   dgw run CONFIG            run the command named inside CONFIG
//   dgw validate CONFIG       check CONFIG without running it
//   dgw <command> CONFIG      run CONFIG, requiring its command to match

#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "dgw/experiment.hpp"

namespace {

using dgw::json;

json error_json(const char* kind, const std::string& message, const std::string& pointer = {}) {
  json j{{"error", kind}, {"message", message}};
  if (!pointer.empty()) j["pointer"] = pointer;
  return j;
}

int report(const json& j, int code) {
  std::cerr << j.dump() << '\n';
  return code;
}

json load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw dgw::config_error("", "cannot open config file '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw dgw::config_error("", std::string("malformed JSON: ") + e.what());
  }
}

int run(const std::string& path, const std::string& expected, unsigned threads, bool to_stdout) {
  try {
    const auto cfg = dgw::parse_config(load(path));
    if (!expected.empty() && cfg.command != expected)
      throw dgw::config_error("/command", "config runs '" + cfg.command + "', not '" + expected + "'");
    const auto artifacts = dgw::run_experiment(cfg, {threads});
    if (to_stdout) {
      for (const auto& a : artifacts) std::cout << a.content;
    } else {
      for (const auto& p : dgw::write_artifacts(cfg, artifacts)) std::cout << p << '\n';
    }
    return dgw::kExitOk;
  } catch (const dgw::config_error& e) {
    return report(error_json("config", e.message(), e.pointer().empty() ? "/" : e.pointer()), dgw::kExitConfig);
  } catch (const dgw::precondition_error& e) {
    return report(error_json("precondition", e.what()), dgw::kExitPrecondition);
  } catch (const dgw::budget_error& e) {
    return report(error_json("budget", e.what()), dgw::kExitBudget);
  } catch (const std::invalid_argument& e) {
    return report(error_json("config", e.what()), dgw::kExitConfig);
  } catch (const std::exception& e) {
    return report(error_json("internal", e.what()), dgw::kExitFailure);
  }
}

int validate(const std::string& path) {
  json cfg;
  try {
    cfg = load(path);
  } catch (const dgw::config_error& e) {
    return report(error_json("config", e.message(), "/"), dgw::kExitConfig);
  }
  bool ok = true;
  for (const auto& d : dgw::validate_config(cfg)) {
    json j{{d.warning ? "warning" : "error", d.warning ? "preflight" : "config"},
           {"pointer", d.pointer.empty() ? "/" : d.pointer},
           {"message", d.message}};
    std::cerr << j.dump() << '\n';
    ok = ok && d.warning;
  }
  if (ok) std::cout << "ok\n";
  return ok ? dgw::kExitOk : dgw::kExitConfig;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Defective Galton-Watson processes in varying environments"};
  app.set_version_flag("--version", std::string(dgw::kVersion));
  app.require_subcommand(1);

  std::string config;
  unsigned threads = 1;
  bool to_stdout = false;
  auto add_run_opts = [&](CLI::App* sub) {
    sub->add_option("config", config, "JSON experiment configuration")->required();
    sub->add_option("-j,--threads", threads, "worker threads; results do not depend on it")
        ->check(CLI::Range(1u, 1024u));
    sub->add_flag("--stdout", to_stdout, "print artifacts instead of writing files and a manifest");
  };

  auto* run_cmd = app.add_subcommand("run", "run the command named in CONFIG");
  add_run_opts(run_cmd);
  auto* validate_cmd = app.add_subcommand("validate", "validate CONFIG and report pre-flight warnings");
  validate_cmd->add_option("config", config, "JSON experiment configuration")->required();
  for (const auto& name : dgw::command_names()) add_run_opts(app.add_subcommand(name, "run a '" + name + "' config"));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : dgw::kExitConfig;
  }

  auto* sub = app.get_subcommands().front();
  if (sub == validate_cmd) return validate(config);
  return run(config, sub == run_cmd ? std::string{} : sub->get_name(), threads, to_stdout);
}
