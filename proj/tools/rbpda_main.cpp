// rbpda command-line runner. Talks to the library only through rbpda.h.
//
//   rbpda run [--config FILE] [--problem P] [--mode M] ... [--set key=value]...
//   rbpda compare DIR [DIR...] [--output FILE]
//
// Exit status: 0 success, 1 a run failed (or another runtime error),
// 2 configuration error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "rbpda/rbpda.h"

namespace {

constexpr int kExitRunFailed = 1;
constexpr int kExitConfig = 2;

struct ExperimentHandle {
  rbpda_experiment* ptr = nullptr;
  ~ExperimentHandle() { rbpda_experiment_free(ptr); }
};

std::string take_string(char* s) {
  std::string out = s ? s : "";
  rbpda_string_free(s);
  return out;
}

int report(rbpda_status st) {
  std::cerr << "rbpda: " << rbpda_last_error() << "\n";
  return st == RBPDA_ERR_CONFIG ? kExitConfig : kExitRunFailed;
}

struct RunArgs {
  std::string config;
  std::vector<std::pair<std::string, std::string>> flags;  // key, value in flag order
  std::vector<std::string> sets;
  bool dry_run = false;
};

int do_run(const RunArgs& args) {
  ExperimentHandle exp;
  rbpda_status st = args.config.empty() ? rbpda_experiment_new(&exp.ptr)
                                        : rbpda_experiment_parse_file(args.config.c_str(), &exp.ptr);
  if (st != RBPDA_OK) return st == RBPDA_ERR_IO ? report(RBPDA_ERR_CONFIG) : report(st);

  auto set = [&](const std::string& key, const std::string& value) {
    return rbpda_experiment_set(exp.ptr, key.c_str(), value.c_str());
  };
  for (const auto& kv : args.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::cerr << "rbpda: --set expects key=value, got '" << kv << "'\n";
      return kExitConfig;
    }
    if ((st = set(kv.substr(0, eq), kv.substr(eq + 1))) != RBPDA_OK) return report(st);
  }
  for (const auto& [key, value] : args.flags) {
    // --seed/--repeats describe the seed list, so they replace an explicit one
    if (key == "seed" || key == "repeats")
      if ((st = set("seeds", "")) != RBPDA_OK) return report(st);
    if ((st = set(key, value)) != RBPDA_OK) return report(st);
  }

  if (args.dry_run) {
    char* text = nullptr;
    if ((st = rbpda_experiment_to_text(exp.ptr, &text)) != RBPDA_OK) return report(st);
    std::cout << take_string(text);
    return 0;
  }

  size_t runs = 0, failures = 0;
  st = rbpda_experiment_run(exp.ptr, &runs, &failures);
  std::cout << runs << " run(s), " << failures << " failed\n";
  if (st != RBPDA_OK) return report(st);
  return 0;
}

int do_compare(const std::vector<std::string>& dirs, const std::string& output) {
  std::vector<const char*> ptrs;
  for (const auto& d : dirs) ptrs.push_back(d.c_str());
  char* csv = nullptr;
  const rbpda_status st = rbpda_compare(ptrs.data(), ptrs.size(), &csv);
  if (st != RBPDA_OK) return report(st);
  const std::string table = take_string(csv);
  if (output.empty()) {
    std::cout << table;
  } else {
    std::ofstream f(output);
    if (!f || !(f << table)) {
      std::cerr << "rbpda: cannot write " << output << "\n";
      return kExitRunFailed;
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Randomized block primal-dual saddle-point experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(rbpda_version()));

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "run an experiment and write CSV artifacts");
  run->add_option("--config", run_args.config, "key = value config file");

  // Flags mirror config keys and override file values. Kept as strings so the
  // library does the validation and reports errors by key name.
  const std::vector<std::pair<std::string, std::string>> mirrored = {
      {"--problem", "problem"}, {"--mode", "mode"},         {"--eta", "eta"},
      {"--iters", "iters"},     {"--blocks-m", "blocks_m"}, {"--blocks-n", "blocks_n"},
      {"--seed", "seed"},       {"--repeats", "repeats"},   {"--out", "out"},
  };
  for (const auto& [flag, key] : mirrored) {
    run->add_option_function<std::string>(
        flag, [&run_args, key = key](const std::string& v) { run_args.flags.emplace_back(key, v); },
        "config key " + key);
  }
  run->add_option("--set", run_args.sets, "any config key, as key=value (repeatable)");
  run->add_flag("--dry-run", run_args.dry_run, "print the effective config and exit");

  std::vector<std::string> dirs;
  std::string output;
  auto* cmp = app.add_subcommand("compare", "rank configurations across result directories");
  cmp->add_option("directories", dirs, "directories holding summary.csv")->required();
  cmp->add_option("-o,--output", output, "write the table here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  if (run->parsed()) return do_run(run_args);
  return do_compare(dirs, output);
}
