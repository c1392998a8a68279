// fsgt: command-line driver for the snapshot cascade-probe pipeline.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "fsgt/fsgt.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Cascade-probe transport measurements on saved field snapshots"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  unsigned jobs = 0;
  bool force = false;

  for (const char* name : {"synth", "probe", "fit", "bridge", "audit"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "run configuration (JSON)")->required();
    sub->add_option("--out", out_dir, "output directory (overrides out_dir)");
    sub->add_option("--jobs", jobs, "worker threads (overrides jobs)");
    sub->add_flag("--force", force, "overwrite existing outputs / ignore previous probe records");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : fsgt::kExitConfig;
  }

  fsgt::RunConfig config;
  try {
    config = fsgt::load_run_config(config_path);
  } catch (const fsgt::Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return fsgt::kExitConfig;
  }
  if (!out_dir.empty()) config.out_dir = out_dir;
  if (jobs > 0) config.jobs = jobs;

  const std::string command = app.get_subcommands().front()->get_name();
  return fsgt::run_command(command, config, fsgt::CommandOptions{force});
}
