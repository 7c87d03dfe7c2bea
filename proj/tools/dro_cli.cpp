#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "dro/manifest.hpp"

int main(int argc, char** argv) {
  CLI::App app{"drotrain: distributionally robust training, attacks, and federated simulation"};
  app.require_subcommand(1);

  std::string manifest_path;
  std::string checkpoint_path;
  std::string output_dir;

  auto* run = app.add_subcommand("run", "Execute a run manifest end to end");
  run->add_option("manifest", manifest_path, "Path to the manifest file")->required();
  run->add_option("-o,--output-dir", output_dir,
                  "Output directory override (also honors DRO_OUTPUT_DIR)");

  auto* validate = app.add_subcommand("validate", "Check a manifest and report all problems");
  validate->add_option("manifest", manifest_path, "Path to the manifest file")->required();

  auto* atk = app.add_subcommand("attack-eval",
                                 "Evaluate a saved checkpoint under a manifest's attack grid");
  atk->add_option("checkpoint", checkpoint_path, "Path to a model checkpoint")->required();
  atk->add_option("manifest", manifest_path, "Path to the manifest file")->required();
  atk->add_option("-o,--output-dir", output_dir, "Output directory override");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) {
    return dro::run_manifest(manifest_path, output_dir);
  }
  if (validate->parsed()) {
    const auto diags = dro::validate_manifest(manifest_path);
    for (const auto& d : diags) std::cout << d << "\n";
    if (diags.empty()) std::cout << "ok\n";
    return diags.empty() ? 0 : 1;
  }
  if (atk->parsed()) {
    return dro::attack_eval(checkpoint_path, manifest_path, output_dir);
  }
  return 1;
}
