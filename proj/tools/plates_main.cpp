#include <CLI11.hpp>
#include <iostream>
#include <string>

#include "plates/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"plates: energy-minimising configurations of pre-strained multilayer plates"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;

  auto add_common = [&](CLI::App* sub, const char* out_help) {
    sub->add_option("--config", config_path, "JSON run configuration")->required();
    sub->add_option("--out", out_override, out_help);
    return sub;
  };

  CLI::App* moduli = add_common(app.add_subcommand("moduli", "print the homogenised moduli"),
                                "write the JSON report here (default: stdout)");
  CLI::App* sweep = add_common(app.add_subcommand("sweep", "run the theta sweep"),
                               "output directory (default: config output_dir)");
  CLI::App* mesh = add_common(app.add_subcommand("mesh", "generate and save the mesh"),
                              "mesh file path (default: <output_dir>/mesh.txt)");
  CLI::App* verify = app.add_subcommand("verify", "run the self-check suite");
  verify->add_option("--config", config_path, "JSON run configuration")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    const plates::RunConfig cfg = plates::load_config(config_path);
    if (moduli->parsed()) return plates::cmd_moduli(cfg, out_override, std::cout);
    if (sweep->parsed()) return plates::cmd_sweep(cfg, out_override, std::cout);
    if (mesh->parsed()) return plates::cmd_mesh(cfg, out_override, std::cout);
    if (verify->parsed()) return plates::cmd_verify(cfg, std::cout);
  } catch (const plates::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
