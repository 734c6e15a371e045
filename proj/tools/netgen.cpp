#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "netgen/pipeline.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> samples;
  std::optional<int> zones;
  std::optional<std::string> out;
};

void add_common(CLI::App* cmd, Overrides& o, bool config_required) {
  auto* c = cmd->add_option("--config", o.config, "run configuration (JSON)");
  if (config_required) c->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "random seed");
  cmd->add_option("--samples", o.samples, "number of samples to generate")->check(CLI::NonNegativeNumber);
  cmd->add_option("--zones", o.zones, "number of distance zones")->check(CLI::PositiveNumber);
  cmd->add_option("--out", o.out, "output directory");
}

netgen::RunConfig resolve(const Overrides& o) {
  auto cfg = netgen::load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.samples) cfg.samples = *o.samples;
  if (o.zones) cfg.zones = *o.zones;
  if (o.out) cfg.out = *o.out;
  cfg.validate();
  return cfg;
}

netgen::FittedModel model_for(const netgen::RunConfig& cfg, const std::string& path) {
  return netgen::load_model(path.empty() ? netgen::OutputLayout{cfg.out}.model() : std::filesystem::path(path));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"netgen: probabilistic synthetic distribution feeder generator"};
  app.require_subcommand(1);

  Overrides fit_o, gen_o, val_o, exp_o, demo_o;
  std::string gen_model, val_model;
  std::uint64_t export_sample = 0;

  auto* fit = app.add_subcommand("fit", "fit all sub-models on the reference feeder and write model.json");
  add_common(fit, fit_o, true);

  auto* gen = app.add_subcommand("generate", "draw synthetic samples from a fitted model");
  add_common(gen, gen_o, true);
  gen->add_option("--model", gen_model, "fitted model (default <out>/model.json)");

  auto* val = app.add_subcommand("validate", "screen generated samples and write a validation report");
  add_common(val, val_o, true);
  val->add_option("--model", val_model, "fitted model for the phase-frequency comparison (default <out>/model.json)");

  auto* exp = app.add_subcommand("export-opendss", "write one sample as OpenDSS scripts");
  add_common(exp, exp_o, true);
  exp->add_option("--sample", export_sample, "sample index");

  auto* demo = app.add_subcommand("demo", "build the synthetic reference dataset and run the whole pipeline on it");
  add_common(demo, demo_o, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit->parsed()) {
      netgen::run_fit(resolve(fit_o), std::cout);
    } else if (gen->parsed()) {
      const auto cfg = resolve(gen_o);
      netgen::run_generate(cfg, model_for(cfg, gen_model), std::cout);
    } else if (val->parsed()) {
      const auto cfg = resolve(val_o);
      const auto path = val_model.empty() ? netgen::OutputLayout{cfg.out}.model() : std::filesystem::path(val_model);
      std::optional<netgen::FittedModel> model;
      if (std::filesystem::exists(path)) {
        model = netgen::load_model(path);
      } else {
        std::cout << "no fitted model at " << path.string() << "; skipping the phase-frequency comparison\n";
      }
      netgen::run_validate(cfg, model ? &*model : nullptr, std::cout);
    } else if (exp->parsed()) {
      netgen::run_export(resolve(exp_o), export_sample, std::cout);
    } else if (demo->parsed()) {
      if (!demo_o.config.empty()) {
        std::cerr << "demo builds its own configuration; --config is not used\n";
        return 2;
      }
      const std::filesystem::path out = demo_o.out.value_or("demo_out");
      netgen::run_demo(out, demo_o.seed.value_or(1), demo_o.samples.value_or(20), std::cout);
    }
  } catch (const netgen::IngestError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const netgen::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
