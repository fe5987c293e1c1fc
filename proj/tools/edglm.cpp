// edglm: filtering, smoothing, forecasting and discount selection for
// dynamic two-parameter exponential family models.
//
// exit status: 0 ok, 2 configuration, 3 data, 4 numerical failure

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "edglm/cli/commands.hpp"

namespace {

constexpr int kConfigExit = 2;
constexpr int kDataExit = 3;
constexpr int kNumericExit = 4;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic exponential-family models by extended conjugate updating"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON run configuration")->required();
    cmd->add_option("--out", out_dir, "output directory (default: config 'out' or .)");
  };
  CLI::App* fit = app.add_subcommand("fit", "filter and smooth; write filtered, smoothed, "
                                            "one-step and metrics files");
  CLI::App* forecast = app.add_subcommand("forecast", "forecast the configured horizon");
  CLI::App* select = app.add_subcommand("select", "rank the discount-factor grid");
  CLI::App* synth = app.add_subcommand("synth", "simulate a series from the model");
  for (CLI::App* c : {fit, forecast, select, synth}) add_common(c);
  CLI::Option* seed_opt = synth->add_option("--seed", seed, "random seed (overrides synth.seed)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigExit;
  }

  try {
    const edglm::cli::RunConfig cfg = edglm::cli::load_config(config_path);
    std::filesystem::path out = ".";
    if (cfg.out) out = *cfg.out;
    if (!out_dir.empty()) out = out_dir;

    edglm::cli::Outputs outputs;
    if (fit->parsed()) {
      outputs = edglm::cli::cmd_fit(cfg);
    } else if (forecast->parsed()) {
      outputs = edglm::cli::cmd_forecast(cfg);
    } else if (select->parsed()) {
      outputs = edglm::cli::cmd_select(cfg);
    } else {
      std::optional<std::uint64_t> s;
      if (seed_opt->count() > 0) s = seed;
      outputs = edglm::cli::cmd_synth(cfg, s);
    }
    edglm::cli::write_outputs(out, outputs);
    for (const auto& entry : outputs) std::cout << (out / entry.first).string() << '\n';
    return 0;
  } catch (const edglm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigExit;
  } catch (const edglm::HorizonError& e) {
    std::cerr << "config error: " << e.what()
              << " (forecast horizon exceeds the covariates in the data file)\n";
    return kConfigExit;
  } catch (const edglm::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataExit;
  } catch (const edglm::Error& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumericExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
