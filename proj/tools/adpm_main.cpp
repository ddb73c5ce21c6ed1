// adpm: train, predict and cross-validate multi-layer kernel fusion models
// on tensor-file workspaces.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "adpm/error.hpp"
#include "adpm/pipeline.hpp"
#include "adpm/report.hpp"
#include "adpm/run_config.hpp"
#include "adpm/synth_bench.hpp"

namespace fs = std::filesystem;

namespace {

struct ConfigFlags {
  std::string config_path;
  std::string workspace;
  std::map<std::string, std::string> overrides;
};

// Every RunConfig key becomes --<key>.
void add_config_flags(CLI::App* cmd, ConfigFlags& flags) {
  cmd->add_option("--config", flags.config_path, "key = value run configuration file");
  cmd->add_option("--workspace", flags.workspace, "root for relative paths");
  for (const auto& [key, value] : adpm::RunConfig{}.entries()) {
    cmd->add_option_function<std::string>(
        "--" + key, [&flags, k = key](const std::string& v) { flags.overrides[k] = v; },
        "config key '" + key + "' (default: " + (value.empty() ? "none" : value) + ")");
  }
}

adpm::RunConfig build_config(const ConfigFlags& flags) {
  adpm::RunConfig cfg;
  if (!flags.config_path.empty()) cfg = adpm::RunConfig::from_file(flags.config_path);
  if (!flags.workspace.empty()) cfg.workspace = flags.workspace;
  for (const auto& [key, value] : flags.overrides) {
    if (key == "manifest") cfg.manifests.clear();
    cfg.set(key, value);
  }
  cfg.validate();
  return cfg;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw adpm::IoError("cannot write '" + path.string() + "'", 0);
}

template <typename Report>
void emit_reports(const Report& report, std::span<const adpm::TaskResult> tasks,
                  const fs::path& out_dir) {
  fs::create_directories(out_dir);
  std::ostringstream text, records, timings;
  adpm::write_text_report(report, text);
  adpm::write_records(report, records);
  adpm::write_timings(tasks, timings);
  write_file(out_dir / "report.txt", text.str());
  write_file(out_dir / "report.tsv", records.str());
  write_file(out_dir / "timings.txt", timings.str());
  std::cout << text.str();
}

void print_weights(const adpm::TrainedBundle& bundle) {
  std::printf("scale");
  for (const auto& l : bundle.layer_names) std::printf("\t%s", l.c_str());
  std::printf("\n");
  for (const auto& scale : bundle.scales) {
    std::printf("%s", scale.scale_tag.c_str());
    for (double w : scale.weights.weights) std::printf("\t%.6f", w);
    std::printf("\n");
  }
}

std::vector<adpm::SynthLayer> parse_layers(const std::string& text) {
  std::vector<adpm::SynthLayer> layers;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto x = item.find('x');
    if (x == std::string::npos) {
      throw adpm::ValidationError("layer shape '" + item + "' is not <side>x<channels>");
    }
    try {
      layers.push_back({std::stoul(item.substr(0, x)), std::stoul(item.substr(x + 1))});
    } catch (const std::logic_error&) {
      throw adpm::ValidationError("layer shape '" + item + "' is not <side>x<channels>");
    }
  }
  return layers;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive deep pyramid matching: multi-layer kernel fusion classifier"};
  app.require_subcommand(1);

  ConfigFlags train_flags, cv_flags;
  std::string bundle_out = "bundle";
  auto* train = app.add_subcommand("train", "train per-scale models and save a bundle");
  add_config_flags(train, train_flags);
  train->add_option("--out", bundle_out, "bundle directory (relative to the workspace)");

  std::string predict_bundle, predict_manifest, predict_out = "predict";
  auto* predict = app.add_subcommand("predict", "score a test manifest with a trained bundle");
  predict->add_option("--bundle", predict_bundle, "bundle directory")->required();
  predict->add_option("--manifest", predict_manifest, "test manifest")->required();
  predict->add_option("--out", predict_out, "report directory");

  std::string cv_out = "crossval";
  auto* cv = app.add_subcommand("crossval", "repeated stratified evaluation");
  add_config_flags(cv, cv_flags);
  cv->add_option("--out", cv_out, "report directory (relative to the workspace)");

  adpm::SynthSpec synth;
  std::string synth_out = "synth", synth_layers = "6x4,6x4,6x4,6x4,6x4";
  auto* gen = app.add_subcommand("gen-synth", "write a synthetic workspace");
  gen->add_option("--out", synth_out, "output workspace directory");
  gen->add_option("--classes", synth.num_classes, "number of classes");
  gen->add_option("--images", synth.images_per_class, "images per class");
  gen->add_option("--layers", synth_layers, "comma-separated <side>x<channels> shapes");
  gen->add_option("--signal-layers", synth.signal_layers, "1-based layers carrying class signal")
      ->delimiter(',');
  gen->add_option("--scales", synth.scales, "scale tags")->delimiter(',');
  gen->add_option("--signal-scales", synth.signal_scales, "scales carrying signal (default all)")
      ->delimiter(',');
  gen->add_option("--coverage", synth.scale_coverage, "signal scales per image (0 = all)");
  gen->add_flag("--complementary", synth.complementary_layers,
                "split the class index across signal layers");
  gen->add_option("--sigma", synth.sigma, "noise standard deviation");
  gen->add_option("--object-fraction", synth.object_fraction, "share of object cells");
  gen->add_option("--seed", synth.seed, "random seed");

  std::string inspect_bundle;
  auto* inspect = app.add_subcommand("inspect-weights", "print learned layer weights");
  inspect->add_option("bundle", inspect_bundle, "bundle directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*train) {
      const auto cfg = build_config(train_flags);
      const auto bundle = adpm::run_train(cfg);
      const auto dir = cfg.resolve(bundle_out);
      adpm::save_bundle(bundle, dir);
      print_weights(bundle);
      std::cout << "bundle written to " << dir.string() << '\n';
    } else if (*predict) {
      const auto bundle = adpm::load_bundle(predict_bundle);
      const auto manifest = adpm::load_manifest(predict_manifest);
      const auto report = adpm::run_predict(bundle, manifest);
      for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
      emit_reports(report, std::span(&report.result, 1), predict_out);
    } else if (*cv) {
      const auto cfg = build_config(cv_flags);
      const auto report = adpm::run_crossval(cfg);
      emit_reports(report, report.tasks, cfg.resolve(cv_out));
    } else if (*gen) {
      synth.layers = parse_layers(synth_layers);
      const fs::path out = synth_out;
      const auto manifest = adpm::gen_synthetic_dataset(synth, out);
      std::ostringstream cfg;
      cfg << "# synthetic workspace\nmanifest = manifest.tsv\nwords = 16\nrepeats = 5\n"
          << "seed = " << synth.seed << '\n';
      write_file(out / "config.txt", cfg.str());
      std::cout << manifest.records.size() << " records written to " << out.string() << '\n';
    } else if (*inspect) {
      print_weights(adpm::load_bundle(inspect_bundle));
    }
  } catch (const adpm::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
