// linkgap command-line front end.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "linkgap/classifier.hpp"
#include "linkgap/pipeline.hpp"
#include "linkgap/synth.hpp"
#include "linkgap/util.hpp"

namespace {

using namespace linkgap;

std::string flag_name(std::string key) {
  for (auto& c : key)
    if (c == '_') c = '-';
  return "--" + key;
}

// Options shared by `ingest` and `experiment`: a config file plus one flag
// per configuration key. Precedence: file < flags < --seed < environment.
struct ConfigFlags {
  std::string config_file;
  std::map<std::string, std::string> values;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;

  void attach(CLI::App* app) {
    app->add_option("-c,--config", config_file, "key = value configuration file")->check(CLI::ExistingFile);
    for (const auto& key : RunConfig::keys()) {
      if (key == "seed") continue;
      app->add_option(flag_name(key), values[key], "configuration key '" + key + "'");
    }
    seed_opt = app->add_option("--seed", seed, "master seed");
  }

  RunConfig resolve(CLI::App* app) const {
    RunConfig cfg;
    if (!config_file.empty()) cfg.apply_file(config_file);
    for (const auto& key : RunConfig::keys()) {
      if (key == "seed") continue;
      if (app->count(flag_name(key)) > 0) cfg.set(key, values.at(key));
    }
    if (seed_opt->count() > 0) cfg.master_seed = seed;
    if (const char* env = std::getenv(kOutputDirEnv); env && *env) cfg.output_dir = env;
    cfg.log = &std::cerr;
    return cfg;
  }
};

int run(int argc, char** argv) {
  CLI::App app{"Detect sentences that lack a bibliographic link"};
  app.require_subcommand(1);

  ConfigFlags ingest_flags;
  auto* ingest = app.add_subcommand("ingest", "Label and tokenize a jsonlines corpus");
  ingest_flags.attach(ingest);

  ConfigFlags experiment_flags;
  auto* experiment = app.add_subcommand("experiment", "Train every strategy, evaluate, and vote");
  experiment_flags.attach(experiment);

  PredictOptions predict_opt;
  std::string predict_mode = "soft";
  std::string predict_strategies;
  std::string predict_output;
  auto* predict = app.add_subcommand("predict", "Flag sentences that likely miss a link");
  predict->add_option("-b,--bundle", predict_opt.bundle_dir, "experiment output directory")->required();
  predict->add_option("-d,--document", predict_opt.document, "jsonlines document(s)")->required();
  predict->add_option("-s,--strategies", predict_strategies, "comma-separated strategy ids (default: all)");
  predict->add_option("-m,--mode", predict_mode, "soft or hard");
  predict->add_option("-o,--output", predict_output, "write json here instead of stdout");

  MLPHyperparams gc_hp;
  std::size_t gc_seeds = 10;
  std::size_t gc_trials = 1;
  std::uint64_t gc_seed = 0;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the MLP gradient");
  gradcheck->add_option("--seeds", gc_seeds, "number of seeds to check");
  gradcheck->add_option("--trials", gc_trials, "random nets per seed");
  gradcheck->add_option("--seed", gc_seed, "first seed");
  gradcheck->add_option("--l2", gc_hp.l2, "L2 penalty");

  SynthConfig synth_cfg;
  std::string synth_output;
  auto* synth = app.add_subcommand("synth", "Write a seeded synthetic corpus");
  synth->add_option("-o,--output", synth_output, "output jsonlines path")->required();
  synth->add_option("--documents", synth_cfg.documents, "number of documents");
  synth->add_option("--seed", synth_cfg.seed, "generator seed");
  synth->add_option("--min-sentences", synth_cfg.min_sentences);
  synth->add_option("--max-sentences", synth_cfg.max_sentences);
  synth->add_option("--min-gap", synth_cfg.min_gap);
  synth->add_option("--max-gap", synth_cfg.max_gap);
  synth->add_option("--self-cue-positive", synth_cfg.self_cue_positive);
  synth->add_option("--self-cue-negative", synth_cfg.self_cue_negative);
  synth->add_option("--filler-vocabulary", synth_cfg.filler_vocabulary);
  synth->add_option("--cue-trials", synth_cfg.cue_trials);
  synth->add_option("--context-cue", synth_cfg.context_cue, "cue probability by distance 1, 2, ...")->delimiter(',');
  synth->add_option("--context-cue-background", synth_cfg.context_cue_background);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  if (ingest->parsed()) {
    RunConfig cfg = ingest_flags.resolve(ingest);
    const auto s = run_ingest(cfg);
    std::cout << "documents " << s.report.documents << "\nsentences " << s.report.sentences << "\nskipped_lines "
              << s.report.skipped_lines << "\neligible_anchors " << s.eligible_anchors << "\npositive_fraction "
              << format_fixed(s.positive_fraction, 4) << "\n";
    return 0;
  }
  if (experiment->parsed()) {
    RunConfig cfg = experiment_flags.resolve(experiment);
    const auto r = run_experiment(cfg);
    std::cout << report_csv(r.report);
    std::cerr << "artifacts in " << r.output_dir.string() << "\n";
    return 0;
  }
  if (predict->parsed()) {
    predict_opt.mode = parse_vote_mode(predict_mode);
    if (!predict_strategies.empty())
      for (const auto& s : split(predict_strategies, ',')) {
        const std::string id(trim(s));
        if (id.empty() || id.find_first_not_of("0123456789") != std::string::npos)
          throw UsageError("bad strategy id '" + id + "'");
        predict_opt.strategy_ids.push_back(std::stoi(id));
      }
    const auto result = run_predict(predict_opt);
    for (const auto& n : result.notices) std::cerr << "notice: " << n << "\n";
    const auto text = verdicts_json(result);
    if (predict_output.empty()) std::cout << text;
    else write_file_atomic(predict_output, text);
    return 0;
  }
  if (gradcheck->parsed()) {
    double worst = 0.0;
    for (std::size_t i = 0; i < gc_seeds; ++i) {
      MLPHyperparams hp = gc_hp;
      hp.seed = gc_seed + i;
      const double err = gradient_check(hp, gc_trials);
      worst = std::max(worst, err);
      std::cout << "seed " << hp.seed << " max_relative_error " << err << "\n";
    }
    const bool ok = worst < 1e-4;
    std::cout << (ok ? "PASS" : "FAIL") << " max_relative_error " << worst << "\n";
    return ok ? 0 : 3;
  }
  if (synth->parsed()) {
    write_synthetic_corpus(synth_output, synth_cfg);
    std::cout << "wrote " << synth_cfg.documents << " documents to " << synth_output << "\n";
    return 0;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const linkgap::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const linkgap::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
}
