// uwbresp: corpus generation, training, inference and evaluation.
#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

#include "uwbresp/checkpoint.hpp"
#include "uwbresp/corpus_io.hpp"
#include "uwbresp/experiment.hpp"
#include "uwbresp/metrics.hpp"

namespace fs = std::filesystem;
using namespace uwbresp;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out = "out";
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

ExperimentConfig load_config(const Globals& g) {
  try {
    Json j = Json::object();
    if (!g.config.empty()) j = Json::parse(read_text(g.config));
    if (g.seed) {
      j["corpus"]["seed"] = *g.seed;
      j["training"]["rng_seed"] = *g.seed;
    }
    return experiment_config_from_json(j);
  } catch (const std::exception& e) {
    throw UsageError("bad configuration: " + std::string(e.what()));
  }
}

Dataset scenes_dataset(const std::vector<Scene>& scenes, const ExperimentConfig& c) {
  return make_dataset(scenes, c.radar, c.corpus.window_s);
}

std::vector<PreparedWindow> corpus_windows(const Dataset& ds, const LocalizerConfig& loc) {
  std::vector<PreparedWindow> out;
  out.reserve(ds.records.size());
  for (const auto& rec : ds.records) {
    PreparedWindow w = prepare_window(rec.matrix, rec.truth, loc);
    w.kind = rec.scene.motion_kind;
    w.scene_seed = rec.scene.rng_seed;
    w.true_bin = static_cast<Index>(std::lround(rec.scene.subject_distance / ds.config.bin_spacing));
    out.push_back(std::move(w));
  }
  return out;
}

void cmd_simulate(const Globals& g) {
  const ExperimentConfig c = load_config(g);
  std::vector<Scene> train, test;
  for (auto& e : corpus_scenes(c.corpus, c.split)) (e.train ? train : test).push_back(e.scene);
  write_corpus(fs::path(g.out) / "train", scenes_dataset(train, c));
  write_corpus(fs::path(g.out) / "test", scenes_dataset(test, c));
  std::cout << "wrote " << train.size() << " train and " << test.size() << " test windows to " << g.out << "\n";
}

void cmd_train(const Globals& g, const std::string& corpus) {
  const ExperimentConfig c = load_config(g);
  const Dataset ds = read_corpus(corpus);
  const auto samples = training_samples(corpus_windows(ds, c.localizer));
  IqVed<float> net(c.network);
  net.init(c.training.rng_seed);
  const auto history = train(net, samples, c.training, [](const EpochStats& e) {
    std::cout << "epoch " << e.epoch << " L_RC " << e.loss.rc << " L_IR " << e.loss.kl_i << " L_QR " << e.loss.kl_q
              << " L_DA " << e.loss.da << " total " << e.total << std::endl;
  });
  save_checkpoint(g.out, net, c.training, history);
  std::cout << "checkpoint written to " << g.out << "\n";
}

void cmd_infer(const Globals& g, const std::string& checkpoint, const std::string& corpus) {
  const ExperimentConfig c = load_config(g);
  IqVed<float> net = load_checkpoint(checkpoint);
  const Dataset ds = read_corpus(corpus);
  const auto windows = corpus_windows(ds, c.localizer);
  std::vector<SlowTimeWindow> inputs;
  for (const auto& w : windows) inputs.push_back(w.input);
  const auto out = infer(net, inputs);
  fs::create_directories(g.out);
  std::ostringstream index;
  index << "record,frames,cosine_to_truth\n";
  for (std::size_t k = 0; k < out.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "rec_%06zu", k);
    write_vector_f32(fs::path(g.out) / (std::string(name) + ".waveform.f32"), out[k]);
    index << name << ',' << out[k].size() << ',' << cosine_similarity(out[k], windows[k].truth) << '\n';
  }
  write_text(fs::path(g.out) / "waveforms.csv", index.str());
  std::cout << "wrote " << out.size() << " waveforms to " << g.out << "\n";
}

void cmd_eval(const Globals& g, const std::string& checkpoint, const std::string& corpus) {
  const ExperimentConfig c = load_config(g);
  std::optional<IqVed<float>> net;
  if (!checkpoint.empty()) net = load_checkpoint(checkpoint);
  const Dataset ds = read_corpus(corpus);
  const auto windows = corpus_windows(ds, c.localizer);
  const auto results = evaluate_windows(net ? &*net : nullptr, windows, ds.config, c.evaluation);
  std::vector<MotionKind> kinds;
  for (auto k : kAllMotionKinds)
    for (const auto& w : windows)
      if (w.kind == k) {
        kinds.push_back(k);
        break;
      }
  Json report = {{"format", "uwbresp-eval-1"},
                 {"config_hash", config_hash(c)},
                 {"corpus", corpus},
                 {"checkpoint", checkpoint},
                 {"metrics", summarize(results, kinds)}};
  fs::create_directories(g.out);
  write_text(fs::path(g.out) / "report.json", report.dump(2) + "\n");
  write_text(fs::path(g.out) / "windows.csv", windows_csv(results));
  write_text(fs::path(g.out) / "events.csv", events_csv(results));
  std::cout << report["metrics"]["overall"].dump(2) << "\n";
}

void cmd_augment(const Globals& g, const std::string& corpus, int count) {
  std::vector<double> rotations;
  const Dataset ds = rotate_corpus(read_corpus(corpus), count, &rotations);
  write_corpus(g.out, ds, rotations);
  std::cout << "wrote " << ds.records.size() << " rotated windows to " << g.out << "\n";
}

void cmd_run(const Globals& g) {
  const ExperimentConfig c = load_config(g);
  const auto rep = run_experiment(c, g.out, &std::cout);
  std::cout << rep.report["metrics"]["overall"].dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"UWB radar respiration recovery: simulation, IQ-VED training and evaluation"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Seed for corpus generation and training");
  app.add_option("--config", g.config, "Experiment configuration (JSON)")->check(CLI::ExistingFile);
  app.add_option("--out", g.out, "Output directory")->capture_default_str();

  std::string corpus, checkpoint;
  int count = 60;
  auto* sim = app.add_subcommand("simulate", "Generate train/test corpora from the configured scene spec");
  auto* tr = app.add_subcommand("train", "Train IQ-VED on a corpus and write a checkpoint");
  tr->add_option("corpus", corpus, "Corpus directory")->required()->check(CLI::ExistingDirectory);
  auto* inf = app.add_subcommand("infer", "Recover waveforms for every window of a corpus");
  inf->add_option("checkpoint", checkpoint, "Checkpoint directory")->required()->check(CLI::ExistingDirectory);
  inf->add_option("corpus", corpus, "Corpus directory")->required()->check(CLI::ExistingDirectory);
  auto* ev = app.add_subcommand("eval", "Score IQ-VED and the baselines on a corpus");
  ev->add_option("corpus", corpus, "Corpus directory")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--checkpoint", checkpoint, "Checkpoint directory; baselines only when absent")
      ->check(CLI::ExistingDirectory);
  auto* aug = app.add_subcommand("augment", "Write the I/Q-rotated copies of a corpus");
  aug->add_option("corpus", corpus, "Corpus directory")->required()->check(CLI::ExistingDirectory);
  aug->add_option("--count", count, "Rotations per window")->capture_default_str()->check(CLI::PositiveNumber);
  auto* run = app.add_subcommand("run", "Full experiment: corpus, training, evaluation, report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  if (seed_opt->count()) g.seed = seed;

  try {
    if (*sim) cmd_simulate(g);
    if (*tr) cmd_train(g, corpus);
    if (*inf) cmd_infer(g, checkpoint, corpus);
    if (*ev) cmd_eval(g, checkpoint, corpus);
    if (*aug) cmd_augment(g, corpus, count);
    if (*run) cmd_run(g);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
