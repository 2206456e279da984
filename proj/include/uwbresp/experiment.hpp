#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "uwbresp/corpus_io.hpp"
#include "uwbresp/iqved.hpp"
#include "uwbresp/pipeline.hpp"
#include "uwbresp/radar_sim.hpp"

namespace uwbresp {

struct CorpusSpec {
  std::vector<MotionKind> kinds{std::begin(kAllMotionKinds), std::end(kAllMotionKinds)};
  int scenes_per_kind = 60;
  std::uint64_t seed = 1;
  double window_s = 20.0;
  SceneSampler sampler;
};

struct SplitSpec {
  double train = 2.0 / 3.0;
  double test = 1.0 / 3.0;
};

struct EvalToggles {
  bool baselines = true;
  bool biomarkers = true;
  /// Reject high-residual arcs instead of scoring the forced fit.
  bool enforce_residual = false;
};

struct ExperimentConfig {
  std::string name = "experiment";
  RadarConfig radar;
  CorpusSpec corpus;
  SplitSpec split;
  LocalizerConfig localizer;
  NetworkConfig network;
  TrainConfig training;
  EvalToggles evaluation;

  void validate() const;
};

Json to_json(const ExperimentConfig& c);
/// Missing keys keep their defaults.
ExperimentConfig experiment_config_from_json(const Json& j);
/// FNV-1a over the canonical JSON dump, as 16 hex digits.
std::string config_hash(const ExperimentConfig& c);

struct SceneEntry {
  Scene scene;
  bool train = false;
};

/// One scene per window, split per motion kind by index; train and test seeds
/// never coincide.
std::vector<SceneEntry> corpus_scenes(const CorpusSpec& spec, const SplitSpec& split);

/// A localized window ready for the network and the baselines.
struct PreparedWindow {
  SlowTimeWindow raw;    // straight from the signal matrix
  SlowTimeWindow input;  // normalize_window(raw)
  Waveform truth;        // standardized
  MotionKind kind = MotionKind::static_body;
  std::uint64_t scene_seed = 0;
  Index true_bin = 0;
};

PreparedWindow prepare_window(const ComplexMatrix& matrix, const Waveform& truth, const LocalizerConfig& localizer);

/// Synthesizes and localizes every scene; keeps only windows, not matrices.
std::vector<PreparedWindow> prepare_scenes(const std::vector<Scene>& scenes, const RadarConfig& radar,
                                           const LocalizerConfig& localizer);

std::vector<TrainSample> training_samples(const std::vector<PreparedWindow>& windows);

struct MethodScore {
  double cosine = 0.0;
  double rate_error_bpm = 0.0;
  std::vector<double> peak_errors;
  std::vector<double> valley_errors;
  std::vector<double> volume_errors;
  int misses = 0;
  int false_alarms = 0;
  bool failed = false;  // output unusable (degenerate fit or constant waveform)
};

/// Compares a recovered waveform with the truth.
MethodScore score_waveform(const Waveform& estimate, const Waveform& truth, double frame_rate, bool biomarkers);

struct WindowResult {
  std::size_t index = 0;
  MotionKind kind = MotionKind::static_body;
  std::uint64_t scene_seed = 0;
  Index detected_bin = 0;
  Index true_bin = 0;
  bool arc_flagged = false;  // ellipse fit residual above the usable threshold
  std::map<std::string, MethodScore> methods;
};

inline const std::vector<std::string> kMethods{"iqved", "bandpass", "ellipse"};

/// Runs every method on every window. `net` may be null to skip the network.
std::vector<WindowResult> evaluate_windows(IqVed<float>* net, const std::vector<PreparedWindow>& windows,
                                           const RadarConfig& radar, const EvalToggles& toggles);

/// Per-kind and overall aggregates.
Json summarize(const std::vector<WindowResult>& results, const std::vector<MotionKind>& kinds);
std::string windows_csv(const std::vector<WindowResult>& results);
/// One row per matched event or cycle error.
std::string events_csv(const std::vector<WindowResult>& results);

struct ExperimentReport {
  Json report;
  std::vector<WindowResult> results;
  std::vector<EpochStats> history;
};

class StageError : public std::runtime_error {
 public:
  StageError(const std::string& stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(stage) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

/// Generates the corpus, trains, evaluates every method on the test split and
/// writes report.json, windows.csv, events.csv, loss_history.csv and the
/// checkpoint into `out_dir` when it is non-empty.
ExperimentReport run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir = {},
                                std::ostream* log = nullptr);

}  // namespace uwbresp
