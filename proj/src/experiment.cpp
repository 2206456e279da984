#include "uwbresp/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include "uwbresp/baselines.hpp"
#include "uwbresp/biomarkers.hpp"
#include "uwbresp/checkpoint.hpp"
#include "uwbresp/metrics.hpp"

namespace uwbresp {

namespace fs = std::filesystem;

void ExperimentConfig::validate() const {
  radar.validate();
  network.validate();
  training.validate();
  localizer.cfar.validate();
  if (corpus.kinds.empty()) throw std::invalid_argument("corpus needs at least one motion kind");
  if (corpus.scenes_per_kind < 2) throw std::invalid_argument("scenes_per_kind must be at least 2");
  if (!(corpus.window_s > 0.0)) throw std::invalid_argument("window_s must be positive");
  if (!(split.train > 0.0 && split.test > 0.0) || std::abs(split.train + split.test - 1.0) > 1e-9)
    throw std::invalid_argument("split fractions must be positive and sum to 1");
  if (network.frames != frame_count(corpus.window_s, radar.frame_rate))
    throw std::invalid_argument("network frames must equal the window length in frames");
  if (network.input_channels != 2 * localizer.half_width + 1)
    throw std::invalid_argument("network input_channels must equal the window width");
}

namespace {

Json to_json(const SceneSampler& s) {
  return {{"min_distance", s.min_distance},   {"max_distance", s.max_distance},
          {"min_rate", s.min_rate},           {"max_rate", s.max_rate},
          {"min_depth", s.min_depth},         {"max_depth", s.max_depth},
          {"min_reflectivity", s.min_reflectivity}, {"max_reflectivity", s.max_reflectivity},
          {"asymmetric_fraction", s.asymmetric_fraction}, {"apnea_fraction", s.apnea_fraction},
          {"clutter_count", s.clutter_count}};
}

SceneSampler sampler_from_json(const Json& j, SceneSampler s) {
  s.min_distance = j.value("min_distance", s.min_distance);
  s.max_distance = j.value("max_distance", s.max_distance);
  s.min_rate = j.value("min_rate", s.min_rate);
  s.max_rate = j.value("max_rate", s.max_rate);
  s.min_depth = j.value("min_depth", s.min_depth);
  s.max_depth = j.value("max_depth", s.max_depth);
  s.min_reflectivity = j.value("min_reflectivity", s.min_reflectivity);
  s.max_reflectivity = j.value("max_reflectivity", s.max_reflectivity);
  s.asymmetric_fraction = j.value("asymmetric_fraction", s.asymmetric_fraction);
  s.apnea_fraction = j.value("apnea_fraction", s.apnea_fraction);
  s.clutter_count = j.value("clutter_count", s.clutter_count);
  return s;
}

}  // namespace

Json to_json(const ExperimentConfig& c) {
  Json kinds = Json::array();
  for (auto k : c.corpus.kinds) kinds.push_back(to_string(k));
  return {{"name", c.name},
          {"radar", to_json(c.radar)},
          {"corpus",
           {{"kinds", kinds},
            {"scenes_per_kind", c.corpus.scenes_per_kind},
            {"seed", c.corpus.seed},
            {"window_s", c.corpus.window_s},
            {"sampler", to_json(c.corpus.sampler)}}},
          {"split", {{"train", c.split.train}, {"test", c.split.test}}},
          {"localizer",
           {{"beta", c.localizer.beta},
            {"half_width", c.localizer.half_width},
            {"train_cells", c.localizer.cfar.train_cells},
            {"guard_cells", c.localizer.cfar.guard_cells},
            {"threshold_scale", c.localizer.cfar.threshold_scale}}},
          {"network", to_json(c.network)},
          {"training", to_json(c.training)},
          {"evaluation",
           {{"baselines", c.evaluation.baselines},
            {"biomarkers", c.evaluation.biomarkers},
            {"enforce_residual", c.evaluation.enforce_residual}}}};
}

ExperimentConfig experiment_config_from_json(const Json& j) {
  ExperimentConfig c;
  c.name = j.value("name", c.name);
  if (j.contains("radar")) c.radar = radar_config_from_json(j.at("radar"));
  if (j.contains("corpus")) {
    const Json& k = j.at("corpus");
    if (k.contains("kinds")) {
      c.corpus.kinds.clear();
      for (const auto& n : k.at("kinds")) c.corpus.kinds.push_back(motion_kind_from_string(n));
    }
    c.corpus.scenes_per_kind = k.value("scenes_per_kind", c.corpus.scenes_per_kind);
    c.corpus.seed = k.value("seed", c.corpus.seed);
    c.corpus.window_s = k.value("window_s", c.corpus.window_s);
    if (k.contains("sampler")) c.corpus.sampler = sampler_from_json(k.at("sampler"), c.corpus.sampler);
  }
  c.corpus.sampler.duration = c.corpus.window_s;
  if (j.contains("split")) {
    c.split.train = j.at("split").value("train", c.split.train);
    c.split.test = j.at("split").value("test", 1.0 - c.split.train);
  }
  if (j.contains("localizer")) {
    const Json& l = j.at("localizer");
    c.localizer.beta = l.value("beta", c.localizer.beta);
    c.localizer.half_width = l.value("half_width", c.localizer.half_width);
    c.localizer.cfar.train_cells = l.value("train_cells", c.localizer.cfar.train_cells);
    c.localizer.cfar.guard_cells = l.value("guard_cells", c.localizer.cfar.guard_cells);
    c.localizer.cfar.threshold_scale = l.value("threshold_scale", c.localizer.cfar.threshold_scale);
  }
  Json net = j.value("network", Json::object());
  if (!net.contains("input_channels")) net["input_channels"] = 2 * c.localizer.half_width + 1;
  if (!net.contains("frames")) net["frames"] = frame_count(c.corpus.window_s, c.radar.frame_rate);
  c.network = network_config_from_json(net);
  if (j.contains("training")) c.training = train_config_from_json(j.at("training"));
  if (j.contains("evaluation")) {
    const Json& e = j.at("evaluation");
    c.evaluation.baselines = e.value("baselines", c.evaluation.baselines);
    c.evaluation.biomarkers = e.value("biomarkers", c.evaluation.biomarkers);
    c.evaluation.enforce_residual = e.value("enforce_residual", c.evaluation.enforce_residual);
  }
  c.validate();
  return c;
}

std::string config_hash(const ExperimentConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_json(c).dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::vector<SceneEntry> corpus_scenes(const CorpusSpec& spec, const SplitSpec& split) {
  SceneSampler sampler = spec.sampler;
  sampler.duration = spec.window_s;
  const int n_train = static_cast<int>(std::lround(split.train * spec.scenes_per_kind));
  if (n_train < 1 || n_train >= spec.scenes_per_kind) throw std::invalid_argument("split leaves a side empty");
  std::vector<SceneEntry> out;
  for (std::size_t ki = 0; ki < spec.kinds.size(); ++ki)
    for (int k = 0; k < spec.scenes_per_kind; ++k) {
      const std::uint64_t seed = mix_seed(spec.seed, (std::uint64_t(ki) << 32) | std::uint64_t(k));
      out.push_back({sample_scene(spec.kinds[ki], seed, sampler), k < n_train});
    }
  std::set<std::uint64_t> train_seeds;
  for (const auto& e : out)
    if (e.train) train_seeds.insert(e.scene.rng_seed);
  for (const auto& e : out)
    if (!e.train && train_seeds.count(e.scene.rng_seed)) throw std::logic_error("train and test scenes share a seed");
  return out;
}

PreparedWindow prepare_window(const ComplexMatrix& matrix, const Waveform& truth, const LocalizerConfig& localizer) {
  PreparedWindow w;
  w.raw = preprocess(matrix, localizer);
  w.input = normalize_window(w.raw);
  w.truth = standardize(truth);
  return w;
}

std::vector<PreparedWindow> prepare_scenes(const std::vector<Scene>& scenes, const RadarConfig& radar,
                                           const LocalizerConfig& localizer) {
  std::vector<PreparedWindow> out;
  out.reserve(scenes.size());
  for (const auto& sc : scenes) {
    const SynthResult r = synth_matrix(sc, radar);
    PreparedWindow w = prepare_window(r.matrix, r.truth, localizer);
    w.kind = sc.motion_kind;
    w.scene_seed = sc.rng_seed;
    w.true_bin = static_cast<Index>(std::lround(sc.subject_distance / radar.bin_spacing));
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<TrainSample> training_samples(const std::vector<PreparedWindow>& windows) {
  std::vector<TrainSample> out;
  out.reserve(windows.size());
  for (const auto& w : windows) out.push_back({w.input, w.truth});
  return out;
}

namespace {

// Peak value minus the nearest preceding valley, keyed by peak position.
std::vector<double> volumes_by_peak(const Waveform& w, const CycleEvents& ev) {
  std::vector<double> out(ev.peak_index.size(), std::nan(""));
  for (std::size_t p = 0; p < ev.peak_index.size(); ++p) {
    Index best = -1;
    for (Index v : ev.valley_index)
      if (v < ev.peak_index[p]) best = v;
    if (best >= 0) out[p] = w(ev.peak_index[p]) - w(best);
  }
  return out;
}

}  // namespace

MethodScore score_waveform(const Waveform& estimate, const Waveform& truth, double frame_rate, bool biomarkers) {
  MethodScore s;
  try {
    s.cosine = cosine_similarity(estimate, truth);
  } catch (const std::invalid_argument&) {
    s.failed = true;
    s.cosine = 0.0;
  }
  if (!biomarkers || s.failed) return s;
  s.rate_error_bpm = rate_error(estimate_rate_fft(estimate, frame_rate).hz, estimate_rate_fft(truth, frame_rate).hz);
  const CycleEvents est = detect_cycles(estimate, frame_rate);
  const CycleEvents ref = detect_cycles(truth, frame_rate);
  const TimingErrors te = timing_errors(est, ref);
  s.peak_errors = te.peaks.errors;
  s.valley_errors = te.valleys.errors;
  s.misses = te.peaks.misses + te.valleys.misses;
  s.false_alarms = te.peaks.false_alarms + te.valleys.false_alarms;
  // volumes compared on a common scale; baselines come out in metres
  const auto ve = volumes_by_peak(standardize(estimate), est), vt = volumes_by_peak(standardize(truth), ref);
  for (const auto& [i, j] : te.peaks.pairs)
    if (std::isfinite(ve[i]) && std::isfinite(vt[j]) && vt[j] > 0.0) s.volume_errors.push_back(volume_error(ve[i], vt[j]));
  return s;
}

std::vector<WindowResult> evaluate_windows(IqVed<float>* net, const std::vector<PreparedWindow>& windows,
                                           const RadarConfig& radar, const EvalToggles& toggles) {
  std::vector<WindowResult> out(windows.size());
  std::vector<Waveform> recovered;
  if (net) {
    std::vector<SlowTimeWindow> inputs;
    inputs.reserve(windows.size());
    for (const auto& w : windows) inputs.push_back(w.input);
    recovered = infer(*net, inputs);
  }
  const double fs = radar.frame_rate, lambda = radar.wavelength();
  ArcFitOptions arc;
  arc.enforce_residual = toggles.enforce_residual;
  for (std::size_t k = 0; k < windows.size(); ++k) {
    const PreparedWindow& w = windows[k];
    WindowResult& r = out[k];
    r.index = k;
    r.kind = w.kind;
    r.scene_seed = w.scene_seed;
    r.detected_bin = w.raw.subject_bin;
    r.true_bin = w.true_bin;
    if (net) r.methods["iqved"] = score_waveform(recovered[k], w.truth, fs, toggles.biomarkers);
    if (!toggles.baselines) continue;
    const Waveform phase_disp = project_phase(w.raw) * (lambda / (4.0 * kPi));
    r.methods["bandpass"] = score_waveform(bandpass_baseline(phase_disp, fs), w.truth, fs, toggles.biomarkers);
    try {
      EllipseFit fit;
      const Waveform d = fit_ellipse_arctan(w.raw, lambda, arc, &fit);
      r.arc_flagged = fit.residual / (fit.axes(0) * fit.axes(1)) > arc.max_relative_residual;
      r.methods["ellipse"] = score_waveform(d, w.truth, fs, toggles.biomarkers);
    } catch (const ArcUnidentifiable&) {
      r.arc_flagged = true;
      MethodScore s;
      s.failed = true;
      r.methods["ellipse"] = s;
    }
  }
  return out;
}

namespace {

Json aggregate(const std::vector<const WindowResult*>& rows) {
  Json methods = Json::object();
  for (const auto& m : kMethods) {
    std::vector<double> cos, rate, peak, valley, vol;
    int failed = 0, misses = 0, fas = 0;
    for (const auto* r : rows) {
      const auto it = r->methods.find(m);
      if (it == r->methods.end()) continue;
      const MethodScore& s = it->second;
      cos.push_back(s.cosine);
      failed += s.failed;
      misses += s.misses;
      fas += s.false_alarms;
      if (!s.failed) rate.push_back(s.rate_error_bpm);
      peak.insert(peak.end(), s.peak_errors.begin(), s.peak_errors.end());
      valley.insert(valley.end(), s.valley_errors.begin(), s.valley_errors.end());
      vol.insert(vol.end(), s.volume_errors.begin(), s.volume_errors.end());
    }
    if (cos.empty()) continue;
    auto num = [](double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); };
    methods[m] = {{"windows", cos.size()},
                  {"cosine_mean", num(mean(cos))},
                  {"cosine_median", num(median(cos))},
                  {"failed", failed},
                  {"rate_error_bpm_median", num(median(rate))},
                  {"rate_error_bpm_mean", num(mean(rate))},
                  {"peak_error_s_median", num(median(peak))},
                  {"valley_error_s_median", num(median(valley))},
                  {"volume_rel_error_median", num(median(vol))},
                  {"matched_peaks", peak.size()},
                  {"matched_valleys", valley.size()},
                  {"misses", misses},
                  {"false_alarms", fas}};
  }
  int flagged = 0, localized = 0;
  for (const auto* r : rows) {
    flagged += r->arc_flagged;
    localized += std::abs(r->detected_bin - r->true_bin) <= 1;
  }
  return {{"windows", rows.size()}, {"arc_flagged", flagged}, {"localized_within_1_bin", localized},
          {"methods", methods}};
}

}  // namespace

Json summarize(const std::vector<WindowResult>& results, const std::vector<MotionKind>& kinds) {
  Json per_kind = Json::array();
  for (auto kind : kinds) {
    std::vector<const WindowResult*> rows;
    for (const auto& r : results)
      if (r.kind == kind) rows.push_back(&r);
    Json row = aggregate(rows);
    row["kind"] = to_string(kind);
    per_kind.push_back(row);
  }
  std::vector<const WindowResult*> all;
  for (const auto& r : results) all.push_back(&r);
  return {{"per_kind", per_kind}, {"overall", aggregate(all)}};
}

std::string windows_csv(const std::vector<WindowResult>& results) {
  std::ostringstream os;
  os << std::setprecision(9);
  os << "window,kind,scene_seed,detected_bin,true_bin,arc_flagged";
  for (const auto& m : kMethods) os << ',' << m << "_cosine," << m << "_rate_error_bpm," << m << "_failed";
  os << '\n';
  for (const auto& r : results) {
    os << r.index << ',' << to_string(r.kind) << ',' << r.scene_seed << ',' << r.detected_bin << ',' << r.true_bin
       << ',' << r.arc_flagged;
    for (const auto& m : kMethods) {
      const auto it = r.methods.find(m);
      if (it == r.methods.end())
        os << ",,,";
      else
        os << ',' << it->second.cosine << ',' << it->second.rate_error_bpm << ',' << it->second.failed;
    }
    os << '\n';
  }
  return os.str();
}

std::string events_csv(const std::vector<WindowResult>& results) {
  std::ostringstream os;
  os << std::setprecision(9);
  os << "window,kind,method,quantity,error\n";
  for (const auto& r : results)
    for (const auto& [m, s] : r.methods) {
      auto dump = [&](const char* q, const std::vector<double>& v) {
        for (double e : v) os << r.index << ',' << to_string(r.kind) << ',' << m << ',' << q << ',' << e << '\n';
      };
      dump("peak_time_s", s.peak_errors);
      dump("valley_time_s", s.valley_errors);
      dump("volume_rel", s.volume_errors);
    }
  return os.str();
}

namespace {

template <typename F>
auto stage(const std::string& name, F&& f) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config, const fs::path& out_dir, std::ostream* log) {
  config.validate();
  if (!out_dir.empty()) fs::create_directories(out_dir);
  ExperimentReport rep;

  std::vector<Scene> train_scenes, test_scenes;
  stage("corpus", [&] {
    for (auto& e : corpus_scenes(config.corpus, config.split)) (e.train ? train_scenes : test_scenes).push_back(e.scene);
    return 0;
  });
  if (log) *log << "corpus: " << train_scenes.size() << " train, " << test_scenes.size() << " test windows\n";

  IqVed<float> net(config.network);
  net.init(config.training.rng_seed);
  stage("train", [&] {
    const std::vector<TrainSample> samples =
        training_samples(prepare_scenes(train_scenes, config.radar, config.localizer));
    rep.history = train(net, samples, config.training, [&](const EpochStats& e) {
      if (log) *log << "epoch " << e.epoch << " L_RC " << e.loss.rc << " total " << e.total << '\n' << std::flush;
    });
    if (!out_dir.empty()) save_checkpoint(out_dir / "checkpoint", net, config.training, rep.history);
    return 0;
  });

  stage("evaluate", [&] {
    const auto windows = prepare_scenes(test_scenes, config.radar, config.localizer);
    rep.results = evaluate_windows(&net, windows, config.radar, config.evaluation);
    return 0;
  });

  stage("report", [&] {
    Json hist = Json::array();
    for (const auto& e : rep.history)
      hist.push_back({{"epoch", e.epoch}, {"L_RC", e.loss.rc}, {"L_IR", e.loss.kl_i}, {"L_QR", e.loss.kl_q},
                      {"L_DA", e.loss.da}, {"total", e.total}});
    rep.report = {{"format", "uwbresp-report-1"},
                  {"config_hash", config_hash(config)},
                  {"config", to_json(config)},
                  {"seeds", {{"corpus", config.corpus.seed}, {"training", config.training.rng_seed}}},
                  {"train_windows", train_scenes.size()},
                  {"test_windows", test_scenes.size()},
                  {"parameters", net.parameter_count()},
                  {"loss_history", hist},
                  {"metrics", summarize(rep.results, config.corpus.kinds)}};
    if (!out_dir.empty()) {
      write_text(out_dir / "report.json", rep.report.dump(2) + "\n");
      write_text(out_dir / "windows.csv", windows_csv(rep.results));
      write_text(out_dir / "events.csv", events_csv(rep.results));
      write_text(out_dir / "loss_history.csv", loss_history_csv(rep.history));
    }
    return 0;
  });
  return rep;
}

}  // namespace uwbresp
