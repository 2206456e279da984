#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "uwbresp/checkpoint.hpp"
#include "uwbresp/corpus_io.hpp"
#include "uwbresp/experiment.hpp"
#include "uwbresp/metrics.hpp"
#include "uwbresp/rng.hpp"

using namespace uwbresp;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("uwbresp_test_" + name);
  fs::remove_all(p);
  return p;
}

Waveform sine(double hz, double phase = 0.0, Index n = 1000) {
  Waveform w(n);
  for (Index k = 0; k < n; ++k) w(k) = std::sin(2.0 * kPi * hz * k / 50.0 + phase);
  return w;
}

ExperimentConfig tiny_experiment() {
  ExperimentConfig c;
  c.corpus.kinds = {MotionKind::static_body, MotionKind::periodic_sway};
  c.corpus.scenes_per_kind = 3;
  c.network.encoder_channels = {2, 2, 2, 2, 2};
  c.network.decoder_channels = {2, 2, 2, 2, 2};
  c.network.latent_dim = 4;
  c.training.epochs = 1;
  c.training.batch_size = 2;
  return c;
}

}  // namespace

TEST_CASE("cosine similarity examples") {
  const Waveform a = sine(0.25);
  CHECK(cosine_similarity(a, a) == doctest::Approx(1.0));
  CHECK(std::abs(cosine_similarity(a, sine(0.25, kPi / 2))) < 1e-12);
  CHECK(cosine_similarity(a, -a) == doctest::Approx(-1.0));
  const Waveform b = sine(0.3, 0.4) + 0.2 * sine(0.7);
  CHECK(cosine_similarity(a, b) == doctest::Approx(cosine_similarity(b, a)).epsilon(1e-14));
  CHECK(cosine_similarity(3.0 * a, b) == doctest::Approx(cosine_similarity(a, b)).epsilon(1e-14));
  CHECK_THROWS_AS(cosine_similarity(a, Waveform::Constant(1000, 2.0)), std::invalid_argument);
  CHECK_THROWS_AS(cosine_similarity(a, Waveform::Zero(10)), std::invalid_argument);
}

TEST_CASE("event matching") {
  const std::vector<double> truth{1.0, 5.0, 9.0, 13.0};
  const EventMatch same = match_events(truth, truth);
  CHECK(same.errors == std::vector<double>(4, 0.0));
  CHECK(same.misses == 0);
  CHECK(same.false_alarms == 0);

  std::vector<double> shifted = truth;
  for (auto& t : shifted) t += 0.1;
  for (double e : match_events(shifted, truth).errors) CHECK(e == doctest::Approx(0.1));

  const std::vector<double> dropped{1.05, 9.2, 13.0};
  const EventMatch m = match_events(dropped, truth);
  CHECK(m.misses == 1);
  CHECK(m.false_alarms == 0);
  std::multiset<double> errs(m.errors.begin(), m.errors.end());
  CHECK(errs.size() == 3);
  CHECK(*errs.begin() == doctest::Approx(0.0));
  CHECK(*errs.rbegin() == doctest::Approx(0.2));

  const EventMatch far = match_events({3.0}, {1.0});
  CHECK(far.misses == 1);
  CHECK(far.false_alarms == 1);
  CHECK(far.errors.empty());
}

TEST_CASE("rate and volume errors") {
  CHECK(rate_error(0.25, 0.25) == 0.0);
  CHECK(rate_error(0.26, 0.25) == doctest::Approx(0.6));
  CHECK(volume_error(1.05, 1.0) == doctest::Approx(0.05));
  CHECK_THROWS_AS(volume_error(1.0, 0.0), std::invalid_argument);
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  CHECK(std::isnan(median({})));
}

TEST_CASE("corpus round trip") {
  RadarConfig cfg;
  cfg.noise_std = 0.01;
  const Dataset ds = make_dataset({sample_scene(MotionKind::slow_roll, 3), sample_scene(MotionKind::static_body, 4)}, cfg);
  const fs::path dir = scratch("corpus");
  write_corpus(dir, ds);
  const Dataset back = read_corpus(dir);
  REQUIRE(back.records.size() == ds.records.size());
  CHECK(back.config.carrier_frequency == cfg.carrier_frequency);
  for (std::size_t k = 0; k < ds.records.size(); ++k) {
    CHECK((back.records[k].matrix.i - ds.records[k].matrix.i.cast<float>().cast<double>()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.records[k].truth - ds.records[k].truth.cast<float>().cast<double>()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.records[k].scene.rng_seed == ds.records[k].scene.rng_seed);
    CHECK(back.records[k].scene.motion_kind == ds.records[k].scene.motion_kind);
  }
  // fast-time bin is the leading index on disk
  const auto raw = read_f32(dir / "rec_000000.i.f32");
  CHECK(raw[1] == static_cast<float>(ds.records[0].matrix.i(0, 1)));
  CHECK(raw[static_cast<std::size_t>(ds.records[0].matrix.frames())] == static_cast<float>(ds.records[0].matrix.i(1, 0)));
  fs::remove_all(dir);
}

TEST_CASE("rotated corpus") {
  RadarConfig cfg;
  const Dataset ds = make_dataset({sample_scene(MotionKind::static_body, 1)}, cfg);
  std::vector<double> rot;
  const Dataset r = rotate_corpus(ds, 6, &rot);
  REQUIRE(r.records.size() == 6);
  CHECK(rot[2] == doctest::Approx(2.0 * kPi / 3.0));
  const auto& a = ds.records[0].matrix;
  const auto& b = r.records[3].matrix;
  CHECK((b.i + a.i).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(r.records[3].truth == ds.records[0].truth);
}

TEST_CASE("checkpoint round trip") {
  NetworkConfig nc;
  nc.encoder_channels = {2, 3, 3, 4, 4};
  nc.decoder_channels = {4, 4, 3, 3, 2};
  nc.latent_dim = 5;
  nc.input_channels = 3;
  nc.frames = 100;
  IqVed<float> net(nc);
  net.init(9);
  Rng rng(1);
  for (auto* n : net.norms()) {
    for (Index k = 0; k < n->running_mean.size(); ++k) n->running_mean(k) = static_cast<float>(normal(rng));
    n->running_var.array() += 0.5f;
  }
  TrainConfig tc;
  tc.epochs = 2;
  std::vector<EpochStats> hist(2);
  hist[0] = {1, {10, 1, 2, 3}, 19.0006};
  hist[1] = {2, {5, 1, 1, 1}, 11.0002};
  const fs::path dir = scratch("ckpt");
  save_checkpoint(dir, net, tc, hist);
  Checkpoint meta;
  IqVed<float> back = load_checkpoint(dir, &meta);
  CHECK(meta.history.size() == 2);
  CHECK(meta.history[1].loss.rc == 5.0);
  CHECK(meta.network.latent_dim == 5);
  const auto a = net.params(), b = back.params();
  REQUIRE(a.size() == b.size());
  bool same = true;
  for (std::size_t k = 0; k < a.size(); ++k) same = same && a[k]->value == b[k]->value;
  CHECK(same);
  const auto na = net.norms(), nb = back.norms();
  for (std::size_t k = 0; k < na.size(); ++k) CHECK(na[k]->running_var == nb[k]->running_var);
  const std::string csv = read_text(dir / "loss_history.csv");
  CHECK(csv.rfind("epoch,L_RC,L_IR,L_QR,L_DA,total\n", 0) == 0);

  const fs::path bad = scratch("ckpt_bad");
  fs::create_directories(bad);
  fs::copy(dir / "model.json", bad / "model.json");
  write_f32(bad / "params.f32", std::vector<float>(10, 0.0f));
  CHECK_THROWS(load_checkpoint(bad));
  fs::remove_all(dir);
  fs::remove_all(bad);
}

TEST_CASE("experiment config JSON round trip") {
  ExperimentConfig c = tiny_experiment();
  c.training.augment_count = 60;
  c.radar.noise_std = 0.02;
  const Json j = to_json(c);
  const ExperimentConfig back = experiment_config_from_json(j);
  CHECK(to_json(back) == j);
  CHECK(config_hash(back) == config_hash(c));
  CHECK(config_hash(c).size() == 16);
  c.training.epochs = 2;
  CHECK(config_hash(c) != config_hash(back));

  const ExperimentConfig partial = experiment_config_from_json(Json::parse(R"({"training": {"epochs": 7}})"));
  CHECK(partial.training.epochs == 7);
  CHECK(partial.training.gamma == 3.0);
  CHECK_THROWS(experiment_config_from_json(Json::parse(R"({"split": {"train": 0.5, "test": 0.2}})")));
}

TEST_CASE("corpus scenes are split per kind with disjoint seeds") {
  CorpusSpec spec;
  spec.scenes_per_kind = 9;
  const auto scenes = corpus_scenes(spec, {});
  CHECK(scenes.size() == 54);
  std::set<std::uint64_t> train, test;
  for (const auto& e : scenes) (e.train ? train : test).insert(e.scene.rng_seed);
  CHECK(train.size() == 36);
  CHECK(test.size() == 18);
  for (auto s : test) CHECK(train.count(s) == 0);
}

TEST_CASE("run_experiment is reproducible and complete") {
  const ExperimentConfig c = tiny_experiment();
  const fs::path a = scratch("exp_a"), b = scratch("exp_b");
  const ExperimentReport ra = run_experiment(c, a);
  run_experiment(c, b);
  CHECK(read_text(a / "report.json") == read_text(b / "report.json"));
  CHECK(read_text(a / "windows.csv") == read_text(b / "windows.csv"));
  CHECK(fs::exists(a / "checkpoint" / "params.f32"));
  const Json& m = ra.report["metrics"];
  CHECK(m["per_kind"].size() == 2);
  CHECK(m["per_kind"][0]["kind"] == "static");
  for (const auto& method : kMethods) CHECK(m["overall"]["methods"][method]["windows"] == ra.results.size());
  CHECK(ra.report["seeds"]["corpus"] == c.corpus.seed);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("untrained network scores near chance") {
  ExperimentConfig c = tiny_experiment();
  c.training.epochs = 0;
  c.corpus.scenes_per_kind = 12;
  const ExperimentReport r = run_experiment(c);
  CHECK(r.history.empty());
  const double cos = r.report["metrics"]["overall"]["methods"]["iqved"]["cosine_mean"];
  CHECK(std::abs(cos) < 0.3);
  const double ell = r.report["metrics"]["per_kind"][0]["methods"]["ellipse"]["cosine_mean"];
  CHECK(ell > 0.9);
}

TEST_CASE("stage failures name the stage") {
  ExperimentConfig c = tiny_experiment();
  c.radar.fast_time_bins = 12;  // subjects fall outside the range
  try {
    run_experiment(c);
    FAIL("expected a stage error");
  } catch (const StageError& e) {
    CHECK(e.stage() == "train");
  }
}
