// Acceptance checks: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset. `--expect-fail N` marks a criterion known to be
// red; the exit status is 0 only when exactly the expected criteria fail.

#include <chrono>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "aed/eval.hpp"
#include "aed/ews.hpp"
#include "cli.hpp"
#include "generators.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace aed;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

int cli_run(const std::vector<std::string>& args, std::string* out = nullptr, std::string* err = nullptr) {
  std::istringstream in;
  std::ostringstream o, e;
  const int code = cli::run(args, in, o, e);
  if (out) *out = o.str();
  if (err) *err = e.str();
  if (code != 0) std::cerr << "  aed " << args.front() << " exited " << code << ": " << e.str();
  return code;
}

// --- 1 ---------------------------------------------------------------------

Outcome gradient_check() {
  Rng rng(20240601);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto cfg = gen::small_model(rng);
    auto p = gen::params(rng, cfg);
    const auto x = gen::sequence(rng, cfg.lookback, cfg.feature_dim);
    const auto y = gen::sequence(rng, cfg.horizon, cfg.target_dim);
    auto grads = zero_model(cfg);
    loss_and_gradient(p, x, y, grads);
    // Central differences of the independent scalar oracle, not of the code under test.
    const auto xr = oracle::rows(x), yr = oracle::rows(y);
    const auto loss = [&] { return oracle::mse(oracle::seq2seq(p, xr), yr); };
    worst = std::max(worst, oracle::max_fd_rel_error(p.tensors(), std::as_const(grads).tensors(), loss));
  }
  return {worst < 1e-4, "20 configs, max relative error " + fmt(worst) + " (< 1e-4)"};
}

// --- 2 ---------------------------------------------------------------------

double max_abs(const nn::Sequence& got, const oracle::Mat& want) {
  double worst = 0.0;
  for (Eigen::Index t = 0; t < got.rows(); ++t)
    for (Eigen::Index j = 0; j < got.cols(); ++j) worst = std::max(worst, std::abs(got(t, j) - want[t][j]));
  return worst;
}

Outcome forward_oracles() {
  auto cell = nn::GruCellParams::zeros(2, 2);
  cell.input_weights << 0.1, -0.2, 0.3, 0.05, -0.15, 0.25, 0.2, 0.1, -0.3, 0.4, 0.12, -0.07;
  cell.hidden_weights << 0.05, 0.1, -0.1, 0.2, 0.3, -0.25, 0.15, 0.05, -0.2, 0.1, 0.35, -0.05;
  cell.bias << 0.01, -0.02, 0.03, 0.0, -0.01, 0.02;
  nn::Vector x(2), h(2);
  x << 0.5, -1.5;
  h << 0.25, -0.75;
  const auto cell_want = oracle::gru_step(cell, {0.5, -1.5}, {0.25, -0.75});
  const double e_cell = max_abs(nn::gru_cell_forward(cell, x, h).h_next.transpose(), {cell_want});

  auto back = cell;
  back.input_weights *= -0.5;
  back.bias.reverseInPlace();
  nn::Sequence xs(3, 2);
  xs << 0.3, -0.1, 1.2, 0.4, -0.8, 0.6;
  const auto bi_want = oracle::bidirectional(cell, back, oracle::rows(xs));
  const double e_bi = max_abs(nn::bidirectional_encode(cell, back, xs).state.transpose(), {bi_want});

  nn::Vector state(3);
  state << 0.7, -0.2, 0.05;
  const auto rep = nn::repeat_vector(state, 4);
  const double e_rep = max_abs(rep, oracle::Mat(4, {0.7, -0.2, 0.05}));

  auto head = nn::AffineParams::zeros(3, 2, nn::Activation::relu);
  head.weight << 0.5, -1.0, 0.25, -0.3, 0.2, 0.9;
  head.bias << 0.1, -0.05;
  nn::Sequence hs(3, 3);
  hs << 0.2, 0.4, -0.6, -0.5, 0.1, 0.3, 1.0, -1.0, 0.5;
  const double e_relu = max_abs(nn::time_distributed_affine(head, hs).output, oracle::affine(head, oracle::rows(hs)));
  head.activation = nn::Activation::identity;
  const double e_id = max_abs(nn::time_distributed_affine(head, hs).output, oracle::affine(head, oracle::rows(hs)));

  const double worst = std::max({e_cell, e_bi, e_rep, e_relu, e_id});
  return {worst <= 1e-12, "cell " + fmt(e_cell) + ", bi-encoder " + fmt(e_bi) + ", repeat " + fmt(e_rep) +
                              ", head relu/identity " + fmt(e_relu) + "/" + fmt(e_id) + " (<= 1e-12)"};
}

// --- 3, 4 ------------------------------------------------------------------

const WindowedDataset& six_hour_fixture() {
  static const WindowedDataset ds = [] {
    SynthConfig sc;
    sc.seed = 7;
    sc.duration_s = 6 * 3600;
    PreprocessConfig pc;
    pc.lookback_s = 300;
    pc.horizon_s = 60;
    pc.window_stride_s = 60;
    pc.rng_seed = 7;
    return run_pipeline(generate_synthetic(sc), pc);
  }();
  return ds;
}

ModelConfig fixture_model(bool bidirectional) {
  const auto& ds = six_hour_fixture();
  ModelConfig m;
  m.feature_dim = ds.feature_dim();
  m.target_dim = ds.target_dim();
  m.lookback = 300;
  m.horizon = 60;
  m.bidirectional = bidirectional;
  m.seed = 1;
  return m;
}

Outcome table_direction() {
  TrainConfig tc;
  tc.shuffle_seed = 1;
  const auto table = compare_models(six_hour_fixture(), fixture_model(true), fixture_model(false), tc, 5);
  int wins = 0;
  std::string rows;
  for (const auto& r : table.trials) {
    wins += r.rmse_bigru <= r.rmse_gru ? 1 : 0;
    rows += " [" + fmt(r.rmse_bigru) + " vs " + fmt(r.rmse_gru) + "]";
  }
  return {wins >= 4, "Bi-GRU <= GRU test RMSE in " + std::to_string(wins) + "/5 seeds (need 4); bi vs uni:" + rows};
}

Outcome loss_convergence() {
  TrainConfig tc;
  tc.shuffle_seed = 1;
  const auto r = train(init_model(fixture_model(true)), six_hour_fixture(), tc).report;
  const double first = r.train_loss.front(), last = r.train_loss.back();
  const bool ok = last < 0.5 * first && r.best_val_loss() <= r.val_loss.front();
  return {ok, std::to_string(r.epochs_run()) + " epochs, train " + fmt(first) + " -> " + fmt(last) +
                  " (ratio " + fmt(last / first) + " < 0.5), best val " + fmt(r.best_val_loss()) + " <= first val " +
                  fmt(r.val_loss.front())};
}

// --- 5 ---------------------------------------------------------------------

Outcome threshold_semantics() {
  const std::vector<Channel> chans{Channel::pm2_5_ugm3};
  ThresholdConfig cfg;
  cfg.pm03_count_limit_per_dL = std::numeric_limits<double>::infinity();
  nn::Sequence at(3, 1), above(3, 1);
  at << 12.0, 35.0, 20.0;
  above << 12.0, 35.0 + 1e-9, 20.0;
  const auto quiet = evaluate_thresholds(at, chans, cfg, {}, 0);
  const auto loud = evaluate_thresholds(above, chans, cfg, {}, 0);
  const bool ok = quiet.events.empty() && loud.events.size() == 1 && loud.events[0].transition == Transition::raised;
  return {ok, "35.0 -> " + std::to_string(quiet.events.size()) + " events, 35.0 + 1e-9 -> " +
                  std::to_string(loud.events.size()) + " RAISED"};
}

// --- 6 ---------------------------------------------------------------------

Outcome preprocessing_invariants() {
  Rng rng(66);
  PreprocessConfig cfg;
  std::vector<std::string> failures;

  const auto s = split_sizes(100, cfg.split_fractions);
  const bool a = std::abs(static_cast<long>(s[0]) - 65) <= 1 && std::abs(static_cast<long>(s[1]) - 10) <= 1 &&
                 std::abs(static_cast<long>(s[2]) - 25) <= 1;
  if (!a) failures.push_back("(a)");

  bool b = true;
  for (int trial = 0; trial < 50 && b; ++trial) {
    auto frames = generate_synthetic(quiet_synth_config(1, 40));
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = 0; i < frames.size(); ++i) {
      frames[i].co2_ppm = rng.uniform(300, 3000);
      if (i < 25) lo = std::min(lo, frames[i].co2_ppm), hi = std::max(hi, frames[i].co2_ppm);
    }
    TimeSeriesSegment seg{frames.front().timestamp_s, 1, frames};
    const auto n = normalize({seg}, {Channel::co2_ppm}, {Channel::co2_ppm}, frames[25].timestamp_s);
    b = n.params.features[0].normalize(lo) == 0.0 && n.params.features[0].normalize(hi) == 1.0;
  }
  if (!b) failures.push_back("(b)");

  bool c = true;
  for (int trial = 0; trial < 300 && c; ++trial) {
    PreprocessConfig wc;
    wc.lookback_s = 1 + rng.below(30);
    wc.horizon_s = 1 + rng.below(10);
    wc.window_stride_s = 1 + rng.below(9);
    const auto L = 1 + rng.below(150);
    const auto need = wc.lookback_s + wc.horizon_s;
    const std::size_t want = L < need ? 0 : (L - need) / wc.window_stride_s + 1;
    auto frames = generate_synthetic(quiet_synth_config(1, static_cast<std::int64_t>(L)));
    TimeSeriesSegment seg{frames.front().timestamp_s, 1, frames};
    c = window_count(L, wc) == want && plan_windows({seg}, wc).slots.size() == want;
  }
  if (!c) failures.push_back("(c)");

  bool d = true;
  for (int trial = 0; trial < 100 && d; ++trial) {
    WindowedDataset ds;
    ds.norm.targets = {{Channel::pc0_3, 0.0, 10.0}};
    const auto n = rng.below(120);
    for (std::size_t i = 0; i < n; ++i) {
      Window w;
      w.x = nn::Sequence::Constant(2, 1, rng.uniform());
      w.y = nn::Sequence::Zero(2, 1);
      if (rng.uniform() < 0.3) w.y(1, 0) = rng.uniform(0.01, 1.0);
      w.origin_s = static_cast<std::int64_t>(i);
      const double u = rng.uniform();
      w.split = u < 0.65 ? Split::train : (u < 0.75 ? Split::val : Split::test);
      ds.windows.push_back(w);
    }
    PreprocessConfig uc;
    uc.undersample_zero_ratio = rng.uniform(0.0, 3.0);
    uc.rng_seed = rng.next();
    const auto out = undersample(ds, uc);
    std::size_t zero = 0, nonzero = 0;
    for (const auto* w : out.split(Split::train)) (is_zero_window(*w, out.norm) ? zero : nonzero) += 1;
    d = nonzero > 0 ? static_cast<double>(zero) <= uc.undersample_zero_ratio * static_cast<double>(nonzero)
                    : zero <= 1;
    for (auto split : {Split::val, Split::test}) {
      const auto before = ds.split(split), after = out.split(split);
      d = d && before.size() == after.size();
      for (std::size_t i = 0; d && i < before.size(); ++i)
        d = before[i]->origin_s == after[i]->origin_s && before[i]->x == after[i]->x && before[i]->y == after[i]->y;
    }
  }
  if (!d) failures.push_back("(d)");

  std::string detail = "(a) split of 100 = " + std::to_string(s[0]) + "/" + std::to_string(s[1]) + "/" +
                       std::to_string(s[2]) + ", (b) 50 fits, (c) 300 lengths, (d) 100 fixtures";
  for (const auto& f : failures) detail += "; failed " + f;
  return {failures.empty(), detail};
}

// --- 7 ---------------------------------------------------------------------

Outcome checkpoint_round_trip() {
  Rng rng(77);
  test_util::TempDir dir;
  ModelConfig cfg;
  cfg.feature_dim = 5;
  cfg.target_dim = 4;
  cfg.encoder_hidden = 6;
  cfg.decoder_hidden = 5;
  cfg.lookback = 12;
  cfg.horizon = 6;
  const auto model = gen::forecast_model(rng, cfg);
  save_checkpoint(model, dir.path() / "m.ckpt");
  const auto back = load_checkpoint(dir.path() / "m.ckpt");
  int identical = 0;
  for (int i = 0; i < 100; ++i) {
    const auto x = gen::sequence(rng, cfg.lookback, cfg.feature_dim, 10.0);
    const auto a = predict(model, x), b = predict(back, x);
    identical += std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0 ? 1 : 0;
  }

  const auto good = encode_checkpoint(model);
  auto kind = [](std::vector<std::uint8_t> bytes) -> std::string {
    try {
      decode_checkpoint(bytes);
      return "accepted";
    } catch (const CheckpointError& e) {
      switch (e.kind()) {
        case CheckpointError::Kind::bad_magic: return "bad_magic";
        case CheckpointError::Kind::version_mismatch: return "version_mismatch";
        case CheckpointError::Kind::truncated: return "truncated";
        case CheckpointError::Kind::checksum_mismatch: return "checksum_mismatch";
        case CheckpointError::Kind::invalid: return "invalid";
      }
    }
    return "?";
  };
  auto magic = good, version = good, flipped = good;
  magic[1] ^= 0xff;
  version[4] += 1;
  flipped[good.size() / 2] ^= 0x10;
  const std::vector<std::string> kinds{kind(magic), kind(version),
                                       kind({good.begin(), good.begin() + static_cast<long>(good.size() / 2)}),
                                       kind(flipped)};
  const std::vector<std::string> want{"bad_magic", "version_mismatch", "truncated", "checksum_mismatch"};
  const bool ok = identical == 100 && kinds == want;
  return {ok, std::to_string(identical) + "/100 bit-identical predictions; corruptions -> " + kinds[0] + ", " +
                  kinds[1] + ", " + kinds[2] + ", " + kinds[3]};
}

// --- 8 ---------------------------------------------------------------------

Outcome ews_replay() {
  test_util::TempDir dir;
  const auto p = [&](const char* name) { return (dir.path() / name).string(); };
  std::ofstream(p("burst.json")) << R"({"synth": {"event_rate_per_hour": 0, "spontaneous_burst_rate_per_hour": 0,
    "crew_activity_rate_per_hour": 0, "scripted_spikes": [{"offset_s": 410, "magnitude_g": 0.08}]}})";
  const std::int64_t start = 1640100000;
  if (cli_run({"gen", "--seed", "3", "--hours", "24", "-o", p("train.csv")}) ||
      cli_run({"prep", "--seed", "3", "--lookback", "120", "--horizon", "60", "--stride", "15", "-i", p("train.csv"),
               "-o", p("ds")}) ||
      cli_run({"train", "--seed", "3", "--epochs", "20", "-d", p("ds"), "-o", p("m.ckpt")}) ||
      cli_run({"gen", "--config", p("burst.json"), "--seed", "11", "--hours", "0.3", "--start",
               std::to_string(start), "-o", p("burst.csv")})) {
    return {false, "pipeline command failed"};
  }
  const std::vector<std::string> monitor{"monitor", "-c", p("m.ckpt"), "-i", p("burst.csv"), "--pm03-limit", "inf"};
  std::string out1, out2, summary;
  if (cli_run(monitor, &out1, &summary) || cli_run(monitor, &out2)) return {false, "monitor failed"};

  std::int64_t crossing = -1;
  for (const auto& f : read_csv(p("burst.csv"))) {
    if (f.pm_mass_ugm3[1] > 35.0) {
      crossing = f.timestamp_s;
      break;
    }
  }
  std::optional<std::int64_t> raised, cleared;
  std::istringstream lines(out1);
  for (std::string line; std::getline(lines, line);) {
    const auto j = nlohmann::json::parse(line);
    const auto ts = j["ts"].get<std::int64_t>();
    if (j["transition"] == "RAISED" && !raised) raised = ts;
    if (j["transition"] == "CLEARED" && raised && !cleared) cleared = ts;
  }
  if (crossing < 0) return {false, "burst fixture never crosses 35 ug/m3"};
  if (!raised) return {false, "no RAISED event; " + summary};
  const auto lead = crossing - *raised;
  const bool ok = lead >= 1 && cleared && out1 == out2;
  return {ok, "RAISED at +" + std::to_string(*raised - start) + " s, raw crossing at +" +
                  std::to_string(crossing - start) + " s, lead " + std::to_string(lead) +
                  " s (need >= 1, target 60); CLEARED " + (cleared ? "at +" + std::to_string(*cleared - start) + " s" : "missing") +
                  "; replay " + (out1 == out2 ? "deterministic" : "NOT deterministic")};
}

// --- 9 ---------------------------------------------------------------------

std::map<std::string, std::string> artifacts(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = test_util::slurp(e.path());
  }
  return files;
}

Outcome determinism() {
  test_util::TempDir a, b;
  for (const auto* dir : {&a, &b}) {
    const auto p = [&](const char* name) { return (dir->path() / name).string(); };
    std::ofstream(p("cfg.json")) << R"({"preprocess": {"lookback_s": 300, "horizon_s": 60, "window_stride_s": 60},
      "train": {"epochs": 3}})";
    if (cli_run({"gen", "--seed", "9", "--hours", "3", "-o", p("t.csv")}) ||
        cli_run({"prep", "--config", p("cfg.json"), "--seed", "9", "-i", p("t.csv"), "-o", p("ds")}) ||
        cli_run({"train", "--config", p("cfg.json"), "--seed", "9", "-d", p("ds"), "-o", p("m.ckpt")})) {
      return {false, "pipeline command failed"};
    }
  }
  const auto fa = artifacts(a.path()), fb = artifacts(b.path());
  std::size_t bytes = 0;
  for (const auto& [k, v] : fa) bytes += v.size();
  return {fa == fb && fa.size() >= 9, std::to_string(fa.size()) + " artifacts (" + std::to_string(bytes) +
                                          " bytes) " + (fa == fb ? "byte-identical" : "DIFFER") + " across two runs"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, gradient_check},      {2, forward_oracles},          {3, table_direction},
      {4, loss_convergence},    {5, threshold_semantics},      {6, preprocessing_invariants},
      {7, checkpoint_round_trip}, {8, ews_replay},             {9, determinism},
  };
  std::set<int> only, expected, failed;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--expect-fail") == 0 && i + 1 < argc) {
      expected.insert(std::atoi(argv[++i]));
    } else {
      only.insert(std::atoi(argv[i]));
    }
  }

  for (const auto& [n, check] : criteria) {
    if (!only.empty() && !only.count(n)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome r;
    try {
      r = check();
    } catch (const std::exception& e) {
      r = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "criterion " << n << ": " << (r.pass ? "PASS" : "FAIL") << "  " << r.detail << "  [" << fmt(secs)
              << " s]" << std::endl;
    if (!r.pass) failed.insert(n);
  }
  std::set<int> expected_run;
  for (int n : expected)
    if (only.empty() || only.count(n)) expected_run.insert(n);
  if (!expected_run.empty()) {
    std::cout << "expected failures:";
    for (int n : expected_run) std::cout << ' ' << n << (failed.count(n) ? "" : " (now passing)");
    std::cout << std::endl;
  }
  return failed == expected_run ? 0 : 1;
}
