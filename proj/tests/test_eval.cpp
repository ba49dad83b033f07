#include <doctest.h>

#include <charconv>
#include <sstream>

#include "aed/eval.hpp"
#include "generators.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace aed;

namespace {

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::vector<std::string> fields(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream in(line);
  for (std::string f; std::getline(in, f, ',');) out.push_back(f);
  return out;
}

double parse(const std::string& s) {
  double v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  REQUIRE(r.ec == std::errc{});
  REQUIRE(r.ptr == s.data() + s.size());
  return v;
}

// Tiny dataset with two test windows and a matching zero-output model.
struct Fixture {
  WindowedDataset ds;
  ForecastModel model;

  explicit Fixture(Eigen::Index horizon = 60) {
    Rng rng(4);
    ds.norm.features = {{Channel::co2_ppm, 400, 800}};
    ds.norm.targets = {{Channel::pm2_5_ugm3, 0, 50}};
    ds.config.lookback_s = 3;
    ds.config.horizon_s = horizon;
    for (int i = 0; i < 6; ++i) {
      Window w;
      w.x = gen::sequence(rng, 3, 1, 0.3);
      w.y = gen::sequence(rng, horizon, 1, 0.3).cwiseAbs();
      w.origin_s = 1000 + 100 * i;
      w.split = i < 3 ? Split::train : (i == 3 ? Split::val : Split::test);
      ds.windows.push_back(w);
    }
    ModelConfig cfg;
    cfg.feature_dim = 1;
    cfg.target_dim = 1;
    cfg.lookback = 3;
    cfg.horizon = horizon;
    cfg.encoder_hidden = 3;
    cfg.decoder_hidden = 3;
    cfg.head_hidden = 4;
    model.params = init_model(cfg);
    model.norm = ds.norm;
    model.model_id = "fixture";
  }
};

}  // namespace

TEST_CASE("rmse examples") {
  const nn::Sequence a = nn::Sequence::Constant(4, 2, 1.0);
  CHECK(rmse({a}, {a}).overall == 0.0);
  CHECK(rmse({a}, {nn::Sequence::Constant(4, 2, 1.5)}).overall == 0.5);

  nn::Sequence p(1, 2), t(1, 2);
  p << 3, 4;
  t << 0, 0;
  const auto r = rmse({p}, {t});
  CHECK(r.overall == doctest::Approx(3.5355339059).epsilon(1e-10));
  CHECK(r.per_channel == std::vector<double>{3.0, 4.0});

  CHECK_THROWS(rmse({}, {}));
  CHECK_THROWS(rmse({a}, {nn::Sequence::Zero(4, 3)}));
  CHECK_THROWS(rmse({a, a}, {a}));
}

TEST_CASE("property: rmse invariants") {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = 1 + rng.below(4);
    const auto rows = gen::dim(rng, 6), cols = gen::dim(rng, 4);
    std::vector<nn::Sequence> a, b;
    for (std::size_t i = 0; i < n; ++i) {
      a.push_back(gen::sequence(rng, rows, cols));
      b.push_back(gen::sequence(rng, rows, cols));
    }
    const auto ab = rmse(a, b), ba = rmse(b, a);
    REQUIRE(ab.overall == ba.overall);
    REQUIRE(rmse(a, a).overall == 0.0);
    const auto [lo, hi] = std::minmax_element(ab.per_channel.begin(), ab.per_channel.end());
    REQUIRE(ab.overall >= *lo - 1e-15);
    REQUIRE(ab.overall <= *hi + 1e-15);
    if (n == 1) {
      const double m = oracle::mse(oracle::rows(a[0]), oracle::rows(b[0]));
      REQUIRE(ab.overall * ab.overall == doctest::Approx(m).epsilon(1e-12));
    }
  }
}

TEST_CASE("evaluate") {
  Fixture f(5);
  const auto r = evaluate(f.model, f.ds, Split::test);
  CHECK(r.window_count == 2);
  CHECK(r.split == Split::test);
  CHECK(r.model_id == "fixture");
  CHECK(r.channels == std::vector<Channel>{Channel::pm2_5_ugm3});

  std::vector<nn::Sequence> pred, norm_true;
  for (const auto* w : f.ds.split(Split::test)) {
    pred.push_back(forward(f.model.params, w->x));
    norm_true.push_back(w->y);
  }
  CHECK(r.normalized.overall == doctest::Approx(rmse(pred, norm_true).overall).epsilon(1e-12));
  CHECK(r.normalized.per_channel.size() == 1);
  CHECK(r.raw.overall >= 0.0);

  // A model with its own normalization is scored on the dataset's scale.
  auto shifted = f.model;
  shifted.norm.features[0] = {Channel::co2_ppm, 300, 900};
  CHECK_NOTHROW(evaluate(shifted, f.ds, Split::test));

  auto wrong = f.model;
  wrong.norm.targets[0].channel = Channel::pc0_3;
  CHECK_THROWS_AS(evaluate(wrong, f.ds, Split::test), DataError);
}

TEST_CASE("export_predictions") {
  Fixture f;
  test_util::TempDir dir;
  const auto path = dir.path() / "pred.csv";
  export_predictions(f.model, f.ds, Split::test, path);
  const auto lines = lines_of(test_util::slurp(path));
  REQUIRE(lines.size() == 1 + 120);
  CHECK(lines[0] == "timestamp_s,channel,true_value,predicted_value");

  const auto windows = f.ds.split(Split::test);
  std::int64_t prev = 0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fs = fields(lines[i]);
    REQUIRE(fs.size() == 4);
    const auto& w = *windows[(i - 1) / 60];
    const auto t = static_cast<Eigen::Index>((i - 1) % 60);
    const auto ts = static_cast<std::int64_t>(parse(fs[0]));
    CHECK(ts == w.origin_s + 3 + t);
    CHECK(ts > prev);
    prev = ts;
    CHECK(fs[1] == "pm2_5_ugm3");
    CHECK(parse(fs[2]) == f.ds.norm.targets[0].denormalize(w.y(t, 0)));
    CHECK(parse(fs[3]) >= 0.0);
  }
  CHECK_THROWS_AS(export_predictions(f.model, f.ds, Split::test, "/nonexistent/dir/p.csv"), IoError);
}

TEST_CASE("export_loss_curves") {
  TrainReport report;
  for (int e = 0; e < 10; ++e) {
    report.train_loss.push_back(1.0 / (e + 1));
    report.val_loss.push_back(e == 6 ? 0.01 : 0.5 / (e + 1));
  }
  report.best_epoch = 6;
  test_util::TempDir dir;
  export_loss_curves(report, dir.path() / "loss.csv");
  const auto lines = lines_of(test_util::slurp(dir.path() / "loss.csv"));
  REQUIRE(lines.size() == 11);
  CHECK(lines[0] == "epoch,train_loss,val_loss");
  double min_val = 1e9;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fs = fields(lines[i]);
    CHECK(parse(fs[0]) == static_cast<double>(i));
    CHECK(parse(fs[1]) == report.train_loss[i - 1]);
    min_val = std::min(min_val, parse(fs[2]));
  }
  CHECK(min_val == report.best_val_loss());
  CHECK_THROWS_AS(export_loss_curves(TrainReport{}, dir.path() / "empty.csv"), DataError);
  CHECK_THROWS_AS(export_loss_curves(report, "/nonexistent/dir/l.csv"), IoError);
}

TEST_CASE("property: format_double round-trips") {
  Rng rng(2);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.normal() * std::pow(10.0, rng.uniform(-30, 30));
    REQUIRE(parse(format_double(v)) == v);
  }
}

TEST_CASE("compare_models") {
  Fixture f(2);
  // more windows so each split can train
  Rng rng(6);
  for (int i = 0; i < 24; ++i) {
    Window w;
    w.x = gen::sequence(rng, 3, 1, 0.3);
    w.y = gen::sequence(rng, 2, 1, 0.3).cwiseAbs();
    w.origin_s = 2000 + 100 * i;
    w.split = i % 4 == 0 ? Split::val : (i % 4 == 1 ? Split::test : Split::train);
    f.ds.windows.push_back(w);
  }
  auto bi = f.model.params.config;
  auto uni = bi;
  uni.bidirectional = false;
  TrainConfig tc;
  tc.epochs = 3;

  const auto table = compare_models(f.ds, bi, uni, tc, 3);
  REQUIRE(table.trials.size() == 3);
  CHECK(table.trials[0].seed + 1 == table.trials[1].seed);

  SUBCASE("identical configs give identical columns") {
    const auto same = compare_models(f.ds, bi, bi, tc, 2);
    for (const auto& r : same.trials) CHECK(r.rmse_gru == r.rmse_bigru);
  }
  SUBCASE("swapping the configurations swaps the columns") {
    const auto swapped = compare_models(f.ds, uni, bi, tc, 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(swapped.trials[i].rmse_gru == table.trials[i].rmse_bigru);
      CHECK(swapped.trials[i].rmse_bigru == table.trials[i].rmse_gru);
    }
  }
  SUBCASE("median aggregate and csv") {
    std::vector<double> g;
    for (const auto& r : table.trials) g.push_back(r.rmse_gru);
    std::sort(g.begin(), g.end());
    CHECK(table.median.rmse_gru == g[1]);
    test_util::TempDir dir;
    write_comparison_csv(table, dir.path() / "cmp.csv");
    const auto lines = lines_of(test_util::slurp(dir.path() / "cmp.csv"));
    REQUIRE(lines.size() == 5);
    CHECK(lines[0] == "seed,rmse_gru,rmse_bigru");
    CHECK(lines[4].rfind("median,", 0) == 0);
  }
  SUBCASE("one seed") { CHECK(compare_models(f.ds, bi, uni, tc, 1).trials.size() == 1); }
}
