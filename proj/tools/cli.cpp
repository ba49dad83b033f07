#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "aed/config_json.hpp"
#include "aed/eval.hpp"

namespace aed::cli {

namespace {

using nlohmann::ordered_json;

void require_known_sections(const ordered_json& j) {
  static const std::vector<std::string> known = {"synth", "preprocess", "model", "train", "thresholds", "monitor"};
  if (!j.is_object()) throw DataError("config file must hold a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw DataError("unknown config section '" + key + "'");
    }
  }
}

std::int64_t data_end_s(const WindowedDataset& ds) {
  std::int64_t end = 0;
  for (const auto& w : ds.windows) {
    end = std::max(end, w.origin_s + static_cast<std::int64_t>(ds.config.lookback_s + ds.config.horizon_s));
  }
  return end;
}

ModelConfig model_for(const ModelConfig& base, const WindowedDataset& ds) {
  ModelConfig m = base;
  m.feature_dim = ds.feature_dim();
  m.target_dim = ds.target_dim();
  m.lookback = static_cast<Eigen::Index>(ds.config.lookback_s);
  m.horizon = static_cast<Eigen::Index>(ds.config.horizon_s);
  return m;
}

ForecastModel fit(const ModelConfig& mcfg, const WindowedDataset& ds, const TrainConfig& tcfg,
                  std::uint64_t generation, TrainReport& report) {
  auto trained = train(init_model(mcfg), ds, tcfg);
  report = std::move(trained.report);
  ForecastModel model;
  model.params = std::move(trained.params);
  model.norm = ds.norm;
  model.generation = generation;
  model.model_id = make_model_id(model.params, generation);
  model.trained_at_s = data_end_s(ds);
  return model;
}

std::string channel_list(const std::vector<Channel>& chans) {
  std::string s;
  for (auto ch : chans) {
    if (!s.empty()) s += ',';
    s += channel_name(ch);
  }
  return s;
}

void print_rmse(std::ostream& out, const EvalResult& r) {
  out << "model " << r.model_id << "  split " << split_name(r.split) << "  windows " << r.window_count << '\n';
  out << "channel,rmse_normalized,rmse_raw,unit\n";
  for (std::size_t i = 0; i < r.channels.size(); ++i) {
    out << channel_name(r.channels[i]) << ',' << format_double(r.normalized.per_channel[i]) << ','
        << format_double(r.raw.per_channel[i]) << ',' << channel_unit(r.channels[i]) << '\n';
  }
  out << "overall," << format_double(r.normalized.overall) << ',' << format_double(r.raw.overall) << ",\n";
}

void write_rmse_csv(const EvalResult& r, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  print_rmse(f, r);
  if (!f) throw IoError("write failed: " + path.string());
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

// Options shared by every subcommand, after the subcommand name too.
struct Globals {
  std::string config_path;
  std::uint64_t seed = 0;
  std::vector<CLI::Option*> seed_opts;
  bool quiet = false;
};

RunConfig resolve(const Globals& g) {
  RunConfig cfg;
  if (!g.config_path.empty()) load_config_file(cfg, g.config_path);
  for (const auto* opt : g.seed_opts) {
    if (opt->count() > 0) apply_seed(cfg, g.seed);
  }
  return cfg;
}

std::filesystem::path default_loss_path(const std::filesystem::path& checkpoint) {
  auto p = checkpoint;
  p += ".loss.csv";
  return p;
}

// --- subcommands ------------------------------------------------------------

struct GenArgs {
  std::string out;
  double hours = 24.0;
  std::int64_t start_s = SynthConfig{}.start_s;
  CLI::Option* start_opt = nullptr;
};

int cmd_gen(const Globals& g, const GenArgs& a, std::ostream& out) {
  auto cfg = resolve(g);
  if (!(a.hours > 0.0)) throw CLI::ValidationError("--hours", "must be > 0");
  cfg.synth.duration_s = static_cast<std::int64_t>(std::llround(a.hours * 3600.0));
  if (a.start_opt->count() > 0) cfg.synth.start_s = a.start_s;
  const auto frames = generate_synthetic(cfg.synth);
  write_csv(frames, a.out);
  if (!g.quiet) out << "wrote " << frames.size() << " rows to " << a.out << '\n';
  return kOk;
}

struct PrepArgs {
  std::string in, out;
  std::size_t lookback = PreprocessConfig{}.lookback_s, horizon = PreprocessConfig{}.horizon_s,
              stride = PreprocessConfig{}.window_stride_s;
  CLI::Option *lookback_opt = nullptr, *horizon_opt = nullptr, *stride_opt = nullptr;
};

int cmd_prep(const Globals& g, const PrepArgs& a, std::ostream& out) {
  auto cfg = resolve(g);
  if (a.lookback_opt->count()) cfg.preprocess.lookback_s = a.lookback;
  if (a.horizon_opt->count()) cfg.preprocess.horizon_s = a.horizon;
  if (a.stride_opt->count()) cfg.preprocess.window_stride_s = a.stride;
  const auto frames = read_csv(a.in);
  const auto ds = run_pipeline(frames, cfg.preprocess);
  save_dataset(ds, a.out);
  if (!g.quiet) {
    out << "windows: train " << ds.count(Split::train) << ", val " << ds.count(Split::val) << ", test "
        << ds.count(Split::test) << '\n';
    out << "features: " << channel_list(ds.norm.feature_channels()) << '\n';
    out << "targets: " << channel_list(ds.norm.target_channels()) << '\n';
    for (const auto& d : ds.dropped_channels) {
      out << "dropped " << channel_name(d.channel) << " (|r| = " << format_double(std::abs(d.correlation))
          << " with " << channel_name(d.partner) << ")\n";
    }
    out << "outliers flagged: " << ds.outliers_flagged << '\n';
    out << "undersample: kept " << ds.undersample.zero_retained << " of " << ds.undersample.zero_before
        << " all-zero train windows (" << ds.undersample.nonzero << " non-zero)\n";
  }
  return kOk;
}

struct TrainArgs {
  std::string data, out, loss_csv;
  bool bidirectional = true;
  CLI::Option* bidir_opt = nullptr;
  int epochs = TrainConfig{}.epochs;
  CLI::Option* epochs_opt = nullptr;
};

int cmd_train(const Globals& g, const TrainArgs& a, std::ostream& out) {
  auto cfg = resolve(g);
  if (a.bidir_opt->count()) cfg.model.bidirectional = a.bidirectional;
  if (a.epochs_opt->count()) cfg.train.epochs = a.epochs;
  const auto ds = load_dataset(a.data);
  TrainReport report;
  const auto model = fit(model_for(cfg.model, ds), ds, cfg.train, 1, report);
  save_checkpoint(model, a.out);
  const auto loss_path = a.loss_csv.empty() ? default_loss_path(a.out) : std::filesystem::path(a.loss_csv);
  export_loss_curves(report, loss_path);
  if (!g.quiet) {
    out << "model " << model.model_id << (cfg.model.bidirectional ? " (bidirectional)" : " (unidirectional)")
        << '\n';
    out << "epochs run: " << report.epochs_run() << '\n';
    out << "final train loss: " << format_double(report.train_loss.back()) << '\n';
    out << "final val loss: " << format_double(report.val_loss.back()) << '\n';
    out << "best epoch: " << report.best_epoch + 1 << " (val loss " << format_double(report.best_val_loss())
        << ")\n";
  }
  return kOk;
}

struct EvalArgs {
  std::vector<std::string> checkpoints;
  std::string data, out_dir, split = "test";
};

int cmd_eval(const Globals& g, const EvalArgs& a, std::ostream& out) {
  (void)resolve(g);
  if (a.checkpoints.empty() || a.checkpoints.size() > 2) {
    throw CLI::ValidationError("--checkpoint", "give one or two checkpoints");
  }
  const auto split = split_from_name(a.split);
  const auto ds = load_dataset(a.data);
  if (!a.out_dir.empty()) ensure_dir(a.out_dir);
  std::vector<ForecastModel> models;
  std::vector<EvalResult> results;
  for (const auto& path : a.checkpoints) {
    models.push_back(load_checkpoint(path));
    results.push_back(evaluate(models.back(), ds, split));
    if (!g.quiet) print_rmse(out, results.back());
    if (!a.out_dir.empty()) {
      const std::string stem = models.size() == 1 ? "" : "_2";
      const std::filesystem::path dir(a.out_dir);
      write_rmse_csv(results.back(), dir / ("rmse_" + std::string(split_name(split)) + stem + ".csv"));
      export_predictions(models.back(), ds, split, dir / ("predictions_" + std::string(split_name(split)) + stem + ".csv"));
    }
  }
  if (models.size() == 2) {
    const auto& c0 = models[0].params.config;
    const auto& c1 = models[1].params.config;
    if (c0.bidirectional == c1.bidirectional) {
      throw DataError("comparison needs one bidirectional and one unidirectional checkpoint");
    }
    const std::size_t bi = c0.bidirectional ? 0 : 1;
    ComparisonTable table;
    ComparisonRow row;
    row.seed = models[bi].params.config.seed;
    row.rmse_bigru = results[bi].normalized.overall;
    row.rmse_gru = results[1 - bi].normalized.overall;
    table.trials.push_back(row);
    table.median = row;
    if (!a.out_dir.empty()) write_comparison_csv(table, std::filesystem::path(a.out_dir) / "comparison.csv");
    if (!g.quiet) {
      out << "comparison (normalized " << split_name(split) << " RMSE): gru " << format_double(row.rmse_gru)
          << ", bigru " << format_double(row.rmse_bigru) << '\n';
    }
  }
  return kOk;
}

struct PredictArgs {
  std::string checkpoint, in, out;
  std::int64_t at = 0;
  CLI::Option* at_opt = nullptr;
};

int cmd_predict(const Globals& g, const PredictArgs& a, std::ostream& out) {
  (void)resolve(g);
  const auto model = load_checkpoint(a.checkpoint);
  const auto frames = read_csv(a.in);
  const auto& mc = model.params.config;
  const auto lookback = static_cast<std::size_t>(mc.lookback);
  // The window ends at --at (inclusive), or at the last row.
  std::size_t end = frames.size();
  if (a.at_opt->count()) {
    end = 0;
    while (end < frames.size() && frames[end].timestamp_s <= a.at) ++end;
  }
  if (end < lookback) {
    throw DataError("need " + std::to_string(lookback) + " rows before the prediction point, have " +
                    std::to_string(end));
  }
  const auto features = model.norm.feature_channels();
  nn::Sequence raw(mc.lookback, mc.feature_dim);
  const std::size_t begin = end - lookback;
  for (std::size_t t = 0; t < lookback; ++t) {
    const auto& f = frames[begin + t];
    if (t > 0 && f.timestamp_s != frames[begin + t - 1].timestamp_s + 1) {
      throw DataError("rows before the prediction point are not a contiguous 1 Hz run (break at t=" +
                      std::to_string(f.timestamp_s) + ")");
    }
    for (std::size_t c = 0; c < features.size(); ++c) {
      const double v = f[features[c]];
      if (std::isnan(v)) {
        throw DataError("row t=" + std::to_string(f.timestamp_s) + " is missing " +
                        std::string(channel_name(features[c])));
      }
      raw(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c)) = v;
    }
  }
  const auto pred = predict(model, raw);
  const auto now = frames[end - 1].timestamp_s;
  const auto targets = model.norm.target_channels();
  std::ofstream file;
  if (!a.out.empty()) {
    file.open(a.out, std::ios::binary | std::ios::trunc);
    if (!file) throw IoError("cannot write " + a.out);
  }
  std::ostream& dst = a.out.empty() ? out : file;
  dst << "timestamp_s,channel,predicted_value\n";
  for (Eigen::Index t = 0; t < pred.rows(); ++t) {
    for (std::size_t c = 0; c < targets.size(); ++c) {
      dst << now + t + 1 << ',' << channel_name(targets[c]) << ','
          << format_double(pred(t, static_cast<Eigen::Index>(c))) << '\n';
    }
  }
  if (!dst) throw IoError("write failed");
  return kOk;
}

struct MonitorArgs {
  std::string checkpoint, in = "-";
  std::vector<std::string> alarm_files;
  bool stdout_alarms = false;
  double replay_speed = 0.0;
  double pm25_limit = ThresholdConfig{}.pm25_mass_limit_ugm3;
  double pm03_limit = ThresholdConfig{}.pm03_count_limit_per_dL;
  int hysteresis = ThresholdConfig{}.clear_hysteresis_steps;
  std::int64_t cadence = RunConfig{}.prediction_cadence_s;
  CLI::Option *pm25_opt = nullptr, *pm03_opt = nullptr, *hyst_opt = nullptr, *cadence_opt = nullptr;
};

int cmd_monitor(const Globals& g, const MonitorArgs& a, std::istream& in, std::ostream& out,
                std::ostream& err) {
  auto cfg = resolve(g);
  if (a.pm25_opt->count()) cfg.thresholds.pm25_mass_limit_ugm3 = a.pm25_limit;
  if (a.pm03_opt->count()) cfg.thresholds.pm03_count_limit_per_dL = a.pm03_limit;
  if (a.hyst_opt->count()) cfg.thresholds.clear_hysteresis_steps = a.hysteresis;
  if (a.cadence_opt->count()) cfg.prediction_cadence_s = a.cadence;
  if (cfg.prediction_cadence_s < 1) throw DataError("prediction cadence must be >= 1 s");
  if (a.replay_speed < 0.0) throw CLI::ValidationError("--replay-speed", "must be >= 0");

  auto model = std::make_shared<const ForecastModel>(load_checkpoint(a.checkpoint));
  const auto anchor = model->trained_at_s;
  Monitor monitor(model, {cfg.thresholds, cfg.prediction_cadence_s});

  std::ifstream file;
  if (a.in != "-") {
    file.open(a.in, std::ios::binary);
    if (!file) throw IoError("cannot open " + a.in);
  }
  std::istream& src = a.in == "-" ? in : file;

  StreamSink stdout_sink(out);
  std::vector<std::unique_ptr<FileSink>> file_sinks;
  std::vector<AlarmSink*> sinks;
  if (a.stdout_alarms || a.alarm_files.empty()) sinks.push_back(&stdout_sink);
  for (const auto& path : a.alarm_files) {
    file_sinks.push_back(std::make_unique<FileSink>(path));
    sinks.push_back(file_sinks.back().get());
  }

  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(src, line)) throw DataError("input stream is empty (expected a CSV header)");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  check_csv_header(line);

  std::size_t frames = 0, rejected = 0, predictions = 0, raised = 0, cleared = 0, sink_failures = 0;
  std::optional<std::int64_t> last_ts;
  std::int64_t last_seen = 0;
  while (std::getline(src, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    TelemetryFrame frame;
    try {
      frame = parse_csv_row(line, line_no);
    } catch (const CsvError& e) {
      ++rejected;
      err << "line " << line_no << ": rejected: " << e.what() << '\n';
      continue;
    }
    if (a.replay_speed > 0.0 && last_ts && frame.timestamp_s > *last_ts) {
      const double wait = static_cast<double>(frame.timestamp_s - *last_ts) / a.replay_speed;
      std::this_thread::sleep_for(std::chrono::duration<double>(wait));
    }
    const auto result = monitor.tick(frame);
    if (result.error) {
      ++rejected;
      err << "line " << line_no << ": rejected: " << *result.error << '\n';
      continue;
    }
    ++frames;
    last_ts = frame.timestamp_s;
    last_seen = frame.timestamp_s;
    if (result.predicted) ++predictions;
    for (const auto& e : result.events) {
      (e.transition == Transition::raised ? raised : cleared) += 1;
      sink_failures += emit(e, sinks, err);
    }
  }
  if (src.bad()) throw IoError("error reading the input stream");

  if (!g.quiet) {
    err << "summary: " << frames << " frames, " << rejected << " rejected rows, " << predictions
        << " predictions, " << raised + cleared << " alarm events (" << raised << " raised, " << cleared
        << " cleared)\n";
    if (raised + cleared == 0) err << "no alarms raised\n";
    if (sink_failures > 0) err << sink_failures << " alarm sink writes failed\n";
    if (last_ts && last_seen >= anchor && schedule_retrain(anchor, last_seen) == RetrainStatus::due) {
      err << "model " << model->model_id << " is due for retraining\n";
    }
  }
  return kOk;
}

struct RetrainArgs {
  std::string checkpoint, in, out, loss_csv, dataset_dir;
};

int cmd_retrain(const Globals& g, const RetrainArgs& a, std::ostream& out) {
  auto cfg = resolve(g);
  const auto old = load_checkpoint(a.checkpoint);
  const auto& oc = old.params.config;
  // The replacement must be a drop-in for the running monitor.
  cfg.preprocess.lookback_s = static_cast<std::size_t>(oc.lookback);
  cfg.preprocess.horizon_s = static_cast<std::size_t>(oc.horizon);
  cfg.preprocess.feature_channels = old.norm.feature_channels();
  cfg.preprocess.target_channels = old.norm.target_channels();
  const auto ds = run_pipeline(read_csv(a.in), cfg.preprocess);
  if (ds.norm.feature_channels() != old.norm.feature_channels() ||
      ds.norm.target_channels() != old.norm.target_channels()) {
    throw DataError("new data does not keep the model's channels: model uses features [" +
                    channel_list(old.norm.feature_channels()) + "], new data keeps [" +
                    channel_list(ds.norm.feature_channels()) + "]");
  }
  if (!a.dataset_dir.empty()) save_dataset(ds, a.dataset_dir);

  ModelConfig mc = cfg.model;
  mc.encoder_hidden = oc.encoder_hidden;
  mc.decoder_hidden = oc.decoder_hidden;
  mc.head_hidden = oc.head_hidden;
  mc.bidirectional = oc.bidirectional;
  TrainReport report;
  const auto fresh = fit(model_for(mc, ds), ds, cfg.train, old.generation + 1, report);
  save_checkpoint(fresh, a.out);
  export_loss_curves(report, a.loss_csv.empty() ? default_loss_path(a.out) : std::filesystem::path(a.loss_csv));

  if (!g.quiet) {
    const auto before = evaluate(old, ds, Split::test);
    const auto after = evaluate(fresh, ds, Split::test);
    out << "old model " << old.model_id << ": test RMSE " << format_double(before.raw.overall) << " (raw), "
        << format_double(before.normalized.overall) << " (normalized)\n";
    out << "new model " << fresh.model_id << ": test RMSE " << format_double(after.raw.overall) << " (raw), "
        << format_double(after.normalized.overall) << " (normalized)\n";
  }
  return kOk;
}

void add_globals(CLI::App& app, Globals& g) {
  app.add_option("--config", g.config_path, "JSON config file (flags override its values)");
  g.seed_opts.push_back(app.add_option("--seed", g.seed, "Seed for generation, undersampling, init and shuffling"));
  app.add_flag("--quiet", g.quiet, "Suppress informational output");
}

}  // namespace

void load_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open config file " + path);
  ordered_json j;
  try {
    j = ordered_json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("config file " + path + " is not valid JSON: " + e.what());
  }
  require_known_sections(j);
  if (j.contains("synth")) update_from_json(cfg.synth, j["synth"]);
  if (j.contains("preprocess")) update_from_json(cfg.preprocess, j["preprocess"]);
  if (j.contains("model")) update_from_json(cfg.model, j["model"]);
  if (j.contains("train")) update_from_json(cfg.train, j["train"]);
  if (j.contains("thresholds")) update_from_json(cfg.thresholds, j["thresholds"]);
  if (j.contains("monitor")) {
    const auto& m = j["monitor"];
    for (const auto& [key, value] : m.items()) {
      if (key != "prediction_cadence_s") throw DataError("unknown config key 'monitor." + key + "'");
      if (!value.is_number_integer()) throw DataError("config key 'monitor." + key + "' must be an integer");
      cfg.prediction_cadence_s = value.get<std::int64_t>();
    }
  }
}

void apply_seed(RunConfig& cfg, std::uint64_t seed) {
  cfg.synth.seed = seed;
  cfg.preprocess.rng_seed = seed;
  cfg.model.seed = seed;
  cfg.train.shuffle_seed = seed;
}

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Air-quality forecasting and early-warning toolkit", "aed"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  Globals g;
  add_globals(app, g);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Write a synthetic telemetry CSV");
  gen_cmd->add_option("--out,-o", gen.out, "Output CSV path")->required();
  gen_cmd->add_option("--hours", gen.hours, "Duration in hours");
  gen.start_opt = gen_cmd->add_option("--start", gen.start_s, "First timestamp (epoch seconds)");

  PrepArgs prep;
  auto* prep_cmd = app.add_subcommand("prep", "Clean, window and normalize a telemetry CSV");
  prep_cmd->add_option("--in,-i", prep.in, "Input telemetry CSV")->required();
  prep_cmd->add_option("--out,-o", prep.out, "Output dataset directory")->required();
  prep.lookback_opt = prep_cmd->add_option("--lookback", prep.lookback, "Lookback in seconds");
  prep.horizon_opt = prep_cmd->add_option("--horizon", prep.horizon, "Horizon in seconds");
  prep.stride_opt = prep_cmd->add_option("--stride", prep.stride, "Window stride in seconds");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a forecaster on a prepared dataset");
  train_cmd->add_option("--data,-d", tr.data, "Dataset directory")->required();
  train_cmd->add_option("--out,-o", tr.out, "Checkpoint path")->required();
  train_cmd->add_option("--loss-csv", tr.loss_csv, "Loss-curve CSV path (default <out>.loss.csv)");
  tr.bidir_opt = train_cmd->add_option("--bidirectional", tr.bidirectional, "Bidirectional encoder");
  tr.epochs_opt = train_cmd->add_option("--epochs", tr.epochs, "Maximum epochs");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Score one or two checkpoints on a dataset split");
  eval_cmd->add_option("--checkpoint,-c", ev.checkpoints, "Checkpoint path (repeat for a comparison)")->required();
  eval_cmd->add_option("--data,-d", ev.data, "Dataset directory")->required();
  eval_cmd->add_option("--out,-o", ev.out_dir, "Directory for RMSE, prediction and comparison CSVs");
  eval_cmd->add_option("--split", ev.split, "train, val or test");

  PredictArgs pr;
  auto* predict_cmd = app.add_subcommand("predict", "Forecast the horizon after a point in a telemetry CSV");
  predict_cmd->add_option("--checkpoint,-c", pr.checkpoint, "Checkpoint path")->required();
  predict_cmd->add_option("--in,-i", pr.in, "Telemetry CSV")->required();
  predict_cmd->add_option("--out,-o", pr.out, "Output CSV (default stdout)");
  pr.at_opt = predict_cmd->add_option("--at", pr.at, "Last observed timestamp (default: last row)");

  MonitorArgs mon;
  auto* monitor_cmd = app.add_subcommand("monitor", "Run the early-warning loop over a CSV stream");
  monitor_cmd->add_option("--checkpoint,-c", mon.checkpoint, "Checkpoint path")->required();
  monitor_cmd->add_option("--in,-i", mon.in, "Telemetry CSV, or - for standard input");
  monitor_cmd->add_option("--alarm-file", mon.alarm_files, "Append alarm records to this file (repeatable)");
  monitor_cmd->add_flag("--stdout-alarms", mon.stdout_alarms, "Also write alarm records to standard output (the default without --alarm-file)");
  monitor_cmd->add_option("--replay-speed", mon.replay_speed,
                          "Stream seconds per wall second (0 = no pacing)");
  mon.pm25_opt = monitor_cmd->add_option("--pm25-limit", mon.pm25_limit, "PM2.5 mass limit, ug/m3 (inf disables)");
  mon.pm03_opt = monitor_cmd->add_option("--pm03-limit", mon.pm03_limit,
                                         "PM0.3 count limit per 0.1 L (inf disables)");
  mon.hyst_opt = monitor_cmd->add_option("--hysteresis", mon.hysteresis, "Clear after this many calm predictions");
  mon.cadence_opt = monitor_cmd->add_option("--cadence", mon.cadence, "Stream seconds between predictions");

  RetrainArgs rt;
  auto* retrain_cmd = app.add_subcommand("retrain", "Re-fit a checkpoint's architecture on new telemetry");
  retrain_cmd->add_option("--checkpoint,-c", rt.checkpoint, "Current checkpoint")->required();
  retrain_cmd->add_option("--in,-i", rt.in, "New telemetry CSV")->required();
  retrain_cmd->add_option("--out,-o", rt.out, "New checkpoint path")->required();
  retrain_cmd->add_option("--loss-csv", rt.loss_csv, "Loss-curve CSV path (default <out>.loss.csv)");
  retrain_cmd->add_option("--dataset-out", rt.dataset_dir, "Also save the prepared dataset here");

  // Global flags are accepted before or after the subcommand name and show
  // up in every subcommand's --help.
  for (auto* sub : app.get_subcommands({})) add_globals(*sub, g);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    // Subcommand --help surfaces as CallForHelp from the subcommand.
    err << "error: " << e.what() << '\n' << "run 'aed --help' for usage\n";
    return kUsage;
  }

  try {
    if (*gen_cmd) return cmd_gen(g, gen, out);
    if (*prep_cmd) return cmd_prep(g, prep, out);
    if (*train_cmd) return cmd_train(g, tr, out);
    if (*eval_cmd) return cmd_eval(g, ev, out);
    if (*predict_cmd) return cmd_predict(g, pr, out);
    if (*monitor_cmd) return cmd_monitor(g, mon, in, out, err);
    if (*retrain_cmd) return cmd_retrain(g, rt, out);
  } catch (const CLI::ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}

}  // namespace aed::cli
