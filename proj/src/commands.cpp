#include "maxcorr/commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>

#include "maxcorr/error.hpp"
#include "maxcorr/multigraph.hpp"

namespace maxcorr {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  return os;
}

Checkpoint read_checkpoint(const CommandOptions& opts, std::size_t index) {
  if (opts.checkpoints.size() <= index) throw ConfigError("missing --checkpoint");
  const fs::path& p = opts.checkpoints[index];
  if (!fs::exists(p)) throw ConfigError("checkpoint not found: " + p.string());
  return load_checkpoint(p);
}

/// Imputed dataset and state from a checkpoint, checked against the data.
struct Loaded {
  Checkpoint ckpt;
  Dataset data;
};

Loaded load_for_checkpoint(const RunConfig& cfg, Checkpoint ckpt) {
  Dataset raw = load_run_data(cfg);
  check_compatible(ckpt, raw);
  Dataset data = impute_means(raw, ckpt.state.split.train);
  return {std::move(ckpt), std::move(data)};
}

struct SplitScore {
  std::size_t n = 0;
  RocResult roc;
};

SplitScore train_fresh(const RunConfig& cfg, const Dataset& raw, std::size_t run_index,
                       bool on_train) {
  Split split = make_split(raw.labels, raw.num_classes(), cfg.eval.ratios, cfg.train.seed,
                           run_index);
  Dataset data = impute_means(raw, split.train);
  TrainState state =
      init_state(cfg.model, cfg.train, data.feature_dims(), data.num_classes(), split);
  pretrain(state, data);
  train(state, data);
  const auto& ids = on_train ? state.split.train : state.split.test;
  return {ids.size(), evaluate(state, data, ids).roc};
}

void write_report_row(std::ostream& os, const std::string& tag, const std::string& n,
                      double weighted, const std::vector<double>& per_class) {
  os << tag << ',' << n << ',' << fmt(weighted);
  for (double v : per_class) os << ',' << fmt(v);
  os << '\n';
}

}  // namespace

RunConfig effective_config(const CommandOptions& opts, bool synth) {
  RunConfig cfg = load_run_config(opts.config);
  if (opts.seed) {
    if (synth) {
      if (!cfg.data.synthetic) throw ConfigError("synth needs a data.synthetic section");
      cfg.data.synthetic->seed = *opts.seed;
    } else {
      cfg.train.seed = *opts.seed;
    }
  }
  return cfg;
}

Dataset load_run_data(const RunConfig& cfg) {
  if (cfg.data.synthetic) return generate_synthetic(*cfg.data.synthetic);
  return load_dataset(*cfg.data.path);
}

void check_compatible(const Checkpoint& ckpt, const Dataset& data) {
  const TrainState& s = ckpt.state;
  if (ckpt.patient_ids != data.patient_ids)
    throw DataError("checkpoint patient ids do not match the dataset");
  if (s.classes != data.num_classes())
    throw ShapeError("checkpoint has " + std::to_string(s.classes) + " classes, data has " +
                     std::to_string(data.num_classes()));
  if (s.feature_dims.size() != data.num_modalities())
    throw ShapeError("checkpoint has " + std::to_string(s.feature_dims.size()) +
                     " modalities, data has " + std::to_string(data.num_modalities()));
  for (std::size_t k = 0; k < s.feature_dims.size(); ++k) {
    if (s.feature_dims[k] == data.modalities[k].features()) continue;
    const std::string param = s.model.kind == ModelKind::EarlyFusion
                                  ? std::string("baseline.fc1.weight")
                                  : "proj." + std::to_string(k) + ".fc1.weight";
    const Matrix& w = s.params.at(param);
    throw ShapeError("modality '" + data.modalities[k].name + "' has " +
                     std::to_string(data.modalities[k].features()) + " features but " + param +
                     " is " + w.shape_str() + " (expects " + std::to_string(s.feature_dims[k]) +
                     ")");
  }
}

int cmd_synth(const CommandOptions& opts, std::ostream& out) {
  const RunConfig cfg = effective_config(opts, true);
  if (!cfg.data.synthetic) throw ConfigError("synth needs a data.synthetic section");
  const fs::path dir = opts.out ? *opts.out : cfg.output_dir;
  if (fs::exists(dir) && !fs::is_empty(dir) && !opts.force)
    throw ConfigError("output directory " + dir.string() + " is not empty (use --force)");
  const Dataset ds = generate_synthetic(*cfg.data.synthetic);
  save_dataset(ds, dir);
  std::vector<std::size_t> counts(ds.num_classes(), 0);
  for (std::size_t y : ds.labels) ++counts[y];
  out << "wrote " << ds.patients() << " patients, " << ds.num_modalities() << " modalities to "
      << dir.string() << "\n";
  for (std::size_t c = 0; c < counts.size(); ++c)
    out << "  " << ds.class_names[c] << ": " << counts[c] << "\n";
  return kExitOk;
}

int cmd_train(const CommandOptions& opts, std::ostream& out) {
  const RunConfig cfg = effective_config(opts, false);
  const fs::path dir = opts.out ? *opts.out : cfg.output_dir;
  const Dataset raw = load_run_data(cfg);
  Split split = make_split(raw.labels, raw.num_classes(), cfg.eval.ratios, cfg.train.seed,
                           cfg.eval.split_index);
  const Dataset data = impute_means(raw, split.train);
  TrainState state =
      init_state(cfg.model, cfg.train, data.feature_dims(), data.num_classes(), std::move(split));
  fs::create_directories(dir);
  std::vector<HistoryRow> history;
  try {
    pretrain(state, data);
    history = train(state, data, [&](const HistoryRow& row) {
      out << "epoch " << row.epoch << " loss " << fmt(row.train_loss) << " val_auc "
          << fmt(row.val_weighted_auc) << "\n";
    });
  } catch (const NonFiniteError& e) {
    std::ofstream diag = open_out(dir / "diagnostic.txt");
    diag << e.what() << "\n" << e.diagnostic() << "\n";
    throw;
  }
  Checkpoint ckpt{std::move(state), run_config_to_json(cfg), data.patient_ids};
  save_checkpoint(ckpt, dir / "checkpoint.json");
  std::ofstream hist = open_out(dir / "history.csv");
  write_history(hist, history);
  out << "saved " << (dir / "checkpoint.json").string() << "\n";
  return kExitOk;
}

int cmd_eval(const CommandOptions& opts, std::ostream& out) {
  const RunConfig cfg = effective_config(opts, false);
  Loaded ld = load_for_checkpoint(cfg, read_checkpoint(opts, 0));
  const TrainState& state = ld.ckpt.state;
  const auto& ids = opts.on_train ? state.split.train : state.split.test;
  std::vector<SplitScore> scores;
  scores.push_back({ids.size(), evaluate(state, ld.data, ids).roc});
  if (cfg.eval.n_splits > 1) {
    // Further splits are trained from the checkpoint's own configuration.
    RunConfig echo = parse_run_config(ld.ckpt.config_echo);
    const Dataset raw = load_run_data(cfg);
    for (std::size_t s = 1; s < cfg.eval.n_splits; ++s)
      scores.push_back(train_fresh(echo, raw, echo.eval.split_index + s, opts.on_train));
  }

  const fs::path report = opts.out ? *opts.out : cfg.eval.report;
  std::ofstream os = open_out(report);
  os << "split,n,weighted_auc";
  for (const auto& name : ld.data.class_names) os << ",auc_" << name;
  os << '\n';
  const std::size_t classes = ld.data.num_classes();
  for (std::size_t s = 0; s < scores.size(); ++s)
    write_report_row(os, std::to_string(s), std::to_string(scores[s].n),
                     scores[s].roc.weighted_auc, scores[s].roc.per_class_auc);
  if (scores.size() > 1) {
    auto summarize = [&](auto get) {
      double sum = 0.0, sq = 0.0;
      std::size_t n = 0;
      for (const auto& sc : scores) {
        const double v = get(sc);
        if (std::isnan(v)) continue;
        sum += v;
        sq += v * v;
        ++n;
      }
      if (n == 0) return std::pair{std::nan(""), std::nan("")};
      const double mean = sum / static_cast<double>(n);
      const double var =
          n > 1 ? std::max(0.0, (sq - static_cast<double>(n) * mean * mean) / (n - 1.0)) : 0.0;
      return std::pair{mean, std::sqrt(var / static_cast<double>(n))};
    };
    std::vector<double> mean_c(classes), se_c(classes);
    for (std::size_t c = 0; c < classes; ++c)
      std::tie(mean_c[c], se_c[c]) =
          summarize([c](const SplitScore& s) { return s.roc.per_class_auc[c]; });
    const auto [mw, sw] = summarize([](const SplitScore& s) { return s.roc.weighted_auc; });
    write_report_row(os, "mean", "", mw, mean_c);
    write_report_row(os, "stderr", "", sw, se_c);
  }
  out << (opts.on_train ? "train" : "test") << " weighted AUROC " << fmt(scores[0].roc.weighted_auc)
      << "\n";
  for (std::size_t c = 0; c < classes; ++c)
    if (!scores[0].roc.defined[c])
      out << "  class '" << ld.data.class_names[c] << "' undefined (single-class subset)\n";
  out << "report written to " << report.string() << "\n";
  return kExitOk;
}

int cmd_compare(const CommandOptions& opts, std::ostream& out) {
  if (opts.checkpoints.size() != 2) throw ConfigError("compare needs exactly two --checkpoint");
  const RunConfig cfg = effective_config(opts, false);
  Loaded a = load_for_checkpoint(cfg, read_checkpoint(opts, 0));
  Checkpoint ckpt_b = read_checkpoint(opts, 1);
  if (!(ckpt_b.state.split == a.ckpt.state.split))
    throw DataError("checkpoints were trained on different splits");
  Loaded b = load_for_checkpoint(cfg, std::move(ckpt_b));
  const auto& ids = a.ckpt.state.split.test;
  const Matrix sa = evaluate(a.ckpt.state, a.data, ids).scores;
  const Matrix sb = evaluate(b.ckpt.state, b.data, ids).scores;

  const fs::path report = opts.out ? *opts.out : cfg.eval.report;
  std::ofstream os = open_out(report);
  os << "class,auc_a,auc_b,auc_diff,variance,z,p_value,significant\n";
  const std::size_t classes = a.data.num_classes();
  for (std::size_t c = 0; c < classes; ++c) {
    std::vector<double> ca(ids.size()), cb(ids.size());
    std::vector<int> y(ids.size());
    std::size_t pos = 0;
    for (std::size_t r = 0; r < ids.size(); ++r) {
      ca[r] = sa(r, c);
      cb[r] = sb(r, c);
      y[r] = a.data.labels[ids[r]] == c ? 1 : 0;
      pos += static_cast<std::size_t>(y[r]);
    }
    const std::string& name = a.data.class_names[c];
    if (pos < 2 || ids.size() - pos < 2) {
      os << name << ",nan,nan,nan,nan,nan,nan,undefined\n";
      out << name << ": undefined (too few positives or negatives)\n";
      continue;
    }
    const DeLongResult d = delong_test(ca, cb, y);
    const bool sig = d.p_value < kSignificanceLevel;
    char line[256];
    std::snprintf(line, sizeof line, "%.6f,%.6f,%.6f,%.6g,%.6g,%.6g,%s", d.auc_a, d.auc_b,
                  d.auc_diff, d.variance, d.z_stat, d.p_value, sig ? "yes" : "no");
    os << name << ',' << line << '\n';
    out << name << ": auc " << fmt(d.auc_a) << " vs " << fmt(d.auc_b) << ", p " << d.p_value
        << (sig ? " (significant)" : "") << "\n";
  }
  out << "report written to " << report.string() << "\n";
  return kExitOk;
}

int cmd_export_graph(const CommandOptions& opts, std::ostream& out) {
  const RunConfig cfg = effective_config(opts, false);
  Loaded ld = load_for_checkpoint(cfg, read_checkpoint(opts, 0));
  const TrainState& state = ld.ckpt.state;
  if (state.model.kind != ModelKind::MaxCorrMgnn)
    throw ConfigError("export-graph needs a maxcorr_mgnn checkpoint");
  if (state.modalities() < 2) throw ConfigError("export-graph needs at least two modalities");

  ad::Tape tape(false);
  ParamBinder binder(tape, state.params);
  const auto inputs = gather_rows(ld.data, state.split.train);
  const ProjectedBatch pb = project(state.projection_bank(), binder, inputs, &state.train_means);
  const ad::Var s_tilde = soft_thresholds(binder);
  const MultiGraph mg = build_multigraph(pb, s_tilde, opts.threshold_offset);
  std::vector<std::string> ids;
  for (std::size_t r : state.split.train) ids.push_back(ld.data.patient_ids[r]);

  const fs::path edges = opts.out ? *opts.out : cfg.output_dir / "graph_edges.csv";
  std::ofstream os = open_out(edges);
  const std::size_t count = write_edge_list(os, mg, ids);
  fs::path thr = edges;
  thr.replace_extension(".thresholds.csv");
  std::ofstream ts = open_out(thr);
  write_thresholds(ts, s_tilde.value());
  out << "wrote " << count << " edges over " << ids.size() << " training patients to "
      << edges.string() << "\n";
  return kExitOk;
}

int run_command(const std::string& name, const CommandOptions& opts, std::ostream& out,
                std::ostream& err) {
  try {
    if (name == "synth") return cmd_synth(opts, out);
    if (name == "train") return cmd_train(opts, out);
    if (name == "eval") return cmd_eval(opts, out);
    if (name == "compare") return cmd_compare(opts, out);
    if (name == "export-graph") return cmd_export_graph(opts, out);
    err << "error: unknown command '" << name << "'\n";
    return kExitInvalid;
  } catch (const NonFiniteError& e) {
    err << "error: " << e.what() << "\n";
    return kExitAbort;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const ShapeError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitAbort;
  }
}

}  // namespace maxcorr
