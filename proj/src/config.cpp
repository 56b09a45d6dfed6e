#include "maxcorr/config.hpp"

#include <fstream>
#include <set>

#include "maxcorr/error.hpp"

namespace maxcorr {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::string& section, std::set<std::string> allowed) {
  if (!j.is_object()) throw ConfigError("config: '" + section + "' must be an object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) throw ConfigError("config: unknown key '" + section + "." + key + "'");
}

template <class T>
void read(const json& j, const char* key, const std::string& section, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: '" + section + "." + key + "' has the wrong type");
  }
}

template <class T>
void read_count(const json& j, const char* key, const std::string& section, T& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw ConfigError("config: '" + section + "." + key + "' must be a non-negative integer");
  out = v.get<T>();
}

SyntheticSpec parse_synthetic(const json& j) {
  reject_unknown(j, "data.synthetic",
                 {"patients", "feature_dims", "n_classes", "latent_dim", "noise_sigma",
                  "missing_rate", "class_separation", "seed"});
  SyntheticSpec s;
  read_count(j, "patients", "data.synthetic", s.patients);
  read(j, "feature_dims", "data.synthetic", s.feature_dims);
  read_count(j, "n_classes", "data.synthetic", s.n_classes);
  read_count(j, "latent_dim", "data.synthetic", s.latent_dim);
  read(j, "noise_sigma", "data.synthetic", s.noise_sigma);
  read(j, "missing_rate", "data.synthetic", s.missing_rate);
  read(j, "class_separation", "data.synthetic", s.class_separation);
  read_count(j, "seed", "data.synthetic", s.seed);
  return s;
}

}  // namespace

void RunConfig::validate() const {
  if (data.path.has_value() == data.synthetic.has_value())
    throw ConfigError("config: data needs exactly one of 'path' or 'synthetic'");
  if (data.synthetic) data.synthetic->validate();
  model.validate();
  train.validate();
  eval.ratios.validate();
  if (eval.n_splits == 0) throw ConfigError("config: eval.n_splits must be positive");
}

RunConfig parse_run_config(const json& j) {
  reject_unknown(j, "<root>", {"data", "model", "train", "eval", "output"});
  RunConfig c;
  if (!j.contains("data")) throw ConfigError("config: missing 'data' section");
  const json& d = j.at("data");
  reject_unknown(d, "data", {"path", "synthetic"});
  if (d.contains("path")) {
    std::string p;
    read(d, "path", "data", p);
    c.data.path = p;
  }
  if (d.contains("synthetic")) c.data.synthetic = parse_synthetic(d.at("synthetic"));

  if (j.contains("model")) {
    const json& m = j.at("model");
    reject_unknown(m, "model",
                   {"kind", "projection_dim", "hidden_width", "mgnn_width", "mgnn_depth",
                    "baseline_hidden", "leaky_slope"});
    if (m.contains("kind")) {
      std::string kind;
      read(m, "kind", "model", kind);
      c.model.kind = parse_model_kind(kind);
    }
    read_count(m, "projection_dim", "model", c.model.projection_dim);
    read_count(m, "hidden_width", "model", c.model.hidden_width);
    read_count(m, "mgnn_width", "model", c.model.mgnn_width);
    read_count(m, "mgnn_depth", "model", c.model.mgnn_depth);
    read(m, "baseline_hidden", "model", c.model.baseline_hidden);
    read(m, "leaky_slope", "model", c.model.leaky_slope);
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    reject_unknown(t, "train",
                   {"lambda", "lr", "weight_decay", "epochs", "pretrain_epochs", "batch_size", "seed"});
    read(t, "lambda", "train", c.train.lambda);
    read(t, "lr", "train", c.train.lr);
    read(t, "weight_decay", "train", c.train.weight_decay);
    read_count(t, "epochs", "train", c.train.epochs);
    read_count(t, "pretrain_epochs", "train", c.train.pretrain_epochs);
    read_count(t, "batch_size", "train", c.train.batch_size);
    read_count(t, "seed", "train", c.train.seed);
  }
  if (j.contains("eval")) {
    const json& e = j.at("eval");
    reject_unknown(e, "eval", {"n_splits", "split_ratios", "split_index", "report"});
    read_count(e, "n_splits", "eval", c.eval.n_splits);
    read_count(e, "split_index", "eval", c.eval.split_index);
    if (e.contains("split_ratios")) {
      std::vector<double> r;
      read(e, "split_ratios", "eval", r);
      if (r.size() != 3) throw ConfigError("config: eval.split_ratios needs [train, val, test]");
      c.eval.ratios = {r[0], r[1], r[2]};
    }
    if (e.contains("report")) {
      std::string p;
      read(e, "report", "eval", p);
      c.eval.report = p;
    }
  }
  if (j.contains("output")) {
    const json& o = j.at("output");
    reject_unknown(o, "output", {"dir"});
    std::string p = c.output_dir.string();
    read(o, "dir", "output", p);
    c.output_dir = p;
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return parse_run_config(j);
}

json run_config_to_json(const RunConfig& c) {
  json j;
  json d = json::object();
  if (c.data.path) d["path"] = c.data.path->string();
  if (c.data.synthetic) {
    const SyntheticSpec& s = *c.data.synthetic;
    d["synthetic"] = {{"patients", s.patients},         {"feature_dims", s.feature_dims},
                      {"n_classes", s.n_classes},       {"latent_dim", s.latent_dim},
                      {"noise_sigma", s.noise_sigma},   {"missing_rate", s.missing_rate},
                      {"class_separation", s.class_separation}, {"seed", s.seed}};
  }
  j["data"] = d;
  j["model"] = {{"kind", to_string(c.model.kind)},
                {"projection_dim", c.model.projection_dim},
                {"hidden_width", c.model.hidden_width},
                {"mgnn_width", c.model.mgnn_width},
                {"mgnn_depth", c.model.mgnn_depth},
                {"baseline_hidden", c.model.baseline_hidden},
                {"leaky_slope", c.model.leaky_slope}};
  j["train"] = {{"lambda", c.train.lambda},
                {"lr", c.train.lr},
                {"weight_decay", c.train.weight_decay},
                {"epochs", c.train.epochs},
                {"pretrain_epochs", c.train.pretrain_epochs},
                {"batch_size", c.train.batch_size},
                {"seed", c.train.seed}};
  j["eval"] = {{"n_splits", c.eval.n_splits},
               {"split_ratios", {c.eval.ratios.train, c.eval.ratios.val, c.eval.ratios.test}},
               {"split_index", c.eval.split_index},
               {"report", c.eval.report.string()}};
  j["output"] = {{"dir", c.output_dir.string()}};
  return j;
}

}  // namespace maxcorr
