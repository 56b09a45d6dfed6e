#include "maxcorr/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "maxcorr/error.hpp"

namespace maxcorr {

using nlohmann::json;

namespace {

json matrix_json(const Matrix& m) {
  return json{{"rows", m.rows()}, {"cols", m.cols()},
              {"data", std::vector<double>(m.flat().begin(), m.flat().end())}};
}

Matrix matrix_from(const json& j, const std::string& what) {
  const auto rows = j.at("rows").get<std::size_t>();
  const auto cols = j.at("cols").get<std::size_t>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (data.size() != rows * cols)
    throw DataError("checkpoint: matrix '" + what + "' has " + std::to_string(data.size()) +
                    " values for shape " + shape_str(rows, cols));
  Matrix m(rows, cols);
  std::copy(data.begin(), data.end(), m.data());
  return m;
}

}  // namespace

json checkpoint_to_json(const Checkpoint& ckpt) {
  const TrainState& st = ckpt.state;
  json j;
  j["format"] = "maxcorr-checkpoint";
  j["version"] = kCheckpointVersion;
  j["config"] = ckpt.config_echo;
  j["model"] = {{"kind", to_string(st.model.kind)},
                {"projection_dim", st.model.projection_dim},
                {"hidden_width", st.model.hidden_width},
                {"mgnn_width", st.model.mgnn_width},
                {"mgnn_depth", st.model.mgnn_depth},
                {"baseline_hidden", st.model.baseline_hidden},
                {"leaky_slope", st.model.leaky_slope}};
  j["train"] = {{"lambda", st.train.lambda},
                {"lr", st.train.lr},
                {"weight_decay", st.train.weight_decay},
                {"epochs", st.train.epochs},
                {"pretrain_epochs", st.train.pretrain_epochs},
                {"batch_size", st.train.batch_size},
                {"seed", st.train.seed}};
  j["feature_dims"] = st.feature_dims;
  j["classes"] = st.classes;
  j["patient_ids"] = ckpt.patient_ids;
  j["split"] = {{"train", st.split.train}, {"val", st.split.val}, {"test", st.split.test}};
  json params = json::array();
  for (const auto& e : st.params.entries()) {
    json p = matrix_json(e.value);
    p["name"] = e.name;
    params.push_back(std::move(p));
  }
  j["parameters"] = std::move(params);
  json bn = json::array();
  for (const auto& s : st.bn)
    bn.push_back({{"running_mean", matrix_json(s.running_mean)},
                  {"running_var", matrix_json(s.running_var)},
                  {"momentum", s.momentum},
                  {"eps", s.eps}});
  j["batch_norm"] = std::move(bn);
  json means = json::array();
  for (const auto& m : st.train_means) means.push_back(matrix_json(m));
  j["train_means"] = std::move(means);
  json opt = json::object();
  for (const auto& [name, mo] : st.optimizer.moments())
    opt[name] = {{"m", matrix_json(mo.m)}, {"v", matrix_json(mo.v)}, {"step", mo.step}};
  const AdamWConfig& oc = st.optimizer.config();
  j["optimizer"] = {{"lr", oc.lr},       {"weight_decay", oc.weight_decay}, {"beta1", oc.beta1},
                    {"beta2", oc.beta2}, {"eps", oc.eps},                   {"moments", opt}};
  j["epoch"] = st.epoch;
  std::ostringstream rng;
  rng << st.rng;
  j["rng"] = rng.str();
  return j;
}

Checkpoint checkpoint_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != "maxcorr-checkpoint")
      throw DataError("checkpoint: unrecognized format tag");
    if (j.at("version").get<int>() != kCheckpointVersion)
      throw DataError("checkpoint: unsupported version " + j.at("version").dump());
    Checkpoint ck;
    TrainState& st = ck.state;
    ck.config_echo = j.at("config");
    const json& m = j.at("model");
    st.model.kind = parse_model_kind(m.at("kind").get<std::string>());
    st.model.projection_dim = m.at("projection_dim").get<std::size_t>();
    st.model.hidden_width = m.at("hidden_width").get<std::size_t>();
    st.model.mgnn_width = m.at("mgnn_width").get<std::size_t>();
    st.model.mgnn_depth = m.at("mgnn_depth").get<std::size_t>();
    st.model.baseline_hidden = m.at("baseline_hidden").get<std::vector<std::size_t>>();
    st.model.leaky_slope = m.at("leaky_slope").get<double>();
    const json& t = j.at("train");
    st.train.lambda = t.at("lambda").get<double>();
    st.train.lr = t.at("lr").get<double>();
    st.train.weight_decay = t.at("weight_decay").get<double>();
    st.train.epochs = t.at("epochs").get<std::size_t>();
    st.train.pretrain_epochs = t.at("pretrain_epochs").get<std::size_t>();
    st.train.batch_size = t.at("batch_size").get<std::size_t>();
    st.train.seed = t.at("seed").get<std::uint64_t>();
    st.feature_dims = j.at("feature_dims").get<std::vector<std::size_t>>();
    st.classes = j.at("classes").get<std::size_t>();
    ck.patient_ids = j.at("patient_ids").get<std::vector<std::string>>();
    const json& sp = j.at("split");
    st.split.train = sp.at("train").get<std::vector<std::size_t>>();
    st.split.val = sp.at("val").get<std::vector<std::size_t>>();
    st.split.test = sp.at("test").get<std::vector<std::size_t>>();
    for (const json& p : j.at("parameters")) {
      const auto name = p.at("name").get<std::string>();
      st.params.add(name, matrix_from(p, name));
    }
    for (const json& b : j.at("batch_norm")) {
      ad::BatchNormStats s;
      s.running_mean = matrix_from(b.at("running_mean"), "running_mean");
      s.running_var = matrix_from(b.at("running_var"), "running_var");
      s.momentum = b.at("momentum").get<double>();
      s.eps = b.at("eps").get<double>();
      st.bn.push_back(std::move(s));
    }
    for (const json& mm : j.at("train_means")) st.train_means.push_back(matrix_from(mm, "train_means"));
    const json& o = j.at("optimizer");
    st.optimizer = AdamW({o.at("lr").get<double>(), o.at("weight_decay").get<double>(),
                          o.at("beta1").get<double>(), o.at("beta2").get<double>(),
                          o.at("eps").get<double>()});
    for (const auto& [name, mo] : o.at("moments").items()) {
      AdamW::Moments x;
      x.m = matrix_from(mo.at("m"), name + ".m");
      x.v = matrix_from(mo.at("v"), name + ".v");
      x.step = mo.at("step").get<std::uint64_t>();
      st.optimizer.moments().emplace(name, std::move(x));
    }
    st.epoch = j.at("epoch").get<std::size_t>();
    std::istringstream rng(j.at("rng").get<std::string>());
    rng >> st.rng;
    if (!rng) throw DataError("checkpoint: malformed rng state");

    const auto expected = expected_parameter_names(st);
    if (expected != st.params.names())
      throw DataError("checkpoint: parameter set does not match the model configuration");
    return ck;
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out << checkpoint_to_json(ckpt).dump(1) << '\n';
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("checkpoint " + path.string() + ": " + e.what());
  }
  return checkpoint_from_json(j);
}

void write_history(std::ostream& os, const std::vector<HistoryRow>& history) {
  os << "epoch,train_loss,train_ce,train_shgr,val_weighted_auc\n";
  char buf[160];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g\n", r.epoch, r.train_loss,
                  r.train_ce, r.train_shgr, r.val_weighted_auc);
    os << buf;
  }
}

}  // namespace maxcorr
