#include "gatednet/config.hpp"

#include <array>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "gatednet/error.hpp"

namespace gatednet {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& section) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) {
      throw ConfigError("unknown key '" + section + "." + it.key() + "'");
    }
  }
}

template <typename T>
T get_field(const json& obj, const std::string& key, const std::string& section, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("bad value for '" + section + "." + key + "'");
  }
}

json schedule_to_json(const ScheduleConfig& s) {
  json phases = json::array();
  for (const auto& ph : s.phases) {
    phases.push_back({{"until", ph.until_epoch}, {"theta", ph.theta}, {"keep", ph.keep_target}});
  }
  return {
      {"warmup_epochs", s.warmup_epochs},
      {"lambda_max", s.lambda_max},
      {"tau_start", s.tau_start},
      {"tau_end", s.tau_end},
      {"tau_anneal", s.tau_anneal == AnnealKind::kLinear ? "linear" : "cosine"},
      {"phases", phases},
      {"r_min", s.r_min},
      {"topk_floor", s.topk_floor ? json(*s.topk_floor) : json(nullptr)},
  };
}

void parse_schedule(const json& obj, ScheduleConfig& s) {
  reject_unknown_keys(obj,
                      {"warmup_epochs", "lambda_max", "tau_start", "tau_end", "tau_anneal",
                       "phases", "r_min", "topk_floor"},
                      "schedule");
  s.warmup_epochs = get_field<std::size_t>(obj, "warmup_epochs", "schedule", s.warmup_epochs);
  s.lambda_max = get_field<double>(obj, "lambda_max", "schedule", s.lambda_max);
  s.tau_start = get_field<double>(obj, "tau_start", "schedule", s.tau_start);
  s.tau_end = get_field<double>(obj, "tau_end", "schedule", s.tau_end);
  if (obj.contains("tau_anneal")) {
    const auto kind = obj.at("tau_anneal").get<std::string>();
    if (kind == "linear") {
      s.tau_anneal = AnnealKind::kLinear;
    } else if (kind == "cosine") {
      s.tau_anneal = AnnealKind::kCosine;
    } else {
      throw ConfigError("schedule.tau_anneal must be 'linear' or 'cosine'");
    }
  }
  if (obj.contains("phases")) {
    const json& phases = obj.at("phases");
    if (!phases.is_array() || phases.empty()) {
      throw ConfigError("schedule.phases must be a non-empty array");
    }
    s.phases.clear();
    for (const auto& ph : phases) {
      reject_unknown_keys(ph, {"until", "theta", "keep"}, "schedule.phases[]");
      PhaseSpec spec;
      spec.until_epoch = get_field<std::size_t>(ph, "until", "schedule.phases[]", 0);
      spec.theta = get_field<double>(ph, "theta", "schedule.phases[]", 0.5);
      spec.keep_target = get_field<double>(ph, "keep", "schedule.phases[]", 1.0);
      s.phases.push_back(spec);
    }
  }
  s.r_min = get_field<double>(obj, "r_min", "schedule", s.r_min);
  if (obj.contains("topk_floor") && !obj.at("topk_floor").is_null()) {
    s.topk_floor = get_field<std::size_t>(obj, "topk_floor", "schedule", 0);
  }
}

}  // namespace

RunConfig default_run_config() {
  RunConfig cfg;
  cfg.train.schedule = ScheduleConfig::defaults(cfg.train.epochs);
  return cfg;
}

RunConfig parse_run_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config root must be an object");
  reject_unknown_keys(root,
                      {"model", "variant", "optimizer", "train", "schedule", "rigl",
                       "dropout", "prune", "data", "output"},
                      "config");

  RunConfig cfg = default_run_config();
  TrainConfig& t = cfg.train;

  if (root.contains("variant")) {
    const auto name = root.at("variant").get<std::string>();
    const auto v = variant_from_name(name);
    if (!v) throw ConfigError("unknown variant '" + name + "'");
    t.variant = *v;
  }

  if (root.contains("train")) {
    const json& obj = root.at("train");
    reject_unknown_keys(
        obj, {"epochs", "batch_size", "seed", "abort_on_collapse", "collapse_patience"},
        "train");
    t.epochs = get_field<std::size_t>(obj, "epochs", "train", t.epochs);
    t.batch_size = get_field<std::size_t>(obj, "batch_size", "train", t.batch_size);
    t.seed = get_field<std::uint64_t>(obj, "seed", "train", t.seed);
    t.abort_on_collapse = get_field<bool>(obj, "abort_on_collapse", "train", t.abort_on_collapse);
    t.collapse_patience =
        get_field<std::size_t>(obj, "collapse_patience", "train", t.collapse_patience);
  }

  // The schedule defaults depend on the (possibly overridden) epoch count.
  t.schedule = ScheduleConfig::defaults(t.epochs);

  if (root.contains("model")) {
    const json& obj = root.at("model");
    reject_unknown_keys(obj, {"dims", "gate"}, "model");
    if (obj.contains("dims")) {
      t.dims = obj.at("dims").get<std::vector<std::size_t>>();
    }
    if (obj.contains("gate")) {
      const json& g = obj.at("gate");
      reject_unknown_keys(g, {"mode", "gated_vectors", "p0", "topk_k", "costs"}, "model.gate");
      if (g.contains("mode")) {
        const auto mode = g.at("mode").get<std::string>();
        if (mode == "static") {
          t.gate.mode = GateMode::kStatic;
        } else if (mode == "dynamic") {
          t.gate.mode = GateMode::kDynamic;
        } else {
          throw ConfigError("model.gate.mode must be 'static' or 'dynamic'");
        }
      }
      if (g.contains("gated_vectors")) {
        t.gate.gated_vectors = g.at("gated_vectors").get<std::vector<std::size_t>>();
      }
      t.gate.p0 = get_field<double>(g, "p0", "model.gate", t.gate.p0);
      if (g.contains("topk_k") && !g.at("topk_k").is_null()) {
        t.gate.topk_k = get_field<std::size_t>(g, "topk_k", "model.gate", 0);
      }
      if (g.contains("costs") && !g.at("costs").is_null()) {
        t.gate_costs = g.at("costs").get<std::vector<std::vector<double>>>();
      }
    }
  }

  if (root.contains("optimizer")) {
    const json& obj = root.at("optimizer");
    reject_unknown_keys(obj, {"lr", "weight_decay", "beta1", "beta2", "eps"}, "optimizer");
    t.optimizer.lr = get_field<double>(obj, "lr", "optimizer", t.optimizer.lr);
    t.optimizer.weight_decay =
        get_field<double>(obj, "weight_decay", "optimizer", t.optimizer.weight_decay);
    t.optimizer.beta1 = get_field<double>(obj, "beta1", "optimizer", t.optimizer.beta1);
    t.optimizer.beta2 = get_field<double>(obj, "beta2", "optimizer", t.optimizer.beta2);
    t.optimizer.eps = get_field<double>(obj, "eps", "optimizer", t.optimizer.eps);
  }

  if (root.contains("schedule")) {
    parse_schedule(root.at("schedule"), t.schedule);
    cfg.schedule_explicit = true;
  }

  if (root.contains("rigl")) {
    const json& obj = root.at("rigl");
    reject_unknown_keys(
        obj, {"sparsity", "update_period", "rewire_fraction", "cosine_decay", "mask_output_layer"},
        "rigl");
    t.rigl.sparsity = get_field<double>(obj, "sparsity", "rigl", t.rigl.sparsity);
    t.rigl.update_period =
        get_field<std::size_t>(obj, "update_period", "rigl", t.rigl.update_period);
    t.rigl.rewire_fraction =
        get_field<double>(obj, "rewire_fraction", "rigl", t.rigl.rewire_fraction);
    t.rigl.cosine_decay = get_field<bool>(obj, "cosine_decay", "rigl", t.rigl.cosine_decay);
    t.rigl.mask_output_layer =
        get_field<bool>(obj, "mask_output_layer", "rigl", t.rigl.mask_output_layer);
  }

  if (root.contains("dropout")) {
    const json& obj = root.at("dropout");
    reject_unknown_keys(obj, {"rate"}, "dropout");
    t.dropout_rate = get_field<double>(obj, "rate", "dropout", t.dropout_rate);
  }

  if (root.contains("prune")) {
    const json& obj = root.at("prune");
    reject_unknown_keys(obj, {"fraction", "finetune_epochs"}, "prune");
    t.prune_fraction = get_field<double>(obj, "fraction", "prune", t.prune_fraction);
    t.prune_finetune_epochs =
        get_field<std::size_t>(obj, "finetune_epochs", "prune", t.prune_finetune_epochs);
  }

  if (root.contains("data")) {
    const json& obj = root.at("data");
    reject_unknown_keys(obj, {"dataset", "dir", "standardize", "blobs"}, "data");
    if (obj.contains("dataset")) {
      const auto kind = obj.at("dataset").get<std::string>();
      if (kind == "mnist") {
        cfg.data.kind = DataSpec::Kind::kMnist;
      } else if (kind == "blobs") {
        cfg.data.kind = DataSpec::Kind::kBlobs;
      } else {
        throw ConfigError("data.dataset must be 'mnist' or 'blobs'");
      }
    }
    cfg.data.dir = get_field<std::string>(obj, "dir", "data", cfg.data.dir);
    cfg.data.standardize = get_field<bool>(obj, "standardize", "data", cfg.data.standardize);
    if (obj.contains("blobs")) {
      const json& b = obj.at("blobs");
      reject_unknown_keys(
          b, {"train_per_class", "test_per_class", "classes", "dims", "spread", "seed"},
          "data.blobs");
      cfg.data.blobs_train_per_class = get_field<std::size_t>(b, "train_per_class", "data.blobs",
                                                              cfg.data.blobs_train_per_class);
      cfg.data.blobs_test_per_class = get_field<std::size_t>(b, "test_per_class", "data.blobs",
                                                             cfg.data.blobs_test_per_class);
      cfg.data.blobs_classes = get_field<int>(b, "classes", "data.blobs", cfg.data.blobs_classes);
      cfg.data.blobs_dims = get_field<std::size_t>(b, "dims", "data.blobs", cfg.data.blobs_dims);
      cfg.data.blobs_spread =
          get_field<double>(b, "spread", "data.blobs", cfg.data.blobs_spread);
      cfg.data.blobs_seed =
          get_field<std::uint64_t>(b, "seed", "data.blobs", cfg.data.blobs_seed);
    }
  }

  if (root.contains("output")) {
    const json& obj = root.at("output");
    reject_unknown_keys(obj, {"dir"}, "output");
    cfg.out_dir = get_field<std::string>(obj, "dir", "output", cfg.out_dir);
  }

  cfg.train.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_run_config(text);
}

std::string serialize_run_config(const RunConfig& cfg) {
  const TrainConfig& t = cfg.train;
  json root;
  root["variant"] = variant_name(t.variant);
  root["model"] = {
      {"dims", t.dims},
      {"gate",
       {{"mode", t.gate.mode == GateMode::kStatic ? "static" : "dynamic"},
        {"gated_vectors", t.gate.gated_vectors},
        {"p0", t.gate.p0},
        {"topk_k", t.gate.topk_k ? json(*t.gate.topk_k) : json(nullptr)},
        {"costs", t.gate_costs ? json(*t.gate_costs) : json(nullptr)}}},
  };
  root["optimizer"] = {{"lr", t.optimizer.lr},
                       {"weight_decay", t.optimizer.weight_decay},
                       {"beta1", t.optimizer.beta1},
                       {"beta2", t.optimizer.beta2},
                       {"eps", t.optimizer.eps}};
  root["train"] = {{"epochs", t.epochs},
                   {"batch_size", t.batch_size},
                   {"seed", t.seed},
                   {"abort_on_collapse", t.abort_on_collapse},
                   {"collapse_patience", t.collapse_patience}};
  root["schedule"] = schedule_to_json(t.schedule);
  root["rigl"] = {{"sparsity", t.rigl.sparsity},
                  {"update_period", t.rigl.update_period},
                  {"rewire_fraction", t.rigl.rewire_fraction},
                  {"cosine_decay", t.rigl.cosine_decay},
                  {"mask_output_layer", t.rigl.mask_output_layer}};
  root["dropout"] = {{"rate", t.dropout_rate}};
  root["prune"] = {{"fraction", t.prune_fraction}, {"finetune_epochs", t.prune_finetune_epochs}};
  root["data"] = {
      {"dataset", cfg.data.kind == DataSpec::Kind::kMnist ? "mnist" : "blobs"},
      {"dir", cfg.data.dir},
      {"standardize", cfg.data.standardize},
      {"blobs",
       {{"train_per_class", cfg.data.blobs_train_per_class},
        {"test_per_class", cfg.data.blobs_test_per_class},
        {"classes", cfg.data.blobs_classes},
        {"dims", cfg.data.blobs_dims},
        {"spread", cfg.data.blobs_spread},
        {"seed", cfg.data.blobs_seed}}},
  };
  root["output"] = {{"dir", cfg.out_dir}};
  return root.dump(2) + "\n";
}

namespace {

std::string find_idx_file(const std::string& dir, const std::string& stem) {
  namespace fs = std::filesystem;
  const fs::path plain = fs::path(dir) / stem;
  if (fs::exists(plain)) return plain.string();
  const fs::path gz = fs::path(dir) / (stem + ".gz");
  if (fs::exists(gz)) return gz.string();
  return {};
}

std::string resolve_data_dir(const DataSpec& spec) {
  if (!spec.dir.empty()) return spec.dir;
  if (const char* env = std::getenv("GATEDNET_DATA_DIR")) return env;
  return ".";
}

}  // namespace

bool mnist_available(const std::string& dir) {
  return !find_idx_file(dir, "train-images-idx3-ubyte").empty() &&
         !find_idx_file(dir, "train-labels-idx1-ubyte").empty() &&
         !find_idx_file(dir, "t10k-images-idx3-ubyte").empty() &&
         !find_idx_file(dir, "t10k-labels-idx1-ubyte").empty();
}

std::pair<Dataset, Dataset> load_data(const DataSpec& spec) {
  if (spec.kind == DataSpec::Kind::kMnist) {
    const std::string dir = resolve_data_dir(spec);
    const std::array<const char*, 4> stems = {
        "train-images-idx3-ubyte", "train-labels-idx1-ubyte", "t10k-images-idx3-ubyte",
        "t10k-labels-idx1-ubyte"};
    std::array<std::string, 4> paths;
    for (std::size_t i = 0; i < stems.size(); ++i) {
      paths[i] = find_idx_file(dir, stems[i]);
      if (paths[i].empty()) {
        throw ConfigError("data: missing MNIST file " +
                          (std::filesystem::path(dir) / stems[i]).string() + "[.gz]");
      }
    }
    Dataset train = load_idx(paths[0], paths[1]);
    Dataset test = load_idx(paths[2], paths[3]);
    train.name = "mnist-train";
    test.name = "mnist-test";
    if (spec.standardize) standardize(train, test);
    return {std::move(train), std::move(test)};
  }

  Rng rng(spec.blobs_seed);
  Dataset all = synth_blobs(spec.blobs_train_per_class + spec.blobs_test_per_class,
                            spec.blobs_classes, spec.blobs_dims, spec.blobs_spread, rng);
  auto [train, test] = split_per_class(all, spec.blobs_train_per_class);
  if (spec.standardize) standardize(train, test);
  return {std::move(train), std::move(test)};
}

}  // namespace gatednet
