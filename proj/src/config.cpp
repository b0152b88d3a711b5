#include "colactc/config.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <vector>

namespace colactc {

namespace {

template <typename T>
T get_as(const nlohmann::json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw std::invalid_argument("config key \"" + key + "\" has the wrong type");
  }
}

struct KeySpec {
  std::function<void(RunConfig&, const nlohmann::json&, const std::string&)> set;
  std::function<nlohmann::json(const RunConfig&)> get;
};

const std::vector<std::pair<std::string, KeySpec>>& key_table() {
  static const std::vector<std::pair<std::string, KeySpec>> table = {
      // objective and mapper
      {"lambda",
       {[](RunConfig& c, const nlohmann::json& v, const std::string& k) {
          c.model.lambda = get_as<double>(v, k);
        },
        [](const RunConfig& c) { return c.model.lambda; }}},
      {"label_size",
       {[](RunConfig& c, const nlohmann::json& v, const std::string& k) {
          c.model.label_size = get_as<int>(v, k);
        },
        [](const RunConfig& c) { return c.model.label_size; }}},
      {"mapping",
       {[](RunConfig& c, const nlohmann::json& v, const std::string& k) {
          c.mapping = get_as<std::string>(v, k);
        },
        [](const RunConfig& c) { return c.mapping; }}},
      {"map_seed",
       {[](RunConfig& c, const nlohmann::json& v, const std::string& k) {
          c.map_seed = get_as<std::uint64_t>(v, k);
        },
        [](const RunConfig& c) { return c.map_seed; }}},
      {"perm_file",
       {[](RunConfig& c, const nlohmann::json& v, const std::string& k) {
          c.perm_file = get_as<std::string>(v, k);
        },
        [](const RunConfig& c) { return c.perm_file; }}},
      {"random_frozen",
       {[](RunConfig& c, const nlohmann::json& v, const std::string& k) {
          c.random_frozen = get_as<bool>(v, k);
        },
        [](const RunConfig& c) { return c.random_frozen; }}},
      {"label_source",
       {[](RunConfig& c, const nlohmann::json& v, const std::string& k) {
          c.label_source = get_as<std::string>(v, k);
        },
        [](const RunConfig& c) { return c.label_source; }}},
      // task generator
      {"vocab_size",
       {[](RunConfig& c, const nlohmann::json& v, const std::string& k) {
          c.task.v_src = c.task.v_tgt = get_as<int>(v, k);
        },
        [](const RunConfig& c) {
          return c.task.v_src == c.task.v_tgt ? nlohmann::json(c.task.v_src)
                                              : nlohmann::json();
        }}},
      {"v_src",
       {[](RunConfig& c, const nlohmann::json& v, const std::string& k) {
          c.task.v_src = get_as<int>(v, k);
        },
        [](const RunConfig& c) { return c.task.v_src; }}},
      {"v_tgt",
       {[](RunConfig& c, const nlohmann::json& v, const std::string& k) {
          c.task.v_tgt = get_as<int>(v, k);
        },
        [](const RunConfig& c) { return c.task.v_tgt; }}},
      {"zipf_s",
       {[](RunConfig& c, const nlohmann::json& v, const std::string& k) {
          c.task.zipf_s = get_as<double>(v, k);
        },
        [](const RunConfig& c) { return c.task.zipf_s; }}},
      {"expand_min",
       {[](RunConfig& c, const nlohmann::json& v, const std::string& k) {
          c.task.expand_min = get_as<int>(v, k);
        },
        [](const RunConfig& c) { return c.task.expand_min; }}},
      {"expand_max",
       {[](RunConfig& c, const nlohmann::json& v, const std::string& k) {
          c.task.expand_max = get_as<int>(v, k);
        },
        [](const RunConfig& c) { return c.task.expand_max; }}},
      {"noise_sigma",
       {[](RunConfig& c, const nlohmann::json& v, const std::string& k) {
          c.task.noise_sigma = get_as<double>(v, k);
        },
        [](const RunConfig& c) { return c.task.noise_sigma; }}},
      {"swap_prob",
       {[](RunConfig& c, const nlohmann::json& v, const std::string& k) {
          c.task.swap_prob = get_as<double>(v, k);
        },
        [](const RunConfig& c) { return c.task.swap_prob; }}},
      {"len_min",
       {[](RunConfig& c, const nlohmann::json& v, const std::string& k) {
          c.task.len_min = get_as<int>(v, k);
        },
        [](const RunConfig& c) { return c.task.len_min; }}},
      {"len_max",
       {[](RunConfig& c, const nlohmann::json& v, const std::string& k) {
          c.task.len_max = get_as<int>(v, k);
        },
        [](const RunConfig& c) { return c.task.len_max; }}},
      {"f_dim",
       {[](RunConfig& c, const nlohmann::json& v, const std::string& k) {
          c.task.f_dim = get_as<int>(v, k);
        },
        [](const RunConfig& c) { return c.task.f_dim; }}},
      {"n_train",
       {[](RunConfig& c, const nlohmann::json& v, const std::string& k) {
          c.n_train = get_as<int>(v, k);
        },
        [](const RunConfig& c) { return c.n_train; }}},
      {"n_heldout",
       {[](RunConfig& c, const nlohmann::json& v, const std::string& k) {
          c.n_heldout = get_as<int>(v, k);
        },
        [](const RunConfig& c) { return c.n_heldout; }}},
      {"data_file",
       {[](RunConfig& c, const nlohmann::json& v, const std::string& k) {
          c.data_file = get_as<std::string>(v, k);
        },
        [](const RunConfig& c) { return c.data_file; }}},
      {"heldout_file",
       {[](RunConfig& c, const nlohmann::json& v, const std::string& k) {
          c.heldout_file = get_as<std::string>(v, k);
        },
        [](const RunConfig& c) { return c.heldout_file; }}},
      // model and optimization
      {"d_model",
       {[](RunConfig& c, const nlohmann::json& v, const std::string& k) {
          c.model.d_model = get_as<int>(v, k);
        },
        [](const RunConfig& c) { return c.model.d_model; }}},
      {"n_enc",
       {[](RunConfig& c, const nlohmann::json& v, const std::string& k) {
          c.model.n_enc = get_as<int>(v, k);
        },
        [](const RunConfig& c) { return c.model.n_enc; }}},
      {"n_dec",
       {[](RunConfig& c, const nlohmann::json& v, const std::string& k) {
          c.model.n_dec = get_as<int>(v, k);
        },
        [](const RunConfig& c) { return c.model.n_dec; }}},
      {"n_heads",
       {[](RunConfig& c, const nlohmann::json& v, const std::string& k) {
          c.model.n_heads = get_as<int>(v, k);
        },
        [](const RunConfig& c) { return c.model.n_heads; }}},
      {"ff_mult",
       {[](RunConfig& c, const nlohmann::json& v, const std::string& k) {
          c.model.ff_mult = get_as<int>(v, k);
        },
        [](const RunConfig& c) { return c.model.ff_mult; }}},
      {"k_concat",
       {[](RunConfig& c, const nlohmann::json& v, const std::string& k) {
          c.model.k_concat = get_as<int>(v, k);
        },
        [](const RunConfig& c) { return c.model.k_concat; }}},
      {"label_smoothing",
       {[](RunConfig& c, const nlohmann::json& v, const std::string& k) {
          c.model.label_smoothing = get_as<double>(v, k);
        },
        [](const RunConfig& c) { return c.model.label_smoothing; }}},
      {"dropout",
       {[](RunConfig& c, const nlohmann::json& v, const std::string& k) {
          c.model.dropout = get_as<double>(v, k);
        },
        [](const RunConfig& c) { return c.model.dropout; }}},
      {"warmup_steps",
       {[](RunConfig& c, const nlohmann::json& v, const std::string& k) {
          c.model.warmup_steps = get_as<int>(v, k);
        },
        [](const RunConfig& c) { return c.model.warmup_steps; }}},
      {"max_steps",
       {[](RunConfig& c, const nlohmann::json& v, const std::string& k) {
          c.model.max_steps = get_as<int>(v, k);
        },
        [](const RunConfig& c) { return c.model.max_steps; }}},
      {"batch_tokens",
       {[](RunConfig& c, const nlohmann::json& v, const std::string& k) {
          c.model.batch_tokens = get_as<int>(v, k);
        },
        [](const RunConfig& c) { return c.model.batch_tokens; }}},
      {"lr_scale",
       {[](RunConfig& c, const nlohmann::json& v, const std::string& k) {
          c.model.lr_scale = get_as<double>(v, k);
        },
        [](const RunConfig& c) { return c.model.lr_scale; }}},
      {"beam_size",
       {[](RunConfig& c, const nlohmann::json& v, const std::string& k) {
          c.model.beam_size = get_as<int>(v, k);
        },
        [](const RunConfig& c) { return c.model.beam_size; }}},
      {"max_decode_len",
       {[](RunConfig& c, const nlohmann::json& v, const std::string& k) {
          c.model.max_decode_len = get_as<int>(v, k);
        },
        [](const RunConfig& c) { return c.model.max_decode_len; }}},
      {"share_params",
       {[](RunConfig& c, const nlohmann::json& v, const std::string& k) {
          c.model.share_params = get_as<bool>(v, k);
        },
        [](const RunConfig& c) { return c.model.share_params; }}},
      // run controls
      {"seed",
       {[](RunConfig& c, const nlohmann::json& v, const std::string& k) {
          c.task.seed = c.model.seed = get_as<std::uint64_t>(v, k);
        },
        [](const RunConfig& c) { return c.model.seed; }}},
      {"deterministic",
       {[](RunConfig& c, const nlohmann::json& v, const std::string& k) {
          c.deterministic = get_as<bool>(v, k);
        },
        [](const RunConfig& c) { return c.deterministic; }}},
      {"f64",
       {[](RunConfig& c, const nlohmann::json& v, const std::string& k) {
          c.f64 = get_as<bool>(v, k);
        },
        [](const RunConfig& c) { return c.f64; }}},
      {"log_every",
       {[](RunConfig& c, const nlohmann::json& v, const std::string& k) {
          c.log_every = get_as<int>(v, k);
        },
        [](const RunConfig& c) { return c.log_every; }}},
      {"out",
       {[](RunConfig& c, const nlohmann::json& v, const std::string& k) {
          c.out_dir = get_as<std::string>(v, k);
        },
        [](const RunConfig& c) { return c.out_dir; }}},
  };
  return table;
}

}  // namespace

void apply_config_key(RunConfig& cfg, const std::string& key,
                      const nlohmann::json& value) {
  for (const auto& [name, spec] : key_table()) {
    if (name == key) {
      spec.set(cfg, value, key);
      return;
    }
  }
  throw std::invalid_argument("unknown config key \"" + key + "\"");
}

void RunConfig::validate() const {
  task.validate();
  // the model consumes the generator's geometry
  ModelConfig m = model;
  m.v_src = task.v_src;
  m.v_tgt = task.v_tgt;
  m.f_dim = task.f_dim;
  m.validate();
  MapKind kind = parse_map_kind(mapping);
  if (model.lambda > 0.0) {
    int v = label_source_vocab();
    if (kind == MapKind::Identity && model.label_size != v) {
      throw std::invalid_argument(
          "identity mapping requires label_size == vocabulary size (" +
          std::to_string(v) + "), got " + std::to_string(model.label_size));
    }
    if (model.label_size > v) {
      throw std::invalid_argument(
          "label_size " + std::to_string(model.label_size) +
          " exceeds the label-source vocabulary " + std::to_string(v));
    }
  }
  if (label_source != "transcript" && label_source != "translation") {
    throw std::invalid_argument("label_source must be transcript|translation");
  }
  if (n_train < 1 && data_file.empty()) {
    throw std::invalid_argument("n_train must be >= 1 when generating data");
  }
  if (n_heldout < 0) throw std::invalid_argument("n_heldout must be >= 0");
  if (log_every < 1) throw std::invalid_argument("log_every must be >= 1");
}

nlohmann::json RunConfig::to_flat_json() const {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [name, spec] : key_table()) {
    if (name == "vocab_size") continue;  // covered by v_src / v_tgt
    if (name == "out") continue;  // the echo already lives in the out dir
    out[name] = spec.get(*this);
  }
  return out;
}

std::optional<CoarseMapper> RunConfig::make_mapper() const {
  if (model.lambda <= 0.0) return std::nullopt;
  std::optional<ShufflePermutation> perm;
  if (!perm_file.empty()) perm = load_permutation(perm_file);
  return CoarseMapper(parse_map_kind(mapping), label_source_vocab(),
                      model.label_size, map_seed, std::move(perm),
                      random_frozen);
}

RunConfig parse_config(const std::string& config_path,
                       const std::map<std::string, nlohmann::json>& overrides) {
  RunConfig cfg;
  if (!config_path.empty()) {
    std::ifstream in(config_path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open config file: " + config_path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("config file " + config_path + ": " + e.what());
    }
    if (!j.is_object()) {
      throw std::runtime_error("config file must hold a flat JSON object");
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
      apply_config_key(cfg, it.key(), it.value());
    }
  }
  for (const auto& [key, value] : overrides) {
    apply_config_key(cfg, key, value);
  }
  // generator geometry feeds the model
  cfg.model.v_src = cfg.task.v_src;
  cfg.model.v_tgt = cfg.task.v_tgt;
  cfg.model.f_dim = cfg.task.f_dim;
  cfg.validate();
  return cfg;
}

void write_resolved_config(const RunConfig& cfg, const std::string& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream out(std::filesystem::path(dir) / "resolved_config.json",
                    std::ios::binary);
  if (!out) throw std::runtime_error("cannot write resolved_config.json in " + dir);
  out << cfg.to_flat_json().dump(2) << '\n';
}

}  // namespace colactc
