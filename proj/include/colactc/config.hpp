#pragma once

#include <map>
#include <optional>
#include <string>

#include "colactc/colamap.hpp"
#include "colactc/data.hpp"
#include "colactc/model.hpp"
#include "json.hpp"

namespace colactc {

// Flat run configuration: the union of the task generator, the trainer
// and the mapper selection. Every key has a default; unknown keys are
// rejected. Flags override file values, and the fully resolved config is
// echoed to the output directory as resolved_config.json.
struct RunConfig {
  TaskSpec task;
  ModelConfig model;
  std::string mapping = "mod";
  std::uint64_t map_seed = 0;
  std::string perm_file;
  bool random_frozen = false;
  std::string label_source = "transcript";
  int n_train = 2000;
  int n_heldout = 256;
  std::string data_file;
  std::string heldout_file;
  bool deterministic = false;
  bool f64 = false;
  int log_every = 1;
  std::string out_dir;

  void validate() const;
  nlohmann::json to_flat_json() const;

  // Vocabulary the CTC labels are drawn from under the selected source.
  int label_source_vocab() const {
    return label_source == "transcript" ? task.v_src : task.v_tgt;
  }

  // Builds the selected coarse mapper (loads the permutation file when
  // set). Returns nothing when lambda == 0.
  std::optional<CoarseMapper> make_mapper() const;
};

// Applies one flat key to the config; throws on unknown key or bad type.
void apply_config_key(RunConfig& cfg, const std::string& key,
                      const nlohmann::json& value);

// File (optional, flat JSON object) + overrides, then validation.
RunConfig parse_config(const std::string& config_path,
                       const std::map<std::string, nlohmann::json>& overrides);

void write_resolved_config(const RunConfig& cfg, const std::string& dir);

}  // namespace colactc
