// colactc: coarse-label CTC regularization workbench.
//
// Subcommands: gen-data, map, train, eval, bench, analyze, inspect-ctc,
// suite. Every subcommand exits 0 on success and prints a single
// "error: ..." line to stderr on failure. COLACTC_THREADS caps the
// worker threads used for batch-parallel training.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "colactc/analysis.hpp"
#include "colactc/bench.hpp"
#include "colactc/checkpoint.hpp"
#include "colactc/config.hpp"
#include "colactc/ctc.hpp"
#include "colactc/train.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace colactc;

namespace {

int env_threads() {
  const char* v = std::getenv("COLACTC_THREADS");
  if (!v) return 1;
  int n = std::atoi(v);
  return n < 1 ? 1 : n;
}

// Registers the flat-config flags on a subcommand and records which were
// supplied so flag values override file values.
class ConfigFlags {
 public:
  explicit ConfigFlags(CLI::App* cmd) : cmd_(cmd) {
    add_num("--lambda", "lambda", "CTC interpolation weight");
    add_num("--label-size", "label_size", "coarse label space size L");
    add_str("--mapping", "mapping", "identity|tru|mod|div|log|random");
    add_num("--map-seed", "map_seed", "seed for the random mapping");
    add_str("--perm", "perm_file", "shuffle permutation JSON file");
    add_flag("--random-frozen", "random_frozen",
             "freeze the random mapping per id instead of redrawing");
    add_str("--label-source", "label_source", "transcript|translation");
    add_num("--vocab-size", "vocab_size", "source and target vocabulary size");
    add_num("--v-src", "v_src", "source vocabulary size");
    add_num("--v-tgt", "v_tgt", "target vocabulary size");
    add_num("--zipf-s", "zipf_s", "Zipf exponent of token frequencies");
    add_num("--expand-min", "expand_min", "min frames per token");
    add_num("--expand-max", "expand_max", "max frames per token");
    add_num("--noise-sigma", "noise_sigma", "frame noise stddev");
    add_num("--swap-prob", "swap_prob", "adjacent target swap probability");
    add_num("--len-min", "len_min", "min sentence length");
    add_num("--len-max", "len_max", "max sentence length");
    add_num("--f-dim", "f_dim", "frame feature dimension");
    add_num("--n-train", "n_train", "generated training triplets");
    add_num("--n-heldout", "n_heldout", "generated held-out triplets");
    add_str("--data", "data_file", "training dataset JSONL (skips generation)");
    add_str("--heldout-data", "heldout_file", "held-out dataset JSONL");
    add_num("--d-model", "d_model", "model width");
    add_num("--n-enc", "n_enc", "encoder layers");
    add_num("--n-dec", "n_dec", "decoder layers");
    add_num("--n-heads", "n_heads", "attention heads");
    add_num("--ff-mult", "ff_mult", "feed-forward width multiplier");
    add_num("--k-concat", "k_concat", "frames concatenated per position");
    add_num("--label-smoothing", "label_smoothing", "label smoothing rate");
    add_num("--dropout", "dropout", "dropout rate");
    add_num("--warmup-steps", "warmup_steps", "lr warmup steps");
    add_num("--max-steps", "max_steps", "training steps");
    add_num("--batch-tokens", "batch_tokens", "target tokens per batch");
    add_num("--lr-scale", "lr_scale", "learning-rate scale");
    add_num("--beam-size", "beam_size", "beam width for decoding");
    add_num("--max-decode-len", "max_decode_len", "decode length cap");
    add_flag("--share-params", "share_params",
             "share the CTC prediction weight with the softmax embedding");
    add_num("--seed", "seed", "master seed");
    add_flag("--deterministic", "deterministic",
             "reproducible metrics (wall_ms reported as 0)");
    add_flag("--f64", "f64", "train in 64-bit floats");
    add_num("--log-every", "log_every", "metrics emission stride");
  }

  std::map<std::string, json> overrides() const {
    std::map<std::string, json> out;
    for (const auto& [opt, key, kind] : bound_) {
      if (opt->count() == 0) continue;
      const std::string& raw = values_.at(key);
      if (kind == Kind::Number) {
        json v = json::parse(raw, nullptr, false);
        if (v.is_discarded() || !v.is_number()) {
          throw std::invalid_argument("config key \"" + key +
                                      "\" expects a number, got \"" + raw + "\"");
        }
        out[key] = v;
      } else {
        out[key] = raw;
      }
    }
    for (const auto& [opt, key] : flags_) {
      if (opt->count() > 0) out[key] = true;
    }
    return out;
  }

 private:
  enum class Kind { Number, String };

  void add_num(const std::string& flag, const std::string& key,
               const std::string& help) {
    auto* opt = cmd_->add_option(flag, values_[key], help);
    bound_.emplace_back(opt, key, Kind::Number);
  }
  void add_str(const std::string& flag, const std::string& key,
               const std::string& help) {
    auto* opt = cmd_->add_option(flag, values_[key], help);
    bound_.emplace_back(opt, key, Kind::String);
  }
  void add_flag(const std::string& flag, const std::string& key,
                const std::string& help) {
    flags_.emplace_back(cmd_->add_flag(flag, help), key);
  }

  CLI::App* cmd_;
  std::map<std::string, std::string> values_;
  std::vector<std::tuple<CLI::Option*, std::string, Kind>> bound_;
  std::vector<std::pair<CLI::Option*, std::string>> flags_;
};

json metrics_to_json(const StepMetrics& m) {
  json j;
  j["step"] = m.step;
  j["mle_loss"] = m.has_mle ? json(m.mle_loss) : json(nullptr);
  j["ctc_loss"] = m.has_ctc ? json(m.ctc_loss) : json(nullptr);
  j["total_loss"] = m.total_loss;
  j["skipped_infeasible"] = m.skipped_infeasible;
  j["wall_ms"] = m.wall_ms;
  j["lr"] = m.lr;
  return j;
}

struct RunArtifacts {
  json summary;
};

// Shared train pipeline for the train subcommand and the suite runner.
template <typename S>
RunArtifacts run_training(const RunConfig& rc) {
  fs::create_directories(rc.out_dir);
  write_resolved_config(rc, rc.out_dir);

  std::vector<Triplet> dataset;
  if (!rc.data_file.empty()) {
    dataset = read_jsonl(rc.data_file);
    validate_ids(dataset, rc.task.v_src, rc.task.v_tgt);
  } else {
    dataset = generate(rc.task, rc.n_train);
  }
  std::vector<Triplet> heldout;
  if (!rc.heldout_file.empty()) {
    heldout = read_jsonl(rc.heldout_file);
    validate_ids(heldout, rc.task.v_src, rc.task.v_tgt);
  } else if (rc.n_heldout > 0) {
    TaskSpec hs = rc.task;
    hs.seed = derive_seed(rc.task.seed, 0xE1D);
    heldout = generate(hs, rc.n_heldout);
  }

  ModelConfig cfg = rc.model;
  cfg.v_src = rc.task.v_src;
  cfg.v_tgt = rc.task.v_tgt;
  cfg.f_dim = rc.task.f_dim;

  auto mapper = rc.make_mapper();
  std::ofstream metrics_file(fs::path(rc.out_dir) / "metrics.jsonl",
                             std::ios::binary);
  if (!metrics_file) {
    throw std::runtime_error("cannot write metrics.jsonl in " + rc.out_dir);
  }

  TrainOptions opts;
  opts.threads = env_threads();
  opts.deterministic = rc.deterministic;
  opts.metrics_sink = [&](const StepMetrics& m) {
    if (m.step % rc.log_every == 0 || m.step == cfg.max_steps) {
      metrics_file << metrics_to_json(m).dump() << '\n';
    }
  };

  auto result = train<S>(cfg, dataset, mapper ? &*mapper : nullptr,
                         parse_label_source(rc.label_source), opts);
  save_checkpoint((fs::path(rc.out_dir) / "checkpoint.bin").string(),
                  result.params, cfg);

  json summary;
  summary["params"] = count_params(result.params);
  summary["steps"] = cfg.max_steps;
  summary["wall_s"] = rc.deterministic ? 0.0 : result.wall_s;
  summary["skipped_infeasible_total"] = result.skipped_total;
  const auto& last = result.metrics.back();
  summary["final_mle_loss"] = last.has_mle ? json(last.mle_loss) : json(nullptr);
  summary["final_ctc_loss"] = last.has_ctc ? json(last.ctc_loss) : json(nullptr);
  summary["final_total_loss"] = last.total_loss;
  if (!heldout.empty()) {
    summary["heldout_token_accuracy"] =
        token_accuracy(heldout, result.params, cfg);
  }
  std::ofstream sum_file(fs::path(rc.out_dir) / "summary.json", std::ios::binary);
  sum_file << summary.dump(2) << '\n';
  return {summary};
}

RunArtifacts run_training_any(const RunConfig& rc) {
  return rc.f64 ? run_training<double>(rc) : run_training<float>(rc);
}

// ------------------------------------------------------------ subcommands

int cmd_gen_data(const std::string& config_path, const ConfigFlags& flags,
                 const std::string& out_dir, int n, int n_heldout) {
  auto overrides = flags.overrides();
  RunConfig rc = parse_config(config_path, overrides);
  if (n > 0) rc.n_train = n;
  if (n_heldout >= 0) rc.n_heldout = n_heldout;
  rc.out_dir = out_dir;
  fs::create_directories(out_dir);
  write_resolved_config(rc, out_dir);
  auto train_set = generate(rc.task, rc.n_train);
  write_jsonl((fs::path(out_dir) / "train.jsonl").string(), train_set);
  if (rc.n_heldout > 0) {
    TaskSpec hs = rc.task;
    hs.seed = derive_seed(rc.task.seed, 0xE1D);
    write_jsonl((fs::path(out_dir) / "heldout.jsonl").string(),
                generate(hs, rc.n_heldout));
  }
  std::cout << "wrote " << rc.n_train << " train and " << rc.n_heldout
            << " held-out triplets to " << out_dir << "\n";
  return 0;
}

int cmd_map(const std::string& mapping, int vocab_size, int label_size,
            std::uint64_t seed, const std::string& perm_path, bool frozen) {
  std::optional<ShufflePermutation> perm;
  if (!perm_path.empty()) perm = load_permutation(perm_path);
  CoarseMapper mapper(parse_map_kind(mapping), vocab_size, label_size, seed,
                      std::move(perm), frozen);
  std::string line;
  while (std::getline(std::cin, line)) {
    std::istringstream in(line);
    std::vector<int> ids;
    int id;
    while (in >> id) ids.push_back(id);
    auto mapped = mapper.map_sequence(ids);
    for (size_t i = 0; i < mapped.size(); ++i) {
      if (i) std::cout << ' ';
      std::cout << mapped[i];
    }
    std::cout << '\n';
  }
  return 0;
}

int cmd_train(const std::string& config_path, const ConfigFlags& flags,
              const std::string& out_dir) {
  auto overrides = flags.overrides();
  RunConfig rc = parse_config(config_path, overrides);
  rc.out_dir = out_dir;
  auto artifacts = run_training_any(rc);
  std::cout << artifacts.summary.dump(2) << '\n';
  return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& data_path,
             const std::string& decode_mode) {
  auto [params, cfg] = load_checkpoint<double>(checkpoint_path);
  auto data = read_jsonl(data_path);
  validate_ids(data, cfg.v_src, cfg.v_tgt);
  json out;
  out["items"] = data.size();
  out["token_accuracy"] = token_accuracy(data, params, cfg);
  if (decode_mode != "none") {
    DecodeMode mode =
        decode_mode == "beam" ? DecodeMode::Beam : DecodeMode::Greedy;
    int exact = 0;
    for (const auto& item : data) {
      if (decode(item.frames, params, cfg, mode) == item.translation_ids) {
        ++exact;
      }
    }
    out["decode_mode"] = decode_mode;
    out["sequence_exact_match"] =
        data.empty() ? 0.0 : 100.0 * exact / static_cast<double>(data.size());
  }
  std::cout << out.dump(2) << '\n';
  return 0;
}

int cmd_bench(const std::string& pairs, int d, int frames, int batch, int steps,
              int reps, int warmup, std::uint64_t seed,
              const std::string& out_dir, bool want_tsv) {
  std::vector<BenchPoint> points;
  std::istringstream in(pairs);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    auto sep = tok.find(':');
    if (sep == std::string::npos) {
      throw std::invalid_argument("--pairs expects V:L[,V:L...], got \"" + tok + "\"");
    }
    BenchPoint p;
    p.v = std::stoi(tok.substr(0, sep));
    p.l = std::stoi(tok.substr(sep + 1));
    p.d = d;
    p.frames = frames;
    p.batch = batch;
    points.push_back(p);
  }
  if (points.empty()) throw std::invalid_argument("no bench grid points given");

  std::vector<BenchResult> results;
  for (const auto& p : points) {
    std::cerr << "bench V=" << p.v << " L=" << p.l << " ..." << std::endl;
    results.push_back(bench_step(p, steps, reps, warmup, seed));
  }
  fs::create_directories(out_dir);
  std::ofstream csv(fs::path(out_dir) / "bench.csv", std::ios::binary);
  csv << bench_csv(results);
  bool have_all_baselines = true;
  for (const auto& r : results) {
    bool found = false;
    for (const auto& b : results) {
      found = found || (b.point.v == r.point.v && b.point.l == b.point.v &&
                        b.point.d == r.point.d &&
                        b.point.frames == r.point.frames &&
                        b.point.batch == r.point.batch);
    }
    have_all_baselines = have_all_baselines && found;
  }
  if (have_all_baselines) {
    std::ofstream sp(fs::path(out_dir) / "speedups.csv", std::ios::binary);
    sp << speedup_table(results);
  }
  if (want_tsv) {
    std::ofstream tsv(fs::path(out_dir) / "scaling.tsv", std::ios::binary);
    tsv << scaling_tsv(results);
  }
  std::cout << bench_csv(results);
  return 0;
}

int cmd_analyze(const std::string& checkpoint_path, const std::string& data_path,
                const std::string& out_dir, bool matrix_tsv,
                const std::string& curves_path, const std::string& field,
                int window, int stride) {
  if (!curves_path.empty()) {
    auto series = curve_extract(curves_path, field, window, stride);
    for (const auto& p : series) {
      std::cout << p.step << '\t' << p.value << '\n';
    }
    return 0;
  }
  auto [params, cfg] = load_checkpoint<double>(checkpoint_path);
  auto data = read_jsonl(data_path);
  auto report = encoder_similarity(params, cfg, data, matrix_tsv);
  json out;
  out["utterances_used"] = report.utterances_used;
  out["utterances_skipped"] = report.utterances_skipped;
  out["corpus_mean_cosine"] = report.corpus_mean;
  out["per_utterance"] = report.per_utterance;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream rep(fs::path(out_dir) / "similarity.json", std::ios::binary);
    rep << out.dump(2) << '\n';
    if (matrix_tsv && report.first_matrix.size() > 0) {
      std::ofstream tsv(fs::path(out_dir) / "similarity_matrix.tsv",
                        std::ios::binary);
      for (Eigen::Index i = 0; i < report.first_matrix.rows(); ++i) {
        for (Eigen::Index j = 0; j < report.first_matrix.cols(); ++j) {
          if (j) tsv << '\t';
          tsv << report.first_matrix(i, j);
        }
        tsv << '\n';
      }
    }
  }
  std::cout << out.dump(2) << '\n';
  return 0;
}

int cmd_inspect_ctc(const std::string& input_path) {
  json j;
  if (input_path.empty()) {
    std::cin >> j;
  } else {
    std::ifstream in(input_path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + input_path);
    in >> j;
  }
  auto rows = j.at("logp").get<std::vector<std::vector<double>>>();
  auto labels = j.at("labels").get<std::vector<int>>();
  if (rows.empty()) throw std::invalid_argument("empty lattice");
  LogProbLattice<double> lat{Mat<double>(static_cast<Eigen::Index>(rows.size()),
                                         static_cast<Eigen::Index>(rows[0].size()))};
  for (size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows[0].size()) {
      throw std::invalid_argument("ragged lattice rows");
    }
    for (size_t c = 0; c < rows[r].size(); ++c) {
      lat.logp(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  json out;
  auto res = ctc_neg_log_likelihood(lat, labels);
  out["feasible"] = res.feasible;
  out["loss"] = res.feasible ? json(res.nll) : json(nullptr);
  if (res.feasible) {
    Mat<double> grad;
    ctc_grad(lat, labels, grad);
    // posterior label occupancy per frame = -d loss / d logp
    std::vector<std::vector<double>> post(static_cast<size_t>(grad.rows()));
    for (Eigen::Index t = 0; t < grad.rows(); ++t) {
      post[static_cast<size_t>(t)].resize(static_cast<size_t>(grad.cols()));
      for (Eigen::Index c = 0; c < grad.cols(); ++c) {
        post[static_cast<size_t>(t)][static_cast<size_t>(c)] = -grad(t, c);
      }
    }
    out["posteriors"] = post;
  }
  std::cout << out.dump() << '\n';
  return 0;
}

int cmd_suite(const std::string& suite_path, const std::string& out_dir) {
  std::ifstream in(suite_path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open suite file: " + suite_path);
  json suite;
  in >> suite;
  const json& runs = suite.is_array() ? suite : suite.at("runs");
  if (!runs.is_array() || runs.empty()) {
    throw std::invalid_argument("suite file must list runs");
  }
  std::set<std::string> names;
  for (const auto& run : runs) {
    std::string name = run.at("name").get<std::string>();
    if (!names.insert(name).second) {
      throw std::invalid_argument("duplicate run name \"" + name + "\"");
    }
  }

  fs::create_directories(out_dir);
  std::ofstream csv(fs::path(out_dir) / "summary.csv", std::ios::binary);
  csv << "name,status,params,heldout_token_accuracy,final_mle_loss,"
         "final_ctc_loss,final_total_loss,wall_s\n";
  for (const auto& run : runs) {
    std::string name = run.at("name").get<std::string>();
    std::cerr << "run " << name << " ..." << std::endl;
    try {
      std::map<std::string, json> overrides;
      std::string base_config;
      for (auto it = run.begin(); it != run.end(); ++it) {
        if (it.key() == "name") continue;
        if (it.key() == "config") {
          base_config = it.value().get<std::string>();
          continue;
        }
        overrides[it.key()] = it.value();
      }
      RunConfig rc = parse_config(base_config, overrides);
      rc.out_dir = (fs::path(out_dir) / name).string();
      auto artifacts = run_training_any(rc);
      const json& s = artifacts.summary;
      auto num = [&](const char* key) {
        return s.contains(key) && !s[key].is_null() ? s[key].dump() : "";
      };
      csv << name << ",ok," << num("params") << ','
          << num("heldout_token_accuracy") << ',' << num("final_mle_loss")
          << ',' << num("final_ctc_loss") << ',' << num("final_total_loss")
          << ',' << num("wall_s") << '\n';
    } catch (const std::exception& e) {
      std::cerr << "run " << name << " failed: " << e.what() << std::endl;
      csv << name << ",failed,,,,,,\n";
    }
    csv.flush();
  }
  std::cout << "suite summary written to "
            << (fs::path(out_dir) / "summary.csv").string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coarse-label CTC regularization workbench"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  std::string gen_config, gen_out;
  int gen_n = 0, gen_heldout = -1;
  gen->add_option("--config", gen_config, "flat JSON config file");
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--n", gen_n, "training triplets (overrides n_train)");
  gen->add_option("--heldout", gen_heldout, "held-out triplets (overrides n_heldout)");
  ConfigFlags gen_flags(gen);

  // map
  auto* map_cmd = app.add_subcommand(
      "map", "map token id sequences (stdin) to coarse labels (stdout)");
  std::string map_kind = "mod", map_perm;
  int map_v = 0, map_l = 0;
  std::uint64_t map_seed = 0;
  bool map_frozen = false;
  map_cmd->add_option("--mapping", map_kind, "identity|tru|mod|div|log|random");
  map_cmd->add_option("--vocab-size", map_v, "vocabulary size V")->required();
  map_cmd->add_option("--label-size", map_l, "label size L")->required();
  map_cmd->add_option("--seed", map_seed, "seed for the random mapping");
  map_cmd->add_option("--perm", map_perm, "shuffle permutation JSON file");
  map_cmd->add_flag("--random-frozen", map_frozen, "freeze random draws per id");

  // train
  auto* train_cmd = app.add_subcommand("train", "train a model");
  std::string train_config, train_out;
  train_cmd->add_option("--config", train_config, "flat JSON config file");
  train_cmd->add_option("--out", train_out, "output directory")->required();
  ConfigFlags train_flags(train_cmd);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string eval_ckpt, eval_data, eval_decode = "greedy";
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval_cmd->add_option("--data", eval_data, "dataset JSONL")->required();
  eval_cmd->add_option("--decode", eval_decode, "greedy|beam|none");

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "training-step timing harness");
  std::string bench_pairs, bench_out = "bench_out";
  int bench_d = 64, bench_frames = 16, bench_batch = 4, bench_steps = 50,
      bench_reps = 3, bench_warmup = 10;
  std::uint64_t bench_seed = 42;
  bool bench_tsv = false;
  bench_cmd->add_option("--pairs", bench_pairs, "grid as V:L[,V:L...]")->required();
  bench_cmd->add_option("--d-model", bench_d, "model width");
  bench_cmd->add_option("--frames", bench_frames, "lattice frames per item");
  bench_cmd->add_option("--batch", bench_batch, "items per batch");
  bench_cmd->add_option("--steps", bench_steps, "timed steps per rep");
  bench_cmd->add_option("--reps", bench_reps, "repetitions");
  bench_cmd->add_option("--warmup", bench_warmup, "untimed warmup steps");
  bench_cmd->add_option("--seed", bench_seed, "seed");
  bench_cmd->add_option("--out", bench_out, "output directory");
  bench_cmd->add_flag("--tsv", bench_tsv, "also write gnuplot-ready scaling.tsv");

  // analyze
  auto* an_cmd = app.add_subcommand(
      "analyze", "encoder similarity report or training-curve extraction");
  std::string an_ckpt, an_data, an_out, an_curves, an_field = "total_loss";
  int an_window = 25, an_stride = 1;
  bool an_matrix = false;
  an_cmd->add_option("--checkpoint", an_ckpt, "checkpoint file");
  an_cmd->add_option("--data", an_data, "dataset JSONL");
  an_cmd->add_option("--out", an_out, "output directory");
  an_cmd->add_flag("--matrix-tsv", an_matrix, "dump the first utterance's matrix");
  an_cmd->add_option("--curves", an_curves, "metrics JSONL to extract a curve from");
  an_cmd->add_option("--field", an_field, "metrics field for --curves");
  an_cmd->add_option("--window", an_window, "moving-average window");
  an_cmd->add_option("--stride", an_stride, "downsampling stride");

  // inspect-ctc
  auto* ins_cmd = app.add_subcommand(
      "inspect-ctc", "loss and per-frame posteriors for a lattice/label pair");
  std::string ins_input;
  ins_cmd->add_option("--input", ins_input, "JSON file (default stdin)");

  // suite
  auto* suite_cmd = app.add_subcommand("suite", "run a named experiment suite");
  std::string suite_file, suite_out;
  suite_cmd->add_option("--file", suite_file, "suite JSON file")->required();
  suite_cmd->add_option("--out", suite_out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(gen_config, gen_flags, gen_out, gen_n, gen_heldout);
    if (map_cmd->parsed()) return cmd_map(map_kind, map_v, map_l, map_seed, map_perm, map_frozen);
    if (train_cmd->parsed()) return cmd_train(train_config, train_flags, train_out);
    if (eval_cmd->parsed()) return cmd_eval(eval_ckpt, eval_data, eval_decode);
    if (bench_cmd->parsed()) {
      return cmd_bench(bench_pairs, bench_d, bench_frames, bench_batch,
                       bench_steps, bench_reps, bench_warmup, bench_seed,
                       bench_out, bench_tsv);
    }
    if (an_cmd->parsed()) {
      if (an_curves.empty() && (an_ckpt.empty() || an_data.empty())) {
        throw std::invalid_argument(
            "analyze needs --curves or both --checkpoint and --data");
      }
      return cmd_analyze(an_ckpt, an_data, an_out, an_matrix, an_curves,
                         an_field, an_window, an_stride);
    }
    if (ins_cmd->parsed()) return cmd_inspect_ctc(ins_input);
    if (suite_cmd->parsed()) return cmd_suite(suite_file, suite_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
