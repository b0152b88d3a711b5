#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>

#include "colactc/model.hpp"
#include "json.hpp"

namespace colactc {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"lambda", c.lambda},
                     {"label_size", c.label_size},
                     {"v_src", c.v_src},
                     {"v_tgt", c.v_tgt},
                     {"d_model", c.d_model},
                     {"n_enc", c.n_enc},
                     {"n_dec", c.n_dec},
                     {"n_heads", c.n_heads},
                     {"ff_mult", c.ff_mult},
                     {"k_concat", c.k_concat},
                     {"f_dim", c.f_dim},
                     {"label_smoothing", c.label_smoothing},
                     {"dropout", c.dropout},
                     {"adam_beta1", c.adam_beta1},
                     {"adam_beta2", c.adam_beta2},
                     {"adam_eps", c.adam_eps},
                     {"warmup_steps", c.warmup_steps},
                     {"max_steps", c.max_steps},
                     {"batch_tokens", c.batch_tokens},
                     {"lr_scale", c.lr_scale},
                     {"beam_size", c.beam_size},
                     {"max_decode_len", c.max_decode_len},
                     {"share_params", c.share_params},
                     {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  j.at("lambda").get_to(c.lambda);
  j.at("label_size").get_to(c.label_size);
  j.at("v_src").get_to(c.v_src);
  j.at("v_tgt").get_to(c.v_tgt);
  j.at("d_model").get_to(c.d_model);
  j.at("n_enc").get_to(c.n_enc);
  j.at("n_dec").get_to(c.n_dec);
  j.at("n_heads").get_to(c.n_heads);
  j.at("ff_mult").get_to(c.ff_mult);
  j.at("k_concat").get_to(c.k_concat);
  j.at("f_dim").get_to(c.f_dim);
  j.at("label_smoothing").get_to(c.label_smoothing);
  j.at("dropout").get_to(c.dropout);
  j.at("adam_beta1").get_to(c.adam_beta1);
  j.at("adam_beta2").get_to(c.adam_beta2);
  j.at("adam_eps").get_to(c.adam_eps);
  j.at("warmup_steps").get_to(c.warmup_steps);
  j.at("max_steps").get_to(c.max_steps);
  j.at("batch_tokens").get_to(c.batch_tokens);
  j.at("lr_scale").get_to(c.lr_scale);
  j.at("beam_size").get_to(c.beam_size);
  j.at("max_decode_len").get_to(c.max_decode_len);
  j.at("share_params").get_to(c.share_params);
  j.at("seed").get_to(c.seed);
}

// Checkpoint layout, versioned and little-endian throughout:
//   bytes 0..7   magic "COLACTCK"
//   u32          format version (1)
//   u32          scalar width in bytes (4 or 8)
//   u64          header length in bytes
//   header       JSON: config, seed, scalar tag, tensor names + shapes
//   blobs        raw parameter values, row-major, in traversal order
namespace detail {
constexpr char kCheckpointMagic[8] = {'C', 'O', 'L', 'A', 'C', 'T', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;
}  // namespace detail

template <typename S>
void save_checkpoint(const std::string& path, const ModelParams<S>& params,
                     const ModelConfig& cfg) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);

  nlohmann::json header;
  header["scalar"] = sizeof(S) == 4 ? "f32" : "f64";
  header["config"] = cfg;
  header["seed"] = cfg.seed;
  auto& tensors = header["tensors"] = nlohmann::json::array();
  for_each_param(const_cast<ModelParams<S>&>(params),
                 [&](const std::string& name, Mat<S>& m) {
                   tensors.push_back({{"name", name},
                                      {"rows", m.rows()},
                                      {"cols", m.cols()}});
                 });
  std::string hdr = header.dump();

  out.write(detail::kCheckpointMagic, 8);
  std::uint32_t version = detail::kCheckpointVersion;
  std::uint32_t width = sizeof(S);
  std::uint64_t hlen = hdr.size();
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&width), 4);
  out.write(reinterpret_cast<const char*>(&hlen), 8);
  out.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));

  for_each_param(const_cast<ModelParams<S>&>(params),
                 [&](const std::string&, Mat<S>& m) {
                   for (Eigen::Index r = 0; r < m.rows(); ++r) {
                     for (Eigen::Index c = 0; c < m.cols(); ++c) {
                       S v = m(r, c);
                       out.write(reinterpret_cast<const char*>(&v), sizeof(S));
                     }
                   }
                 });
  if (!out) throw std::runtime_error("short write to checkpoint: " + path);
}

template <typename S>
std::pair<ModelParams<S>, ModelConfig> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::string(magic, 8) != std::string(detail::kCheckpointMagic, 8)) {
    throw std::runtime_error("not a checkpoint file: " + path);
  }
  std::uint32_t version = 0, width = 0;
  std::uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&width), 4);
  in.read(reinterpret_cast<char*>(&hlen), 8);
  if (version != detail::kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " +
                             std::to_string(version));
  }
  if (width != 4 && width != 8) {
    throw std::runtime_error("unsupported scalar width " + std::to_string(width));
  }
  std::string hdr(hlen, '\0');
  in.read(hdr.data(), static_cast<std::streamsize>(hlen));
  nlohmann::json header = nlohmann::json::parse(hdr);
  ModelConfig cfg = header.at("config").get<ModelConfig>();

  ModelParams<S> params = init_params<S>(cfg);
  size_t tensor_idx = 0;
  const auto& tensors = header.at("tensors");
  for_each_param(params, [&](const std::string& name, Mat<S>& m) {
    const auto& t = tensors.at(tensor_idx++);
    if (t.at("name").get<std::string>() != name ||
        t.at("rows").get<Eigen::Index>() != m.rows() ||
        t.at("cols").get<Eigen::Index>() != m.cols()) {
      throw std::runtime_error("checkpoint tensor mismatch at \"" + name + "\"");
    }
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        if (width == 4) {
          float v;
          in.read(reinterpret_cast<char*>(&v), 4);
          m(r, c) = static_cast<S>(v);
        } else {
          double v;
          in.read(reinterpret_cast<char*>(&v), 8);
          m(r, c) = static_cast<S>(v);
        }
      }
    }
  });
  if (!in) throw std::runtime_error("truncated checkpoint: " + path);
  return {std::move(params), cfg};
}

}  // namespace colactc
