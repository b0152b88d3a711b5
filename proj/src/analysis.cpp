#include "colactc/analysis.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include "colactc/linalg.hpp"
#include "json.hpp"

namespace colactc {

double mean_pairwise_cosine(const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows();
  if (n < 2) throw std::invalid_argument("need at least two rows");
  double sum = 0.0;
  std::int64_t pairs = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      sum += cosine(x.row(i).transpose(), x.row(j).transpose());
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

SimilarityReport encoder_similarity(const ModelParams<double>& params,
                                    const ModelConfig& cfg,
                                    const std::vector<Triplet>& data,
                                    bool dump_first_matrix) {
  if (data.empty()) throw std::invalid_argument("empty dataset");
  SimilarityReport report;
  double sum = 0.0;
  bool dumped = false;
  for (const auto& item : data) {
    Eigen::MatrixXd x = encode(item.frames, params, cfg);
    if (x.rows() < 2) {
      ++report.utterances_skipped;
      continue;
    }
    double mean = mean_pairwise_cosine(x);
    report.per_utterance.push_back(mean);
    sum += mean;
    ++report.utterances_used;
    if (dump_first_matrix && !dumped) {
      const Eigen::Index n = x.rows();
      report.first_matrix.resize(n, n);
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
          report.first_matrix(i, j) =
              cosine(x.row(i).transpose(), x.row(j).transpose());
        }
      }
      dumped = true;
    }
  }
  if (report.utterances_used > 0) {
    report.corpus_mean = sum / report.utterances_used;
  }
  return report;
}

std::vector<CurvePoint> smooth_series(const std::vector<CurvePoint>& series,
                                      int window, int stride) {
  if (window < 1) throw std::invalid_argument("window must be >= 1");
  if (stride < 1) throw std::invalid_argument("stride must be >= 1");
  std::vector<CurvePoint> out;
  double acc = 0.0;
  for (size_t i = 0; i < series.size(); ++i) {
    acc += series[i].value;
    size_t w = static_cast<size_t>(window);
    if (i >= w) acc -= series[i - w].value;
    size_t have = std::min(i + 1, w);
    if (i % static_cast<size_t>(stride) == 0) {
      out.push_back({series[i].step, acc / static_cast<double>(have)});
    }
  }
  return out;
}

std::vector<CurvePoint> curve_extract(const std::string& metrics_path,
                                      const std::string& field, int window,
                                      int stride) {
  std::ifstream in(metrics_path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open metrics file: " + metrics_path);
  std::vector<CurvePoint> raw;
  std::set<std::string> fields;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": malformed JSON: " + e.what());
    }
    for (auto it = j.begin(); it != j.end(); ++it) fields.insert(it.key());
    if (!j.contains(field)) {
      std::string have;
      for (const auto& f : fields) have += (have.empty() ? "" : ", ") + f;
      throw std::runtime_error("unknown field \"" + field +
                               "\" (available: " + have + ")");
    }
    const auto& v = j.at(field);
    if (v.is_null()) continue;
    if (!v.is_number()) {
      throw std::runtime_error("field \"" + field + "\" is not numeric");
    }
    double step = j.contains("step") && j["step"].is_number()
                      ? j["step"].get<double>()
                      : static_cast<double>(raw.size() + 1);
    raw.push_back({step, v.get<double>()});
  }
  return smooth_series(raw, window, stride);
}

}  // namespace colactc
