#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "colactc/data.hpp"
#include "colactc/model.hpp"

namespace colactc {

// Mean pairwise cosine similarity of the final-encoder rows, per
// utterance and averaged over the corpus (two-level mean). Utterances
// with a single encoder position are skipped and counted.
struct SimilarityReport {
  int utterances_used = 0;
  int utterances_skipped = 0;
  double corpus_mean = 0.0;
  std::vector<double> per_utterance;
  Eigen::MatrixXd first_matrix;  // full |X| x |X| dump, empty unless requested
};

// Mean of cosine(x_i, x_j) over unordered row pairs i < j.
double mean_pairwise_cosine(const Eigen::MatrixXd& x);

SimilarityReport encoder_similarity(const ModelParams<double>& params,
                                    const ModelConfig& cfg,
                                    const std::vector<Triplet>& data,
                                    bool dump_first_matrix = false);

// One smoothed point of a training curve.
struct CurvePoint {
  double step = 0.0;
  double value = 0.0;
};

// Trailing moving average (window w averages the last min(w, i+1)
// values), then keeps every stride-th point. window=1 is the identity.
std::vector<CurvePoint> smooth_series(const std::vector<CurvePoint>& series,
                                      int window, int stride = 1);

// Reads a metrics JSON-lines file and extracts one numeric field as a
// smoothed, downsampled series. Unknown fields raise an error listing the
// fields available; null entries (e.g. ctc_loss when lambda = 0) are
// dropped.
std::vector<CurvePoint> curve_extract(const std::string& metrics_path,
                                      const std::string& field, int window,
                                      int stride = 1);

}  // namespace colactc
