#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "frameexit/engine.hpp"
#include "frameexit/trainer.hpp"

namespace frameexit {

struct HistogramBucket {
    int timestep = 0;
    std::size_t count = 0;
    double share = 0.0;
    double accuracy = 0.0;  // NaN for empty buckets
};

struct EvalReport {
    bool is_multilabel = false;
    double accuracy = 0.0;  // top-1 for single-label, mAP for multi-label
    double mean_flops = 0.0;
    double mean_exit_timestep = 0.0;
    std::vector<HistogramBucket> exit_histogram;
    std::size_t n_videos = 0;
    int labels_skipped = 0;  // zero-positive labels dropped from mAP
    std::string fingerprint;
};

// Fraction of traces whose argmax prediction hits the label; ties break to
// the lowest index. Rejects multi-label traces.
double top1(const std::vector<ExitTrace>& traces);

struct MapResult {
    double map = 0.0;
    int labels_scored = 0;
    int labels_skipped = 0;  // labels with no positives
};

// All-point average precision per label (no interpolation), averaged over
// labels with at least one positive. Videos are ranked by score descending,
// ties broken by input order.
MapResult mean_average_precision(const std::vector<ExitTrace>& traces);

std::vector<HistogramBucket> exit_histogram(const std::vector<ExitTrace>& traces, int timesteps);

EvalReport evaluate(const std::vector<ExitTrace>& traces, int timesteps,
                    const std::string& fingerprint);

// Entry (i, j): accuracy of classifier j on the cohort the gated model
// exited at timestep i (full evaluation forced, gates ignored, for j != i).
// Empty cohorts hold NaN.
struct ExitMatrix {
    int timesteps = 0;
    std::vector<std::vector<double>> accuracy;  // T x T
    std::vector<std::size_t> cohort_sizes;      // per exit timestep
};

ExitMatrix exit_matrix(const CascadeModel& model, const std::vector<VideoFeatures>& videos,
                       const InferOptions& opts);

struct SweepPoint {
    double beta = 0.0;
    EvalReport report;
    std::vector<double> pseudo_positive_rate;  // per timestep, from stage-2 training
};

// Gates retrained per beta from the shared stage-1 model, then evaluated;
// rows form the accuracy-vs-compute trade-off curve.
std::vector<SweepPoint> sweep_beta(const CascadeModel& stage1_model,
                                   const std::vector<VideoFeatures>& train_set,
                                   const std::vector<VideoFeatures>& test_set,
                                   const std::vector<double>& betas, const TrainConfig& config,
                                   const InferOptions& opts);

struct AdaptiveVsFixed {
    double mean_frames = 0.0;
    double adaptive_accuracy = 0.0;
    int matched_k = 0;  // round(mean_frames), clamped to [1, T]
    double fixed_accuracy_at_matched_k = 0.0;
    std::vector<std::pair<int, double>> fixed_rows;  // (k, accuracy) per requested budget
};

// Adaptive run of the gated model paired with the fixed-budget baseline at
// the matched mean frame count, plus fixed rows for each requested budget.
AdaptiveVsFixed compare_fixed_vs_adaptive(const CascadeModel& model,
                                          const std::vector<VideoFeatures>& videos,
                                          const std::vector<int>& budgets,
                                          const InferOptions& opts);

// --- fingerprints & report files ---------------------------------------------

std::uint64_t fnv1a64(std::string_view text);
std::string fingerprint_hex(std::string_view canonical_config);

void write_report_csv(const EvalReport& report, std::ostream& os);
void write_histogram_csv(const EvalReport& report, std::ostream& os);
void write_histogram_jsonl(const EvalReport& report, std::ostream& os);
void write_exit_matrix_csv(const ExitMatrix& matrix, std::ostream& os);
void write_exit_matrix_jsonl(const ExitMatrix& matrix, std::ostream& os);
void write_sweep_csv(const std::vector<SweepPoint>& points, std::ostream& os);
void write_sweep_jsonl(const std::vector<SweepPoint>& points, std::ostream& os);
void write_compare_csv(const std::vector<std::pair<std::string, AdaptiveVsFixed>>& rows,
                       std::ostream& os);

}  // namespace frameexit
