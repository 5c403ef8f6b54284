#pragma once

#include <optional>
#include <string>
#include <vector>

#include "frameexit/model.hpp"

namespace frameexit {

// Per-video FLOP accounting. The backbone term dominates; the optional step
// terms count every dense layer the engine actually evaluates, at
// 2*fan_in*fan_out per affine layer and dim per pooling update.
struct CostModel {
    double backbone_flops_per_frame = 4.12e9;
    bool include_head_gate_cost = false;
};

// Derived per-step FLOP counts for a model's dims.
struct StepCosts {
    double stream = 0.0;       // one gate stream evaluation (two affine layers)
    double merge = 0.0;        // gate merge projection
    double gate_first = 0.0;   // gate at t = 1: one stream + merge
    double gate_later = 0.0;   // gate at t >= 2: both streams + merge
    double pool_update = 0.0;  // entrywise pooling combine (zero at t = 1)
    double classify = 0.0;     // shared projection + one head, evaluated at exit
};

StepCosts derived_step_costs(const ModelDims& dims);

// FLOPs for a gated run that exits at timestep t (gates evaluated 1..t,
// one classification at t).
double exit_flops(const CostModel& cost, const ModelDims& dims, int exit_timestep);

// FLOPs for a fixed-budget run over k frames (no gates, one classification).
double fixed_budget_flops(const CostModel& cost, const ModelDims& dims, int k);

// FLOPs for a prediction-pooling run exiting at t (gates 1..t, classifier
// evaluated at every step, no pooling updates).
double prediction_pooling_flops(const CostModel& cost, const ModelDims& dims, int exit_timestep);

struct ExitTrace {
    std::string video_id;
    int exit_timestep = 0;              // 1..T_eff
    std::vector<double> gate_scores;    // scores for t = 1..exit_timestep (empty if gates unused)
    std::vector<double> prediction;     // logits at exit (probabilities for prediction pooling)
    bool correct = false;               // argmax vs label (argmax in positives for multi-label)
    double flops = 0.0;
    std::vector<int> frame_indices_used;  // 1-based prefix of the sample order
    LabelSpec label;
};

struct InferOptions {
    CostModel cost;
    double threshold = 0.5;  // halt when gate score >= threshold
    // evaluation-time overrides of the checkpoint's policy/pooling, for
    // train-vs-test sampling ablations; unset means "use the model's"
    std::optional<Policy> policy;
    std::optional<PoolKind> pooling;
};

// Early-exit inference: walk the sample order, update the pooled state, and
// stop at the first gate whose score crosses the threshold; if none fires,
// the last classifier decides. Frames past the exit are never touched.
ExitTrace infer(const CascadeModel& model, const VideoFeatures& video, const InferOptions& opts);

// Fixed-budget baseline: ignore gates, classify with head k on z_k.
ExitTrace infer_fixed_budget(const CascadeModel& model, const VideoFeatures& video, int k,
                             const InferOptions& opts);

// Prediction-pooling ablation (per-frame checkpoints only): classifiers see
// single-frame features and their softmax/sigmoid outputs are averaged up to
// the exit point.
ExitTrace infer_prediction_pooling(const CascadeModel& model, const VideoFeatures& video,
                                   const InferOptions& opts);

// Forced full evaluation: logits of every classifier 1..T_eff, ignoring
// gates. Used by the exit-matrix analysis. Honors the policy/pooling
// overrides in opts so forced and gated runs sample identically.
std::vector<std::vector<double>> classify_all_timesteps(const CascadeModel& model,
                                                        const VideoFeatures& video,
                                                        const InferOptions& opts = {});

std::vector<ExitTrace> infer_all(const CascadeModel& model,
                                 const std::vector<VideoFeatures>& videos,
                                 const InferOptions& opts);

// Serialized trace record, one JSON object per line.
std::string trace_to_json(const ExitTrace& trace);

}  // namespace frameexit
