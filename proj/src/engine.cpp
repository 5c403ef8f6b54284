#include "frameexit/engine.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace frameexit {

namespace {

double affine_flops(int in_dim, int out_dim) { return 2.0 * in_dim * out_dim; }

int argmax_index(std::span<const double> values) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(values.size()); ++i) {
        // ties break to the lowest index
        if (values[static_cast<std::size_t>(i)] > values[static_cast<std::size_t>(best)]) best = i;
    }
    return best;
}

bool is_correct(std::span<const double> prediction, const LabelSpec& label) {
    return label.contains(argmax_index(prediction));
}

void check_compatible(const CascadeModel& model, const VideoFeatures& video) {
    if (video.dim != model.dims.d) {
        throw std::invalid_argument("infer: video '" + video.video_id + "' has dim " +
                                    std::to_string(video.dim) + ", model expects " +
                                    std::to_string(model.dims.d));
    }
}

}  // namespace

StepCosts derived_step_costs(const ModelDims& dims) {
    StepCosts costs;
    costs.stream = affine_flops(dims.d, kGateHidden) + affine_flops(kGateHidden, kGateHidden);
    costs.merge = affine_flops(2 * kGateHidden, 1);
    costs.gate_first = costs.stream + costs.merge;
    costs.gate_later = 2.0 * costs.stream + costs.merge;
    costs.pool_update = static_cast<double>(dims.d);
    costs.classify = affine_flops(dims.d, dims.h) + affine_flops(dims.h, dims.c);
    return costs;
}

double exit_flops(const CostModel& cost, const ModelDims& dims, int exit_timestep) {
    double total = cost.backbone_flops_per_frame * exit_timestep;
    if (cost.include_head_gate_cost) {
        const StepCosts step = derived_step_costs(dims);
        total += step.gate_first + (exit_timestep - 1) * step.gate_later;
        total += (exit_timestep - 1) * step.pool_update;
        total += step.classify;
    }
    return total;
}

double fixed_budget_flops(const CostModel& cost, const ModelDims& dims, int k) {
    double total = cost.backbone_flops_per_frame * k;
    if (cost.include_head_gate_cost) {
        const StepCosts step = derived_step_costs(dims);
        total += (k - 1) * step.pool_update + step.classify;
    }
    return total;
}

double prediction_pooling_flops(const CostModel& cost, const ModelDims& dims, int exit_timestep) {
    double total = cost.backbone_flops_per_frame * exit_timestep;
    if (cost.include_head_gate_cost) {
        const StepCosts step = derived_step_costs(dims);
        total += step.gate_first + (exit_timestep - 1) * step.gate_later;
        total += exit_timestep * step.classify;
    }
    return total;
}

ExitTrace infer(const CascadeModel& model, const VideoFeatures& video, const InferOptions& opts) {
    check_compatible(model, video);
    if (model.per_frame) {
        throw std::invalid_argument(
            "infer: per-frame checkpoint requires prediction-pooling inference");
    }
    const SampleOrder order = sample_order(video.n_frames, opts.policy.value_or(model.policy));
    const PoolKind pooling = opts.pooling.value_or(model.pooling);
    const int t_eff = std::min(model.timesteps, video.n_frames);

    ExitTrace trace;
    trace.video_id = video.video_id;
    trace.label = video.label;

    PooledState state;
    std::vector<double> z_prev;
    for (int t = 1; t <= t_eff; ++t) {
        const int frame_index = order.order[static_cast<std::size_t>(t - 1)];
        trace.frame_indices_used.push_back(frame_index);
        const auto frame = video.frame(frame_index - 1);
        if (t == 1) {
            state = pool_init(frame, pooling);
        } else {
            z_prev = state.value;
            state = pool_update(state, frame);
        }

        const GateNet& gate = model.gates[static_cast<std::size_t>(t - 1)];
        const double score =
            t == 1 ? gate_score(gate, std::nullopt, state.value)
                   : gate_score(gate, std::span<const double>{z_prev}, state.value);
        trace.gate_scores.push_back(score);

        if (score >= opts.threshold || t == t_eff) {
            trace.exit_timestep = t;
            trace.prediction = classify(model, t, state.value);
            break;
        }
    }
    trace.correct = is_correct(trace.prediction, video.label);
    trace.flops = exit_flops(opts.cost, model.dims, trace.exit_timestep);
    return trace;
}

ExitTrace infer_fixed_budget(const CascadeModel& model, const VideoFeatures& video, int k,
                             const InferOptions& opts) {
    check_compatible(model, video);
    if (model.per_frame) {
        throw std::invalid_argument(
            "infer_fixed_budget: per-frame checkpoint requires prediction-pooling inference");
    }
    const int t_eff = std::min(model.timesteps, video.n_frames);
    if (k < 1 || k > t_eff) {
        throw std::invalid_argument("infer_fixed_budget: k out of range [1, T_eff]");
    }
    const SampleOrder order = sample_order(video.n_frames, opts.policy.value_or(model.policy));
    const PoolKind pooling = opts.pooling.value_or(model.pooling);

    ExitTrace trace;
    trace.video_id = video.video_id;
    trace.label = video.label;

    PooledState state;
    for (int t = 1; t <= k; ++t) {
        const int frame_index = order.order[static_cast<std::size_t>(t - 1)];
        trace.frame_indices_used.push_back(frame_index);
        const auto frame = video.frame(frame_index - 1);
        state = t == 1 ? pool_init(frame, pooling) : pool_update(state, frame);
    }
    trace.exit_timestep = k;
    trace.prediction = classify(model, k, state.value);
    trace.correct = is_correct(trace.prediction, video.label);
    trace.flops = fixed_budget_flops(opts.cost, model.dims, k);
    return trace;
}

ExitTrace infer_prediction_pooling(const CascadeModel& model, const VideoFeatures& video,
                                   const InferOptions& opts) {
    check_compatible(model, video);
    if (!model.per_frame) {
        throw std::invalid_argument(
            "infer_prediction_pooling: feature-pooled checkpoint requires standard inference");
    }
    const SampleOrder order = sample_order(video.n_frames, opts.policy.value_or(model.policy));
    const int t_eff = std::min(model.timesteps, video.n_frames);

    ExitTrace trace;
    trace.video_id = video.video_id;
    trace.label = video.label;

    std::vector<double> prob_sum(static_cast<std::size_t>(model.dims.c), 0.0);
    std::vector<double> z_prev;
    std::vector<double> z_cur;
    for (int t = 1; t <= t_eff; ++t) {
        const int frame_index = order.order[static_cast<std::size_t>(t - 1)];
        trace.frame_indices_used.push_back(frame_index);
        const auto frame = video.frame(frame_index - 1);
        z_prev = std::move(z_cur);
        z_cur.assign(frame.begin(), frame.end());

        const auto logits = classify(model, t, z_cur);
        if (model.loss == LossVariant::CrossEntropy) {
            const auto probs = softmax(logits);
            for (std::size_t i = 0; i < probs.size(); ++i) prob_sum[i] += probs[i];
        } else {
            for (std::size_t i = 0; i < logits.size(); ++i) prob_sum[i] += sigmoid(logits[i]);
        }

        const GateNet& gate = model.gates[static_cast<std::size_t>(t - 1)];
        const double score =
            t == 1 ? gate_score(gate, std::nullopt, z_cur)
                   : gate_score(gate, std::span<const double>{z_prev}, z_cur);
        trace.gate_scores.push_back(score);

        if (score >= opts.threshold || t == t_eff) {
            trace.exit_timestep = t;
            trace.prediction.resize(prob_sum.size());
            for (std::size_t i = 0; i < prob_sum.size(); ++i) {
                trace.prediction[i] = prob_sum[i] / static_cast<double>(t);
            }
            break;
        }
    }
    trace.correct = is_correct(trace.prediction, video.label);
    trace.flops = prediction_pooling_flops(opts.cost, model.dims, trace.exit_timestep);
    return trace;
}

std::vector<std::vector<double>> classify_all_timesteps(const CascadeModel& model,
                                                        const VideoFeatures& video,
                                                        const InferOptions& opts) {
    check_compatible(model, video);
    const SampleOrder order = sample_order(video.n_frames, opts.policy.value_or(model.policy));
    const PoolKind pooling = opts.pooling.value_or(model.pooling);
    const int t_eff = std::min(model.timesteps, video.n_frames);
    std::vector<std::vector<double>> logits;
    logits.reserve(static_cast<std::size_t>(t_eff));
    PooledState state;
    std::vector<double> z_cur;
    for (int t = 1; t <= t_eff; ++t) {
        const auto frame = video.frame(order.order[static_cast<std::size_t>(t - 1)] - 1);
        if (model.per_frame) {
            z_cur.assign(frame.begin(), frame.end());
        } else {
            state = t == 1 ? pool_init(frame, pooling) : pool_update(state, frame);
            z_cur = state.value;
        }
        logits.push_back(classify(model, t, z_cur));
    }
    return logits;
}

std::vector<ExitTrace> infer_all(const CascadeModel& model,
                                 const std::vector<VideoFeatures>& videos,
                                 const InferOptions& opts) {
    std::vector<ExitTrace> traces;
    traces.reserve(videos.size());
    for (const auto& video : videos) {
        traces.push_back(model.per_frame ? infer_prediction_pooling(model, video, opts)
                                         : infer(model, video, opts));
    }
    return traces;
}

std::string trace_to_json(const ExitTrace& trace) {
    nlohmann::json record{
        {"video_id", trace.video_id},
        {"exit_timestep", trace.exit_timestep},
        {"gate_scores", trace.gate_scores},
        {"prediction", trace.prediction},
        {"correct", trace.correct},
        {"flops", trace.flops},
        {"frame_indices_used", trace.frame_indices_used},
        {"label", trace.label.to_string()},
    };
    return record.dump();
}

}  // namespace frameexit
