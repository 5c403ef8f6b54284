#include <doctest.h>

#include <cmath>

#include "frameexit/engine.hpp"
#include "frameexit/rng.hpp"

using namespace frameexit;

namespace {

CascadeModel gated_model(int timesteps, int d, int h, int c, std::uint64_t seed) {
    return make_model(timesteps, ModelDims{d, h, c}, PoolKind::Max, Policy::coarse_to_fine(),
                      LossVariant::CrossEntropy, false, seed);
}

// force every gate to emit the same logit by zeroing weights and setting the
// merge bias
void force_gates(CascadeModel& model, double merge_bias) {
    for (auto& gate : model.gates) {
        std::fill(gate.merge.w.begin(), gate.merge.w.end(), 0.0);
        gate.merge.b[0] = merge_bias;
    }
}

VideoFeatures random_video(int n_frames, int dim, std::uint64_t seed, int category = 0) {
    DetRng rng(seed);
    VideoFeatures video;
    video.video_id = "vid" + std::to_string(seed);
    video.n_frames = n_frames;
    video.dim = dim;
    video.label = LabelSpec::single(category);
    video.data.resize(static_cast<std::size_t>(n_frames) * static_cast<std::size_t>(dim));
    for (auto& x : video.data) x = rng.normal();
    return video;
}

}  // namespace

TEST_CASE("gates forced open exit at t = 1 with one frame of cost") {
    auto model = gated_model(5, 8, 8, 3, 1);
    force_gates(model, 40.0);  // sigmoid(40) ~ 1
    const auto video = random_video(20, 8, 2);
    InferOptions opts;
    opts.cost.backbone_flops_per_frame = 1e9;
    opts.cost.include_head_gate_cost = false;
    const auto trace = infer(model, video, opts);
    CHECK(trace.exit_timestep == 1);
    CHECK(trace.gate_scores.size() == 1);
    CHECK(trace.flops == 1e9);
    CHECK(trace.frame_indices_used == std::vector<int>{10});  // middle frame first
}

TEST_CASE("gates forced closed run to T_eff and use the last classifier") {
    auto model = gated_model(5, 8, 8, 3, 3);
    force_gates(model, -40.0);
    const auto video = random_video(20, 8, 4);
    const auto trace = infer(model, video, InferOptions{});
    CHECK(trace.exit_timestep == 5);
    CHECK(trace.gate_scores.size() == 5);
    for (double s : trace.gate_scores) CHECK(s < 0.5);
    // the prediction is f_T_eff(z_T_eff): compare against direct classification
    const auto all = classify_all_timesteps(model, video);
    CHECK(trace.prediction == all.back());
}

TEST_CASE("no-exit run at the ResNet-50 convention totals 41.2 GFLOPs") {
    auto model = gated_model(10, 64, 256, 10, 5);
    force_gates(model, -40.0);
    const auto video = random_video(30, 64, 6);
    InferOptions opts;
    opts.cost.backbone_flops_per_frame = 4.12e9;
    opts.cost.include_head_gate_cost = false;
    const auto trace = infer(model, video, opts);
    CHECK(trace.exit_timestep == 10);
    CHECK(trace.flops == 41.2e9);
}

TEST_CASE("cost additivity against hand-computed totals (D=64, H=256, C=10)") {
    // stream  = 2*64*64 + 2*64*64           = 16384
    // merge   = 2*128*1                     = 256
    // gate1   = 16640, gate_t>=2 = 33024
    // pool    = 64 per step after the first
    // classify= 2*64*256 + 2*256*10         = 37888
    const ModelDims dims{64, 256, 10};
    CostModel cost;
    cost.backbone_flops_per_frame = 4.12e9;
    cost.include_head_gate_cost = true;

    const StepCosts step = derived_step_costs(dims);
    CHECK(step.stream == 16384.0);
    CHECK(step.merge == 256.0);
    CHECK(step.gate_first == 16640.0);
    CHECK(step.gate_later == 33024.0);
    CHECK(step.pool_update == 64.0);
    CHECK(step.classify == 37888.0);

    CHECK(exit_flops(cost, dims, 1) == 4120054528.0);
    CHECK(exit_flops(cost, dims, 5) == 20600186880.0);
    CHECK(exit_flops(cost, dims, 10) == 41200352320.0);

    cost.include_head_gate_cost = false;
    CHECK(exit_flops(cost, dims, 10) == 41.2e9);
}

TEST_CASE("gate cost is far below 5% of a backbone frame") {
    const StepCosts step = derived_step_costs(ModelDims{64, 256, 10});
    CHECK(step.gate_later < 0.05 * 4.12e9);
}

TEST_CASE("exit minimality: scores before the exit stay under the threshold") {
    auto model = gated_model(6, 8, 8, 3, 7);
    const auto video = random_video(24, 8, 8);
    const auto trace = infer(model, video, InferOptions{});
    for (std::size_t i = 0; i + 1 < trace.gate_scores.size(); ++i) {
        CHECK(trace.gate_scores[i] < 0.5);
    }
}

TEST_CASE("raising the threshold never lowers the exit timestep") {
    auto model = gated_model(6, 8, 8, 3, 9);
    for (std::uint64_t seed = 20; seed < 40; ++seed) {
        const auto video = random_video(24, 8, seed);
        InferOptions low;
        low.threshold = 0.3;
        InferOptions high;
        high.threshold = 0.7;
        CHECK(infer(model, video, high).exit_timestep >= infer(model, video, low).exit_timestep);
    }
}

TEST_CASE("short videos cap at T_eff = N and never index past frame N") {
    auto model = gated_model(10, 8, 8, 3, 11);
    force_gates(model, -40.0);
    const auto video = random_video(4, 8, 12);
    const auto trace = infer(model, video, InferOptions{});
    CHECK(trace.exit_timestep == 4);
    for (int idx : trace.frame_indices_used) {
        CHECK(idx >= 1);
        CHECK(idx <= 4);
    }
}

TEST_CASE("fixed budget matches the gates-closed run at k = T_eff") {
    auto model = gated_model(5, 8, 8, 3, 13);
    const auto video = random_video(20, 8, 14);
    InferOptions opts;
    force_gates(model, -40.0);
    const auto gated = infer(model, video, opts);
    const auto fixed = infer_fixed_budget(model, video, 5, opts);
    CHECK(fixed.prediction == gated.prediction);
    CHECK(fixed.exit_timestep == 5);
    CHECK_THROWS_AS(infer_fixed_budget(model, video, 0, opts), std::invalid_argument);
    CHECK_THROWS_AS(infer_fixed_budget(model, video, 6, opts), std::invalid_argument);
}

TEST_CASE("fixed-budget cost is linear in k") {
    const ModelDims dims{64, 256, 10};
    CostModel cost;
    cost.backbone_flops_per_frame = 4.12e9;
    cost.include_head_gate_cost = true;
    const StepCosts step = derived_step_costs(dims);
    CHECK(fixed_budget_flops(cost, dims, 6) - fixed_budget_flops(cost, dims, 3) ==
          3.0 * (cost.backbone_flops_per_frame + step.pool_update));
    cost.include_head_gate_cost = false;
    CHECK(fixed_budget_flops(cost, dims, 6) - fixed_budget_flops(cost, dims, 3) ==
          3.0 * cost.backbone_flops_per_frame);
}

TEST_CASE("fixed budget k = 1 classifies the policy's first frame with f_1") {
    auto model = gated_model(5, 8, 8, 3, 15);
    const auto video = random_video(21, 8, 16);
    const auto trace = infer_fixed_budget(model, video, 1, InferOptions{});
    CHECK(trace.exit_timestep == 1);
    CHECK(trace.frame_indices_used == std::vector<int>{11});  // middle of 21
    const auto direct = classify(model, 1, video.frame(10));
    CHECK(trace.prediction == direct);
}

TEST_CASE("prediction pooling averages per-step probabilities") {
    auto model = make_model(2, ModelDims{2, 2, 2}, PoolKind::Max, Policy::sequential(),
                            LossVariant::CrossEntropy, true, 17);
    // zero everything, then craft head logits so softmaxes are [0.9, 0.1] and [0.5, 0.5]
    for (auto& block : parameter_blocks(model)) {
        std::fill(block.values.begin(), block.values.end(), 0.0);
    }
    model.projection.w = {1.0, 0.0, 0.0, 1.0};
    const double margin = std::log(9.0);  // softmax([m, 0]) = [0.9, 0.1]
    model.heads[0].w = {margin, 0.0, 0.0, 0.0};
    model.heads[1].w = {0.0, 0.0, 0.0, 0.0};
    VideoFeatures video;
    video.video_id = "toy";
    video.n_frames = 2;
    video.dim = 2;
    video.label = LabelSpec::single(0);
    video.data = {1.0, 0.0, 1.0, 0.0};  // frame_1 = frame_2 = e_0
    InferOptions opts;
    opts.threshold = 2.0;  // unreachable: never exit early
    const auto trace = infer_prediction_pooling(model, video, opts);
    CHECK(trace.exit_timestep == 2);
    CHECK(trace.prediction[0] == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(trace.prediction[1] == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("prediction pooling with T = 1 or identical steps degenerates to one softmax") {
    auto model = make_model(1, ModelDims{4, 4, 3}, PoolKind::Max, Policy::sequential(),
                            LossVariant::CrossEntropy, true, 18);
    const auto video = random_video(1, 4, 19);
    const auto trace = infer_prediction_pooling(model, video, InferOptions{});
    const auto probs = softmax(classify(model, 1, video.frame(0)));
    for (std::size_t i = 0; i < probs.size(); ++i) {
        CHECK(trace.prediction[i] == doctest::Approx(probs[i]).epsilon(1e-12));
    }
}

TEST_CASE("pooled and per-frame checkpoints are mutually exclusive at inference") {
    auto pooled = gated_model(3, 4, 4, 2, 20);
    auto per_frame = make_model(3, ModelDims{4, 4, 2}, PoolKind::Max, Policy::coarse_to_fine(),
                                LossVariant::CrossEntropy, true, 21);
    const auto video = random_video(9, 4, 22);
    CHECK_THROWS_AS(infer_prediction_pooling(pooled, video, InferOptions{}), std::invalid_argument);
    CHECK_THROWS_AS(infer(per_frame, video, InferOptions{}), std::invalid_argument);
}

TEST_CASE("evaluation-time policy override changes the sampled frames") {
    auto model = gated_model(3, 4, 4, 2, 25);
    force_gates(model, -40.0);
    const auto video = random_video(9, 4, 26);
    InferOptions coarse;  // model default: coarse-to-fine
    const auto default_trace = infer(model, video, coarse);
    CHECK(default_trace.frame_indices_used == std::vector<int>{5, 1, 9});
    InferOptions sequential;
    sequential.policy = Policy::sequential();
    const auto overridden = infer(model, video, sequential);
    CHECK(overridden.frame_indices_used == std::vector<int>{1, 2, 3});
}

TEST_CASE("dimension mismatch between model and features is rejected") {
    auto model = gated_model(3, 4, 4, 2, 23);
    const auto video = random_video(9, 5, 24);
    CHECK_THROWS_AS(infer(model, video, InferOptions{}), std::invalid_argument);
}
