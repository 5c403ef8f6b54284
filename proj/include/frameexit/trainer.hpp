#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "frameexit/model.hpp"

namespace frameexit {

struct TrainConfig {
    int timesteps = 10;        // T
    int hidden = 256;          // classifier hidden width H
    int n_categories = 0;      // 0 = infer from the training labels
    double beta = 1e-4;        // accuracy/compute trade-off
    double learning_rate = 1e-4;
    int stage1_epochs = 35;
    std::vector<int> stage1_decay_epochs = {16, 30};  // lr x0.1 after each
    int stage2_epochs = 10;
    std::vector<int> stage2_decay_epochs = {5, 8};
    int batch_size = 64;
    std::uint64_t seed = 7;
    PoolKind pooling = PoolKind::Max;
    Policy policy = Policy::coarse_to_fine();
    LossVariant loss = LossVariant::CrossEntropy;
    bool per_frame = false;    // train heads on single-frame features
    bool joint = false;        // single-stage joint objective instead of two stages
};

struct EpochLog {
    int epoch = 0;
    std::string stage;
    double loss = 0.0;
    double lr = 0.0;

    std::string line() const;  // "epoch,stage,loss,lr"
};

struct TrainResult {
    CascadeModel model;
    std::vector<EpochLog> logs;
    // fraction of pseudo-label 1s per timestep over the training set,
    // measured against the frozen stage-1 classifiers (empty before stage 2)
    std::vector<double> pseudo_positive_rate;
};

// Pooled representations z_1..z_T_eff for one video under (policy, pooling),
// T_eff = min(T, N). In per-frame mode each entry is the sampled frame's raw
// feature instead.
TrainSample make_train_sample(const VideoFeatures& video, const Policy& policy, PoolKind pooling,
                              int timesteps, bool per_frame);

std::vector<TrainSample> make_train_samples(const std::vector<VideoFeatures>& videos,
                                            const TrainConfig& config);

// Adaptive-moment optimizer over canonical parameter blocks; decay 0.9/0.999,
// stabilizer 1e-8, no weight decay. A block whose gradient is exactly zero is
// skipped outright (no moment or step update), so zero gradients are an exact
// no-op.
class AdamOptimizer {
public:
    explicit AdamOptimizer(double learning_rate) : lr_(learning_rate) {}

    void set_learning_rate(double lr) { lr_ = lr; }
    double learning_rate() const { return lr_; }

    void step(std::span<ParamBlock> params, const Gradients& grads,
              std::span<const std::size_t> block_indices);

private:
    struct BlockState {
        std::vector<double> m, v;
        long steps = 0;
    };
    double lr_;
    std::vector<BlockState> state_;  // lazily sized to the block list
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Stage 1: optimize projection + heads with the classifier loss.
TrainResult train_stage1(const std::vector<VideoFeatures>& train_set, const TrainConfig& config,
                         const EpochCallback& on_epoch = {});

// Stage 2: freeze projection + heads, train gates against pseudo-labels
// recomputed from the frozen classifiers. Head/projection parameters are
// bit-identical before and after.
TrainResult train_gates(const CascadeModel& stage1_model,
                        const std::vector<VideoFeatures>& train_set, const TrainConfig& config,
                        const EpochCallback& on_epoch = {});

// Both stages (or a single joint stage when config.joint is set).
TrainResult train(const std::vector<VideoFeatures>& train_set, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

// Mean classifier + gate loss of the current model over a sample set
// (equal-weight sum of the two terms).
double total_loss(const CascadeModel& model, const std::vector<TrainSample>& samples, double beta);

// Per-timestep fraction of pseudo-label 1s under the model's (frozen)
// classifiers; the sweep logs this per beta.
std::vector<double> pseudo_label_positive_rate(const CascadeModel& model,
                                               const std::vector<TrainSample>& samples,
                                               double beta);

}  // namespace frameexit
