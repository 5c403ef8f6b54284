#include "frameexit/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "frameexit/rng.hpp"

namespace frameexit {

std::string EpochLog::line() const {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%d,%s,%.17g,%g", epoch, stage.c_str(), loss, lr);
    return buf;
}

TrainSample make_train_sample(const VideoFeatures& video, const Policy& policy, PoolKind pooling,
                              int timesteps, bool per_frame) {
    const SampleOrder order = sample_order(video.n_frames, policy);
    const int t_eff = std::min(timesteps, video.n_frames);
    TrainSample sample;
    sample.label = video.label;
    sample.z_seq.reserve(static_cast<std::size_t>(t_eff));
    PooledState state;
    for (int t = 1; t <= t_eff; ++t) {
        const auto frame = video.frame(order.order[static_cast<std::size_t>(t - 1)] - 1);
        if (per_frame) {
            sample.z_seq.emplace_back(frame.begin(), frame.end());
            continue;
        }
        state = t == 1 ? pool_init(frame, pooling) : pool_update(state, frame);
        sample.z_seq.push_back(state.value);
    }
    return sample;
}

std::vector<TrainSample> make_train_samples(const std::vector<VideoFeatures>& videos,
                                            const TrainConfig& config) {
    std::vector<TrainSample> samples;
    samples.reserve(videos.size());
    for (const auto& video : videos) {
        samples.push_back(
            make_train_sample(video, config.policy, config.pooling, config.timesteps, config.per_frame));
    }
    return samples;
}

void AdamOptimizer::step(std::span<ParamBlock> params, const Gradients& grads,
                         std::span<const std::size_t> block_indices) {
    if (state_.empty()) state_.resize(params.size());
    constexpr double kBeta1 = 0.9;
    constexpr double kBeta2 = 0.999;
    constexpr double kEps = 1e-8;
    for (const std::size_t bi : block_indices) {
        const auto& g = grads.blocks[bi];
        const bool all_zero = std::all_of(g.begin(), g.end(), [](double x) { return x == 0.0; });
        if (all_zero) continue;
        BlockState& st = state_[bi];
        if (st.m.empty()) {
            st.m.assign(g.size(), 0.0);
            st.v.assign(g.size(), 0.0);
        }
        st.steps += 1;
        const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(st.steps));
        const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(st.steps));
        auto values = params[bi].values;
        for (std::size_t i = 0; i < g.size(); ++i) {
            st.m[i] = kBeta1 * st.m[i] + (1.0 - kBeta1) * g[i];
            st.v[i] = kBeta2 * st.v[i] + (1.0 - kBeta2) * g[i] * g[i];
            values[i] -= lr_ * (st.m[i] / c1) / (std::sqrt(st.v[i] / c2) + kEps);
        }
    }
}

namespace {

double decayed_lr(double base, int epoch, const std::vector<int>& decay_epochs) {
    double lr = base;
    for (int d : decay_epochs) {
        if (epoch > d) lr *= 0.1;
    }
    return lr;
}

std::vector<std::size_t> block_indices_for(CascadeModel& model, bool projection_heads, bool gates) {
    std::vector<std::size_t> out;
    const auto blocks = parameter_blocks(model);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const bool is_gate = blocks[i].group == ParamGroup::Gate;
        if ((is_gate && gates) || (!is_gate && projection_heads)) out.push_back(i);
    }
    return out;
}

// per-sample per-timestep classifier losses under the current heads
std::vector<std::vector<double>> classifier_loss_table(const CascadeModel& model,
                                                       const std::vector<TrainSample>& samples,
                                                       LossVariant variant) {
    std::vector<std::vector<double>> table(samples.size());
    for (std::size_t s = 0; s < samples.size(); ++s) {
        const auto& sample = samples[s];
        table[s].resize(sample.z_seq.size());
        for (std::size_t t = 0; t < sample.z_seq.size(); ++t) {
            const auto logits = classify(model, static_cast<int>(t) + 1, sample.z_seq[t]);
            table[s][t] = classifier_loss(logits, sample.label, variant);
        }
    }
    return table;
}

struct StageSpec {
    std::string name;
    LossStage stage;
    int epochs;
    std::vector<int> decay_epochs;
    bool update_projection_heads;
    bool update_gates;
};

void run_stage(CascadeModel& model, const std::vector<TrainSample>& samples,
               const TrainConfig& config, const StageSpec& stage_spec,
               const std::vector<std::vector<double>>* cached_cls_losses,
               std::vector<EpochLog>& logs, const EpochCallback& on_epoch) {
    auto params = parameter_blocks(model);
    const auto updated =
        block_indices_for(model, stage_spec.update_projection_heads, stage_spec.update_gates);
    AdamOptimizer optimizer(config.learning_rate);
    Gradients grads = Gradients::zeros_like(model);
    const LossSpec loss_spec{stage_spec.stage, config.loss, config.beta};

    std::vector<int> order(samples.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 1; epoch <= stage_spec.epochs; ++epoch) {
        const double lr = decayed_lr(config.learning_rate, epoch, stage_spec.decay_epochs);
        optimizer.set_learning_rate(lr);

        DetRng shuffle_rng(derive_seed(config.seed, static_cast<std::uint64_t>(epoch),
                                       stage_spec.stage == LossStage::Stage1Classifier ? 1 : 2));
        shuffle_rng.shuffle(order);

        double epoch_loss = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            const std::span<const int> batch{order.data() + start, end - start};
            double batch_loss;
            try {
                batch_loss =
                    batch_loss_and_gradients(model, samples, batch, loss_spec, cached_cls_losses, &grads);
            } catch (const std::runtime_error& e) {
                throw std::runtime_error("training diverged at stage " + stage_spec.name + " epoch " +
                                         std::to_string(epoch) + ": " + e.what());
            }
            optimizer.step(params, grads, updated);
            epoch_loss += batch_loss * static_cast<double>(batch.size());
            seen += batch.size();
        }

        EpochLog log{epoch, stage_spec.name, epoch_loss / static_cast<double>(seen), lr};
        logs.push_back(log);
        if (on_epoch) on_epoch(log);
    }
}

}  // namespace

TrainResult train_stage1(const std::vector<VideoFeatures>& train_set, const TrainConfig& config,
                         const EpochCallback& on_epoch) {
    if (train_set.empty()) throw std::invalid_argument("train: empty training set");
    if (config.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
    if (!(config.learning_rate > 0.0)) throw std::invalid_argument("train: learning_rate must be > 0");
    if (!(config.beta > 0.0)) throw std::invalid_argument("train: beta must be > 0");
    if (config.stage1_epochs < 1 || config.stage2_epochs < 1) {
        throw std::invalid_argument("train: epochs must be >= 1");
    }

    const int dim = train_set.front().dim;
    const int c = config.n_categories > 0 ? config.n_categories : detect_categories(train_set);
    TrainResult result;
    result.model = make_model(config.timesteps, ModelDims{dim, config.hidden, c}, config.pooling,
                              config.policy, config.loss, config.per_frame, config.seed);
    const auto samples = make_train_samples(train_set, config);
    StageSpec spec{"stage1", LossStage::Stage1Classifier, config.stage1_epochs,
                   config.stage1_decay_epochs, true, false};
    run_stage(result.model, samples, config, spec, nullptr, result.logs, on_epoch);
    result.model.stage = "stage1";
    return result;
}

TrainResult train_gates(const CascadeModel& stage1_model,
                        const std::vector<VideoFeatures>& train_set, const TrainConfig& config,
                        const EpochCallback& on_epoch) {
    if (train_set.empty()) throw std::invalid_argument("train: empty training set");
    TrainResult result;
    result.model = stage1_model;
    const auto samples = make_train_samples(train_set, config);
    // Heads are frozen for the whole stage, so the per-step pseudo-label
    // recomputation reduces to a fixed per-sample loss table.
    const auto cls_losses = classifier_loss_table(result.model, samples, config.loss);
    StageSpec spec{"stage2", LossStage::Stage2Gate, config.stage2_epochs, config.stage2_decay_epochs,
                   false, true};
    run_stage(result.model, samples, config, spec, &cls_losses, result.logs, on_epoch);
    result.model.stage = "stage2";

    result.pseudo_positive_rate.assign(static_cast<std::size_t>(config.timesteps), 0.0);
    std::vector<std::size_t> counts(static_cast<std::size_t>(config.timesteps), 0);
    for (const auto& row : cls_losses) {
        for (std::size_t t = 0; t < row.size(); ++t) {
            counts[t] += 1;
            if (row[t] <= epsilon_schedule(config.beta, static_cast<int>(t) + 1)) {
                result.pseudo_positive_rate[t] += 1.0;
            }
        }
    }
    for (std::size_t t = 0; t < counts.size(); ++t) {
        if (counts[t] > 0) result.pseudo_positive_rate[t] /= static_cast<double>(counts[t]);
    }
    return result;
}

TrainResult train(const std::vector<VideoFeatures>& train_set, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
    if (config.joint) {
        if (train_set.empty()) throw std::invalid_argument("train: empty training set");
        const int dim = train_set.front().dim;
        const int c = config.n_categories > 0 ? config.n_categories : detect_categories(train_set);
        TrainResult result;
        result.model = make_model(config.timesteps, ModelDims{dim, config.hidden, c}, config.pooling,
                                  config.policy, config.loss, config.per_frame, config.seed);
        const auto samples = make_train_samples(train_set, config);
        StageSpec spec{"joint", LossStage::Joint, config.stage1_epochs, config.stage1_decay_epochs,
                       true, true};
        run_stage(result.model, samples, config, spec, nullptr, result.logs, on_epoch);
        result.model.stage = "joint";
        return result;
    }
    TrainResult stage1 = train_stage1(train_set, config, on_epoch);
    TrainResult stage2 = train_gates(stage1.model, train_set, config, on_epoch);
    stage2.logs.insert(stage2.logs.begin(), stage1.logs.begin(), stage1.logs.end());
    return stage2;
}

double total_loss(const CascadeModel& model, const std::vector<TrainSample>& samples, double beta) {
    std::vector<int> indices(samples.size());
    std::iota(indices.begin(), indices.end(), 0);
    const double cls = batch_loss_and_gradients(
        model, samples, indices, LossSpec{LossStage::Stage1Classifier, model.loss, beta}, nullptr,
        nullptr);
    const double gate = batch_loss_and_gradients(
        model, samples, indices, LossSpec{LossStage::Stage2Gate, model.loss, beta}, nullptr, nullptr);
    return cls + gate;
}

std::vector<double> pseudo_label_positive_rate(const CascadeModel& model,
                                               const std::vector<TrainSample>& samples,
                                               double beta) {
    const auto table = classifier_loss_table(model, samples, model.loss);
    std::vector<double> rate(static_cast<std::size_t>(model.timesteps), 0.0);
    std::vector<std::size_t> counts(static_cast<std::size_t>(model.timesteps), 0);
    for (const auto& row : table) {
        for (std::size_t t = 0; t < row.size(); ++t) {
            counts[t] += 1;
            if (row[t] <= epsilon_schedule(beta, static_cast<int>(t) + 1)) rate[t] += 1.0;
        }
    }
    for (std::size_t t = 0; t < counts.size(); ++t) {
        if (counts[t] > 0) rate[t] /= static_cast<double>(counts[t]);
    }
    return rate;
}

}  // namespace frameexit
