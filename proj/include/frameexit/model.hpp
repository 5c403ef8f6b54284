#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "frameexit/aggregator.hpp"
#include "frameexit/dataset.hpp"
#include "frameexit/losses.hpp"
#include "frameexit/sampler.hpp"

namespace frameexit {

struct AffineLayer {
    int in_dim = 0;
    int out_dim = 0;
    std::vector<double> w;  // out_dim x in_dim, row-major
    std::vector<double> b;  // out_dim
};

// y = W x + b
void affine_forward(const AffineLayer& layer, std::span<const double> x, std::span<double> y);

inline constexpr int kGateHidden = 64;

// Exit gate g_t: each of z_{t-1} and z_t passes through the same two-layer
// ReLU stream (D -> 64 -> 64); the stream outputs are concatenated and
// linearly projected to a scalar, then squashed by a sigmoid. For t = 1 the
// z_{t-1} half of the merge input is zero.
struct GateNet {
    int timestep = 0;      // 1-based
    AffineLayer stream1;   // D -> 64, shared between the two streams
    AffineLayer stream2;   // 64 -> 64
    AffineLayer merge;     // 128 -> 1
};

struct ModelDims {
    int d = 0;  // feature dim
    int h = 0;  // classifier hidden width
    int c = 0;  // categories
};

// T classifier heads sharing one D -> H projection, plus T gate networks.
struct CascadeModel {
    int timesteps = 0;  // T
    ModelDims dims;
    PoolKind pooling = PoolKind::Max;
    Policy policy;
    LossVariant loss = LossVariant::CrossEntropy;
    bool per_frame = false;  // heads trained on single-frame features
    std::uint64_t init_seed = 0;
    std::string stage = "init";  // init | stage1 | stage2 | joint

    AffineLayer projection;          // D -> H
    std::vector<AffineLayer> heads;  // T of H -> C
    std::vector<GateNet> gates;      // T
};

// Seeded init: weights uniform in [-a, a] with a = sqrt(6/(in+out)), biases
// zero.
CascadeModel make_model(int timesteps, ModelDims dims, PoolKind pooling, Policy policy,
                        LossVariant loss, bool per_frame, std::uint64_t seed);

// logits = head_t(ReLU(projection(z))); timestep is 1-based.
std::vector<double> classify(const CascadeModel& model, int timestep, std::span<const double> z);

// Gate score in (0, 1). z_prev must be absent exactly when gate.timestep == 1.
double gate_score(const GateNet& gate, std::optional<std::span<const double>> z_prev,
                  std::span<const double> z_cur);

// --- parameter access -------------------------------------------------------

enum class ParamGroup { Projection, Head, Gate };

struct ParamBlock {
    std::string name;   // e.g. "heads[3].w", "gates[1].stream2.b"
    ParamGroup group;
    std::span<double> values;
};

// Canonical block order: projection.{w,b}, heads[1..T].{w,b},
// gates[1..T].{stream1.w, stream1.b, stream2.w, stream2.b, merge.w, merge.b}.
// Checkpoint payloads, optimizer state, and gradient blocks all follow it.
std::vector<ParamBlock> parameter_blocks(CascadeModel& model);

std::size_t param_count(const CascadeModel& model);
std::size_t gate_param_count(const ModelDims& dims);

// --- gradients --------------------------------------------------------------

struct Gradients {
    std::vector<std::vector<double>> blocks;  // parallel to parameter_blocks order

    static Gradients zeros_like(CascadeModel& model);
    void set_zero();
};

// One training sample as seen by the model: the pooled representation at
// every timestep (T_eff entries of dim D) plus the label.
struct TrainSample {
    std::vector<std::vector<double>> z_seq;
    LabelSpec label;
};

enum class LossStage { Stage1Classifier, Stage2Gate, Joint };

struct LossSpec {
    LossStage stage = LossStage::Stage1Classifier;
    LossVariant variant = LossVariant::CrossEntropy;
    double beta = 1e-4;  // pseudo-label threshold scale, stage 2 / joint
};

// Mean loss over the indexed samples; when grads is non-null it receives the
// exact analytic gradients of that mean. Stage 1 is the mean over timesteps
// of the classifier loss; stage 2 is the mean gate BCE against pseudo-labels
// derived from the (detached) classifier losses, so head/projection blocks
// come back identically zero. cached_cls_losses, when given, supplies the
// per-sample per-timestep classifier losses (valid while heads are frozen).
// Throws on non-finite intermediates, naming the parameter path.
double batch_loss_and_gradients(const CascadeModel& model,
                                const std::vector<TrainSample>& samples,
                                std::span<const int> indices, const LossSpec& spec,
                                const std::vector<std::vector<double>>* cached_cls_losses,
                                Gradients* grads);

// --- checkpoints ------------------------------------------------------------

// Single file: one JSON manifest line (dims, T, pooling, policy, loss,
// per-frame flag, seed, stage, param_count), then the parameters as
// little-endian f64 in canonical block order.
void save_checkpoint(const CascadeModel& model, const std::filesystem::path& path);
CascadeModel load_checkpoint(const std::filesystem::path& path);

}  // namespace frameexit
