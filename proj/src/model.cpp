#include "frameexit/model.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "frameexit/bytes.hpp"
#include "frameexit/rng.hpp"

namespace frameexit {

namespace {

void check_finite(std::span<const double> values, const std::string& path) {
    for (double v : values) {
        if (!std::isfinite(v)) throw std::runtime_error("non-finite value at " + path);
    }
}

AffineLayer make_affine(int in_dim, int out_dim, DetRng& rng) {
    AffineLayer layer;
    layer.in_dim = in_dim;
    layer.out_dim = out_dim;
    layer.w.resize(static_cast<std::size_t>(in_dim) * static_cast<std::size_t>(out_dim));
    layer.b.assign(static_cast<std::size_t>(out_dim), 0.0);
    const double a = std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
    for (auto& x : layer.w) x = (2.0 * rng.uniform01() - 1.0) * a;
    return layer;
}

void relu_inplace(std::span<double> v) {
    for (auto& x : v) x = x > 0.0 ? x : 0.0;
}

}  // namespace

void affine_forward(const AffineLayer& layer, std::span<const double> x, std::span<double> y) {
    if (static_cast<int>(x.size()) != layer.in_dim || static_cast<int>(y.size()) != layer.out_dim) {
        throw std::invalid_argument("affine_forward: dimension mismatch");
    }
    const double* w = layer.w.data();
    for (int o = 0; o < layer.out_dim; ++o) {
        const double* row = w + static_cast<std::size_t>(o) * static_cast<std::size_t>(layer.in_dim);
        double acc = layer.b[static_cast<std::size_t>(o)];
        for (int i = 0; i < layer.in_dim; ++i) acc += row[i] * x[static_cast<std::size_t>(i)];
        y[static_cast<std::size_t>(o)] = acc;
    }
}

CascadeModel make_model(int timesteps, ModelDims dims, PoolKind pooling, Policy policy,
                        LossVariant loss, bool per_frame, std::uint64_t seed) {
    if (timesteps < 1) throw std::invalid_argument("make_model: timesteps must be >= 1");
    if (dims.d < 1 || dims.h < 1 || dims.c < 1) {
        throw std::invalid_argument("make_model: dims must be positive");
    }
    CascadeModel model;
    model.timesteps = timesteps;
    model.dims = dims;
    model.pooling = pooling;
    model.policy = policy;
    model.loss = loss;
    model.per_frame = per_frame;
    model.init_seed = seed;
    model.stage = "init";

    DetRng rng(derive_seed(seed, 0x6d6f64656cULL));
    model.projection = make_affine(dims.d, dims.h, rng);
    model.heads.reserve(static_cast<std::size_t>(timesteps));
    for (int t = 0; t < timesteps; ++t) model.heads.push_back(make_affine(dims.h, dims.c, rng));
    model.gates.reserve(static_cast<std::size_t>(timesteps));
    for (int t = 0; t < timesteps; ++t) {
        GateNet gate;
        gate.timestep = t + 1;
        gate.stream1 = make_affine(dims.d, kGateHidden, rng);
        gate.stream2 = make_affine(kGateHidden, kGateHidden, rng);
        gate.merge = make_affine(2 * kGateHidden, 1, rng);
        model.gates.push_back(std::move(gate));
    }
    return model;
}

std::vector<double> classify(const CascadeModel& model, int timestep, std::span<const double> z) {
    if (timestep < 1 || timestep > model.timesteps) {
        throw std::invalid_argument("classify: timestep out of range");
    }
    if (static_cast<int>(z.size()) != model.dims.d) {
        throw std::invalid_argument("classify: feature dim mismatch");
    }
    std::vector<double> hidden(static_cast<std::size_t>(model.dims.h));
    affine_forward(model.projection, z, hidden);
    check_finite(hidden, "projection");
    relu_inplace(hidden);
    std::vector<double> logits(static_cast<std::size_t>(model.dims.c));
    const auto& head = model.heads[static_cast<std::size_t>(timestep - 1)];
    affine_forward(head, hidden, logits);
    check_finite(logits, "heads[" + std::to_string(timestep) + "]");
    return logits;
}

namespace {

// intermediates of one gate stream evaluation, kept for the backward pass
struct StreamTrace {
    std::vector<double> pre1, act1, pre2, act2;
};

StreamTrace gate_stream(const GateNet& gate, std::span<const double> z, const std::string& path) {
    StreamTrace trace;
    trace.pre1.resize(static_cast<std::size_t>(kGateHidden));
    affine_forward(gate.stream1, z, trace.pre1);
    check_finite(trace.pre1, path + ".stream1");
    trace.act1 = trace.pre1;
    relu_inplace(trace.act1);
    trace.pre2.resize(static_cast<std::size_t>(kGateHidden));
    affine_forward(gate.stream2, trace.act1, trace.pre2);
    check_finite(trace.pre2, path + ".stream2");
    trace.act2 = trace.pre2;
    relu_inplace(trace.act2);
    return trace;
}

// pre-sigmoid merge output; traces returned for backprop
double gate_logit(const GateNet& gate, const double* z_prev, std::span<const double> z_cur,
                  StreamTrace* prev_trace, StreamTrace* cur_trace) {
    const std::string path = "gates[" + std::to_string(gate.timestep) + "]";
    const auto d = static_cast<std::size_t>(gate.stream1.in_dim);
    *cur_trace = gate_stream(gate, z_cur, path);
    std::vector<double> merged(static_cast<std::size_t>(2 * kGateHidden), 0.0);
    if (z_prev != nullptr) {
        *prev_trace = gate_stream(gate, {z_prev, d}, path);
        std::copy(prev_trace->act2.begin(), prev_trace->act2.end(), merged.begin());
    }
    std::copy(cur_trace->act2.begin(), cur_trace->act2.end(),
              merged.begin() + kGateHidden);
    double out = 0.0;
    affine_forward(gate.merge, merged, {&out, 1});
    if (!std::isfinite(out)) throw std::runtime_error("non-finite value at " + path + ".merge");
    return out;
}

}  // namespace

double gate_score(const GateNet& gate, std::optional<std::span<const double>> z_prev,
                  std::span<const double> z_cur) {
    if (gate.timestep == 1 && z_prev.has_value()) {
        throw std::invalid_argument("gate_score: z_prev supplied for t = 1");
    }
    if (gate.timestep > 1 && !z_prev.has_value()) {
        throw std::invalid_argument("gate_score: z_prev missing for t > 1");
    }
    if (static_cast<int>(z_cur.size()) != gate.stream1.in_dim ||
        (z_prev && static_cast<int>(z_prev->size()) != gate.stream1.in_dim)) {
        throw std::invalid_argument("gate_score: feature dim mismatch");
    }
    StreamTrace prev_trace, cur_trace;
    const double logit =
        gate_logit(gate, z_prev ? z_prev->data() : nullptr, z_cur, &prev_trace, &cur_trace);
    return sigmoid(logit);
}

// --- parameter access --------------------------------------------------------

std::vector<ParamBlock> parameter_blocks(CascadeModel& model) {
    std::vector<ParamBlock> blocks;
    blocks.reserve(2 + 8 * static_cast<std::size_t>(model.timesteps));
    blocks.push_back({"projection.w", ParamGroup::Projection, model.projection.w});
    blocks.push_back({"projection.b", ParamGroup::Projection, model.projection.b});
    for (int t = 0; t < model.timesteps; ++t) {
        auto& head = model.heads[static_cast<std::size_t>(t)];
        const std::string prefix = "heads[" + std::to_string(t + 1) + "]";
        blocks.push_back({prefix + ".w", ParamGroup::Head, head.w});
        blocks.push_back({prefix + ".b", ParamGroup::Head, head.b});
    }
    for (int t = 0; t < model.timesteps; ++t) {
        auto& gate = model.gates[static_cast<std::size_t>(t)];
        const std::string prefix = "gates[" + std::to_string(t + 1) + "]";
        blocks.push_back({prefix + ".stream1.w", ParamGroup::Gate, gate.stream1.w});
        blocks.push_back({prefix + ".stream1.b", ParamGroup::Gate, gate.stream1.b});
        blocks.push_back({prefix + ".stream2.w", ParamGroup::Gate, gate.stream2.w});
        blocks.push_back({prefix + ".stream2.b", ParamGroup::Gate, gate.stream2.b});
        blocks.push_back({prefix + ".merge.w", ParamGroup::Gate, gate.merge.w});
        blocks.push_back({prefix + ".merge.b", ParamGroup::Gate, gate.merge.b});
    }
    return blocks;
}

std::size_t param_count(const CascadeModel& model) {
    auto& mutable_model = const_cast<CascadeModel&>(model);
    std::size_t total = 0;
    for (const auto& block : parameter_blocks(mutable_model)) total += block.values.size();
    return total;
}

std::size_t gate_param_count(const ModelDims& dims) {
    const std::size_t d = static_cast<std::size_t>(dims.d);
    const std::size_t g = kGateHidden;
    return (d * g + g) + (g * g + g) + (2 * g * 1 + 1);
}

Gradients Gradients::zeros_like(CascadeModel& model) {
    Gradients grads;
    for (const auto& block : parameter_blocks(model)) {
        grads.blocks.emplace_back(block.values.size(), 0.0);
    }
    return grads;
}

void Gradients::set_zero() {
    for (auto& block : blocks) std::fill(block.begin(), block.end(), 0.0);
}

// --- loss + gradients ---------------------------------------------------------

namespace {

// block indices in canonical order
struct BlockIndex {
    int timesteps;
    std::size_t proj_w = 0, proj_b = 1;
    std::size_t head_w(int t) const { return 2 + 2 * static_cast<std::size_t>(t); }
    std::size_t head_b(int t) const { return 3 + 2 * static_cast<std::size_t>(t); }
    std::size_t gate_base(int t) const {
        return 2 + 2 * static_cast<std::size_t>(timesteps) + 6 * static_cast<std::size_t>(t);
    }
};

// d(loss)/d(logits) for a single sample; returns the loss
double classifier_loss_grad(std::span<const double> logits, const LabelSpec& label,
                            LossVariant variant, std::span<double> dlogits) {
    const std::size_t c = logits.size();
    if (variant == LossVariant::CrossEntropy) {
        const double lse = log_sum_exp(logits);
        for (std::size_t i = 0; i < c; ++i) dlogits[i] = std::exp(logits[i] - lse);
        dlogits[static_cast<std::size_t>(label.category)] -= 1.0;
        return lse - logits[static_cast<std::size_t>(label.category)];
    }
    double total = 0.0;
    for (std::size_t i = 0; i < c; ++i) {
        const double x = logits[i];
        const double y = label.contains(static_cast<int>(i)) ? 1.0 : 0.0;
        const double sp = x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
        total += sp - y * x;
        dlogits[i] = (sigmoid(x) - y) / static_cast<double>(c);
    }
    return total / static_cast<double>(c);
}

// dW += scale * dy (x) x^T, db += scale * dy
void accumulate_affine(std::span<const double> dy, std::span<const double> x, double scale,
                       std::vector<double>& dw, std::vector<double>& db) {
    const std::size_t in = x.size();
    for (std::size_t o = 0; o < dy.size(); ++o) {
        const double g = dy[o] * scale;
        db[o] += g;
        double* row = dw.data() + o * in;
        for (std::size_t i = 0; i < in; ++i) row[i] += g * x[i];
    }
}

// dx = W^T dy
void backprop_input(const AffineLayer& layer, std::span<const double> dy, std::span<double> dx) {
    std::fill(dx.begin(), dx.end(), 0.0);
    const double* w = layer.w.data();
    for (int o = 0; o < layer.out_dim; ++o) {
        const double g = dy[static_cast<std::size_t>(o)];
        if (g == 0.0) continue;
        const double* row = w + static_cast<std::size_t>(o) * static_cast<std::size_t>(layer.in_dim);
        for (int i = 0; i < layer.in_dim; ++i) dx[static_cast<std::size_t>(i)] += g * row[i];
    }
}

}  // namespace

double batch_loss_and_gradients(const CascadeModel& model,
                                const std::vector<TrainSample>& samples,
                                std::span<const int> indices, const LossSpec& spec,
                                const std::vector<std::vector<double>>* cached_cls_losses,
                                Gradients* grads) {
    if (indices.empty()) throw std::invalid_argument("batch: empty index set");
    auto& mutable_model = const_cast<CascadeModel&>(model);
    if (grads != nullptr) {
        if (grads->blocks.empty()) {
            *grads = Gradients::zeros_like(mutable_model);
        } else {
            grads->set_zero();
        }
    }

    const BlockIndex idx{model.timesteps};
    const int d = model.dims.d;
    const int h = model.dims.h;
    const int c = model.dims.c;
    const bool want_cls = spec.stage != LossStage::Stage2Gate;
    const bool want_gate = spec.stage != LossStage::Stage1Classifier;
    const double batch_inv = 1.0 / static_cast<double>(indices.size());

    std::vector<double> hidden_pre(static_cast<std::size_t>(h));
    std::vector<double> hidden(static_cast<std::size_t>(h));
    std::vector<double> logits(static_cast<std::size_t>(c));
    std::vector<double> dlogits(static_cast<std::size_t>(c));
    std::vector<double> dhidden(static_cast<std::size_t>(h));
    std::vector<double> cls_losses;

    double total_loss = 0.0;
    for (const int sample_index : indices) {
        const TrainSample& sample = samples[static_cast<std::size_t>(sample_index)];
        const int t_eff = static_cast<int>(sample.z_seq.size());
        if (t_eff < 1 || t_eff > model.timesteps) {
            throw std::invalid_argument("batch: sample z_seq length out of range");
        }
        const double weight = batch_inv / static_cast<double>(t_eff);

        if (want_cls) {
            for (int t = 1; t <= t_eff; ++t) {
                const auto& z = sample.z_seq[static_cast<std::size_t>(t - 1)];
                affine_forward(model.projection, z, hidden_pre);
                check_finite(hidden_pre, "projection");
                for (int i = 0; i < h; ++i) {
                    hidden[static_cast<std::size_t>(i)] =
                        hidden_pre[static_cast<std::size_t>(i)] > 0.0
                            ? hidden_pre[static_cast<std::size_t>(i)]
                            : 0.0;
                }
                const auto& head = model.heads[static_cast<std::size_t>(t - 1)];
                affine_forward(head, hidden, logits);
                check_finite(logits, "heads[" + std::to_string(t) + "]");
                const double loss = classifier_loss_grad(logits, sample.label, spec.variant, dlogits);
                total_loss += weight * loss;
                if (grads != nullptr) {
                    accumulate_affine(dlogits, hidden, weight,
                                      grads->blocks[idx.head_w(t - 1)], grads->blocks[idx.head_b(t - 1)]);
                    backprop_input(head, dlogits, dhidden);
                    for (int i = 0; i < h; ++i) {
                        if (hidden_pre[static_cast<std::size_t>(i)] <= 0.0) {
                            dhidden[static_cast<std::size_t>(i)] = 0.0;
                        }
                    }
                    accumulate_affine(dhidden, z, weight, grads->blocks[idx.proj_w],
                                      grads->blocks[idx.proj_b]);
                }
            }
        }

        if (want_gate) {
            // pseudo-labels come from the (detached) classifier losses
            if (cached_cls_losses != nullptr) {
                cls_losses = (*cached_cls_losses)[static_cast<std::size_t>(sample_index)];
            } else {
                cls_losses.resize(static_cast<std::size_t>(t_eff));
                for (int t = 1; t <= t_eff; ++t) {
                    const auto logits_t = classify(model, t, sample.z_seq[static_cast<std::size_t>(t - 1)]);
                    cls_losses[static_cast<std::size_t>(t - 1)] =
                        classifier_loss(logits_t, sample.label, spec.variant);
                }
            }

            for (int t = 1; t <= t_eff; ++t) {
                const GateNet& gate = model.gates[static_cast<std::size_t>(t - 1)];
                const auto& z_cur = sample.z_seq[static_cast<std::size_t>(t - 1)];
                const double* z_prev =
                    t > 1 ? sample.z_seq[static_cast<std::size_t>(t - 2)].data() : nullptr;
                StreamTrace prev_trace, cur_trace;
                const double logit = gate_logit(gate, z_prev, z_cur, &prev_trace, &cur_trace);

                const double target =
                    cls_losses[static_cast<std::size_t>(t - 1)] <= epsilon_schedule(spec.beta, t)
                        ? 1.0
                        : 0.0;
                const double sp = logit > 0.0 ? logit + std::log1p(std::exp(-logit))
                                              : std::log1p(std::exp(logit));
                total_loss += weight * (sp - target * logit);

                if (grads == nullptr) continue;
                const std::size_t gb = idx.gate_base(t - 1);
                const double dlogit = sigmoid(logit) - target;

                std::vector<double> merged(static_cast<std::size_t>(2 * kGateHidden), 0.0);
                if (t > 1) std::copy(prev_trace.act2.begin(), prev_trace.act2.end(), merged.begin());
                std::copy(cur_trace.act2.begin(), cur_trace.act2.end(), merged.begin() + kGateHidden);
                accumulate_affine({&dlogit, 1}, merged, weight, grads->blocks[gb + 4],
                                  grads->blocks[gb + 5]);

                // both branches share stream weights; accumulate each side
                const auto backprop_branch = [&](const StreamTrace& trace,
                                                 std::span<const double> z_in, int half) {
                    std::vector<double> dact2(static_cast<std::size_t>(kGateHidden));
                    for (int i = 0; i < kGateHidden; ++i) {
                        const double g =
                            dlogit * gate.merge.w[static_cast<std::size_t>(half * kGateHidden + i)];
                        dact2[static_cast<std::size_t>(i)] =
                            trace.pre2[static_cast<std::size_t>(i)] > 0.0 ? g : 0.0;
                    }
                    accumulate_affine(dact2, trace.act1, weight, grads->blocks[gb + 2],
                                      grads->blocks[gb + 3]);
                    std::vector<double> dact1(static_cast<std::size_t>(kGateHidden));
                    backprop_input(gate.stream2, dact2, dact1);
                    for (int i = 0; i < kGateHidden; ++i) {
                        if (trace.pre1[static_cast<std::size_t>(i)] <= 0.0) {
                            dact1[static_cast<std::size_t>(i)] = 0.0;
                        }
                    }
                    accumulate_affine(dact1, z_in, weight, grads->blocks[gb], grads->blocks[gb + 1]);
                };
                if (t > 1) backprop_branch(prev_trace, {z_prev, static_cast<std::size_t>(d)}, 0);
                backprop_branch(cur_trace, z_cur, 1);
            }
        }
    }

    if (!std::isfinite(total_loss)) throw std::runtime_error("non-finite batch loss");
    return total_loss;
}

// --- checkpoints --------------------------------------------------------------

void save_checkpoint(const CascadeModel& model, const std::filesystem::path& path) {
    auto& mutable_model = const_cast<CascadeModel&>(model);
    nlohmann::json manifest{
        {"format", "frameexit-checkpoint"},
        {"version", 1},
        {"d", model.dims.d},
        {"h", model.dims.h},
        {"c", model.dims.c},
        {"t", model.timesteps},
        {"pooling", pool_kind_name(model.pooling)},
        {"policy", policy_type_name(model.policy.type)},
        {"policy_seed", model.policy.seed},
        {"loss", loss_variant_name(model.loss)},
        {"per_frame", model.per_frame},
        {"seed", model.init_seed},
        {"stage", model.stage},
        {"param_count", param_count(model)},
        {"param_order",
         "projection.{w,b}, heads[1..T].{w,b}, gates[1..T].{stream1.w, stream1.b, stream2.w, "
         "stream2.b, merge.w, merge.b}; row-major, little-endian f64"},
    };
    if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path.string());
    out << manifest.dump() << '\n';
    for (const auto& block : parameter_blocks(mutable_model)) put_f64_span_le(out, block.values);
    if (!out.good()) throw std::runtime_error("I/O failure writing checkpoint: " + path.string());
}

CascadeModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("checkpoint missing manifest: " + path.string());
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
        throw std::runtime_error("checkpoint manifest parse error: " + std::string(e.what()));
    }
    if (manifest.value("format", "") != "frameexit-checkpoint") {
        throw std::runtime_error("not a frameexit checkpoint: " + path.string());
    }

    Policy policy;
    policy.type = policy_type_from_name(manifest.at("policy").get<std::string>());
    policy.seed = manifest.at("policy_seed").get<std::uint64_t>();
    CascadeModel model = make_model(
        manifest.at("t").get<int>(),
        ModelDims{manifest.at("d").get<int>(), manifest.at("h").get<int>(), manifest.at("c").get<int>()},
        pool_kind_from_name(manifest.at("pooling").get<std::string>()), policy,
        loss_variant_from_name(manifest.at("loss").get<std::string>()),
        manifest.at("per_frame").get<bool>(), manifest.at("seed").get<std::uint64_t>());
    model.stage = manifest.at("stage").get<std::string>();

    const auto expected = manifest.at("param_count").get<std::size_t>();
    if (expected != param_count(model)) {
        throw std::runtime_error("checkpoint param_count mismatch in " + path.string());
    }
    for (auto& block : parameter_blocks(model)) {
        for (auto& value : block.values) {
            if (!get_f64_le(in, value)) {
                throw std::runtime_error("checkpoint payload truncated at " + block.name);
            }
        }
    }
    char extra = 0;
    if (in.read(&extra, 1)) {
        throw std::runtime_error("checkpoint has trailing bytes: " + path.string());
    }
    return model;
}

}  // namespace frameexit
