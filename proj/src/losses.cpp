#include "frameexit/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace frameexit {

std::string loss_variant_name(LossVariant variant) {
    return variant == LossVariant::CrossEntropy ? "ce" : "bce";
}

LossVariant loss_variant_from_name(const std::string& name) {
    if (name == "ce") return LossVariant::CrossEntropy;
    if (name == "bce") return LossVariant::BinaryCrossEntropyMultiLabel;
    throw std::invalid_argument("unknown loss variant: " + name);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

namespace {
// log(1 + exp(x)) without overflow
double softplus(double x) {
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}
}  // namespace

double log_sum_exp(std::span<const double> values) {
    double m = values[0];
    for (double v : values) m = std::max(m, v);
    double sum = 0.0;
    for (double v : values) sum += std::exp(v - m);
    return m + std::log(sum);
}

std::vector<double> softmax(std::span<const double> logits) {
    const double lse = log_sum_exp(logits);
    std::vector<double> probs(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) probs[i] = std::exp(logits[i] - lse);
    return probs;
}

double classifier_loss(std::span<const double> logits, const LabelSpec& label, LossVariant variant) {
    if (logits.empty()) throw std::invalid_argument("classifier_loss: empty logits");
    for (double v : logits) {
        if (!std::isfinite(v)) throw std::invalid_argument("classifier_loss: non-finite logit");
    }
    if (variant == LossVariant::CrossEntropy) {
        if (!label.is_single()) {
            throw std::invalid_argument("classifier_loss: cross-entropy needs a single-label target");
        }
        if (label.category >= static_cast<int>(logits.size())) {
            throw std::invalid_argument("classifier_loss: label index out of range");
        }
        return log_sum_exp(logits) - logits[static_cast<std::size_t>(label.category)];
    }
    // mean over categories of BCE(sigmoid(x_c), y_c) = softplus(x_c) - y_c * x_c
    double total = 0.0;
    for (std::size_t c = 0; c < logits.size(); ++c) {
        const double y = label.contains(static_cast<int>(c)) ? 1.0 : 0.0;
        total += softplus(logits[c]) - y * logits[c];
    }
    return total / static_cast<double>(logits.size());
}

double epsilon_schedule(double beta, int t) {
    if (t < 1) throw std::invalid_argument("epsilon_schedule: t must be >= 1");
    if (!(beta > 0.0)) throw std::invalid_argument("epsilon_schedule: beta must be > 0");
    return beta * std::exp(static_cast<double>(t) / 2.0);
}

std::vector<GatePseudoLabel> pseudo_labels(std::span<const double> per_timestep_losses, double beta) {
    std::vector<GatePseudoLabel> labels(per_timestep_losses.size());
    for (std::size_t i = 0; i < per_timestep_losses.size(); ++i) {
        const double loss = per_timestep_losses[i];
        if (!std::isfinite(loss)) throw std::invalid_argument("pseudo_labels: non-finite loss");
        GatePseudoLabel& gl = labels[i];
        gl.timestep = static_cast<int>(i) + 1;
        gl.classifier_loss = loss;
        gl.epsilon_t = epsilon_schedule(beta, gl.timestep);
        gl.label = loss <= gl.epsilon_t ? 1 : 0;
    }
    return labels;
}

double gate_loss(std::span<const double> scores, std::span<const GatePseudoLabel> labels) {
    if (scores.size() != labels.size()) {
        throw std::invalid_argument("gate_loss: scores/labels length mismatch");
    }
    if (scores.empty()) throw std::invalid_argument("gate_loss: empty input");
    double total = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const double s = scores[i];
        total += labels[i].label ? -std::log(s) : -std::log1p(-s);
    }
    return total / static_cast<double>(scores.size());
}

}  // namespace frameexit
