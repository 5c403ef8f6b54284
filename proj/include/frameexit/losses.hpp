#pragma once

#include <span>
#include <string>
#include <vector>

#include "frameexit/dataset.hpp"

namespace frameexit {

enum class LossVariant { CrossEntropy, BinaryCrossEntropyMultiLabel };

std::string loss_variant_name(LossVariant variant);
LossVariant loss_variant_from_name(const std::string& name);

double sigmoid(double x);
double log_sum_exp(std::span<const double> values);
std::vector<double> softmax(std::span<const double> logits);

// CrossEntropy: -log softmax(logits)[y]. BinaryCrossEntropyMultiLabel: mean
// over categories of BCE on sigmoided logits. Both computed in stable
// log-space form.
double classifier_loss(std::span<const double> logits, const LabelSpec& label, LossVariant variant);

// Exit-loss threshold epsilon_t = beta * exp(t/2); strictly increasing in t
// and in beta. Timesteps are 1-based.
double epsilon_schedule(double beta, int t);

struct GatePseudoLabel {
    int timestep = 0;        // 1-based
    int label = 0;           // 1 = exit, 0 = keep processing
    double classifier_loss = 0.0;
    double epsilon_t = 0.0;
};

// On-the-fly gate supervision: label_t = 1 iff loss_t <= epsilon_t
// (inclusive). Computed per sample from the current classifier outputs.
std::vector<GatePseudoLabel> pseudo_labels(std::span<const double> per_timestep_losses, double beta);

// (1/T) sum of BCE(score_t, label_t); scores must lie in (0, 1).
double gate_loss(std::span<const double> scores, std::span<const GatePseudoLabel> labels);

}  // namespace frameexit
