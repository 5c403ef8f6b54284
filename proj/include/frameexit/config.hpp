#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "frameexit/engine.hpp"
#include "frameexit/trainer.hpp"

namespace frameexit {

// Everything the CLI needs, assembled from a flat key=value config file plus
// --set overrides. Keys are documented in the README.
struct AppConfig {
    // dataset generation
    SyntheticConfig data;
    // model + training
    TrainConfig train;
    // inference
    CostModel cost;
    double threshold = 0.5;
    std::string test_policy;   // empty = use the checkpoint's policy
    std::uint64_t test_policy_seed = 0;
    std::string test_pooling;  // empty = use the checkpoint's pooling
    // sweep
    std::vector<double> betas = {1e-6, 1e-5, 1e-4, 1e-3, 1e-2};

    InferOptions infer_options() const {
        InferOptions opts{cost, threshold, std::nullopt, std::nullopt};
        if (!test_policy.empty()) {
            opts.policy = Policy{policy_type_from_name(test_policy), test_policy_seed};
        }
        if (!test_pooling.empty()) opts.pooling = pool_kind_from_name(test_pooling);
        return opts;
    }

    // canonical "k=v" lines in fixed key order; hashing this yields the
    // config fingerprint embedded in every report
    std::string canonical() const;
    std::string fingerprint() const;
};

// Parses "key = value" lines; '#' starts a comment; unknown keys are errors.
AppConfig load_config(const std::filesystem::path& path);

// Applies "key=value" override strings on top of a config.
void apply_overrides(AppConfig& config, const std::vector<std::string>& overrides);

AppConfig config_from_pairs(const std::vector<std::pair<std::string, std::string>>& pairs);

}  // namespace frameexit
