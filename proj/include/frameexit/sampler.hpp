#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace frameexit {

// Frame visitation order for an N-frame video. Indices are 1-based; callers
// convert to 0-based storage only at the dataset boundary.
struct SampleOrder {
    int n_frames = 0;
    std::vector<int> order;  // permutation of 1..n_frames
};

enum class PolicyType { CoarseToFine, Sequential, Random };

std::string policy_type_name(PolicyType type);
PolicyType policy_type_from_name(const std::string& name);

struct Policy {
    PolicyType type = PolicyType::CoarseToFine;
    std::uint64_t seed = 0;  // used by Random only

    static Policy coarse_to_fine() { return {PolicyType::CoarseToFine, 0}; }
    static Policy sequential() { return {PolicyType::Sequential, 0}; }
    static Policy random(std::uint64_t seed) { return {PolicyType::Random, seed}; }
};

// Visitation order for an N-frame video under the given policy.
//
// CoarseToFine starts at the middle, first, and last frame, then repeatedly
// inserts interval midpoints, doubling the number of intervals each round
// until all N indices are emitted. Pure function of (n_frames, policy).
// Throws std::invalid_argument when n_frames < 1.
SampleOrder sample_order(int n_frames, const Policy& policy);

// First t entries of the order, i.e. the frame-index set of the partial clip
// after t steps. Throws std::out_of_range unless 1 <= t <= n_frames.
std::vector<int> prefix(const SampleOrder& order, int t);

}  // namespace frameexit
