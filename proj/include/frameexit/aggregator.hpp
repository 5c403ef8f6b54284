#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace frameexit {

enum class PoolKind { Max, Mean };

std::string pool_kind_name(PoolKind kind);
PoolKind pool_kind_from_name(const std::string& name);

// Running clip representation z_t. Immutable value type: update() returns a
// fresh state, so different videos can be processed on different threads.
struct PooledState {
    int dim = 0;
    std::vector<double> value;  // current z_t
    std::int64_t count = 0;     // frames absorbed
    PoolKind kind = PoolKind::Max;
};

// State from the first frame; value = frame, count = 1 for both kinds.
// Throws std::invalid_argument on non-finite input.
PooledState pool_init(std::span<const double> frame, PoolKind kind);

// Absorb one frame in O(dim):
//   Max:  value' = entrywise max(value, frame)
//   Mean: value' = (count*value + frame) / (count + 1)
// Earlier frames are never revisited. Throws on dimension mismatch or
// non-finite input.
PooledState pool_update(const PooledState& state, std::span<const double> frame);

}  // namespace frameexit
