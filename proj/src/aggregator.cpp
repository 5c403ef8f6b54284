#include "frameexit/aggregator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace frameexit {

std::string pool_kind_name(PoolKind kind) {
    return kind == PoolKind::Max ? "max" : "mean";
}

PoolKind pool_kind_from_name(const std::string& name) {
    if (name == "max") return PoolKind::Max;
    if (name == "mean") return PoolKind::Mean;
    throw std::invalid_argument("unknown pooling kind: " + name);
}

namespace {
void check_finite(std::span<const double> frame) {
    for (double x : frame) {
        if (!std::isfinite(x)) {
            throw std::invalid_argument("pooling: non-finite frame entry");
        }
    }
}
}  // namespace

PooledState pool_init(std::span<const double> frame, PoolKind kind) {
    if (frame.empty()) throw std::invalid_argument("pooling: empty frame");
    check_finite(frame);
    PooledState state;
    state.dim = static_cast<int>(frame.size());
    state.value.assign(frame.begin(), frame.end());
    state.count = 1;
    state.kind = kind;
    return state;
}

PooledState pool_update(const PooledState& state, std::span<const double> frame) {
    if (static_cast<int>(frame.size()) != state.dim) {
        throw std::invalid_argument("pooling: frame dim mismatch");
    }
    check_finite(frame);
    PooledState next = state;
    next.count = state.count + 1;
    if (state.kind == PoolKind::Max) {
        for (int i = 0; i < state.dim; ++i) {
            next.value[static_cast<std::size_t>(i)] =
                std::max(state.value[static_cast<std::size_t>(i)], frame[static_cast<std::size_t>(i)]);
        }
    } else {
        // count-weighted incremental mean; avoids running-sum magnitude growth
        const double c = static_cast<double>(state.count);
        for (int i = 0; i < state.dim; ++i) {
            next.value[static_cast<std::size_t>(i)] =
                (c * state.value[static_cast<std::size_t>(i)] + frame[static_cast<std::size_t>(i)]) /
                (c + 1.0);
        }
    }
    return next;
}

}  // namespace frameexit
