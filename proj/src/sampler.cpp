#include "frameexit/sampler.hpp"

#include <cmath>
#include <stdexcept>

#include "frameexit/rng.hpp"

namespace frameexit {

std::string policy_type_name(PolicyType type) {
    switch (type) {
        case PolicyType::CoarseToFine: return "coarse";
        case PolicyType::Sequential: return "sequential";
        case PolicyType::Random: return "random";
    }
    return "coarse";
}

PolicyType policy_type_from_name(const std::string& name) {
    if (name == "coarse") return PolicyType::CoarseToFine;
    if (name == "sequential") return PolicyType::Sequential;
    if (name == "random") return PolicyType::Random;
    throw std::invalid_argument("unknown sampling policy: " + name);
}

namespace {

// middle, first, last, then midpoints of successively halved intervals;
// the interval endpoints come from floor(linspace(1, N, q+1)) with
// linspace(1, N, q+1)[i] = 1 + i*(N-1)/q evaluated in double.
std::vector<int> coarse_to_fine_order(int n) {
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(n));
    std::vector<char> seen(static_cast<std::size_t>(n) + 1, 0);
    const auto emit = [&](int idx) {
        if (!seen[static_cast<std::size_t>(idx)]) {
            seen[static_cast<std::size_t>(idx)] = 1;
            out.push_back(idx);
        }
    };

    emit((n + 1) / 2);
    emit(1);
    emit(n);

    std::int64_t q = 2;
    while (static_cast<int>(out.size()) < n) {
        std::vector<int> interval(static_cast<std::size_t>(q) + 1);
        for (std::int64_t i = 0; i <= q; ++i) {
            const double x = 1.0 + static_cast<double>(i) * (static_cast<double>(n) - 1.0) /
                                       static_cast<double>(q);
            interval[static_cast<std::size_t>(i)] = static_cast<int>(std::floor(x));
        }
        for (std::size_t i = 0; i + 1 < interval.size(); ++i) {
            const int a = interval[i];
            const int b = interval[i + 1];
            emit((a + b) / 2);
        }
        q *= 2;
    }
    return out;
}

}  // namespace

SampleOrder sample_order(int n_frames, const Policy& policy) {
    if (n_frames < 1) {
        throw std::invalid_argument("sample_order: n_frames must be >= 1");
    }
    SampleOrder result;
    result.n_frames = n_frames;
    switch (policy.type) {
        case PolicyType::CoarseToFine:
            result.order = coarse_to_fine_order(n_frames);
            break;
        case PolicyType::Sequential:
            result.order.resize(static_cast<std::size_t>(n_frames));
            for (int i = 0; i < n_frames; ++i) result.order[static_cast<std::size_t>(i)] = i + 1;
            break;
        case PolicyType::Random: {
            result.order.resize(static_cast<std::size_t>(n_frames));
            for (int i = 0; i < n_frames; ++i) result.order[static_cast<std::size_t>(i)] = i + 1;
            DetRng rng(policy.seed);
            rng.shuffle(result.order);
            break;
        }
    }
    return result;
}

std::vector<int> prefix(const SampleOrder& order, int t) {
    if (t < 1 || t > order.n_frames) {
        throw std::out_of_range("prefix: t out of range [1, n_frames]");
    }
    return {order.order.begin(), order.order.begin() + t};
}

}  // namespace frameexit
