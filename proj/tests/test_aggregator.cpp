#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "frameexit/aggregator.hpp"
#include "frameexit/rng.hpp"

using namespace frameexit;

TEST_CASE("pool_init copies the frame for both kinds") {
    const std::vector<double> a{2.0, -1.0};
    const auto max_state = pool_init(a, PoolKind::Max);
    CHECK(max_state.value == a);
    CHECK(max_state.count == 1);

    const std::vector<double> z{0.0, 0.0, 0.0};
    const auto mean_state = pool_init(z, PoolKind::Mean);
    CHECK(mean_state.value == z);
    CHECK(mean_state.count == 1);
}

TEST_CASE("max update is idempotent on the same frame") {
    const std::vector<double> v{0.5, -3.25, 7.0};
    const auto state = pool_init(v, PoolKind::Max);
    CHECK(pool_update(state, v).value == v);
}

TEST_CASE("pool_update examples") {
    const auto max_state = pool_init(std::vector<double>{1.0, -2.0}, PoolKind::Max);
    CHECK(pool_update(max_state, std::vector<double>{0.0, 5.0}).value ==
          std::vector<double>{1.0, 5.0});

    const auto mean_state = pool_init(std::vector<double>{2.0}, PoolKind::Mean);
    const auto updated = pool_update(mean_state, std::vector<double>{4.0});
    CHECK(updated.value == std::vector<double>{3.0});
    CHECK(updated.count == 2);

    // mean of [1],[2],[3] via two updates equals the batch mean
    auto running = pool_init(std::vector<double>{1.0}, PoolKind::Mean);
    running = pool_update(running, std::vector<double>{2.0});
    running = pool_update(running, std::vector<double>{3.0});
    CHECK(running.value[0] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("errors: non-finite input and dimension mismatch") {
    CHECK_THROWS_AS(pool_init(std::vector<double>{std::nan("")}, PoolKind::Max),
                    std::invalid_argument);
    const auto state = pool_init(std::vector<double>{1.0, 2.0}, PoolKind::Max);
    CHECK_THROWS_AS(pool_update(state, std::vector<double>{1.0}), std::invalid_argument);
    CHECK_THROWS_AS(
        pool_update(state, std::vector<double>{1.0, std::numeric_limits<double>::infinity()}),
        std::invalid_argument);
}

TEST_CASE("max pooling is order invariant and monotone") {
    DetRng rng(123);
    for (int trial = 0; trial < 200; ++trial) {
        const int dim = 1 + static_cast<int>(rng.uniform_int(6));
        const int n = 2 + static_cast<int>(rng.uniform_int(8));
        std::vector<std::vector<double>> frames(static_cast<std::size_t>(n));
        for (auto& f : frames) {
            f.resize(static_cast<std::size_t>(dim));
            for (auto& x : f) x = rng.normal() * 100.0;
        }

        auto state = pool_init(frames[0], PoolKind::Max);
        for (int i = 1; i < n; ++i) {
            const auto next = pool_update(state, frames[static_cast<std::size_t>(i)]);
            for (int d = 0; d < dim; ++d) {
                CHECK(next.value[static_cast<std::size_t>(d)] >=
                      state.value[static_cast<std::size_t>(d)]);
            }
            state = next;
        }

        std::vector<std::size_t> perm(frames.size());
        for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
        rng.shuffle(perm);
        auto permuted = pool_init(frames[perm[0]], PoolKind::Max);
        for (std::size_t i = 1; i < perm.size(); ++i) {
            permuted = pool_update(permuted, frames[perm[i]]);
        }
        CHECK(state.value == permuted.value);  // exact
    }
}

TEST_CASE("running mean matches the batch mean within 1e-9") {
    DetRng rng(321);
    for (int trial = 0; trial < 50; ++trial) {
        const int dim = 1 + static_cast<int>(rng.uniform_int(4));
        const int n = 1 + static_cast<int>(rng.uniform_int((trial % 10 == 0) ? 10000 : 500));
        std::vector<double> sum(static_cast<std::size_t>(dim), 0.0);
        PooledState state;
        for (int i = 0; i < n; ++i) {
            std::vector<double> frame(static_cast<std::size_t>(dim));
            for (int d = 0; d < dim; ++d) {
                frame[static_cast<std::size_t>(d)] = (rng.uniform01() * 2.0 - 1.0) * 1e3;
                sum[static_cast<std::size_t>(d)] += frame[static_cast<std::size_t>(d)];
            }
            state = i == 0 ? pool_init(frame, PoolKind::Mean) : pool_update(state, frame);
        }
        for (int d = 0; d < dim; ++d) {
            const double batch_mean = sum[static_cast<std::size_t>(d)] / n;
            CHECK(std::abs(state.value[static_cast<std::size_t>(d)] - batch_mean) <= 1e-9);
        }
    }
}
