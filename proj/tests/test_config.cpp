#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "frameexit/config.hpp"

using namespace frameexit;
namespace fs = std::filesystem;

namespace {

fs::path write_config(const std::string& body) {
    const fs::path path = fs::temp_directory_path() / "frameexit_test_config.cfg";
    std::ofstream out(path, std::ios::trunc);
    out << body;
    return path;
}

}  // namespace

TEST_CASE("config files parse keys, comments, and whitespace") {
    const auto path = write_config(
        "# pinned desk benchmark\n"
        "n_categories = 10\n"
        "dim=64\n"
        "noise_sigma = 0.15   # informative frames are sharp\n"
        "pooling = mean\n"
        "policy = random\n"
        "policy_seed = 11\n"
        "loss = bce\n"
        "betas = 1e-6, 1e-4\n"
        "\n"
        "include_head_gate_cost = true\n");
    const AppConfig config = load_config(path);
    CHECK(config.data.n_categories == 10);
    CHECK(config.train.n_categories == 10);
    CHECK(config.data.noise_sigma == 0.15);
    CHECK(config.train.pooling == PoolKind::Mean);
    CHECK(config.train.policy.type == PolicyType::Random);
    CHECK(config.train.policy.seed == 11);
    CHECK(config.train.loss == LossVariant::BinaryCrossEntropyMultiLabel);
    CHECK(config.betas == std::vector<double>{1e-6, 1e-4});
    CHECK(config.cost.include_head_gate_cost);
    fs::remove(path);
}

TEST_CASE("unknown keys and malformed lines are rejected with the line number") {
    const auto bad_key = write_config("no_such_key = 1\n");
    CHECK_THROWS_WITH_AS(load_config(bad_key), doctest::Contains(":1:"), std::runtime_error);
    const auto bad_line = write_config("n_categories 10\n");
    CHECK_THROWS_AS(load_config(bad_line), std::runtime_error);
    fs::remove(bad_key);
}

TEST_CASE("overrides apply on top of the file") {
    AppConfig config;
    apply_overrides(config, {"beta=0.01", "timesteps=4", "threshold=0.7"});
    CHECK(config.train.beta == 0.01);
    CHECK(config.train.timesteps == 4);
    CHECK(config.threshold == 0.7);
    CHECK_THROWS_AS(apply_overrides(config, {"nonsense"}), std::invalid_argument);
}

TEST_CASE("fingerprint tracks every config field") {
    AppConfig a;
    AppConfig b;
    CHECK(a.fingerprint() == b.fingerprint());
    b.train.beta = 2e-4;
    CHECK(a.fingerprint() != b.fingerprint());
    AppConfig c;
    c.data.seed = 99;
    CHECK(a.fingerprint() != c.fingerprint());
}

TEST_CASE("test-time policy override lands in InferOptions") {
    AppConfig config;
    CHECK_FALSE(config.infer_options().policy.has_value());
    apply_overrides(config, {"test_policy=sequential", "test_pooling=mean"});
    const InferOptions opts = config.infer_options();
    REQUIRE(opts.policy.has_value());
    CHECK(opts.policy->type == PolicyType::Sequential);
    REQUIRE(opts.pooling.has_value());
    CHECK(*opts.pooling == PoolKind::Mean);
}
