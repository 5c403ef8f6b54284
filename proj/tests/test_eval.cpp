#include <doctest.h>

#include <cmath>
#include <sstream>

#include "frameexit/eval.hpp"
#include "frameexit/rng.hpp"
#include "test_support.hpp"

using namespace frameexit;
using namespace frameexit::testing;

namespace {

ExitTrace make_trace(std::vector<double> prediction, LabelSpec label, int exit_t = 1,
                     bool correct_hint = false) {
    ExitTrace trace;
    trace.prediction = std::move(prediction);
    trace.label = std::move(label);
    trace.exit_timestep = exit_t;
    trace.correct = correct_hint;
    trace.flops = 1e9 * exit_t;
    return trace;
}

}  // namespace

TEST_CASE("top1 basics and tie-breaking") {
    std::vector<ExitTrace> all_correct{
        make_trace({0.9, 0.1}, LabelSpec::single(0)),
        make_trace({0.2, 0.8}, LabelSpec::single(1)),
    };
    CHECK(top1(all_correct) == 1.0);

    std::vector<ExitTrace> none{make_trace({0.9, 0.1}, LabelSpec::single(1))};
    CHECK(top1(none) == 0.0);

    std::vector<ExitTrace> three_of_four{
        make_trace({1.0, 0.0}, LabelSpec::single(0)),
        make_trace({1.0, 0.0}, LabelSpec::single(0)),
        make_trace({0.0, 1.0}, LabelSpec::single(1)),
        make_trace({0.4, 0.6}, LabelSpec::single(0)),
    };
    CHECK(top1(three_of_four) == 0.75);

    // exact tie goes to the lowest index
    std::vector<ExitTrace> tie{make_trace({0.5, 0.5}, LabelSpec::single(0))};
    CHECK(top1(tie) == 1.0);
    std::vector<ExitTrace> tie_but_label_1{make_trace({0.5, 0.5}, LabelSpec::single(1))};
    CHECK(top1(tie_but_label_1) == 0.0);

    std::vector<ExitTrace> multi{make_trace({0.5, 0.5}, LabelSpec::multi({0}))};
    CHECK_THROWS_AS(top1(multi), std::invalid_argument);
}

TEST_CASE("mAP hand-computed example") {
    // label 0 scores 0.9, 0.8, 0.7 with positives at ranks 1 and 3
    std::vector<ExitTrace> traces{
        make_trace({0.9, 0.1}, LabelSpec::multi({0})),
        make_trace({0.8, 0.9}, LabelSpec::multi({1})),
        make_trace({0.7, 0.2}, LabelSpec::multi({0})),
    };
    // label 0: AP = (1/1 + 2/3) / 2 = 0.8333...; label 1: positive ranked first, AP = 1
    const MapResult result = mean_average_precision(traces);
    CHECK(result.labels_scored == 2);
    const double label0 = (1.0 + 2.0 / 3.0) / 2.0;
    const double label1 = 1.0;
    CHECK(result.map == doctest::Approx((label0 + label1) / 2.0).epsilon(1e-12));
}

TEST_CASE("perfect ranking gives mAP = 1") {
    std::vector<ExitTrace> traces{
        make_trace({0.9, 0.8}, LabelSpec::multi({0, 1})),
        make_trace({0.7, 0.6}, LabelSpec::multi({0, 1})),
        make_trace({0.1, 0.2}, LabelSpec::multi({2})),
    };
    CHECK(mean_average_precision(traces).map == 1.0);
}

TEST_CASE("zero-positive labels are skipped and reported") {
    std::vector<ExitTrace> traces{
        make_trace({0.9, 0.1, 0.3}, LabelSpec::multi({0})),
        make_trace({0.1, 0.9, 0.2}, LabelSpec::multi({1})),
    };
    const MapResult result = mean_average_precision(traces);
    CHECK(result.labels_scored == 2);
    CHECK(result.labels_skipped == 1);  // label 2 has no positives
}

TEST_CASE("mAP agrees with the brute-force oracle on random instances") {
    DetRng rng(919);
    for (int trial = 0; trial < 200; ++trial) {
        const int n_videos = 2 + static_cast<int>(rng.uniform_int(19));
        const int n_labels = 1 + static_cast<int>(rng.uniform_int(5));
        std::vector<ExitTrace> traces;
        std::vector<std::vector<double>> scores(static_cast<std::size_t>(n_labels));
        std::vector<std::vector<bool>> positives(static_cast<std::size_t>(n_labels));
        for (int v = 0; v < n_videos; ++v) {
            std::vector<double> prediction(static_cast<std::size_t>(n_labels));
            std::vector<int> video_positives;
            for (int c = 0; c < n_labels; ++c) {
                prediction[static_cast<std::size_t>(c)] = rng.normal();
                const bool positive = rng.uniform01() < 0.45;
                if (positive) video_positives.push_back(c);
                scores[static_cast<std::size_t>(c)].push_back(prediction[static_cast<std::size_t>(c)]);
                positives[static_cast<std::size_t>(c)].push_back(positive);
            }
            if (video_positives.empty()) {
                video_positives.push_back(static_cast<int>(rng.uniform_int(
                    static_cast<std::uint64_t>(n_labels))));
                positives[static_cast<std::size_t>(video_positives[0])].back() = true;
            }
            traces.push_back(make_trace(prediction, LabelSpec::multi(video_positives)));
        }
        double expected_sum = 0.0;
        int scored = 0;
        for (int c = 0; c < n_labels; ++c) {
            bool any = false;
            for (bool p : positives[static_cast<std::size_t>(c)]) any = any || p;
            if (!any) continue;
            expected_sum += oracle_average_precision(scores[static_cast<std::size_t>(c)],
                                                     positives[static_cast<std::size_t>(c)]);
            ++scored;
        }
        const MapResult result = mean_average_precision(traces);
        REQUIRE(result.labels_scored == scored);
        REQUIRE(result.map == doctest::Approx(expected_sum / scored).epsilon(1e-12));
    }
}

TEST_CASE("exit histogram counts, shares, and accuracies") {
    std::vector<ExitTrace> traces;
    for (int i = 0; i < 6; ++i) {
        auto trace = make_trace({1.0, 0.0}, LabelSpec::single(i % 2 == 0 ? 0 : 1), i < 4 ? 1 : 3);
        trace.correct = i % 2 == 0;
        traces.push_back(trace);
    }
    const auto buckets = exit_histogram(traces, 4);
    REQUIRE(buckets.size() == 4);
    CHECK(buckets[0].count == 4);
    CHECK(buckets[2].count == 2);
    CHECK(buckets[0].share == doctest::Approx(4.0 / 6.0));
    CHECK(buckets[0].accuracy == doctest::Approx(0.5));
    CHECK(buckets[1].count == 0);
    CHECK(std::isnan(buckets[1].accuracy));
    std::size_t total = 0;
    for (const auto& bucket : buckets) total += bucket.count;
    CHECK(total == traces.size());
}

TEST_CASE("all traces exiting at t=1 form a single full bucket") {
    std::vector<ExitTrace> traces{make_trace({1.0}, LabelSpec::single(0), 1),
                                  make_trace({1.0}, LabelSpec::single(0), 1)};
    for (auto& t : traces) t.correct = true;
    const auto buckets = exit_histogram(traces, 3);
    CHECK(buckets[0].share == 1.0);
    CHECK(buckets[1].count == 0);
    CHECK(buckets[2].count == 0);
}

TEST_CASE("evaluate aggregates flops, exits, and embeds the fingerprint") {
    std::vector<ExitTrace> traces{
        make_trace({1.0, 0.0}, LabelSpec::single(0), 1),
        make_trace({0.0, 1.0}, LabelSpec::single(1), 3),
    };
    traces[0].correct = true;
    traces[1].correct = true;
    const EvalReport report = evaluate(traces, 4, "cafebabe");
    CHECK(report.accuracy == 1.0);
    CHECK(report.mean_exit_timestep == 2.0);
    CHECK(report.mean_flops == 2e9);
    CHECK(report.fingerprint == "cafebabe");
    CHECK(report.n_videos == 2);

    std::ostringstream csv;
    write_report_csv(report, csv);
    CHECK(csv.str().find("cafebabe,top1,1,") != std::string::npos);
}

TEST_CASE("exit-matrix diagonal equals the histogram accuracies") {
    // random-gate model: exits spread over timesteps without training
    auto model = make_model(4, ModelDims{6, 8, 3}, PoolKind::Max, Policy::coarse_to_fine(),
                            LossVariant::CrossEntropy, false, 71);
    DetRng rng(72);
    std::vector<VideoFeatures> videos;
    for (int i = 0; i < 120; ++i) {
        VideoFeatures video;
        video.video_id = "v" + std::to_string(i);
        video.n_frames = 12;
        video.dim = 6;
        video.label = LabelSpec::single(static_cast<int>(rng.uniform_int(3)));
        video.data.resize(12 * 6);
        for (auto& x : video.data) x = rng.normal();
        videos.push_back(std::move(video));
    }
    InferOptions opts;
    const auto traces = infer_all(model, videos, opts);
    const auto buckets = exit_histogram(traces, 4);
    const auto matrix = exit_matrix(model, videos, opts);
    for (int t = 0; t < 4; ++t) {
        CHECK(matrix.cohort_sizes[static_cast<std::size_t>(t)] ==
              buckets[static_cast<std::size_t>(t)].count);
        if (buckets[static_cast<std::size_t>(t)].count == 0) {
            CHECK(std::isnan(matrix.accuracy[static_cast<std::size_t>(t)][static_cast<std::size_t>(t)]));
        } else {
            CHECK(matrix.accuracy[static_cast<std::size_t>(t)][static_cast<std::size_t>(t)] ==
                  doctest::Approx(buckets[static_cast<std::size_t>(t)].accuracy).epsilon(1e-12));
        }
    }
}

TEST_CASE("compare-fixed at budget T_eff reproduces the no-exit accuracy") {
    auto model = make_model(4, ModelDims{6, 8, 3}, PoolKind::Max, Policy::coarse_to_fine(),
                            LossVariant::CrossEntropy, false, 81);
    DetRng rng(82);
    std::vector<VideoFeatures> videos;
    for (int i = 0; i < 60; ++i) {
        VideoFeatures video;
        video.video_id = "v" + std::to_string(i);
        video.n_frames = 10;
        video.dim = 6;
        video.label = LabelSpec::single(static_cast<int>(rng.uniform_int(3)));
        video.data.resize(10 * 6);
        for (auto& x : video.data) x = rng.normal();
        videos.push_back(std::move(video));
    }
    InferOptions opts;
    const auto result = compare_fixed_vs_adaptive(model, videos, {4}, opts);
    std::vector<ExitTrace> no_exit;
    for (const auto& video : videos) no_exit.push_back(infer_fixed_budget(model, video, 4, opts));
    REQUIRE(result.fixed_rows.size() == 1);
    CHECK(result.fixed_rows[0].first == 4);
    CHECK(result.fixed_rows[0].second == top1(no_exit));
    CHECK(result.mean_frames >= 1.0);
    CHECK(result.matched_k >= 1);
}

TEST_CASE("fingerprints are deterministic and content-sensitive") {
    CHECK(fingerprint_hex("abc") == fingerprint_hex("abc"));
    CHECK(fingerprint_hex("abc") != fingerprint_hex("abd"));
    CHECK(fingerprint_hex("abc").size() == 16);
}
