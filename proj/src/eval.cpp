#include "frameexit/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace frameexit {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

int argmax_index(std::span<const double> values) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(values.size()); ++i) {
        if (values[static_cast<std::size_t>(i)] > values[static_cast<std::size_t>(best)]) best = i;
    }
    return best;
}

std::string fmt(double value) {
    if (std::isnan(value)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

}  // namespace

double top1(const std::vector<ExitTrace>& traces) {
    if (traces.empty()) throw std::invalid_argument("top1: no traces");
    std::size_t correct = 0;
    for (const auto& trace : traces) {
        if (!trace.label.is_single()) {
            throw std::invalid_argument("top1: multi-label traces rejected; use mAP");
        }
        if (argmax_index(trace.prediction) == trace.label.category) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(traces.size());
}

MapResult mean_average_precision(const std::vector<ExitTrace>& traces) {
    if (traces.empty()) throw std::invalid_argument("mAP: no traces");
    const std::size_t n_labels = traces.front().prediction.size();
    for (const auto& trace : traces) {
        if (trace.prediction.size() != n_labels) {
            throw std::invalid_argument("mAP: inconsistent prediction sizes");
        }
    }

    MapResult result;
    std::vector<std::size_t> ranking(traces.size());
    double ap_sum = 0.0;
    for (std::size_t c = 0; c < n_labels; ++c) {
        std::size_t positives = 0;
        for (const auto& trace : traces) {
            if (trace.label.contains(static_cast<int>(c))) ++positives;
        }
        if (positives == 0) {
            ++result.labels_skipped;
            continue;
        }
        std::iota(ranking.begin(), ranking.end(), 0);
        std::stable_sort(ranking.begin(), ranking.end(), [&](std::size_t a, std::size_t b) {
            return traces[a].prediction[c] > traces[b].prediction[c];
        });
        double hits = 0.0;
        double ap = 0.0;
        for (std::size_t rank = 0; rank < ranking.size(); ++rank) {
            if (traces[ranking[rank]].label.contains(static_cast<int>(c))) {
                hits += 1.0;
                ap += hits / static_cast<double>(rank + 1);
            }
        }
        ap_sum += ap / static_cast<double>(positives);
        ++result.labels_scored;
    }
    if (result.labels_scored == 0) throw std::invalid_argument("mAP: every label has zero positives");
    result.map = ap_sum / static_cast<double>(result.labels_scored);
    return result;
}

std::vector<HistogramBucket> exit_histogram(const std::vector<ExitTrace>& traces, int timesteps) {
    if (traces.empty()) throw std::invalid_argument("exit_histogram: no traces");
    std::vector<HistogramBucket> buckets(static_cast<std::size_t>(timesteps));
    std::vector<std::size_t> correct(static_cast<std::size_t>(timesteps), 0);
    for (int t = 0; t < timesteps; ++t) buckets[static_cast<std::size_t>(t)].timestep = t + 1;
    for (const auto& trace : traces) {
        auto& bucket = buckets.at(static_cast<std::size_t>(trace.exit_timestep - 1));
        bucket.count += 1;
        if (trace.correct) correct[static_cast<std::size_t>(trace.exit_timestep - 1)] += 1;
    }
    for (int t = 0; t < timesteps; ++t) {
        auto& bucket = buckets[static_cast<std::size_t>(t)];
        bucket.share = static_cast<double>(bucket.count) / static_cast<double>(traces.size());
        bucket.accuracy = bucket.count == 0 ? kNaN
                                            : static_cast<double>(correct[static_cast<std::size_t>(t)]) /
                                                  static_cast<double>(bucket.count);
    }
    return buckets;
}

EvalReport evaluate(const std::vector<ExitTrace>& traces, int timesteps,
                    const std::string& fingerprint) {
    if (traces.empty()) throw std::invalid_argument("evaluate: no traces");
    EvalReport report;
    report.fingerprint = fingerprint;
    report.n_videos = traces.size();
    report.is_multilabel = !traces.front().label.is_single();
    for (const auto& trace : traces) {
        if (trace.label.is_single() == report.is_multilabel) {
            throw std::invalid_argument("evaluate: mixed single/multi-label traces");
        }
    }
    if (report.is_multilabel) {
        const MapResult map = mean_average_precision(traces);
        report.accuracy = map.map;
        report.labels_skipped = map.labels_skipped;
    } else {
        report.accuracy = top1(traces);
    }
    double flops = 0.0;
    double exits = 0.0;
    for (const auto& trace : traces) {
        flops += trace.flops;
        exits += trace.exit_timestep;
    }
    report.mean_flops = flops / static_cast<double>(traces.size());
    report.mean_exit_timestep = exits / static_cast<double>(traces.size());
    report.exit_histogram = exit_histogram(traces, timesteps);
    return report;
}

ExitMatrix exit_matrix(const CascadeModel& model, const std::vector<VideoFeatures>& videos,
                       const InferOptions& opts) {
    if (videos.empty()) throw std::invalid_argument("exit_matrix: no videos");
    const int t = model.timesteps;
    ExitMatrix matrix;
    matrix.timesteps = t;
    matrix.cohort_sizes.assign(static_cast<std::size_t>(t), 0);
    std::vector<std::vector<std::size_t>> correct(
        static_cast<std::size_t>(t), std::vector<std::size_t>(static_cast<std::size_t>(t), 0));
    std::vector<std::vector<std::size_t>> counted(
        static_cast<std::size_t>(t), std::vector<std::size_t>(static_cast<std::size_t>(t), 0));

    for (const auto& video : videos) {
        const ExitTrace trace = model.per_frame ? infer_prediction_pooling(model, video, opts)
                                                : infer(model, video, opts);
        const auto all_logits = classify_all_timesteps(model, video, opts);
        const auto i = static_cast<std::size_t>(trace.exit_timestep - 1);
        matrix.cohort_sizes[i] += 1;
        for (std::size_t j = 0; j < all_logits.size(); ++j) {
            counted[i][j] += 1;
            if (video.label.contains(argmax_index(all_logits[j]))) correct[i][j] += 1;
        }
    }

    matrix.accuracy.assign(static_cast<std::size_t>(t),
                           std::vector<double>(static_cast<std::size_t>(t), kNaN));
    for (std::size_t i = 0; i < static_cast<std::size_t>(t); ++i) {
        for (std::size_t j = 0; j < static_cast<std::size_t>(t); ++j) {
            if (counted[i][j] > 0) {
                matrix.accuracy[i][j] =
                    static_cast<double>(correct[i][j]) / static_cast<double>(counted[i][j]);
            }
        }
    }
    return matrix;
}

std::vector<SweepPoint> sweep_beta(const CascadeModel& stage1_model,
                                   const std::vector<VideoFeatures>& train_set,
                                   const std::vector<VideoFeatures>& test_set,
                                   const std::vector<double>& betas, const TrainConfig& config,
                                   const InferOptions& opts) {
    std::vector<SweepPoint> points;
    points.reserve(betas.size());
    for (const double beta : betas) {
        TrainConfig point_config = config;
        point_config.beta = beta;
        const TrainResult trained = train_gates(stage1_model, train_set, point_config);
        const auto traces = infer_all(trained.model, test_set, opts);
        SweepPoint point;
        point.beta = beta;
        point.pseudo_positive_rate = trained.pseudo_positive_rate;
        const std::string canonical = "sweep|beta=" + fmt(beta) + "|" + fmt(config.learning_rate) +
                                      "|" + std::to_string(config.seed);
        point.report = evaluate(traces, trained.model.timesteps, fingerprint_hex(canonical));
        points.push_back(std::move(point));
    }
    return points;
}

AdaptiveVsFixed compare_fixed_vs_adaptive(const CascadeModel& model,
                                          const std::vector<VideoFeatures>& videos,
                                          const std::vector<int>& budgets,
                                          const InferOptions& opts) {
    if (videos.empty()) throw std::invalid_argument("compare: no videos");
    AdaptiveVsFixed result;

    const auto adaptive_traces = infer_all(model, videos, opts);
    double frames = 0.0;
    for (const auto& trace : adaptive_traces) frames += trace.exit_timestep;
    result.mean_frames = frames / static_cast<double>(adaptive_traces.size());
    result.adaptive_accuracy = adaptive_traces.front().label.is_single()
                                   ? top1(adaptive_traces)
                                   : mean_average_precision(adaptive_traces).map;

    const auto fixed_accuracy = [&](int k) {
        std::vector<ExitTrace> traces;
        traces.reserve(videos.size());
        for (const auto& video : videos) traces.push_back(infer_fixed_budget(model, video, k, opts));
        return traces.front().label.is_single() ? top1(traces) : mean_average_precision(traces).map;
    };

    result.matched_k = std::clamp(static_cast<int>(std::lround(result.mean_frames)), 1,
                                  model.timesteps);
    result.fixed_accuracy_at_matched_k = fixed_accuracy(result.matched_k);
    for (const int k : budgets) result.fixed_rows.emplace_back(k, fixed_accuracy(k));
    return result;
}

// --- fingerprints & report files ---------------------------------------------

std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (const char ch : text) {
        hash ^= static_cast<unsigned char>(ch);
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

std::string fingerprint_hex(std::string_view canonical_config) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(canonical_config)));
    return buf;
}

void write_report_csv(const EvalReport& report, std::ostream& os) {
    os << "fingerprint,metric,accuracy,mean_flops,mean_exit_timestep,n_videos,labels_skipped\n";
    os << report.fingerprint << ',' << (report.is_multilabel ? "map" : "top1") << ','
       << fmt(report.accuracy) << ',' << fmt(report.mean_flops) << ','
       << fmt(report.mean_exit_timestep) << ',' << report.n_videos << ',' << report.labels_skipped
       << '\n';
}

void write_histogram_csv(const EvalReport& report, std::ostream& os) {
    os << "timestep,count,share,accuracy\n";
    for (const auto& bucket : report.exit_histogram) {
        os << bucket.timestep << ',' << bucket.count << ',' << fmt(bucket.share) << ','
           << fmt(bucket.accuracy) << '\n';
    }
}

void write_histogram_jsonl(const EvalReport& report, std::ostream& os) {
    for (const auto& bucket : report.exit_histogram) {
        nlohmann::json record{{"timestep", bucket.timestep},
                              {"count", bucket.count},
                              {"share", bucket.share}};
        if (std::isnan(bucket.accuracy)) {
            record["accuracy"] = nullptr;
        } else {
            record["accuracy"] = bucket.accuracy;
        }
        os << record.dump() << '\n';
    }
}

void write_exit_matrix_csv(const ExitMatrix& matrix, std::ostream& os) {
    os << "exit_t,cohort_size";
    for (int j = 1; j <= matrix.timesteps; ++j) os << ",c" << j;
    os << '\n';
    for (int i = 0; i < matrix.timesteps; ++i) {
        os << (i + 1) << ',' << matrix.cohort_sizes[static_cast<std::size_t>(i)];
        for (int j = 0; j < matrix.timesteps; ++j) {
            os << ',' << fmt(matrix.accuracy[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
        }
        os << '\n';
    }
}

void write_exit_matrix_jsonl(const ExitMatrix& matrix, std::ostream& os) {
    for (int i = 0; i < matrix.timesteps; ++i) {
        for (int j = 0; j < matrix.timesteps; ++j) {
            const double value = matrix.accuracy[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            nlohmann::json record{{"exit_t", i + 1},
                                  {"classifier", j + 1},
                                  {"cohort_size", matrix.cohort_sizes[static_cast<std::size_t>(i)]}};
            if (std::isnan(value)) {
                record["accuracy"] = nullptr;
            } else {
                record["accuracy"] = value;
            }
            os << record.dump() << '\n';
        }
    }
}

void write_sweep_csv(const std::vector<SweepPoint>& points, std::ostream& os) {
    os << "beta,accuracy,mean_flops,mean_exit_timestep\n";
    for (const auto& point : points) {
        os << fmt(point.beta) << ',' << fmt(point.report.accuracy) << ','
           << fmt(point.report.mean_flops) << ',' << fmt(point.report.mean_exit_timestep) << '\n';
    }
}

void write_sweep_jsonl(const std::vector<SweepPoint>& points, std::ostream& os) {
    for (const auto& point : points) {
        nlohmann::json record{{"beta", point.beta},
                              {"accuracy", point.report.accuracy},
                              {"mean_flops", point.report.mean_flops},
                              {"mean_exit_timestep", point.report.mean_exit_timestep},
                              {"pseudo_positive_rate", point.pseudo_positive_rate}};
        os << record.dump() << '\n';
    }
}

void write_compare_csv(const std::vector<std::pair<std::string, AdaptiveVsFixed>>& rows,
                       std::ostream& os) {
    os << "run,mean_frames,adaptive_accuracy,matched_k,fixed_accuracy\n";
    for (const auto& [name, row] : rows) {
        os << name << ',' << fmt(row.mean_frames) << ',' << fmt(row.adaptive_accuracy) << ','
           << row.matched_k << ',' << fmt(row.fixed_accuracy_at_matched_k) << '\n';
        for (const auto& [k, accuracy] : row.fixed_rows) {
            os << name << "-fixed" << k << ",," << ',' << k << ',' << fmt(accuracy) << '\n';
        }
    }
}

}  // namespace frameexit
