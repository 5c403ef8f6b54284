// frameexit command line:
//   gen            write a seeded synthetic dataset (train/test manifests)
//   train          two-stage training (stage-1 checkpoint + final checkpoint)
//   train-gates    retrain gates from a stage-1 checkpoint at one beta
//   eval           run early-exit inference and write report/histogram/traces
//   sweep          gates retrained per beta; trade-off curve
//   exit-matrix    forced-classification accuracy grid by exit cohort
//   compare-fixed  adaptive exiting vs fixed frame budgets
// Every subcommand takes --config plus repeatable --set key=value overrides.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "frameexit/config.hpp"
#include "frameexit/eval.hpp"
#include "frameexit/svg.hpp"

namespace fs = std::filesystem;
using namespace frameexit;

namespace {

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "flat key=value config file");
    cmd->add_option("--set", args.overrides, "override, key=value (repeatable)");
}

AppConfig resolve_config(const CommonArgs& args) {
    AppConfig config = args.config_path.empty() ? AppConfig{} : load_config(args.config_path);
    apply_overrides(config, args.overrides);
    return config;
}

void write_file(const fs::path& path, const std::string& content) {
    if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

std::ofstream open_out(const fs::path& path) {
    if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

void write_train_log(const fs::path& path, const std::vector<EpochLog>& logs) {
    auto out = open_out(path);
    out << "epoch,stage,loss,lr\n";
    for (const auto& log : logs) out << log.line() << '\n';
}

void dump_traces(const fs::path& path, const std::vector<ExitTrace>& traces) {
    auto out = open_out(path);
    for (const auto& trace : traces) out << trace_to_json(trace) << '\n';
}

void emit_exit_stats_svg(const fs::path& path, const EvalReport& report) {
    SvgSeries series;
    series.label = "exit share / accuracy";
    series.color = "#2ca02c";
    for (const auto& bucket : report.exit_histogram) {
        if (bucket.count == 0) continue;
        series.points.emplace_back(bucket.timestep, bucket.accuracy);
        series.marker_radius.push_back(4.0 + 40.0 * bucket.share);
    }
    series.draw_line = false;
    write_file(path, render_svg_plot("Exit statistics", "exit timestep", "within-bucket accuracy",
                                     {series}));
}

int run_gen(const CommonArgs& args, const std::string& out_dir) {
    const AppConfig config = resolve_config(args);
    const SyntheticDataset dataset = generate_synthetic(config.data);
    save_dataset(dataset.train, fs::path(out_dir) / "train.manifest", "train.bin");
    save_dataset(dataset.test, fs::path(out_dir) / "test.manifest", "test.bin");
    std::cout << "wrote " << dataset.train.size() << " train / " << dataset.test.size()
              << " test videos to " << out_dir << "\n";
    return 0;
}

int run_train(const CommonArgs& args, const std::string& data_path, const std::string& out_prefix,
              bool stage1_only) {
    const AppConfig config = resolve_config(args);
    const auto train_set = load_dataset(data_path);
    std::vector<EpochLog> logs;
    const EpochCallback echo = [&](const EpochLog& log) {
        std::cout << log.line() << "\n";
        logs.push_back(log);
    };
    if (stage1_only || config.train.joint) {
        const TrainResult result = stage1_only ? train_stage1(train_set, config.train, echo)
                                               : train(train_set, config.train, echo);
        save_checkpoint(result.model, out_prefix + ".ckpt");
    } else {
        const TrainResult stage1 = train_stage1(train_set, config.train, echo);
        save_checkpoint(stage1.model, out_prefix + ".stage1.ckpt");
        const TrainResult stage2 = train_gates(stage1.model, train_set, config.train, echo);
        save_checkpoint(stage2.model, out_prefix + ".ckpt");
    }
    write_train_log(out_prefix + ".train.log", logs);
    std::cout << "checkpoint: " << out_prefix << ".ckpt\n";
    return 0;
}

int run_train_gates(const CommonArgs& args, const std::string& stage1_path,
                    const std::string& data_path, const std::string& out_path) {
    const AppConfig config = resolve_config(args);
    const CascadeModel stage1 = load_checkpoint(stage1_path);
    const auto train_set = load_dataset(data_path);
    std::vector<EpochLog> logs;
    const EpochCallback echo = [&](const EpochLog& log) {
        std::cout << log.line() << "\n";
        logs.push_back(log);
    };
    TrainConfig train_config = config.train;
    train_config.timesteps = stage1.timesteps;
    train_config.pooling = stage1.pooling;
    train_config.policy = stage1.policy;
    train_config.loss = stage1.loss;
    train_config.per_frame = stage1.per_frame;
    const TrainResult result = train_gates(stage1, train_set, train_config, echo);
    save_checkpoint(result.model, out_path);
    write_train_log(out_path + ".train.log", logs);
    std::cout << "checkpoint: " << out_path << "\n";
    return 0;
}

int run_eval(const CommonArgs& args, const std::string& model_path, const std::string& data_path,
             const std::string& out_dir, bool svg) {
    const AppConfig config = resolve_config(args);
    const CascadeModel model = load_checkpoint(model_path);
    const auto videos = load_dataset(data_path);
    const auto traces = infer_all(model, videos, config.infer_options());
    const EvalReport report = evaluate(traces, model.timesteps, config.fingerprint());

    { auto out = open_out(fs::path(out_dir) / "report.csv"); write_report_csv(report, out); }
    { auto out = open_out(fs::path(out_dir) / "exit_histogram.csv"); write_histogram_csv(report, out); }
    { auto out = open_out(fs::path(out_dir) / "exit_histogram.jsonl"); write_histogram_jsonl(report, out); }
    dump_traces(fs::path(out_dir) / "traces.jsonl", traces);
    if (svg) emit_exit_stats_svg(fs::path(out_dir) / "exit_histogram.svg", report);

    std::cout << (report.is_multilabel ? "mAP " : "top1 ") << report.accuracy << ", mean GFLOPs "
              << report.mean_flops / 1e9 << ", mean exit " << report.mean_exit_timestep << "\n";
    std::cout << "reports in " << out_dir << "\n";
    return 0;
}

int run_sweep(const CommonArgs& args, const std::string& stage1_path,
              const std::string& train_path, const std::string& test_path,
              const std::string& out_dir, bool svg) {
    const AppConfig config = resolve_config(args);
    const CascadeModel stage1 = load_checkpoint(stage1_path);
    const auto train_set = load_dataset(train_path);
    const auto test_set = load_dataset(test_path);
    const auto points =
        sweep_beta(stage1, train_set, test_set, config.betas, config.train, config.infer_options());

    { auto out = open_out(fs::path(out_dir) / "sweep.csv"); write_sweep_csv(points, out); }
    { auto out = open_out(fs::path(out_dir) / "sweep.jsonl"); write_sweep_jsonl(points, out); }
    if (svg) {
        SvgSeries series;
        series.label = "FrameExit";
        for (const auto& point : points) {
            series.points.emplace_back(point.report.mean_flops / 1e9, point.report.accuracy);
        }
        std::sort(series.points.begin(), series.points.end());
        write_file(fs::path(out_dir) / "tradeoff.svg",
                   render_svg_plot("Accuracy vs compute", "mean GFLOPs per video", "accuracy",
                                   {series}));
    }
    for (const auto& point : points) {
        std::cout << "beta " << point.beta << ": accuracy " << point.report.accuracy
                  << ", mean GFLOPs " << point.report.mean_flops / 1e9 << "\n";
    }
    return 0;
}

int run_exit_matrix(const CommonArgs& args, const std::string& model_path,
                    const std::string& data_path, const std::string& out_dir) {
    const AppConfig config = resolve_config(args);
    const CascadeModel model = load_checkpoint(model_path);
    const auto videos = load_dataset(data_path);
    const ExitMatrix matrix = exit_matrix(model, videos, config.infer_options());
    { auto out = open_out(fs::path(out_dir) / "exit_matrix.csv"); write_exit_matrix_csv(matrix, out); }
    { auto out = open_out(fs::path(out_dir) / "exit_matrix.jsonl"); write_exit_matrix_jsonl(matrix, out); }
    std::cout << "exit matrix in " << out_dir << "\n";
    return 0;
}

int run_compare_fixed(const CommonArgs& args, const std::string& stage1_path,
                      const std::string& train_path, const std::string& test_path,
                      const std::string& out_dir, const std::vector<int>& budgets) {
    const AppConfig config = resolve_config(args);
    const CascadeModel stage1 = load_checkpoint(stage1_path);
    const auto train_set = load_dataset(train_path);
    const auto test_set = load_dataset(test_path);

    std::vector<std::pair<std::string, AdaptiveVsFixed>> rows;
    for (const double beta : config.betas) {
        TrainConfig train_config = config.train;
        train_config.beta = beta;
        const TrainResult trained = train_gates(stage1, train_set, train_config);
        const AdaptiveVsFixed row =
            compare_fixed_vs_adaptive(trained.model, test_set, budgets, config.infer_options());
        char name[40];
        std::snprintf(name, sizeof(name), "beta=%g", beta);
        std::cout << name << ": adaptive " << row.adaptive_accuracy << " @ " << row.mean_frames
                  << " frames vs fixed " << row.fixed_accuracy_at_matched_k << " @ "
                  << row.matched_k << " frames\n";
        rows.emplace_back(name, row);
    }
    { auto out = open_out(fs::path(out_dir) / "compare_fixed.csv"); write_compare_csv(rows, out); }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"FrameExit: conditional early-exit cascade over per-frame video features"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string out_dir = "out";
    std::string out_prefix = "model";
    std::string model_path, stage1_path, data_path, train_path, test_path;
    std::vector<int> budgets;
    bool svg = false;

    auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
    add_common(gen, args);
    gen->add_option("--out", out_dir, "output directory")->required();

    auto* train_cmd = app.add_subcommand("train", "two-stage training");
    add_common(train_cmd, args);
    train_cmd->add_option("--data", data_path, "train manifest")->required();
    train_cmd->add_option("--out", out_prefix, "checkpoint prefix")->required();
    bool stage1_only = false;
    train_cmd->add_flag("--stage1-only", stage1_only, "stop after stage 1");

    auto* gates_cmd = app.add_subcommand("train-gates", "train gates from a stage-1 checkpoint");
    add_common(gates_cmd, args);
    gates_cmd->add_option("--stage1", stage1_path, "stage-1 checkpoint")->required();
    gates_cmd->add_option("--data", data_path, "train manifest")->required();
    gates_cmd->add_option("--out", out_prefix, "output checkpoint path")->required();

    auto* eval_cmd = app.add_subcommand("eval", "early-exit evaluation");
    add_common(eval_cmd, args);
    eval_cmd->add_option("--model", model_path, "checkpoint")->required();
    eval_cmd->add_option("--data", data_path, "test manifest")->required();
    eval_cmd->add_option("--out", out_dir, "output directory")->required();
    eval_cmd->add_flag("--svg", svg, "also emit SVG plots");

    auto* sweep_cmd = app.add_subcommand("sweep", "beta sweep from a stage-1 checkpoint");
    add_common(sweep_cmd, args);
    sweep_cmd->add_option("--stage1", stage1_path, "stage-1 checkpoint")->required();
    sweep_cmd->add_option("--train-data", train_path, "train manifest")->required();
    sweep_cmd->add_option("--test-data", test_path, "test manifest")->required();
    sweep_cmd->add_option("--out", out_dir, "output directory")->required();
    sweep_cmd->add_flag("--svg", svg, "also emit SVG plots");

    auto* matrix_cmd = app.add_subcommand("exit-matrix", "cohort accuracy grid");
    add_common(matrix_cmd, args);
    matrix_cmd->add_option("--model", model_path, "checkpoint")->required();
    matrix_cmd->add_option("--data", data_path, "test manifest")->required();
    matrix_cmd->add_option("--out", out_dir, "output directory")->required();

    auto* compare_cmd = app.add_subcommand("compare-fixed", "adaptive vs fixed budget");
    add_common(compare_cmd, args);
    compare_cmd->add_option("--stage1", stage1_path, "stage-1 checkpoint")->required();
    compare_cmd->add_option("--train-data", train_path, "train manifest")->required();
    compare_cmd->add_option("--test-data", test_path, "test manifest")->required();
    compare_cmd->add_option("--out", out_dir, "output directory")->required();
    compare_cmd->add_option("--budgets", budgets, "extra fixed budgets (frame counts)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return run_gen(args, out_dir);
        if (train_cmd->parsed()) return run_train(args, data_path, out_prefix, stage1_only);
        if (gates_cmd->parsed()) return run_train_gates(args, stage1_path, data_path, out_prefix);
        if (eval_cmd->parsed()) return run_eval(args, model_path, data_path, out_dir, svg);
        if (sweep_cmd->parsed()) return run_sweep(args, stage1_path, train_path, test_path, out_dir, svg);
        if (matrix_cmd->parsed()) return run_exit_matrix(args, model_path, data_path, out_dir);
        if (compare_cmd->parsed()) {
            return run_compare_fixed(args, stage1_path, train_path, test_path, out_dir, budgets);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
