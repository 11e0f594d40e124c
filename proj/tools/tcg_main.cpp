// tcg: command-line front end.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 assertion failure.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tcg/detection.hpp"
#include "tcg/errors.hpp"
#include "tcg/evaluation.hpp"
#include "tcg/event.hpp"
#include "tcg/graph.hpp"
#include "tcg/pipeline.hpp"
#include "tcg/simgen.hpp"
#include "tcg/sweep.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitAssert = 3;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Common {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string input;
    std::string output;
    std::string model;
    std::string mode;
    std::string log_path;
    bool assert_thresholds = false;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config_path, "pipeline configuration document");
    cmd->add_option("--seed", c.seed, "seed override");
    cmd->add_option("--input", c.input, "input file ('-' for stdin where supported)");
    cmd->add_option("--output", c.output, "output file ('-' for stdout where supported)");
    cmd->add_option("--model", c.model, "model document");
    cmd->add_option("--mode", c.mode, "stream|batch")->check(CLI::IsMember({"stream", "batch"}));
    cmd->add_option("--log", c.log_path, "append stage log lines here (default stderr)");
    cmd->add_flag("--assert", c.assert_thresholds, "exit 3 when a threshold check fails");
}

tcg::PipelineConfig resolve_config(const Common& c) {
    tcg::PipelineConfig cfg = c.config_path.empty() ? tcg::PipelineConfig{} : tcg::load_config(c.config_path);
    if (c.seed) cfg.seed = *c.seed;
    if (!c.input.empty()) cfg.input = c.input;
    if (!c.output.empty()) cfg.output = c.output;
    if (!c.mode.empty()) cfg.mode = c.mode == "batch" ? tcg::RunMode::Batch : tcg::RunMode::Stream;
    cfg.validate();
    return cfg;
}

// Owns the log stream for one command.
class LogTarget {
public:
    explicit LogTarget(const std::string& path) {
        if (!path.empty()) {
            file_ = std::make_unique<std::ofstream>(path, std::ios::app);
            if (!*file_) throw tcg::UnreadableInput("cannot open log file " + path);
        }
    }
    std::ostream* stream() { return file_ ? file_.get() : &std::cerr; }

private:
    std::unique_ptr<std::ofstream> file_;
};

std::vector<std::uint64_t> seed_range(std::uint64_t first, std::uint64_t count) {
    std::vector<std::uint64_t> out;
    for (std::uint64_t i = 0; i < count; ++i) out.push_back(first + i);
    return out;
}

void require(const std::string& value, const char* flag) {
    if (value.empty()) throw UsageError(std::string(flag) + " is required");
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw tcg::UnreadableInput("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Writes to a file, or stdout for "-".
class Output {
public:
    explicit Output(const std::string& path) {
        if (path == "-") return;
        file_ = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
        if (!*file_) throw tcg::UnreadableInput("cannot open " + path + " for writing");
    }
    std::ostream& stream() { return file_ ? *file_ : std::cout; }

private:
    std::unique_ptr<std::ofstream> file_;
};

void write_file(const std::string& path, const std::string& text) {
    Output out(path);
    out.stream() << text;
}

std::string default_truth_path(const std::string& trace) {
    const auto dot = trace.rfind('.');
    const auto slash = trace.find_last_of('/');
    const std::string stem = dot != std::string::npos && (slash == std::string::npos || dot > slash)
                                 ? trace.substr(0, dot)
                                 : trace;
    return stem + ".truth.jsonl";
}

int report_check(const char* what, const tcg::CheckResult& r, bool enforce) {
    std::cout << what << (r.pass ? ": PASS " : ": FAIL ") << r.detail << '\n';
    if (!r.pass && enforce) {
        std::cerr << "assertion failed: " << what << '\n';
        return kExitAssert;
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
    std::string profile;
    std::string preset;
    std::string truth;
};

int cmd_simulate(const Common& c, const SimulateArgs& a) {
    require(c.output, "--output");
    if (a.profile.empty() == a.preset.empty()) throw UsageError("give exactly one of --profile or --preset");

    tcg::MergedTrace trace;
    if (!a.preset.empty()) {
        if (a.preset != "acceptance") throw UsageError("unknown preset '" + a.preset + "'");
        trace = tcg::build_corpus(tcg::acceptance_corpus(c.seed.value_or(1)));
    } else {
        auto profile = tcg::parse_simulation_profile(read_text(a.profile));
        if (c.seed) profile.seed = *c.seed;
        trace = tcg::simulate(profile);
    }
    const std::string truth_path = a.truth.empty() ? default_truth_path(c.output) : a.truth;
    tcg::write_trace_file(c.output, trace.events);
    tcg::write_ground_truth_file(truth_path, trace.truth);

    std::size_t episodes = 0;
    for (const auto& iv : trace.truth) episodes += iv.label == tcg::Label::Ransomware;
    std::cout << "events=" << trace.events.size() << " episodes=" << episodes << " trace=" << c.output
              << " truth=" << truth_path << '\n';
    return kExitOk;
}

struct TrainArgs {
    std::string truth;
    std::string verdicts;
    std::optional<std::size_t> per_class;
};

int cmd_train(const Common& c, const TrainArgs& a) {
    auto cfg = resolve_config(c);
    require(cfg.input, "--input");
    require(c.model, "--model");
    const std::string truth_path = a.truth.empty() ? default_truth_path(cfg.input) : a.truth;

    LogTarget log_target(c.log_path);
    tcg::StageLog log(log_target.stream());
    const auto trace = tcg::read_trace_file(cfg.input, false);
    const auto events = tcg::align_events(trace.events);
    const auto truth = tcg::read_ground_truth_file(truth_path);
    const auto signatures = tcg::resolve_signatures(cfg);

    tcg::TrainOptions options;
    options.per_class = a.per_class;
    const auto result = tcg::run_train(cfg, events, truth, signatures, options, &log);
    log.flush("train");
    tcg::save_model(c.model, result.model);

    if (!a.verdicts.empty()) {
        std::vector<tcg::Alert> alerts;
        for (const auto& v : result.test_verdicts) {
            alerts.push_back(tcg::Alert{static_cast<std::int64_t>(alerts.size()), v.window_end + cfg.graph.delta, v});
        }
        Output out(a.verdicts);
        tcg::write_alerts(out.stream(), alerts);
    }
    std::cout << "train=" << result.n_train << " validation=" << result.n_validation << " test=" << result.n_test
              << " threshold=" << result.model.threshold << '\n'
              << tcg::metrics_text(result.test_counts);
    if (c.assert_thresholds) return report_check("detection_quality", tcg::check_detection_quality(result.test_counts), true);
    return kExitOk;
}

struct DetectArgs {
    int threads = 0;
};

int cmd_detect(const Common& c, const DetectArgs& a) {
    auto cfg = resolve_config(c);
    if (a.threads > 0) cfg.threads = a.threads;
    require(c.model, "--model");
    if (cfg.input.empty()) cfg.input = "-";
    if (cfg.output.empty()) cfg.output = "-";

    const auto model = tcg::load_model(c.model);
    std::vector<std::string> sig_errors;
    const auto signatures = tcg::resolve_signatures(cfg, &sig_errors);
    for (const auto& e : sig_errors) std::cerr << "signature skipped: " << e << '\n';

    std::unique_ptr<std::ifstream> file;
    std::istream* in = &std::cin;
    if (cfg.input != "-") {
        file = std::make_unique<std::ifstream>(cfg.input, std::ios::binary);
        if (!*file) throw tcg::UnreadableInput("cannot open " + cfg.input);
        in = file.get();
    }
    Output out(cfg.output);
    LogTarget log_target(c.log_path);
    tcg::StageLog log(log_target.stream());
    const auto s = tcg::run_detect(cfg, model, signatures, *in, out.stream(), &log);
    log.flush("detect");
    for (const auto& d : s.diagnostics) std::cerr << "skipped " << d << '\n';
    std::cerr << "lines=" << s.lines << " events=" << s.events << " skipped=" << s.skipped
              << " late=" << s.stream.late << " duplicates=" << s.stream.duplicates << " alerts=" << s.alerts
              << " positives=" << s.positives << '\n';
    return kExitOk;
}

struct EvalArgs {
    std::string trace;
    std::string truth;
    std::string families;
    std::string timeline;
    double min_precision = 0.90;
    double min_recall = 0.88;
};

int cmd_eval(const Common& c, const EvalArgs& a) {
    auto cfg = resolve_config(c);
    require(cfg.input, "--input");
    require(a.trace, "--trace");
    const std::string truth_path = a.truth.empty() ? default_truth_path(a.trace) : a.truth;

    LogTarget log_target(c.log_path);
    tcg::StageLog log(log_target.stream());
    tcg::StageTimer t;
    const auto alerts = tcg::read_alerts_file(cfg.input);
    const auto events = tcg::align_events(tcg::read_trace_file(a.trace, false).events);
    const auto truth = tcg::read_ground_truth_file(truth_path);
    log.add("ingest", static_cast<std::int64_t>(events.size()), t.elapsed_ms());

    tcg::StageTimer te;
    const auto r = tcg::evaluate_alerts(alerts, events, truth);
    log.add("decide", static_cast<std::int64_t>(alerts.size()), te.elapsed_ms());

    tcg::StageTimer tw;
    if (!cfg.output.empty()) write_file(cfg.output, tcg::summary_report(r.counts, r.latency, r.families));
    if (!a.families.empty()) {
        Output out(a.families);
        tcg::write_family_table(out.stream(), r.families);
    }
    if (!a.timeline.empty()) {
        std::vector<tcg::Verdict> verdicts;
        for (const auto& al : alerts) verdicts.push_back(al.verdict);
        Output out(a.timeline);
        tcg::write_timeline_csv(out.stream(), verdicts);
    }
    log.add("emit", static_cast<std::int64_t>(r.families.size()), tw.elapsed_ms());
    log.flush("eval");

    std::cout << tcg::metrics_text(r.counts);
    std::printf("latency_mean=%.4f latency_median=%.4f latency_max=%.4f undetected=%lld\n", r.latency.mean,
                r.latency.median, r.latency.max, static_cast<long long>(r.latency.undetected));
    std::fflush(stdout);
    if (!c.assert_thresholds) return kExitOk;
    return report_check("detection_quality", tcg::check_detection_quality(r.counts, a.min_precision, a.min_recall),
                        true);
}

struct SweepArgs {
    std::string sizes = "10,20,30,40,50,60";
    std::string speeds = "4.5,4.8,5.2,5.7,6.0";
    std::uint64_t seeds = 5;
    int episodes = 0;
    std::size_t per_class = tcg::kAcceptanceWindowsPerClass;
};

std::vector<double> parse_list(const std::string& text, const char* flag) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw UsageError(std::string(flag) + ": bad number '" + item + "'");
        }
    }
    if (out.empty()) throw UsageError(std::string(flag) + " is empty");
    return out;
}

int cmd_sweep_windows(const Common& c, const SweepArgs& a) {
    auto cfg = resolve_config(c);
    const auto sizes = parse_list(a.sizes, "--sizes");
    const auto seeds = seed_range(cfg.seed, a.seeds);
    auto corpus = tcg::acceptance_corpus(cfg.seed);
    if (a.episodes > 0) corpus.episodes = a.episodes;
    tcg::TrainOptions options;
    options.per_class = a.per_class;

    tcg::StageTimer t;
    const auto rows = tcg::sweep_windows(corpus, cfg, sizes, seeds, options);
    LogTarget log_target(c.log_path);
    tcg::StageLog log(log_target.stream());
    log.add("decide", static_cast<std::int64_t>(sizes.size() * seeds.size()), t.elapsed_ms());

    std::ostringstream csv;
    tcg::write_window_sweep_csv(csv, rows, seeds);
    write_file(cfg.output.empty() ? "-" : cfg.output, csv.str());
    log.add("emit", static_cast<std::int64_t>(rows.size()), 0.0);
    log.flush("sweep-windows");
    return report_check("window_trend", tcg::check_window_trend(rows), c.assert_thresholds);
}

int cmd_sweep_speeds(const Common& c, const SweepArgs& a) {
    auto cfg = resolve_config(c);
    const auto speeds = parse_list(a.speeds, "--speeds");
    const auto signatures = tcg::resolve_signatures(cfg);
    const auto corpus = tcg::acceptance_corpus(cfg.seed);

    LogTarget log_target(c.log_path);
    tcg::StageLog log(log_target.stream());
    tcg::DetectionModel model;
    if (!c.model.empty()) {
        model = tcg::load_model(c.model);
    } else {
        const auto trace = tcg::build_corpus(corpus);
        tcg::TrainOptions options;
        options.per_class = a.per_class;
        model = tcg::run_train(cfg, trace.events, trace.truth, signatures, options, &log).model;
    }
    tcg::StageTimer t;
    const auto rows = tcg::sweep_speeds(model, signatures, corpus, tcg::RansomwareProfile{}, speeds,
                                        a.episodes > 0 ? a.episodes : 20);
    log.add("decide", static_cast<std::int64_t>(speeds.size()), t.elapsed_ms());

    std::ostringstream csv;
    tcg::write_speed_sweep_csv(csv, rows);
    write_file(cfg.output.empty() ? "-" : cfg.output, csv.str());
    log.add("emit", static_cast<std::int64_t>(rows.size()), 0.0);
    log.flush("sweep-speeds");
    return report_check("speed_robustness", tcg::check_speed_robustness(rows), c.assert_thresholds);
}

struct ExportArgs {
    double start = 0.0;
    std::string snapshot;
};

int cmd_export_dot(const Common& c, const ExportArgs& a) {
    auto cfg = resolve_config(c);
    require(cfg.input, "--input");
    tcg::GraphParams params = cfg.graph;
    if (!c.model.empty()) params = tcg::load_model(c.model).graph;

    const auto events = tcg::align_events(tcg::read_trace_file(cfg.input, false).events);
    const double end = a.start + params.window;
    auto lo = std::lower_bound(events.begin(), events.end(), a.start,
                               [](const tcg::EventRecord& e, double t) { return e.ts < t; });
    auto hi = std::lower_bound(lo, events.end(), end, [](const tcg::EventRecord& e, double t) { return e.ts < t; });
    const auto graph = tcg::build_graph(std::span<const tcg::EventRecord>(lo, hi), a.start, end, params);

    write_file(cfg.output.empty() ? "-" : cfg.output, tcg::to_dot(graph));
    if (!a.snapshot.empty()) write_file(a.snapshot, tcg::serialize_graph(graph));
    std::cerr << "nodes=" << graph.nodes.size() << " edges=" << graph.edges.size() << '\n';
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Temporal-correlation-graph ransomware detection"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "tcg 0.1.0");

    Common common;
    SimulateArgs sim;
    TrainArgs train;
    DetectArgs detect;
    EvalArgs eval;
    SweepArgs sweep;
    ExportArgs exp;

    auto* c_sim = app.add_subcommand("simulate", "generate a synthetic trace and its ground truth");
    add_common(c_sim, common);
    c_sim->add_option("--profile", sim.profile, "simulation profile document");
    c_sim->add_option("--preset", sim.preset, "built-in corpus: acceptance");
    c_sim->add_option("--truth", sim.truth, "ground-truth output (default <output stem>.truth.jsonl)");

    auto* c_train = app.add_subcommand("train", "fit a detection model on a labelled trace");
    add_common(c_train, common);
    c_train->add_option("--truth", train.truth, "ground truth (default <input stem>.truth.jsonl)");
    c_train->add_option("--verdicts", train.verdicts, "write test-split verdicts as alert lines");
    c_train->add_option("--per-class", train.per_class, "cap on windows drawn per label");

    auto* c_detect = app.add_subcommand("detect", "score a trace and write one alert per window");
    add_common(c_detect, common);
    c_detect->add_option("--threads", detect.threads, "worker threads (1 = single-threaded)");

    auto* c_eval = app.add_subcommand("eval", "score saved alerts against ground truth");
    add_common(c_eval, common);
    c_eval->add_option("--trace", eval.trace, "trace the alerts were produced from");
    c_eval->add_option("--truth", eval.truth, "ground truth (default <trace stem>.truth.jsonl)");
    c_eval->add_option("--families", eval.families, "per-family CSV output");
    c_eval->add_option("--timeline", eval.timeline, "per-window timeline CSV output");
    c_eval->add_option("--min-precision", eval.min_precision, "--assert threshold");
    c_eval->add_option("--min-recall", eval.min_recall, "--assert threshold");

    auto* c_sw = app.add_subcommand("sweep-windows", "accuracy against window size");
    add_common(c_sw, common);
    c_sw->add_option("--sizes", sweep.sizes, "comma-separated window sizes (s)");
    c_sw->add_option("--seeds", sweep.seeds, "number of seeds starting at --seed");
    c_sw->add_option("--episodes", sweep.episodes, "episodes per corpus");
    c_sw->add_option("--per-class", sweep.per_class, "cap on windows drawn per label");

    auto* c_ss = app.add_subcommand("sweep-speeds", "detection rate against encryption speed");
    add_common(c_ss, common);
    c_ss->add_option("--speeds", sweep.speeds, "comma-separated speeds (MB/s)");
    c_ss->add_option("--episodes", sweep.episodes, "episodes per speed");
    c_ss->add_option("--per-class", sweep.per_class, "cap used when training a model in place");

    auto* c_dot = app.add_subcommand("export-dot", "export one window graph as DOT");
    add_common(c_dot, common);
    c_dot->add_option("--start", exp.start, "window start (s)");
    c_dot->add_option("--snapshot", exp.snapshot, "also write the graph snapshot document");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (c_sim->parsed()) return cmd_simulate(common, sim);
        if (c_train->parsed()) return cmd_train(common, train);
        if (c_detect->parsed()) return cmd_detect(common, detect);
        if (c_eval->parsed()) return cmd_eval(common, eval);
        if (c_sw->parsed()) return cmd_sweep_windows(common, sweep);
        if (c_ss->parsed()) return cmd_sweep_speeds(common, sweep);
        if (c_dot->parsed()) return cmd_export_dot(common, exp);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const tcg::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}
