#include "tcg/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

#include "json_util.hpp"
#include "tcg/errors.hpp"
#include "tcg/rng.hpp"

namespace tcg {

using detail::field;
using detail::Json;
using detail::OrderedJson;

std::string_view to_string(RunMode mode) { return mode == RunMode::Batch ? "batch" : "stream"; }

void PipelineConfig::validate() const {
    graph.validate();
    if (!(alpha >= 0.0)) throw InvalidParams("alpha must be >= 0");
    if (!(entropy_threshold >= 0.0 && entropy_threshold <= 8.0)) {
        throw InvalidParams("entropy_threshold must lie in [0, 8]");
    }
    if (!(p_thresh > 0.0 && p_thresh <= 1.0)) throw InvalidParams("p_thresh must lie in (0, 1]");
    if (!(target_fpr >= 0.0 && target_fpr <= 1.0)) throw InvalidParams("target_fpr must lie in [0, 1]");
    if (threads < 1) throw InvalidParams("threads must be >= 1");
    if (!(training.learning_rate > 0.0)) throw InvalidParams("learning_rate must be > 0");
    if (training.epochs < 1) throw InvalidParams("epochs must be >= 1");
    if (!(training.l2 >= 0.0)) throw InvalidParams("l2 must be >= 0");
    if (!(train_fraction > 0.0 && validation_fraction > 0.0 && train_fraction + validation_fraction < 1.0)) {
        throw InvalidParams("split fractions must be positive and leave room for a test set");
    }
}

PipelineConfig parse_config(const std::string& text) {
    const Json doc = detail::parse_document(text, "config");
    detail::reject_unknown(doc,
                           {"format_version", "graph", "alpha", "entropy_threshold", "p_thresh", "target_fpr",
                            "signature_dir", "seed", "input", "output", "mode", "threads", "training", "split"},
                           "config");
    detail::check_version(doc, kConfigFormatVersion, "config");

    PipelineConfig c;
    if (auto it = doc.find("graph"); it != doc.end()) {
        detail::reject_unknown(*it, {"delta", "tau", "window", "stride"}, "config.graph");
        detail::read_real(*it, "delta", c.graph.delta, "config.graph");
        detail::read_real(*it, "tau", c.graph.tau, "config.graph");
        detail::read_real(*it, "window", c.graph.window, "config.graph");
        if (it->contains("window") && !it->contains("stride")) c.graph.stride = c.graph.window / 2.0;
        detail::read_real(*it, "stride", c.graph.stride, "config.graph");
    }
    detail::read_real(doc, "alpha", c.alpha, "config");
    detail::read_real(doc, "entropy_threshold", c.entropy_threshold, "config");
    detail::read_real(doc, "p_thresh", c.p_thresh, "config");
    detail::read_real(doc, "target_fpr", c.target_fpr, "config");
    detail::read_optional(doc, "signature_dir", c.signature_dir, detail::to_text, "config");
    detail::read_optional(doc, "seed", c.seed, detail::to_uint, "config");
    detail::read_optional(doc, "input", c.input, detail::to_text, "config");
    detail::read_optional(doc, "output", c.output, detail::to_text, "config");
    if (auto it = doc.find("mode"); it != doc.end()) {
        const std::string mode = detail::to_text(*it, "config.mode");
        if (mode == "stream") c.mode = RunMode::Stream;
        else if (mode == "batch") c.mode = RunMode::Batch;
        else throw MalformedDocument("config.mode: expected 'stream' or 'batch'");
    }
    if (auto it = doc.find("threads"); it != doc.end()) {
        c.threads = static_cast<int>(detail::to_int(*it, "config.threads"));
    }
    if (auto it = doc.find("training"); it != doc.end()) {
        detail::reject_unknown(*it, {"learning_rate", "epochs", "l2"}, "config.training");
        detail::read_real(*it, "learning_rate", c.training.learning_rate, "config.training");
        if (auto e = it->find("epochs"); e != it->end()) {
            c.training.epochs = static_cast<int>(detail::to_int(*e, "config.training.epochs"));
        }
        detail::read_real(*it, "l2", c.training.l2, "config.training");
    }
    if (auto it = doc.find("split"); it != doc.end()) {
        detail::reject_unknown(*it, {"train", "validation"}, "config.split");
        detail::read_real(*it, "train", c.train_fraction, "config.split");
        detail::read_real(*it, "validation", c.validation_fraction, "config.split");
    }
    try {
        c.validate();
    } catch (const InvalidParams& err) {
        throw MalformedDocument(std::string("config: ") + err.what());
    }
    return c;
}

std::string serialize_config(const PipelineConfig& c) {
    OrderedJson doc;
    doc["format_version"] = kConfigFormatVersion;
    doc["graph"] = {{"delta", c.graph.delta}, {"tau", c.graph.tau}, {"window", c.graph.window},
                    {"stride", c.graph.stride}};
    doc["alpha"] = c.alpha;
    doc["entropy_threshold"] = c.entropy_threshold;
    doc["p_thresh"] = c.p_thresh;
    doc["target_fpr"] = c.target_fpr;
    doc["signature_dir"] = c.signature_dir;
    doc["seed"] = c.seed;
    doc["input"] = c.input;
    doc["output"] = c.output;
    doc["mode"] = std::string(to_string(c.mode));
    doc["threads"] = c.threads;
    doc["training"] = {{"learning_rate", c.training.learning_rate}, {"epochs", c.training.epochs},
                       {"l2", c.training.l2}};
    doc["split"] = {{"train", c.train_fraction}, {"validation", c.validation_fraction}};
    return doc.dump(2) + "\n";
}

PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UnreadableInput("cannot open config '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::vector<SignaturePattern> resolve_signatures(const PipelineConfig& config, std::vector<std::string>* errors) {
    if (config.signature_dir.empty()) return builtin_signatures();
    auto loaded = load_signature_dir(config.signature_dir);
    if (errors) errors->insert(errors->end(), loaded.errors.begin(), loaded.errors.end());
    return std::move(loaded.signatures);
}

// ---------------------------------------------------------------------------

void StageLog::add(const std::string& stage, std::int64_t count, double wall_ms) {
    for (auto& r : records_) {
        if (r.stage == stage) {
            r.count += count;
            r.wall_ms += wall_ms;
            return;
        }
    }
    records_.push_back(StageRecord{stage, count, wall_ms});
}

void StageLog::flush(const std::string& command) {
    if (out_) {
        for (const auto& r : records_) {
            OrderedJson line;
            line["command"] = command;
            line["stage"] = r.stage;
            line["count"] = r.count;
            line["wall_ms"] = std::round(r.wall_ms * 1000.0) / 1000.0;
            *out_ << line.dump() << '\n';
        }
        out_->flush();
    }
    records_.clear();
}

namespace {

void log_stage(StageLog* log, const std::string& stage, std::int64_t count, double ms) {
    if (log) log->add(stage, count, ms);
}

const TransitionModel* usable(const TransitionModel& m) { return m.fitted() ? &m : nullptr; }

FeatureVector window_features(const TemporalCorrelationGraph& graph, std::span<const EventRecord> slice,
                              const DetectionModel& model) {
    return apply_normalizer(model.normalizer,
                            feature_vector(graph, slice, usable(model.transitions), model.features));
}

Verdict decide_window(const FeatureVector& x, const TemporalCorrelationGraph& graph, const DetectionModel& model,
                      const std::vector<SignaturePattern>& signatures) {
    const DecisionInputs inputs{model.baseline, model.threshold, model.classifier, model.p_thresh};
    return decide(x, inputs, signature_hits(graph, signatures), graph.window_start, graph.window_end);
}

}  // namespace

Verdict evaluate_window(const TemporalCorrelationGraph& graph, std::span<const EventRecord> slice,
                        const DetectionModel& model, const std::vector<SignaturePattern>& signatures) {
    return decide_window(window_features(graph, slice, model), graph, model, signatures);
}

// ---------------------------------------------------------------------------
// Training

TrainResult run_train(const PipelineConfig& config, std::span<const EventRecord> events, const GroundTruth& truth,
                      const std::vector<SignaturePattern>& signatures, const TrainOptions& options,
                      StageLog* log) {
    config.validate();
    const GraphParams& params = config.graph;

    StageTimer t_ingest;
    const auto all = windows(events, params);
    std::vector<std::size_t> benign, ransom;
    std::vector<Label> labels(all.size());
    for (std::size_t i = 0; i < all.size(); ++i) {
        labels[i] = label_window(all[i].events, truth);
        (labels[i] == Label::Ransomware ? ransom : benign).push_back(i);
    }
    if (benign.empty() || ransom.empty()) {
        throw DegenerateLabels("training corpus needs benign and ransomware windows");
    }
    if (options.per_class) {
        Rng pick(derive_seed(config.seed, 11));
        for (auto* group : {&benign, &ransom}) {
            pick.shuffle(group->begin(), group->end());
            if (group->size() > *options.per_class) group->resize(*options.per_class);
        }
    }
    std::vector<std::size_t> chosen(benign);
    chosen.insert(chosen.end(), ransom.begin(), ransom.end());
    std::sort(chosen.begin(), chosen.end());
    Rng split(derive_seed(config.seed, 12));
    split.shuffle(chosen.begin(), chosen.end());

    const std::size_t n = chosen.size();
    const auto n_train = static_cast<std::size_t>(std::floor(config.train_fraction * static_cast<double>(n)));
    const auto n_val = static_cast<std::size_t>(std::floor(config.validation_fraction * static_cast<double>(n)));
    log_stage(log, "ingest", static_cast<std::int64_t>(events.size()), t_ingest.elapsed_ms());

    StageTimer t_build;
    std::vector<TemporalCorrelationGraph> graphs;
    graphs.reserve(n);
    for (std::size_t idx : chosen) {
        graphs.push_back(build_graph(all[idx].events, all[idx].start, all[idx].end, params));
    }
    log_stage(log, "build", static_cast<std::int64_t>(n), t_build.elapsed_ms());

    StageTimer t_features;
    std::vector<TemporalCorrelationGraph> benign_train;
    for (std::size_t i = 0; i < n_train; ++i) {
        if (labels[chosen[i]] == Label::Benign) benign_train.push_back(graphs[i]);
    }
    if (benign_train.empty()) throw InsufficientData("no benign windows in the training split");

    DetectionModel model;
    model.graph = params;
    model.features.entropy_threshold = config.entropy_threshold;
    model.p_thresh = config.p_thresh;
    model.transitions = fit_transition_model(benign_train, config.alpha);
    benign_train.clear();

    std::vector<FeatureVector> raw(n);
    for (std::size_t i = 0; i < n; ++i) {
        raw[i] = feature_vector(graphs[i], all[chosen[i]].events, &model.transitions, model.features);
    }
    model.normalizer = fit_normalizer(std::span<const FeatureVector>(raw.data(), n_train));
    std::vector<FeatureVector> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = apply_normalizer(model.normalizer, raw[i]);
    log_stage(log, "features", static_cast<std::int64_t>(n), t_features.elapsed_ms());

    StageTimer t_fit;
    std::vector<FeatureVector> benign_x, val_x, train_x;
    std::vector<int> train_y;
    for (std::size_t i = 0; i < n_train; ++i) {
        const bool positive = labels[chosen[i]] == Label::Ransomware;
        train_x.push_back(x[i]);
        train_y.push_back(positive ? 1 : 0);
        if (!positive) benign_x.push_back(x[i]);
    }
    for (std::size_t i = n_train; i < n_train + n_val; ++i) {
        if (labels[chosen[i]] == Label::Benign) val_x.push_back(x[i]);
    }
    model.baseline = fit_baseline(benign_x);
    model.threshold = calibrate_threshold(model.baseline, val_x, config.target_fpr);
    model.classifier = train_classifier(train_x, train_y, config.training);
    log_stage(log, "fit", static_cast<std::int64_t>(n_train), t_fit.elapsed_ms());

    StageTimer t_decide;
    TrainResult result;
    std::vector<std::size_t> test;
    for (std::size_t i = n_train + n_val; i < n; ++i) test.push_back(i);
    std::sort(test.begin(), test.end(), [&](std::size_t a, std::size_t b) { return chosen[a] < chosen[b]; });
    for (std::size_t i : test) {
        const auto& w = all[chosen[i]];
        result.test_verdicts.push_back(decide_window(x[i], graphs[i], model, signatures));
        result.test_labels.push_back(WindowLabel{w.start, w.end, labels[chosen[i]]});
    }
    result.test_counts = confusion(result.test_verdicts, result.test_labels);
    log_stage(log, "decide", static_cast<std::int64_t>(test.size()), t_decide.elapsed_ms());

    result.model = std::move(model);
    result.n_train = n_train;
    result.n_validation = n_val;
    result.n_test = n - n_train - n_val;
    result.n_benign = benign.size();
    result.n_ransomware = ransom.size();
    return result;
}

std::string metrics_text(const ConfusionCounts& c) {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "windows=%lld tp=%lld fp=%lld tn=%lld fn=%lld\n"
                  "precision=%.4f recall=%.4f f1=%.4f accuracy=%.4f\n",
                  static_cast<long long>(c.total()), static_cast<long long>(c.tp), static_cast<long long>(c.fp),
                  static_cast<long long>(c.tn), static_cast<long long>(c.fn), precision(c), recall(c), f1(c),
                  accuracy(c));
    return buf;
}

// ---------------------------------------------------------------------------
// Alerts

std::string serialize_alert(const Alert& a) {
    OrderedJson doc;
    doc["seq"] = a.seq;
    doc["emit_ts"] = a.emit_ts;
    doc["window_start"] = a.verdict.window_start;
    doc["window_end"] = a.verdict.window_end;
    doc["label"] = std::string(to_string(a.verdict.label));
    doc["severity"] = std::string(to_string(a.verdict.severity));
    doc["anomaly_score"] = a.verdict.anomaly_score;
    doc["prob"] = a.verdict.prob;
    doc["signature_hits"] = a.verdict.signature_hits;
    return doc.dump();
}

Alert parse_alert_line(std::string_view line, std::size_t line_no) {
    try {
        const Json doc = detail::parse_document(line, "alert");
        detail::reject_unknown(doc,
                               {"seq", "emit_ts", "window_start", "window_end", "label", "severity",
                                "anomaly_score", "prob", "signature_hits"},
                               "alert");
        Alert a;
        a.seq = detail::to_int(field(doc, "seq", "alert"), "seq");
        a.emit_ts = detail::to_real(field(doc, "emit_ts", "alert"), "emit_ts");
        a.verdict.window_start = detail::to_real(field(doc, "window_start", "alert"), "window_start");
        a.verdict.window_end = detail::to_real(field(doc, "window_end", "alert"), "window_end");
        const std::string label = detail::to_text(field(doc, "label", "alert"), "label");
        const auto parsed = parse_label(label);
        if (!parsed) throw MalformedDocument("unknown label '" + label + "'");
        a.verdict.label = *parsed;
        const std::string severity = detail::to_text(field(doc, "severity", "alert"), "severity");
        if (severity == "high") a.verdict.severity = Severity::High;
        else if (severity == "low") a.verdict.severity = Severity::Low;
        else throw MalformedDocument("unknown severity '" + severity + "'");
        a.verdict.anomaly_score = detail::to_real(field(doc, "anomaly_score", "alert"), "anomaly_score");
        a.verdict.prob = detail::to_real(field(doc, "prob", "alert"), "prob");
        const auto& hits = field(doc, "signature_hits", "alert");
        if (!hits.is_array()) throw MalformedDocument("signature_hits: expected a list");
        for (const auto& h : hits) a.verdict.signature_hits.push_back(detail::to_text(h, "signature_hits"));
        return a;
    } catch (const MalformedDocument& err) {
        throw MalformedRecord(line_no, err.what());
    }
}

std::vector<Alert> read_alerts(std::istream& in) {
    std::vector<Alert> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        out.push_back(parse_alert_line(line, line_no));
    }
    return out;
}

std::vector<Alert> read_alerts_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UnreadableInput("cannot open alerts '" + path + "'");
    return read_alerts(in);
}

void write_alerts(std::ostream& out, std::span<const Alert> alerts) {
    for (const auto& a : alerts) out << serialize_alert(a) << '\n';
}

// ---------------------------------------------------------------------------
// Detection

std::vector<Alert> detect_batch(std::span<const EventRecord> events, const DetectionModel& model,
                                const std::vector<SignaturePattern>& signatures, StageLog* log) {
    std::vector<Alert> alerts;
    double build_ms = 0.0, features_ms = 0.0, decide_ms = 0.0;
    for (const auto& w : windows(events, model.graph)) {
        StageTimer tb;
        const auto graph = build_graph(w.events, w.start, w.end, model.graph);
        build_ms += tb.elapsed_ms();
        StageTimer tf;
        const auto x = window_features(graph, w.events, model);
        features_ms += tf.elapsed_ms();
        StageTimer td;
        Alert a;
        a.seq = static_cast<std::int64_t>(alerts.size());
        a.emit_ts = w.end + model.graph.delta;
        a.verdict = decide_window(x, graph, model, signatures);
        decide_ms += td.elapsed_ms();
        alerts.push_back(std::move(a));
    }
    const auto count = static_cast<std::int64_t>(alerts.size());
    log_stage(log, "build", count, build_ms);
    log_stage(log, "features", count, features_ms);
    log_stage(log, "decide", count, decide_ms);
    return alerts;
}

StreamDetector::StreamDetector(const DetectionModel& model, std::vector<SignaturePattern> signatures, Sink sink,
                               StageLog* log)
    : model_(model), signatures_(std::move(signatures)), sink_(std::move(sink)), log_(log) {
    model_.graph.validate();
}

void StreamDetector::push(const EventRecord& event) {
    const Key key{event.ts, event.seq};
    if (last_released_ && key <= *last_released_) {
        ++(key == *last_released_ ? stats_.duplicates : stats_.late);
        return;
    }
    if (seen_any_ && event.ts < watermark_ - model_.graph.delta) {
        ++stats_.late;
        return;
    }
    if (!pending_.emplace(key, event).second) {
        ++stats_.duplicates;
        return;
    }
    ++stats_.accepted;
    if (!seen_any_ || event.ts > watermark_) watermark_ = event.ts;
    seen_any_ = true;
    release(watermark_ - model_.graph.delta);
}

void StreamDetector::finish() {
    release(std::numeric_limits<double>::infinity());
    while (!open_.empty()) close_front();
    if (log_) {
        log_->add("build", events_built_, build_ms_);
        log_->add("features", stats_.windows, features_ms_);
        log_->add("decide", stats_.windows, decide_ms_);
    }
    events_built_ = 0;
    build_ms_ = features_ms_ = decide_ms_ = 0.0;
}

void StreamDetector::release(double horizon) {
    while (!pending_.empty() && pending_.begin()->first.first <= horizon) {
        auto node = pending_.extract(pending_.begin());
        last_released_ = node.key();
        insert(node.mapped());
    }
    close_until(horizon);
}

void StreamDetector::insert(const EventRecord& event) {
    const GraphParams& p = model_.graph;
    StageTimer timer;
    for (;;) {
        const double start = static_cast<double>(next_window_) * p.stride;
        if (start > event.ts) break;
        OpenWindow w;
        w.graph = make_empty_graph(start, start + p.window, p);
        open_.push_back(std::move(w));
        ++next_window_;
    }
    for (auto& w : open_) {
        if (event.ts < w.graph.window_start || !(event.ts < w.graph.window_end)) continue;
        update_graph(w.graph, event, w.recent);
        w.slice.push_back(event);
    }
    ++events_built_;
    build_ms_ += timer.elapsed_ms();
}

void StreamDetector::close_until(double horizon) {
    while (!open_.empty() && open_.front().graph.window_end <= horizon) close_front();
}

void StreamDetector::close_front() {
    OpenWindow w = std::move(open_.front());
    open_.pop_front();
    StageTimer tf;
    const auto x = window_features(w.graph, w.slice, model_);
    features_ms_ += tf.elapsed_ms();
    StageTimer td;
    Alert a;
    a.seq = next_seq_++;
    a.emit_ts = w.graph.window_end + model_.graph.delta;
    a.verdict = decide_window(x, w.graph, model_, signatures_);
    decide_ms_ += td.elapsed_ms();
    ++stats_.windows;
    sink_(std::move(a));
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::size_t kMaxDiagnostics = 20;
constexpr std::size_t kQueueCapacity = 4096;

bool ignorable(const std::string& line) {
    return line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#';
}

void note_malformed(DetectSummary& s, const MalformedRecord& err) {
    ++s.skipped;
    if (s.diagnostics.size() < kMaxDiagnostics) s.diagnostics.emplace_back(err.what());
}

void tally(DetectSummary& s, const Alert& a) {
    ++s.alerts;
    if (a.verdict.label == Label::Ransomware) ++s.positives;
}

void detect_stream_serial(const DetectionModel& model, const std::vector<SignaturePattern>& signatures,
                          std::istream& in, std::ostream& out, DetectSummary& s, StageLog* log,
                          double& ingest_ms, double& emit_ms) {
    StreamDetector detector(model, signatures, [&](Alert a) {
        StageTimer t;
        out << serialize_alert(a) << '\n';
        tally(s, a);
        emit_ms += t.elapsed_ms();
    }, log);
    std::string line;
    while (true) {
        StageTimer t;
        if (!std::getline(in, line)) break;
        ++s.lines;
        if (ignorable(line)) {
            ingest_ms += t.elapsed_ms();
            continue;
        }
        std::optional<EventRecord> ev;
        try {
            ev = parse_event_line(line, static_cast<std::size_t>(s.lines));
            ++s.events;
        } catch (const MalformedRecord& err) {
            note_malformed(s, err);
        }
        ingest_ms += t.elapsed_ms();
        if (ev) detector.push(*ev);
    }
    detector.finish();
    s.stream = detector.stats();
}

void detect_stream_threaded(const DetectionModel& model, const std::vector<SignaturePattern>& signatures,
                            std::istream& in, std::ostream& out, DetectSummary& s, StageLog* log,
                            double& ingest_ms, double& emit_ms) {
    BoundedQueue<EventRecord> events(kQueueCapacity);
    BoundedQueue<Alert> alerts(kQueueCapacity);
    std::exception_ptr ingest_error, detect_error;

    std::thread ingest([&] {
        try {
            StageTimer t;
            std::string line;
            while (std::getline(in, line)) {
                ++s.lines;
                if (ignorable(line)) continue;
                try {
                    events.push(parse_event_line(line, static_cast<std::size_t>(s.lines)));
                    ++s.events;
                } catch (const MalformedRecord& err) {
                    note_malformed(s, err);
                }
            }
            ingest_ms = t.elapsed_ms();
        } catch (...) {
            ingest_error = std::current_exception();
        }
        events.close();
    });

    StreamStats stats;
    StageLog detect_log;
    std::thread detect([&] {
        try {
            StreamDetector detector(model, signatures, [&](Alert a) { alerts.push(std::move(a)); }, &detect_log);
            while (auto ev = events.pop()) detector.push(*ev);
            detector.finish();
            stats = detector.stats();
        } catch (...) {
            detect_error = std::current_exception();
            events.close();
        }
        alerts.close();
    });

    StageTimer t;
    while (auto a = alerts.pop()) {
        out << serialize_alert(*a) << '\n';
        tally(s, *a);
    }
    emit_ms = t.elapsed_ms();
    ingest.join();
    detect.join();
    if (ingest_error) std::rethrow_exception(ingest_error);
    if (detect_error) std::rethrow_exception(detect_error);
    s.stream = stats;
    for (const auto& r : detect_log.records()) log_stage(log, r.stage, r.count, r.wall_ms);
}

}  // namespace

DetectSummary run_detect(const PipelineConfig& config, const DetectionModel& model,
                         const std::vector<SignaturePattern>& signatures, std::istream& in, std::ostream& out,
                         StageLog* log) {
    if (!in) throw UnreadableInput("input stream is not readable");
    DetectSummary s;
    double ingest_ms = 0.0, emit_ms = 0.0;
    log_stage(log, "ingest", 0, 0.0);  // first in the log even though it is tallied last

    if (config.mode == RunMode::Batch) {
        StageTimer t;
        std::vector<EventRecord> events;
        std::string line;
        while (std::getline(in, line)) {
            ++s.lines;
            if (ignorable(line)) continue;
            try {
                events.push_back(parse_event_line(line, static_cast<std::size_t>(s.lines)));
                ++s.events;
            } catch (const MalformedRecord& err) {
                note_malformed(s, err);
            }
        }
        std::stable_sort(events.begin(), events.end(), [](const EventRecord& a, const EventRecord& b) {
            return std::tie(a.ts, a.seq) < std::tie(b.ts, b.seq);
        });
        auto dup = std::unique(events.begin(), events.end(), [](const EventRecord& a, const EventRecord& b) {
            return a.ts == b.ts && a.seq == b.seq;
        });
        s.stream.duplicates = events.end() - dup;
        events.erase(dup, events.end());
        s.stream.accepted = static_cast<std::int64_t>(events.size());
        ingest_ms = t.elapsed_ms();

        const auto alerts = detect_batch(events, model, signatures, log);
        StageTimer te;
        write_alerts(out, alerts);
        for (const auto& a : alerts) tally(s, a);
        s.stream.windows = static_cast<std::int64_t>(alerts.size());
        emit_ms = te.elapsed_ms();
    } else if (config.threads > 1) {
        detect_stream_threaded(model, signatures, in, out, s, log, ingest_ms, emit_ms);
    } else {
        detect_stream_serial(model, signatures, in, out, s, log, ingest_ms, emit_ms);
    }
    out.flush();

    log_stage(log, "ingest", s.events, ingest_ms);
    log_stage(log, "emit", s.alerts, emit_ms);
    return s;
}

// ---------------------------------------------------------------------------

EvalResult evaluate_alerts(std::span<const Alert> alerts, std::span<const EventRecord> events,
                           const GroundTruth& truth) {
    EvalResult r;
    std::vector<Verdict> verdicts;
    verdicts.reserve(alerts.size());
    auto ts_less = [](const EventRecord& e, double t) { return e.ts < t; };
    for (const auto& a : alerts) {
        const auto& v = a.verdict;
        auto lo = std::lower_bound(events.begin(), events.end(), v.window_start, ts_less);
        auto hi = std::lower_bound(lo, events.end(), v.window_end, ts_less);
        r.labels.push_back(
            WindowLabel{v.window_start, v.window_end, label_window(std::span<const EventRecord>(lo, hi), truth)});
        verdicts.push_back(v);
    }
    r.counts = confusion(verdicts, r.labels);
    const auto episodes = episodes_of(truth);
    r.latency = detection_latency(verdicts, episodes);
    r.families = per_family_metrics(verdicts, r.labels, events, truth);
    return r;
}

}  // namespace tcg
