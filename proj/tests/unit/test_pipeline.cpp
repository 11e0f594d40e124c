#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <thread>

#include "tcg/errors.hpp"
#include "tcg/pipeline.hpp"
#include "tcg/rng.hpp"
#include "tcg/sweep.hpp"

using namespace tcg;

namespace {
CorpusConfig small_corpus(std::uint64_t seed) {
    CorpusConfig c;
    c.seed = seed;
    c.episodes = 20;
    c.benign_segments = 8;
    c.backgrounds = default_backgrounds();
    c.families = default_families();
    return c;
}

struct Fixture {
    PipelineConfig config;
    MergedTrace trace;
    TrainResult trained;
    std::vector<SignaturePattern> sigs = builtin_signatures();
};

const Fixture& fixture() {
    static const Fixture f = [] {
        Fixture x;
        x.trace = build_corpus(small_corpus(3));
        TrainOptions o;
        o.per_class = 200;
        x.trained = run_train(x.config, x.trace.events, x.trace.truth, x.sigs, o);
        return x;
    }();
    return f;
}

std::string trace_text(std::span<const EventRecord> events) {
    std::ostringstream out;
    write_trace(out, events);
    return out.str();
}

std::string detect_text(PipelineConfig config, const std::string& input, DetectSummary* summary = nullptr) {
    std::istringstream in(input);
    std::ostringstream out;
    const auto s = run_detect(config, fixture().trained.model, fixture().sigs, in, out);
    if (summary) *summary = s;
    return out.str();
}
}  // namespace

TEST(Config, DefaultsUnknownKeysAndRoundTrip) {
    const auto c = parse_config(R"({"format_version":1})");
    EXPECT_EQ(c, PipelineConfig{});
    const auto d = parse_config(R"({"format_version":1,"graph":{"window":30,"stride":15},"mode":"batch","threads":3})");
    EXPECT_EQ(d.graph.window, 30.0);
    EXPECT_EQ(d.graph.delta, 2.0);
    EXPECT_EQ(d.mode, RunMode::Batch);
    EXPECT_EQ(d.threads, 3);
    EXPECT_EQ(parse_config(serialize_config(d)), d);
    EXPECT_EQ(serialize_config(parse_config(serialize_config(d))), serialize_config(d));
    EXPECT_THROW(parse_config(R"({"format_version":1,"windw":30})"), Error);
    EXPECT_THROW(parse_config(R"({"format_version":1,"graph":{"window":10,"stride":20}})"), Error);
    EXPECT_THROW(parse_config(R"({"format_version":1,"mode":"turbo"})"), Error);
}

TEST(Alerts, RoundTrip) {
    Alert a;
    a.seq = 3;
    a.emit_ts = 62.0;
    a.verdict.window_start = 20;
    a.verdict.window_end = 60;
    a.verdict.anomaly_score = 1.0 / 3.0;
    a.verdict.prob = 0.875;
    a.verdict.signature_hits = {"encrypt_chain"};
    a.verdict.label = Label::Ransomware;
    a.verdict.severity = Severity::High;
    const auto line = serialize_alert(a);
    EXPECT_EQ(parse_alert_line(line), a);
    std::ostringstream out;
    std::vector<Alert> v = {a, a};
    v[1].seq = 4;
    write_alerts(out, v);
    std::istringstream in(out.str());
    EXPECT_EQ(read_alerts(in), v);
    EXPECT_THROW(parse_alert_line("{}"), MalformedRecord);
}

TEST(Train, SplitsAndDeterminism) {
    const auto& f = fixture();
    const auto& r = f.trained;
    EXPECT_GT(r.n_train, 0u);
    EXPECT_GT(r.n_validation, 0u);
    EXPECT_GT(r.n_test, 0u);
    EXPECT_EQ(r.test_verdicts.size(), r.n_test);
    EXPECT_EQ(r.test_counts, confusion(r.test_verdicts, r.test_labels));
    TrainOptions o;
    o.per_class = 200;
    const auto again = run_train(f.config, f.trace.events, f.trace.truth, f.sigs, o);
    EXPECT_EQ(serialize_model(again.model), serialize_model(r.model));
    EXPECT_EQ(again.test_counts, r.test_counts);
    EXPECT_GE(accuracy(r.test_counts), 0.8);
}

TEST(Train, StageLogOrderAndDegenerateInput) {
    const auto& f = fixture();
    std::ostringstream sink;
    StageLog log(&sink);
    TrainOptions o;
    o.per_class = 150;
    run_train(f.config, f.trace.events, f.trace.truth, f.sigs, o, &log);
    ASSERT_FALSE(log.records().empty());
    EXPECT_EQ(log.records().front().stage, "ingest");
    log.flush("train");
    EXPECT_NE(sink.str().find("\"ingest\""), std::string::npos);

    BenignProfile b;
    b.duration = 600;
    const auto benign = merge_traces({benign_part(b, 1)});
    EXPECT_THROW(run_train(f.config, benign.events, benign.truth, f.sigs), DegenerateLabels);
}

TEST(Detect, StreamBatchAndThreadedAgree) {
    const auto& f = fixture();
    const auto text = trace_text(f.trace.events);
    PipelineConfig stream = f.config, batch = f.config, threaded = f.config;
    batch.mode = RunMode::Batch;
    threaded.threads = 3;
    DetectSummary s;
    const auto a = detect_text(stream, text, &s);
    EXPECT_EQ(a, detect_text(batch, text));
    EXPECT_EQ(a, detect_text(threaded, text));
    EXPECT_EQ(a, detect_text(stream, text));
    EXPECT_EQ(s.events, static_cast<std::int64_t>(f.trace.events.size()));
    EXPECT_EQ(s.skipped, 0);
    std::istringstream in(a);
    const auto alerts = read_alerts(in);
    EXPECT_EQ(static_cast<std::int64_t>(alerts.size()), s.alerts);
    const auto direct = detect_batch(f.trace.events, f.trained.model, f.sigs);
    EXPECT_EQ(alerts, direct);
    for (std::size_t i = 1; i < alerts.size(); ++i)
        EXPECT_LT(alerts[i - 1].verdict.window_start, alerts[i].verdict.window_start);
    for (const auto& al : alerts) EXPECT_EQ(al.emit_ts, al.verdict.window_end + f.config.graph.delta);
}

TEST(Detect, EmptyInput) {
    DetectSummary s;
    EXPECT_EQ(detect_text(fixture().config, "", &s), "");
    EXPECT_EQ(s.alerts, 0);
}

TEST(Detect, CorruptLinesAreSkipped) {
    const auto& f = fixture();
    Rng rng(17);
    std::vector<EventRecord> kept;
    std::string corrupt;
    std::int64_t bad = 0;
    for (const auto& e : f.trace.events) {
        if (rng.bernoulli(0.05)) {
            corrupt += "{\"ts\": broken\n";
            ++bad;
        } else {
            kept.push_back(e);
            corrupt += serialize_event(e) + "\n";
        }
    }
    DetectSummary s;
    const auto out = detect_text(f.config, corrupt, &s);
    EXPECT_EQ(s.skipped, bad);
    EXPECT_EQ(out, detect_text(f.config, trace_text(kept)));
}

TEST(Detect, ReorderWithinDeltaIsTolerated) {
    const auto& f = fixture();
    std::vector<EventRecord> shuffled(f.trace.events.begin(), f.trace.events.end());
    // Swap neighbours closer than half the horizon.
    for (std::size_t i = 0; i + 1 < shuffled.size(); i += 7) {
        if (shuffled[i + 1].ts - shuffled[i].ts < f.config.graph.delta / 2) std::swap(shuffled[i], shuffled[i + 1]);
    }
    std::vector<Alert> got;
    StreamDetector det(f.trained.model, f.sigs, [&](Alert a) { got.push_back(std::move(a)); });
    for (const auto& e : shuffled) det.push(e);
    det.finish();
    EXPECT_EQ(det.stats().late, 0);
    EXPECT_EQ(got, detect_batch(f.trace.events, f.trained.model, f.sigs));

    // Re-sending an event counts as a duplicate and changes nothing.
    std::vector<Alert> dup;
    StreamDetector d2(f.trained.model, f.sigs, [&](Alert a) { dup.push_back(std::move(a)); });
    for (const auto& e : f.trace.events) {
        d2.push(e);
        if (e.seq % 50 == 0) d2.push(e);
    }
    d2.finish();
    EXPECT_GT(d2.stats().duplicates, 0);
    EXPECT_EQ(dup, got);
}

TEST(Eval, MatchesTrainMetrics) {
    const auto& f = fixture();
    std::vector<Alert> alerts;
    for (std::size_t i = 0; i < f.trained.test_verdicts.size(); ++i) {
        const auto& v = f.trained.test_verdicts[i];
        alerts.push_back(Alert{static_cast<std::int64_t>(i), v.window_end + f.config.graph.delta, v});
    }
    const auto r = evaluate_alerts(alerts, f.trace.events, f.trace.truth);
    EXPECT_EQ(r.counts, f.trained.test_counts);
    EXPECT_EQ(metrics_text(r.counts), metrics_text(f.trained.test_counts));
}

TEST(BoundedQueue, ProducerConsumer) {
    BoundedQueue<int> q(4);
    std::vector<int> seen;
    std::thread consumer([&] {
        while (auto v = q.pop()) seen.push_back(*v);
    });
    for (int i = 0; i < 1000; ++i) q.push(i);
    q.close();
    consumer.join();
    ASSERT_EQ(seen.size(), 1000u);
    for (int i = 0; i < 1000; ++i) EXPECT_EQ(seen[i], i);
    EXPECT_FALSE(q.pop().has_value());
}

TEST(Sweep, SingleRowAndStability) {
    const auto corpus = small_corpus(5);
    TrainOptions o;
    o.per_class = 200;
    const std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    const auto rows = sweep_windows(corpus, PipelineConfig{}, {40.0}, seeds, o);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].window, 40.0);
    ASSERT_EQ(rows[0].accuracy.size(), 5u);
    for (double a : rows[0].accuracy) {
        EXPECT_GE(a, 0.0);
        EXPECT_LE(a, 1.0);
    }
    EXPECT_LE(rows[0].stddev, 0.05);
    std::ostringstream csv;
    write_window_sweep_csv(csv, rows, seeds);
    EXPECT_NE(csv.str().find("40"), std::string::npos);
}

TEST(Checks, Thresholds) {
    EXPECT_TRUE(check_detection_quality(ConfusionCounts{95, 5, 90, 5}).pass);
    EXPECT_FALSE(check_detection_quality(ConfusionCounts{80, 5, 90, 20}).pass);
    std::vector<WindowSweepRow> rows = {{10, {}, 0.80, 0}, {20, {}, 0.85, 0}, {40, {}, 0.90, 0}};
    EXPECT_TRUE(check_window_trend(rows).pass);
    rows[2].mean = 0.81;
    EXPECT_FALSE(check_window_trend(rows).pass);
    std::vector<SpeedSweepRow> sp = {{4.5, 20, 19, 0.95, 10}, {6, 20, 18, 0.90, 9}};
    EXPECT_TRUE(check_speed_robustness(sp).pass);
    sp[1].rate = 0.8;
    EXPECT_FALSE(check_speed_robustness(sp).pass);
    LatencyStats none;
    EXPECT_FALSE(check_latency(none, GraphParams{}).pass);
}
