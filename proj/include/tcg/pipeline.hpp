#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tcg/detection.hpp"
#include "tcg/evaluation.hpp"
#include "tcg/graph.hpp"
#include "tcg/signatures.hpp"

namespace tcg {

enum class RunMode : std::uint8_t { Stream, Batch };
std::string_view to_string(RunMode mode);

inline constexpr int kConfigFormatVersion = 1;

struct PipelineConfig {
    GraphParams graph;
    double alpha = 1.0;
    double entropy_threshold = 6.0;
    double p_thresh = 0.5;
    double target_fpr = 0.05;
    std::string signature_dir;  // empty: built-in signatures
    std::uint64_t seed = 1;
    std::string input;
    std::string output;
    RunMode mode = RunMode::Stream;
    int threads = 1;  // > 1 runs detect as three pipelined stages
    TrainingHyper training;
    double train_fraction = 0.6;
    double validation_fraction = 0.2;

    void validate() const;  // throws InvalidParams
    bool operator==(const PipelineConfig&) const = default;
};

/// Missing keys keep their defaults; unknown keys are rejected.
PipelineConfig parse_config(const std::string& text);
std::string serialize_config(const PipelineConfig& config);
PipelineConfig load_config(const std::string& path);

/// Built-in signatures, or the contents of config.signature_dir. Problems
/// with individual files are appended to `errors`.
std::vector<SignaturePattern> resolve_signatures(const PipelineConfig& config,
                                                 std::vector<std::string>* errors = nullptr);

// ---------------------------------------------------------------------------
// Stage logging

struct StageRecord {
    std::string stage;
    std::int64_t count = 0;
    double wall_ms = 0.0;
};

/// Accumulates per-stage counters and wall time; flush() writes one JSON line
/// per stage in first-use order.
class StageLog {
public:
    explicit StageLog(std::ostream* out = nullptr) : out_(out) {}

    void add(const std::string& stage, std::int64_t count, double wall_ms);
    const std::vector<StageRecord>& records() const { return records_; }
    void flush(const std::string& command);

private:
    std::ostream* out_;
    std::vector<StageRecord> records_;
};

class StageTimer {
public:
    StageTimer() : start_(std::chrono::steady_clock::now()) {}
    double elapsed_ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

// ---------------------------------------------------------------------------
// Training

struct TrainOptions {
    std::optional<std::size_t> per_class;  // balanced selection cap per label
};

struct TrainResult {
    DetectionModel model;
    std::vector<Verdict> test_verdicts;  // in window-start order
    std::vector<WindowLabel> test_labels;
    ConfusionCounts test_counts;
    std::size_t n_train = 0;
    std::size_t n_validation = 0;
    std::size_t n_test = 0;
    std::size_t n_benign = 0;
    std::size_t n_ransomware = 0;
};

/// Window-level training on one labelled trace. Throws InsufficientData and
/// DegenerateLabels.
TrainResult run_train(const PipelineConfig& config, std::span<const EventRecord> events,
                      const GroundTruth& truth, const std::vector<SignaturePattern>& signatures,
                      const TrainOptions& options = {}, StageLog* log = nullptr);

/// Test metrics block printed by `train` and `eval`.
std::string metrics_text(const ConfusionCounts& counts);

// ---------------------------------------------------------------------------
// Detection

/// The verdict for one completed window graph.
Verdict evaluate_window(const TemporalCorrelationGraph& graph, std::span<const EventRecord> slice,
                        const DetectionModel& model, const std::vector<SignaturePattern>& signatures);

struct Alert {
    std::int64_t seq = 0;
    double emit_ts = 0.0;  // stream time: window_end + delta
    Verdict verdict;
    bool operator==(const Alert&) const = default;
};

std::string serialize_alert(const Alert& alert);
Alert parse_alert_line(std::string_view line, std::size_t line_no = 0);
std::vector<Alert> read_alerts(std::istream& in);
std::vector<Alert> read_alerts_file(const std::string& path);
void write_alerts(std::ostream& out, std::span<const Alert> alerts);

/// Batch detection over an aligned trace.
std::vector<Alert> detect_batch(std::span<const EventRecord> events, const DetectionModel& model,
                                const std::vector<SignaturePattern>& signatures, StageLog* log = nullptr);

struct StreamStats {
    std::int64_t accepted = 0;
    std::int64_t late = 0;        // behind the release horizon; dropped
    std::int64_t duplicates = 0;  // repeated (ts, seq); dropped
    std::int64_t windows = 0;
};

/// Incremental detector. Arrivals may be out of order by up to delta seconds;
/// a reorder buffer releases events once they fall delta behind the newest
/// timestamp seen, and a window is closed once that watermark passes
/// window_end + delta. Alerts come out in window-start order.
class StreamDetector {
public:
    using Sink = std::function<void(Alert)>;

    StreamDetector(const DetectionModel& model, std::vector<SignaturePattern> signatures, Sink sink,
                   StageLog* log = nullptr);

    void push(const EventRecord& event);
    /// End of input: releases the buffer and closes every open window.
    void finish();
    const StreamStats& stats() const { return stats_; }

private:
    struct OpenWindow {
        TemporalCorrelationGraph graph;
        RecentBuffer recent;
        std::vector<EventRecord> slice;
    };
    using Key = std::pair<double, std::int64_t>;

    void release(double horizon);
    void insert(const EventRecord& event);
    void close_until(double horizon);
    void close_front();

    const DetectionModel& model_;
    std::vector<SignaturePattern> signatures_;
    Sink sink_;
    StageLog* log_;
    std::map<Key, EventRecord> pending_;
    std::optional<Key> last_released_;
    double watermark_ = 0.0;
    bool seen_any_ = false;
    std::int64_t next_window_ = 0;  // index of the next window to open
    std::deque<OpenWindow> open_;
    std::int64_t next_seq_ = 0;
    StreamStats stats_;
    double build_ms_ = 0.0;
    double features_ms_ = 0.0;
    double decide_ms_ = 0.0;
    std::int64_t events_built_ = 0;
};

/// Single-consumer, multi-producer queue with a fixed capacity. push blocks
/// while full; pop returns nullopt once the queue is closed and drained.
template <typename T>
class BoundedQueue {
public:
    explicit BoundedQueue(std::size_t capacity) : capacity_(capacity ? capacity : 1) {}

    void push(T item) {
        std::unique_lock lock(mutex_);
        not_full_.wait(lock, [&] { return items_.size() < capacity_ || closed_; });
        if (closed_) return;
        items_.push_back(std::move(item));
        not_empty_.notify_one();
    }

    std::optional<T> pop() {
        std::unique_lock lock(mutex_);
        not_empty_.wait(lock, [&] { return !items_.empty() || closed_; });
        if (items_.empty()) return std::nullopt;
        T item = std::move(items_.front());
        items_.pop_front();
        not_full_.notify_one();
        return item;
    }

    void close() {
        std::lock_guard lock(mutex_);
        closed_ = true;
        not_empty_.notify_all();
        not_full_.notify_all();
    }

private:
    std::size_t capacity_;
    std::deque<T> items_;
    bool closed_ = false;
    std::mutex mutex_;
    std::condition_variable not_empty_;
    std::condition_variable not_full_;
};

struct DetectSummary {
    std::int64_t lines = 0;
    std::int64_t events = 0;
    std::int64_t skipped = 0;  // malformed lines
    StreamStats stream;
    std::int64_t alerts = 0;
    std::int64_t positives = 0;
    std::vector<std::string> diagnostics;
};

/// Reads a trace from `in` (malformed lines are skipped and counted) and
/// writes one alert line per window to `out`. Stream and batch modes
/// produce identical bytes.
DetectSummary run_detect(const PipelineConfig& config, const DetectionModel& model,
                         const std::vector<SignaturePattern>& signatures, std::istream& in,
                         std::ostream& out, StageLog* log = nullptr);

// ---------------------------------------------------------------------------
// Evaluation of saved alerts

struct EvalResult {
    ConfusionCounts counts;
    LatencyStats latency;
    std::vector<FamilyMetrics> families;
    std::vector<WindowLabel> labels;
};

/// Labels every alert's window from the trace and ground truth, then scores.
EvalResult evaluate_alerts(std::span<const Alert> alerts, std::span<const EventRecord> events,
                           const GroundTruth& truth);

}  // namespace tcg
