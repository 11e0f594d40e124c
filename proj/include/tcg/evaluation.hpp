#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tcg/detection.hpp"
#include "tcg/event.hpp"
#include "tcg/graph.hpp"

namespace tcg {

struct ConfusionCounts {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t tn = 0;
    std::int64_t fn = 0;

    std::int64_t total() const { return tp + fp + tn + fn; }
    void add(Label truth, Label predicted);
    ConfusionCounts& operator+=(const ConfusionCounts& o);
    bool operator==(const ConfusionCounts&) const = default;
};

// Zero denominators yield 0.
double precision(const ConfusionCounts& c);
double recall(const ConfusionCounts& c);
double f1(const ConfusionCounts& c);
double accuracy(const ConfusionCounts& c);

struct WindowLabel {
    double start = 0.0;
    double end = 0.0;
    Label label = Label::Benign;
};

/// A window is ransomware iff it holds at least one event of ransomware
/// origin: inside a ransomware interval and, when the interval names a pid,
/// emitted by that process.
Label label_window(std::span<const EventRecord> slice, const GroundTruth& truth);
std::vector<WindowLabel> label_windows(std::span<const EventRecord> events, const GroundTruth& truth,
                                       const GraphParams& params);

/// Throws CoverageGap when a verdict's window has no label.
ConfusionCounts confusion(std::span<const Verdict> verdicts, std::span<const WindowLabel> labels);

struct Episode {
    double onset = 0.0;
    double end = 0.0;
    std::string family;
};

std::vector<Episode> episodes_of(const GroundTruth& truth);

struct LatencyStats {
    std::vector<std::optional<double>> per_episode;  // nullopt = undetected
    double mean = 0.0;
    double median = 0.0;
    double max = 0.0;
    std::int64_t undetected = 0;
    std::int64_t detected() const {
        return static_cast<std::int64_t>(per_episode.size()) - undetected;
    }
};

/// Latency of an episode is end(first alerting window) - onset, over
/// ransomware-labelled verdicts whose window starts no earlier than
/// onset - window length and no later than the episode end, and whose end
/// lies after the onset.
LatencyStats detection_latency(std::span<const Verdict> verdicts, std::span<const Episode> episodes);

struct FamilyMetrics {
    std::string family;
    ConfusionCounts counts;
};

/// Per-family rows: the positives of each family's episodes against all
/// benign windows of the evaluation set.
std::vector<FamilyMetrics> per_family_metrics(std::span<const Verdict> verdicts,
                                              std::span<const WindowLabel> labels,
                                              std::span<const EventRecord> events, const GroundTruth& truth);

/// Columns: family, precision, recall, accuracy.
void write_family_table(std::ostream& out, std::span<const FamilyMetrics> rows);

/// Per-window timeline: window_start, anomaly_score, label.
void write_timeline_csv(std::ostream& out, std::span<const Verdict> verdicts);

/// Structured summary document.
std::string summary_report(const ConfusionCounts& counts, const LatencyStats& latency,
                           std::span<const FamilyMetrics> families);

}  // namespace tcg
