#include "tcg/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <ostream>
#include <set>

#include "json_util.hpp"
#include "tcg/errors.hpp"

namespace tcg {

void ConfusionCounts::add(Label truth, Label predicted) {
    const bool t = truth == Label::Ransomware;
    const bool p = predicted == Label::Ransomware;
    if (t && p) ++tp;
    else if (!t && p) ++fp;
    else if (!t && !p) ++tn;
    else ++fn;
}

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
    return *this;
}

namespace {
double ratio(std::int64_t num, std::int64_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

bool from_interval(const EventRecord& ev, const LabeledInterval& iv) {
    return ev.ts >= iv.start && ev.ts <= iv.end && (!iv.pid || ev.pid == *iv.pid);
}

std::span<const EventRecord> slice_of(std::span<const EventRecord> events, double start, double end) {
    auto lo = std::lower_bound(events.begin(), events.end(), start,
                               [](const EventRecord& e, double t) { return e.ts < t; });
    auto hi = std::lower_bound(lo, events.end(), end,
                               [](const EventRecord& e, double t) { return e.ts < t; });
    return {lo, hi};
}
}  // namespace

double precision(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fp); }
double recall(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fn); }
double accuracy(const ConfusionCounts& c) { return ratio(c.tp + c.tn, c.total()); }
double f1(const ConfusionCounts& c) {
    const double p = precision(c);
    const double r = recall(c);
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

Label label_window(std::span<const EventRecord> slice, const GroundTruth& truth) {
    for (const auto& iv : truth) {
        if (iv.label != Label::Ransomware) continue;
        for (const auto& ev : slice) {
            if (from_interval(ev, iv)) return Label::Ransomware;
        }
    }
    return Label::Benign;
}

std::vector<WindowLabel> label_windows(std::span<const EventRecord> events, const GroundTruth& truth,
                                       const GraphParams& params) {
    std::vector<WindowLabel> labels;
    for (const auto& w : windows(events, params)) {
        labels.push_back(WindowLabel{w.start, w.end, label_window(w.events, truth)});
    }
    return labels;
}

ConfusionCounts confusion(std::span<const Verdict> verdicts, std::span<const WindowLabel> labels) {
    std::map<std::pair<double, double>, Label> index;
    for (const auto& l : labels) index[{l.start, l.end}] = l.label;
    ConfusionCounts c;
    for (const auto& v : verdicts) {
        auto it = index.find({v.window_start, v.window_end});
        if (it == index.end()) {
            throw CoverageGap("no ground-truth label for window [" + std::to_string(v.window_start) + ", " +
                              std::to_string(v.window_end) + ")");
        }
        c.add(it->second, v.label);
    }
    return c;
}

std::vector<Episode> episodes_of(const GroundTruth& truth) {
    std::vector<Episode> out;
    for (const auto& iv : truth) {
        if (iv.label == Label::Ransomware) out.push_back(Episode{iv.start, iv.end, iv.family});
    }
    return out;
}

LatencyStats detection_latency(std::span<const Verdict> verdicts, std::span<const Episode> episodes) {
    LatencyStats stats;
    std::vector<double> detected;
    for (const auto& ep : episodes) {
        const Verdict* first = nullptr;
        for (const auto& v : verdicts) {
            if (v.label != Label::Ransomware) continue;
            const double length = v.window_end - v.window_start;
            if (v.window_start < ep.onset - length || v.window_start > ep.end) continue;
            if (!(v.window_end > ep.onset)) continue;
            if (!first || v.window_start < first->window_start) first = &v;
        }
        if (first) {
            const double latency = first->window_end - ep.onset;
            stats.per_episode.emplace_back(latency);
            detected.push_back(latency);
        } else {
            stats.per_episode.emplace_back(std::nullopt);
            ++stats.undetected;
        }
    }
    if (!detected.empty()) {
        double sum = 0.0;
        for (double d : detected) sum += d;
        stats.mean = sum / static_cast<double>(detected.size());
        std::sort(detected.begin(), detected.end());
        const std::size_t n = detected.size();
        stats.median = n % 2 ? detected[n / 2] : 0.5 * (detected[n / 2 - 1] + detected[n / 2]);
        stats.max = detected.back();
    }
    return stats;
}

std::vector<FamilyMetrics> per_family_metrics(std::span<const Verdict> verdicts,
                                              std::span<const WindowLabel> labels,
                                              std::span<const EventRecord> events, const GroundTruth& truth) {
    std::map<std::pair<double, double>, Label> index;
    for (const auto& l : labels) index[{l.start, l.end}] = l.label;

    std::vector<std::string> families;
    for (const auto& iv : truth) {
        if (iv.label == Label::Ransomware &&
            std::find(families.begin(), families.end(), iv.family) == families.end()) {
            families.push_back(iv.family);
        }
    }
    std::vector<FamilyMetrics> rows;
    for (const auto& fam : families) rows.push_back(FamilyMetrics{fam, {}});

    for (const auto& v : verdicts) {
        auto it = index.find({v.window_start, v.window_end});
        if (it == index.end()) throw CoverageGap("verdict window without label");
        if (it->second == Label::Benign) {
            for (auto& row : rows) row.counts.add(Label::Benign, v.label);
            continue;
        }
        const auto slice = slice_of(events, v.window_start, v.window_end);
        std::set<std::string> present;
        for (const auto& iv : truth) {
            if (iv.label != Label::Ransomware || present.contains(iv.family)) continue;
            for (const auto& ev : slice) {
                if (from_interval(ev, iv)) {
                    present.insert(iv.family);
                    break;
                }
            }
        }
        for (auto& row : rows) {
            if (present.contains(row.family)) row.counts.add(Label::Ransomware, v.label);
        }
    }
    return rows;
}

void write_family_table(std::ostream& out, std::span<const FamilyMetrics> rows) {
    out << "family,precision,recall,accuracy\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, ",%.4f,%.4f,%.4f\n", precision(r.counts), recall(r.counts),
                      accuracy(r.counts));
        out << r.family << buf;
    }
}

void write_timeline_csv(std::ostream& out, std::span<const Verdict> verdicts) {
    out << "window_start,anomaly_score,label\n";
    char buf[96];
    for (const auto& v : verdicts) {
        std::snprintf(buf, sizeof buf, "%.6f,%.17g,", v.window_start, v.anomaly_score);
        out << buf << to_string(v.label) << '\n';
    }
}

std::string summary_report(const ConfusionCounts& c, const LatencyStats& latency,
                           std::span<const FamilyMetrics> families) {
    detail::OrderedJson doc;
    doc["format_version"] = 1;
    doc["metric_level"] = "window";
    doc["confusion"] = {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}};
    doc["precision"] = precision(c);
    doc["recall"] = recall(c);
    doc["f1"] = f1(c);
    doc["accuracy"] = accuracy(c);
    doc["latency"] = {{"episodes", latency.per_episode.size()},
                      {"detected", latency.detected()},
                      {"undetected", latency.undetected},
                      {"mean", latency.mean},
                      {"median", latency.median},
                      {"max", latency.max}};
    detail::OrderedJson fam = detail::OrderedJson::array();
    for (const auto& r : families) {
        fam.push_back({{"family", r.family},
                       {"precision", precision(r.counts)},
                       {"recall", recall(r.counts)},
                       {"accuracy", accuracy(r.counts)}});
    }
    doc["families"] = std::move(fam);
    return doc.dump(2) + "\n";
}

}  // namespace tcg
