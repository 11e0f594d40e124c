#pragma once

#include <compare>
#include <cstdint>
#include <deque>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tcg/event.hpp"

namespace tcg {

struct GraphParams {
    double delta = 2.0;    // correlation horizon, seconds
    double tau = 1.0;      // decay constant of the edge kernel, seconds
    double window = 40.0;  // seconds
    double stride = 20.0;  // seconds

    static GraphParams for_window(double window) {
        GraphParams p;
        p.window = window;
        p.stride = window / 2.0;
        return p;
    }

    void validate() const;  // throws InvalidParams
    bool operator==(const GraphParams&) const = default;
};

/// Aggregation key: all events of one process with the same operation on the
/// same class of target collapse into one node.
struct NodeKey {
    std::int64_t pid = 0;
    OperationKind op = OperationKind::FileRead;
    TargetClass target_class = TargetClass::Other;

    auto operator<=>(const NodeKey&) const = default;
};

NodeKey key_of(const EventRecord& event);
std::string describe(const NodeKey& key);

struct NodeAttr {
    std::int64_t count = 0;
    double first_ts = 0.0;
    double last_ts = 0.0;
    std::int64_t total_bytes = 0;
    std::int64_t write_count = 0;  // FILE_WRITE events aggregated here
    double entropy_sum = 0.0;      // over those writes

    double mean_entropy() const {
        return write_count > 0 ? entropy_sum / static_cast<double>(write_count) : 0.0;
    }
    bool operator==(const NodeAttr&) const = default;
};

struct EdgeAttr {
    double weight = 0.0;  // sum of exp(-gap / tau)
    std::int64_t count = 0;
    double gap_sum = 0.0;
    double min_gap = 0.0;

    double mean_gap() const {
        if (count == 0) return 0.0;
        // Rounding in gap_sum / count can land one ulp under min_gap.
        const double mean = gap_sum / static_cast<double>(count);
        return mean < min_gap ? min_gap : mean;
    }
    bool operator==(const EdgeAttr&) const = default;
};

using EdgeKey = std::pair<NodeKey, NodeKey>;

/// Directed graph over the node keys of one analysis window. Edge u -> v
/// accumulates one increment for every pair of correlated events (same pid or
/// same target) where an event at u strictly precedes an event at v by at
/// most delta seconds.
struct TemporalCorrelationGraph {
    double window_start = 0.0;
    double window_end = 0.0;
    GraphParams params;
    std::map<NodeKey, NodeAttr> nodes;
    std::map<EdgeKey, EdgeAttr> edges;
    std::int64_t event_count = 0;
    double last_ts = 0.0;  // newest inserted event; stream-order guard

    bool empty() const { return nodes.empty(); }
    bool operator==(const TemporalCorrelationGraph&) const = default;
};

struct Window {
    double start = 0.0;
    double end = 0.0;
    std::span<const EventRecord> events;
};

/// Half-open windows [k*stride, k*stride + window) for every k with
/// k*stride <= last timestamp. `events` must be aligned.
std::vector<Window> windows(std::span<const EventRecord> events, const GraphParams& params);

TemporalCorrelationGraph make_empty_graph(double start, double end, const GraphParams& params);

/// Batch construction. Throws WindowMismatch for events outside [start, end).
TemporalCorrelationGraph build_graph(std::span<const EventRecord> slice, double start, double end,
                                     const GraphParams& params);

struct BufferedEvent {
    EventRecord event;
    NodeKey key;
};

/// Events within delta of the newest inserted event, oldest first.
using RecentBuffer = std::deque<BufferedEvent>;

/// Streaming insertion. Produces exactly the graph build_graph would produce
/// on the same event sequence. Throws OutOfOrderEvent and WindowMismatch.
void update_graph(TemporalCorrelationGraph& graph, const EventRecord& event, RecentBuffer& recent);

struct TransitionRow {
    std::map<NodeKey, double> successors;
    double oov = 0.0;  // mass shared by every successor not listed
};

/// Additively smoothed successor distributions for every node.
std::map<NodeKey, TransitionRow> transition_probabilities(const TemporalCorrelationGraph& graph,
                                                          double alpha, std::int64_t vocab_size);

/// Induced subgraph on the weakly connected component containing `seed`.
TemporalCorrelationGraph extract_component(const TemporalCorrelationGraph& graph, const NodeKey& seed);

std::string to_dot(const TemporalCorrelationGraph& graph);

/// Snapshot document for retrospective analysis.
std::string serialize_graph(const TemporalCorrelationGraph& graph);
TemporalCorrelationGraph parse_graph(const std::string& text);

}  // namespace tcg
