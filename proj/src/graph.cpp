#include "tcg/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <queue>
#include <set>

#include "json_util.hpp"
#include "tcg/errors.hpp"

namespace tcg {

namespace {

const EventRecord& prior_event(const BufferedEvent& b) { return b.event; }

struct IndexedPrior {
    const EventRecord* event;
    const NodeKey* key;
};
const EventRecord& prior_event(const IndexedPrior& p) { return *p.event; }

template <class PriorRange, class KeyOf>
void accumulate(TemporalCorrelationGraph& g, const EventRecord& ev, const NodeKey& key,
                const PriorRange& priors, KeyOf prior_key) {
    auto [it, inserted] = g.nodes.try_emplace(key);
    NodeAttr& node = it->second;
    if (inserted) node.first_ts = ev.ts;
    ++node.count;
    node.last_ts = ev.ts;
    node.total_bytes += ev.bytes;
    if (ev.op == OperationKind::FileWrite) {
        ++node.write_count;
        node.entropy_sum += ev.entropy;
    }

    const double delta = g.params.delta;
    const double tau = g.params.tau;
    for (const auto& prior : priors) {
        const EventRecord& u = prior_event(prior);
        const double gap = ev.ts - u.ts;
        if (!(gap > 0.0) || gap > delta) continue;
        if (u.pid != ev.pid && u.target != ev.target) continue;
        const NodeKey& from = prior_key(prior);
        if (from == key) continue;

        EdgeAttr& edge = g.edges[EdgeKey{from, key}];
        edge.min_gap = edge.count == 0 ? gap : std::min(edge.min_gap, gap);
        edge.weight += std::exp(-gap / tau);
        ++edge.count;
        edge.gap_sum += gap;
    }

    ++g.event_count;
    g.last_ts = ev.ts;
}

void check_in_window(const EventRecord& ev, double start, double end) {
    if (ev.ts < start || ev.ts >= end) {
        throw WindowMismatch("event at t=" + std::to_string(ev.ts) + " outside window [" +
                             std::to_string(start) + ", " + std::to_string(end) + ")");
    }
}

nlohmann::ordered_json key_json(const NodeKey& k) {
    return {{"pid", k.pid},
            {"op", std::string(to_string(k.op))},
            {"class", std::string(to_string(k.target_class))}};
}

NodeKey key_from_json(const detail::Json& j, std::string_view where) {
    detail::reject_unknown(j, {"pid", "op", "class", "count", "first_ts", "last_ts", "total_bytes",
                               "write_count", "entropy_sum"},
                           where);
    NodeKey k;
    k.pid = detail::to_int(detail::field(j, "pid", where), where);
    const auto op = parse_operation(detail::to_text(detail::field(j, "op", where), where));
    const auto cls = parse_target_class(detail::to_text(detail::field(j, "class", where), where));
    if (!op || !cls) throw MalformedDocument(std::string(where) + ": bad node key");
    k.op = *op;
    k.target_class = *cls;
    return k;
}

}  // namespace

void GraphParams::validate() const {
    if (!(delta > 0.0) || !std::isfinite(delta)) throw InvalidParams("delta must be > 0");
    if (!(tau > 0.0) || !std::isfinite(tau)) throw InvalidParams("tau must be > 0");
    if (!(window > 0.0) || !std::isfinite(window)) throw InvalidParams("window must be > 0");
    if (!(stride > 0.0) || stride > window) throw InvalidParams("stride must be in (0, window]");
}

NodeKey key_of(const EventRecord& ev) {
    return NodeKey{ev.pid, ev.op, classify_target(ev.op, ev.target)};
}

std::string describe(const NodeKey& key) {
    return "pid=" + std::to_string(key.pid) + " " + std::string(to_string(key.op)) + " " +
           std::string(to_string(key.target_class));
}

std::vector<Window> windows(std::span<const EventRecord> events, const GraphParams& params) {
    params.validate();
    std::vector<Window> out;
    if (events.empty()) return out;
    const double last = events.back().ts;
    auto ts_less = [](const EventRecord& e, double t) { return e.ts < t; };
    for (std::int64_t k = 0;; ++k) {
        const double start = static_cast<double>(k) * params.stride;
        if (start > last) break;
        const double end = start + params.window;
        auto lo = std::lower_bound(events.begin(), events.end(), start, ts_less);
        auto hi = std::lower_bound(lo, events.end(), end, ts_less);
        out.push_back(Window{start, end, std::span<const EventRecord>(lo, hi)});
    }
    return out;
}

TemporalCorrelationGraph make_empty_graph(double start, double end, const GraphParams& params) {
    params.validate();
    if (!(start < end)) throw InvalidParams("window_start must precede window_end");
    TemporalCorrelationGraph g;
    g.window_start = start;
    g.window_end = end;
    g.params = params;
    return g;
}

TemporalCorrelationGraph build_graph(std::span<const EventRecord> slice, double start, double end,
                                     const GraphParams& params) {
    TemporalCorrelationGraph g = make_empty_graph(start, end, params);
    for (const auto& ev : slice) check_in_window(ev, start, end);

    std::vector<NodeKey> keys;
    keys.reserve(slice.size());
    for (const auto& ev : slice) keys.push_back(key_of(ev));

    std::vector<IndexedPrior> priors;
    std::size_t first = 0;
    for (std::size_t i = 0; i < slice.size(); ++i) {
        const double ts = slice[i].ts;
        while (first < i && ts - slice[first].ts > params.delta) ++first;
        priors.clear();
        for (std::size_t j = first; j < i; ++j) priors.push_back(IndexedPrior{&slice[j], &keys[j]});
        accumulate(g, slice[i], keys[i], priors, [](const IndexedPrior& p) -> const NodeKey& {
            return *p.key;
        });
    }
    return g;
}

void update_graph(TemporalCorrelationGraph& graph, const EventRecord& event, RecentBuffer& recent) {
    check_in_window(event, graph.window_start, graph.window_end);
    if (graph.event_count > 0 && event.ts < graph.last_ts) {
        throw OutOfOrderEvent("event at t=" + std::to_string(event.ts) +
                              " precedes last insert at t=" + std::to_string(graph.last_ts));
    }
    while (!recent.empty() && event.ts - recent.front().event.ts > graph.params.delta) {
        recent.pop_front();
    }
    const NodeKey key = key_of(event);
    accumulate(graph, event, key, recent, [](const BufferedEvent& b) -> const NodeKey& {
        return b.key;
    });
    recent.push_back(BufferedEvent{event, key});
}

std::map<NodeKey, TransitionRow> transition_probabilities(const TemporalCorrelationGraph& graph,
                                                          double alpha, std::int64_t vocab_size) {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw InvalidSmoothing("alpha must be >= 0");
    if (vocab_size < 1 || vocab_size < static_cast<std::int64_t>(graph.nodes.size())) {
        throw InvalidVocab("vocab size must cover every node key");
    }

    std::map<NodeKey, TransitionRow> rows;
    std::map<NodeKey, std::int64_t> out_total;
    for (const auto& [key, attr] : graph.nodes) rows[key];
    for (const auto& [ek, attr] : graph.edges) out_total[ek.first] += attr.count;

    const auto k = static_cast<double>(vocab_size);
    for (auto& [key, row] : rows) {
        const double total = static_cast<double>(out_total[key]);
        const double denom = total + alpha * k;
        if (denom == 0.0) {
            row.oov = 1.0;
            continue;
        }
        auto it = graph.edges.lower_bound(EdgeKey{key, NodeKey{INT64_MIN, {}, {}}});
        std::int64_t listed = 0;
        for (; it != graph.edges.end() && it->first.first == key; ++it) {
            row.successors[it->first.second] = (static_cast<double>(it->second.count) + alpha) / denom;
            ++listed;
        }
        row.oov = alpha * (k - static_cast<double>(listed)) / denom;
    }
    return rows;
}

TemporalCorrelationGraph extract_component(const TemporalCorrelationGraph& graph, const NodeKey& seed) {
    if (!graph.nodes.contains(seed)) throw UnknownNode("seed " + describe(seed) + " not in graph");

    std::map<NodeKey, std::vector<NodeKey>> adjacency;
    for (const auto& [ek, attr] : graph.edges) {
        adjacency[ek.first].push_back(ek.second);
        adjacency[ek.second].push_back(ek.first);
    }
    std::set<NodeKey> seen{seed};
    std::queue<NodeKey> frontier;
    frontier.push(seed);
    while (!frontier.empty()) {
        const NodeKey u = frontier.front();
        frontier.pop();
        for (const auto& v : adjacency[u]) {
            if (seen.insert(v).second) frontier.push(v);
        }
    }

    TemporalCorrelationGraph sub = make_empty_graph(graph.window_start, graph.window_end, graph.params);
    sub.last_ts = graph.last_ts;
    for (const auto& key : seen) {
        const NodeAttr& attr = graph.nodes.at(key);
        sub.nodes.emplace(key, attr);
        sub.event_count += attr.count;
    }
    for (const auto& [ek, attr] : graph.edges) {
        if (seen.contains(ek.first) && seen.contains(ek.second)) sub.edges.emplace(ek, attr);
    }
    return sub;
}

std::string to_dot(const TemporalCorrelationGraph& graph) {
    char buf[128];
    std::string out;
    std::snprintf(buf, sizeof buf, "// temporal correlation graph [%.3f, %.3f) nodes=%zu edges=%zu\n",
                  graph.window_start, graph.window_end, graph.nodes.size(), graph.edges.size());
    out += buf;
    if (graph.nodes.empty()) {
        out += "digraph tcg {}\n";
        return out;
    }
    out += "digraph tcg {\n";
    std::map<NodeKey, std::size_t> ids;
    for (const auto& [key, attr] : graph.nodes) {
        const std::size_t id = ids.size();
        ids.emplace(key, id);
        out += "  n" + std::to_string(id) + " [label=\"pid=" + std::to_string(key.pid) + "\\n" +
               std::string(to_string(key.op)) + "\\n" + std::string(to_string(key.target_class)) +
               "\\ncount=" + std::to_string(attr.count) + "\"];\n";
    }
    for (const auto& [ek, attr] : graph.edges) {
        std::snprintf(buf, sizeof buf, "  n%zu -> n%zu [label=\"%.3f\"];\n", ids.at(ek.first),
                      ids.at(ek.second), attr.weight);
        out += buf;
    }
    out += "}\n";
    return out;
}

std::string serialize_graph(const TemporalCorrelationGraph& g) {
    nlohmann::ordered_json doc;
    doc["format_version"] = 1;
    doc["window_start"] = g.window_start;
    doc["window_end"] = g.window_end;
    doc["params"] = {{"delta", g.params.delta},
                     {"tau", g.params.tau},
                     {"window", g.params.window},
                     {"stride", g.params.stride}};
    doc["event_count"] = g.event_count;
    doc["last_ts"] = g.last_ts;
    doc["nodes"] = nlohmann::ordered_json::array();
    for (const auto& [key, a] : g.nodes) {
        auto node = key_json(key);
        node["count"] = a.count;
        node["first_ts"] = a.first_ts;
        node["last_ts"] = a.last_ts;
        node["total_bytes"] = a.total_bytes;
        node["write_count"] = a.write_count;
        node["entropy_sum"] = a.entropy_sum;
        doc["nodes"].push_back(std::move(node));
    }
    doc["edges"] = nlohmann::ordered_json::array();
    for (const auto& [ek, a] : g.edges) {
        doc["edges"].push_back({{"from", key_json(ek.first)},
                                {"to", key_json(ek.second)},
                                {"weight", a.weight},
                                {"count", a.count},
                                {"gap_sum", a.gap_sum},
                                {"min_gap", a.min_gap}});
    }
    return doc.dump();
}

TemporalCorrelationGraph parse_graph(const std::string& text) {
    using detail::field;
    const auto doc = detail::parse_document(text, "graph");
    detail::reject_unknown(doc, {"format_version", "window_start", "window_end", "params",
                                 "event_count", "last_ts", "nodes", "edges"},
                           "graph");
    detail::check_version(doc, 1, "graph");
    GraphParams params;
    const auto& p = field(doc, "params", "graph");
    detail::reject_unknown(p, {"delta", "tau", "window", "stride"}, "graph.params");
    params.delta = detail::to_real(field(p, "delta", "graph.params"), "graph.params.delta");
    params.tau = detail::to_real(field(p, "tau", "graph.params"), "graph.params.tau");
    params.window = detail::to_real(field(p, "window", "graph.params"), "graph.params.window");
    params.stride = detail::to_real(field(p, "stride", "graph.params"), "graph.params.stride");

    auto g = make_empty_graph(detail::to_real(field(doc, "window_start", "graph"), "window_start"),
                              detail::to_real(field(doc, "window_end", "graph"), "window_end"), params);
    g.event_count = detail::to_int(field(doc, "event_count", "graph"), "event_count");
    g.last_ts = detail::to_real(field(doc, "last_ts", "graph"), "last_ts");
    for (const auto& n : field(doc, "nodes", "graph")) {
        NodeAttr a;
        a.count = detail::to_int(field(n, "count", "node"), "node.count");
        a.first_ts = detail::to_real(field(n, "first_ts", "node"), "node.first_ts");
        a.last_ts = detail::to_real(field(n, "last_ts", "node"), "node.last_ts");
        a.total_bytes = detail::to_int(field(n, "total_bytes", "node"), "node.total_bytes");
        a.write_count = detail::to_int(field(n, "write_count", "node"), "node.write_count");
        a.entropy_sum = detail::to_real(field(n, "entropy_sum", "node"), "node.entropy_sum");
        g.nodes.emplace(key_from_json(n, "node"), a);
    }
    for (const auto& e : field(doc, "edges", "graph")) {
        detail::reject_unknown(e, {"from", "to", "weight", "count", "gap_sum", "min_gap"}, "edge");
        EdgeAttr a;
        a.weight = detail::to_real(field(e, "weight", "edge"), "edge.weight");
        a.count = detail::to_int(field(e, "count", "edge"), "edge.count");
        a.gap_sum = detail::to_real(field(e, "gap_sum", "edge"), "edge.gap_sum");
        a.min_gap = detail::to_real(field(e, "min_gap", "edge"), "edge.min_gap");
        const NodeKey from = key_from_json(field(e, "from", "edge"), "edge.from");
        const NodeKey to = key_from_json(field(e, "to", "edge"), "edge.to");
        if (!g.nodes.contains(from) || !g.nodes.contains(to)) {
            throw MalformedDocument("edge endpoint missing from node list");
        }
        g.edges.emplace(EdgeKey{from, to}, a);
    }
    return g;
}

}  // namespace tcg
