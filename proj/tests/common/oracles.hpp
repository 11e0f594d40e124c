#pragma once

// Brute-force reference implementations used by the unit and acceptance
// tests. Nothing here calls into the library's metric code; they share only
// the data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "tcg/event.hpp"
#include "tcg/graph.hpp"
#include "tcg/rng.hpp"
#include "tcg/signatures.hpp"

namespace oracle {

using tcg::EdgeAttr;
using tcg::NodeAttr;
using tcg::NodeKey;
using tcg::TemporalCorrelationGraph;

// ---------------------------------------------------------------------------
// Random fixtures

/// Random digraph with n nodes; each ordered pair gets an edge with
/// probability p. Node keys vary in op and class so matcher tests get a mix.
inline TemporalCorrelationGraph random_graph(tcg::Rng& rng, std::size_t n, double p) {
    TemporalCorrelationGraph g;
    g.window_start = 0.0;
    g.window_end = 40.0;
    std::vector<NodeKey> keys;
    while (keys.size() < n) {
        NodeKey k{static_cast<std::int64_t>(rng.below(4)),
                  tcg::kAllOperations[rng.below(4)],  // read/write/rename/delete
                  tcg::kAllTargetClasses[rng.below(3)]};
        if (g.nodes.contains(k)) continue;
        NodeAttr a;
        a.count = 1 + static_cast<std::int64_t>(rng.below(5));
        a.first_ts = rng.uniform(0.0, 10.0);
        a.last_ts = a.first_ts + rng.uniform(0.0, 10.0);
        if (k.op == tcg::OperationKind::FileWrite) {
            a.write_count = a.count;
            a.entropy_sum = static_cast<double>(a.count) * rng.uniform(3.0, 8.0);
        }
        g.nodes.emplace(k, a);
        keys.push_back(k);
        g.event_count += a.count;
    }
    for (const auto& u : keys) {
        for (const auto& v : keys) {
            if (u == v || !rng.bernoulli(p)) continue;
            EdgeAttr e;
            e.count = 1 + static_cast<std::int64_t>(rng.below(4));
            e.min_gap = rng.uniform(0.01, 1.0);
            e.gap_sum = e.min_gap * static_cast<double>(e.count) + rng.uniform(0.0, 1.0);
            e.weight = rng.uniform(0.05, 1.0) * static_cast<double>(e.count);
            g.edges.emplace(std::make_pair(u, v), e);
        }
    }
    return g;
}

/// Aligned random events over [0, duration) with a few pids and a small
/// target pool, so both correlation rules fire.
inline std::vector<tcg::EventRecord> random_events(tcg::Rng& rng, std::size_t n, double duration) {
    static const char* targets[] = {"C:/Users/u/a.docx", "C:/Users/u/b.pdf", "C:/Windows/x.dll",
                                    "/tmp/t1",           "10.0.0.5:443",     "HKLM/Software/Run"};
    std::vector<tcg::EventRecord> ev;
    for (std::size_t i = 0; i < n; ++i) {
        tcg::EventRecord e;
        // Coarse timestamps make equal-ts ties common.
        e.ts = std::floor(rng.uniform(0.0, duration) * 4.0) / 4.0;
        e.seq = static_cast<std::int64_t>(i);
        e.pid = static_cast<std::int64_t>(rng.below(3));
        e.proc = "p" + std::to_string(e.pid);
        e.op = tcg::kAllOperations[rng.below(tcg::kAllOperations.size())];
        e.target = targets[rng.below(6)];
        e.bytes = static_cast<std::int64_t>(rng.below(5000));
        if (e.op == tcg::OperationKind::FileWrite) e.entropy = rng.uniform(0.0, 8.0);
        ev.push_back(e);
    }
    std::sort(ev.begin(), ev.end(), [](const auto& a, const auto& b) {
        return a.ts != b.ts ? a.ts < b.ts : a.seq < b.seq;
    });
    return ev;
}

// ---------------------------------------------------------------------------
// Graph construction

/// O(n^2) pairwise construction straight from the edge definition.
inline TemporalCorrelationGraph build_graph(std::span<const tcg::EventRecord> slice, double start, double end,
                                            const tcg::GraphParams& params) {
    TemporalCorrelationGraph g;
    g.window_start = start;
    g.window_end = end;
    g.params = params;
    for (const auto& e : slice) {
        const NodeKey k = tcg::key_of(e);
        auto [it, fresh] = g.nodes.try_emplace(k);
        NodeAttr& a = it->second;
        if (fresh) a.first_ts = e.ts;
        ++a.count;
        a.last_ts = e.ts;
        a.total_bytes += e.bytes;
        if (e.op == tcg::OperationKind::FileWrite) {
            ++a.write_count;
            a.entropy_sum += e.entropy;
        }
        ++g.event_count;
        g.last_ts = e.ts;
    }
    for (std::size_t v = 0; v < slice.size(); ++v) {
        for (std::size_t u = 0; u < v; ++u) {
            const auto& eu = slice[u];
            const auto& ev = slice[v];
            const double gap = ev.ts - eu.ts;
            if (!(gap > 0.0 && gap <= params.delta)) continue;
            if (eu.pid != ev.pid && eu.target != ev.target) continue;
            const NodeKey ku = tcg::key_of(eu);
            const NodeKey kv = tcg::key_of(ev);
            if (ku == kv) continue;
            auto [it, fresh] = g.edges.try_emplace({ku, kv});
            EdgeAttr& a = it->second;
            a.weight += std::exp(-gap / params.tau);
            a.gap_sum += gap;
            a.min_gap = fresh ? gap : std::min(a.min_gap, gap);
            ++a.count;
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// Metrics on the undirected simple projection

struct Dense {
    std::vector<NodeKey> keys;
    std::vector<std::vector<int>> adj;  // undirected 0/1
    std::vector<std::vector<double>> w; // directed weights
};

inline Dense dense(const TemporalCorrelationGraph& g) {
    Dense d;
    std::map<NodeKey, std::size_t> idx;
    for (const auto& [k, a] : g.nodes) {
        idx[k] = d.keys.size();
        d.keys.push_back(k);
    }
    const std::size_t n = d.keys.size();
    d.adj.assign(n, std::vector<int>(n, 0));
    d.w.assign(n, std::vector<double>(n, 0.0));
    for (const auto& [ek, a] : g.edges) {
        const auto u = idx.at(ek.first), v = idx.at(ek.second);
        d.adj[u][v] = d.adj[v][u] = 1;
        d.w[u][v] = a.weight;
    }
    return d;
}

inline double density(const TemporalCorrelationGraph& g) {
    const double n = static_cast<double>(g.nodes.size());
    if (n < 2) return 0.0;
    return static_cast<double>(g.edges.size()) / (n * (n - 1.0));
}

struct ClusteringRef {
    double global = 0.0;
    double mean_local = 0.0;
};

/// Triad enumeration over all node triples.
inline ClusteringRef clustering(const TemporalCorrelationGraph& g) {
    const Dense d = dense(g);
    const std::size_t n = d.keys.size();
    ClusteringRef r;
    if (n == 0) return r;
    std::int64_t closed = 0, triples = 0;
    double local_sum = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
        std::int64_t pairs = 0, links = 0;
        for (std::size_t a = 0; a < n; ++a) {
            for (std::size_t b = a + 1; b < n; ++b) {
                if (a == c || b == c || !d.adj[c][a] || !d.adj[c][b]) continue;
                ++pairs;
                if (d.adj[a][b]) ++links;
            }
        }
        triples += pairs;
        closed += links;  // each triangle is counted once per centre
        if (pairs > 0) local_sum += static_cast<double>(links) / static_cast<double>(pairs);
    }
    r.global = triples == 0 ? 0.0 : static_cast<double>(closed) / static_cast<double>(triples);
    r.mean_local = local_sum / static_cast<double>(n);
    return r;
}

/// Floyd-Warshall on the undirected projection.
inline std::int64_t diameter(const TemporalCorrelationGraph& g) {
    const Dense d = dense(g);
    const std::size_t n = d.keys.size();
    if (n <= 1) return 0;
    constexpr std::int64_t inf = 1 << 20;
    std::vector<std::vector<std::int64_t>> dist(n, std::vector<std::int64_t>(n, inf));
    for (std::size_t i = 0; i < n; ++i) {
        dist[i][i] = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (d.adj[i][j]) dist[i][j] = 1;
        }
    }
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) dist[i][j] = std::min(dist[i][j], dist[i][k] + dist[k][j]);

    // Components: reachable sets. Keys are sorted, so the first member of a
    // component is its smallest key.
    std::size_t best_root = 0, best_size = 0;
    for (std::size_t i = 0; i < n; ++i) {
        bool first = true;
        for (std::size_t j = 0; j < i; ++j) first = first && dist[i][j] >= inf;
        if (!first) continue;
        std::size_t size = 0;
        for (std::size_t j = 0; j < n; ++j) size += dist[i][j] < inf;
        if (size > best_size) {
            best_size = size;
            best_root = i;
        }
    }
    std::int64_t diam = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (dist[best_root][i] >= inf) continue;
        for (std::size_t j = 0; j < n; ++j) {
            if (dist[best_root][j] < inf) diam = std::max(diam, dist[i][j]);
        }
    }
    return diam;
}

/// Dense Google-matrix power iteration, run far past the library tolerance.
inline std::map<NodeKey, double> pagerank(const TemporalCorrelationGraph& g, double damping = 0.85) {
    const Dense d = dense(g);
    const std::size_t n = d.keys.size();
    std::map<NodeKey, double> out;
    if (n == 0) return out;
    std::vector<std::vector<double>> m(n, std::vector<double>(n, 0.0));  // m[v][u]
    for (std::size_t u = 0; u < n; ++u) {
        double s = 0.0;
        for (std::size_t v = 0; v < n; ++v) s += d.w[u][v];
        for (std::size_t v = 0; v < n; ++v) {
            const double p = s > 0.0 ? d.w[u][v] / s : 1.0 / static_cast<double>(n);
            m[v][u] = damping * p + (1.0 - damping) / static_cast<double>(n);
        }
    }
    std::vector<double> r(n, 1.0 / static_cast<double>(n)), next(n);
    for (int it = 0; it < 5000; ++it) {
        for (std::size_t v = 0; v < n; ++v) {
            long double acc = 0.0L;
            for (std::size_t u = 0; u < n; ++u) acc += static_cast<long double>(m[v][u]) * r[u];
            next[v] = static_cast<double>(acc);
        }
        double change = 0.0;
        for (std::size_t i = 0; i < n; ++i) change += std::abs(next[i] - r[i]);
        r.swap(next);
        if (change < 1e-15) break;
    }
    for (std::size_t i = 0; i < n; ++i) out[d.keys[i]] = r[i];
    return out;
}

// ---------------------------------------------------------------------------
// Signature matching

inline bool node_ok(const tcg::PatternNode& p, const NodeKey& k, const NodeAttr& a) {
    if (k.op != p.op) return false;
    if (p.target_class && k.target_class != *p.target_class) return false;
    if (a.count < p.min_count) return false;
    if (p.min_entropy) {
        const double mean = a.write_count > 0 ? a.entropy_sum / static_cast<double>(a.write_count) : 0.0;
        if (mean < *p.min_entropy) return false;
    }
    return true;
}

/// All injective assignments of pattern ids to graph nodes, filtered.
inline std::set<std::map<std::string, NodeKey>> matches(const TemporalCorrelationGraph& g,
                                                        const tcg::SignaturePattern& pat) {
    std::set<std::map<std::string, NodeKey>> out;
    std::vector<std::pair<NodeKey, NodeAttr>> nodes(g.nodes.begin(), g.nodes.end());
    const std::size_t k = pat.nodes.size();
    if (k > nodes.size()) return out;
    std::vector<std::size_t> pick(k, 0);
    // Odometer over nodes^k; discard non-injective tuples.
    while (true) {
        std::set<std::size_t> used(pick.begin(), pick.end());
        if (used.size() == k) {
            std::map<std::string, NodeKey> assign;
            bool ok = true;
            for (std::size_t i = 0; i < k && ok; ++i) {
                ok = node_ok(pat.nodes[i], nodes[pick[i]].first, nodes[pick[i]].second);
                assign[pat.nodes[i].id] = nodes[pick[i]].first;
            }
            for (const auto& e : pat.edges) {
                if (!ok) break;
                auto it = g.edges.find({assign.at(e.from), assign.at(e.to)});
                if (it == g.edges.end()) {
                    ok = false;
                } else if (e.max_mean_gap) {
                    const auto& a = it->second;
                    const double mean = a.gap_sum / static_cast<double>(a.count);
                    ok = std::max(mean, a.min_gap) <= *e.max_mean_gap;
                }
            }
            if (ok) out.insert(assign);
        }
        std::size_t pos = 0;
        while (pos < k && ++pick[pos] == nodes.size()) pick[pos++] = 0;
        if (pos == k) break;
    }
    return out;
}

/// Random connected pattern over ops read/write/rename/delete.
inline tcg::SignaturePattern random_pattern(tcg::Rng& rng, std::size_t n) {
    tcg::SignaturePattern p;
    p.name = "rnd";
    for (std::size_t i = 0; i < n; ++i) {
        tcg::PatternNode node;
        node.id = "v" + std::to_string(i);
        node.op = tcg::kAllOperations[rng.below(4)];
        if (rng.bernoulli(0.6)) node.target_class = tcg::kAllTargetClasses[rng.below(3)];
        node.min_count = 1 + static_cast<std::int64_t>(rng.below(2));
        if (node.op == tcg::OperationKind::FileWrite && rng.bernoulli(0.5)) node.min_entropy = rng.uniform(3.0, 8.0);
        p.nodes.push_back(node);
    }
    // Spanning tree with random directions, plus an optional extra edge.
    for (std::size_t i = 1; i < n; ++i) {
        const std::size_t j = rng.below(i);
        tcg::PatternEdge e;
        e.from = p.nodes[rng.bernoulli(0.5) ? i : j].id;
        e.to = e.from == p.nodes[i].id ? p.nodes[j].id : p.nodes[i].id;
        if (rng.bernoulli(0.3)) e.max_mean_gap = rng.uniform(0.2, 2.0);
        p.edges.push_back(e);
    }
    if (n == 3 && rng.bernoulli(0.3)) p.edges.push_back(tcg::PatternEdge{"v0", "v2", std::nullopt});
    return p;
}

/// Pattern copied from a connected piece of `g`, so it has at least one
/// match. Falls back to random_pattern when g has no edges.
inline tcg::SignaturePattern planted_pattern(tcg::Rng& rng, const TemporalCorrelationGraph& g, std::size_t n) {
    if (g.edges.empty()) return random_pattern(rng, n);
    auto it = g.edges.begin();
    std::advance(it, static_cast<long>(rng.below(g.edges.size())));
    std::vector<NodeKey> chosen = {it->first.first, it->first.second};
    std::vector<std::pair<std::size_t, std::size_t>> used = {{0, 1}};
    if (n >= 3) {
        // Grow by one neighbour of the chosen pair.
        std::vector<std::pair<std::pair<std::size_t, NodeKey>, bool>> options;  // (anchor, node), outgoing?
        for (const auto& [ek, a] : g.edges) {
            for (std::size_t c = 0; c < 2; ++c) {
                const bool out = ek.first == chosen[c];
                const bool in = ek.second == chosen[c];
                const NodeKey& other = out ? ek.second : ek.first;
                if ((out || in) && other != chosen[0] && other != chosen[1]) options.push_back({{c, other}, out});
            }
        }
        if (!options.empty()) {
            const auto& pick = options[rng.below(options.size())];
            chosen.push_back(pick.first.second);
            used.push_back(pick.second ? std::make_pair(pick.first.first, std::size_t{2})
                                       : std::make_pair(std::size_t{2}, pick.first.first));
        }
    }
    tcg::SignaturePattern p;
    p.name = "planted";
    for (std::size_t i = 0; i < chosen.size(); ++i) {
        tcg::PatternNode node;
        node.id = "v" + std::to_string(i);
        node.op = chosen[i].op;
        if (rng.bernoulli(0.7)) node.target_class = chosen[i].target_class;
        p.nodes.push_back(node);
    }
    for (auto [u, v] : used) {
        tcg::PatternEdge e{p.nodes[u].id, p.nodes[v].id, std::nullopt};
        if (rng.bernoulli(0.3)) e.max_mean_gap = rng.uniform(0.2, 2.0);
        p.edges.push_back(e);
    }
    return p;
}

}  // namespace oracle
