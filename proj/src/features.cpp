#include "tcg/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>
#include <queue>
#include <set>
#include <string>
#include <unordered_set>

#include "tcg/errors.hpp"

namespace tcg {

const std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "node_count",         "edge_count",
    "edge_density",       "global_clustering",
    "mean_local_clustering", "diameter",
    "max_out_strength",   "top3_pagerank_mass",
    "mean_edge_weight",   "write_read_ratio",
    "high_entropy_write_fraction", "rename_rate",
    "burstiness",         "rare_transition_score",
    "unique_targets_per_second",
};

namespace {

// Dense index over the sorted node keys of a graph.
struct IndexedGraph {
    std::vector<NodeKey> keys;
    std::vector<std::vector<std::size_t>> neighbors;  // undirected, sorted, no self loops
    std::vector<std::vector<std::pair<std::size_t, double>>> out;  // directed weighted

    explicit IndexedGraph(const TemporalCorrelationGraph& g) {
        std::map<NodeKey, std::size_t> index;
        for (const auto& [key, attr] : g.nodes) {
            index.emplace(key, keys.size());
            keys.push_back(key);
        }
        neighbors.resize(keys.size());
        out.resize(keys.size());
        for (const auto& [ek, attr] : g.edges) {
            const std::size_t u = index.at(ek.first);
            const std::size_t v = index.at(ek.second);
            out[u].emplace_back(v, attr.weight);
            if (u != v) {
                neighbors[u].push_back(v);
                neighbors[v].push_back(u);
            }
        }
        for (auto& n : neighbors) {
            std::sort(n.begin(), n.end());
            n.erase(std::unique(n.begin(), n.end()), n.end());
        }
    }

    std::size_t size() const { return keys.size(); }
};

std::vector<std::size_t> bfs_distances(const IndexedGraph& g, std::size_t source) {
    constexpr auto kUnreached = static_cast<std::size_t>(-1);
    std::vector<std::size_t> dist(g.size(), kUnreached);
    std::queue<std::size_t> q;
    dist[source] = 0;
    q.push(source);
    while (!q.empty()) {
        const std::size_t u = q.front();
        q.pop();
        for (std::size_t v : g.neighbors[u]) {
            if (dist[v] == kUnreached) {
                dist[v] = dist[u] + 1;
                q.push(v);
            }
        }
    }
    return dist;
}

}  // namespace

double edge_density(const TemporalCorrelationGraph& graph) {
    const auto n = static_cast<double>(graph.nodes.size());
    if (graph.nodes.size() < 2) return 0.0;
    return static_cast<double>(graph.edges.size()) / (n * (n - 1.0));
}

Clustering clustering(const TemporalCorrelationGraph& graph) {
    const IndexedGraph g(graph);
    const std::size_t n = g.size();
    if (n == 0) return {};

    std::vector<std::vector<char>> adjacent(n, std::vector<char>(n, 0));
    for (std::size_t u = 0; u < n; ++u) {
        for (std::size_t v : g.neighbors[u]) adjacent[u][v] = 1;
    }

    std::int64_t closed = 0;   // sum over nodes of links among neighbours = 3 * triangles
    std::int64_t triples = 0;  // sum over nodes of C(deg, 2)
    double local_sum = 0.0;
    for (std::size_t v = 0; v < n; ++v) {
        const auto& nb = g.neighbors[v];
        const auto d = static_cast<std::int64_t>(nb.size());
        if (d < 2) continue;
        std::int64_t links = 0;
        for (std::size_t i = 0; i < nb.size(); ++i) {
            for (std::size_t j = i + 1; j < nb.size(); ++j) links += adjacent[nb[i]][nb[j]];
        }
        const std::int64_t pairs = d * (d - 1) / 2;
        closed += links;
        triples += pairs;
        local_sum += static_cast<double>(links) / static_cast<double>(pairs);
    }

    Clustering c;
    c.global = triples > 0 ? static_cast<double>(closed) / static_cast<double>(triples) : 0.0;
    c.mean_local = local_sum / static_cast<double>(n);
    return c;
}

std::int64_t diameter(const TemporalCorrelationGraph& graph) {
    const IndexedGraph g(graph);
    const std::size_t n = g.size();
    if (n <= 1) return 0;

    // Components are discovered in key order, so the first component of a
    // given size is the one that owns the smallest key.
    std::vector<int> component(n, -1);
    std::vector<std::vector<std::size_t>> members;
    for (std::size_t s = 0; s < n; ++s) {
        if (component[s] >= 0) continue;
        const int id = static_cast<int>(members.size());
        members.emplace_back();
        std::queue<std::size_t> q;
        component[s] = id;
        q.push(s);
        while (!q.empty()) {
            const std::size_t u = q.front();
            q.pop();
            members.back().push_back(u);
            for (std::size_t v : g.neighbors[u]) {
                if (component[v] < 0) {
                    component[v] = id;
                    q.push(v);
                }
            }
        }
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < members.size(); ++c) {
        if (members[c].size() > members[best].size()) best = c;
    }

    std::size_t diam = 0;
    for (std::size_t u : members[best]) {
        const auto dist = bfs_distances(g, u);
        for (std::size_t v : members[best]) diam = std::max(diam, dist[v]);
    }
    return static_cast<std::int64_t>(diam);
}

PageRankResult pagerank(const TemporalCorrelationGraph& graph, const PageRankOptions& options) {
    const IndexedGraph g(graph);
    const std::size_t n = g.size();
    PageRankResult result;
    if (n == 0) return result;

    const double nd = static_cast<double>(n);
    std::vector<double> out_weight(n, 0.0);
    for (std::size_t u = 0; u < n; ++u) {
        for (const auto& [v, w] : g.out[u]) out_weight[u] += w;
    }

    std::vector<double> rank(n, 1.0 / nd);
    std::vector<double> next(n);
    result.converged = false;
    for (int iter = 0; iter < options.max_iter; ++iter) {
        double dangling = 0.0;
        for (std::size_t u = 0; u < n; ++u) {
            if (out_weight[u] <= 0.0) dangling += rank[u];
        }
        const double base = (1.0 - options.damping) / nd + options.damping * dangling / nd;
        std::fill(next.begin(), next.end(), base);
        for (std::size_t u = 0; u < n; ++u) {
            if (out_weight[u] <= 0.0) continue;
            const double share = options.damping * rank[u] / out_weight[u];
            for (const auto& [v, w] : g.out[u]) next[v] += share * w;
        }
        double change = 0.0;
        for (std::size_t i = 0; i < n; ++i) change += std::abs(next[i] - rank[i]);
        rank.swap(next);
        result.iterations = iter + 1;
        result.last_change = change;
        if (change < options.tol) {
            result.converged = true;
            break;
        }
    }
    for (std::size_t i = 0; i < n; ++i) result.scores.emplace(g.keys[i], rank[i]);
    return result;
}

double max_out_strength(const TemporalCorrelationGraph& graph) {
    double total = 0.0;
    std::map<NodeKey, double> strength;
    for (const auto& [ek, attr] : graph.edges) {
        total += attr.weight;
        strength[ek.first] += attr.weight;
    }
    if (graph.edges.empty() || total <= 0.0) return 0.0;
    double best = 0.0;
    for (const auto& [key, s] : strength) best = std::max(best, s);
    return best / total;
}

// ---------------------------------------------------------------------------

TransitionModel::TransitionModel(double alpha, std::int64_t vocab_size)
    : alpha_(alpha), vocab_size_(vocab_size) {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw InvalidSmoothing("alpha must be >= 0");
    if (vocab_size < 1) throw InvalidVocab("vocab size must be >= 1");
}

void TransitionModel::add_count(const BehaviorKey& from, const BehaviorKey& to, std::int64_t count) {
    if (count < 0) throw InvalidParams("transition counts must be >= 0");
    counts_[{from, to}] += count;
    totals_[from] += count;
}

void TransitionModel::observe(const TemporalCorrelationGraph& graph) {
    for (const auto& [ek, attr] : graph.edges) {
        add_count(behavior_of(ek.first), behavior_of(ek.second), attr.count);
    }
}

double TransitionModel::probability(const BehaviorKey& from, const BehaviorKey& to) const {
    if (!fitted_) throw UnfittedModel("transition model has not been fitted");
    const auto total_it = totals_.find(from);
    const double total = total_it == totals_.end() ? 0.0 : static_cast<double>(total_it->second);
    const auto count_it = counts_.find({from, to});
    const double count = count_it == counts_.end() ? 0.0 : static_cast<double>(count_it->second);
    const double denom = total + alpha_ * static_cast<double>(vocab_size_);
    return denom > 0.0 ? (count + alpha_) / denom : 0.0;
}

TransitionModel fit_transition_model(std::span<const TemporalCorrelationGraph> benign_graphs,
                                     double alpha, std::int64_t vocab_size) {
    TransitionModel model(alpha, vocab_size);
    for (const auto& g : benign_graphs) model.observe(g);
    model.mark_fitted();
    return model;
}

double rare_transition_score(const TemporalCorrelationGraph& graph, const TransitionModel& model) {
    if (!model.fitted()) throw UnfittedModel("transition model has not been fitted");
    if (graph.edges.empty()) return 0.0;
    constexpr double kFloor = 0x1.0p-40;
    double bits = 0.0;
    for (const auto& [ek, attr] : graph.edges) {
        const double p = model.probability(behavior_of(ek.first), behavior_of(ek.second));
        bits -= std::log2(std::max(p, kFloor));
    }
    return bits / static_cast<double>(graph.edges.size());
}

// ---------------------------------------------------------------------------

FeatureVector feature_vector(const TemporalCorrelationGraph& graph, std::span<const EventRecord> slice,
                             const TransitionModel* model, const FeatureOptions& options) {
    FeatureVector f{};
    f[kNodeCount] = static_cast<double>(graph.nodes.size());
    if (slice.size() <= 1) return f;

    f[kEdgeCount] = static_cast<double>(graph.edges.size());
    f[kEdgeDensity] = edge_density(graph);
    const Clustering c = clustering(graph);
    f[kGlobalClustering] = c.global;
    f[kMeanLocalClustering] = c.mean_local;
    f[kDiameter] = static_cast<double>(diameter(graph));
    f[kMaxOutStrength] = max_out_strength(graph);

    const PageRankResult pr = pagerank(graph);
    std::vector<double> scores;
    for (const auto& [key, s] : pr.scores) scores.push_back(s);
    std::sort(scores.begin(), scores.end(), std::greater<>());
    for (std::size_t i = 0; i < std::min<std::size_t>(3, scores.size()); ++i) {
        f[kTop3PageRankMass] += scores[i];
    }
    f[kTop3PageRankMass] = std::min(f[kTop3PageRankMass], 1.0);

    double total_weight = 0.0;
    for (const auto& [ek, attr] : graph.edges) total_weight += attr.weight;
    f[kMeanEdgeWeight] = graph.edges.empty() ? 0.0 : total_weight / static_cast<double>(graph.edges.size());

    std::int64_t reads = 0, writes = 0, hot_writes = 0, renames = 0;
    std::unordered_set<std::string_view> targets;
    for (const auto& ev : slice) {
        switch (ev.op) {
            case OperationKind::FileRead: ++reads; break;
            case OperationKind::FileWrite:
                ++writes;
                if (ev.entropy >= options.entropy_threshold) ++hot_writes;
                break;
            case OperationKind::FileRename: ++renames; break;
            default: break;
        }
        targets.insert(ev.target);
    }
    const double span_seconds = graph.window_end - graph.window_start;
    f[kWriteReadRatio] = static_cast<double>(writes) / static_cast<double>(std::max<std::int64_t>(reads, 1));
    f[kHighEntropyWriteFraction] =
        writes > 0 ? static_cast<double>(hot_writes) / static_cast<double>(writes) : 0.0;
    f[kRenameRate] = static_cast<double>(renames) / span_seconds;

    if (slice.size() >= 3) {
        const auto gaps = static_cast<double>(slice.size() - 1);
        double sum = 0.0;
        for (std::size_t i = 1; i < slice.size(); ++i) sum += slice[i].ts - slice[i - 1].ts;
        const double mean = sum / gaps;
        if (mean > 0.0) {
            double ss = 0.0;
            for (std::size_t i = 1; i < slice.size(); ++i) {
                const double d = slice[i].ts - slice[i - 1].ts - mean;
                ss += d * d;
            }
            f[kBurstiness] = std::sqrt(ss / gaps) / mean;
        }
    }

    f[kRareTransitionScore] = model ? rare_transition_score(graph, *model) : 0.0;
    f[kUniqueTargetsPerSecond] = static_cast<double>(targets.size()) / span_seconds;
    return f;
}

// ---------------------------------------------------------------------------

Normalizer fit_normalizer(std::span<const FeatureVector> vectors) {
    if (vectors.size() < 2) throw InsufficientData("normalizer needs at least 2 vectors");
    const auto n = static_cast<double>(vectors.size());
    Normalizer norm;
    norm.mean.assign(kFeatureCount, 0.0);
    norm.stddev.assign(kFeatureCount, 0.0);
    for (const auto& v : vectors) {
        for (std::size_t i = 0; i < kFeatureCount; ++i) norm.mean[i] += v[i];
    }
    for (auto& m : norm.mean) m /= n;
    for (const auto& v : vectors) {
        for (std::size_t i = 0; i < kFeatureCount; ++i) {
            const double d = v[i] - norm.mean[i];
            norm.stddev[i] += d * d;
        }
    }
    for (auto& s : norm.stddev) s = std::max(std::sqrt(s / n), kSigmaFloor);
    return norm;
}

FeatureVector apply_normalizer(const Normalizer& norm, const FeatureVector& x) {
    if (norm.mean.size() != kFeatureCount || norm.stddev.size() != kFeatureCount) {
        throw DimensionMismatch("normalizer dimension does not match the feature layout");
    }
    FeatureVector z;
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        z[i] = (x[i] - norm.mean[i]) / std::max(norm.stddev[i], kSigmaFloor);
    }
    return z;
}

void write_feature_csv(std::ostream& out, std::span<const FeatureVector> vectors) {
    for (std::size_t i = 0; i < kFeatureCount; ++i) out << (i ? "," : "") << kFeatureNames[i];
    out << '\n';
    char buf[40];
    for (const auto& v : vectors) {
        for (std::size_t i = 0; i < kFeatureCount; ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", v[i]);
            out << (i ? "," : "") << buf;
        }
        out << '\n';
    }
}

}  // namespace tcg
