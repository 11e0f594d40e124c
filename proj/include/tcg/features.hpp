#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "tcg/graph.hpp"

namespace tcg {

// ---------------------------------------------------------------------------
// Topological metrics. All of them are pure functions of the graph and do not
// depend on node insertion order.

/// E / (N (N - 1)); 0 when N < 2.
double edge_density(const TemporalCorrelationGraph& graph);

struct Clustering {
    double global = 0.0;      // transitivity: 3 * triangles / connected triples
    double mean_local = 0.0;  // nodes of degree < 2 contribute 0
};

/// Computed on the undirected simple projection.
Clustering clustering(const TemporalCorrelationGraph& graph);

/// Largest hop eccentricity inside the largest weakly connected component
/// (undirected projection). Ties in component size go to the component
/// holding the smallest NodeKey.
std::int64_t diameter(const TemporalCorrelationGraph& graph);

struct PageRankOptions {
    double damping = 0.85;
    double tol = 1e-9;
    int max_iter = 200;
};

struct PageRankResult {
    std::map<NodeKey, double> scores;
    int iterations = 0;
    double last_change = 0.0;  // L1 change of the final iteration
    bool converged = true;
    /// max_iter was hit with the last change still >= 1e-6.
    bool non_convergence() const { return !converged && last_change >= 1e-6; }
};

/// Weighted PageRank: transition mass proportional to edge weight, dangling
/// nodes redistribute uniformly.
PageRankResult pagerank(const TemporalCorrelationGraph& graph, const PageRankOptions& options = {});

/// max over nodes of (outgoing weight) / (total edge weight); 0 without edges.
double max_out_strength(const TemporalCorrelationGraph& graph);

// ---------------------------------------------------------------------------
// Transition model

/// Behavioural projection of a node key: (operation, target class).
struct BehaviorKey {
    OperationKind op = OperationKind::FileRead;
    TargetClass target_class = TargetClass::Other;
    auto operator<=>(const BehaviorKey&) const = default;
};

inline BehaviorKey behavior_of(const NodeKey& key) { return {key.op, key.target_class}; }

inline constexpr std::int64_t kBehaviorVocabSize =
    static_cast<std::int64_t>(kAllOperations.size() * kAllTargetClasses.size());

/// Successor counts aggregated over benign training windows.
class TransitionModel {
public:
    TransitionModel() = default;
    TransitionModel(double alpha, std::int64_t vocab_size);

    /// Adds every edge of `graph` (edge count is the increment).
    void observe(const TemporalCorrelationGraph& graph);
    void add_count(const BehaviorKey& from, const BehaviorKey& to, std::int64_t count);
    void mark_fitted() { fitted_ = true; }

    bool fitted() const { return fitted_; }
    double alpha() const { return alpha_; }
    std::int64_t vocab_size() const { return vocab_size_; }
    const std::map<std::pair<BehaviorKey, BehaviorKey>, std::int64_t>& counts() const {
        return counts_;
    }

    /// (count(u->v) + alpha) / (sum_x count(u->x) + alpha K). Throws UnfittedModel.
    double probability(const BehaviorKey& from, const BehaviorKey& to) const;

    bool operator==(const TransitionModel&) const = default;

private:
    double alpha_ = 1.0;
    std::int64_t vocab_size_ = kBehaviorVocabSize;
    bool fitted_ = false;
    std::map<std::pair<BehaviorKey, BehaviorKey>, std::int64_t> counts_;
    std::map<BehaviorKey, std::int64_t> totals_;
};

TransitionModel fit_transition_model(std::span<const TemporalCorrelationGraph> benign_graphs,
                                     double alpha, std::int64_t vocab_size = kBehaviorVocabSize);

/// Mean surprisal, in bits, of the graph's edges under the model. Probabilities
/// are floored at 2^-40 so alpha = 0 stays finite.
double rare_transition_score(const TemporalCorrelationGraph& graph, const TransitionModel& model);

// ---------------------------------------------------------------------------
// Feature vector

inline constexpr std::size_t kFeatureCount = 15;
inline constexpr int kFeatureLayoutVersion = 1;

using FeatureVector = std::array<double, kFeatureCount>;

enum Feature : std::size_t {
    kNodeCount,
    kEdgeCount,
    kEdgeDensity,
    kGlobalClustering,
    kMeanLocalClustering,
    kDiameter,
    kMaxOutStrength,
    kTop3PageRankMass,
    kMeanEdgeWeight,
    kWriteReadRatio,
    kHighEntropyWriteFraction,
    kRenameRate,
    kBurstiness,
    kRareTransitionScore,
    kUniqueTargetsPerSecond,
};

extern const std::array<std::string_view, kFeatureCount> kFeatureNames;

struct FeatureOptions {
    double entropy_threshold = 6.0;  // bits/byte, for the high-entropy write fraction
};

/// Assembles the 15 features of one window. `model` may be null, in which
/// case the rare-transition feature is 0.
FeatureVector feature_vector(const TemporalCorrelationGraph& graph,
                             std::span<const EventRecord> slice,
                             const TransitionModel* model = nullptr,
                             const FeatureOptions& options = {});

// ---------------------------------------------------------------------------
// Normalizer (population sigma, floored)

inline constexpr double kSigmaFloor = 1e-9;

struct Normalizer {
    std::vector<double> mean;
    std::vector<double> stddev;
    bool operator==(const Normalizer&) const = default;
};

/// Throws InsufficientData for fewer than 2 vectors.
Normalizer fit_normalizer(std::span<const FeatureVector> vectors);
FeatureVector apply_normalizer(const Normalizer& norm, const FeatureVector& x);

/// CSV with the fixed 15-column header of kFeatureNames, one row per vector.
void write_feature_csv(std::ostream& out, std::span<const FeatureVector> vectors);

}  // namespace tcg
