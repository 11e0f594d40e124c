#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tcg/graph.hpp"

namespace tcg {

struct PatternNode {
    std::string id;
    OperationKind op = OperationKind::FileRead;
    std::optional<TargetClass> target_class;  // nullopt = wildcard
    std::int64_t min_count = 1;
    std::optional<double> min_entropy;
    bool operator==(const PatternNode&) const = default;
};

struct PatternEdge {
    std::string from;
    std::string to;
    std::optional<double> max_mean_gap;
    bool operator==(const PatternEdge&) const = default;
};

/// Small connected digraph describing a malicious behaviour chain.
struct SignaturePattern {
    std::string name;
    std::vector<PatternNode> nodes;
    std::vector<PatternEdge> edges;
    bool operator==(const SignaturePattern&) const = default;
};

/// Throws MalformedSignature (duplicate id, dangling edge, disconnected, ...).
void validate_signature(const SignaturePattern& pattern);

SignaturePattern parse_signature(const std::string& document);
std::string serialize_signature(const SignaturePattern& pattern);

struct Match {
    std::string signature;
    std::map<std::string, NodeKey> assignment;  // pattern id -> graph node
    bool operator==(const Match&) const = default;
};

inline constexpr std::size_t kDefaultMatchLimit = 64;

/// Node-level constraint check shared by the matcher and its verifiers.
bool node_satisfies(const PatternNode& pattern, const NodeKey& key, const NodeAttr& attr);
bool edge_satisfies(const PatternEdge& pattern, const EdgeAttr& attr);

/// Injective, non-induced monomorphisms of `pattern` into `graph`, at most
/// `limit` of them. Enumeration order is deterministic.
std::vector<Match> match_signature(const TemporalCorrelationGraph& graph, const SignaturePattern& pattern,
                                   std::size_t limit = kDefaultMatchLimit);

/// encrypt_chain and beacon_then_burst.
std::vector<SignaturePattern> builtin_signatures();

struct SignatureLoadResult {
    std::vector<SignaturePattern> signatures;
    std::vector<std::string> errors;  // one per malformed file, which is skipped
};

/// Loads every *.json file in `directory` (sorted by file name).
SignatureLoadResult load_signature_dir(const std::string& directory);

/// Names of the signatures that match at least once.
std::vector<std::string> signature_hits(const TemporalCorrelationGraph& graph,
                                        const std::vector<SignaturePattern>& signatures);

}  // namespace tcg
