#include "tcg/signatures.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json_util.hpp"
#include "tcg/errors.hpp"

namespace tcg {

void validate_signature(const SignaturePattern& p) {
    if (p.name.empty()) throw MalformedSignature("signature has no name");
    if (p.nodes.empty()) throw MalformedSignature(p.name + ": pattern has no nodes");

    std::map<std::string, std::size_t> index;
    for (const auto& n : p.nodes) {
        if (n.id.empty()) throw MalformedSignature(p.name + ": empty node id");
        if (!index.emplace(n.id, index.size()).second) {
            throw MalformedSignature(p.name + ": duplicate node id '" + n.id + "'");
        }
        if (n.min_count < 1) throw MalformedSignature(p.name + ": min_count must be >= 1");
    }

    std::vector<std::vector<std::size_t>> adjacency(p.nodes.size());
    for (const auto& e : p.edges) {
        auto from = index.find(e.from);
        auto to = index.find(e.to);
        if (from == index.end() || to == index.end()) {
            throw MalformedSignature(p.name + ": edge references unknown id '" +
                                     (from == index.end() ? e.from : e.to) + "'");
        }
        if (from->second == to->second) throw MalformedSignature(p.name + ": self-loop on '" + e.from + "'");
        adjacency[from->second].push_back(to->second);
        adjacency[to->second].push_back(from->second);
    }

    std::vector<char> seen(p.nodes.size(), 0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
        const std::size_t u = stack.back();
        stack.pop_back();
        for (std::size_t v : adjacency[u]) {
            if (!seen[v]) {
                seen[v] = 1;
                stack.push_back(v);
            }
        }
    }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
        throw MalformedSignature(p.name + ": pattern is disconnected");
    }
}

SignaturePattern parse_signature(const std::string& document) {
    using detail::field;
    using detail::Json;
    Json doc;
    try {
        doc = detail::parse_document(document, "signature");
        detail::reject_unknown(doc, {"format_version", "name", "nodes", "edges"}, "signature");
        detail::check_version(doc, 1, "signature");
    } catch (const MalformedDocument& err) {
        throw MalformedSignature(err.what());
    }

    SignaturePattern p;
    try {
        p.name = detail::to_text(field(doc, "name", "signature"), "signature.name");
        const auto& nodes = field(doc, "nodes", "signature");
        if (!nodes.is_array()) throw MalformedDocument("signature.nodes: expected a list");
        for (const auto& n : nodes) {
            detail::reject_unknown(n, {"id", "op", "class", "min_count", "min_entropy"}, "signature.node");
            PatternNode node;
            node.id = detail::to_text(field(n, "id", "node"), "node.id");
            const std::string op = detail::to_text(field(n, "op", "node"), "node.op");
            const auto parsed_op = parse_operation(op);
            if (!parsed_op) throw MalformedDocument("node '" + node.id + "': unknown op '" + op + "'");
            node.op = *parsed_op;
            const std::string cls = detail::to_text(field(n, "class", "node"), "node.class");
            if (cls != "WILDCARD") {
                node.target_class = parse_target_class(cls);
                if (!node.target_class) {
                    throw MalformedDocument("node '" + node.id + "': unknown class '" + cls + "'");
                }
            }
            if (auto it = n.find("min_count"); it != n.end()) node.min_count = detail::to_int(*it, "node.min_count");
            if (auto it = n.find("min_entropy"); it != n.end()) {
                node.min_entropy = detail::to_real(*it, "node.min_entropy");
            }
            p.nodes.push_back(std::move(node));
        }
        if (auto it = doc.find("edges"); it != doc.end()) {
            if (!it->is_array()) throw MalformedDocument("signature.edges: expected a list");
            for (const auto& e : *it) {
                detail::reject_unknown(e, {"from", "to", "max_mean_gap"}, "signature.edge");
                PatternEdge edge;
                edge.from = detail::to_text(field(e, "from", "edge"), "edge.from");
                edge.to = detail::to_text(field(e, "to", "edge"), "edge.to");
                if (auto g = e.find("max_mean_gap"); g != e.end()) {
                    edge.max_mean_gap = detail::to_real(*g, "edge.max_mean_gap");
                }
                p.edges.push_back(std::move(edge));
            }
        }
    } catch (const MalformedDocument& err) {
        throw MalformedSignature(err.what());
    }
    validate_signature(p);
    return p;
}

std::string serialize_signature(const SignaturePattern& p) {
    detail::OrderedJson doc;
    doc["format_version"] = 1;
    doc["name"] = p.name;
    doc["nodes"] = detail::OrderedJson::array();
    for (const auto& n : p.nodes) {
        detail::OrderedJson node;
        node["id"] = n.id;
        node["op"] = std::string(to_string(n.op));
        node["class"] = n.target_class ? std::string(to_string(*n.target_class)) : "WILDCARD";
        node["min_count"] = n.min_count;
        if (n.min_entropy) node["min_entropy"] = *n.min_entropy;
        doc["nodes"].push_back(std::move(node));
    }
    doc["edges"] = detail::OrderedJson::array();
    for (const auto& e : p.edges) {
        detail::OrderedJson edge;
        edge["from"] = e.from;
        edge["to"] = e.to;
        if (e.max_mean_gap) edge["max_mean_gap"] = *e.max_mean_gap;
        doc["edges"].push_back(std::move(edge));
    }
    return doc.dump(2) + "\n";
}

bool node_satisfies(const PatternNode& p, const NodeKey& key, const NodeAttr& attr) {
    if (key.op != p.op) return false;
    if (p.target_class && key.target_class != *p.target_class) return false;
    if (attr.count < p.min_count) return false;
    if (p.min_entropy && attr.mean_entropy() < *p.min_entropy) return false;
    return true;
}

bool edge_satisfies(const PatternEdge& p, const EdgeAttr& attr) {
    return !p.max_mean_gap || attr.mean_gap() <= *p.max_mean_gap;
}

namespace {

class Matcher {
public:
    Matcher(const TemporalCorrelationGraph& graph, const SignaturePattern& pattern, std::size_t limit)
        : graph_(graph), pattern_(pattern), limit_(limit) {
        std::map<std::string, std::size_t> index;
        for (std::size_t i = 0; i < pattern.nodes.size(); ++i) index.emplace(pattern.nodes[i].id, i);
        for (const auto& e : pattern.edges) {
            edges_.push_back({index.at(e.from), index.at(e.to), &e});
        }
        candidates_.resize(pattern.nodes.size());
        for (std::size_t i = 0; i < pattern.nodes.size(); ++i) {
            for (const auto& [key, attr] : graph.nodes) {
                if (node_satisfies(pattern.nodes[i], key, attr)) candidates_[i].push_back(&key);
            }
        }
        assigned_.assign(pattern.nodes.size(), nullptr);
    }

    std::vector<Match> run() {
        if (pattern_.nodes.size() <= graph_.nodes.size() && limit_ > 0) search(0);
        return std::move(matches_);
    }

private:
    struct IndexedEdge {
        std::size_t from;
        std::size_t to;
        const PatternEdge* spec;
    };

    bool consistent(std::size_t var, const NodeKey* key) const {
        for (const NodeKey* used : assigned_) {
            if (used && *used == *key) return false;
        }
        for (const auto& e : edges_) {
            const NodeKey* from = e.from == var ? key : assigned_[e.from];
            const NodeKey* to = e.to == var ? key : assigned_[e.to];
            if ((e.from != var && e.to != var) || !from || !to) continue;
            auto it = graph_.edges.find(EdgeKey{*from, *to});
            if (it == graph_.edges.end() || !edge_satisfies(*e.spec, it->second)) return false;
        }
        return true;
    }

    void search(std::size_t depth) {
        if (matches_.size() >= limit_) return;
        if (depth == pattern_.nodes.size()) {
            Match m;
            m.signature = pattern_.name;
            for (std::size_t i = 0; i < assigned_.size(); ++i) {
                m.assignment.emplace(pattern_.nodes[i].id, *assigned_[i]);
            }
            matches_.push_back(std::move(m));
            return;
        }

        // Most constrained variable first; ties go to the lower pattern index.
        std::size_t best = pattern_.nodes.size();
        std::vector<const NodeKey*> best_options;
        for (std::size_t var = 0; var < pattern_.nodes.size(); ++var) {
            if (assigned_[var]) continue;
            std::vector<const NodeKey*> options;
            for (const NodeKey* key : candidates_[var]) {
                if (consistent(var, key)) options.push_back(key);
            }
            if (best == pattern_.nodes.size() || options.size() < best_options.size()) {
                best = var;
                best_options = std::move(options);
                if (best_options.empty()) return;
            }
        }

        for (const NodeKey* key : best_options) {
            assigned_[best] = key;
            search(depth + 1);
            assigned_[best] = nullptr;
            if (matches_.size() >= limit_) return;
        }
    }

    const TemporalCorrelationGraph& graph_;
    const SignaturePattern& pattern_;
    std::size_t limit_;
    std::vector<IndexedEdge> edges_;
    std::vector<std::vector<const NodeKey*>> candidates_;  // sorted by key
    std::vector<const NodeKey*> assigned_;
    std::vector<Match> matches_;
};

}  // namespace

std::vector<Match> match_signature(const TemporalCorrelationGraph& graph, const SignaturePattern& pattern,
                                   std::size_t limit) {
    return Matcher(graph, pattern, limit).run();
}

std::vector<SignaturePattern> builtin_signatures() {
    SignaturePattern chain;
    chain.name = "encrypt_chain";
    chain.nodes = {
        {"read", OperationKind::FileRead, TargetClass::UserDoc, 1, std::nullopt},
        {"write", OperationKind::FileWrite, TargetClass::UserDoc, 1, 6.0},
        {"rename", OperationKind::FileRename, TargetClass::UserDoc, 1, std::nullopt},
    };
    chain.edges = {{"read", "write", 2.0}, {"write", "rename", 2.0}};

    SignaturePattern beacon;
    beacon.name = "beacon_then_burst";
    beacon.nodes = {
        {"beacon", OperationKind::NetConnect, TargetClass::NetworkHost, 1, std::nullopt},
        {"write", OperationKind::FileWrite, TargetClass::UserDoc, 1, 6.0},
    };
    beacon.edges = {{"beacon", "write", std::nullopt}};
    return {chain, beacon};
}

SignatureLoadResult load_signature_dir(const std::string& directory) {
    namespace fs = std::filesystem;
    SignatureLoadResult result;
    std::error_code ec;
    if (!fs::is_directory(directory, ec)) {
        result.errors.push_back("signature directory '" + directory + "' not found");
        return result;
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(directory, ec)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
        std::ifstream in(path, std::ios::binary);
        std::ostringstream buf;
        buf << in.rdbuf();
        try {
            result.signatures.push_back(parse_signature(buf.str()));
        } catch (const Error& err) {
            result.errors.push_back(path.filename().string() + ": " + err.what());
        }
    }
    return result;
}

std::vector<std::string> signature_hits(const TemporalCorrelationGraph& graph,
                                        const std::vector<SignaturePattern>& signatures) {
    std::vector<std::string> hits;
    for (const auto& sig : signatures) {
        if (!match_signature(graph, sig, 1).empty()) hits.push_back(sig.name);
    }
    return hits;
}

}  // namespace tcg
