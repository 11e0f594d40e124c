#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "../common/oracles.hpp"
#include "tcg/errors.hpp"
#include "tcg/signatures.hpp"
#include "tcg/simgen.hpp"

using namespace tcg;
namespace fs = std::filesystem;

namespace {
const SignaturePattern& chain() {
    static const auto p = builtin_signatures().at(0);
    return p;
}

std::set<std::map<std::string, NodeKey>> as_set(const std::vector<Match>& ms) {
    std::set<std::map<std::string, NodeKey>> out;
    for (const auto& m : ms) out.insert(m.assignment);
    return out;
}
}  // namespace

TEST(Builtin, EncryptChainShape) {
    const auto b = builtin_signatures();
    ASSERT_EQ(b.size(), 2u);
    EXPECT_EQ(b[0].name, "encrypt_chain");
    EXPECT_EQ(b[0].nodes.size(), 3u);
    EXPECT_EQ(b[0].edges.size(), 2u);
    EXPECT_EQ(b[1].name, "beacon_then_burst");
    for (const auto& p : b) EXPECT_NO_THROW(validate_signature(p));
}

TEST(Validate, Errors) {
    auto p = chain();
    p.edges.push_back(PatternEdge{"write", "ghost", std::nullopt});
    EXPECT_THROW(validate_signature(p), MalformedSignature);

    p = chain();
    p.nodes.push_back(PatternNode{"island", OperationKind::RegSet, std::nullopt, 1, std::nullopt});
    EXPECT_THROW(validate_signature(p), MalformedSignature);

    p = chain();
    p.nodes[2].id = "read";
    EXPECT_THROW(validate_signature(p), MalformedSignature);

    p = chain();
    p.nodes.clear();
    p.edges.clear();
    EXPECT_THROW(validate_signature(p), MalformedSignature);
}

TEST(Document, RoundTripAndErrors) {
    for (const auto& p : builtin_signatures()) {
        const auto doc = serialize_signature(p);
        EXPECT_EQ(parse_signature(doc), p);
        EXPECT_EQ(serialize_signature(parse_signature(doc)), doc);
    }
    auto wild = chain();
    wild.nodes[0].target_class.reset();
    EXPECT_EQ(parse_signature(serialize_signature(wild)), wild);
    EXPECT_THROW(parse_signature("{\"format_version\":1}"), MalformedSignature);
    EXPECT_THROW(parse_signature("nope"), MalformedSignature);
}

TEST(Document, ShippedFilesMatchBuiltins) {
    const auto r = load_signature_dir(std::string(TCG_SOURCE_DIR) + "/signatures");
    EXPECT_TRUE(r.errors.empty());
    const auto b = builtin_signatures();
    ASSERT_EQ(r.signatures.size(), 2u);
    // Directory order is by file name.
    EXPECT_EQ(r.signatures[0], b[1]);
    EXPECT_EQ(r.signatures[1], b[0]);
}

TEST(LoadDir, SkipsMalformedFiles) {
    const auto dir = fs::temp_directory_path() / "tcg_unit_sigs";
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream(dir / "a.json") << serialize_signature(chain());
    std::ofstream(dir / "b.json") << "{broken";
    std::ofstream(dir / "c.txt") << "ignored";
    const auto r = load_signature_dir(dir.string());
    EXPECT_EQ(r.signatures.size(), 1u);
    ASSERT_EQ(r.errors.size(), 1u);
    EXPECT_NE(r.errors[0].find("b.json"), std::string::npos);
    fs::remove_all(dir);
    EXPECT_FALSE(load_signature_dir(dir.string()).errors.empty());
}

TEST(Match, EmptyGraph) {
    TemporalCorrelationGraph g;
    g.window_end = 40;
    EXPECT_TRUE(match_signature(g, chain()).empty());
    EXPECT_TRUE(signature_hits(g, builtin_signatures()).empty());
}

TEST(Match, RansomwareWindowMatchesChain) {
    RansomwareProfile r;
    r.onset = 0;
    r.target_count = 200;
    const auto ev = gen_ransomware(r, 2);
    const GraphParams p;
    const auto w = windows(ev, p).at(0);
    const auto g = build_graph(w.events, w.start, w.end, p);
    const auto m = match_signature(g, chain());
    ASSERT_FALSE(m.empty());
    EXPECT_EQ(m[0].signature, "encrypt_chain");
    const auto hits = signature_hits(g, builtin_signatures());
    EXPECT_NE(std::find(hits.begin(), hits.end(), "encrypt_chain"), hits.end());
    EXPECT_NE(std::find(hits.begin(), hits.end(), "beacon_then_burst"), hits.end());
}

TEST(Match, BenignWindowsRarelyMatch) {
    const GraphParams p;
    std::size_t total = 0, hit = 0;
    for (std::uint64_t s = 1; s <= 30; ++s) {
        BenignProfile b;
        b.duration = 120;
        const auto ev = gen_benign(b, s);
        for (const auto& w : windows(ev, p)) {
            ++total;
            hit += !match_signature(build_graph(w.events, w.start, w.end, p), chain(), 1).empty();
        }
    }
    ASSERT_GT(total, 0u);
    EXPECT_LE(static_cast<double>(hit) / static_cast<double>(total), 0.1);
}

TEST(Match, EqualsExhaustiveOracleAndIsSound) {
    std::size_t found = 0;
    for (std::uint64_t s = 0; s < 60; ++s) {
        Rng rng(derive_seed(70, s));
        const auto g = oracle::random_graph(rng, 2 + rng.below(8), rng.uniform(0.1, 0.6));
        const std::size_t k = 2 + rng.below(2);
        const auto pat = s % 2 ? oracle::planted_pattern(rng, g, k) : oracle::random_pattern(rng, k);
        const auto got = match_signature(g, pat, 1u << 20);
        const auto ref = oracle::matches(g, pat);
        EXPECT_EQ(as_set(got), ref);
        EXPECT_EQ(got.size(), ref.size());  // no duplicates
        found += got.size();
        for (const auto& m : got) {
            std::set<NodeKey> image;
            for (const auto& pn : pat.nodes) {
                const auto& key = m.assignment.at(pn.id);
                image.insert(key);
                EXPECT_TRUE(node_satisfies(pn, key, g.nodes.at(key)));
            }
            EXPECT_EQ(image.size(), pat.nodes.size());
            for (const auto& pe : pat.edges) {
                const auto it = g.edges.find({m.assignment.at(pe.from), m.assignment.at(pe.to)});
                ASSERT_NE(it, g.edges.end());
                EXPECT_TRUE(edge_satisfies(pe, it->second));
            }
        }
        // Deterministic order and the limit is respected.
        EXPECT_EQ(match_signature(g, pat, 1u << 20), got);
        if (got.size() > 1) EXPECT_EQ(match_signature(g, pat, 1).size(), 1u);
    }
    EXPECT_GT(found, 0u);
}
