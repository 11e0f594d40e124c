#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "tcg/errors.hpp"
#include "tcg/simgen.hpp"

using namespace tcg;

namespace {
std::string dump(const std::vector<EventRecord>& ev) {
    std::ostringstream out;
    write_trace(out, ev);
    return out.str();
}

bool valid_record(const EventRecord& e) {
    return e.ts >= 0.0 && e.entropy >= 0.0 && e.entropy <= 8.0 && e.bytes >= 0 && e.pid >= 0 && !e.proc.empty();
}
}  // namespace

TEST(GenBenign, ZeroRateIsEmpty) {
    BenignProfile p;
    p.duration = 10;
    p.n_processes = 1;
    p.event_rate = 0;
    p.net_rate = 0;
    EXPECT_TRUE(gen_benign(p, 1).empty());
}

TEST(GenBenign, Deterministic) {
    BenignProfile p;
    p.duration = 60;
    p.event_rate = 5;
    p.burst_rate = 0.05;
    EXPECT_EQ(dump(gen_benign(p, 17)), dump(gen_benign(p, 17)));
    EXPECT_NE(dump(gen_benign(p, 17)), dump(gen_benign(p, 18)));
}

TEST(GenBenign, PoissonCountWithinThreeSigma) {
    BenignProfile p;
    p.n_processes = 1;
    p.event_rate = 5;
    p.duration = 600;
    p.net_rate = 0;
    const double mean = 3000.0, sigma = std::sqrt(3000.0);
    for (std::uint64_t s = 1; s <= 20; ++s) {
        const auto n = static_cast<double>(gen_benign(p, s).size());
        EXPECT_LE(std::abs(n - mean), 3.0 * sigma) << "seed " << s;
    }
}

TEST(GenBenign, RecordsValidAlignedAndLowEntropy) {
    BenignProfile p;
    p.duration = 300;
    const auto ev = gen_benign(p, 4);
    ASSERT_FALSE(ev.empty());
    EXPECT_TRUE(is_aligned(ev));
    double sum = 0;
    int writes = 0;
    std::map<TargetClass, int> classes;
    for (const auto& e : ev) {
        EXPECT_TRUE(valid_record(e));
        EXPECT_LE(e.ts, p.duration);
        if (e.op == OperationKind::FileWrite) {
            sum += e.entropy;
            ++writes;
        }
        ++classes[classify_target(e.op, e.target)];
    }
    ASSERT_GT(writes, 0);
    EXPECT_LE(sum / writes, 6.0);
    EXPECT_GT(classes[TargetClass::UserDoc], 0);
    EXPECT_GT(classes[TargetClass::SystemFile], 0);
    EXPECT_GT(classes[TargetClass::Temp], 0);
    EXPECT_GT(classes[TargetClass::NetworkHost], 0);
}

TEST(GenBenign, InvalidProfiles) {
    BenignProfile p;
    p.n_processes = 0;
    EXPECT_THROW(gen_benign(p, 1), InvalidProfile);
    p = {};
    p.duration = 0;
    EXPECT_THROW(gen_benign(p, 1), InvalidProfile);
    p = {};
    p.event_rate = -1;
    EXPECT_THROW(gen_benign(p, 1), InvalidProfile);
    p = {};
    p.write_fraction = 1.5;
    EXPECT_THROW(gen_benign(p, 1), InvalidProfile);
}

TEST(GenRansomware, CadenceAtLockBitSpeed) {
    RansomwareProfile r;
    r.encryption_speed = 5.2;
    r.mean_file_size = 1.0;
    EXPECT_NEAR(r.file_cadence(), 0.1923, 5e-5);

    r.target_count = 400;
    r.beacon = false;
    const auto ev = gen_ransomware(r, 3);
    std::vector<double> reads;
    for (const auto& e : ev)
        if (e.op == OperationKind::FileRead) reads.push_back(e.ts);
    ASSERT_EQ(reads.size(), 400u);
    const double mean_gap = (reads.back() - reads.front()) / 399.0;
    EXPECT_NEAR(mean_gap, 1.0 / 5.2, 0.01);
}

TEST(GenRansomware, ZeroTargetsLeavesOnlyBeacon) {
    RansomwareProfile r;
    r.target_count = 0;
    r.onset = 12.0;
    const auto ev = gen_ransomware(r, 1);
    ASSERT_EQ(ev.size(), 1u);
    EXPECT_EQ(ev[0].op, OperationKind::NetConnect);
    EXPECT_EQ(ev[0].ts, 12.0);
    r.beacon = false;
    EXPECT_TRUE(gen_ransomware(r, 1).empty());
}

TEST(GenRansomware, LastRenameFollowsClosedFormSchedule) {
    RansomwareProfile r;
    r.target_count = 100;
    r.encryption_speed = 4.5;
    r.onset = 20.0;
    const auto ev = gen_ransomware(r, 11);
    double last = 0.0;
    for (const auto& e : ev)
        if (e.op == OperationKind::FileRename) last = std::max(last, e.ts);
    // 100 cadences of 1/4.5 s with independent 10% jitter: sd ~ 0.1 * sqrt(100) / 4.5.
    const double expected = r.onset + 100.0 / 4.5;
    EXPECT_NEAR(last, expected, 4.0 * 0.1 * 10.0 / 4.5 + 0.3);
}

TEST(GenRansomware, ChainOrderAndEntropy) {
    RansomwareProfile r;
    r.target_count = 200;
    const auto ev = gen_ransomware(r, 5);
    std::map<std::string, std::vector<const EventRecord*>> by_target;
    double sum = 0;
    int writes = 0;
    for (const auto& e : ev) {
        EXPECT_TRUE(valid_record(e));
        if (e.op == OperationKind::NetConnect) continue;
        by_target[e.target].push_back(&e);
        if (e.op == OperationKind::FileWrite) {
            sum += e.entropy;
            ++writes;
            EXPECT_EQ(classify_target(e.op, e.target), TargetClass::UserDoc);
        }
    }
    EXPECT_GE(sum / writes, 7.5);
    EXPECT_EQ(by_target.size(), 200u);
    for (const auto& [t, chain] : by_target) {
        ASSERT_EQ(chain.size(), 3u) << t;
        EXPECT_EQ(chain[0]->op, OperationKind::FileRead);
        EXPECT_EQ(chain[1]->op, OperationKind::FileWrite);
        EXPECT_EQ(chain[2]->op, OperationKind::FileRename);
        EXPECT_LT(chain[0]->ts, chain[1]->ts);
        EXPECT_LT(chain[1]->ts, chain[2]->ts);
    }
}

TEST(GenRansomware, IntermittentRunsPause) {
    RansomwareProfile r;
    r.target_count = 30;
    r.run_files = 10;
    r.pause = 20.0;
    r.scan_rate = 0.5;
    r.beacon = false;
    const auto ev = gen_ransomware(r, 2);
    std::vector<double> writes;
    for (const auto& e : ev)
        if (e.op == OperationKind::FileWrite) writes.push_back(e.ts);
    ASSERT_EQ(writes.size(), 30u);
    // Two pauses, each at least pause seconds between consecutive writes.
    int long_gaps = 0;
    for (std::size_t i = 1; i < writes.size(); ++i) long_gaps += writes[i] - writes[i - 1] >= 20.0;
    EXPECT_EQ(long_gaps, 2);

    // Continuous mode is unaffected by the pause fields' defaults.
    RansomwareProfile c;
    c.target_count = 30;
    RansomwareProfile c2 = c;
    c2.pause = 5.0;  // ignored without run_files
    EXPECT_EQ(dump(gen_ransomware(c, 2)), dump(gen_ransomware(c2, 2)));
}

TEST(GenRansomware, InvalidProfiles) {
    RansomwareProfile r;
    r.encryption_speed = 0;
    EXPECT_THROW(gen_ransomware(r, 1), InvalidProfile);
    r = {};
    r.onset = -1;
    EXPECT_THROW(gen_ransomware(r, 1), InvalidProfile);
    r = {};
    r.run_files = -2;
    EXPECT_THROW(gen_ransomware(r, 1), InvalidProfile);
}

TEST(MergeTraces, SingleBenignPartIsIdentity) {
    BenignProfile p;
    p.duration = 60;
    const auto part = benign_part(p, 9);
    const auto m = merge_traces({part});
    EXPECT_EQ(m.events, part.events);  // already numbered 0..n-1
    ASSERT_EQ(m.truth.size(), 1u);
    EXPECT_EQ(m.truth[0].label, Label::Benign);
    EXPECT_EQ(m.truth[0].start, 0.0);
    EXPECT_EQ(m.truth[0].end, 60.0);
}

TEST(MergeTraces, BenignPlusRansomwareIntervals) {
    BenignProfile p;
    p.duration = 60;
    RansomwareProfile r;
    r.onset = 30;
    r.target_count = 100;
    const auto m = merge_traces({benign_part(p, 1), ransomware_part(r, 2)});
    ASSERT_EQ(m.truth.size(), 2u);
    EXPECT_EQ(m.truth[0].label, Label::Benign);
    EXPECT_EQ(m.truth[1].label, Label::Ransomware);
    EXPECT_EQ(m.truth[1].start, 30.0);
    EXPECT_GT(m.truth[1].end, 30.0);
    EXPECT_EQ(m.truth[1].pid, r.pid);
    EXPECT_TRUE(is_aligned(m.events));
}

TEST(MergeTraces, PreservesEventMultiset) {
    std::vector<TracePart> parts;
    std::vector<EventRecord> all;
    for (std::uint64_t s = 0; s < 10; ++s) {
        BenignProfile p;
        p.duration = 20;
        p.pid_base = 100 + 10 * static_cast<std::int64_t>(s);
        parts.push_back(shift_part(benign_part(p, s), static_cast<double>(s) * 3.0));
        all.insert(all.end(), parts.back().events.begin(), parts.back().events.end());
    }
    const auto m = merge_traces(parts);
    ASSERT_EQ(m.events.size(), all.size());
    auto strip = [](std::vector<EventRecord> v) {
        for (auto& e : v) e.seq = 0;
        std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
            return std::tie(a.ts, a.pid, a.target, a.op) < std::tie(b.ts, b.pid, b.target, b.op);
        });
        return v;
    };
    EXPECT_EQ(strip(m.events), strip(all));
    for (std::size_t i = 0; i < m.events.size(); ++i) EXPECT_EQ(m.events[i].seq, static_cast<std::int64_t>(i));
}

TEST(SimulationProfile, DocumentRoundTrip) {
    SimulationProfile p;
    p.seed = 33;
    p.benign.burst_rate = 0.01;
    RansomwareProfile r;
    r.family_label = "x";
    r.run_files = 5;
    r.pause = 3;
    r.scan_rate = 1;
    p.ransomware = {r, RansomwareProfile{}};
    const auto doc = serialize_simulation_profile(p);
    const auto back = parse_simulation_profile(doc);
    EXPECT_EQ(back.benign, p.benign);
    EXPECT_EQ(back.ransomware, p.ransomware);
    EXPECT_EQ(back.seed, p.seed);
    EXPECT_EQ(serialize_simulation_profile(back), doc);
    EXPECT_THROW(parse_simulation_profile(R"({"format_version":1,"benign":{"bogus":1}})"), Error);
}

TEST(SimulationProfile, SimulateIsDeterministic) {
    SimulationProfile p;
    p.seed = 4;
    p.benign.duration = 90;
    RansomwareProfile r;
    r.onset = 30;
    p.ransomware.push_back(r);
    EXPECT_EQ(dump(simulate(p).events), dump(simulate(p).events));
}
