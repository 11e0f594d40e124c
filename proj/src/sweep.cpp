#include "tcg/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "tcg/errors.hpp"
#include "tcg/rng.hpp"

namespace tcg {

std::vector<RansomwareProfile> default_families() {
    std::vector<RansomwareProfile> fams(5);

    fams[0].family_label = "bulk_encryptor";
    fams[0].encryption_speed = 5.7;
    fams[0].mean_file_size = 1.0;
    fams[0].target_count = 300;
    fams[0].run_files = 30;
    fams[0].pause = 20.0;
    fams[0].scan_rate = 0.5;

    fams[1].family_label = "large_file_locker";
    fams[1].encryption_speed = 5.2;
    fams[1].mean_file_size = 2.5;
    fams[1].target_count = 120;
    fams[1].entropy_encrypted = 7.95;
    fams[1].entropy_sigma = 0.02;

    fams[2].family_label = "quiet_encryptor";
    fams[2].encryption_speed = 6.0;
    fams[2].mean_file_size = 0.5;
    fams[2].target_count = 600;
    fams[2].entropy_encrypted = 7.8;
    fams[2].beacon = false;
    fams[2].run_files = 40;
    fams[2].pause = 20.0;
    fams[2].scan_rate = 0.5;

    fams[3].family_label = "partial_encryptor";
    fams[3].encryption_speed = 4.8;
    fams[3].mean_file_size = 2.0;
    fams[3].target_count = 150;
    fams[3].entropy_encrypted = 7.0;
    fams[3].entropy_sigma = 0.3;
    fams[3].beacon = false;
    fams[3].run_files = 12;
    fams[3].pause = 20.0;
    fams[3].scan_rate = 0.5;

    fams[4].family_label = "steady_encryptor";
    fams[4].encryption_speed = 4.5;
    fams[4].mean_file_size = 3.0;
    fams[4].target_count = 120;
    return fams;
}

std::vector<BenignProfile> default_backgrounds() {
    BenignProfile b;
    b.entropy_sigma = 0.9;
    b.burst_rate = 1.0 / 150.0;
    b.burst_file_rate = 8.0;
    return {b};
}

CorpusConfig acceptance_corpus(std::uint64_t seed) {
    CorpusConfig c;
    c.seed = seed;
    c.backgrounds = default_backgrounds();
    c.families = default_families();
    return c;
}

MergedTrace build_corpus(const CorpusConfig& config) {
    if (config.episodes < 0 || config.benign_segments < 0) throw InvalidProfile("segment counts must be >= 0");
    if (!(config.segment_length > 0.0)) throw InvalidProfile("segment_length must be > 0");
    if (!(config.onset_min >= 0.0 && config.onset_min <= config.onset_max &&
          config.onset_max < config.segment_length)) {
        throw InvalidProfile("onset range must lie inside the segment");
    }
    if (config.episodes > 0 && config.families.empty()) throw InvalidProfile("no ransomware families given");

    const std::vector<BenignProfile> backgrounds =
        config.backgrounds.empty() ? std::vector<BenignProfile>{BenignProfile{}} : config.backgrounds;
    const int segments = config.episodes + config.benign_segments;

    // Episode segments are spread evenly among the benign-only ones.
    Rng layout(derive_seed(config.seed, 50));
    std::vector<char> is_episode(static_cast<std::size_t>(segments), 0);
    for (int i = 0; i < config.episodes; ++i) is_episode[static_cast<std::size_t>(i)] = 1;
    layout.shuffle(is_episode.begin(), is_episode.end());

    std::vector<TracePart> parts;
    int episode = 0;
    for (int s = 0; s < segments; ++s) {
        const double offset = static_cast<double>(s) * config.segment_length;
        BenignProfile bg = backgrounds[static_cast<std::size_t>(s) % backgrounds.size()];
        bg.duration = config.segment_length;
        parts.push_back(shift_part(benign_part(bg, derive_seed(config.seed, 1000 + static_cast<std::uint64_t>(s))),
                                   offset));
        if (!is_episode[static_cast<std::size_t>(s)]) continue;

        Rng onset_rng(derive_seed(config.seed, 3000 + static_cast<std::uint64_t>(s)));
        RansomwareProfile r = config.families[static_cast<std::size_t>(episode) % config.families.size()];
        r.onset = onset_rng.uniform(config.onset_min, config.onset_max);
        r.pid = 4000 + episode;
        parts.push_back(
            shift_part(ransomware_part(r, derive_seed(config.seed, 5000 + static_cast<std::uint64_t>(s))), offset));
        ++episode;
    }
    return merge_traces(parts);
}

// ---------------------------------------------------------------------------

std::vector<WindowSweepRow> sweep_windows(const CorpusConfig& corpus, const PipelineConfig& config,
                                          const std::vector<double>& sizes, const std::vector<std::uint64_t>& seeds,
                                          const TrainOptions& options) {
    std::vector<WindowSweepRow> rows(sizes.size());
    for (std::size_t i = 0; i < sizes.size(); ++i) rows[i].window = sizes[i];

    const auto signatures = resolve_signatures(config);
    for (std::uint64_t seed : seeds) {
        CorpusConfig cc = corpus;
        cc.seed = seed;
        const MergedTrace trace = build_corpus(cc);
        for (std::size_t i = 0; i < sizes.size(); ++i) {
            PipelineConfig pc = config;
            pc.seed = seed;
            pc.graph.window = sizes[i];
            pc.graph.stride = sizes[i] / 2.0;
            const auto result = run_train(pc, trace.events, trace.truth, signatures, options);
            rows[i].accuracy.push_back(accuracy(result.test_counts));
        }
    }
    for (auto& row : rows) {
        if (row.accuracy.empty()) continue;
        double sum = 0.0;
        for (double a : row.accuracy) sum += a;
        row.mean = sum / static_cast<double>(row.accuracy.size());
        double var = 0.0;
        for (double a : row.accuracy) var += (a - row.mean) * (a - row.mean);
        row.stddev = std::sqrt(var / static_cast<double>(row.accuracy.size()));
    }
    return rows;
}

void write_window_sweep_csv(std::ostream& out, const std::vector<WindowSweepRow>& rows,
                            const std::vector<std::uint64_t>& seeds) {
    out << "window_s,accuracy_mean,accuracy_std";
    for (auto seed : seeds) out << ",seed_" << seed;
    out << '\n';
    char buf[64];
    for (const auto& row : rows) {
        std::snprintf(buf, sizeof buf, "%g,%.6f,%.6f", row.window, row.mean, row.stddev);
        out << buf;
        for (double a : row.accuracy) {
            std::snprintf(buf, sizeof buf, ",%.6f", a);
            out << buf;
        }
        out << '\n';
    }
}

std::vector<SpeedSweepRow> sweep_speeds(const DetectionModel& model, const std::vector<SignaturePattern>& signatures,
                                        const CorpusConfig& corpus, const RansomwareProfile& profile,
                                        const std::vector<double>& speeds, int episodes) {
    std::vector<SpeedSweepRow> rows;
    for (double speed : speeds) {
        CorpusConfig cc = corpus;
        cc.episodes = episodes;
        cc.benign_segments = 0;
        RansomwareProfile r = profile;
        r.encryption_speed = speed;
        cc.families = {r};
        const MergedTrace trace = build_corpus(cc);
        const auto alerts = detect_batch(trace.events, model, signatures);
        std::vector<Verdict> verdicts;
        verdicts.reserve(alerts.size());
        for (const auto& a : alerts) verdicts.push_back(a.verdict);
        const auto eps = episodes_of(trace.truth);
        const auto latency = detection_latency(verdicts, eps);

        SpeedSweepRow row;
        row.speed = speed;
        row.episodes = static_cast<std::int64_t>(eps.size());
        row.detected = latency.detected();
        row.rate = row.episodes ? static_cast<double>(row.detected) / static_cast<double>(row.episodes) : 0.0;
        row.mean_latency = latency.mean;
        rows.push_back(row);
    }
    return rows;
}

void write_speed_sweep_csv(std::ostream& out, const std::vector<SpeedSweepRow>& rows) {
    out << "speed_mb_s,episodes,detected,detection_rate,mean_latency_s\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%g,%lld,%lld,%.6f,%.6f\n", r.speed, static_cast<long long>(r.episodes),
                      static_cast<long long>(r.detected), r.rate, r.mean_latency);
        out << buf;
    }
}

// ---------------------------------------------------------------------------

namespace {
std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, format, a, b, c);
    return buf;
}
}  // namespace

CheckResult check_detection_quality(const ConfusionCounts& counts, double min_precision, double min_recall) {
    const double p = precision(counts);
    const double r = recall(counts);
    return {p >= min_precision && r >= min_recall,
            fmt("precision=%.4f recall=%.4f", p, r) + fmt(" (need >= %.2f / >= %.2f)", min_precision, min_recall)};
}

CheckResult check_window_trend(const std::vector<WindowSweepRow>& rows, double short_window, double long_window,
                               double min_gain, double tolerance) {
    const WindowSweepRow* lo = nullptr;
    const WindowSweepRow* hi = nullptr;
    for (const auto& r : rows) {
        if (r.window == short_window) lo = &r;
        if (r.window == long_window) hi = &r;
    }
    if (!lo || !hi) return {false, fmt("sweep lacks the %gs or %gs row", short_window, long_window)};
    int inversions = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i - 1].mean - rows[i].mean > tolerance) ++inversions;
    }
    const bool gain = hi->mean >= lo->mean + min_gain;
    return {gain && inversions <= 1, fmt("acc(%g)=%.4f ", short_window, lo->mean) +
                                         fmt("acc(%g)=%.4f ", long_window, hi->mean) +
                                         fmt("inversions=%g", inversions)};
}

CheckResult check_speed_robustness(const std::vector<SpeedSweepRow>& rows, double min_rate, double max_spread) {
    if (rows.empty()) return {false, "no speeds swept"};
    double lo = rows.front().rate, hi = rows.front().rate;
    for (const auto& r : rows) {
        lo = std::min(lo, r.rate);
        hi = std::max(hi, r.rate);
    }
    return {lo >= min_rate && hi - lo <= max_spread, fmt("min_rate=%.4f spread=%.4f", lo, hi - lo)};
}

CheckResult check_latency(const LatencyStats& latency, const GraphParams& params, double slack) {
    const double bound = params.window + params.delta + slack;
    if (latency.detected() == 0) return {false, "no episode detected"};
    return {latency.mean <= bound, fmt("mean_latency=%.3f bound=%.3f undetected=%g", latency.mean, bound,
                                       static_cast<double>(latency.undetected))};
}

}  // namespace tcg
