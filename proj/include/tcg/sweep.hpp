#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tcg/pipeline.hpp"
#include "tcg/simgen.hpp"

namespace tcg {

/// A labelled corpus laid out as consecutive fixed-length segments. Each
/// episode segment carries one ransomware process on top of its benign
/// background; benign segments carry the background only.
struct CorpusConfig {
    std::uint64_t seed = 1;
    int episodes = 100;
    int benign_segments = 20;
    double segment_length = 300.0;
    double onset_min = 40.0;   // onset offset within a segment
    double onset_max = 100.0;
    std::vector<BenignProfile> backgrounds;   // cycled per segment
    std::vector<RansomwareProfile> families;  // cycled per episode
};

/// Five ransomware parameterizations with distinct cadence, file size,
/// entropy and beaconing.
std::vector<RansomwareProfile> default_families();
std::vector<BenignProfile> default_backgrounds();

/// The corpus used by the acceptance suite and `simulate --preset acceptance`.
CorpusConfig acceptance_corpus(std::uint64_t seed);

/// Windows per class drawn from the acceptance corpus for training.
inline constexpr std::size_t kAcceptanceWindowsPerClass = 300;

MergedTrace build_corpus(const CorpusConfig& config);

struct WindowSweepRow {
    double window = 0.0;
    std::vector<double> accuracy;  // one per seed, in seed order
    double mean = 0.0;
    double stddev = 0.0;           // population
};

/// Full train/calibrate/test cycle per (size, seed); stride is half the window.
std::vector<WindowSweepRow> sweep_windows(const CorpusConfig& corpus, const PipelineConfig& config,
                                          const std::vector<double>& sizes,
                                          const std::vector<std::uint64_t>& seeds,
                                          const TrainOptions& options = {});
void write_window_sweep_csv(std::ostream& out, const std::vector<WindowSweepRow>& rows,
                            const std::vector<std::uint64_t>& seeds);

struct SpeedSweepRow {
    double speed = 0.0;
    std::int64_t episodes = 0;
    std::int64_t detected = 0;
    double rate = 0.0;
    double mean_latency = 0.0;
};

/// Per speed, `episodes` copies of one ransomware profile at that speed over
/// backgrounds that are identical across speeds, scored with a fixed model.
std::vector<SpeedSweepRow> sweep_speeds(const DetectionModel& model, const std::vector<SignaturePattern>& signatures,
                                        const CorpusConfig& corpus, const RansomwareProfile& profile,
                                        const std::vector<double>& speeds, int episodes = 20);
void write_speed_sweep_csv(std::ostream& out, const std::vector<SpeedSweepRow>& rows);

// ---------------------------------------------------------------------------
// Threshold checks shared by `--assert` and the acceptance suite.

struct CheckResult {
    bool pass = false;
    std::string detail;
};

CheckResult check_detection_quality(const ConfusionCounts& counts, double min_precision = 0.90,
                                    double min_recall = 0.88);
/// acc(long) >= acc(short) + min_gain and at most one adjacent inversion
/// larger than tolerance.
CheckResult check_window_trend(const std::vector<WindowSweepRow>& rows, double short_window = 10.0,
                               double long_window = 40.0, double min_gain = 0.03, double tolerance = 0.02);
CheckResult check_speed_robustness(const std::vector<SpeedSweepRow>& rows, double min_rate = 0.85,
                                   double max_spread = 0.08);
/// Mean latency within window + delta + slack seconds.
CheckResult check_latency(const LatencyStats& latency, const GraphParams& params, double slack = 1.0);

}  // namespace tcg
