#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tcg/event.hpp"

namespace tcg {

/// Background workload for a set of ordinary processes.
struct BenignProfile {
    int n_processes = 4;
    double event_rate = 2.0;          // mean events/s per process (Poisson)
    double write_fraction = 0.2;      // share of FILE_WRITE in the mixture
    double mean_entropy_benign = 4.2; // bits/byte
    double entropy_sigma = 0.8;
    double net_rate = 0.2;            // NET_* events/s across all processes
    double duration = 60.0;           // seconds
    std::int64_t pid_base = 100;      // processes get pid_base, pid_base+1, ...
    // Sync-client bursts: short runs of read -> compressed write -> rename on
    // user documents by one extra process (pid_base + n_processes).
    double burst_rate = 0.0;          // bursts/s; 0 disables
    double burst_length = 5.0;        // seconds
    double burst_file_rate = 6.0;     // files/s inside a burst
    double burst_entropy = 7.6;

    void validate() const;            // throws InvalidProfile
    bool operator==(const BenignProfile&) const = default;
};

/// Parametric encryption behaviour of one ransomware process.
struct RansomwareProfile {
    double encryption_speed = 5.0;    // MB/s
    double mean_file_size = 1.0;      // MB
    double entropy_encrypted = 7.9;
    double entropy_sigma = 0.05;
    double onset = 0.0;               // seconds from trace start
    int target_count = 100;
    bool beacon = true;
    std::string family_label = "generic";
    std::int64_t pid = 4000;
    // Intermittent mode: runs of run_files files separated by idle pauses in
    // which the process only reads documents at scan_rate. 0 = continuous.
    int run_files = 0;
    double pause = 0.0;               // seconds
    double scan_rate = 0.0;           // reads/s while paused

    void validate() const;
    double file_cadence() const { return mean_file_size / encryption_speed; }
    bool operator==(const RansomwareProfile&) const = default;
};

/// Encryption speed grid used by the speed sweep (MB/s).
inline const std::vector<double> kEncryptionSpeedGrid = {4.5, 4.8, 5.2, 5.7, 6.0};

/// Standard deviation of the per-file lognormal cadence jitter.
inline constexpr double kCadenceJitterSigma = 0.1;

std::vector<EventRecord> gen_benign(const BenignProfile& profile, std::uint64_t seed);
std::vector<EventRecord> gen_ransomware(const RansomwareProfile& profile, std::uint64_t seed);

struct TracePart {
    std::vector<EventRecord> events;  // aligned
    GroundTruth intervals;
};

TracePart benign_part(const BenignProfile& profile, std::uint64_t seed);
TracePart ransomware_part(const RansomwareProfile& profile, std::uint64_t seed);

/// Moves every event and interval of `part` forward by `offset` seconds.
TracePart shift_part(TracePart part, double offset);

struct MergedTrace {
    std::vector<EventRecord> events;
    GroundTruth truth;
};

/// Interleaves aligned parts by (ts, part index, seq) and renumbers seq from 0.
MergedTrace merge_traces(const std::vector<TracePart>& parts);

/// Document consumed by `simulate`: one benign background plus any number of
/// ransomware processes superimposed on it.
struct SimulationProfile {
    BenignProfile benign;
    std::vector<RansomwareProfile> ransomware;
    std::uint64_t seed = 1;
};

SimulationProfile parse_simulation_profile(const std::string& text);
std::string serialize_simulation_profile(const SimulationProfile& profile);
MergedTrace simulate(const SimulationProfile& profile);

}  // namespace tcg
