#include "tcg/simgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <tuple>

#include "json_util.hpp"
#include "tcg/errors.hpp"
#include "tcg/rng.hpp"

namespace tcg {

namespace {

constexpr double kMiB = 1024.0 * 1024.0;

constexpr std::array<std::string_view, 8> kProcessNames = {
    "explorer", "winword", "excel", "chrome", "outlook", "svchost", "teams", "acrord32",
};

constexpr std::array<std::string_view, 10> kDocExtensions = {
    "docx", "xlsx", "pptx", "pdf", "txt", "jpg", "png", "csv", "doc", "xls",
};

constexpr std::array<std::string_view, 6> kFolders = {
    "Documents", "Desktop", "Pictures", "Documents/Reports", "Documents/Finance", "Downloads",
};

// Synthetic file tree: 70% user documents, 20% system files, 10% temp files.
struct FileTree {
    std::vector<std::string> user_docs;
    std::vector<std::string> system_files;
    std::vector<std::string> temp_files;
};

FileTree make_file_tree(Rng& rng) {
    FileTree tree;
    for (int i = 0; i < 350; ++i) {
        const auto folder = kFolders[rng.below(kFolders.size())];
        const auto ext = kDocExtensions[rng.below(kDocExtensions.size())];
        tree.user_docs.push_back("C:/Users/user/" + std::string(folder) + "/file" +
                                 std::to_string(i) + "." + std::string(ext));
    }
    for (int i = 0; i < 100; ++i) {
        tree.system_files.push_back("C:/Windows/System32/lib" + std::to_string(i) + ".dll");
    }
    for (int i = 0; i < 50; ++i) {
        tree.temp_files.push_back("C:/Users/user/AppData/Local/Temp/~tmp" + std::to_string(i) +
                                  ".tmp");
    }
    return tree;
}

template <class Vec>
const auto& pick(Rng& rng, const Vec& v) {
    return v[rng.below(v.size())];
}

std::int64_t payload_bytes(Rng& rng) {
    // Lognormal around ~30 KiB.
    return static_cast<std::int64_t>(4096.0 * std::exp(rng.normal(2.0, 1.0)));
}

void finalize(std::vector<EventRecord>& events) {
    // Generated events carry a provisional seq that is unique per origin; the
    // stable sort by (ts, seq) followed by renumbering yields an aligned trace.
    std::stable_sort(events.begin(), events.end(), [](const EventRecord& a, const EventRecord& b) {
        return std::tie(a.ts, a.seq) < std::tie(b.ts, b.seq);
    });
    for (std::size_t i = 0; i < events.size(); ++i) events[i].seq = static_cast<std::int64_t>(i);
}

}  // namespace

void BenignProfile::validate() const {
    if (n_processes < 1) throw InvalidProfile("n_processes must be >= 1");
    if (!(event_rate >= 0.0) || !(net_rate >= 0.0)) throw InvalidProfile("rates must be >= 0");
    if (!(write_fraction >= 0.0 && write_fraction <= 1.0)) {
        throw InvalidProfile("write_fraction must be in [0, 1]");
    }
    if (!(mean_entropy_benign >= 0.0 && mean_entropy_benign <= 8.0) || !(entropy_sigma >= 0.0)) {
        throw InvalidProfile("benign entropy parameters out of range");
    }
    if (!(duration > 0.0) || !std::isfinite(duration)) throw InvalidProfile("duration must be > 0");
    if (pid_base < 0) throw InvalidProfile("pid_base must be >= 0");
    if (!(burst_rate >= 0.0) || !(burst_length > 0.0) || !(burst_file_rate > 0.0)) {
        throw InvalidProfile("burst parameters out of range");
    }
    if (!(burst_entropy >= 0.0 && burst_entropy <= 8.0)) throw InvalidProfile("burst_entropy out of range");
}

void RansomwareProfile::validate() const {
    if (!(encryption_speed > 0.0) || !std::isfinite(encryption_speed)) {
        throw InvalidProfile("encryption_speed must be > 0");
    }
    if (!(mean_file_size > 0.0)) throw InvalidProfile("mean_file_size must be > 0");
    if (!(entropy_encrypted >= 0.0 && entropy_encrypted <= 8.0) || !(entropy_sigma >= 0.0)) {
        throw InvalidProfile("encrypted entropy parameters out of range");
    }
    if (!(onset >= 0.0) || !std::isfinite(onset)) throw InvalidProfile("onset must be >= 0");
    if (target_count < 0) throw InvalidProfile("target_count must be >= 0");
    if (pid < 0) throw InvalidProfile("pid must be >= 0");
    if (run_files < 0 || !(pause >= 0.0) || !(scan_rate >= 0.0)) {
        throw InvalidProfile("intermittent parameters out of range");
    }
}

std::vector<EventRecord> gen_benign(const BenignProfile& profile, std::uint64_t seed) {
    profile.validate();
    Rng tree_rng(derive_seed(seed, 0));
    const FileTree tree = make_file_tree(tree_rng);

    std::vector<EventRecord> events;
    std::int64_t provisional = 0;

    auto emit = [&](double ts, std::int64_t pid, std::string_view proc, OperationKind op,
                    std::string target, std::int64_t bytes, double entropy) {
        EventRecord ev;
        ev.ts = ts;
        ev.seq = provisional++;
        ev.pid = pid;
        ev.proc = std::string(proc);
        ev.op = op;
        ev.target = std::move(target);
        ev.bytes = bytes;
        ev.entropy = entropy;
        events.push_back(std::move(ev));
    };

    for (int p = 0; p < profile.n_processes; ++p) {
        Rng rng(derive_seed(seed, 100 + static_cast<std::uint64_t>(p)));
        const std::int64_t pid = profile.pid_base + p;
        const std::string_view proc = kProcessNames[static_cast<std::size_t>(p) % kProcessNames.size()];

        // Each process mostly touches its own working set of documents.
        std::vector<std::string> working_set;
        for (int i = 0; i < 20; ++i) working_set.push_back(pick(rng, tree.user_docs));

        if (profile.event_rate <= 0.0) continue;
        double t = rng.exponential(profile.event_rate);
        while (t < profile.duration) {
            const double u = rng.uniform();
            const double w = profile.write_fraction;
            if (u < w) {
                std::string target = rng.bernoulli(0.85)
                                         ? (rng.bernoulli(0.8) ? pick(rng, working_set)
                                                               : pick(rng, tree.user_docs))
                                         : pick(rng, tree.temp_files);
                const double h = std::clamp(
                    rng.normal(profile.mean_entropy_benign, profile.entropy_sigma), 0.0, 8.0);
                emit(t, pid, proc, OperationKind::FileWrite, std::move(target), payload_bytes(rng), h);
            } else if (u < w + 0.03) {
                emit(t, pid, proc, OperationKind::ProcSpawn, pick(rng, tree.system_files), 0, 0.0);
            } else if (u < w + 0.05) {
                const auto bytes = static_cast<std::int64_t>(rng.below(256));
                const auto slot = rng.below(8);
                emit(t, pid, proc, OperationKind::RegSet,
                     "HKCU/Software/" + std::string(proc) + "/Settings" + std::to_string(slot), bytes, 0.0);
            } else if (u < w + 0.07) {
                // Save-via-temp: editors rename their scratch file over the document.
                std::string target =
                    rng.bernoulli(0.5) ? pick(rng, tree.temp_files) : pick(rng, working_set);
                emit(t, pid, proc, OperationKind::FileRename, std::move(target), 0, 0.0);
            } else if (u < w + 0.08) {
                emit(t, pid, proc, OperationKind::FileDelete, pick(rng, tree.temp_files), 0, 0.0);
            } else {
                const double r = rng.uniform();
                std::string target = r < 0.6   ? pick(rng, working_set)
                                     : r < 0.85 ? pick(rng, tree.system_files)
                                                : pick(rng, tree.user_docs);
                emit(t, pid, proc, OperationKind::FileRead, std::move(target), payload_bytes(rng), 0.0);
            }
            t += rng.exponential(profile.event_rate);
        }
    }

    if (profile.net_rate > 0.0) {
        Rng rng(derive_seed(seed, 1));
        double t = rng.exponential(profile.net_rate);
        while (t < profile.duration) {
            const int p = static_cast<int>(rng.below(static_cast<std::uint64_t>(profile.n_processes)));
            const std::string_view proc =
                kProcessNames[static_cast<std::size_t>(p) % kProcessNames.size()];
            const auto host_lo = 10 + rng.below(16);
            const auto host_hi = rng.below(4);
            const std::string host =
                "10.0." + std::to_string(host_hi) + "." + std::to_string(host_lo) + ":443";
            if (rng.bernoulli(0.3)) {
                emit(t, profile.pid_base + p, proc, OperationKind::NetConnect, host, 0, 0.0);
            } else {
                emit(t, profile.pid_base + p, proc, OperationKind::NetSend, host, payload_bytes(rng), 0.0);
            }
            t += rng.exponential(profile.net_rate);
        }
    }

    if (profile.burst_rate > 0.0) {
        Rng rng(derive_seed(seed, 2));
        const std::int64_t pid = profile.pid_base + profile.n_processes;
        double start = rng.exponential(profile.burst_rate);
        while (start < profile.duration) {
            const double stop = std::min(start + profile.burst_length, profile.duration);
            double t = start;
            while (t < stop) {
                const std::string doc = pick(rng, tree.user_docs);
                const double h = std::clamp(rng.normal(profile.burst_entropy, 0.2), 0.0, 8.0);
                emit(t, pid, "syncclient", OperationKind::FileRead, doc, payload_bytes(rng), 0.0);
                emit(t + 0.02, pid, "syncclient", OperationKind::FileWrite, doc, payload_bytes(rng), h);
                emit(t + 0.04, pid, "syncclient", OperationKind::FileRename, doc, 0, 0.0);
                t += rng.exponential(profile.burst_file_rate);
            }
            start = stop + rng.exponential(profile.burst_rate);
        }
    }

    finalize(events);
    return events;
}

std::vector<EventRecord> gen_ransomware(const RansomwareProfile& profile, std::uint64_t seed) {
    profile.validate();
    Rng rng(derive_seed(seed, 7));
    const std::string proc = "svc" + std::to_string(profile.pid);
    const std::string tag = std::to_string(splitmix64(seed) % 100000);

    std::vector<EventRecord> events;
    std::int64_t provisional = 0;
    auto emit = [&](double ts, OperationKind op, const std::string& target, std::int64_t bytes,
                    double entropy) {
        events.push_back(EventRecord{ts, provisional++, profile.pid, proc, op, target, bytes, entropy});
    };

    if (profile.beacon) emit(profile.onset, OperationKind::NetConnect, "203.0.113.7:443", 0, 0.0);

    double t = profile.onset;
    for (int k = 0; k < profile.target_count; ++k) {
        const double size_mb = profile.mean_file_size * rng.lognormal_jitter(kCadenceJitterSigma);
        const double cadence = size_mb / profile.encryption_speed;
        const auto ext = kDocExtensions[rng.below(kDocExtensions.size())];
        const std::string target = "C:/Users/user/" + std::string(kFolders[rng.below(kFolders.size())]) +
                                   "/r" + tag + "_" + std::to_string(k) + "." + std::string(ext);
        const auto bytes = static_cast<std::int64_t>(size_mb * kMiB);
        const double h =
            std::clamp(rng.normal(profile.entropy_encrypted, profile.entropy_sigma), 0.0, 8.0);
        emit(t, OperationKind::FileRead, target, bytes, 0.0);
        emit(t + 0.4 * cadence, OperationKind::FileWrite, target, bytes, h);
        emit(t + 0.8 * cadence, OperationKind::FileRename, target, 0, 0.0);
        t += cadence;
        if (profile.run_files > 0 && (k + 1) % profile.run_files == 0 && k + 1 < profile.target_count) {
            // Idle between runs, enumerating documents for the next one.
            const double resume = t + profile.pause;
            if (profile.scan_rate > 0.0) {
                for (double s = t + rng.exponential(profile.scan_rate); s < resume;
                     s += rng.exponential(profile.scan_rate)) {
                    const auto folder = kFolders[rng.below(kFolders.size())];
                    const auto index = rng.below(350);
                    const auto doc_ext = kDocExtensions[rng.below(kDocExtensions.size())];
                    const auto doc_bytes = static_cast<std::int64_t>(rng.below(65536));
                    emit(s, OperationKind::FileRead,
                         "C:/Users/user/" + std::string(folder) + "/file" + std::to_string(index) + "." +
                             std::string(doc_ext),
                         doc_bytes, 0.0);
                }
            }
            t = resume;
        }
    }

    finalize(events);
    return events;
}

TracePart benign_part(const BenignProfile& profile, std::uint64_t seed) {
    TracePart part;
    part.events = gen_benign(profile, seed);
    part.intervals.push_back(LabeledInterval{0.0, profile.duration, Label::Benign, "benign", std::nullopt});
    return part;
}

TracePart ransomware_part(const RansomwareProfile& profile, std::uint64_t seed) {
    TracePart part;
    part.events = gen_ransomware(profile, seed);
    const double end = part.events.empty() ? profile.onset : part.events.back().ts;
    part.intervals.push_back(
        LabeledInterval{profile.onset, end, Label::Ransomware, profile.family_label, profile.pid});
    return part;
}

TracePart shift_part(TracePart part, double offset) {
    for (auto& ev : part.events) ev.ts += offset;
    for (auto& iv : part.intervals) {
        iv.start += offset;
        iv.end += offset;
    }
    return part;
}

MergedTrace merge_traces(const std::vector<TracePart>& parts) {
    struct Ref {
        double ts;
        std::size_t part;
        std::int64_t seq;
        const EventRecord* ev;
    };
    std::vector<Ref> refs;
    MergedTrace merged;
    for (std::size_t p = 0; p < parts.size(); ++p) {
        for (const auto& ev : parts[p].events) refs.push_back(Ref{ev.ts, p, ev.seq, &ev});
        merged.truth.insert(merged.truth.end(), parts[p].intervals.begin(), parts[p].intervals.end());
    }
    std::sort(refs.begin(), refs.end(), [](const Ref& a, const Ref& b) {
        return std::tie(a.ts, a.part, a.seq) < std::tie(b.ts, b.part, b.seq);
    });
    merged.events.reserve(refs.size());
    for (std::size_t i = 0; i < refs.size(); ++i) {
        EventRecord ev = *refs[i].ev;
        ev.seq = static_cast<std::int64_t>(i);
        merged.events.push_back(std::move(ev));
    }
    return merged;
}

// ---------------------------------------------------------------------------
// Profile documents

namespace {

using detail::Json;

BenignProfile benign_from_json(const Json& j) {
    detail::reject_unknown(j, {"n_processes", "event_rate", "write_fraction", "mean_entropy_benign",
                               "entropy_sigma", "net_rate", "duration", "pid_base", "burst_rate",
                               "burst_length", "burst_file_rate", "burst_entropy"},
                           "benign");
    BenignProfile b;
    if (auto it = j.find("n_processes"); it != j.end()) {
        b.n_processes = static_cast<int>(detail::to_int(*it, "benign.n_processes"));
    }
    detail::read_real(j, "event_rate", b.event_rate, "benign");
    detail::read_real(j, "write_fraction", b.write_fraction, "benign");
    detail::read_real(j, "mean_entropy_benign", b.mean_entropy_benign, "benign");
    detail::read_real(j, "entropy_sigma", b.entropy_sigma, "benign");
    detail::read_real(j, "net_rate", b.net_rate, "benign");
    detail::read_real(j, "duration", b.duration, "benign");
    if (auto it = j.find("pid_base"); it != j.end()) b.pid_base = detail::to_int(*it, "benign.pid_base");
    detail::read_real(j, "burst_rate", b.burst_rate, "benign");
    detail::read_real(j, "burst_length", b.burst_length, "benign");
    detail::read_real(j, "burst_file_rate", b.burst_file_rate, "benign");
    detail::read_real(j, "burst_entropy", b.burst_entropy, "benign");
    return b;
}

RansomwareProfile ransomware_from_json(const Json& j) {
    detail::reject_unknown(j, {"encryption_speed", "mean_file_size", "entropy_encrypted",
                               "entropy_sigma", "onset", "target_count", "beacon",
                               "family_label", "pid", "run_files", "pause", "scan_rate"},
                           "ransomware");
    RansomwareProfile r;
    detail::read_real(j, "encryption_speed", r.encryption_speed, "ransomware");
    detail::read_real(j, "mean_file_size", r.mean_file_size, "ransomware");
    detail::read_real(j, "entropy_encrypted", r.entropy_encrypted, "ransomware");
    detail::read_real(j, "entropy_sigma", r.entropy_sigma, "ransomware");
    detail::read_real(j, "onset", r.onset, "ransomware");
    if (auto it = j.find("target_count"); it != j.end()) {
        r.target_count = static_cast<int>(detail::to_int(*it, "ransomware.target_count"));
    }
    if (auto it = j.find("beacon"); it != j.end()) r.beacon = detail::to_bool(*it, "ransomware.beacon");
    if (auto it = j.find("family_label"); it != j.end()) {
        r.family_label = detail::to_text(*it, "ransomware.family_label");
    }
    if (auto it = j.find("pid"); it != j.end()) r.pid = detail::to_int(*it, "ransomware.pid");
    if (auto it = j.find("run_files"); it != j.end()) {
        r.run_files = static_cast<int>(detail::to_int(*it, "ransomware.run_files"));
    }
    detail::read_real(j, "pause", r.pause, "ransomware");
    detail::read_real(j, "scan_rate", r.scan_rate, "ransomware");
    return r;
}

}  // namespace

SimulationProfile parse_simulation_profile(const std::string& text) {
    const Json doc = detail::parse_document(text, "simulation profile");
    detail::reject_unknown(doc, {"format_version", "seed", "benign", "ransomware"},
                           "simulation profile");
    detail::check_version(doc, 1, "simulation profile");
    SimulationProfile profile;
    if (auto it = doc.find("seed"); it != doc.end()) profile.seed = detail::to_uint(*it, "seed");
    if (auto it = doc.find("benign"); it != doc.end()) profile.benign = benign_from_json(*it);
    if (auto it = doc.find("ransomware"); it != doc.end()) {
        if (!it->is_array()) throw MalformedDocument("ransomware: expected a list");
        for (const auto& r : *it) profile.ransomware.push_back(ransomware_from_json(r));
    }
    profile.benign.validate();
    for (const auto& r : profile.ransomware) r.validate();
    return profile;
}

std::string serialize_simulation_profile(const SimulationProfile& profile) {
    detail::OrderedJson doc;
    doc["format_version"] = 1;
    doc["seed"] = profile.seed;
    const auto& b = profile.benign;
    doc["benign"] = {{"n_processes", b.n_processes},
                     {"event_rate", b.event_rate},
                     {"write_fraction", b.write_fraction},
                     {"mean_entropy_benign", b.mean_entropy_benign},
                     {"entropy_sigma", b.entropy_sigma},
                     {"net_rate", b.net_rate},
                     {"duration", b.duration},
                     {"pid_base", b.pid_base},
                     {"burst_rate", b.burst_rate},
                     {"burst_length", b.burst_length},
                     {"burst_file_rate", b.burst_file_rate},
                     {"burst_entropy", b.burst_entropy}};
    doc["ransomware"] = detail::OrderedJson::array();
    for (const auto& r : profile.ransomware) {
        doc["ransomware"].push_back({{"encryption_speed", r.encryption_speed},
                                     {"mean_file_size", r.mean_file_size},
                                     {"entropy_encrypted", r.entropy_encrypted},
                                     {"entropy_sigma", r.entropy_sigma},
                                     {"onset", r.onset},
                                     {"target_count", r.target_count},
                                     {"beacon", r.beacon},
                                     {"family_label", r.family_label},
                                     {"pid", r.pid},
                                     {"run_files", r.run_files},
                                     {"pause", r.pause},
                                     {"scan_rate", r.scan_rate}});
    }
    return doc.dump(2);
}

MergedTrace simulate(const SimulationProfile& profile) {
    std::vector<TracePart> parts;
    parts.push_back(benign_part(profile.benign, derive_seed(profile.seed, 0)));
    for (std::size_t i = 0; i < profile.ransomware.size(); ++i) {
        parts.push_back(ransomware_part(profile.ransomware[i], derive_seed(profile.seed, 1 + i)));
    }
    return merge_traces(parts);
}

}  // namespace tcg
