#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tcg {

enum class OperationKind : std::uint8_t {
    FileRead,
    FileWrite,
    FileRename,
    FileDelete,
    ProcSpawn,
    NetConnect,
    NetSend,
    RegSet,
    CryptoApi,
};

inline constexpr std::array kAllOperations = {
    OperationKind::FileRead,   OperationKind::FileWrite, OperationKind::FileRename,
    OperationKind::FileDelete, OperationKind::ProcSpawn, OperationKind::NetConnect,
    OperationKind::NetSend,    OperationKind::RegSet,    OperationKind::CryptoApi,
};

enum class TargetClass : std::uint8_t {
    UserDoc,
    SystemFile,
    Temp,
    NetworkHost,
    Registry,
    Other,
};

inline constexpr std::array kAllTargetClasses = {
    TargetClass::UserDoc,     TargetClass::SystemFile, TargetClass::Temp,
    TargetClass::NetworkHost, TargetClass::Registry,   TargetClass::Other,
};

std::string_view to_string(OperationKind op);
std::string_view to_string(TargetClass cls);
std::optional<OperationKind> parse_operation(std::string_view token);
std::optional<TargetClass> parse_target_class(std::string_view token);

/// One timestamped system event. `entropy` is only meaningful for FILE_WRITE.
struct EventRecord {
    double ts = 0.0;         // seconds since trace epoch
    std::int64_t seq = 0;    // tie-breaker within equal timestamps
    std::int64_t pid = 0;
    std::string proc;
    OperationKind op = OperationKind::FileRead;
    std::string target;
    std::int64_t bytes = 0;
    double entropy = 0.0;    // bits per byte, [0, 8]

    bool operator==(const EventRecord&) const = default;
};

/// Parses one trace line. `line_no` is only used for diagnostics.
/// Throws MalformedRecord.
EventRecord parse_event_line(std::string_view line, std::size_t line_no = 0);

/// Single-line serialization; field order is fixed so output is byte-stable.
std::string serialize_event(const EventRecord& event);

/// Stable sort by (ts, seq). Throws DuplicateKey when two records share a key.
std::vector<EventRecord> align_events(std::vector<EventRecord> events);

bool is_aligned(std::span<const EventRecord> events);

TargetClass classify_target(OperationKind op, std::string_view target);

double shannon_entropy(std::span<const std::uint8_t> buffer);

struct TraceReadResult {
    std::vector<EventRecord> events;
    std::size_t skipped = 0;              // malformed lines dropped
    std::vector<std::string> diagnostics; // one per skipped line
};

/// Reads a trace stream. With `skip_malformed` bad lines are counted and
/// dropped; otherwise the first one throws MalformedRecord.
TraceReadResult read_trace(std::istream& in, bool skip_malformed);
TraceReadResult read_trace_file(const std::string& path, bool skip_malformed);

void write_trace(std::ostream& out, std::span<const EventRecord> events);
void write_trace_file(const std::string& path, std::span<const EventRecord> events);

// ---------------------------------------------------------------------------
// Ground truth sidecar

enum class Label : std::uint8_t { Benign, Ransomware };

std::string_view to_string(Label label);
std::optional<Label> parse_label(std::string_view token);

struct LabeledInterval {
    double start = 0.0;
    double end = 0.0;
    Label label = Label::Benign;
    std::string family;
    // Process that produced the interval's events. Optional in the file; when
    // present only that process's events count as originating from it.
    std::optional<std::int64_t> pid;

    bool operator==(const LabeledInterval&) const = default;
};

using GroundTruth = std::vector<LabeledInterval>;

LabeledInterval parse_interval_line(std::string_view line, std::size_t line_no = 0);
std::string serialize_interval(const LabeledInterval& interval);
GroundTruth read_ground_truth(std::istream& in);
GroundTruth read_ground_truth_file(const std::string& path);
void write_ground_truth(std::ostream& out, const GroundTruth& truth);
void write_ground_truth_file(const std::string& path, const GroundTruth& truth);

}  // namespace tcg
