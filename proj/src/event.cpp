#include "tcg/event.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "tcg/errors.hpp"

namespace tcg {

namespace {

constexpr std::array<std::string_view, 9> kOperationNames = {
    "FILE_READ", "FILE_WRITE", "FILE_RENAME", "FILE_DELETE", "PROC_SPAWN",
    "NET_CONNECT", "NET_SEND", "REG_SET", "CRYPTO_API",
};

constexpr std::array<std::string_view, 6> kTargetClassNames = {
    "USER_DOC", "SYSTEM_FILE", "TEMP", "NETWORK_HOST", "REGISTRY", "OTHER",
};

constexpr std::array<std::string_view, 10> kUserDocExtensions = {
    "docx", "xlsx", "pptx", "pdf", "txt", "jpg", "png", "csv", "doc", "xls",
};

constexpr std::array<std::string_view, 4> kSystemPrefixes = {
    "c:/windows", "/usr", "/bin", "/etc",
};

using nlohmann::json;

std::string normalize_path(std::string_view path) {
    std::string out(path);
    for (char& c : out) {
        if (c == '\\') c = '/';
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

bool has_temp_segment(const std::string& path) {
    std::size_t pos = 0;
    while (pos <= path.size()) {
        std::size_t next = path.find('/', pos);
        if (next == std::string::npos) next = path.size();
        std::string_view segment(path.data() + pos, next - pos);
        // The last segment is the file name, not a directory.
        if (next != path.size() && (segment == "tmp" || segment == "temp")) return true;
        pos = next + 1;
    }
    return false;
}

bool has_user_doc_extension(const std::string& path) {
    const std::size_t slash = path.rfind('/');
    const std::size_t dot = path.rfind('.');
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return false;
    const std::string_view ext(path.data() + dot + 1, path.size() - dot - 1);
    return std::find(kUserDocExtensions.begin(), kUserDocExtensions.end(), ext) !=
           kUserDocExtensions.end();
}

bool has_system_prefix(const std::string& path) {
    for (std::string_view prefix : kSystemPrefixes) {
        if (path.size() >= prefix.size() && path.compare(0, prefix.size(), prefix) == 0 &&
            (path.size() == prefix.size() || path[prefix.size()] == '/')) {
            return true;
        }
    }
    return false;
}

const json& require(const json& doc, const char* key, std::size_t line_no) {
    auto it = doc.find(key);
    if (it == doc.end()) throw MalformedRecord(line_no, std::string("missing field '") + key + "'");
    return *it;
}

std::int64_t as_integer(const json& value, const char* key, std::size_t line_no) {
    if (!value.is_number_integer()) {
        throw MalformedRecord(line_no, std::string("field '") + key + "' must be an integer");
    }
    if (value.is_number_unsigned() &&
        value.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX)) {
        throw MalformedRecord(line_no, std::string("field '") + key + "' out of range");
    }
    return value.get<std::int64_t>();
}

double as_real(const json& value, const char* key, std::size_t line_no) {
    if (!value.is_number()) {
        throw MalformedRecord(line_no, std::string("field '") + key + "' must be a number");
    }
    const double v = value.get<double>();
    if (!std::isfinite(v)) {
        throw MalformedRecord(line_no, std::string("field '") + key + "' must be finite");
    }
    return v;
}

std::string as_string(const json& value, const char* key, std::size_t line_no) {
    if (!value.is_string()) {
        throw MalformedRecord(line_no, std::string("field '") + key + "' must be a string");
    }
    return value.get<std::string>();
}

json parse_object(std::string_view line, std::size_t line_no) {
    json doc = json::parse(line.begin(), line.end(), nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded()) throw MalformedRecord(line_no, "not a valid key-value document");
    if (!doc.is_object()) throw MalformedRecord(line_no, "record must be an object");
    return doc;
}

bool skippable(std::string_view line) {
    const auto first = line.find_first_not_of(" \t\r");
    return first == std::string_view::npos || line[first] == '#';
}

}  // namespace

std::string_view to_string(OperationKind op) {
    return kOperationNames[static_cast<std::size_t>(op)];
}

std::string_view to_string(TargetClass cls) {
    return kTargetClassNames[static_cast<std::size_t>(cls)];
}

std::optional<OperationKind> parse_operation(std::string_view token) {
    for (std::size_t i = 0; i < kOperationNames.size(); ++i) {
        if (kOperationNames[i] == token) return static_cast<OperationKind>(i);
    }
    return std::nullopt;
}

std::optional<TargetClass> parse_target_class(std::string_view token) {
    for (std::size_t i = 0; i < kTargetClassNames.size(); ++i) {
        if (kTargetClassNames[i] == token) return static_cast<TargetClass>(i);
    }
    return std::nullopt;
}

EventRecord parse_event_line(std::string_view line, std::size_t line_no) {
    const json doc = parse_object(line, line_no);

    EventRecord ev;
    ev.ts = as_real(require(doc, "ts", line_no), "ts", line_no);
    if (ev.ts < 0.0) throw MalformedRecord(line_no, "ts must be non-negative");
    ev.seq = as_integer(require(doc, "seq", line_no), "seq", line_no);
    ev.pid = as_integer(require(doc, "pid", line_no), "pid", line_no);
    if (ev.pid < 0) throw MalformedRecord(line_no, "pid must be non-negative");
    ev.proc = as_string(require(doc, "proc", line_no), "proc", line_no);
    if (ev.proc.empty()) throw MalformedRecord(line_no, "proc must be non-empty");

    const std::string op_token = as_string(require(doc, "op", line_no), "op", line_no);
    const auto op = parse_operation(op_token);
    if (!op) throw MalformedRecord(line_no, "unknown op '" + op_token + "'");
    ev.op = *op;

    ev.target = as_string(require(doc, "target", line_no), "target", line_no);

    if (auto it = doc.find("bytes"); it != doc.end()) {
        ev.bytes = as_integer(*it, "bytes", line_no);
        if (ev.bytes < 0) throw MalformedRecord(line_no, "bytes must be non-negative");
    }
    if (auto it = doc.find("entropy"); it != doc.end()) {
        ev.entropy = as_real(*it, "entropy", line_no);
        if (ev.entropy < 0.0 || ev.entropy > 8.0) {
            throw MalformedRecord(line_no, "entropy out of [0, 8]");
        }
    }
    return ev;
}

std::string serialize_event(const EventRecord& ev) {
    nlohmann::ordered_json doc;
    doc["ts"] = ev.ts;
    doc["seq"] = ev.seq;
    doc["pid"] = ev.pid;
    doc["proc"] = ev.proc;
    doc["op"] = std::string(to_string(ev.op));
    doc["target"] = ev.target;
    doc["bytes"] = ev.bytes;
    doc["entropy"] = ev.entropy;
    return doc.dump();
}

namespace {
bool key_less(const EventRecord& a, const EventRecord& b) {
    if (a.ts != b.ts) return a.ts < b.ts;
    return a.seq < b.seq;
}
}  // namespace

std::vector<EventRecord> align_events(std::vector<EventRecord> events) {
    std::stable_sort(events.begin(), events.end(), key_less);
    for (std::size_t i = 1; i < events.size(); ++i) {
        if (events[i - 1].ts == events[i].ts && events[i - 1].seq == events[i].seq) {
            throw DuplicateKey("duplicate (ts, seq) = (" + std::to_string(events[i].ts) + ", " +
                               std::to_string(events[i].seq) + ")");
        }
    }
    return events;
}

bool is_aligned(std::span<const EventRecord> events) {
    for (std::size_t i = 1; i < events.size(); ++i) {
        if (!key_less(events[i - 1], events[i])) return false;
    }
    return true;
}

TargetClass classify_target(OperationKind op, std::string_view target) {
    if (op == OperationKind::NetConnect || op == OperationKind::NetSend) {
        return TargetClass::NetworkHost;
    }
    if (op == OperationKind::RegSet) return TargetClass::Registry;

    const std::string path = normalize_path(target);
    if (has_temp_segment(path)) return TargetClass::Temp;
    if (has_user_doc_extension(path)) return TargetClass::UserDoc;
    if (has_system_prefix(path)) return TargetClass::SystemFile;
    return TargetClass::Other;
}

double shannon_entropy(std::span<const std::uint8_t> buffer) {
    if (buffer.empty()) return 0.0;
    std::array<std::size_t, 256> freq{};
    for (std::uint8_t b : buffer) ++freq[b];

    const double n = static_cast<double>(buffer.size());
    double h = 0.0;
    for (std::size_t count : freq) {
        if (count == 0) continue;
        const double p = static_cast<double>(count) / n;
        h -= p * std::log2(p);
    }
    return std::clamp(h, 0.0, 8.0);
}

TraceReadResult read_trace(std::istream& in, bool skip_malformed) {
    TraceReadResult result;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (skippable(line)) continue;
        try {
            result.events.push_back(parse_event_line(line, line_no));
        } catch (const MalformedRecord& err) {
            if (!skip_malformed) throw;
            ++result.skipped;
            result.diagnostics.emplace_back(err.what());
        }
    }
    return result;
}

TraceReadResult read_trace_file(const std::string& path, bool skip_malformed) {
    std::ifstream in(path);
    if (!in) throw UnreadableInput("cannot open trace '" + path + "'");
    return read_trace(in, skip_malformed);
}

void write_trace(std::ostream& out, std::span<const EventRecord> events) {
    for (const auto& ev : events) out << serialize_event(ev) << '\n';
}

void write_trace_file(const std::string& path, std::span<const EventRecord> events) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UnreadableInput("cannot write '" + path + "'");
    write_trace(out, events);
}

// ---------------------------------------------------------------------------

std::string_view to_string(Label label) {
    return label == Label::Ransomware ? "ransomware" : "benign";
}

std::optional<Label> parse_label(std::string_view token) {
    if (token == "benign") return Label::Benign;
    if (token == "ransomware") return Label::Ransomware;
    return std::nullopt;
}

LabeledInterval parse_interval_line(std::string_view line, std::size_t line_no) {
    const json doc = parse_object(line, line_no);
    LabeledInterval iv;
    iv.start = as_real(require(doc, "start", line_no), "start", line_no);
    iv.end = as_real(require(doc, "end", line_no), "end", line_no);
    if (iv.end < iv.start) throw MalformedRecord(line_no, "interval end precedes start");
    const std::string label = as_string(require(doc, "label", line_no), "label", line_no);
    const auto parsed = parse_label(label);
    if (!parsed) throw MalformedRecord(line_no, "unknown label '" + label + "'");
    iv.label = *parsed;
    iv.family = as_string(require(doc, "family", line_no), "family", line_no);
    if (auto it = doc.find("pid"); it != doc.end()) iv.pid = as_integer(*it, "pid", line_no);
    return iv;
}

std::string serialize_interval(const LabeledInterval& iv) {
    nlohmann::ordered_json doc;
    doc["start"] = iv.start;
    doc["end"] = iv.end;
    doc["label"] = std::string(to_string(iv.label));
    doc["family"] = iv.family;
    if (iv.pid) doc["pid"] = *iv.pid;
    return doc.dump();
}

GroundTruth read_ground_truth(std::istream& in) {
    GroundTruth truth;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (skippable(line)) continue;
        truth.push_back(parse_interval_line(line, line_no));
    }
    return truth;
}

GroundTruth read_ground_truth_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UnreadableInput("cannot open ground truth '" + path + "'");
    return read_ground_truth(in);
}

void write_ground_truth(std::ostream& out, const GroundTruth& truth) {
    for (const auto& iv : truth) out << serialize_interval(iv) << '\n';
}

void write_ground_truth_file(const std::string& path, const GroundTruth& truth) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UnreadableInput("cannot write '" + path + "'");
    write_ground_truth(out, truth);
}

}  // namespace tcg
