#pragma once

// Small helpers shared by the document readers. Every document is an
// nlohmann::json object; readers reject unknown keys and report the path of
// the offending field.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>

#include <json.hpp>

#include "tcg/errors.hpp"

namespace tcg::detail {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

inline Json parse_document(std::string_view text, std::string_view what) {
    Json doc = Json::parse(text.begin(), text.end(), nullptr, false);
    if (doc.is_discarded()) throw MalformedDocument(std::string(what) + ": not a valid document");
    if (!doc.is_object()) throw MalformedDocument(std::string(what) + ": expected an object");
    return doc;
}

inline void reject_unknown(const Json& obj, std::initializer_list<std::string_view> allowed,
                           std::string_view where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (auto key : allowed) known = known || key == it.key();
        if (!known) {
            throw MalformedDocument(std::string(where) + ": unknown key '" + it.key() + "'");
        }
    }
}

inline const Json& field(const Json& obj, const char* key, std::string_view where) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        throw MalformedDocument(std::string(where) + ": missing key '" + key + "'");
    }
    return *it;
}

inline double to_real(const Json& v, std::string_view where) {
    if (!v.is_number()) throw MalformedDocument(std::string(where) + ": expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw MalformedDocument(std::string(where) + ": expected a finite number");
    return x;
}

inline std::int64_t to_int(const Json& v, std::string_view where) {
    if (!v.is_number_integer()) throw MalformedDocument(std::string(where) + ": expected an integer");
    return v.get<std::int64_t>();
}

inline std::uint64_t to_uint(const Json& v, std::string_view where) {
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() &&
                                   v.get<std::int64_t>() < 0)) {
        throw MalformedDocument(std::string(where) + ": expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
}

inline bool to_bool(const Json& v, std::string_view where) {
    if (!v.is_boolean()) throw MalformedDocument(std::string(where) + ": expected a boolean");
    return v.get<bool>();
}

inline std::string to_text(const Json& v, std::string_view where) {
    if (!v.is_string()) throw MalformedDocument(std::string(where) + ": expected a string");
    return v.get<std::string>();
}

template <class T, class Conv>
void read_optional(const Json& obj, const char* key, T& out, Conv conv, std::string_view where) {
    if (auto it = obj.find(key); it != obj.end()) out = conv(*it, std::string(where) + "." + key);
}

inline void read_real(const Json& obj, const char* key, double& out, std::string_view where) {
    read_optional(obj, key, out, [](const Json& v, const std::string& w) { return to_real(v, w); },
                  where);
}

inline void check_version(const Json& obj, std::int64_t expected, std::string_view where) {
    const auto version = to_int(field(obj, "format_version", where), where);
    if (version != expected) {
        throw MalformedDocument(std::string(where) + ": unsupported format_version " +
                                std::to_string(version));
    }
}

}  // namespace tcg::detail
