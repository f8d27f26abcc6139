#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "judgekit/error.hpp"

namespace judgekit {

using nlohmann::json;

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file for reading: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("read failed: " + path.string());
    return ss.str();
}

/// Writes via a temp file in the same directory followed by a rename, so
/// readers never observe a partial document.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    namespace fs = std::filesystem;
    fs::path dir = path.parent_path();
    if (!dir.empty()) {
        std::error_code ec;
        fs::create_directories(dir, ec);
    }
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open file for writing: " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("rename failed: " + tmp.string() + " -> " + path.string());
}

inline json parse_json(std::string_view text, const std::string& where) {
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded()) throw SchemaError("malformed JSON in " + where);
    return doc;
}

inline json read_json_file(const std::filesystem::path& path) {
    return parse_json(read_file(path), path.string());
}

/// Rejects fields outside the allowed set. All document schemas are strict;
/// a typo is a load error, not an ignored setting.
inline void check_known_fields(const json& obj, std::initializer_list<const char*> allowed,
                               const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* k : allowed) {
            if (it.key() == k) {
                known = true;
                break;
            }
        }
        if (!known) throw SchemaError("unknown field \"" + it.key() + "\" in " + where);
    }
}

inline const json& require_field(const json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) throw SchemaError("missing field \"" + std::string(key) + "\" in " + where);
    return *it;
}

inline std::string require_string(const json& obj, const char* key, const std::string& where) {
    const json& v = require_field(obj, key, where);
    if (!v.is_string()) throw SchemaError("field \"" + std::string(key) + "\" must be a string in " + where);
    return v.get<std::string>();
}

inline void require_schema_version(const json& obj, int expected, const std::string& where) {
    const json& v = require_field(obj, "schema_version", where);
    if (!v.is_number_integer() || v.get<int>() != expected) {
        throw SchemaError("unsupported schema_version in " + where + " (expected " +
                          std::to_string(expected) + ")");
    }
}

/// FNV-1a 64-bit. Stable across platforms and runs, unlike std::hash.
inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string to_hex(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf);
}

}  // namespace judgekit
