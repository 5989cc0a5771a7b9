#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace graphqa {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r' || s.front() == '\n'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n'))
        s.remove_suffix(1);
    return s;
}

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return out;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            out.emplace_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

// Splits "a | b | c" on the separator and trims each piece; empties dropped.
inline std::vector<std::string> split_trimmed(std::string_view s, char sep) {
    std::vector<std::string> out;
    for (const auto& piece : split(s, sep)) {
        auto t = trim(piece);
        if (!t.empty()) out.emplace_back(t);
    }
    return out;
}

inline bool starts_with(std::string_view s, std::string_view prefix) {
    return s.substr(0, prefix.size()) == prefix;
}

// Answer normalization for Hits@1 matching: lowercase, trim, collapse
// whitespace runs, strip a leading "the ".
inline std::string normalize_answer(std::string_view s) {
    std::string lowered = to_lower(trim(s));
    std::string collapsed;
    bool pending_space = false;
    for (char c : lowered) {
        if (c == ' ' || c == '\t') {
            pending_space = true;
            continue;
        }
        if (pending_space && !collapsed.empty()) collapsed += ' ';
        pending_space = false;
        collapsed += c;
    }
    if (starts_with(collapsed, "the ")) collapsed = collapsed.substr(4);
    return collapsed;
}

// FNV-1a. Used for per-sample RNG seeding, scripted-backend keys and config
// digests; stable across platforms, unlike std::hash.
inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ull) {
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string to_hex(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

}  // namespace graphqa
