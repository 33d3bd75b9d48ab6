#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace kgqa {

// All recoverable failures surface as kgqa::Error with a human-readable message.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

inline std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

inline std::string join_tokens(const std::vector<std::string>& tokens, const std::string& sep = " ") {
    std::string out;
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += sep;
        out += tokens[i];
    }
    return out;
}

// Identifiers must survive the action-sequence grammar unescaped.
inline bool valid_identifier(const std::string& id) {
    if (id.empty()) return false;
    for (char c : id) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r') return false;
        if (c == ',' || c == '(' || c == ')' || c == '#') return false;
    }
    return true;
}

// FNV-1a, used for deterministic config hashes embedded in reports.
inline std::uint64_t fnv1a(const std::string& data) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace kgqa
