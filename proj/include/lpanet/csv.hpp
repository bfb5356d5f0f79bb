#ifndef LPANET_CSV_HPP
#define LPANET_CSV_HPP

#include <charconv>
#include <string>

namespace lpanet {

/// Shortest round-trip decimal form; deterministic across runs.
inline std::string format_double(double v) {
    char buf[40];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

inline std::string csv_quote(const std::string& s, char delim = ',') {
    if (s.find(delim) == std::string::npos && s.find('"') == std::string::npos &&
        s.find('\n') == std::string::npos)
        return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

} // namespace lpanet

#endif
