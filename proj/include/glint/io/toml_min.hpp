#pragma once

// Reader for the TOML subset used by distortions.toml: [tables], string
// values, numbers, and flat numeric arrays. Not a general TOML parser.

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "glint/core/error.hpp"

namespace glint::toml {

struct Value {
    std::string str;
    double num = 0.0;
    std::vector<double> arr;
    enum class Kind { String, Number, Array } kind = Kind::Number;
};

using Table = std::map<std::string, Value>;
using Document = std::map<std::string, Table>;

namespace detail {

inline std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline Value parse_value(const std::string& raw, int line_no) {
    Value v;
    std::string s = trim(raw);
    if (s.empty()) throw ConfigError("toml: empty value at line " + std::to_string(line_no));
    if (s.front() == '"') {
        if (s.size() < 2 || s.back() != '"')
            throw ConfigError("toml: unterminated string at line " + std::to_string(line_no));
        v.kind = Value::Kind::String;
        v.str = s.substr(1, s.size() - 2);
        return v;
    }
    if (s.front() == '[') {
        if (s.back() != ']')
            throw ConfigError("toml: unterminated array at line " + std::to_string(line_no));
        v.kind = Value::Kind::Array;
        std::stringstream ss(s.substr(1, s.size() - 2));
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty()) continue;
            v.arr.push_back(std::stod(item));
        }
        return v;
    }
    v.kind = Value::Kind::Number;
    v.num = std::stod(s);
    return v;
}

}  // namespace detail

inline Document parse(std::istream& in) {
    Document doc;
    std::string current;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("toml: bad table header at line " + std::to_string(line_no));
            current = detail::trim(line.substr(1, line.size() - 2));
            doc[current];
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("toml: expected key = value at line " + std::to_string(line_no));
        std::string key = detail::trim(line.substr(0, eq));
        doc[current][key] = detail::parse_value(line.substr(eq + 1), line_no);
    }
    return doc;
}

inline Document parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path);
    return parse(f);
}

}  // namespace glint::toml
