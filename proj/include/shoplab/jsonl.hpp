#pragma once
// Line-delimited JSON helpers shared by the CLI and tests.

#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "shoplab/errors.hpp"

namespace shoplab {

inline std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << content;
}

// Calls fn(line_no, parsed) for every non-blank line; invalid JSON lines go
// to on_bad (skip-with-warning semantics live in the caller).
inline void for_each_jsonl(const std::string& path,
                           const std::function<void(int, const nlohmann::json&)>& fn,
                           const std::function<void(int, const std::string&)>& on_bad = {}) {
    const auto lines = read_lines(path);
    int line_no = 0;
    for (const auto& line : lines) {
        ++line_no;
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            if (on_bad) on_bad(line_no, line);
            continue;
        }
        fn(line_no, j);
    }
}

}  // namespace shoplab
