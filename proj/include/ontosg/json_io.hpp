#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>

#include "json.hpp"

#include "ontosg/error.hpp"

namespace ontosg {

using Json = nlohmann::json;

namespace detail {

inline std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t offset) {
    std::size_t line = 1;
    std::size_t column = 1;
    offset = std::min(offset, text.size());
    for (std::size_t i = 0; i < offset; ++i) {
        if (text[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    return {line, column};
}

} // namespace detail

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError("cannot open file '" + path.string() + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

inline void write_text_file(const std::filesystem::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw FormatError("cannot write file '" + path.string() + "'");
    }
    out << content;
}

/// Parses one JSON document. `first_line` shifts reported line numbers for
/// documents embedded in a larger file (one record per line).
inline Json parse_json(std::string_view text, std::size_t first_line = 1) {
    try {
        return Json::parse(text.begin(), text.end());
    } catch (const Json::parse_error& e) {
        // nlohmann reports the offset one past the offending byte.
        const std::size_t offset = e.byte == 0 ? 0 : e.byte - 1;
        auto [line, column] = detail::line_column(text, offset);
        std::string message = e.what();
        if (auto pos = message.find("syntax error"); pos != std::string::npos) {
            message = message.substr(pos);
        }
        throw ParseError(message, line + first_line - 1, column);
    }
}

/// Calls `visit(record, line_number)` for every non-blank line of a
/// one-record-per-line document.
inline void for_each_json_line(std::string_view text,
                               const std::function<void(const Json&, std::size_t)>& visit) {
    std::size_t line_number = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t end = std::min(text.find('\n', start), text.size());
        ++line_number;
        std::string_view line = text.substr(start, end - start);
        if (line.find_first_not_of(" \t\r") != std::string_view::npos) {
            visit(parse_json(line, line_number), line_number);
        }
        if (end == text.size()) {
            break;
        }
        start = end + 1;
    }
}

} // namespace ontosg
