#pragma once

#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "abbl/error.hpp"

namespace abbl::csv {

// Reads one RFC 4180 record; quoted fields may contain commas, doubled
// quotes and newlines. Returns nullopt at end of input.
inline std::optional<std::vector<std::string>> read_record(std::istream& in, std::size_t& line)
{
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    bool any = false;
    char c;
    while (in.get(c)) {
        any = true;
        if (quoted) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field.push_back('"');
                } else {
                    quoted = false;
                }
            } else {
                if (c == '\n')
                    ++line;
                field.push_back(c);
            }
            continue;
        }
        if (c == '"' && field.empty()) {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c == '\n') {
            ++line;
            fields.push_back(std::move(field));
            return fields;
        } else if (c != '\r') {
            field.push_back(c);
        }
    }
    if (quoted)
        fail(ErrorCode::SchemaError, "unterminated quoted field near line " + std::to_string(line + 1));
    if (!any)
        return std::nullopt;
    fields.push_back(std::move(field));
    return fields;
}

inline std::string escape(std::string_view field)
{
    if (field.find_first_of(",\"\n\r") == std::string_view::npos)
        return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"')
            out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

inline std::string join(const std::vector<std::string>& fields)
{
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i)
            out.push_back(',');
        out += escape(fields[i]);
    }
    return out;
}

} // namespace abbl::csv
