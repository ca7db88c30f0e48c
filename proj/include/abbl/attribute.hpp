#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "abbl/error.hpp"

namespace abbl {

enum class AttributeKind { continuous, boolean, categorical, text };

constexpr std::string_view to_string(AttributeKind kind) noexcept
{
    switch (kind) {
    case AttributeKind::continuous: return "continuous";
    case AttributeKind::boolean: return "boolean";
    case AttributeKind::categorical: return "categorical";
    case AttributeKind::text: return "text";
    }
    return "?";
}

inline AttributeKind parse_attribute_kind(std::string_view text)
{
    if (text == "continuous")
        return AttributeKind::continuous;
    if (text == "boolean")
        return AttributeKind::boolean;
    if (text == "categorical")
        return AttributeKind::categorical;
    if (text == "text")
        return AttributeKind::text;
    fail(ErrorCode::InvalidAttribute, "unknown attribute kind '" + std::string(text) + "'");
}

struct AttributeDef {
    std::string name;
    AttributeKind kind = AttributeKind::continuous;
    double lo = 0.0; // continuous only
    double hi = 0.0;
    std::vector<std::string> categories; // categorical only
    std::optional<std::string> units;

    static AttributeDef continuous(std::string name, double lo, double hi)
    {
        return {std::move(name), AttributeKind::continuous, lo, hi, {}, std::nullopt};
    }
    static AttributeDef boolean(std::string name)
    {
        return {std::move(name), AttributeKind::boolean, 0.0, 0.0, {}, std::nullopt};
    }
    static AttributeDef categorical(std::string name, std::vector<std::string> categories)
    {
        return {std::move(name), AttributeKind::categorical, 0.0, 0.0, std::move(categories),
                std::nullopt};
    }
    static AttributeDef text(std::string name)
    {
        return {std::move(name), AttributeKind::text, 0.0, 0.0, {}, std::nullopt};
    }

    double width() const noexcept { return hi - lo; }

    bool has_category(std::string_view value) const
    {
        return std::find(categories.begin(), categories.end(), value) != categories.end();
    }

    friend bool operator==(const AttributeDef&, const AttributeDef&) = default;
};

inline void validate(const AttributeDef& def)
{
    if (def.name.empty())
        fail(ErrorCode::InvalidAttribute, "attribute name must not be empty");
    if (def.name.find_first_of("[]") != std::string::npos)
        fail(ErrorCode::InvalidAttribute, "attribute name '" + def.name + "' contains a bracket");
    switch (def.kind) {
    case AttributeKind::continuous:
        if (!std::isfinite(def.lo) || !std::isfinite(def.hi) || !(def.lo < def.hi))
            fail(ErrorCode::InvalidAttribute,
                 "continuous attribute '" + def.name + "' needs finite lo < hi");
        break;
    case AttributeKind::categorical: {
        if (def.categories.empty())
            fail(ErrorCode::InvalidAttribute,
                 "categorical attribute '" + def.name + "' needs at least one category");
        auto sorted = def.categories;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            fail(ErrorCode::InvalidAttribute,
                 "categorical attribute '" + def.name + "' has duplicate categories");
        break;
    }
    case AttributeKind::boolean:
    case AttributeKind::text: break;
    }
}

// Attribute value. Categorical and text values are both held as strings.
using Value = std::variant<double, bool, std::string>;

inline bool conforms(const Value& value, const AttributeDef& def)
{
    switch (def.kind) {
    case AttributeKind::continuous: {
        const double* x = std::get_if<double>(&value);
        return x && std::isfinite(*x) && *x >= def.lo && *x <= def.hi;
    }
    case AttributeKind::boolean: return std::holds_alternative<bool>(value);
    case AttributeKind::categorical: {
        const std::string* s = std::get_if<std::string>(&value);
        return s && def.has_category(*s);
    }
    case AttributeKind::text: return std::holds_alternative<std::string>(value);
    }
    return false;
}

inline double clamp_to_range(double x, const AttributeDef& def) noexcept
{
    return std::clamp(x, def.lo, def.hi);
}

// Shortest text that parses back to the same double.
inline std::string format_number(double x)
{
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, end);
}

inline std::optional<double> parse_number(std::string_view text)
{
    while (!text.empty() && text.front() == ' ')
        text.remove_prefix(1);
    while (!text.empty() && text.back() == ' ')
        text.remove_suffix(1);
    if (!text.empty() && text.front() == '+')
        text.remove_prefix(1);
    double x = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), x);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty())
        return std::nullopt;
    return x;
}

// Text form used in CSV files and tables: numbers shortest round-trip,
// booleans True/False, strings verbatim.
inline std::string format_value(const Value& value)
{
    if (const double* x = std::get_if<double>(&value))
        return format_number(*x);
    if (const bool* b = std::get_if<bool>(&value))
        return *b ? "True" : "False";
    return std::get<std::string>(value);
}

// Parses text according to the attribute kind; nullopt on malformed input.
// Range and category membership are not checked here.
inline std::optional<Value> parse_value(std::string_view text, const AttributeDef& def)
{
    switch (def.kind) {
    case AttributeKind::continuous:
        if (auto x = parse_number(text))
            return Value{*x};
        return std::nullopt;
    case AttributeKind::boolean:
        if (text == "True")
            return Value{true};
        if (text == "False")
            return Value{false};
        return std::nullopt;
    case AttributeKind::categorical:
    case AttributeKind::text: return Value{std::string(text)};
    }
    return std::nullopt;
}

} // namespace abbl
