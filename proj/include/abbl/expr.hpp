#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "abbl/attribute.hpp"
#include "abbl/error.hpp"

namespace abbl {

inline constexpr std::size_t max_path_depth = 3;

// Reference to an attribute, possibly on a related agent:
// [lives in household].[Is in dept] has relations {"lives in household"}.
struct AttrPath {
    std::vector<std::string> relations;
    std::string attribute;

    std::size_t depth() const noexcept { return relations.size(); }
    friend bool operator==(const AttrPath&, const AttrPath&) = default;
    friend auto operator<=>(const AttrPath&, const AttrPath&) = default;
};

inline std::string to_string(const AttrPath& path)
{
    std::string out;
    for (const auto& r : path.relations)
        out += "[" + r + "].";
    out += "[" + path.attribute + "]";
    return out;
}

enum class ValueType { number, boolean, text };

enum class ExprKind {
    number,
    boolean,
    text,
    path,
    parameter,
    neg,
    not_,
    add,
    sub,
    mul,
    div,
    lt,
    le,
    gt,
    ge,
    eq,
    ne,
    and_,
    or_,
};

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

// Typed expression node. Trees are immutable once built and shared freely
// between threads.
struct Expr {
    ExprKind kind = ExprKind::number;
    ValueType type = ValueType::number;
    double number = 0.0;
    bool boolean = false;
    std::string text; // text literal or parameter name
    AttrPath path;
    // Definition of the referenced attribute (path nodes only).
    std::optional<AttributeDef> attribute;
    ExprPtr lhs;
    ExprPtr rhs;
};

inline bool is_binary(ExprKind k) noexcept
{
    return k >= ExprKind::add;
}

inline bool structurally_equal(const Expr* a, const Expr* b)
{
    if (a == b)
        return true;
    if (!a || !b)
        return false;
    if (a->kind != b->kind || a->type != b->type)
        return false;
    switch (a->kind) {
    case ExprKind::number:
        if (a->number != b->number)
            return false;
        break;
    case ExprKind::boolean:
        if (a->boolean != b->boolean)
            return false;
        break;
    case ExprKind::text:
    case ExprKind::parameter:
        if (a->text != b->text)
            return false;
        break;
    case ExprKind::path:
        if (a->path != b->path)
            return false;
        break;
    default: break;
    }
    return structurally_equal(a->lhs.get(), b->lhs.get()) &&
           structurally_equal(a->rhs.get(), b->rhs.get());
}

namespace detail {

inline int precedence(ExprKind k) noexcept
{
    switch (k) {
    case ExprKind::or_: return 1;
    case ExprKind::and_: return 2;
    case ExprKind::not_: return 3;
    case ExprKind::lt:
    case ExprKind::le:
    case ExprKind::gt:
    case ExprKind::ge:
    case ExprKind::eq:
    case ExprKind::ne: return 4;
    case ExprKind::add:
    case ExprKind::sub: return 5;
    case ExprKind::mul:
    case ExprKind::div: return 6;
    case ExprKind::neg: return 7;
    default: return 8;
    }
}

inline std::string_view symbol(ExprKind k) noexcept
{
    switch (k) {
    case ExprKind::add: return "+";
    case ExprKind::sub: return "-";
    case ExprKind::mul: return "*";
    case ExprKind::div: return "/";
    case ExprKind::lt: return "<";
    case ExprKind::le: return "<=";
    case ExprKind::gt: return ">";
    case ExprKind::ge: return ">=";
    case ExprKind::eq: return "==";
    case ExprKind::ne: return "!=";
    case ExprKind::and_: return "AND";
    case ExprKind::or_: return "OR";
    default: return "?";
    }
}

inline std::string quote(std::string_view s)
{
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\')
            out.push_back('\\');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

inline std::string print_child(const Expr& child, bool needs_parens);

inline std::string print(const Expr& e)
{
    switch (e.kind) {
    case ExprKind::number: return format_number(e.number);
    case ExprKind::boolean: return e.boolean ? "True" : "False";
    case ExprKind::text: return quote(e.text);
    case ExprKind::parameter: return e.text;
    case ExprKind::path: return to_string(e.path);
    case ExprKind::neg:
        return "-" + print_child(*e.lhs, precedence(e.lhs->kind) < precedence(ExprKind::neg));
    case ExprKind::not_:
        return "NOT " + print_child(*e.lhs, precedence(e.lhs->kind) < precedence(ExprKind::not_));
    default: break;
    }
    // Binary operators are left-associative; comparisons do not chain.
    const int p = precedence(e.kind);
    const bool comparison = p == 4;
    const int lp = precedence(e.lhs->kind);
    const int rp = precedence(e.rhs->kind);
    return print_child(*e.lhs, comparison ? lp <= p : lp < p) + " " + std::string(symbol(e.kind)) +
           " " + print_child(*e.rhs, rp <= p);
}

inline std::string print_child(const Expr& child, bool needs_parens)
{
    return needs_parens ? "(" + print(child) + ")" : print(child);
}

} // namespace detail

// Canonical DSL text; parses back to a structurally identical tree.
inline std::string to_string(const Expr& e)
{
    return detail::print(e);
}

// Unknown-parameter values keyed by parameter name.
using ParameterAssignment = std::map<std::string, double, std::less<>>;

// Resolves attribute paths during evaluation. Returns nullptr when a
// relation is unbound or the attribute has no value.
class EvalContext {
  public:
    virtual ~EvalContext() = default;
    virtual const Value* lookup(const AttrPath& path) const = 0;
};

// Context over plain maps, for single-agent evaluation and tests.
class MapContext : public EvalContext {
  public:
    std::map<std::string, Value, std::less<>> attributes;
    std::map<std::string, const MapContext*, std::less<>> relations;

    const Value* lookup(const AttrPath& path) const override
    {
        const MapContext* cur = this;
        for (const auto& r : path.relations) {
            auto it = cur->relations.find(r);
            if (it == cur->relations.end() || !it->second)
                return nullptr;
            cur = it->second;
        }
        auto it = cur->attributes.find(path.attribute);
        return it == cur->attributes.end() ? nullptr : &it->second;
    }
};

namespace detail {

inline const Value& resolve(const Expr& e, const EvalContext& ctx)
{
    const Value* v = ctx.lookup(e.path);
    if (!v)
        fail(ErrorCode::UnresolvedPath, "cannot resolve " + to_string(e.path));
    return *v;
}

inline double parameter_value(const Expr& e, const ParameterAssignment& params)
{
    auto it = params.find(e.text);
    if (it == params.end())
        fail(ErrorCode::MissingParameter, "no value for parameter '" + e.text + "'");
    return it->second;
}

} // namespace detail

inline double eval_number(const Expr& e, const EvalContext& ctx, const ParameterAssignment& params);
inline bool eval_bool(const Expr& e, const EvalContext& ctx, const ParameterAssignment& params);

// Text-typed expressions are literals or paths, so no temporaries arise.
inline std::string_view eval_text(const Expr& e, const EvalContext& ctx, const ParameterAssignment&)
{
    if (e.kind == ExprKind::text)
        return e.text;
    const Value& v = detail::resolve(e, ctx);
    const std::string* s = std::get_if<std::string>(&v);
    if (!s)
        fail(ErrorCode::TypeMismatch, to_string(e.path) + " does not hold text");
    return *s;
}

inline double eval_number(const Expr& e, const EvalContext& ctx, const ParameterAssignment& params)
{
    switch (e.kind) {
    case ExprKind::number: return e.number;
    case ExprKind::parameter: return detail::parameter_value(e, params);
    case ExprKind::path: {
        const Value& v = detail::resolve(e, ctx);
        const double* x = std::get_if<double>(&v);
        if (!x)
            fail(ErrorCode::TypeMismatch, to_string(e.path) + " does not hold a number");
        return *x;
    }
    case ExprKind::neg: return -eval_number(*e.lhs, ctx, params);
    case ExprKind::add: return eval_number(*e.lhs, ctx, params) + eval_number(*e.rhs, ctx, params);
    case ExprKind::sub: return eval_number(*e.lhs, ctx, params) - eval_number(*e.rhs, ctx, params);
    case ExprKind::mul: return eval_number(*e.lhs, ctx, params) * eval_number(*e.rhs, ctx, params);
    case ExprKind::div: return eval_number(*e.lhs, ctx, params) / eval_number(*e.rhs, ctx, params);
    default: fail(ErrorCode::TypeMismatch, "expression is not numeric");
    }
}

inline bool eval_bool(const Expr& e, const EvalContext& ctx, const ParameterAssignment& params)
{
    switch (e.kind) {
    case ExprKind::boolean: return e.boolean;
    case ExprKind::path: {
        const Value& v = detail::resolve(e, ctx);
        const bool* b = std::get_if<bool>(&v);
        if (!b)
            fail(ErrorCode::TypeMismatch, to_string(e.path) + " does not hold a boolean");
        return *b;
    }
    case ExprKind::not_: return !eval_bool(*e.lhs, ctx, params);
    case ExprKind::and_: return eval_bool(*e.lhs, ctx, params) && eval_bool(*e.rhs, ctx, params);
    case ExprKind::or_: return eval_bool(*e.lhs, ctx, params) || eval_bool(*e.rhs, ctx, params);
    case ExprKind::lt: return eval_number(*e.lhs, ctx, params) < eval_number(*e.rhs, ctx, params);
    case ExprKind::le: return eval_number(*e.lhs, ctx, params) <= eval_number(*e.rhs, ctx, params);
    case ExprKind::gt: return eval_number(*e.lhs, ctx, params) > eval_number(*e.rhs, ctx, params);
    case ExprKind::ge: return eval_number(*e.lhs, ctx, params) >= eval_number(*e.rhs, ctx, params);
    case ExprKind::eq:
    case ExprKind::ne: {
        bool equal = false;
        switch (e.lhs->type) {
        case ValueType::number:
            equal = eval_number(*e.lhs, ctx, params) == eval_number(*e.rhs, ctx, params);
            break;
        case ValueType::boolean:
            equal = eval_bool(*e.lhs, ctx, params) == eval_bool(*e.rhs, ctx, params);
            break;
        case ValueType::text:
            equal = eval_text(*e.lhs, ctx, params) == eval_text(*e.rhs, ctx, params);
            break;
        }
        return e.kind == ExprKind::eq ? equal : !equal;
    }
    default: fail(ErrorCode::TypeMismatch, "expression is not boolean");
    }
}

inline Value eval_value(const Expr& e, const EvalContext& ctx, const ParameterAssignment& params)
{
    switch (e.type) {
    case ValueType::number: return eval_number(e, ctx, params);
    case ValueType::boolean: return eval_bool(e, ctx, params);
    case ValueType::text: return std::string(eval_text(e, ctx, params));
    }
    return 0.0;
}

// Visits every node, pre-order, left before right.
template <class Fn>
void for_each_node(const Expr& e, Fn&& fn)
{
    fn(e);
    if (e.lhs)
        for_each_node(*e.lhs, fn);
    if (e.rhs)
        for_each_node(*e.rhs, fn);
}

} // namespace abbl
