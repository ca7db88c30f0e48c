#pragma once

#include <algorithm>
#include <cctype>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "abbl/expr.hpp"
#include "abbl/ontology.hpp"
#include "abbl/random.hpp"

namespace abbl {

struct UnknownParameter {
    std::string name;
    double lo = 0.0;
    double hi = 1.0;
    bool is_probability = false;

    double width() const noexcept { return hi - lo; }
    bool contains(double x) const noexcept { return x >= lo && x <= hi; }
    friend bool operator==(const UnknownParameter&, const UnknownParameter&) = default;
};

struct ParameterRange {
    std::string name;
    double lo = 0.0;
    double hi = 0.0;
};

inline constexpr std::string_view default_probability_param = "p_rule";

// Rule as written in a rule file: DSL text plus metadata.
struct RuleSpec {
    std::string id;
    TypeId agent_type;
    std::string text;
    bool probabilistic = false;
    std::vector<ParameterRange> parameters;
    std::optional<std::string> probability_param;
};

struct Rule {
    std::string id;
    TypeId agent_type;
    ExprPtr condition; // null when unconditional
    AttrPath target;   // always depth 0
    AttributeDef target_def;
    ExprPtr effect;
    bool probabilistic = false;
    std::optional<UnknownParameter> probability_param;
    // Free symbols in order of first appearance, then the probability
    // parameter if any.
    std::vector<UnknownParameter> parameters;
    std::string source_text;
    std::vector<ParameterRange> declared_ranges;
};

// Ignores id and source text.
inline bool structurally_equal(const Rule& a, const Rule& b)
{
    return a.agent_type == b.agent_type && structurally_equal(a.condition.get(), b.condition.get()) &&
           a.target == b.target && structurally_equal(a.effect.get(), b.effect.get()) &&
           a.probabilistic == b.probabilistic && a.probability_param == b.probability_param &&
           a.parameters == b.parameters;
}

// Canonical DSL form of the rule.
inline std::string print(const Rule& rule)
{
    std::string out;
    if (rule.condition)
        out = "IF " + to_string(*rule.condition) + " THEN ";
    return out + to_string(rule.target) + " = " + to_string(*rule.effect);
}

inline const std::vector<UnknownParameter>& free_parameters(const Rule& rule) noexcept
{
    return rule.parameters;
}

// Attribute paths read by the condition and the right-hand side.
inline std::vector<AttrPath> read_paths(const Rule& rule)
{
    std::vector<AttrPath> out;
    auto collect = [&](const Expr& e) {
        if (e.kind == ExprKind::path && std::find(out.begin(), out.end(), e.path) == out.end())
            out.push_back(e.path);
    };
    if (rule.condition)
        for_each_node(*rule.condition, collect);
    for_each_node(*rule.effect, collect);
    return out;
}

namespace detail {

enum class Tok {
    end,
    number,
    text,
    path_part, // [ ... ]
    ident,
    kw_if,
    kw_then,
    kw_and,
    kw_or,
    kw_not,
    kw_true,
    kw_false,
    plus,
    minus,
    star,
    slash,
    lparen,
    rparen,
    dot,
    assign,
    eq,
    ne,
    lt,
    le,
    gt,
    ge,
};

struct Token {
    Tok kind = Tok::end;
    std::size_t pos = 0;
    std::string text;
    double number = 0.0;
};

inline std::string describe(const Token& t)
{
    switch (t.kind) {
    case Tok::end: return "end of input";
    case Tok::number: return "number '" + t.text + "'";
    case Tok::text: return "text literal";
    case Tok::path_part: return "'[" + t.text + "]'";
    case Tok::ident: return "identifier '" + t.text + "'";
    default: return "'" + t.text + "'";
    }
}

inline bool is_keyword(std::string_view w)
{
    return w == "IF" || w == "THEN" || w == "AND" || w == "OR" || w == "NOT" || w == "True" ||
           w == "False";
}

inline bool is_identifier(std::string_view w)
{
    if (w.empty() || !(std::isalpha(static_cast<unsigned char>(w[0])) || w[0] == '_'))
        return false;
    return std::all_of(w.begin(), w.end(), [](char c) {
               return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
           }) &&
           !is_keyword(w);
}

inline std::vector<Token> tokenize(std::string_view src)
{
    std::vector<Token> out;
    std::size_t i = 0;
    auto push = [&](Tok kind, std::size_t pos, std::string text) {
        out.push_back(Token{kind, pos, std::move(text), 0.0});
    };
    while (i < src.size()) {
        const char c = src[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        const std::size_t start = i;
        if (c == '[') {
            const auto close = src.find(']', i + 1);
            if (close == std::string_view::npos)
                throw SyntaxError(i, "']'", "end of input");
            std::string name(src.substr(i + 1, close - i - 1));
            const auto first = name.find_first_not_of(' ');
            const auto last = name.find_last_not_of(' ');
            name = first == std::string::npos ? "" : name.substr(first, last - first + 1);
            if (name.empty())
                throw SyntaxError(i + 1, "attribute or relation name", "']'");
            if (name.find('[') != std::string::npos)
                throw SyntaxError(i + 1 + name.find('['), "']'", "'['");
            push(Tok::path_part, start, std::move(name));
            i = close + 1;
        } else if (c == '"') {
            std::string value;
            ++i;
            bool closed = false;
            while (i < src.size()) {
                if (src[i] == '\\' && i + 1 < src.size()) {
                    value.push_back(src[i + 1]);
                    i += 2;
                } else if (src[i] == '"') {
                    closed = true;
                    ++i;
                    break;
                } else {
                    value.push_back(src[i++]);
                }
            }
            if (!closed)
                throw SyntaxError(src.size(), "'\"'", "end of input");
            push(Tok::text, start, std::move(value));
        } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                   (c == '.' && i + 1 < src.size() && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
            while (i < src.size() && (std::isdigit(static_cast<unsigned char>(src[i])) || src[i] == '.'))
                ++i;
            if (i < src.size() && (src[i] == 'e' || src[i] == 'E')) {
                std::size_t j = i + 1;
                if (j < src.size() && (src[j] == '+' || src[j] == '-'))
                    ++j;
                if (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) {
                    i = j;
                    while (i < src.size() && std::isdigit(static_cast<unsigned char>(src[i])))
                        ++i;
                }
            }
            std::string lexeme(src.substr(start, i - start));
            auto value = parse_number(lexeme);
            if (!value)
                throw SyntaxError(start, "number", "'" + lexeme + "'");
            out.push_back(Token{Tok::number, start, lexeme, *value});
        } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            while (i < src.size() &&
                   (std::isalnum(static_cast<unsigned char>(src[i])) || src[i] == '_'))
                ++i;
            std::string word(src.substr(start, i - start));
            Tok kind = Tok::ident;
            if (word == "IF")
                kind = Tok::kw_if;
            else if (word == "THEN")
                kind = Tok::kw_then;
            else if (word == "AND")
                kind = Tok::kw_and;
            else if (word == "OR")
                kind = Tok::kw_or;
            else if (word == "NOT")
                kind = Tok::kw_not;
            else if (word == "True")
                kind = Tok::kw_true;
            else if (word == "False")
                kind = Tok::kw_false;
            push(kind, start, std::move(word));
        } else {
            auto two = src.substr(i, 2);
            if (two == "==") {
                push(Tok::eq, start, "==");
                i += 2;
            } else if (two == "!=") {
                push(Tok::ne, start, "!=");
                i += 2;
            } else if (two == "<=") {
                push(Tok::le, start, "<=");
                i += 2;
            } else if (two == ">=") {
                push(Tok::ge, start, ">=");
                i += 2;
            } else {
                Tok kind = Tok::end;
                switch (c) {
                case '+': kind = Tok::plus; break;
                case '-': kind = Tok::minus; break;
                case '*': kind = Tok::star; break;
                case '/': kind = Tok::slash; break;
                case '(': kind = Tok::lparen; break;
                case ')': kind = Tok::rparen; break;
                case '.': kind = Tok::dot; break;
                case '=': kind = Tok::assign; break;
                case '<': kind = Tok::lt; break;
                case '>': kind = Tok::gt; break;
                default: throw SyntaxError(i, "expression", "'" + std::string(1, c) + "'");
                }
                push(kind, start, std::string(1, c));
                ++i;
            }
        }
    }
    out.push_back(Token{Tok::end, src.size(), "", 0.0});
    return out;
}

inline std::string_view type_name(ValueType t) noexcept
{
    switch (t) {
    case ValueType::number: return "number";
    case ValueType::boolean: return "boolean";
    case ValueType::text: return "text";
    }
    return "?";
}

inline ValueType value_type_of(AttributeKind kind) noexcept
{
    switch (kind) {
    case AttributeKind::continuous: return ValueType::number;
    case AttributeKind::boolean: return ValueType::boolean;
    case AttributeKind::categorical:
    case AttributeKind::text: return ValueType::text;
    }
    return ValueType::number;
}

// Recursive-descent parser with inline type checking against the ontology.
//
//   rule    := ["IF" or "THEN"] path "=" or
//   or      := and ("OR" and)*
//   and     := not ("AND" not)*
//   not     := "NOT" not | cmp
//   cmp     := sum [("<"|"<="|">"|">="|"=="|"!=") sum]
//   sum     := product (("+"|"-") product)*
//   product := unary (("*"|"/") unary)*
//   unary   := "-" unary | primary
//   primary := number | text | "True" | "False" | ident | path | "(" or ")"
//   path    := "[" name "]" ("." "[" name "]")*
class Parser {
  public:
    Parser(const Ontology& ontology, TypeId agent_type, std::string_view src)
        : ontology_(ontology), agent_type_(std::move(agent_type)), tokens_(tokenize(src))
    {
    }

    struct Parsed {
        ExprPtr condition;
        AttrPath target;
        AttributeDef target_def;
        ExprPtr effect;
    };

    Parsed parse_rule()
    {
        Parsed out;
        if (accept(Tok::kw_if)) {
            out.condition = parse_or();
            require_type(*out.condition, ValueType::boolean, "condition");
            expect(Tok::kw_then, "'THEN'");
        }
        const std::size_t target_pos = peek().pos;
        if (peek().kind != Tok::path_part)
            throw SyntaxError(peek().pos, "attribute path", describe(peek()));
        auto target = parse_path();
        if (target->path.depth() != 0)
            fail(ErrorCode::PathTooDeep, "rule effects may only write the agent's own attributes (at " +
                                             std::to_string(target_pos) + ")");
        out.target = target->path;
        out.target_def = *target->attribute;
        expect(Tok::assign, "'='");
        out.effect = parse_or();
        check_assignable(out.target_def, *out.effect);
        expect(Tok::end, "end of rule");
        return out;
    }

    ExprPtr parse_condition_only()
    {
        auto e = parse_or();
        require_type(*e, ValueType::boolean, "condition");
        expect(Tok::end, "end of expression");
        return e;
    }

    // Parameter symbols in order of first appearance.
    const std::vector<std::string>& symbols() const noexcept { return symbols_; }

  private:
    const Token& peek() const { return tokens_[pos_]; }
    const Token& advance() { return tokens_[pos_++]; }

    bool accept(Tok kind)
    {
        if (peek().kind != kind)
            return false;
        ++pos_;
        return true;
    }

    const Token& expect(Tok kind, const std::string& what)
    {
        if (peek().kind != kind)
            throw SyntaxError(peek().pos, what, describe(peek()));
        return advance();
    }

    static void require_type(const Expr& e, ValueType want, std::string_view role)
    {
        if (e.type != want)
            fail(ErrorCode::TypeMismatch, std::string(role) + " must be " +
                                              std::string(type_name(want)) + ", got " +
                                              std::string(type_name(e.type)) + " in '" +
                                              to_string(e) + "'");
    }

    static ExprPtr make(Expr e) { return std::make_shared<const Expr>(std::move(e)); }

    ExprPtr binary(ExprKind kind, ExprPtr lhs, ExprPtr rhs)
    {
        Expr e;
        e.kind = kind;
        e.lhs = std::move(lhs);
        e.rhs = std::move(rhs);
        const Expr& l = *e.lhs;
        const Expr& r = *e.rhs;
        switch (kind) {
        case ExprKind::add:
        case ExprKind::sub:
        case ExprKind::mul:
        case ExprKind::div:
            require_type(l, ValueType::number, "arithmetic operand");
            require_type(r, ValueType::number, "arithmetic operand");
            e.type = ValueType::number;
            break;
        case ExprKind::lt:
        case ExprKind::le:
        case ExprKind::gt:
        case ExprKind::ge:
            require_type(l, ValueType::number, "ordered comparison operand");
            require_type(r, ValueType::number, "ordered comparison operand");
            e.type = ValueType::boolean;
            break;
        case ExprKind::eq:
        case ExprKind::ne:
            if (l.type != r.type)
                fail(ErrorCode::TypeMismatch, "cannot compare " + std::string(type_name(l.type)) +
                                                  " with " + std::string(type_name(r.type)));
            check_category_literal(l, r);
            check_category_literal(r, l);
            e.type = ValueType::boolean;
            break;
        case ExprKind::and_:
        case ExprKind::or_:
            require_type(l, ValueType::boolean, "logical operand");
            require_type(r, ValueType::boolean, "logical operand");
            e.type = ValueType::boolean;
            break;
        default: break;
        }
        return make(std::move(e));
    }

    // A literal compared with a categorical attribute must name a category.
    static void check_category_literal(const Expr& path, const Expr& literal)
    {
        if (path.kind == ExprKind::path && path.attribute &&
            path.attribute->kind == AttributeKind::categorical && literal.kind == ExprKind::text &&
            !path.attribute->has_category(literal.text))
            fail(ErrorCode::TypeMismatch, "'" + literal.text + "' is not a category of " +
                                              to_string(path.path));
    }

    static void check_assignable(const AttributeDef& target, const Expr& value)
    {
        const ValueType want = value_type_of(target.kind);
        if (value.type != want)
            fail(ErrorCode::TypeMismatch, "cannot assign " + std::string(type_name(value.type)) +
                                              " to " + std::string(to_string(target.kind)) +
                                              " attribute [" + target.name + "]");
        if (target.kind != AttributeKind::categorical)
            return;
        if (value.kind == ExprKind::text) {
            if (!target.has_category(value.text))
                fail(ErrorCode::TypeMismatch,
                     "'" + value.text + "' is not a category of [" + target.name + "]");
            return;
        }
        const auto& src = *value.attribute;
        const bool subset = src.kind == AttributeKind::categorical &&
                            std::all_of(src.categories.begin(), src.categories.end(),
                                        [&](const std::string& c) { return target.has_category(c); });
        if (!subset)
            fail(ErrorCode::TypeMismatch, to_string(value.path) +
                                              " may hold values outside the categories of [" +
                                              target.name + "]");
    }

    ExprPtr parse_or()
    {
        auto lhs = parse_and();
        while (accept(Tok::kw_or))
            lhs = binary(ExprKind::or_, lhs, parse_and());
        return lhs;
    }

    ExprPtr parse_and()
    {
        auto lhs = parse_not();
        while (accept(Tok::kw_and))
            lhs = binary(ExprKind::and_, lhs, parse_not());
        return lhs;
    }

    ExprPtr parse_not()
    {
        if (accept(Tok::kw_not)) {
            auto operand = parse_not();
            require_type(*operand, ValueType::boolean, "NOT operand");
            Expr e;
            e.kind = ExprKind::not_;
            e.type = ValueType::boolean;
            e.lhs = std::move(operand);
            return make(std::move(e));
        }
        return parse_cmp();
    }

    ExprPtr parse_cmp()
    {
        auto lhs = parse_sum();
        ExprKind kind;
        switch (peek().kind) {
        case Tok::lt: kind = ExprKind::lt; break;
        case Tok::le: kind = ExprKind::le; break;
        case Tok::gt: kind = ExprKind::gt; break;
        case Tok::ge: kind = ExprKind::ge; break;
        case Tok::eq: kind = ExprKind::eq; break;
        case Tok::ne: kind = ExprKind::ne; break;
        default: return lhs;
        }
        advance();
        return binary(kind, lhs, parse_sum());
    }

    ExprPtr parse_sum()
    {
        auto lhs = parse_product();
        for (;;) {
            if (accept(Tok::plus))
                lhs = binary(ExprKind::add, lhs, parse_product());
            else if (accept(Tok::minus))
                lhs = binary(ExprKind::sub, lhs, parse_product());
            else
                return lhs;
        }
    }

    ExprPtr parse_product()
    {
        auto lhs = parse_unary();
        for (;;) {
            if (accept(Tok::star))
                lhs = binary(ExprKind::mul, lhs, parse_unary());
            else if (accept(Tok::slash))
                lhs = binary(ExprKind::div, lhs, parse_unary());
            else
                return lhs;
        }
    }

    ExprPtr parse_unary()
    {
        if (accept(Tok::minus)) {
            auto operand = parse_unary();
            require_type(*operand, ValueType::number, "negation operand");
            Expr e;
            e.kind = ExprKind::neg;
            e.type = ValueType::number;
            e.lhs = std::move(operand);
            return make(std::move(e));
        }
        return parse_primary();
    }

    ExprPtr parse_primary()
    {
        const Token& t = peek();
        Expr e;
        switch (t.kind) {
        case Tok::number:
            e.kind = ExprKind::number;
            e.type = ValueType::number;
            e.number = advance().number;
            return make(std::move(e));
        case Tok::text:
            e.kind = ExprKind::text;
            e.type = ValueType::text;
            e.text = advance().text;
            return make(std::move(e));
        case Tok::kw_true:
        case Tok::kw_false:
            e.kind = ExprKind::boolean;
            e.type = ValueType::boolean;
            e.boolean = advance().kind == Tok::kw_true;
            return make(std::move(e));
        case Tok::ident: {
            e.kind = ExprKind::parameter;
            e.type = ValueType::number;
            e.text = advance().text;
            if (std::find(symbols_.begin(), symbols_.end(), e.text) == symbols_.end())
                symbols_.push_back(e.text);
            return make(std::move(e));
        }
        case Tok::path_part: return parse_path();
        case Tok::lparen: {
            advance();
            auto inner = parse_or();
            expect(Tok::rparen, "')'");
            return inner;
        }
        default: throw SyntaxError(t.pos, "expression", describe(t));
        }
    }

    ExprPtr parse_path()
    {
        std::vector<std::string> parts;
        parts.push_back(expect(Tok::path_part, "attribute path").text);
        while (peek().kind == Tok::dot) {
            advance();
            parts.push_back(expect(Tok::path_part, "'[' after '.'").text);
        }
        Expr e;
        e.kind = ExprKind::path;
        e.path.attribute = parts.back();
        parts.pop_back();
        e.path.relations = std::move(parts);
        if (e.path.depth() > max_path_depth)
            fail(ErrorCode::PathTooDeep, to_string(e.path) + " is more than " +
                                             std::to_string(max_path_depth) + " relations deep");

        TypeId current = agent_type_;
        for (const auto& rel : e.path.relations) {
            auto def = ontology_.find_relation(current, rel);
            if (!def)
                fail(ErrorCode::UnknownRelation, "type '" + current + "' has no relation [" + rel + "]");
            current = def->target_type;
        }
        auto attr = ontology_.find_attribute(current, e.path.attribute);
        if (!attr)
            fail(ErrorCode::UnknownAttribute,
                 "type '" + current + "' has no attribute [" + e.path.attribute + "]");
        e.type = value_type_of(attr->kind);
        e.attribute = std::move(*attr);
        return make(std::move(e));
    }

    const Ontology& ontology_;
    TypeId agent_type_;
    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
    std::vector<std::string> symbols_;
};

inline void check_range(const std::string& name, double lo, double hi)
{
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
        fail(ErrorCode::InvalidParameter, "parameter '" + name + "' needs finite lo < hi");
}

} // namespace detail

inline Rule parse_rule(const Ontology& ontology, const RuleSpec& spec)
{
    const TypeId agent_type = ontology.resolve(spec.agent_type);
    detail::Parser parser(ontology, agent_type, spec.text);
    auto parsed = parser.parse_rule();

    Rule rule;
    rule.id = spec.id;
    rule.agent_type = agent_type;
    rule.condition = std::move(parsed.condition);
    rule.target = std::move(parsed.target);
    rule.target_def = std::move(parsed.target_def);
    rule.effect = std::move(parsed.effect);
    rule.probabilistic = spec.probabilistic;
    rule.source_text = spec.text;
    rule.declared_ranges = spec.parameters;

    auto find_range = [&](const std::string& name) -> const ParameterRange* {
        const ParameterRange* found = nullptr;
        for (const auto& r : spec.parameters) {
            if (r.name == name) {
                if (found)
                    fail(ErrorCode::InvalidParameter, "parameter '" + name + "' declared twice");
                found = &r;
            }
        }
        return found;
    };

    for (const auto& sym : parser.symbols()) {
        const ParameterRange* range = find_range(sym);
        if (!range)
            fail(ErrorCode::InvalidParameter, "no range declared for parameter '" + sym + "'");
        detail::check_range(sym, range->lo, range->hi);
        rule.parameters.push_back(UnknownParameter{sym, range->lo, range->hi, false});
    }

    if (spec.probabilistic) {
        const std::string name = spec.probability_param.value_or(std::string(default_probability_param));
        if (!detail::is_identifier(name))
            fail(ErrorCode::InvalidParameter, "'" + name + "' is not a valid parameter name");
        const auto& syms = parser.symbols();
        if (std::find(syms.begin(), syms.end(), name) != syms.end())
            fail(ErrorCode::InvalidParameter,
                 "probability parameter '" + name + "' also appears in the rule text");
        UnknownParameter p{name, 0.0, 1.0, true};
        if (const ParameterRange* range = find_range(name)) {
            detail::check_range(name, range->lo, range->hi);
            if (range->lo < 0.0 || range->hi > 1.0)
                fail(ErrorCode::InvalidParameter,
                     "probability parameter '" + name + "' must lie within [0, 1]");
            p.lo = range->lo;
            p.hi = range->hi;
        }
        rule.probability_param = p;
        rule.parameters.push_back(p);
    } else if (spec.probability_param) {
        fail(ErrorCode::InvalidParameter, "probability_param given for a certain rule");
    }

    for (const auto& r : spec.parameters) {
        const bool used = std::any_of(rule.parameters.begin(), rule.parameters.end(),
                                      [&](const UnknownParameter& p) { return p.name == r.name; });
        if (!used)
            fail(ErrorCode::InvalidParameter, "parameter '" + r.name + "' is declared but not used");
    }
    return rule;
}

inline Rule parse_rule(const Ontology& ontology, std::string_view text, const TypeId& agent_type,
                       std::vector<ParameterRange> ranges = {}, bool probabilistic = false)
{
    RuleSpec spec;
    spec.agent_type = agent_type;
    spec.text = std::string(text);
    spec.parameters = std::move(ranges);
    spec.probabilistic = probabilistic;
    return parse_rule(ontology, spec);
}

// Inverse of parse_rule: metadata plus the original text.
inline RuleSpec to_spec(const Rule& rule)
{
    RuleSpec spec;
    spec.id = rule.id;
    spec.agent_type = rule.agent_type;
    spec.text = rule.source_text;
    spec.probabilistic = rule.probabilistic;
    spec.parameters = rule.declared_ranges;
    if (rule.probability_param && rule.probability_param->name != default_probability_param)
        spec.probability_param = rule.probability_param->name;
    return spec;
}

// Boolean expression over the type's own attributes, without parameters.
inline ExprPtr parse_filter(const Ontology& ontology, const TypeId& agent_type, std::string_view text)
{
    detail::Parser parser(ontology, agent_type, text);
    auto e = parser.parse_condition_only();
    if (!parser.symbols().empty())
        fail(ErrorCode::InvalidParameter, "filters may not use unknown parameters");
    bool nested = false;
    for_each_node(*e, [&](const Expr& n) { nested |= n.kind == ExprKind::path && n.path.depth() > 0; });
    if (nested)
        fail(ErrorCode::PathTooDeep, "filters may only reference the agent's own attributes");
    return e;
}

inline bool evaluate_condition(const Rule& rule, const EvalContext& ctx,
                               const ParameterAssignment& params = {})
{
    return !rule.condition || eval_bool(*rule.condition, ctx, params);
}

inline void check_parameters(const Rule& rule, const ParameterAssignment& params)
{
    for (const auto& p : rule.parameters) {
        auto it = params.find(p.name);
        if (it == params.end())
            fail(ErrorCode::MissingParameter, "no value for parameter '" + p.name + "'");
        if (!(p.contains(it->second)))
            fail(ErrorCode::ParameterOutOfRange, "parameter '" + p.name + "' = " +
                                                     format_number(it->second) + " outside [" +
                                                     format_number(p.lo) + ", " + format_number(p.hi) + "]");
    }
}

// Condition and, for probabilistic rules, the execution draw. Consumes one
// rng draw only when a probabilistic rule's condition holds.
inline bool rule_fires(const Rule& rule, const EvalContext& ctx, const ParameterAssignment& params,
                       RandomStream& rng)
{
    if (!evaluate_condition(rule, ctx, params))
        return false;
    if (!rule.probabilistic)
        return true;
    const double p = params.find(rule.probability_param->name)->second;
    return rng.uniform() < p;
}

// Right-hand side, clamped to the target attribute's range.
inline Value effect_value(const Rule& rule, const EvalContext& ctx, const ParameterAssignment& params)
{
    if (rule.target_def.kind == AttributeKind::continuous) {
        const double x = eval_number(*rule.effect, ctx, params);
        if (!std::isfinite(x))
            fail(ErrorCode::NonFiniteValue, "rule '" + print(rule) + "' produced " + format_number(x));
        return clamp_to_range(x, rule.target_def);
    }
    return eval_value(*rule.effect, ctx, params);
}

struct AttributeWrite {
    std::string attribute;
    Value value;

    friend bool operator==(const AttributeWrite&, const AttributeWrite&) = default;
};

// nullopt is the no-op outcome.
inline std::optional<AttributeWrite> apply_effect(const Rule& rule, const EvalContext& ctx,
                                                  const ParameterAssignment& params, RandomStream& rng)
{
    check_parameters(rule, params);
    if (!rule_fires(rule, ctx, params, rng))
        return std::nullopt;
    return AttributeWrite{rule.target.attribute, effect_value(rule, ctx, params)};
}

} // namespace abbl
