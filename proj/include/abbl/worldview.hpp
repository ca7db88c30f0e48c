#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "abbl/ontology.hpp"
#include "abbl/posterior.hpp"
#include "abbl/rules.hpp"

namespace abbl {

struct StoredScore {
    double value = 0.0;
    std::vector<std::string> scenarios;
    std::uint64_t rules_hash = 0;
};

/*!
 * A complete set of behaviour rules per agent type, the posteriors learned
 * for their parameters and, once scored, how well the set matches the data.
 *
 * Any rule mutation clears the score and the posteriors of the parameters the
 * mutated rule touches.
 */
struct WorldView {
    std::string id;
    std::optional<std::string> parent;
    std::map<TypeId, std::vector<Rule>> rules;
    std::map<std::string, Posterior> posteriors;
    std::optional<StoredScore> score;
    std::size_t next_rule_number = 1;
};

namespace detail {

inline void hash_bytes(std::uint64_t& h, std::string_view s) noexcept
{
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    h ^= 0xff; // field separator
    h *= 0x100000001b3ull;
}

} // namespace detail

// FNV-1a over rule texts and metadata in attachment order. Rule ids and
// posteriors do not contribute.
inline std::uint64_t content_hash(const WorldView& w)
{
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& [type, list] : w.rules) {
        detail::hash_bytes(h, type);
        for (const auto& r : list) {
            detail::hash_bytes(h, r.source_text);
            detail::hash_bytes(h, r.probabilistic ? "p" : "c");
            for (const auto& p : r.parameters) {
                detail::hash_bytes(h, p.name);
                detail::hash_bytes(h, format_number(p.lo));
                detail::hash_bytes(h, format_number(p.hi));
            }
        }
    }
    return h;
}

inline bool score_is_current(const WorldView& w)
{
    return w.score && w.score->rules_hash == content_hash(w);
}

// All rules attached to the ancestors of t, root first, then t's own, each
// in attachment order.
inline std::vector<Rule> effective_rules(const Ontology& ontology, const WorldView& w, std::string_view t)
{
    std::vector<Rule> out;
    for (const auto& id : ontology.ancestry(t)) {
        auto it = w.rules.find(id);
        if (it != w.rules.end())
            out.insert(out.end(), it->second.begin(), it->second.end());
    }
    return out;
}

// Parameters of every rule, first declaration wins, in rule order.
inline std::vector<UnknownParameter> all_parameters(const WorldView& w)
{
    std::vector<UnknownParameter> out;
    for (const auto& [type, list] : w.rules)
        for (const auto& r : list)
            for (const auto& p : r.parameters)
                if (std::none_of(out.begin(), out.end(), [&](const UnknownParameter& q) { return q.name == p.name; }))
                    out.push_back(p);
    return out;
}

// Posterior modes for the given parameters; UnfittedParameters lists the
// ones without a posterior.
inline ParameterAssignment posterior_modes(const WorldView& w, const std::vector<UnknownParameter>& params)
{
    ParameterAssignment out;
    std::string missing;
    for (const auto& p : params) {
        auto it = w.posteriors.find(p.name);
        if (it == w.posteriors.end()) {
            missing += (missing.empty() ? "" : ", ") + p.name;
            continue;
        }
        out[p.name] = it->second.mode();
    }
    if (!missing.empty())
        fail(ErrorCode::UnfittedParameters, "worldview '" + w.id + "' has no posterior for " + missing);
    return out;
}

namespace detail {

inline void invalidate(WorldView& w, const Rule& rule)
{
    w.score.reset();
    for (const auto& p : rule.parameters)
        w.posteriors.erase(p.name);
}

inline void drop_orphan_posteriors(WorldView& w)
{
    std::set<std::string> used;
    for (const auto& p : all_parameters(w))
        used.insert(p.name);
    for (auto it = w.posteriors.begin(); it != w.posteriors.end();)
        it = used.count(it->first) ? std::next(it) : w.posteriors.erase(it);
}

inline void check_parameter_ranges(const WorldView& w, const Rule& rule, std::string_view ignore_id)
{
    for (const auto& [type, list] : w.rules)
        for (const auto& other : list) {
            if (other.id == ignore_id)
                continue;
            for (const auto& p : rule.parameters)
                for (const auto& q : other.parameters)
                    if (p.name == q.name && !(p == q))
                        fail(ErrorCode::ParameterRangeConflict,
                             "parameter '" + p.name + "' already declared by rule '" + other.id +
                                 "' with a different range or role");
        }
}

inline std::pair<std::vector<Rule>*, std::size_t> locate(WorldView& w, std::string_view rule_id)
{
    for (auto& [type, list] : w.rules)
        for (std::size_t i = 0; i < list.size(); ++i)
            if (list[i].id == rule_id)
                return {&list, i};
    fail(ErrorCode::UnknownRule, "worldview '" + w.id + "' has no rule '" + std::string(rule_id) + "'");
}

} // namespace detail

// Appends the rule to its agent type's list; assigns an id if it has none.
inline std::string add_rule(WorldView& w, Rule rule)
{
    auto taken = [&](const std::string& id) {
        return std::any_of(w.rules.begin(), w.rules.end(), [&](const auto& kv) {
            return std::any_of(kv.second.begin(), kv.second.end(), [&](const Rule& r) { return r.id == id; });
        });
    };
    std::size_t next = w.next_rule_number;
    if (rule.id.empty()) {
        do {
            rule.id = "r" + std::to_string(next++);
        } while (taken(rule.id));
    } else if (taken(rule.id)) {
        fail(ErrorCode::UnknownRule, "rule id '" + rule.id + "' already used");
    }
    detail::check_parameter_ranges(w, rule, "");
    w.next_rule_number = next;
    detail::invalidate(w, rule);
    const std::string id = rule.id;
    w.rules[rule.agent_type].push_back(std::move(rule));
    return id;
}

// Swaps the rule in place; the replacement keeps the old id. If the agent
// type changes the rule moves to the end of the new type's list.
inline void replace_rule(WorldView& w, std::string_view rule_id, Rule rule)
{
    auto [list, index] = detail::locate(w, rule_id);
    detail::check_parameter_ranges(w, rule, rule_id);
    detail::invalidate(w, (*list)[index]);
    detail::invalidate(w, rule);
    rule.id = std::string(rule_id);
    if ((*list)[index].agent_type == rule.agent_type) {
        (*list)[index] = std::move(rule);
    } else {
        list->erase(list->begin() + static_cast<long>(index));
        w.rules[rule.agent_type].push_back(std::move(rule));
    }
    for (auto it = w.rules.begin(); it != w.rules.end();)
        it = it->second.empty() ? w.rules.erase(it) : std::next(it);
    detail::drop_orphan_posteriors(w);
}

inline void remove_rule(WorldView& w, std::string_view rule_id)
{
    auto [list, index] = detail::locate(w, rule_id);
    detail::invalidate(w, (*list)[index]);
    list->erase(list->begin() + static_cast<long>(index));
    for (auto it = w.rules.begin(); it != w.rules.end();)
        it = it->second.empty() ? w.rules.erase(it) : std::next(it);
    detail::drop_orphan_posteriors(w);
}

inline void set_posterior(WorldView& w, Posterior posterior)
{
    const auto params = all_parameters(w);
    const bool known = std::any_of(params.begin(), params.end(), [&](const UnknownParameter& p) {
        return p.name == posterior.parameter.name;
    });
    if (!known)
        fail(ErrorCode::UnknownParameterInGroup,
             "no rule in worldview '" + w.id + "' uses parameter '" + posterior.parameter.name + "'");
    w.score.reset();
    w.posteriors[posterior.parameter.name] = std::move(posterior);
}

/*!
 * Collection of worldviews addressed by id.
 */
class WorldViewRegistry {
  public:
    WorldView& create(std::string id)
    {
        if (id.empty() || views_.count(id))
            fail(ErrorCode::UnknownWorldView, "worldview id '" + id + "' is empty or taken");
        WorldView w;
        w.id = id;
        return views_.emplace(id, std::move(w)).first->second;
    }

    void insert(WorldView w)
    {
        const std::string id = w.id;
        views_.insert_or_assign(id, std::move(w));
    }

    bool contains(std::string_view id) const { return views_.find(id) != views_.end(); }

    const WorldView& get(std::string_view id) const
    {
        auto it = views_.find(id);
        if (it == views_.end())
            fail(ErrorCode::UnknownWorldView, "no worldview '" + std::string(id) + "'");
        return it->second;
    }

    WorldView& get(std::string_view id)
    {
        return const_cast<WorldView&>(std::as_const(*this).get(id));
    }

    // Deep copy of `base` with parent = base and no score. An empty new_id
    // derives one from the base id.
    std::string fork(std::string_view base, std::string new_id = {})
    {
        WorldView copy = get(base);
        if (new_id.empty()) {
            for (int n = 1;; ++n) {
                new_id = std::string(base) + "." + std::to_string(n);
                if (!contains(new_id))
                    break;
            }
        }
        if (contains(new_id))
            fail(ErrorCode::UnknownWorldView, "worldview id '" + new_id + "' is taken");
        copy.id = new_id;
        copy.parent = std::string(base);
        copy.score.reset();
        views_.emplace(new_id, std::move(copy));
        return new_id;
    }

    // Fork ancestry from w back to its original root.
    std::vector<std::string> lineage(std::string_view id) const
    {
        std::vector<std::string> out;
        const WorldView* cur = &get(id);
        for (;;) {
            out.push_back(cur->id);
            if (!cur->parent || !contains(*cur->parent))
                return out;
            cur = &get(*cur->parent);
        }
    }

    std::vector<std::string> ids() const
    {
        std::vector<std::string> out;
        for (const auto& [id, w] : views_)
            out.push_back(id);
        return out;
    }

  private:
    std::map<std::string, WorldView, std::less<>> views_;
};

} // namespace abbl
