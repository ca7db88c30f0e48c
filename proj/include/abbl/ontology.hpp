#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "abbl/attribute.hpp"
#include "abbl/error.hpp"

namespace abbl {

using TypeId = std::string;

struct RelationDef {
    std::string name;
    TypeId target_type;

    friend bool operator==(const RelationDef&, const RelationDef&) = default;
};

struct AgentType {
    TypeId id;
    std::string name;
    std::optional<TypeId> parent; // absent only for the root
    std::vector<AttributeDef> own_attributes;
    std::vector<RelationDef> own_relations;
};

/*!
 * Taxonomic tree of agent types.
 *
 * Attributes and relations are inherited root-first along the parent chain.
 * Names may not be shadowed: a type's own attribute may not reuse a name that
 * any ancestor already defines. New types are always leaves, so adding a type
 * never changes the effective sets of existing ones.
 *
 * Reads are safe from multiple threads; mutation is single-writer.
 */
class Ontology {
  public:
    static constexpr std::string_view root_id = "thing";

    Ontology()
    {
        types_.push_back(AgentType{TypeId(root_id), "Thing", std::nullopt, {}, {}});
        index_.emplace(TypeId(root_id), 0);
    }

    // Adds a leaf type below `parent`. If `id` is empty one is derived from
    // the name. Returns the new id.
    TypeId add_agent_type(std::string name, const TypeId& parent, std::vector<AttributeDef> attrs,
                          std::vector<RelationDef> rels, std::optional<TypeId> id = std::nullopt)
    {
        if (!contains(parent))
            fail(ErrorCode::UnknownParent, "no agent type '" + parent + "'");
        if (name.empty())
            fail(ErrorCode::InvalidAttribute, "agent type name must not be empty");

        const auto inherited_attrs = effective_attributes(parent);
        for (std::size_t i = 0; i < attrs.size(); ++i) {
            validate(attrs[i]);
            const auto& n = attrs[i].name;
            const bool inherited = std::any_of(inherited_attrs.begin(), inherited_attrs.end(),
                                               [&](const AttributeDef& a) { return a.name == n; });
            const bool sibling = std::any_of(attrs.begin(), attrs.begin() + static_cast<long>(i),
                                             [&](const AttributeDef& a) { return a.name == n; });
            if (inherited || sibling)
                fail(ErrorCode::DuplicateAttributeName,
                     "attribute '" + n + "' already defined for '" + name + "'");
        }

        const TypeId new_id = id ? *id : unique_id(name);
        if (new_id.empty() || contains(new_id))
            fail(ErrorCode::InvalidAttribute, "agent type id '" + new_id + "' is taken");

        const auto inherited_rels = effective_relations(parent);
        for (std::size_t i = 0; i < rels.size(); ++i) {
            const auto& r = rels[i];
            if (r.name.empty() || r.name.find_first_of("[]") != std::string::npos)
                fail(ErrorCode::InvalidAttribute, "invalid relation name '" + r.name + "'");
            if (!contains(r.target_type) && r.target_type != new_id)
                fail(ErrorCode::UnknownType,
                     "relation '" + r.name + "' targets unknown type '" + r.target_type + "'");
            const bool dup =
                std::any_of(inherited_rels.begin(), inherited_rels.end(),
                            [&](const RelationDef& o) { return o.name == r.name; }) ||
                std::any_of(rels.begin(), rels.begin() + static_cast<long>(i),
                            [&](const RelationDef& o) { return o.name == r.name; });
            if (dup)
                fail(ErrorCode::DuplicateRelationName,
                     "relation '" + r.name + "' already defined for '" + name + "'");
        }

        index_.emplace(new_id, types_.size());
        types_.push_back(AgentType{new_id, std::move(name), parent, std::move(attrs), std::move(rels)});
        return new_id;
    }

    bool contains(std::string_view id) const { return index_.find(id) != index_.end(); }

    const AgentType& type(std::string_view id) const
    {
        auto it = index_.find(id);
        if (it == index_.end())
            fail(ErrorCode::UnknownType, "no agent type '" + std::string(id) + "'");
        return types_[it->second];
    }

    // Accepts an id or, failing that, a type name that is unique.
    TypeId resolve(std::string_view ref) const
    {
        if (contains(ref))
            return TypeId(ref);
        const AgentType* found = nullptr;
        for (const auto& t : types_) {
            if (t.name == ref) {
                if (found)
                    fail(ErrorCode::UnknownType, "type name '" + std::string(ref) + "' is ambiguous");
                found = &t;
            }
        }
        if (!found)
            fail(ErrorCode::UnknownType, "no agent type '" + std::string(ref) + "'");
        return found->id;
    }

    // Types from the root down to `t` inclusive.
    std::vector<TypeId> ancestry(std::string_view t) const
    {
        std::vector<TypeId> chain;
        const AgentType* cur = &type(t);
        for (;;) {
            chain.push_back(cur->id);
            if (!cur->parent)
                break;
            cur = &type(*cur->parent);
        }
        std::reverse(chain.begin(), chain.end());
        return chain;
    }

    std::vector<AttributeDef> effective_attributes(std::string_view t) const
    {
        std::vector<AttributeDef> out;
        for (const auto& id : ancestry(t)) {
            const auto& own = type(id).own_attributes;
            out.insert(out.end(), own.begin(), own.end());
        }
        return out;
    }

    std::vector<RelationDef> effective_relations(std::string_view t) const
    {
        std::vector<RelationDef> out;
        for (const auto& id : ancestry(t)) {
            const auto& own = type(id).own_relations;
            out.insert(out.end(), own.begin(), own.end());
        }
        return out;
    }

    std::optional<AttributeDef> find_attribute(std::string_view t, std::string_view name) const
    {
        for (const AgentType* cur = &type(t);; cur = &type(*cur->parent)) {
            for (const auto& a : cur->own_attributes)
                if (a.name == name)
                    return a;
            if (!cur->parent)
                return std::nullopt;
        }
    }

    std::optional<RelationDef> find_relation(std::string_view t, std::string_view name) const
    {
        for (const AgentType* cur = &type(t);; cur = &type(*cur->parent)) {
            for (const auto& r : cur->own_relations)
                if (r.name == name)
                    return r;
            if (!cur->parent)
                return std::nullopt;
        }
    }

    // True iff b lies on the root path of a (reflexive).
    bool subtype_of(std::string_view a, std::string_view b) const
    {
        type(b);
        for (const AgentType* cur = &type(a);; cur = &type(*cur->parent)) {
            if (cur->id == b)
                return true;
            if (!cur->parent)
                return false;
        }
    }

    std::vector<TypeId> children(std::string_view t) const
    {
        type(t);
        std::vector<TypeId> out;
        for (const auto& x : types_)
            if (x.parent && *x.parent == t)
                out.push_back(x.id);
        return out;
    }

    // Insertion order; the root comes first.
    const std::vector<AgentType>& types() const noexcept { return types_; }

  private:
    TypeId unique_id(std::string_view name) const
    {
        std::string slug;
        for (char c : name) {
            const auto u = static_cast<unsigned char>(c);
            if (std::isalnum(u))
                slug.push_back(static_cast<char>(std::tolower(u)));
            else if (!slug.empty() && slug.back() != '-')
                slug.push_back('-');
        }
        while (!slug.empty() && slug.back() == '-')
            slug.pop_back();
        if (slug.empty())
            slug = "type";
        if (!contains(slug))
            return slug;
        for (int n = 2;; ++n) {
            auto candidate = slug + "-" + std::to_string(n);
            if (!contains(candidate))
                return candidate;
        }
    }

    std::vector<AgentType> types_;
    std::map<TypeId, std::size_t, std::less<>> index_;
};

} // namespace abbl
