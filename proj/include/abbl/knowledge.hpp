#pragma once

#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "abbl/csv.hpp"
#include "abbl/ontology.hpp"

namespace abbl {

enum class MergePolicy { error, mean };

inline MergePolicy parse_merge_policy(std::string_view s)
{
    if (s == "error")
        return MergePolicy::error;
    if (s == "mean")
        return MergePolicy::mean;
    fail(ErrorCode::SchemaError, "unknown merge policy '" + std::string(s) + "'");
}

struct Observation {
    std::string entity_id;
    TypeId agent_type;
    std::string attribute;
    double time = 0.0;
    Value value;
};

struct TimedValue {
    double time = 0.0;
    Value value;

    friend bool operator==(const TimedValue&, const TimedValue&) = default;
};

struct Timeline {
    std::string entity_id;
    TypeId agent_type;
    // Per attribute, strictly increasing in time.
    std::map<std::string, std::vector<TimedValue>, std::less<>> series;

    const std::vector<TimedValue>* find(std::string_view attribute) const
    {
        auto it = series.find(attribute);
        return it == series.end() ? nullptr : &it->second;
    }
};

inline constexpr std::string_view kb_csv_header = "entity_id,agent_type,attribute,time,value";

/*!
 * In-memory observation store.
 *
 * Each (entity, attribute, time) point keeps the running sum and count of the
 * raw observations merged into it, so re-ingesting a file under the mean
 * policy leaves every value unchanged.
 */
class KnowledgeBase {
  public:
    struct Point {
        Value value;
        double sum = 0.0; // continuous only
        std::size_t count = 0;
    };
    using Series = std::map<double, Point>;
    struct Entity {
        TypeId agent_type;
        std::map<std::string, Series, std::less<>> attributes;
    };

    // Validates and merges a CSV stream. All-or-nothing: on error the store
    // is unchanged. Returns the number of observation rows read.
    std::size_t ingest(std::istream& in, const Ontology& ontology, MergePolicy policy)
    {
        std::size_t line = 0;
        auto header = csv::read_record(in, line);
        if (!header)
            fail(ErrorCode::SchemaError, "missing header, expected '" + std::string(kb_csv_header) + "'");
        if (csv::join(*header) != kb_csv_header)
            fail(ErrorCode::SchemaError, "header must be '" + std::string(kb_csv_header) + "', got '" +
                                             csv::join(*header) + "'");

        auto staged = entities_;
        std::size_t count = 0;
        while (auto row = csv::read_record(in, line)) {
            if (row->size() == 1 && (*row)[0].empty())
                continue;
            const std::string where = "line " + std::to_string(line);
            if (row->size() != 5)
                fail(ErrorCode::SchemaError, where + ": expected 5 fields, got " + std::to_string(row->size()));
            Observation obs;
            obs.entity_id = (*row)[0];
            if (obs.entity_id.empty())
                fail(ErrorCode::SchemaError, where + ": empty entity_id");
            try {
                obs.agent_type = ontology.resolve((*row)[1]);
            } catch (const Error& e) {
                fail(ErrorCode::SchemaError, where + ": " + e.detail());
            }
            obs.attribute = (*row)[2];
            const auto def = ontology.find_attribute(obs.agent_type, obs.attribute);
            if (!def)
                fail(ErrorCode::SchemaError,
                     where + ": type '" + obs.agent_type + "' has no attribute '" + obs.attribute + "'");
            const auto time = parse_number((*row)[3]);
            if (!time || !std::isfinite(*time))
                fail(ErrorCode::SchemaError, where + ": bad time '" + (*row)[3] + "'");
            obs.time = *time;
            auto value = parse_value((*row)[4], *def);
            if (!value)
                fail(ErrorCode::SchemaError, where + ": bad " + std::string(to_string(def->kind)) +
                                                 " value '" + (*row)[4] + "'");
            if (!conforms(*value, *def))
                fail(ErrorCode::ValueOutOfRange,
                     where + ": value '" + (*row)[4] + "' outside the declared range of '" + obs.attribute + "'");
            obs.value = std::move(*value);
            merge(staged, obs, *def, policy, where);
            ++count;
        }
        entities_ = std::move(staged);
        return count;
    }

    std::size_t ingest_file(const std::string& path, const Ontology& ontology, MergePolicy policy)
    {
        std::ifstream in(path, std::ios::binary);
        if (!in)
            fail(ErrorCode::IoError, "cannot open '" + path + "'");
        return ingest(in, ontology, policy);
    }

    bool contains(std::string_view entity) const { return entities_.find(entity) != entities_.end(); }

    Timeline timeline(std::string_view entity) const
    {
        auto it = entities_.find(entity);
        if (it == entities_.end())
            fail(ErrorCode::UnknownEntity, "no entity '" + std::string(entity) + "'");
        Timeline t;
        t.entity_id = it->first;
        t.agent_type = it->second.agent_type;
        for (const auto& [attr, series] : it->second.attributes) {
            auto& out = t.series[attr];
            out.reserve(series.size());
            for (const auto& [time, point] : series)
                out.push_back(TimedValue{time, point.value});
        }
        return t;
    }

    // Entities whose type is t or a subtype of t, in id order.
    std::vector<std::string> entities_of_type(const Ontology& ontology, std::string_view t) const
    {
        ontology.type(t);
        std::vector<std::string> out;
        for (const auto& [id, entity] : entities_)
            if (ontology.contains(entity.agent_type) && ontology.subtype_of(entity.agent_type, t))
                out.push_back(id);
        return out;
    }

    const std::map<std::string, Entity, std::less<>>& entities() const noexcept { return entities_; }

    // Used when loading a persisted store; bypasses merge rules.
    void restore(const std::string& entity, const TypeId& type, const std::string& attribute,
                 double time, Point point)
    {
        auto& e = entities_[entity];
        e.agent_type = type;
        e.attributes[attribute][time] = std::move(point);
    }

    std::size_t size() const noexcept
    {
        std::size_t n = 0;
        for (const auto& [id, e] : entities_)
            for (const auto& [a, s] : e.attributes)
                n += s.size();
        return n;
    }

  private:
    static void merge(std::map<std::string, Entity, std::less<>>& store, const Observation& obs,
                      const AttributeDef& def, MergePolicy policy, const std::string& where)
    {
        auto [it, inserted] = store.try_emplace(obs.entity_id);
        Entity& entity = it->second;
        if (inserted)
            entity.agent_type = obs.agent_type;
        else if (entity.agent_type != obs.agent_type)
            fail(ErrorCode::SchemaError, where + ": entity '" + obs.entity_id + "' already has type '" +
                                             entity.agent_type + "', not '" + obs.agent_type + "'");

        auto& series = entity.attributes[obs.attribute];
        auto [pit, fresh] = series.try_emplace(obs.time);
        Point& point = pit->second;
        if (fresh) {
            point.value = obs.value;
            point.sum = def.kind == AttributeKind::continuous ? std::get<double>(obs.value) : 0.0;
            point.count = 1;
            return;
        }
        const std::string key = "(" + obs.entity_id + ", " + obs.attribute + ", t=" + format_number(obs.time) + ")";
        if (policy == MergePolicy::error)
            fail(ErrorCode::DuplicateObservation, where + ": duplicate observation " + key);
        if (def.kind == AttributeKind::continuous) {
            point.sum += std::get<double>(obs.value);
            point.count += 1;
            point.value = clamp_to_range(point.sum / static_cast<double>(point.count), def);
        } else if (point.value == obs.value) {
            point.count += 1;
        } else {
            fail(ErrorCode::DuplicateObservation,
                 where + ": conflicting " + std::string(to_string(def.kind)) + " values for " + key);
        }
    }

    std::map<std::string, Entity, std::less<>> entities_;
};

} // namespace abbl
