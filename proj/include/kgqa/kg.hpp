#pragma once

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "kgqa/util.hpp"

namespace kgqa {

struct Triple {
    std::string subject;
    std::string relation;
    std::string object;

    auto operator<=>(const Triple&) const = default;
};

/// In-memory knowledge graph with typed entities and indexed triple lookup.
/// Immutable after construction; safe for shared read access across threads.
class KnowledgeGraph {
public:
    using IdSet = std::set<std::string>;
    using PairIndex = std::map<std::pair<std::string, std::string>, IdSet>;

    const IdSet& entities() const { return entities_; }
    const IdSet& relations() const { return relations_; }
    const IdSet& types() const { return types_; }
    const std::vector<Triple>& triples() const { return triples_; }

    bool has_entity(const std::string& id) const { return entities_.count(id) > 0; }
    bool has_relation(const std::string& id) const { return relations_.count(id) > 0; }
    bool has_type(const std::string& id) const { return types_.count(id) > 0; }

    const IdSet& type_of(const std::string& entity) const;

    // Surface label; falls back to the identifier when none was declared.
    const std::string& label(const std::string& id) const;

    // { o | (e, r, o) in triples and t in type_of(o) }
    IdSet neighbors(const std::string& e, const std::string& r, const std::string& t) const;

    const IdSet& entities_of_type(const std::string& t) const;

    // Raw indices, exposed so tests can verify them against a rebuild.
    const PairIndex& forward_index() const { return forward_; }
    const PairIndex& inverse_index() const { return inverse_; }

    void save(const std::string& path) const;
    static KnowledgeGraph load(const std::string& path);

    bool operator==(const KnowledgeGraph& other) const;

private:
    friend class KgBuilder;

    IdSet entities_;
    IdSet relations_;
    IdSet types_;
    std::map<std::string, IdSet> type_of_;
    std::map<std::string, std::string> labels_;
    std::vector<Triple> triples_;  // sorted, unique
    PairIndex forward_;            // (subject, relation) -> objects
    PairIndex inverse_;            // (object, relation) -> subjects
    std::map<std::string, IdSet> by_type_;
};

/// Accumulates declarations, validates referential integrity, then freezes
/// into a KnowledgeGraph.
class KgBuilder {
public:
    KgBuilder& add_type(const std::string& id, const std::string& label = "");
    KgBuilder& add_relation(const std::string& id, const std::string& label = "");
    KgBuilder& add_entity(const std::string& id, const std::vector<std::string>& types,
                          const std::string& label = "");
    KgBuilder& add_triple(const std::string& s, const std::string& r, const std::string& o);

    KnowledgeGraph build();

private:
    KnowledgeGraph g_;
    std::set<Triple> seen_triples_;
};

}  // namespace kgqa
