#include "kgqa/kg.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

namespace kgqa {

using json = nlohmann::json;

const KnowledgeGraph::IdSet& KnowledgeGraph::type_of(const std::string& entity) const {
    auto it = type_of_.find(entity);
    if (it == type_of_.end()) throw Error("undeclared entity: " + entity);
    return it->second;
}

const std::string& KnowledgeGraph::label(const std::string& id) const {
    auto it = labels_.find(id);
    return it != labels_.end() ? it->second : id;
}

KnowledgeGraph::IdSet KnowledgeGraph::neighbors(const std::string& e, const std::string& r,
                                                const std::string& t) const {
    if (!has_entity(e)) throw Error("undeclared entity: " + e);
    if (!has_relation(r)) throw Error("undeclared relation: " + r);
    if (!has_type(t)) throw Error("undeclared type: " + t);
    IdSet out;
    auto it = forward_.find({e, r});
    if (it == forward_.end()) return out;
    for (const auto& o : it->second) {
        if (type_of_.at(o).count(t)) out.insert(o);
    }
    return out;
}

const KnowledgeGraph::IdSet& KnowledgeGraph::entities_of_type(const std::string& t) const {
    auto it = by_type_.find(t);
    if (it == by_type_.end()) throw Error("undeclared type: " + t);
    return it->second;
}

bool KnowledgeGraph::operator==(const KnowledgeGraph& other) const {
    return entities_ == other.entities_ && relations_ == other.relations_ &&
           types_ == other.types_ && type_of_ == other.type_of_ && labels_ == other.labels_ &&
           triples_ == other.triples_;
}

void KnowledgeGraph::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot open for writing: " + path);
    auto emit = [&](json j) { out << j.dump() << "\n"; };
    for (const auto& t : types_) {
        json j{{"kind", "type"}, {"id", t}};
        if (labels_.count(t)) j["label"] = labels_.at(t);
        emit(j);
    }
    for (const auto& e : entities_) {
        json j{{"kind", "entity"}, {"id", e}, {"types", type_of_.at(e)}};
        if (labels_.count(e)) j["label"] = labels_.at(e);
        emit(j);
    }
    for (const auto& r : relations_) {
        json j{{"kind", "relation"}, {"id", r}};
        if (labels_.count(r)) j["label"] = labels_.at(r);
        emit(j);
    }
    for (const auto& t : triples_) {
        emit(json{{"kind", "triple"}, {"s", t.subject}, {"r", t.relation}, {"o", t.object}});
    }
}

KnowledgeGraph KnowledgeGraph::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open: " + path);
    KgBuilder b;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw Error(path + ":" + std::to_string(line_no) + ": malformed line: " + e.what());
        }
        try {
            const std::string kind = j.at("kind").get<std::string>();
            const std::string label = j.value("label", std::string());
            if (kind == "type") {
                b.add_type(j.at("id").get<std::string>(), label);
            } else if (kind == "entity") {
                b.add_entity(j.at("id").get<std::string>(),
                             j.at("types").get<std::vector<std::string>>(), label);
            } else if (kind == "relation") {
                b.add_relation(j.at("id").get<std::string>(), label);
            } else if (kind == "triple") {
                b.add_triple(j.at("s").get<std::string>(), j.at("r").get<std::string>(),
                             j.at("o").get<std::string>());
            } else {
                throw Error("unknown record kind: " + kind);
            }
        } catch (const json::exception& e) {
            throw Error(path + ":" + std::to_string(line_no) + ": malformed record: " + e.what());
        } catch (const Error& e) {
            throw Error(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return b.build();
}

namespace {
void check_id(const std::string& id, const char* what) {
    if (!valid_identifier(id)) throw Error(std::string("invalid ") + what + " identifier: '" + id + "'");
}
}  // namespace

KgBuilder& KgBuilder::add_type(const std::string& id, const std::string& label) {
    check_id(id, "type");
    if (!g_.types_.insert(id).second) throw Error("duplicate type declaration: " + id);
    g_.by_type_[id];
    if (!label.empty()) g_.labels_[id] = label;
    return *this;
}

KgBuilder& KgBuilder::add_relation(const std::string& id, const std::string& label) {
    check_id(id, "relation");
    if (!g_.relations_.insert(id).second) throw Error("duplicate relation declaration: " + id);
    if (!label.empty()) g_.labels_[id] = label;
    return *this;
}

KgBuilder& KgBuilder::add_entity(const std::string& id, const std::vector<std::string>& types,
                                 const std::string& label) {
    check_id(id, "entity");
    if (types.empty()) throw Error("entity without type: " + id);
    if (!g_.entities_.insert(id).second) throw Error("duplicate entity declaration: " + id);
    for (const auto& t : types) {
        if (!g_.types_.count(t)) throw Error("undeclared type: " + t);
        g_.type_of_[id].insert(t);
        g_.by_type_[t].insert(id);
    }
    if (!label.empty()) g_.labels_[id] = label;
    return *this;
}

KgBuilder& KgBuilder::add_triple(const std::string& s, const std::string& r, const std::string& o) {
    if (!g_.entities_.count(s)) throw Error("undeclared entity: " + s);
    if (!g_.relations_.count(r)) throw Error("undeclared relation: " + r);
    if (!g_.entities_.count(o)) throw Error("undeclared entity: " + o);
    Triple t{s, r, o};
    if (!seen_triples_.insert(t).second) throw Error("duplicate triple: (" + s + "," + r + "," + o + ")");
    g_.forward_[{s, r}].insert(o);
    g_.inverse_[{o, r}].insert(s);
    return *this;
}

KnowledgeGraph KgBuilder::build() {
    g_.triples_.assign(seen_triples_.begin(), seen_triples_.end());
    return std::move(g_);
}

}  // namespace kgqa
