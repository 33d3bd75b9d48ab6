#include "kgqa/dataset.hpp"

#include <fstream>

#include <json.hpp>

namespace kgqa {

using json = nlohmann::json;

namespace {

json answer_json(const Answer& a) {
    switch (a.tag) {
        case Answer::Tag::Entities:
            return json{{"kind", "entities"}, {"values", a.entities}};
        case Answer::Tag::Number:
            return json{{"kind", "number"}, {"value", a.number}};
        case Answer::Tag::Booleans: {
            std::vector<bool> b(a.booleans.begin(), a.booleans.end());
            return json{{"kind", "booleans"}, {"values", b}};
        }
    }
    return {};
}

Answer answer_from(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "entities")
        return Answer::of_entities(j.at("values").get<std::set<std::string>>());
    if (kind == "number") return Answer::of_number(j.at("value").get<long long>());
    if (kind == "booleans")
        return Answer::of_booleans(j.at("values").get<std::vector<bool>>());
    throw Error("unknown answer kind: " + kind);
}

ArtifactKind kind_from_string(const std::string& s) {
    if (s == "entity") return ArtifactKind::Entity;
    if (s == "type") return ArtifactKind::Type;
    if (s == "relation") return ArtifactKind::Relation;
    if (s == "constant") return ArtifactKind::Constant;
    throw Error("unknown artifact kind: " + s);
}

}  // namespace

std::string answer_to_json(const Answer& a) { return answer_json(a).dump(); }

Answer answer_from_json(const std::string& text) { return answer_from(json::parse(text)); }

void save_dataset(const std::string& path, const std::vector<QuestionRecord>& records) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open for writing: " + path);
    for (const auto& q : records) {
        json arts = json::array();
        for (const auto& a : q.artifacts.items) {
            arts.push_back(json{{"kind", kind_name(a.kind)},
                                {"id", a.id},
                                {"start", a.start},
                                {"end", a.end}});
        }
        json j{{"id", q.id},
               {"text", q.text},
               {"category", q.category},
               {"artifacts", arts},
               {"gold_answer", answer_json(q.gold_answer)},
               {"split", q.split}};
        if (q.gold_sequence) j["gold_sequence"] = serialize_sequence(*q.gold_sequence);
        out << j.dump() << "\n";
    }
}

std::vector<QuestionRecord> load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open: " + path);
    std::vector<QuestionRecord> out;
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
        QuestionRecord q;
        q.id = j.at("id").get<std::string>();
        q.text = j.at("text").get<std::string>();
        q.category = j.at("category").get<std::string>();
        for (const auto& a : j.at("artifacts")) {
            Artifact g;
            g.kind = kind_from_string(a.at("kind").get<std::string>());
            g.id = a.at("id").get<std::string>();
            g.start = a.at("start").get<int>();
            g.end = a.at("end").get<int>();
            q.artifacts.items.push_back(g);
        }
        q.gold_answer = answer_from(j.at("gold_answer"));
        if (j.contains("gold_sequence"))
            q.gold_sequence = parse_sequence(j.at("gold_sequence").get<std::string>(), q.artifacts);
        q.split = j.at("split").get<std::string>();
        out.push_back(std::move(q));
    }
    return out;
}

}  // namespace kgqa
