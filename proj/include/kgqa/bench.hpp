#pragma once

#include <cstdint>
#include <map>

#include "kgqa/dataset.hpp"

namespace kgqa {

struct BenchConfig {
    std::uint64_t seed = 1;
    int n_types = 8;
    int n_entities = 120;
    int n_relations = 8;
    int max_degree = 14;                 // out-degree cap per (subject, relation)
    int min_triples_per_relation = 30;
    std::map<std::string, int> per_category;  // defaults filled when empty
    double train_ratio = 0.7;
    double dev_ratio = 0.1;
    double test_ratio = 0.2;
    int around_tolerance = 5;
    std::string template_version = "v1";

    void validate() const;
    static BenchConfig from_json_file(const std::string& path);
};

KnowledgeGraph generate_kg(const BenchConfig& cfg);

struct GenResult {
    std::vector<QuestionRecord> records;
    int skipped = 0;  // templates unsatisfiable on this graph
};

GenResult generate_questions(const KnowledgeGraph& kg, const BenchConfig& cfg);

/// Deterministic surface realization of an action sequence or prefix from the
/// template inventory; the generator and the back-translator share it.
struct RealizedQuestion {
    std::string text;        // space-joined tokens
    ArgumentSet artifacts;   // first-appearance order, character spans into text
};

RealizedQuestion realize_question(const KnowledgeGraph& kg, const ActionSequence& seq);

}  // namespace kgqa
