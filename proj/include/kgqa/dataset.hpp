#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kgqa/actions.hpp"

namespace kgqa {

/// One benchmark question: surface text (space-joined tokens), annotated
/// artifacts with character spans, category, gold answer, and (for generated
/// data) the gold action sequence.
struct QuestionRecord {
    std::string id;
    std::string text;
    std::string category;  // simple | logical | verification | quantitative |
                           // comparative | quantitative_count | comparative_count
    ArgumentSet artifacts;
    Answer gold_answer;
    std::optional<ActionSequence> gold_sequence;
    std::string split;  // train | dev | test

    std::vector<std::string> tokens() const { return tokenize(text); }
};

inline const std::vector<std::string>& question_categories() {
    static const std::vector<std::string> cats = {
        "simple",      "logical",     "verification",       "quantitative",
        "comparative", "quantitative_count", "comparative_count",
    };
    return cats;
}

std::string answer_to_json(const Answer& a);
Answer answer_from_json(const std::string& text);

void save_dataset(const std::string& path, const std::vector<QuestionRecord>& records);
std::vector<QuestionRecord> load_dataset(const std::string& path);

}  // namespace kgqa
