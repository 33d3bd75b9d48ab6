#pragma once

#include "kgqa/dataset.hpp"

namespace kgqa {

struct SearchConfig {
    int max_len = 4;
    int max_frontier = 5000;          // cap per depth, after dedup
    double min_reward_to_accept = 1.0;
    int max_results = 10;
    int around_tolerance = 5;
};

/// A search hit: the question, a sequence whose execution matches its gold
/// answer, and the achieved reward.
struct PseudoPair {
    QuestionRecord question;
    ActionSequence sequence;
    double reward = 0.0;
};

// All type-plausible instantiations of the function table over the question's
// artifacts, in deterministic order (table order, then artifact order).
std::vector<Action> enumerate_actions(const ArgumentSet& args);

// Breadth-first search for action sequences whose execution matches the gold
// answer; shortest first, deduplicated by execution-state fingerprint.
std::vector<PseudoPair> search_pseudo_sequences(const KnowledgeGraph& kg,
                                                const QuestionRecord& question,
                                                const SearchConfig& cfg);

void save_pairs(const std::string& path, const std::vector<PseudoPair>& pairs);
std::vector<PseudoPair> load_pairs(const std::string& path,
                                   const std::vector<QuestionRecord>& dataset);

}  // namespace kgqa
