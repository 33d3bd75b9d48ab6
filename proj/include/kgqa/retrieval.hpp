#pragma once

#include "kgqa/dataset.hpp"

namespace kgqa {

/// Unordered word pairs whose presence on opposite sides of a comparison
/// forces similarity to zero (e.g. atleast / atmost).
struct AntonymTable {
    std::vector<std::pair<std::string, std::string>> pairs;

    static AntonymTable defaults();
    static AntonymTable load(const std::string& path);
    void save(const std::string& path) const;

    bool zeroed(const std::vector<std::string>& tokens1,
                const std::vector<std::string>& tokens2) const;
};

// Entity/type/constant spans replaced by [ENTITY]/[TYPE]/[CONSTANT];
// relation mentions left untouched. Throws on overlapping spans.
std::vector<std::string> mask_question(const std::string& text, const ArgumentSet& artifacts);

// Token-level edit-distance similarity in [0,1], zeroed by antonym pairs.
double similarity(const std::vector<std::string>& m1, const std::vector<std::string>& m2,
                  const AntonymTable& antonyms);

struct MemoryItem {
    QuestionRecord question;
    std::vector<std::string> masked;
    Answer answer;
};

/// Retrieval memory over the training split; masked forms are computed once
/// at build time. Immutable afterwards.
struct Memory {
    std::vector<MemoryItem> items;

    static Memory build(const std::vector<QuestionRecord>& records);
    void save(const std::string& path) const;
    static Memory load(const std::string& path);
};

struct SupportItem {
    const MemoryItem* item = nullptr;
    double similarity = 0.0;
};
using SupportSet = std::vector<SupportItem>;

SupportSet retrieve(const Memory& memory, const QuestionRecord& q, int k, double threshold,
                    const AntonymTable& antonyms);

inline constexpr int kMaxRelationPermutations = 6;

// Remaps a candidate's arguments onto a support question's artifacts:
// entities/types/constants by first-appearance order within their kind,
// relations by every arrangement of the target's relations over the
// candidate's distinct relation slots. Empty result signals inapplicability.
std::vector<ActionSequence> adjust_candidate(const ActionSequence& cand, const ArgumentSet& src,
                                             const ArgumentSet& tgt);

struct CandidateScore {
    std::vector<double> rewards;  // r_i^j per support item
    double score = 0.0;           // sum d_j r_i^j / sum d_j
};

CandidateScore score_candidate(const KnowledgeGraph& kg, const Candidate& cand,
                               const ArgumentSet& src, const SupportSet& support,
                               const ExecOptions& opts = {});

struct SelectionResult {
    int index = 0;                      // chosen candidate
    std::vector<CandidateScore> scores; // empty when the support set is empty
};

// Highest selection score wins; ties broken by higher log-probability, then
// canonical serialization. Empty support falls back to the beam ranking.
SelectionResult select_candidate(const KnowledgeGraph& kg, const std::vector<Candidate>& cands,
                                 const ArgumentSet& src, const SupportSet& support,
                                 const ExecOptions& opts = {});

}  // namespace kgqa
