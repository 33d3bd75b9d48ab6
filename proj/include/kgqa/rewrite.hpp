#pragma once

#include <functional>

#include "kgqa/bfs.hpp"
#include "kgqa/retrieval.hpp"

namespace kgqa {

/// Maps an action-sequence prefix to question text; the template realizer
/// stands in for a learned back-translation model. Empty prefix -> empty text.
using BackTranslator = std::function<std::string(const ActionSequence&)>;

BackTranslator template_back_translator(const KnowledgeGraph& kg);

// Tokens of `orig` whose multiset count exceeds their count in `del`, in
// original order; falls back to the full original when the diff is empty.
std::vector<std::string> compare_tokens(const std::vector<std::string>& orig,
                                        const std::vector<std::string>& del);

struct RewriteEntry {
    std::string question_id;
    std::string original;
    std::vector<std::string> utterances;  // one per action, in action order
    std::string joined;                   // utterances joined with " # "
};

struct RewriteCorpus {
    std::vector<RewriteEntry> entries;

    void save(const std::string& path) const;
    static RewriteCorpus load(const std::string& path);
};

// Iterative delete / back-translate / compare over every searched pair.
RewriteCorpus build_rewrite_corpus(const std::vector<PseudoPair>& pairs,
                                   const BackTranslator& bt);

/// Inference-time rewriter: nearest-neighbour retrieval over the corpus
/// questions with artifact substitution by kind-and-order alignment.
class Rewriter {
public:
    Rewriter() = default;
    Rewriter(RewriteCorpus corpus, const std::vector<QuestionRecord>& corpus_questions,
             AntonymTable antonyms, double threshold);

    // Rewritten utterances for q (joined with " # "), or q's text unchanged
    // when no neighbour clears the threshold or kind counts mismatch.
    std::string rewrite(const KnowledgeGraph& kg, const QuestionRecord& q) const;

private:
    RewriteCorpus corpus_;
    std::vector<QuestionRecord> questions_;          // aligned with corpus_.entries
    std::vector<std::vector<std::string>> masked_;   // aligned with corpus_.entries
    AntonymTable antonyms_;
    double threshold_ = 0.6;
};

// Decoder input: original question, a separator, the rewritten form, then
// every artifact wrapped in kind markers.
std::string make_decoder_input(const KnowledgeGraph& kg, const QuestionRecord& q,
                               const std::string& rewritten, bool include_rewrite);

}  // namespace kgqa
