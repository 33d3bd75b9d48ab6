#pragma once

#include "kgqa/bench.hpp"
#include "kgqa/bfs.hpp"
#include "kgqa/model.hpp"
#include "kgqa/retrieval.hpp"
#include "kgqa/rewrite.hpp"

namespace kgqa {

struct PipelineConfig {
    std::string kg_path;
    std::string dataset_path;
    std::string checkpoint_path;
    std::string corpus_path;
    std::string memory_path;
    std::string antonyms_path;

    int beam = 10;
    int n_candidates = 5;
    int k = 3;
    double threshold = 0.6;
    int around_tolerance = 5;
    std::uint64_t seed = 1;
    bool no_rewrite = false;
    bool no_select = false;

    ModelConfig model;
    int pretrain_epochs = 100;
    double pretrain_lr = 1e-4;
    int rl_epochs = 50;
    double rl_lr = 1e-5;
    int bfs_max_len = 4;
    int bfs_max_frontier = 5000;
    int bfs_max_results = 1;
    double bfs_min_reward = 1.0;

    static PipelineConfig from_json_file(const std::string& path);
    std::string canonical_json() const;  // stable rendering, hashed into reports
    std::string config_hash() const { return std::to_string(fnv1a(canonical_json())); }
};

struct EvalReport {
    struct CategoryStats {
        int count = 0;
        double mean_f1 = 0.0;
    };
    std::map<std::string, CategoryStats> categories;
    double macro = 0.0;
    double micro = 0.0;
    int total = 0;
    std::string config_hash;

    std::string to_json() const;
    std::string to_csv() const;
};

// Aggregates per-question (category, f1) pairs. Macro is the unweighted mean
// of category means; micro the mean over all questions.
EvalReport compute_report(const std::vector<std::pair<std::string, double>>& per_question,
                          const std::string& config_hash);

/// Everything the inference stages need, loaded once.
struct Pipeline {
    PipelineConfig cfg;
    KnowledgeGraph kg;
    std::vector<QuestionRecord> dataset;
    ModelParams model;
    RewriteCorpus corpus;
    Memory memory;
    AntonymTable antonyms;
    Rewriter rewriter;

    static Pipeline load(const PipelineConfig& cfg);

    std::vector<QuestionRecord> split(const std::string& name) const;
};

// Decoder input construction shared by training and inference.
std::string decoder_input_text(const KnowledgeGraph& kg, const Rewriter& rewriter,
                               const QuestionRecord& q, bool no_rewrite);

CompiledExample compile_example(const Vocab& vocab, const KnowledgeGraph& kg,
                                const QuestionRecord& q, const std::string& input_text);

struct AnswerResult {
    ActionSequence sequence;       // empty when no candidate decodes
    Answer answer;                 // empty entity set on failure
    std::vector<Candidate> candidates;
    int chosen = -1;
    int support_size = 0;
};

AnswerResult answer_question(const Pipeline& ctx, const QuestionRecord& q);

EvalReport evaluate(const Pipeline& ctx, const std::string& split);

// Rows: full, no_rewrite, no_select.
struct AblationRow {
    std::string name;
    double macro = 0.0;
    double micro = 0.0;
};
std::vector<AblationRow> run_ablations(const Pipeline& ctx, const std::string& split);

struct SweepCell {
    int k = 0;
    int n_candidates = 0;
    double macro = 0.0;
    double micro = 0.0;
};
// Grid over support sizes and candidate counts; the k = 0 column is verified
// against the no-select ablation and a mismatch raises an error.
std::vector<SweepCell> sweep(const Pipeline& ctx, const std::string& split,
                             const std::vector<int>& support_sizes,
                             const std::vector<int>& candidate_counts);

// ---- Training orchestration ----

std::vector<PseudoPair> run_bfs(const KnowledgeGraph& kg,
                                const std::vector<QuestionRecord>& questions,
                                const SearchConfig& cfg, int take_per_question);

// Builds the vocabulary from the training inputs, initializes the model, and
// teacher-forces it on the searched pairs.
ModelParams pretrain_pipeline(const PipelineConfig& cfg, const KnowledgeGraph& kg,
                              const std::vector<QuestionRecord>& dataset,
                              const std::vector<PseudoPair>& pairs, const RewriteCorpus& corpus,
                              std::vector<double>* epoch_losses = nullptr);

// REINFORCE fine-tuning over the training split; keeps the checkpoint with
// the best mean dev reward (greedy decoding).
void train_rl_pipeline(const PipelineConfig& cfg, const KnowledgeGraph& kg,
                       const std::vector<QuestionRecord>& dataset, const RewriteCorpus& corpus,
                       ModelParams& model, std::vector<double>* epoch_rewards = nullptr);

}  // namespace kgqa
