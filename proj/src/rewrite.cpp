#include "kgqa/rewrite.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include <json.hpp>

#include "kgqa/bench.hpp"

namespace kgqa {

BackTranslator template_back_translator(const KnowledgeGraph& kg) {
    return [&kg](const ActionSequence& prefix) -> std::string {
        if (prefix.actions.empty()) return "";
        return realize_question(kg, prefix).text;
    };
}

std::vector<std::string> compare_tokens(const std::vector<std::string>& orig,
                                        const std::vector<std::string>& del) {
    std::map<std::string, int> excess;
    for (const auto& t : orig) ++excess[t];
    for (const auto& t : del) --excess[t];

    std::map<std::string, int> remaining;
    for (const auto& t : orig) ++remaining[t];

    // Prefer the latest occurrences: a token is emitted once the number of
    // occurrences left (including this one) fits within its excess.
    std::vector<std::string> out;
    for (const auto& t : orig) {
        if (excess[t] > 0 && remaining[t] <= excess[t]) {
            out.push_back(t);
            --excess[t];
        }
        --remaining[t];
    }
    if (out.empty()) return orig;  // nothing deleted: fall back to the full question
    return out;
}

RewriteCorpus build_rewrite_corpus(const std::vector<PseudoPair>& pairs,
                                   const BackTranslator& bt) {
    RewriteCorpus corpus;
    for (const auto& pair : pairs) {
        const int k = (int)pair.sequence.size();
        if (k < 1) throw Error("empty pseudo sequence for question " + pair.question.id);
        RewriteEntry entry;
        entry.question_id = pair.question.id;
        entry.original = pair.question.text;
        entry.utterances.resize((size_t)k);

        std::vector<std::string> q_ori = pair.question.tokens();
        for (int j = k; j >= 1; --j) {
            ActionSequence prefix;
            prefix.actions.assign(pair.sequence.actions.begin(),
                                  pair.sequence.actions.begin() + (j - 1));
            const std::vector<std::string> q_del = tokenize(bt(prefix));
            entry.utterances[(size_t)(j - 1)] = join_tokens(compare_tokens(q_ori, q_del));
            q_ori = q_del;
        }
        entry.joined = join_tokens(entry.utterances, " # ");
        corpus.entries.push_back(std::move(entry));
    }
    return corpus;
}

void RewriteCorpus::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot open for writing: " + path);
    for (const auto& e : entries) {
        nlohmann::json j{{"question_id", e.question_id},
                         {"original", e.original},
                         {"utterances", e.utterances},
                         {"joined", e.joined}};
        out << j.dump() << "\n";
    }
}

RewriteCorpus RewriteCorpus::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open: " + path);
    RewriteCorpus corpus;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        RewriteEntry e;
        e.question_id = j.at("question_id").get<std::string>();
        e.original = j.at("original").get<std::string>();
        e.utterances = j.at("utterances").get<std::vector<std::string>>();
        e.joined = j.at("joined").get<std::string>();
        corpus.entries.push_back(std::move(e));
    }
    return corpus;
}

Rewriter::Rewriter(RewriteCorpus corpus, const std::vector<QuestionRecord>& corpus_questions,
                   AntonymTable antonyms, double threshold)
    : corpus_(std::move(corpus)), antonyms_(std::move(antonyms)), threshold_(threshold) {
    std::map<std::string, const QuestionRecord*> by_id;
    for (const auto& q : corpus_questions) by_id[q.id] = &q;
    for (const auto& e : corpus_.entries) {
        auto it = by_id.find(e.question_id);
        if (it == by_id.end()) throw Error("corpus question missing from dataset: " + e.question_id);
        questions_.push_back(*it->second);
        masked_.push_back(mask_question(it->second->text, it->second->artifacts));
    }
}

namespace {

// Per-kind label replacement pairs aligned by first appearance.
struct Replacement {
    std::vector<std::string> from;
    std::vector<std::string> to;
};

std::vector<std::string> replace_all(const std::vector<std::string>& tokens,
                                     const std::vector<Replacement>& reps) {
    std::vector<std::string> out;
    size_t i = 0;
    while (i < tokens.size()) {
        const Replacement* hit = nullptr;
        for (const auto& rep : reps) {
            if (rep.from.empty() || i + rep.from.size() > tokens.size()) continue;
            if (std::equal(rep.from.begin(), rep.from.end(), tokens.begin() + (long)i)) {
                hit = &rep;
                break;
            }
        }
        if (hit) {
            out.insert(out.end(), hit->to.begin(), hit->to.end());
            i += hit->from.size();
        } else {
            out.push_back(tokens[i]);
            ++i;
        }
    }
    return out;
}

}  // namespace

std::string Rewriter::rewrite(const KnowledgeGraph& kg, const QuestionRecord& q) const {
    if (corpus_.entries.empty()) return q.text;
    const auto masked = mask_question(q.text, q.artifacts);

    int best = -1;
    double best_sim = -1.0;
    for (size_t i = 0; i < corpus_.entries.size(); ++i) {
        const double d = similarity(masked, masked_[i], antonyms_);
        if (d > best_sim) {
            best_sim = d;
            best = (int)i;
        }
    }
    if (best < 0 || best_sim < threshold_) return q.text;

    const QuestionRecord& src_q = questions_[(size_t)best];
    using K = ArtifactKind;
    std::vector<Replacement> reps;
    for (K kind : {K::Entity, K::Type, K::Relation, K::Constant}) {
        std::vector<const Artifact*> src_arts, tgt_arts;
        for (const auto& a : src_q.artifacts.items)
            if (a.kind == kind) src_arts.push_back(&a);
        for (const auto& a : q.artifacts.items)
            if (a.kind == kind) tgt_arts.push_back(&a);
        if (src_arts.size() != tgt_arts.size()) return q.text;  // kind-count mismatch
        for (size_t i = 0; i < src_arts.size(); ++i) {
            Replacement rep;
            rep.from = tokenize(kind == K::Constant ? src_arts[i]->id
                                                    : kg.label(src_arts[i]->id));
            rep.to = tokenize(kind == K::Constant ? tgt_arts[i]->id
                                                  : kg.label(tgt_arts[i]->id));
            reps.push_back(std::move(rep));
        }
    }
    // Longer labels match first so multi-token labels are not split.
    std::stable_sort(reps.begin(), reps.end(), [](const Replacement& a, const Replacement& b) {
        return a.from.size() > b.from.size();
    });

    const RewriteEntry& entry = corpus_.entries[(size_t)best];
    std::vector<std::string> out_utterances;
    for (const auto& utt : entry.utterances)
        out_utterances.push_back(join_tokens(replace_all(tokenize(utt), reps)));
    return join_tokens(out_utterances, " # ");
}

std::string make_decoder_input(const KnowledgeGraph& kg, const QuestionRecord& q,
                               const std::string& rewritten, bool include_rewrite) {
    std::string out = q.text;
    if (include_rewrite) {
        out += " <sep> ";
        out += rewritten;
    }
    for (const auto& a : q.artifacts.items) {
        const std::string kind = kind_name(a.kind);
        const std::string label = a.kind == ArtifactKind::Constant ? a.id : kg.label(a.id);
        out += " <" + kind + "> " + label + " </" + kind + ">";
    }
    return out;
}

}  // namespace kgqa
