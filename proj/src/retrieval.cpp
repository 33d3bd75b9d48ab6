#include "kgqa/retrieval.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include <json.hpp>

namespace kgqa {

using json = nlohmann::json;

AntonymTable AntonymTable::defaults() {
    AntonymTable t;
    t.pairs = {{"atleast", "atmost"}, {"less", "greater"}, {"lesser", "greater"},
               {"most", "least"}};
    return t;
}

AntonymTable AntonymTable::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open: " + path);
    AntonymTable t;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto words = tokenize(line);
        if (words.empty() || words[0].starts_with("#")) continue;
        if (words.size() != 2 || words[0] == words[1])
            throw Error(path + ":" + std::to_string(line_no) +
                        ": expected two distinct words per line");
        t.pairs.emplace_back(words[0], words[1]);
    }
    return t;
}

void AntonymTable::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot open for writing: " + path);
    for (const auto& [a, b] : pairs) out << a << " " << b << "\n";
}

bool AntonymTable::zeroed(const std::vector<std::string>& tokens1,
                          const std::vector<std::string>& tokens2) const {
    const std::set<std::string> s1(tokens1.begin(), tokens1.end());
    const std::set<std::string> s2(tokens2.begin(), tokens2.end());
    for (const auto& [a, b] : pairs) {
        if ((s1.count(a) && s2.count(b)) || (s1.count(b) && s2.count(a))) return true;
    }
    return false;
}

std::vector<std::string> mask_question(const std::string& text, const ArgumentSet& artifacts) {
    std::vector<const Artifact*> spans;
    for (const auto& a : artifacts.items) spans.push_back(&a);
    std::sort(spans.begin(), spans.end(),
              [](const Artifact* a, const Artifact* b) { return a->start < b->start; });
    for (size_t i = 1; i < spans.size(); ++i) {
        if (spans[i]->start < spans[i - 1]->end) throw Error("overlapping artifact spans");
    }
    std::string out = text;
    // Replace right-to-left so earlier offsets stay valid.
    for (auto it = spans.rbegin(); it != spans.rend(); ++it) {
        const Artifact* a = *it;
        if (a->kind == ArtifactKind::Relation) continue;
        const char* placeholder = a->kind == ArtifactKind::Entity   ? "[ENTITY]"
                                  : a->kind == ArtifactKind::Type   ? "[TYPE]"
                                                                    : "[CONSTANT]";
        out.replace((size_t)a->start, (size_t)(a->end - a->start), placeholder);
    }
    return tokenize(out);
}

double similarity(const std::vector<std::string>& m1, const std::vector<std::string>& m2,
                  const AntonymTable& antonyms) {
    if (antonyms.zeroed(m1, m2)) return 0.0;
    const size_t n = m1.size(), m = m2.size();
    if (n == 0 && m == 0) return 1.0;
    std::vector<size_t> prev(m + 1), cur(m + 1);
    std::iota(prev.begin(), prev.end(), size_t{0});
    for (size_t i = 1; i <= n; ++i) {
        cur[0] = i;
        for (size_t j = 1; j <= m; ++j) {
            const size_t sub = prev[j - 1] + (m1[i - 1] == m2[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    const double dist = (double)prev[m];
    return 1.0 - dist / (double)std::max(n, m);
}

Memory Memory::build(const std::vector<QuestionRecord>& records) {
    Memory mem;
    for (const auto& q : records) {
        MemoryItem item;
        item.question = q;
        item.masked = mask_question(q.text, q.artifacts);
        item.answer = q.gold_answer;
        mem.items.push_back(std::move(item));
    }
    return mem;
}

void Memory::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot open for writing: " + path);
    for (const auto& item : items) {
        json arts = json::array();
        for (const auto& a : item.question.artifacts.items) {
            arts.push_back(json{{"kind", kind_name(a.kind)},
                                {"id", a.id},
                                {"start", a.start},
                                {"end", a.end}});
        }
        json j{{"question_id", item.question.id},
               {"text", item.question.text},
               {"masked", item.masked},
               {"artifacts", arts},
               {"answer", json::parse(answer_to_json(item.answer))}};
        out << j.dump() << "\n";
    }
}

Memory Memory::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open: " + path);
    Memory mem;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        MemoryItem item;
        item.question.id = j.at("question_id").get<std::string>();
        item.question.text = j.at("text").get<std::string>();
        for (const auto& a : j.at("artifacts")) {
            Artifact g;
            const std::string k = a.at("kind").get<std::string>();
            g.kind = k == "entity"     ? ArtifactKind::Entity
                     : k == "type"     ? ArtifactKind::Type
                     : k == "relation" ? ArtifactKind::Relation
                                       : ArtifactKind::Constant;
            g.id = a.at("id").get<std::string>();
            g.start = a.at("start").get<int>();
            g.end = a.at("end").get<int>();
            item.question.artifacts.items.push_back(g);
        }
        item.masked = j.at("masked").get<std::vector<std::string>>();
        item.answer = answer_from_json(j.at("answer").dump());
        item.question.gold_answer = item.answer;
        mem.items.push_back(std::move(item));
    }
    return mem;
}

SupportSet retrieve(const Memory& memory, const QuestionRecord& q, int k, double threshold,
                    const AntonymTable& antonyms) {
    if (k < 1) throw Error("retrieve: k must be >= 1");
    const auto masked = mask_question(q.text, q.artifacts);
    std::vector<std::pair<double, size_t>> scored;
    for (size_t i = 0; i < memory.items.size(); ++i) {
        const double d = similarity(masked, memory.items[i].masked, antonyms);
        if (d >= threshold) scored.emplace_back(d, i);
    }
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;  // memory order breaks ties
    });
    SupportSet out;
    for (size_t i = 0; i < scored.size() && (int)i < k; ++i)
        out.push_back(SupportItem{&memory.items[scored[i].second], scored[i].first});
    return out;
}

namespace {

// Ordered lists of artifact ids per kind, first-appearance order.
std::vector<std::string> kind_order(const ArgumentSet& args, ArtifactKind k) {
    std::vector<std::string> out;
    for (const auto& a : args.items) {
        if (a.kind != k) continue;
        if (std::find(out.begin(), out.end(), a.id) == out.end()) out.push_back(a.id);
    }
    return out;
}

void arrangements(int n, int slots, std::vector<int>& cur, std::vector<bool>& used,
                  std::vector<std::vector<int>>& out) {
    if ((int)cur.size() == slots) {
        out.push_back(cur);
        return;
    }
    for (int i = 0; i < n; ++i) {
        if (used[(size_t)i]) continue;
        used[(size_t)i] = true;
        cur.push_back(i);
        arrangements(n, slots, cur, used, out);
        cur.pop_back();
        used[(size_t)i] = false;
    }
}

}  // namespace

std::vector<ActionSequence> adjust_candidate(const ActionSequence& cand, const ArgumentSet& src,
                                             const ArgumentSet& tgt) {
    using K = ArtifactKind;
    std::map<K, std::vector<std::string>> src_order, tgt_order;
    for (K k : {K::Entity, K::Type, K::Constant, K::Relation}) {
        src_order[k] = kind_order(src, k);
        tgt_order[k] = kind_order(tgt, k);
    }
    for (K k : {K::Entity, K::Type, K::Constant}) {
        if (src_order[k].size() != tgt_order[k].size()) return {};
    }

    // Positional remap for non-relation kinds.
    auto remap = [&](const Artifact& a) -> std::optional<Artifact> {
        const auto& order = src_order[a.kind];
        auto it = std::find(order.begin(), order.end(), a.id);
        if (it == order.end()) return std::nullopt;
        const size_t idx = (size_t)(it - order.begin());
        const std::string& new_id = tgt_order[a.kind][idx];
        const int pos = tgt.find(a.kind, new_id);
        return tgt[(size_t)pos];
    };

    // Distinct relation slots in candidate order.
    std::vector<std::string> rel_slots;
    for (const auto& action : cand.actions) {
        for (const auto& a : action.args) {
            if (a.kind != K::Relation) continue;
            if (std::find(rel_slots.begin(), rel_slots.end(), a.id) == rel_slots.end())
                rel_slots.push_back(a.id);
        }
    }
    const auto& tgt_rels = tgt_order[K::Relation];
    if ((int)tgt_rels.size() > kMaxRelationPermutations)
        throw Error("too many relations for permutation (cap " +
                    std::to_string(kMaxRelationPermutations) + ")");
    if (rel_slots.size() > tgt_rels.size()) return {};

    std::vector<std::vector<int>> perms;
    if (rel_slots.empty()) {
        perms.push_back({});
    } else {
        std::vector<int> cur;
        std::vector<bool> used(tgt_rels.size(), false);
        arrangements((int)tgt_rels.size(), (int)rel_slots.size(), cur, used, perms);
    }

    std::vector<ActionSequence> out;
    for (const auto& perm : perms) {
        ActionSequence adjusted = cand;
        bool ok = true;
        for (auto& action : adjusted.actions) {
            for (auto& a : action.args) {
                if (a.kind == K::Relation) {
                    const auto slot =
                        std::find(rel_slots.begin(), rel_slots.end(), a.id) - rel_slots.begin();
                    const std::string& new_id = tgt_rels[(size_t)perm[(size_t)slot]];
                    a = tgt[(size_t)tgt.find(K::Relation, new_id)];
                } else {
                    auto m = remap(a);
                    if (!m) {
                        ok = false;
                        break;
                    }
                    a = *m;
                }
            }
            if (!ok) break;
        }
        if (ok) out.push_back(std::move(adjusted));
    }
    return out;
}

CandidateScore score_candidate(const KnowledgeGraph& kg, const Candidate& cand,
                               const ArgumentSet& src, const SupportSet& support,
                               const ExecOptions& opts) {
    if (support.empty()) throw Error("score_candidate: empty support set");
    CandidateScore cs;
    double num = 0.0, den = 0.0;
    for (const auto& item : support) {
        double best = 0.0;
        for (const auto& adjusted :
             adjust_candidate(cand.sequence, src, item.item->question.artifacts)) {
            try {
                best = std::max(best, f1(execute(kg, adjusted, opts), item.item->answer));
            } catch (const Error&) {
                // Failed executions contribute zero.
            }
        }
        cs.rewards.push_back(best);
        num += item.similarity * best;
        den += item.similarity;
    }
    cs.score = den > 0 ? num / den : 0.0;
    return cs;
}

SelectionResult select_candidate(const KnowledgeGraph& kg, const std::vector<Candidate>& cands,
                                 const ArgumentSet& src, const SupportSet& support,
                                 const ExecOptions& opts) {
    if (cands.empty()) throw Error("select_candidate: no candidates");
    SelectionResult res;
    auto better = [&](int a, int b, const std::vector<double>& scores) {
        if (!scores.empty() && scores[(size_t)a] != scores[(size_t)b])
            return scores[(size_t)a] > scores[(size_t)b];
        if (cands[(size_t)a].log_prob != cands[(size_t)b].log_prob)
            return cands[(size_t)a].log_prob > cands[(size_t)b].log_prob;
        return serialize_sequence(cands[(size_t)a].sequence) <
               serialize_sequence(cands[(size_t)b].sequence);
    };
    std::vector<double> scores;
    if (!support.empty()) {
        for (const auto& c : cands) {
            res.scores.push_back(score_candidate(kg, c, src, support, opts));
            scores.push_back(res.scores.back().score);
        }
    }
    int best = 0;
    for (int i = 1; i < (int)cands.size(); ++i)
        if (better(i, best, scores)) best = i;
    res.index = best;
    return res;
}

}  // namespace kgqa
