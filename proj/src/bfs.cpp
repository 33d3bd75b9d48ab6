#include "kgqa/bfs.hpp"

#include <fstream>
#include <map>

#include <json.hpp>

namespace kgqa {

std::vector<Action> enumerate_actions(const ArgumentSet& args) {
    std::vector<Action> out;
    for (const auto& sig : function_table()) {
        // Nested loops over argument positions, rightmost fastest.
        std::vector<std::vector<int>> pools;
        bool feasible = true;
        for (ArtifactKind k : sig.arg_kinds) {
            auto idxs = args.indices_of_kind(k);
            if (idxs.empty()) {
                feasible = false;
                break;
            }
            pools.push_back(std::move(idxs));
        }
        if (!feasible) continue;
        std::vector<size_t> pos(pools.size(), 0);
        while (true) {
            Action a;
            a.func = sig.func;
            for (size_t i = 0; i < pools.size(); ++i)
                a.args.push_back(args[(size_t)pools[i][pos[i]]]);
            out.push_back(std::move(a));
            size_t i = pools.size();
            while (i > 0) {
                --i;
                if (++pos[i] < pools[i].size()) break;
                pos[i] = 0;
                if (i == 0) {
                    i = SIZE_MAX;
                    break;
                }
            }
            if (pools.empty() || i == SIZE_MAX) break;
        }
    }
    return out;
}

std::vector<PseudoPair> search_pseudo_sequences(const KnowledgeGraph& kg,
                                                const QuestionRecord& question,
                                                const SearchConfig& cfg) {
    struct Node {
        ActionSequence seq;
        ExecutionState state;
        AbstractState abstract;
    };

    const ExecOptions opts{cfg.around_tolerance};
    const auto actions = enumerate_actions(question.artifacts);
    const auto available = available_functions(question.artifacts);

    std::vector<PseudoPair> results;
    std::set<std::string> seen;  // execution-state fingerprints across all depths

    std::vector<Node> frontier;
    frontier.push_back(Node{});
    seen.insert(frontier[0].state.fingerprint());

    for (int depth = 1; depth <= cfg.max_len; ++depth) {
        std::vector<Node> next;
        for (const auto& node : frontier) {
            for (const auto& action : actions) {
                AbstractState abs_next;
                try {
                    abs_next = step_abstract(node.abstract, action.func);
                } catch (const Error&) {
                    continue;
                }
                if (!can_reach_final(abs_next, cfg.max_len - depth, available)) continue;

                Node child;
                child.seq = node.seq;
                child.seq.actions.push_back(action);
                child.state = node.state;
                child.abstract = abs_next;
                try {
                    execute_step(kg, child.state, action, opts);
                } catch (const Error&) {
                    continue;
                }
                if (!seen.insert(child.state.fingerprint()).second) continue;

                if (child.state.is_final() &&
                    (int)results.size() < cfg.max_results) {
                    const double reward = f1(child.state.answer(), question.gold_answer);
                    if (reward >= cfg.min_reward_to_accept) {
                        results.push_back(PseudoPair{question, child.seq, reward});
                        if ((int)results.size() >= cfg.max_results) return results;
                    }
                }
                if (depth < cfg.max_len && (int)next.size() < cfg.max_frontier)
                    next.push_back(std::move(child));
            }
        }
        frontier = std::move(next);
        if (frontier.empty()) break;
    }
    return results;
}

void save_pairs(const std::string& path, const std::vector<PseudoPair>& pairs) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open for writing: " + path);
    for (const auto& p : pairs) {
        nlohmann::json j{{"question_id", p.question.id},
                         {"sequence", serialize_sequence(p.sequence)},
                         {"reward", p.reward}};
        out << j.dump() << "\n";
    }
}

std::vector<PseudoPair> load_pairs(const std::string& path,
                                   const std::vector<QuestionRecord>& dataset) {
    std::map<std::string, const QuestionRecord*> by_id;
    for (const auto& q : dataset) by_id[q.id] = &q;
    std::ifstream in(path);
    if (!in) throw Error("cannot open: " + path);
    std::vector<PseudoPair> out;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        const std::string qid = j.at("question_id").get<std::string>();
        auto it = by_id.find(qid);
        if (it == by_id.end())
            throw Error(path + ":" + std::to_string(line_no) + ": unknown question id " + qid);
        PseudoPair p;
        p.question = *it->second;
        p.sequence = parse_sequence(j.at("sequence").get<std::string>(), p.question.artifacts);
        p.reward = j.at("reward").get<double>();
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace kgqa
