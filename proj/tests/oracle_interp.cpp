#include "oracle_interp.hpp"

#include <algorithm>
#include <variant>

namespace kgqa_oracle {

using kgqa::ActionSequence;
using kgqa::Answer;
using kgqa::ArgumentSet;
using kgqa::Artifact;
using kgqa::ArtifactKind;
using kgqa::Error;
using kgqa::Func;
using kgqa::KnowledgeGraph;

namespace {

using Set = std::set<std::string>;
using Map = std::map<std::string, Set>;
struct Num {
    long long v;
};
using Value = std::variant<Set, Map, Num>;

// Object neighbors by scanning every triple; no index use.
Set scan_neighbors(const KnowledgeGraph& kg, const std::string& e, const std::string& r,
                   const std::string& t) {
    Set out;
    for (const auto& tr : kg.triples()) {
        if (tr.subject != e || tr.relation != r) continue;
        if (kg.type_of(tr.object).count(t)) out.insert(tr.object);
    }
    return out;
}

Set scan_entities_of_type(const KnowledgeGraph& kg, const std::string& t) {
    Set out;
    for (const auto& e : kg.entities()) {
        if (kg.type_of(e).count(t)) out.insert(e);
    }
    return out;
}

Map merge_union(const Map& a, const Map& b) {
    Map out = a;
    for (const auto& [k, v] : b) {
        auto& dst = out[k];
        dst.insert(v.begin(), v.end());
    }
    return out;
}

long long card(const Map& m, const std::string& key) {
    auto it = m.find(key);
    return it == m.end() ? 0 : (long long)it->second.size();
}

}  // namespace

Answer brute_force_execute(const KnowledgeGraph& kg, const ActionSequence& seq,
                           int around_tolerance) {
    std::vector<Value> stack;
    std::vector<bool> booleans;

    auto pop = [&]() {
        if (stack.empty()) throw Error("oracle: underflow");
        Value v = std::move(stack.back());
        stack.pop_back();
        return v;
    };
    auto push = [&](Value v) {
        if (stack.size() >= 4) throw Error("oracle: overflow");
        stack.push_back(std::move(v));
    };
    auto pop_map_merged = [&]() {
        Value top = pop();
        if (!std::holds_alternative<Map>(top)) throw Error("oracle: expected map");
        Map m = std::get<Map>(std::move(top));
        if (!stack.empty() && std::holds_alternative<Map>(stack.back())) {
            Map below = std::get<Map>(std::move(stack.back()));
            stack.pop_back();
            m = merge_union(m, below);
        }
        return m;
    };

    for (const auto& act : seq.actions) {
        switch (act.func) {
            case Func::Select:
                push(scan_neighbors(kg, act.args[0].id, act.args[1].id, act.args[2].id));
                break;
            case Func::SelectAll: {
                Map m;
                for (const auto& s : scan_entities_of_type(kg, act.args[0].id)) {
                    Set img = scan_neighbors(kg, s, act.args[1].id, act.args[2].id);
                    if (!img.empty()) m[s] = std::move(img);
                }
                push(std::move(m));
                break;
            }
            case Func::Union:
            case Func::Inter:
            case Func::Diff: {
                Value b = pop();
                Value a = pop();
                if (std::holds_alternative<Set>(a) && std::holds_alternative<Set>(b)) {
                    const Set& x = std::get<Set>(a);
                    const Set& y = std::get<Set>(b);
                    Set out;
                    for (const auto& e : x) {
                        bool in_y = y.count(e) > 0;
                        if (act.func == Func::Union || (act.func == Func::Inter && in_y) ||
                            (act.func == Func::Diff && !in_y))
                            out.insert(e);
                    }
                    if (act.func == Func::Union)
                        for (const auto& e : y) out.insert(e);
                    push(std::move(out));
                } else if (std::holds_alternative<Map>(a) && std::holds_alternative<Map>(b)) {
                    const Map& x = std::get<Map>(a);
                    const Map& y = std::get<Map>(b);
                    Map out;
                    if (act.func == Func::Union) {
                        out = merge_union(x, y);
                    } else {
                        for (const auto& [k, v] : x) {
                            Set vs;
                            Set yv;
                            if (auto it = y.find(k); it != y.end()) yv = it->second;
                            for (const auto& e : v) {
                                bool in_y = yv.count(e) > 0;
                                if ((act.func == Func::Inter && in_y) ||
                                    (act.func == Func::Diff && !in_y))
                                    vs.insert(e);
                            }
                            if (!vs.empty()) out[k] = std::move(vs);
                        }
                    }
                    push(std::move(out));
                } else {
                    throw Error("oracle: mixed tags for set operation");
                }
                break;
            }
            case Func::Bool: {
                if (stack.empty() || !std::holds_alternative<Set>(stack.back()))
                    throw Error("oracle: Bool needs a set on top");
                booleans.push_back(std::get<Set>(stack.back()).count(act.args[0].id) > 0);
                break;
            }
            case Func::ArgMin:
            case Func::ArgMax: {
                Map m = pop_map_merged();
                Set out;
                if (!m.empty()) {
                    long long best = (long long)m.begin()->second.size();
                    for (const auto& [k, v] : m) {
                        long long c = (long long)v.size();
                        if (act.func == Func::ArgMin ? c < best : c > best) best = c;
                    }
                    for (const auto& [k, v] : m)
                        if ((long long)v.size() == best) out.insert(k);
                }
                push(std::move(out));
                break;
            }
            case Func::GreaterThan:
            case Func::LessThan:
            case Func::EqualTo: {
                Map m = pop_map_merged();
                long long pivot = card(m, act.args[0].id);
                Set out;
                for (const auto& [k, v] : m) {
                    if (k == act.args[0].id) continue;
                    long long c = (long long)v.size();
                    if ((act.func == Func::GreaterThan && c > pivot) ||
                        (act.func == Func::LessThan && c < pivot) ||
                        (act.func == Func::EqualTo && c == pivot))
                        out.insert(k);
                }
                push(std::move(out));
                break;
            }
            case Func::AtLeast:
            case Func::AtMost:
            case Func::Around:
            case Func::Exactly: {
                Map m = pop_map_merged();
                long long n = act.args[0].constant_value();
                Set out;
                for (const auto& [k, v] : m) {
                    long long c = (long long)v.size();
                    bool keep = act.func == Func::AtLeast  ? c >= n
                                : act.func == Func::AtMost ? c <= n
                                : act.func == Func::Around
                                    ? (c >= n - around_tolerance && c <= n + around_tolerance)
                                    : c == n;
                    if (keep) out.insert(k);
                }
                push(std::move(out));
                break;
            }
            case Func::Count: {
                Value v = pop();
                if (!std::holds_alternative<Set>(v)) throw Error("oracle: Count needs a set");
                push(Num{(long long)std::get<Set>(v).size()});
                break;
            }
        }
    }
    if (!booleans.empty()) return Answer::of_booleans(booleans);
    if (stack.size() != 1) throw Error("oracle: non-singleton final stack");
    if (std::holds_alternative<Set>(stack[0]))
        return Answer::of_entities(std::get<Set>(stack[0]));
    if (std::holds_alternative<Num>(stack[0]))
        return Answer::of_number(std::get<Num>(stack[0]).v);
    throw Error("oracle: map is not an answer");
}

KnowledgeGraph random_graph(std::mt19937_64& rng, int n_entities, int n_types, int n_relations,
                            int n_triples) {
    kgqa::KgBuilder b;
    for (int i = 0; i < n_types; ++i) b.add_type("t" + std::to_string(i));
    for (int i = 0; i < n_relations; ++i) b.add_relation("r" + std::to_string(i));
    std::uniform_int_distribution<int> type_pick(0, n_types - 1);
    for (int i = 0; i < n_entities; ++i) {
        std::vector<std::string> types = {"t" + std::to_string(type_pick(rng))};
        if (n_types > 1 && rng() % 4 == 0) {
            std::string extra = "t" + std::to_string(type_pick(rng));
            if (extra != types[0]) types.push_back(extra);
        }
        b.add_entity("e" + std::to_string(i), types);
    }
    std::uniform_int_distribution<int> ent_pick(0, n_entities - 1);
    std::uniform_int_distribution<int> rel_pick(0, n_relations - 1);
    std::set<kgqa::Triple> seen;
    int added = 0;
    for (int attempts = 0; attempts < n_triples * 20 && added < n_triples; ++attempts) {
        kgqa::Triple t{"e" + std::to_string(ent_pick(rng)), "r" + std::to_string(rel_pick(rng)),
                       "e" + std::to_string(ent_pick(rng))};
        if (!seen.insert(t).second) continue;
        b.add_triple(t.subject, t.relation, t.object);
        ++added;
    }
    return b.build();
}

ArgumentSet random_argument_set(std::mt19937_64& rng, const KnowledgeGraph& kg) {
    ArgumentSet args;
    auto pick_from = [&](const std::set<std::string>& pool, int count, ArtifactKind kind) {
        std::vector<std::string> v(pool.begin(), pool.end());
        std::shuffle(v.begin(), v.end(), rng);
        for (int i = 0; i < count && i < (int)v.size(); ++i) {
            Artifact a;
            a.kind = kind;
            a.id = v[i];
            a.start = (int)args.items.size() * 10;
            a.end = a.start + 5;
            args.items.push_back(a);
        }
    };
    pick_from(kg.entities(), 2, ArtifactKind::Entity);
    pick_from(kg.types(), 2, ArtifactKind::Type);
    pick_from(kg.relations(), 2, ArtifactKind::Relation);
    Artifact c;
    c.kind = ArtifactKind::Constant;
    c.id = std::to_string(rng() % 5);
    c.start = (int)args.items.size() * 10;
    c.end = c.start + 2;
    args.items.push_back(c);
    return args;
}

ActionSequence random_valid_sequence(std::mt19937_64& rng, const ArgumentSet& args, int max_len) {
    using kgqa::AbstractState;
    const auto available = kgqa::available_functions(args);
    std::uniform_int_distribution<int> len_pick(1, max_len);

    while (true) {
        ActionSequence seq;
        AbstractState st;
        const int target_len = len_pick(rng);
        bool dead = false;
        for (int step = 0; step < target_len; ++step) {
            const int remaining = target_len - step - 1;
            std::vector<Func> candidates;
            for (Func f : available) {
                try {
                    AbstractState n = kgqa::step_abstract(st, f);
                    if (kgqa::can_reach_final(n, remaining, available)) candidates.push_back(f);
                } catch (const Error&) {
                }
            }
            if (candidates.empty()) {
                dead = true;
                break;
            }
            Func f = candidates[rng() % candidates.size()];
            kgqa::Action act;
            act.func = f;
            for (ArtifactKind k : kgqa::signature(f).arg_kinds) {
                auto idxs = args.indices_of_kind(k);
                act.args.push_back(args[(size_t)idxs[rng() % idxs.size()]]);
            }
            st = kgqa::step_abstract(st, f);
            seq.actions.push_back(std::move(act));
        }
        if (!dead && kgqa::is_final_state(st)) return seq;
    }
}

}  // namespace kgqa_oracle
