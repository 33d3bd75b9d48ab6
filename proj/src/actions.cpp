#include "kgqa/actions.hpp"

#include <algorithm>
#include <cstdlib>

namespace kgqa {

const char* kind_name(ArtifactKind k) {
    switch (k) {
        case ArtifactKind::Entity: return "entity";
        case ArtifactKind::Type: return "type";
        case ArtifactKind::Relation: return "relation";
        case ArtifactKind::Constant: return "constant";
    }
    return "?";
}

char kind_sigil(ArtifactKind k) {
    switch (k) {
        case ArtifactKind::Entity: return 'e';
        case ArtifactKind::Type: return 't';
        case ArtifactKind::Relation: return 'r';
        case ArtifactKind::Constant: return 'v';
    }
    return '?';
}

long long Artifact::constant_value() const {
    if (kind != ArtifactKind::Constant) throw Error("artifact is not a constant: " + id);
    char* end = nullptr;
    long long v = std::strtoll(id.c_str(), &end, 10);
    if (end == id.c_str() || *end != '\0' || v < 0)
        throw Error("constant must be a non-negative integer: " + id);
    return v;
}

std::vector<int> ArgumentSet::indices_of_kind(ArtifactKind k) const {
    std::vector<int> out;
    for (size_t i = 0; i < items.size(); ++i)
        if (items[i].kind == k) out.push_back(static_cast<int>(i));
    return out;
}

bool ArgumentSet::has_kind(ArtifactKind k) const {
    for (const auto& a : items)
        if (a.kind == k) return true;
    return false;
}

int ArgumentSet::find(ArtifactKind k, const std::string& id) const {
    for (size_t i = 0; i < items.size(); ++i)
        if (items[i].kind == k && items[i].id == id) return static_cast<int>(i);
    return -1;
}

const std::vector<FuncSignature>& function_table() {
    using K = ArtifactKind;
    static const std::vector<FuncSignature> table = {
        {Func::Select, "Select", {K::Entity, K::Relation, K::Type}},
        {Func::SelectAll, "SelectAll", {K::Type, K::Relation, K::Type}},
        {Func::Union, "Union", {}},
        {Func::Inter, "Inter", {}},
        {Func::Diff, "Diff", {}},
        {Func::Bool, "Bool", {K::Entity}},
        {Func::ArgMin, "ArgMin", {}},
        {Func::ArgMax, "ArgMax", {}},
        {Func::GreaterThan, "GreaterThan", {K::Entity}},
        {Func::LessThan, "LessThan", {K::Entity}},
        {Func::EqualTo, "EqualTo", {K::Entity}},
        {Func::AtLeast, "AtLeast", {K::Constant}},
        {Func::AtMost, "AtMost", {K::Constant}},
        {Func::Around, "Around", {K::Constant}},
        {Func::Exactly, "Exactly", {K::Constant}},
        {Func::Count, "Count", {}},
    };
    return table;
}

const FuncSignature& signature(Func f) { return function_table()[static_cast<size_t>(f)]; }

std::optional<Func> func_by_name(const std::string& name) {
    for (const auto& s : function_table())
        if (name == s.name) return s.func;
    return std::nullopt;
}

bool Action::operator==(const Action& o) const {
    if (func != o.func || args.size() != o.args.size()) return false;
    for (size_t i = 0; i < args.size(); ++i)
        if (!(args[i] == o.args[i])) return false;
    return true;
}

Answer Answer::of_entities(std::set<std::string> s) {
    Answer a;
    a.tag = Tag::Entities;
    a.entities = std::move(s);
    return a;
}

Answer Answer::of_number(long long n) {
    Answer a;
    a.tag = Tag::Number;
    a.number = n;
    return a;
}

Answer Answer::of_booleans(std::vector<bool> b) {
    Answer a;
    a.tag = Tag::Booleans;
    a.booleans = std::move(b);
    return a;
}

std::set<std::string> Answer::canonical_strings() const {
    std::set<std::string> out;
    switch (tag) {
        case Tag::Entities:
            out = entities;
            break;
        case Tag::Number:
            out.insert("0:" + std::to_string(number));
            break;
        case Tag::Booleans:
            for (size_t i = 0; i < booleans.size(); ++i)
                out.insert(std::to_string(i) + (booleans[i] ? ":true" : ":false"));
            break;
    }
    return out;
}

bool Answer::operator==(const Answer& o) const {
    if (tag != o.tag) return false;
    switch (tag) {
        case Tag::Entities: return entities == o.entities;
        case Tag::Number: return number == o.number;
        case Tag::Booleans: return booleans == o.booleans;
    }
    return false;
}

// ---- Serialization ----

std::string serialize_sequence(const ActionSequence& seq) {
    std::string out;
    for (size_t i = 0; i < seq.actions.size(); ++i) {
        if (i) out += " # ";
        const Action& a = seq.actions[i];
        out += signature(a.func).name;
        out += '(';
        for (size_t j = 0; j < a.args.size(); ++j) {
            if (j) out += ", ";
            out += kind_sigil(a.args[j].kind);
            out += ':';
            out += a.args[j].id;
        }
        out += ')';
    }
    return out;
}

std::string render_surface(const KnowledgeGraph& kg, const ActionSequence& seq) {
    std::string out;
    for (size_t i = 0; i < seq.actions.size(); ++i) {
        if (i) out += " # ";
        const Action& a = seq.actions[i];
        out += signature(a.func).name;
        out += '(';
        for (size_t j = 0; j < a.args.size(); ++j) {
            if (j) out += ", ";
            const Artifact& g = a.args[j];
            out += g.kind == ArtifactKind::Constant ? g.id : kg.label(g.id);
        }
        out += ')';
    }
    return out;
}

namespace {

[[noreturn]] void syntax_error(const std::string& text, size_t pos, const std::string& msg) {
    throw Error("syntax error at position " + std::to_string(pos) + ": " + msg + " in \"" + text + "\"");
}

ArtifactKind kind_from_sigil(char c, const std::string& text, size_t pos) {
    switch (c) {
        case 'e': return ArtifactKind::Entity;
        case 't': return ArtifactKind::Type;
        case 'r': return ArtifactKind::Relation;
        case 'v': return ArtifactKind::Constant;
        default: syntax_error(text, pos, "expected argument sigil e:/t:/r:/v:");
    }
}

}  // namespace

ActionSequence parse_sequence(const std::string& text, const ArgumentSet& resolver) {
    if (text.empty()) throw Error("empty action sequence text");
    ActionSequence seq;
    size_t pos = 0;
    while (true) {
        size_t name_start = pos;
        while (pos < text.size() && (std::isalpha(static_cast<unsigned char>(text[pos])))) ++pos;
        if (pos == name_start) syntax_error(text, pos, "expected function name");
        const std::string name = text.substr(name_start, pos - name_start);
        auto func = func_by_name(name);
        if (!func) throw Error("unknown function: " + name);
        if (pos >= text.size() || text[pos] != '(') syntax_error(text, pos, "expected '('");
        ++pos;
        Action action;
        action.func = *func;
        if (pos < text.size() && text[pos] != ')') {
            while (true) {
                ArtifactKind kind = kind_from_sigil(text[pos], text, pos);
                if (pos + 1 >= text.size() || text[pos + 1] != ':')
                    syntax_error(text, pos, "expected ':' after sigil");
                pos += 2;
                size_t tok_start = pos;
                while (pos < text.size() && text[pos] != ',' && text[pos] != ')') ++pos;
                const std::string id = text.substr(tok_start, pos - tok_start);
                if (id.empty()) syntax_error(text, tok_start, "empty argument token");
                int idx = resolver.find(kind, id);
                if (idx < 0)
                    throw Error("unresolvable argument " + std::string(1, kind_sigil(kind)) + ":" + id);
                action.args.push_back(resolver[static_cast<size_t>(idx)]);
                if (pos >= text.size()) syntax_error(text, pos, "unterminated argument list");
                if (text[pos] == ')') break;
                if (text.compare(pos, 2, ", ") != 0) syntax_error(text, pos, "expected ', '");
                pos += 2;
            }
        }
        if (pos >= text.size() || text[pos] != ')') syntax_error(text, pos, "expected ')'");
        ++pos;
        const auto& sig = signature(action.func);
        if (action.args.size() != sig.arg_kinds.size())
            throw Error(std::string("arity mismatch for ") + sig.name + ": expected " +
                        std::to_string(sig.arg_kinds.size()) + ", got " +
                        std::to_string(action.args.size()));
        for (size_t j = 0; j < action.args.size(); ++j) {
            if (action.args[j].kind != sig.arg_kinds[j])
                throw Error(std::string("argument kind mismatch for ") + sig.name + " at position " +
                            std::to_string(j));
        }
        seq.actions.push_back(std::move(action));
        if (pos == text.size()) break;
        if (text.compare(pos, 3, " # ") != 0) syntax_error(text, pos, "expected ' # ' separator");
        pos += 3;
    }
    return seq;
}

// ---- Abstract type checking ----

bool is_final_state(const AbstractState& s) {
    return s.stack.size() == 1 && (s.stack[0] == ValueTag::Set || s.stack[0] == ValueTag::Number);
}

namespace {

[[noreturn]] void tag_error(Func f, const std::string& msg) {
    throw Error(std::string(signature(f).name) + ": " + msg);
}

}  // namespace

AbstractState step_abstract(const AbstractState& s, Func f) {
    AbstractState n = s;
    auto push = [&](ValueTag t) {
        if (n.stack.size() >= kMaxStackDepth) tag_error(f, "stack overflow");
        n.stack.push_back(t);
    };
    switch (f) {
        case Func::Select:
            push(ValueTag::Set);
            return n;
        case Func::SelectAll:
            push(ValueTag::Map);
            return n;
        case Func::Union:
        case Func::Inter:
        case Func::Diff: {
            if (n.stack.size() < 2) tag_error(f, "stack underflow");
            ValueTag b = n.stack.back();
            ValueTag a = n.stack[n.stack.size() - 2];
            if (a != b || a == ValueTag::Number)
                tag_error(f, "requires two values of the same set-like tag");
            n.stack.pop_back();
            return n;
        }
        case Func::Bool:
            if (n.stack.empty()) tag_error(f, "stack underflow");
            if (n.stack.back() != ValueTag::Set) tag_error(f, "requires an entity set on top");
            n.has_booleans = true;
            return n;
        case Func::Count:
            if (n.stack.empty()) tag_error(f, "stack underflow");
            if (n.stack.back() != ValueTag::Set) tag_error(f, "requires an entity set on top");
            n.stack.back() = ValueTag::Number;
            return n;
        default: {
            // Map consumers; two maps on top merge before the pop.
            if (n.stack.empty()) tag_error(f, "stack underflow");
            if (n.stack.back() != ValueTag::Map) tag_error(f, "requires an entity map on top");
            if (n.stack.size() >= 2 && n.stack[n.stack.size() - 2] == ValueTag::Map)
                n.stack.pop_back();
            n.stack.back() = ValueTag::Set;
            return n;
        }
    }
}

TypeCheckResult type_check(const ActionSequence& seq) {
    if (seq.actions.empty()) return {false, "empty sequence", -1};
    AbstractState st;
    for (size_t i = 0; i < seq.actions.size(); ++i) {
        const Action& a = seq.actions[i];
        const auto& sig = signature(a.func);
        if (a.args.size() != sig.arg_kinds.size())
            return {false, std::string("arity mismatch for ") + sig.name, static_cast<int>(i)};
        for (size_t j = 0; j < a.args.size(); ++j)
            if (a.args[j].kind != sig.arg_kinds[j])
                return {false, std::string("argument kind mismatch for ") + sig.name,
                        static_cast<int>(i)};
        try {
            st = step_abstract(st, a.func);
        } catch (const Error& e) {
            return {false, e.what(), static_cast<int>(i)};
        }
    }
    if (!is_final_state(st))
        return {false, "sequence does not end with a single answerable value",
                static_cast<int>(seq.actions.size()) - 1};
    return {};
}

AbstractState abstract_prefix_state(const ActionSequence& prefix) {
    AbstractState st;
    for (const Action& a : prefix.actions) st = step_abstract(st, a.func);
    return st;
}

namespace {

struct ReachKey {
    AbstractState state;
    int remaining;
    unsigned mask;

    bool operator<(const ReachKey& o) const {
        if (remaining != o.remaining) return remaining < o.remaining;
        if (mask != o.mask) return mask < o.mask;
        return state < o.state;
    }
};

bool can_reach_final_impl(const AbstractState& s, int remaining, const std::set<Func>& available,
                          unsigned mask, std::map<ReachKey, bool>& memo) {
    if (is_final_state(s)) return true;
    if (remaining <= 0) return false;
    const ReachKey key{s, remaining, mask};
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    bool ok = false;
    for (Func f : available) {
        try {
            AbstractState n = step_abstract(s, f);
            if (can_reach_final_impl(n, remaining - 1, available, mask, memo)) {
                ok = true;
                break;
            }
        } catch (const Error&) {
            continue;
        }
    }
    memo.emplace(key, ok);
    return ok;
}

}  // namespace

bool can_reach_final(const AbstractState& s, int remaining, const std::set<Func>& available) {
    unsigned mask = 0;
    for (Func f : available) mask |= 1u << static_cast<unsigned>(f);
    static thread_local std::map<ReachKey, bool> memo;
    return can_reach_final_impl(s, remaining, available, mask, memo);
}

std::set<Func> available_functions(const ArgumentSet& args) {
    std::set<Func> out;
    for (const auto& sig : function_table()) {
        bool ok = true;
        for (ArtifactKind k : sig.arg_kinds) {
            if (!args.has_kind(k)) {
                ok = false;
                break;
            }
        }
        if (ok) out.insert(sig.func);
    }
    return out;
}

// ---- Execution ----

bool ExecValue::operator==(const ExecValue& o) const {
    if (tag != o.tag) return false;
    switch (tag) {
        case ValueTag::Set: return set == o.set;
        case ValueTag::Map: return map == o.map;
        case ValueTag::Number: return number == o.number;
    }
    return false;
}

std::string ExecValue::fingerprint() const {
    std::string out;
    switch (tag) {
        case ValueTag::Set:
            out = "S{";
            for (const auto& e : set) out += e + ",";
            out += "}";
            break;
        case ValueTag::Map:
            out = "M{";
            for (const auto& [k, v] : map) {
                out += k + ":(";
                for (const auto& e : v) out += e + ",";
                out += "),";
            }
            out += "}";
            break;
        case ValueTag::Number:
            out = "N" + std::to_string(number);
            break;
    }
    return out;
}

std::string ExecutionState::fingerprint() const {
    std::string out;
    for (const auto& v : stack) out += v.fingerprint() + "|";
    out += "B[";
    for (bool b : booleans) out += b ? "1" : "0";
    out += "]";
    return out;
}

bool ExecutionState::is_final() const {
    return stack.size() == 1 &&
           (stack[0].tag == ValueTag::Set || stack[0].tag == ValueTag::Number);
}

Answer ExecutionState::answer() const {
    if (!is_final()) throw Error("execution did not end in an answerable state");
    if (!booleans.empty()) return Answer::of_booleans(booleans);
    if (stack[0].tag == ValueTag::Number) return Answer::of_number(stack[0].number);
    return Answer::of_entities(stack[0].set);
}

namespace {

ExecValue make_set(std::set<std::string> s) {
    ExecValue v;
    v.tag = ValueTag::Set;
    v.set = std::move(s);
    return v;
}

ExecValue make_map(std::map<std::string, std::set<std::string>> m) {
    ExecValue v;
    v.tag = ValueTag::Map;
    v.map = std::move(m);
    return v;
}

ExecValue make_number(long long n) {
    ExecValue v;
    v.tag = ValueTag::Number;
    v.number = n;
    return v;
}

std::set<std::string> set_union(const std::set<std::string>& a, const std::set<std::string>& b) {
    std::set<std::string> out = a;
    out.insert(b.begin(), b.end());
    return out;
}

std::set<std::string> set_inter(const std::set<std::string>& a, const std::set<std::string>& b) {
    std::set<std::string> out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                          std::inserter(out, out.begin()));
    return out;
}

std::set<std::string> set_diff(const std::set<std::string>& a, const std::set<std::string>& b) {
    std::set<std::string> out;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::inserter(out, out.begin()));
    return out;
}

// Pops the map argument for a map-consuming function, applying the implicit
// union-merge when the top two stack values are both maps.
std::map<std::string, std::set<std::string>> pop_map_with_merge(ExecutionState& st, Func f) {
    if (st.stack.empty()) tag_error(f, "stack underflow");
    if (st.stack.back().tag != ValueTag::Map) tag_error(f, "requires an entity map on top");
    auto top = std::move(st.stack.back().map);
    st.stack.pop_back();
    if (!st.stack.empty() && st.stack.back().tag == ValueTag::Map) {
        for (auto& [k, v] : st.stack.back().map) {
            auto& dst = top[k];
            dst.insert(v.begin(), v.end());
        }
        st.stack.pop_back();
    }
    return top;
}

long long map_count(const std::map<std::string, std::set<std::string>>& m, const std::string& key) {
    auto it = m.find(key);
    return it == m.end() ? 0 : static_cast<long long>(it->second.size());
}

}  // namespace

void execute_step(const KnowledgeGraph& kg, ExecutionState& st, const Action& a,
                  const ExecOptions& opts) {
    const Func f = a.func;
    auto push = [&](ExecValue v) {
        if (st.stack.size() >= kMaxStackDepth) tag_error(f, "stack overflow");
        st.stack.push_back(std::move(v));
    };
    switch (f) {
        case Func::Select: {
            push(make_set(kg.neighbors(a.args[0].id, a.args[1].id, a.args[2].id)));
            return;
        }
        case Func::SelectAll: {
            const std::string& t1 = a.args[0].id;
            const std::string& r = a.args[1].id;
            const std::string& t2 = a.args[2].id;
            std::map<std::string, std::set<std::string>> m;
            for (const auto& s : kg.entities_of_type(t1)) {
                auto image = kg.neighbors(s, r, t2);
                if (!image.empty()) m.emplace(s, std::move(image));
            }
            push(make_map(std::move(m)));
            return;
        }
        case Func::Union:
        case Func::Inter:
        case Func::Diff: {
            if (st.stack.size() < 2) tag_error(f, "stack underflow");
            ExecValue b = std::move(st.stack.back());
            st.stack.pop_back();
            ExecValue x = std::move(st.stack.back());
            st.stack.pop_back();
            if (x.tag != b.tag || x.tag == ValueTag::Number)
                tag_error(f, "requires two values of the same set-like tag");
            if (x.tag == ValueTag::Set) {
                if (f == Func::Union) x.set = set_union(x.set, b.set);
                else if (f == Func::Inter) x.set = set_inter(x.set, b.set);
                else x.set = set_diff(x.set, b.set);
                push(std::move(x));
            } else {
                std::map<std::string, std::set<std::string>> out;
                if (f == Func::Union) {
                    out = x.map;
                    for (const auto& [k, v] : b.map) {
                        auto& dst = out[k];
                        dst.insert(v.begin(), v.end());
                    }
                } else if (f == Func::Inter) {
                    for (const auto& [k, v] : x.map) {
                        auto it = b.map.find(k);
                        if (it == b.map.end()) continue;
                        auto common = set_inter(v, it->second);
                        if (!common.empty()) out.emplace(k, std::move(common));
                    }
                } else {
                    for (const auto& [k, v] : x.map) {
                        auto it = b.map.find(k);
                        auto rest = it == b.map.end() ? v : set_diff(v, it->second);
                        if (!rest.empty()) out.emplace(k, std::move(rest));
                    }
                }
                push(make_map(std::move(out)));
            }
            return;
        }
        case Func::Bool: {
            if (st.stack.empty()) tag_error(f, "stack underflow");
            if (st.stack.back().tag != ValueTag::Set) tag_error(f, "requires an entity set on top");
            if (!kg.has_entity(a.args[0].id)) throw Error("undeclared entity: " + a.args[0].id);
            st.booleans.push_back(st.stack.back().set.count(a.args[0].id) > 0);
            return;
        }
        case Func::ArgMin:
        case Func::ArgMax: {
            auto m = pop_map_with_merge(st, f);
            std::set<std::string> keys;
            if (!m.empty()) {
                size_t best = m.begin()->second.size();
                for (const auto& [k, v] : m) {
                    if (f == Func::ArgMin ? v.size() < best : v.size() > best) best = v.size();
                }
                for (const auto& [k, v] : m)
                    if (v.size() == best) keys.insert(k);
            }
            push(make_set(std::move(keys)));
            return;
        }
        case Func::GreaterThan:
        case Func::LessThan:
        case Func::EqualTo: {
            auto m = pop_map_with_merge(st, f);
            const std::string& pivot_entity = a.args[0].id;
            if (!kg.has_entity(pivot_entity)) throw Error("undeclared entity: " + pivot_entity);
            const long long pivot = map_count(m, pivot_entity);
            std::set<std::string> keys;
            for (const auto& [k, v] : m) {
                if (k == pivot_entity) continue;
                const long long n = static_cast<long long>(v.size());
                if ((f == Func::GreaterThan && n > pivot) || (f == Func::LessThan && n < pivot) ||
                    (f == Func::EqualTo && n == pivot))
                    keys.insert(k);
            }
            push(make_set(std::move(keys)));
            return;
        }
        case Func::AtLeast:
        case Func::AtMost:
        case Func::Around:
        case Func::Exactly: {
            auto m = pop_map_with_merge(st, f);
            const long long n = a.args[0].constant_value();
            const long long delta = opts.around_tolerance;
            std::set<std::string> keys;
            for (const auto& [k, v] : m) {
                const long long c = static_cast<long long>(v.size());
                bool keep = false;
                switch (f) {
                    case Func::AtLeast: keep = c >= n; break;
                    case Func::AtMost: keep = c <= n; break;
                    case Func::Around: keep = c >= n - delta && c <= n + delta; break;
                    default: keep = c == n; break;
                }
                if (keep) keys.insert(k);
            }
            push(make_set(std::move(keys)));
            return;
        }
        case Func::Count: {
            if (st.stack.empty()) tag_error(f, "stack underflow");
            if (st.stack.back().tag != ValueTag::Set) tag_error(f, "requires an entity set on top");
            const long long n = static_cast<long long>(st.stack.back().set.size());
            st.stack.back() = make_number(n);
            return;
        }
    }
}

Answer execute(const KnowledgeGraph& kg, const ActionSequence& seq, const ExecOptions& opts) {
    ExecutionState st;
    for (const Action& a : seq.actions) execute_step(kg, st, a, opts);
    return st.answer();
}

double f1(const Answer& pred, const Answer& gold) {
    const auto p = pred.canonical_strings();
    const auto g = gold.canonical_strings();
    if (p.empty() && g.empty()) return 1.0;
    if (p.empty() || g.empty()) return 0.0;
    size_t inter = 0;
    for (const auto& s : p) inter += g.count(s);
    if (inter == 0) return 0.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(p.size() + g.size());
}

}  // namespace kgqa
