#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "kgqa/kg.hpp"
#include "kgqa/util.hpp"

namespace kgqa {

enum class ArtifactKind { Entity, Type, Relation, Constant };

const char* kind_name(ArtifactKind k);
char kind_sigil(ArtifactKind k);  // e / t / r / v, as used by the grammar

/// A question-mention of a KG artifact or numeric constant, with its
/// character span in the question text.
struct Artifact {
    ArtifactKind kind = ArtifactKind::Entity;
    std::string id;      // entity/type/relation id, or decimal rendering of a constant
    int start = 0;       // character span in the question text
    int end = 0;

    long long constant_value() const;

    bool same_ref(const Artifact& o) const { return kind == o.kind && id == o.id; }
    bool operator==(const Artifact& o) const {
        return kind == o.kind && id == o.id && start == o.start && end == o.end;
    }
};

/// Ordered by first appearance in the question text; spans non-overlapping.
struct ArgumentSet {
    std::vector<Artifact> items;

    size_t size() const { return items.size(); }
    bool empty() const { return items.empty(); }
    const Artifact& operator[](size_t i) const { return items[i]; }

    std::vector<int> indices_of_kind(ArtifactKind k) const;
    bool has_kind(ArtifactKind k) const;
    // First item matching (kind, id); -1 when absent.
    int find(ArtifactKind k, const std::string& id) const;
};

// Function table order is load-bearing: enumeration and the decoder's fixed
// vocabulary follow it.
enum class Func {
    Select, SelectAll, Union, Inter, Diff, Bool, ArgMin, ArgMax,
    GreaterThan, LessThan, EqualTo, AtLeast, AtMost, Around, Exactly, Count,
};
inline constexpr int kNumFunctions = 16;

struct FuncSignature {
    Func func;
    const char* name;
    std::vector<ArtifactKind> arg_kinds;
};

const std::vector<FuncSignature>& function_table();
const FuncSignature& signature(Func f);
std::optional<Func> func_by_name(const std::string& name);

struct Action {
    Func func;
    std::vector<Artifact> args;

    bool operator==(const Action& o) const;
};

struct ActionSequence {
    std::vector<Action> actions;

    size_t size() const { return actions.size(); }
    bool operator==(const ActionSequence& o) const { return actions == o.actions; }
};

/// Result of executing a sequence: an entity set, a number, or the list of
/// membership checks accumulated by Bool actions.
struct Answer {
    enum class Tag { Entities, Number, Booleans };
    Tag tag = Tag::Entities;
    std::set<std::string> entities;
    long long number = 0;
    std::vector<bool> booleans;

    static Answer of_entities(std::set<std::string> s);
    static Answer of_number(long long n);
    static Answer of_booleans(std::vector<bool> b);

    // Canonical string-set rendering used by the F1 metric: entity ids as-is,
    // numbers and boolean-list elements as "pos:value".
    std::set<std::string> canonical_strings() const;

    bool operator==(const Answer& o) const;
};

// ---- Grammar ----
// sequence := action (" # " action)*
// action   := FUNC "(" [arg (", " arg)*] ")"
// arg      := ("e:"|"r:"|"t:"|"v:") token

std::string serialize_sequence(const ActionSequence& seq);
ActionSequence parse_sequence(const std::string& text, const ArgumentSet& resolver);

// Human-facing rendering with labels substituted for ids.
std::string render_surface(const KnowledgeGraph& kg, const ActionSequence& seq);

// ---- Abstract type checking ----

enum class ValueTag { Set, Map, Number };

struct AbstractState {
    std::vector<ValueTag> stack;
    bool has_booleans = false;

    bool operator<(const AbstractState& o) const {
        if (stack != o.stack) return stack < o.stack;
        return has_booleans < o.has_booleans;
    }
    bool operator==(const AbstractState& o) const = default;
};

inline constexpr int kMaxStackDepth = 4;

// A sequence may stop here: exactly one Set or Number on the stack.
bool is_final_state(const AbstractState& s);

// Applies one action to the abstract stack; throws Error on tag mismatch,
// underflow, or overflow. Mirrors execute() exactly, tags only.
AbstractState step_abstract(const AbstractState& s, Func f);

struct TypeCheckResult {
    bool ok = true;
    std::string error;   // empty when ok
    int action_index = -1;
};

TypeCheckResult type_check(const ActionSequence& seq);

// Abstract state after a valid prefix (throws on invalid prefix).
AbstractState abstract_prefix_state(const ActionSequence& prefix);

// True when some suffix of <= remaining actions, drawn from `available`
// functions, can reach a final state.
bool can_reach_final(const AbstractState& s, int remaining, const std::set<Func>& available);

// Functions instantiable from the kinds present in an argument set.
std::set<Func> available_functions(const ArgumentSet& args);

// ---- Execution ----

struct ExecOptions {
    int around_tolerance = 5;  // half-width of the Around(n) window
};

struct ExecValue {
    ValueTag tag = ValueTag::Set;
    std::set<std::string> set;
    std::map<std::string, std::set<std::string>> map;
    long long number = 0;

    bool operator==(const ExecValue& o) const;
    // Stable rendering used for search-state fingerprints.
    std::string fingerprint() const;
};

struct ExecutionState {
    std::vector<ExecValue> stack;
    std::vector<bool> booleans;

    std::string fingerprint() const;
    bool is_final() const;
    Answer answer() const;  // throws if not final
};

// Applies one action; throws Error on tag violation or undeclared artifact.
void execute_step(const KnowledgeGraph& kg, ExecutionState& st, const Action& a,
                  const ExecOptions& opts);

Answer execute(const KnowledgeGraph& kg, const ActionSequence& seq, const ExecOptions& opts = {});

// F1 over canonical string sets; both empty -> 1, exactly one empty -> 0.
double f1(const Answer& pred, const Answer& gold);

/// A decoded action sequence with its (length-normalized) log-probability.
struct Candidate {
    ActionSequence sequence;
    double log_prob = 0.0;
};

}  // namespace kgqa
