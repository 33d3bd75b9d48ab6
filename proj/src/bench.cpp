#include "kgqa/bench.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

namespace kgqa {

namespace {

const std::vector<std::string>& type_pool() {
    static const std::vector<std::string> pool = {
        "people",  "instruments", "films",   "cities",  "bands",   "books",
        "songs",   "teams",       "rivers",  "gardens", "museums", "planets",
        "castles", "bridges",     "islands", "forests",
    };
    return pool;
}

const std::vector<std::string>& verb_pool() {
    static const std::vector<std::string> pool = {
        "play",  "direct",  "visit", "join",   "write", "sing",   "guard", "explore",
        "paint", "chart",   "defend", "cross", "study", "map",    "admire", "restore",
    };
    return pool;
}

const std::vector<std::string>& adjective_pool() {
    static const std::vector<std::string> pool = {
        "amber", "violet", "crimson", "golden", "silver",  "ashen", "ivory",
        "cobalt", "emerald", "scarlet", "umber", "sable",   "coral", "jade",
        "onyx",  "pearl",  "ruby",    "topaz",  "hazel",   "indigo",
    };
    return pool;
}

const std::vector<std::string>& noun_pool() {
    static const std::vector<std::string> pool = {
        "stone",   "creek", "hollow", "summit", "harbor", "meadow", "thicket",
        "lagoon",  "prairie", "canyon", "grove", "mesa",  "fjord",  "tundra",
        "dune",    "marsh", "cliff",  "shoal",  "glen",   "butte",
    };
    return pool;
}

size_t pick(std::mt19937_64& rng, size_t n) { return static_cast<size_t>(rng() % n); }

template <typename T>
const T& pick_one(std::mt19937_64& rng, const std::vector<T>& v) {
    return v[pick(rng, v.size())];
}

}  // namespace

void BenchConfig::validate() const {
    if (n_types < 2 || n_types > (int)type_pool().size())
        throw Error("n_types must be in [2, " + std::to_string(type_pool().size()) + "]");
    if (n_relations < 1 || n_relations > (int)verb_pool().size())
        throw Error("n_relations must be in [1, " + std::to_string(verb_pool().size()) + "]");
    const int max_entities = (int)(adjective_pool().size() * noun_pool().size());
    if (n_entities < n_types || n_entities > max_entities)
        throw Error("n_entities must be in [n_types, " + std::to_string(max_entities) + "]");
    if (max_degree < 1) throw Error("max_degree must be positive");
    if (min_triples_per_relation < 1) throw Error("min_triples_per_relation must be positive");
    for (const auto& [cat, n] : per_category) {
        if (std::find(question_categories().begin(), question_categories().end(), cat) ==
            question_categories().end())
            throw Error("unknown category: " + cat);
        if (n < 3) throw Error("per-category count must be >= 3 (one per split): " + cat);
    }
    if (std::abs(train_ratio + dev_ratio + test_ratio - 1.0) > 1e-9)
        throw Error("split ratios must sum to 1");
    if (train_ratio <= 0 || dev_ratio <= 0 || test_ratio <= 0)
        throw Error("split ratios must be positive");
    if (template_version != "v1") throw Error("unknown template inventory: " + template_version);
}

BenchConfig BenchConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open: " + path);
    nlohmann::json j;
    in >> j;
    BenchConfig cfg;
    cfg.seed = j.value("seed", cfg.seed);
    cfg.n_types = j.value("n_types", cfg.n_types);
    cfg.n_entities = j.value("n_entities", cfg.n_entities);
    cfg.n_relations = j.value("n_relations", cfg.n_relations);
    cfg.max_degree = j.value("max_degree", cfg.max_degree);
    cfg.min_triples_per_relation = j.value("min_triples_per_relation", cfg.min_triples_per_relation);
    if (j.contains("per_category"))
        cfg.per_category = j.at("per_category").get<std::map<std::string, int>>();
    cfg.train_ratio = j.value("train_ratio", cfg.train_ratio);
    cfg.dev_ratio = j.value("dev_ratio", cfg.dev_ratio);
    cfg.test_ratio = j.value("test_ratio", cfg.test_ratio);
    cfg.around_tolerance = j.value("around_tolerance", cfg.around_tolerance);
    cfg.template_version = j.value("template_version", cfg.template_version);
    cfg.validate();
    return cfg;
}

KnowledgeGraph generate_kg(const BenchConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);

    std::vector<std::string> types = type_pool();
    std::shuffle(types.begin(), types.end(), rng);
    types.resize(cfg.n_types);

    std::vector<std::string> verbs = verb_pool();
    std::shuffle(verbs.begin(), verbs.end(), rng);
    verbs.resize(cfg.n_relations);

    std::vector<std::string> labels;
    for (const auto& a : adjective_pool())
        for (const auto& n : noun_pool()) labels.push_back(a + " " + n);
    std::shuffle(labels.begin(), labels.end(), rng);
    labels.resize(cfg.n_entities);

    KgBuilder b;
    for (const auto& t : types) b.add_type(t, t);
    for (const auto& v : verbs) b.add_relation(v, v);

    std::map<std::string, std::vector<std::string>> by_type;
    for (int i = 0; i < cfg.n_entities; ++i) {
        const std::string id = "e" + std::to_string(i);
        const std::string& type = types[i % types.size()];
        b.add_entity(id, {type}, labels[i]);
        by_type[type].push_back(id);
    }

    for (const auto& rel : verbs) {
        const std::string& domain = types[pick(rng, types.size())];
        std::string range = domain;
        while (range == domain) range = types[pick(rng, types.size())];

        const auto& subjects = by_type.at(domain);
        const auto& objects = by_type.at(range);
        const long long capacity = (long long)subjects.size() * (long long)objects.size();
        if (capacity < cfg.min_triples_per_relation)
            throw Error("infeasible config: relation " + rel + " admits only " +
                        std::to_string(capacity) + " triples but " +
                        std::to_string(cfg.min_triples_per_relation) + " are required");

        std::map<std::string, std::set<std::string>> image;
        int total = 0;
        for (const auto& s : subjects) {
            const int cap = std::min<int>(cfg.max_degree, (int)objects.size());
            const int degree = (int)pick(rng, (size_t)cap + 1);
            std::vector<std::string> pool = objects;
            std::shuffle(pool.begin(), pool.end(), rng);
            for (int k = 0; k < degree; ++k) {
                image[s].insert(pool[(size_t)k]);
                ++total;
            }
        }
        long long guard = 0;
        while (total < cfg.min_triples_per_relation) {
            if (++guard > 100000) throw Error("infeasible config: cannot satisfy triple minimum");
            const auto& s = subjects[pick(rng, subjects.size())];
            if (image[s].size() >= objects.size()) continue;
            const auto& o = objects[pick(rng, objects.size())];
            if (image[s].insert(o).second) ++total;
        }
        for (const auto& [s, objs] : image)
            for (const auto& o : objs) b.add_triple(s, rel, o);
    }
    return b.build();
}

// ---- Surface realization ----

namespace {

struct TextBuilder {
    const KnowledgeGraph& kg;
    std::vector<std::string> tokens;
    std::vector<std::pair<Artifact, std::pair<int, int>>> slots;  // token ranges

    void lit(const std::string& words) {
        for (auto& t : tokenize(words)) tokens.push_back(std::move(t));
    }

    void arg(const Artifact& a) {
        const std::string label = a.kind == ArtifactKind::Constant ? a.id : kg.label(a.id);
        const int begin = (int)tokens.size();
        lit(label);
        slots.push_back({a, {begin, (int)tokens.size()}});
    }

    RealizedQuestion finish() const {
        RealizedQuestion out;
        std::vector<int> tok_start(tokens.size() + 1, 0);
        std::string text;
        for (size_t i = 0; i < tokens.size(); ++i) {
            tok_start[i] = (int)text.size();
            if (i) {
                text += ' ';
                tok_start[i] += 1;
            }
            text += tokens[i];
        }
        tok_start[tokens.size()] = (int)text.size() + (tokens.empty() ? 0 : 1);
        out.text = text;
        for (const auto& [artifact, range] : slots) {
            if (out.artifacts.find(artifact.kind, artifact.id) >= 0) continue;
            Artifact a = artifact;
            a.start = tok_start[(size_t)range.first];
            a.end = tok_start[(size_t)range.second] - 1;  // drop trailing separator
            out.artifacts.items.push_back(a);
        }
        return out;
    }
};

// Filter clause shared by single- and double-SelectAll shapes:
// "... can <filter words> {t2} {r} [than/as {e}]".
bool emit_filter_clause(TextBuilder& b, const Action& select_all, const Action& filter) {
    const Artifact& t2 = select_all.args[2];
    const Artifact& r = select_all.args[1];
    switch (filter.func) {
        case Func::AtLeast: b.lit("atleast"); b.arg(filter.args[0]); break;
        case Func::AtMost: b.lit("atmost"); b.arg(filter.args[0]); break;
        case Func::Exactly: b.lit("exactly"); b.arg(filter.args[0]); break;
        case Func::Around: b.lit("around"); b.arg(filter.args[0]); break;
        case Func::ArgMax: b.lit("the most"); break;
        case Func::ArgMin: b.lit("the least"); break;
        case Func::GreaterThan: b.lit("greater number of"); break;
        case Func::LessThan: b.lit("lesser number of"); break;
        case Func::EqualTo: b.lit("equal number of"); break;
        default: return false;
    }
    b.arg(t2);
    b.arg(r);
    if (filter.func == Func::GreaterThan || filter.func == Func::LessThan) {
        b.lit("than");
        b.arg(filter.args[0]);
    } else if (filter.func == Func::EqualTo) {
        b.lit("as");
        b.arg(filter.args[0]);
    }
    return true;
}

bool realize_table(TextBuilder& b, const ActionSequence& seq, bool how_many) {
    const auto& a = seq.actions;
    auto shape_is = [&](std::initializer_list<Func> fs) {
        if (a.size() != fs.size()) return false;
        size_t i = 0;
        for (Func f : fs)
            if (a[i++].func != f) return false;
        return true;
    };
    const std::string head = how_many ? "how many" : "which";

    if (shape_is({Func::Select})) {
        b.lit(head);
        b.arg(a[0].args[2]);
        b.lit("does");
        b.arg(a[0].args[0]);
        b.arg(a[0].args[1]);
        return true;
    }
    if (!how_many && shape_is({Func::Select, Func::Bool})) {
        b.lit("does");
        b.arg(a[0].args[0]);
        b.arg(a[0].args[1]);
        b.lit("the");
        b.arg(a[0].args[2]);
        b.arg(a[1].args[0]);
        return true;
    }
    if (!how_many && shape_is({Func::Select, Func::Bool, Func::Bool})) {
        b.lit("does");
        b.arg(a[0].args[0]);
        b.arg(a[0].args[1]);
        b.lit("the");
        b.arg(a[0].args[2]);
        b.arg(a[1].args[0]);
        b.lit("and");
        b.arg(a[2].args[0]);
        return true;
    }
    if (a.size() == 3 && a[0].func == Func::Select && a[1].func == Func::Select &&
        (a[2].func == Func::Union || a[2].func == Func::Inter || a[2].func == Func::Diff)) {
        b.lit(head);
        b.arg(a[0].args[2]);
        b.lit(a[2].func == Func::Inter ? "does both" : "does");
        b.arg(a[0].args[0]);
        b.lit(a[2].func == Func::Union ? "or" : a[2].func == Func::Inter ? "and" : "but not");
        b.arg(a[1].args[0]);
        b.arg(a[0].args[1]);
        return true;
    }
    if (shape_is({Func::SelectAll})) {
        b.lit(head);
        b.arg(a[0].args[0]);
        b.lit("can some");
        b.arg(a[0].args[2]);
        b.arg(a[0].args[1]);
        return true;
    }
    if (shape_is({Func::SelectAll, Func::SelectAll})) {
        b.lit(head);
        b.arg(a[0].args[0]);
        b.lit("or");
        b.arg(a[1].args[0]);
        b.lit("can some");
        b.arg(a[0].args[2]);
        b.arg(a[0].args[1]);
        return true;
    }
    if (a.size() == 2 && a[0].func == Func::SelectAll) {
        b.lit(head);
        b.arg(a[0].args[0]);
        b.lit("can");
        return emit_filter_clause(b, a[0], a[1]);
    }
    if (a.size() == 3 && a[0].func == Func::SelectAll && a[1].func == Func::SelectAll) {
        b.lit(head);
        b.arg(a[0].args[0]);
        b.lit("or");
        b.arg(a[1].args[0]);
        b.lit("can");
        return emit_filter_clause(b, a[0], a[2]);
    }
    return false;
}

void realize_fallback(TextBuilder& b, const ActionSequence& seq) {
    for (const auto& act : seq.actions) {
        switch (act.func) {
            case Func::Select:
                b.lit("which");
                b.arg(act.args[2]);
                b.lit("does");
                b.arg(act.args[0]);
                b.arg(act.args[1]);
                break;
            case Func::SelectAll:
                b.lit("which");
                b.arg(act.args[0]);
                b.lit("can some");
                b.arg(act.args[2]);
                b.arg(act.args[1]);
                break;
            case Func::Union: b.lit("or"); break;
            case Func::Inter: b.lit("and"); break;
            case Func::Diff: b.lit("but not"); break;
            case Func::Bool:
                b.lit("is it");
                b.arg(act.args[0]);
                break;
            case Func::ArgMin: b.lit("the least"); break;
            case Func::ArgMax: b.lit("the most"); break;
            case Func::GreaterThan:
                b.lit("greater than");
                b.arg(act.args[0]);
                break;
            case Func::LessThan:
                b.lit("lesser than");
                b.arg(act.args[0]);
                break;
            case Func::EqualTo:
                b.lit("equal to");
                b.arg(act.args[0]);
                break;
            case Func::AtLeast:
                b.lit("atleast");
                b.arg(act.args[0]);
                break;
            case Func::AtMost:
                b.lit("atmost");
                b.arg(act.args[0]);
                break;
            case Func::Around:
                b.lit("around");
                b.arg(act.args[0]);
                break;
            case Func::Exactly:
                b.lit("exactly");
                b.arg(act.args[0]);
                break;
            case Func::Count: b.lit("how many"); break;
        }
    }
}

}  // namespace

RealizedQuestion realize_question(const KnowledgeGraph& kg, const ActionSequence& seq) {
    TextBuilder b{kg, {}, {}};
    if (seq.actions.empty()) return b.finish();

    ActionSequence base = seq;
    bool how_many = false;
    if (base.actions.size() >= 2 && base.actions.back().func == Func::Count) {
        how_many = true;
        base.actions.pop_back();
    }
    if (realize_table(b, base, how_many)) return b.finish();

    TextBuilder fb{kg, {}, {}};
    realize_fallback(fb, seq);
    return fb.finish();
}

// ---- Question generation ----

namespace {

struct RelationInfo {
    std::string id;
    std::string domain;
    std::string range;
    std::vector<std::string> subjects;  // domain entities with nonempty image
    std::map<std::string, std::set<std::string>> image;
};

std::vector<RelationInfo> infer_relations(const KnowledgeGraph& kg) {
    std::vector<RelationInfo> out;
    for (const auto& r : kg.relations()) {
        std::set<std::string> domains;
        std::set<std::string> ranges;
        bool first = true;
        for (const auto& t : kg.triples()) {
            if (t.relation != r) continue;
            const auto& st = kg.type_of(t.subject);
            const auto& ot = kg.type_of(t.object);
            if (first) {
                domains = st;
                ranges = ot;
                first = false;
            } else {
                std::set<std::string> d2, r2;
                std::set_intersection(domains.begin(), domains.end(), st.begin(), st.end(),
                                      std::inserter(d2, d2.begin()));
                std::set_intersection(ranges.begin(), ranges.end(), ot.begin(), ot.end(),
                                      std::inserter(r2, r2.begin()));
                domains = std::move(d2);
                ranges = std::move(r2);
            }
        }
        if (first || domains.empty() || ranges.empty()) continue;
        RelationInfo info;
        info.id = r;
        info.domain = *domains.begin();
        info.range = *ranges.begin();
        for (const auto& s : kg.entities_of_type(info.domain)) {
            auto img = kg.neighbors(s, r, info.range);
            if (!img.empty()) {
                info.subjects.push_back(s);
                info.image[s] = std::move(img);
            }
        }
        if (!info.subjects.empty()) out.push_back(std::move(info));
    }
    return out;
}

Artifact ent(const std::string& id) { return Artifact{ArtifactKind::Entity, id, 0, 0}; }
Artifact typ(const std::string& id) { return Artifact{ArtifactKind::Type, id, 0, 0}; }
Artifact rel(const std::string& id) { return Artifact{ArtifactKind::Relation, id, 0, 0}; }
Artifact num(long long v) { return Artifact{ArtifactKind::Constant, std::to_string(v), 0, 0}; }

Action act(Func f, std::vector<Artifact> args = {}) { return Action{f, std::move(args)}; }

}  // namespace

GenResult generate_questions(const KnowledgeGraph& kg, const BenchConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
    const ExecOptions opts{cfg.around_tolerance};

    const auto relations = infer_relations(kg);
    if (relations.empty()) throw Error("graph has no usable relations");

    std::map<std::string, int> counts = cfg.per_category;
    if (counts.empty()) {
        for (const auto& c : question_categories()) counts[c] = 60;
    }

    GenResult result;
    int id_counter = 0;

    auto try_build = [&](const ActionSequence& raw, const std::string& category)
        -> std::optional<QuestionRecord> {
        if (!type_check(raw).ok) return std::nullopt;
        auto realized = realize_question(kg, raw);
        ActionSequence resolved;
        try {
            resolved = parse_sequence(serialize_sequence(raw), realized.artifacts);
        } catch (const Error&) {
            return std::nullopt;
        }
        QuestionRecord q;
        q.text = realized.text;
        q.category = category;
        q.artifacts = realized.artifacts;
        q.gold_answer = execute(kg, resolved, opts);
        q.gold_sequence = resolved;
        return q;
    };

    auto nonempty = [](const Answer& a) {
        switch (a.tag) {
            case Answer::Tag::Entities: return !a.entities.empty();
            case Answer::Tag::Number: return a.number > 0;
            case Answer::Tag::Booleans: return !a.booleans.empty();
        }
        return false;
    };

    // Samplers return a candidate gold sequence or nullopt when the draw is
    // structurally impossible on this graph.
    auto sample_simple = [&]() -> std::optional<ActionSequence> {
        const auto& r = relations[pick(rng, relations.size())];
        const auto& s = pick_one(rng, r.subjects);
        ActionSequence seq;
        seq.actions = {act(Func::Select, {ent(s), rel(r.id), typ(r.range)})};
        return seq;
    };

    auto sample_logical = [&]() -> std::optional<ActionSequence> {
        const auto& r = relations[pick(rng, relations.size())];
        if (r.subjects.size() < 2) return std::nullopt;
        const auto& s1 = pick_one(rng, r.subjects);
        const auto& s2 = pick_one(rng, r.subjects);
        if (s1 == s2) return std::nullopt;
        const Func op = std::array{Func::Union, Func::Inter, Func::Diff}[pick(rng, 3)];
        ActionSequence seq;
        seq.actions = {act(Func::Select, {ent(s1), rel(r.id), typ(r.range)}),
                       act(Func::Select, {ent(s2), rel(r.id), typ(r.range)}), act(op)};
        return seq;
    };

    auto sample_verification = [&](bool double_bool) -> std::optional<ActionSequence> {
        const auto& r = relations[pick(rng, relations.size())];
        const auto& s = pick_one(rng, r.subjects);
        const auto& range_entities = kg.entities_of_type(r.range);
        std::vector<std::string> pool(range_entities.begin(), range_entities.end());
        const auto& image = r.image.at(s);
        // Bias candidates toward the image half the time so both outcomes occur.
        auto pick_candidate = [&]() -> std::string {
            if (!image.empty() && rng() % 2 == 0) {
                auto it = image.begin();
                std::advance(it, (long)pick(rng, image.size()));
                return *it;
            }
            return pool[pick(rng, pool.size())];
        };
        const std::string x = pick_candidate();
        ActionSequence seq;
        seq.actions = {act(Func::Select, {ent(s), rel(r.id), typ(r.range)}),
                       act(Func::Bool, {ent(x)})};
        if (double_bool) {
            std::string y = pick_candidate();
            if (y == x) return std::nullopt;
            seq.actions.push_back(act(Func::Bool, {ent(y)}));
        }
        return seq;
    };

    auto observed_cardinality = [&](const RelationInfo& r) {
        const auto& s = pick_one(rng, r.subjects);
        return (long long)r.image.at(s).size();
    };

    auto sample_quantitative = [&]() -> std::optional<ActionSequence> {
        const auto& r = relations[pick(rng, relations.size())];
        if (r.subjects.size() < 2) return std::nullopt;
        const Func variant = std::array{Func::AtLeast, Func::AtMost, Func::Exactly,
                                        Func::Around, Func::ArgMin, Func::ArgMax}[pick(rng, 6)];
        ActionSequence seq;
        seq.actions = {act(Func::SelectAll, {typ(r.domain), rel(r.id), typ(r.range)})};
        if (variant == Func::ArgMin || variant == Func::ArgMax) {
            seq.actions.push_back(act(variant));
        } else {
            seq.actions.push_back(act(variant, {num(observed_cardinality(r))}));
        }
        return seq;
    };

    auto sample_comparative = [&]() -> std::optional<ActionSequence> {
        const auto& r = relations[pick(rng, relations.size())];
        if (r.subjects.size() < 3) return std::nullopt;
        const Func variant =
            std::array{Func::GreaterThan, Func::LessThan, Func::EqualTo}[pick(rng, 3)];
        const auto& pivot = pick_one(rng, r.subjects);
        ActionSequence seq;
        seq.actions = {act(Func::SelectAll, {typ(r.domain), rel(r.id), typ(r.range)}),
                       act(variant, {ent(pivot)})};
        return seq;
    };

    auto with_count = [](std::optional<ActionSequence> base) -> std::optional<ActionSequence> {
        if (!base) return std::nullopt;
        base->actions.push_back(Action{Func::Count, {}});
        return base;
    };

    auto sample_quantitative_count = [&]() -> std::optional<ActionSequence> {
        switch (pick(rng, 4)) {
            case 0: return with_count(sample_simple());
            case 1: return with_count(sample_logical());
            case 2: {
                auto q = sample_quantitative();
                if (!q) return std::nullopt;
                const Func f = q->actions[1].func;
                if (f == Func::ArgMin || f == Func::ArgMax) return std::nullopt;
                return with_count(std::move(q));
            }
            default: return with_count(sample_quantitative());
        }
    };

    auto sample_comparative_count = [&]() -> std::optional<ActionSequence> {
        auto q = sample_comparative();
        if (!q) return std::nullopt;
        if (q->actions[1].func == Func::EqualTo && rng() % 2) return std::nullopt;
        return with_count(std::move(q));
    };

    for (const auto& category : question_categories()) {
        auto it = counts.find(category);
        if (it == counts.end() || it->second <= 0) continue;
        const int want = it->second;
        std::vector<QuestionRecord> made;
        int attempts_left = want * 80;
        while ((int)made.size() < want && attempts_left-- > 0) {
            std::optional<ActionSequence> raw;
            if (category == "simple") raw = sample_simple();
            else if (category == "logical") raw = sample_logical();
            else if (category == "verification") raw = sample_verification(rng() % 4 != 0);
            else if (category == "quantitative") raw = sample_quantitative();
            else if (category == "comparative") raw = sample_comparative();
            else if (category == "quantitative_count") raw = sample_quantitative_count();
            else raw = sample_comparative_count();
            if (!raw) continue;
            auto q = try_build(*raw, category);
            if (!q) continue;
            if (q->category != "verification" && !nonempty(q->gold_answer)) continue;
            made.push_back(std::move(*q));
        }
        if ((int)made.size() < want) result.skipped += want - (int)made.size();

        // Stratified split within the category.
        std::shuffle(made.begin(), made.end(), rng);
        const int n = (int)made.size();
        int n_dev = std::max(1, (int)std::lround(n * cfg.dev_ratio));
        int n_test = std::max(1, (int)std::lround(n * cfg.test_ratio));
        if (n_dev + n_test >= n) throw Error("category too small to split: " + category);
        for (int i = 0; i < n; ++i) {
            made[(size_t)i].split =
                i < n - n_dev - n_test ? "train" : (i < n - n_test ? "dev" : "test");
        }
        for (auto& q : made) {
            char buf[16];
            std::snprintf(buf, sizeof buf, "q%05d", id_counter++);
            q.id = buf;
            result.records.push_back(std::move(q));
        }
    }
    return result;
}

}  // namespace kgqa
