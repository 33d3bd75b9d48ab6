#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "kgqa/retrieval.hpp"

using namespace kgqa;
using kgqa_test::art;
using kgqa_test::make_action;

TEST_CASE("mask_question replaces entity, type, and constant spans") {
    //                0         1         2         3         4
    //                0123456789012345678901234567890123456789012345678
    std::string text = "does amber stone play the instruments coral glen";
    ArgumentSet args;
    args.items = {art(ArtifactKind::Entity, "e0", 5, 16),
                  art(ArtifactKind::Relation, "r0", 17, 21),
                  art(ArtifactKind::Type, "t0", 26, 37),
                  art(ArtifactKind::Entity, "e1", 38, 48)};
    CHECK(join_tokens(mask_question(text, args)) ==
          "does [ENTITY] play the [TYPE] [ENTITY]");
}

TEST_CASE("mask_question: no artifacts leaves the text unchanged") {
    const std::string text = "plain words only";
    CHECK(join_tokens(mask_question(text, ArgumentSet{})) == text);
}

TEST_CASE("mask_question: constants and overlap detection") {
    std::string text = "exactly 20 people";
    ArgumentSet args;
    args.items = {art(ArtifactKind::Constant, "20", 8, 10)};
    CHECK(join_tokens(mask_question(text, args)) == "exactly [CONSTANT] people");

    ArgumentSet overlapping;
    overlapping.items = {art(ArtifactKind::Entity, "a", 0, 9),
                         art(ArtifactKind::Entity, "b", 5, 12)};
    CHECK_THROWS_WITH_AS(mask_question(text, overlapping), doctest::Contains("overlap"), Error);
}

TEST_CASE("similarity fixtures") {
    const auto ant = AntonymTable::defaults();
    const auto a = tokenize("which [TYPE] does [ENTITY] play");
    CHECK(similarity(a, a, ant) == 1.0);

    CHECK(similarity(tokenize("a b c"), tokenize("a x c"), ant) ==
          doctest::Approx(1.0 - 1.0 / 3.0));

    CHECK(similarity(tokenize("atleast 3 things"), tokenize("atmost 3 things"), ant) == 0.0);
    CHECK(similarity(tokenize("lesser than x"), tokenize("greater than x"), ant) == 0.0);
    CHECK(similarity({}, {}, ant) == 1.0);
}

TEST_CASE("similarity properties: symmetry and range") {
    const auto ant = AntonymTable::defaults();
    std::mt19937_64 rng(23);
    const std::vector<std::string> words = {"a", "b", "c", "d", "e"};
    for (int trial = 0; trial < 60; ++trial) {
        std::vector<std::string> m1, m2;
        for (size_t i = 0; i < rng() % 8; ++i) m1.push_back(words[rng() % words.size()]);
        for (size_t i = 0; i < rng() % 8; ++i) m2.push_back(words[rng() % words.size()]);
        const double d12 = similarity(m1, m2, ant);
        CHECK(d12 == similarity(m2, m1, ant));
        CHECK(d12 >= 0.0);
        CHECK(d12 <= 1.0);
    }
}

TEST_CASE("antonym table round-trip") {
    const std::string path = "kgqa_test_antonyms.txt";
    AntonymTable::defaults().save(path);
    const auto loaded = AntonymTable::load(path);
    CHECK(loaded.pairs == AntonymTable::defaults().pairs);
    std::remove(path.c_str());
}

namespace {

QuestionRecord memory_question(const std::string& id, const std::string& text) {
    QuestionRecord q;
    q.id = id;
    q.text = text;
    q.gold_answer = Answer::of_entities({"x"});
    q.split = "train";
    return q;
}

}  // namespace

TEST_CASE("retrieve: self-match first, threshold filter, top-k cut") {
    const auto ant = AntonymTable::defaults();
    std::vector<QuestionRecord> records = {
        memory_question("m0", "which things does it play now"),   // the query itself
        memory_question("m1", "which things does it play still"), // close
        memory_question("m2", "which things does it hide still"), // farther
        memory_question("m3", "totally different sentence content entirely"),
    };
    const auto memory = Memory::build(records);

    auto support = retrieve(memory, records[0], 3, 0.6, ant);
    REQUIRE(!support.empty());
    CHECK(support[0].item->question.id == "m0");
    CHECK(support[0].similarity == 1.0);
    for (size_t i = 1; i < support.size(); ++i)
        CHECK(support[i - 1].similarity >= support[i].similarity);
    for (const auto& s : support) CHECK(s.similarity >= 0.6);

    // Threshold high enough to exclude everything but the exact match.
    auto strict = retrieve(memory, records[0], 3, 1.0, ant);
    CHECK(strict.size() == 1);

    QuestionRecord stranger = memory_question("q", "zebra quantum fjord xylophone");
    CHECK(retrieve(memory, stranger, 3, 0.6, ant).empty());
}

TEST_CASE("memory JSONL round-trip") {
    std::vector<QuestionRecord> records = {memory_question("m0", "alpha beta gamma")};
    records[0].artifacts.items = {art(ArtifactKind::Entity, "e0", 0, 5)};
    const auto memory = Memory::build(records);
    const std::string path = "kgqa_test_memory.jsonl";
    memory.save(path);
    const auto loaded = Memory::load(path);
    REQUIRE(loaded.items.size() == 1);
    CHECK(loaded.items[0].masked == memory.items[0].masked);
    CHECK(loaded.items[0].answer == memory.items[0].answer);
    CHECK(loaded.items[0].question.artifacts.items.size() == 1);
    std::remove(path.c_str());
}

namespace {

ArgumentSet args_of(std::vector<Artifact> items) {
    ArgumentSet a;
    a.items = std::move(items);
    return a;
}

}  // namespace

TEST_CASE("adjust_candidate: matching counts give exactly one sequence") {
    const auto src = args_of({art(ArtifactKind::Entity, "e0"), art(ArtifactKind::Relation, "r0"),
                              art(ArtifactKind::Type, "t0")});
    const auto tgt = args_of({art(ArtifactKind::Entity, "e9"), art(ArtifactKind::Relation, "r9"),
                              art(ArtifactKind::Type, "t9")});
    ActionSequence cand;
    cand.actions = {make_action(Func::Select, {src[0], src[1], src[2]})};
    const auto adjusted = adjust_candidate(cand, src, tgt);
    REQUIRE(adjusted.size() == 1);
    CHECK(serialize_sequence(adjusted[0]) == "Select(e:e9, r:r9, t:t9)");
}

TEST_CASE("adjust_candidate: two relation slots permute both ways") {
    const auto src = args_of({art(ArtifactKind::Entity, "e0"), art(ArtifactKind::Relation, "ra"),
                              art(ArtifactKind::Relation, "rb"), art(ArtifactKind::Type, "t0")});
    const auto tgt = args_of({art(ArtifactKind::Entity, "e9"), art(ArtifactKind::Relation, "r1"),
                              art(ArtifactKind::Relation, "r2"), art(ArtifactKind::Type, "t9")});
    ActionSequence cand;
    cand.actions = {make_action(Func::Select, {src[0], src[1], src[3]}),
                    make_action(Func::Select, {src[0], src[2], src[3]}),
                    make_action(Func::Union)};
    const auto adjusted = adjust_candidate(cand, src, tgt);
    REQUIRE(adjusted.size() == 2);
    std::set<std::string> got = {serialize_sequence(adjusted[0]),
                                 serialize_sequence(adjusted[1])};
    CHECK(got.count("Select(e:e9, r:r1, t:t9) # Select(e:e9, r:r2, t:t9) # Union()") == 1);
    CHECK(got.count("Select(e:e9, r:r2, t:t9) # Select(e:e9, r:r1, t:t9) # Union()") == 1);
}

TEST_CASE("adjust_candidate: entity count mismatch is inapplicable") {
    const auto src = args_of({art(ArtifactKind::Entity, "e0"), art(ArtifactKind::Entity, "e1"),
                              art(ArtifactKind::Relation, "r0"), art(ArtifactKind::Type, "t0")});
    const auto tgt = args_of({art(ArtifactKind::Entity, "e9"), art(ArtifactKind::Relation, "r9"),
                              art(ArtifactKind::Type, "t9")});
    ActionSequence cand;
    cand.actions = {make_action(Func::Select, {src[0], src[2], src[3]}),
                    make_action(Func::Select, {src[1], src[2], src[3]}),
                    make_action(Func::Union)};
    CHECK(adjust_candidate(cand, src, tgt).empty());
}

TEST_CASE("adjust_candidate: identity when src equals tgt") {
    const auto src = args_of({art(ArtifactKind::Entity, "e0"), art(ArtifactKind::Relation, "r0"),
                              art(ArtifactKind::Type, "t0")});
    ActionSequence cand;
    cand.actions = {make_action(Func::Select, {src[0], src[1], src[2]})};
    const auto adjusted = adjust_candidate(cand, src, src);
    REQUIRE(adjusted.size() == 1);
    CHECK(adjusted[0] == cand);
}

namespace {

// Current question p0 with two object types; supports are p1 (no J-objects)
// and p2 (one I-object, eight J-objects).
struct SelectionFixture {
    KnowledgeGraph kg;
    QuestionRecord q, q1, q2;
    Memory memory;
    Candidate correct, wrong;
};

SelectionFixture selection_fixture() {
    KgBuilder b;
    b.add_type("P", "people").add_type("I", "reeds").add_type("J", "strings");
    b.add_relation("r0", "play");
    b.add_entity("p0", {"P"}, "amber stone");
    b.add_entity("p1", {"P"}, "violet creek");
    b.add_entity("p2", {"P"}, "coral glen");
    b.add_entity("a1", {"I"}, "oboe");
    b.add_entity("b1", {"J"}, "viola");
    b.add_entity("c1", {"I"}, "shawm");
    b.add_entity("c2", {"I"}, "bassoon");
    b.add_entity("d1", {"I"}, "crumhorn");
    for (int i = 0; i < 8; ++i)
        b.add_entity("f" + std::to_string(i), {"J"}, "string" + std::to_string(i));
    b.add_triple("p0", "r0", "a1").add_triple("p0", "r0", "b1");
    b.add_triple("p1", "r0", "c1").add_triple("p1", "r0", "c2");
    b.add_triple("p2", "r0", "d1");
    for (int i = 0; i < 8; ++i) b.add_triple("p2", "r0", "f" + std::to_string(i));

    SelectionFixture fx{b.build(), {}, {}, {}, {}, {}};

    auto question = [&](const std::string& id, const std::string& ent,
                        const Answer& answer) {
        QuestionRecord q;
        q.id = id;
        q.text = "which reeds or strings does " + fx.kg.label(ent) + " play";
        q.artifacts.items = {art(ArtifactKind::Type, "I", 6, 11),
                             art(ArtifactKind::Type, "J", 15, 22),
                             art(ArtifactKind::Entity, ent, 28, 28 + (int)fx.kg.label(ent).size()),
                             art(ArtifactKind::Relation, "r0", 0, 0)};
        q.gold_answer = answer;
        q.split = "train";
        return q;
    };
    fx.q = question("q0", "p0", Answer::of_entities({"a1", "b1"}));
    fx.q1 = question("q1", "p1", Answer::of_entities({"c1", "c2"}));
    fx.q2 = question("q2", "p2",
                     Answer::of_entities({"d1", "f0", "f1", "f2", "f3", "f4", "f5", "f6", "f7"}));

    auto seq = [&](const std::string& text) { return parse_sequence(text, fx.q.artifacts); };
    fx.correct.sequence =
        seq("Select(e:p0, r:r0, t:I) # Select(e:p0, r:r0, t:J) # Union()");
    fx.correct.log_prob = std::log(0.3519);
    fx.wrong.sequence = seq("Select(e:p0, r:r0, t:I) # Select(e:p0, r:r0, t:I) # Union()");
    fx.wrong.log_prob = std::log(0.6085);
    return fx;
}

SupportSet fixture_support(const Memory& memory) {
    SupportSet s;
    s.push_back(SupportItem{&memory.items[0], 1.0});
    s.push_back(SupportItem{&memory.items[1], 0.5});
    return s;
}

}  // namespace

TEST_CASE("score_candidate: weighted mean of ones is one") {
    auto fx = selection_fixture();
    fx.memory = Memory::build({fx.q1, fx.q2});
    const auto support = fixture_support(fx.memory);
    const auto score = score_candidate(fx.kg, fx.correct, fx.q.artifacts, support);
    CHECK(score.rewards == std::vector<double>{1.0, 1.0});
    CHECK(score.score == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("score_candidate: weighted selection arithmetic is exact") {
    auto fx = selection_fixture();
    fx.memory = Memory::build({fx.q1, fx.q2});
    const auto support = fixture_support(fx.memory);
    const auto score = score_candidate(fx.kg, fx.wrong, fx.q.artifacts, support);
    // Support 1: p1 has no J-objects, so the wrong candidate still matches (r = 1).
    // Support 2: overlap 1 of pred 1 vs gold 9 -> F1 = 0.2.
    CHECK(score.rewards[0] == 1.0);
    CHECK(std::abs(score.rewards[1] - 0.2) < 1e-12);
    CHECK(std::abs(score.score - (1.0 * 1.0 + 0.5 * 0.2) / 1.5) < 1e-12);
    CHECK(std::abs(score.score - 0.7333333333333334) < 1e-12);
}

TEST_CASE("score_candidate: d = (1.0, 0.5), r = (1, 0) gives 2/3") {
    auto fx = selection_fixture();
    // Make support 2 an impossible target (mismatched counts force r = 0) by
    // dropping its J type artifact.
    QuestionRecord q2 = fx.q2;
    q2.artifacts.items.erase(q2.artifacts.items.begin() + 1);
    fx.memory = Memory::build({fx.q1, q2});
    const auto support = fixture_support(fx.memory);
    const auto score = score_candidate(fx.kg, fx.correct, fx.q.artifacts, support);
    CHECK(score.rewards == std::vector<double>{1.0, 0.0});
    CHECK(std::abs(score.score - 1.0 / 1.5) < 1e-12);
}

TEST_CASE("selection weighting is scale-invariant and monotone") {
    auto fx = selection_fixture();
    fx.memory = Memory::build({fx.q1, fx.q2});
    auto support = fixture_support(fx.memory);
    const double base = score_candidate(fx.kg, fx.wrong, fx.q.artifacts, support).score;
    for (auto& item : support) item.similarity *= 3.0;
    const double scaled = score_candidate(fx.kg, fx.wrong, fx.q.artifacts, support).score;
    CHECK(std::abs(base - scaled) < 1e-12);
    // Monotonicity: the candidate with pointwise-higher rewards scores higher.
    const double better = score_candidate(fx.kg, fx.correct, fx.q.artifacts, support).score;
    CHECK(better >= scaled);
}

TEST_CASE("select: correct candidate wins despite lower log-probability") {
    auto fx = selection_fixture();
    fx.memory = Memory::build({fx.q1, fx.q2});
    const auto support = fixture_support(fx.memory);
    const std::vector<Candidate> cands = {fx.wrong, fx.correct};  // beam order
    const auto res = select_candidate(fx.kg, cands, fx.q.artifacts, support);
    CHECK(res.index == 1);
    CHECK(std::abs(res.scores[0].score - 0.7333333333333334) < 1e-12);
    CHECK(std::abs(res.scores[1].score - 1.0) < 1e-12);

    // Order invariance.
    const std::vector<Candidate> flipped = {fx.correct, fx.wrong};
    CHECK(select_candidate(fx.kg, flipped, fx.q.artifacts, support).index == 0);
}

TEST_CASE("select: empty support falls back to the top beam candidate") {
    auto fx = selection_fixture();
    const std::vector<Candidate> cands = {fx.wrong, fx.correct};
    const auto res = select_candidate(fx.kg, cands, fx.q.artifacts, {});
    CHECK(res.index == 0);  // highest log-probability
    CHECK(res.scores.empty());
}

TEST_CASE("select: single candidate is chosen") {
    auto fx = selection_fixture();
    fx.memory = Memory::build({fx.q1});
    SupportSet support = {SupportItem{&fx.memory.items[0], 1.0}};
    const auto res = select_candidate(fx.kg, {fx.correct}, fx.q.artifacts, support);
    CHECK(res.index == 0);
}

TEST_CASE("relation permutation cap raises an error") {
    ArgumentSet src, tgt;
    for (int i = 0; i < 7; ++i) {
        src.items.push_back(art(ArtifactKind::Relation, "s" + std::to_string(i)));
        tgt.items.push_back(art(ArtifactKind::Relation, "t" + std::to_string(i)));
    }
    ActionSequence cand;
    cand.actions = {make_action(Func::Count)};
    CHECK_THROWS_WITH_AS(adjust_candidate(cand, src, tgt), doctest::Contains("cap"), Error);
}
