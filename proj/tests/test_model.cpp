#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "kgqa/model.hpp"

using namespace kgqa;
using kgqa_test::art;
using kgqa_test::make_action;

namespace {

struct TinyWorld {
    KnowledgeGraph kg;
    QuestionRecord q;
    ModelParams model;
    CompiledExample ex;  // with gold target
};

TinyWorld tiny_world(int dim = 8, std::uint64_t seed = 3) {
    KgBuilder b;
    b.add_type("I", "instruments").add_type("P", "people");
    b.add_relation("r", "play");
    b.add_entity("p0", {"P"}, "amber stone");
    b.add_entity("i0", {"I"}, "viola");
    b.add_entity("i1", {"I"}, "oboe");
    b.add_triple("p0", "r", "i0").add_triple("p0", "r", "i1");
    TinyWorld w{b.build(), {}, ModelParams{}, {}};

    w.q.id = "t0";
    w.q.text = "which instruments does amber stone play";
    w.q.artifacts.items = {art(ArtifactKind::Type, "I", 6, 17),
                           art(ArtifactKind::Entity, "p0", 23, 34),
                           art(ArtifactKind::Relation, "r", 35, 39)};
    w.q.gold_answer = Answer::of_entities({"i0", "i1"});
    Vocab vocab = Vocab::build({w.q.text, "instruments amber stone play <sep> #"});
    ModelConfig cfg;
    cfg.d_e = dim;
    cfg.d_h = dim;
    cfg.d_s = dim;
    cfg.d_tau = dim / 2;
    cfg.seed = seed;
    w.model = ModelParams::init(cfg, std::move(vocab));

    w.ex.question_id = w.q.id;
    w.ex.tokens = w.model.vocab.encode_text(w.q.text);
    w.ex.arg_tokens = {w.model.vocab.encode_text("instruments"),
                       w.model.vocab.encode_text("amber stone"),
                       w.model.vocab.encode_text("play")};
    w.ex.args = w.q.artifacts;
    ActionSequence gold;
    gold.actions = {make_action(Func::Select,
                                {w.q.artifacts[1], w.q.artifacts[2], w.q.artifacts[0]})};
    w.ex.target = compile_target(gold, w.q.artifacts);
    return w;
}

}  // namespace

TEST_CASE("vocab: build, lookup, unknown fallback") {
    const Vocab v = Vocab::build({"a b c", "b d"});
    CHECK(v.size() == 5);  // <unk> a b c d
    CHECK(v.id("a") == 1);
    CHECK(v.id("zzz") == 0);
    CHECK(v.encode_text("a d zzz") == std::vector<int>{1, 4, 0});
}

TEST_CASE("encode: argument embeddings are token means") {
    auto w = tiny_world();
    const auto enc = encode(w.model, w.ex.tokens, w.ex.arg_tokens);
    CHECK(enc.H.rows() == (Eigen::Index)w.ex.tokens.size());
    CHECK(enc.H.cols() == w.model.cfg.d_h);
    CHECK(enc.EG.rows() == 3);

    // Single-token argument: the embedding row itself.
    const int tok = w.ex.arg_tokens[0][0];
    CHECK((enc.EG.row(0) - w.model.t.embedding.row(tok)).norm() == 0.0);

    // Two-token argument: arithmetic mean.
    const int u = w.ex.arg_tokens[1][0], v = w.ex.arg_tokens[1][1];
    const Mat mean = (w.model.t.embedding.row(u) + w.model.t.embedding.row(v)) / 2.0;
    CHECK((enc.EG.row(1) - mean).norm() < 1e-15);
}

TEST_CASE("encode: unknown token id and empty inputs are errors") {
    auto w = tiny_world();
    CHECK_THROWS_WITH_AS(encode(w.model, {99999}, w.ex.arg_tokens),
                         doctest::Contains("unknown token"), Error);
    CHECK_THROWS_AS(encode(w.model, {}, w.ex.arg_tokens), Error);
    CHECK_THROWS_AS(encode(w.model, w.ex.tokens, {}), Error);
}

TEST_CASE("decode_step: zero attention weights give uniform attention") {
    auto w = tiny_world();
    w.model.t.w_attn.setZero();
    const auto enc = encode(w.model, w.ex.tokens, w.ex.arg_tokens);
    const auto [dist, state] = decode_step(w.model, initial_decoder_state(w.model), -1, 0, enc);
    const double uniform = 1.0 / (double)w.ex.tokens.size();
    for (Eigen::Index i = 0; i < dist.alpha.size(); ++i)
        CHECK(dist.alpha(i) == doctest::Approx(uniform));
}

TEST_CASE("decode_step: single argument makes the dynamic distribution a point mass") {
    auto w = tiny_world();
    const auto enc = encode(w.model, w.ex.tokens, {w.ex.arg_tokens[0]});
    const auto [dist, state] = decode_step(w.model, initial_decoder_state(w.model), -1, 0, enc);
    REQUIRE(dist.p_dyn.size() == 1);
    CHECK(dist.p_dyn(0) == 1.0);
}

TEST_CASE("decode_step: distributions sum to one within 1e-9") {
    auto w = tiny_world();
    const auto enc = encode(w.model, w.ex.tokens, w.ex.arg_tokens);
    std::mt19937_64 rng(31);
    DecoderState state = initial_decoder_state(w.model);
    for (int step = 0; step < 200; ++step) {
        const int prev_token =
            step == 0 ? -1 : (int)(rng() % (std::uint64_t)(kFixedVocab + 3));
        const int prev_kind = prev_token >= kFixedVocab ? 1 : 0;
        auto [dist, next] = decode_step(w.model, state, prev_token, prev_kind, enc);
        CHECK(std::abs(dist.p_fix.sum() - 1.0) < 1e-9);
        CHECK(std::abs(dist.p_dyn.sum() - 1.0) < 1e-9);
        CHECK(std::abs(dist.alpha.sum() - 1.0) < 1e-9);
        CHECK(std::abs(dist.mixed.sum() - 1.0) < 1e-9);
        CHECK(dist.gate > 0.0);
        CHECK(dist.gate < 1.0);
        state = next;
    }
}

TEST_CASE("sequence builder masks type-invalid tokens") {
    auto w = tiny_world();
    SequenceBuilder sb(w.q.artifacts, 4);
    auto valid = sb.valid_tokens();
    // No eos before any action; Count/Union etc. are stack-invalid.
    CHECK(std::find(valid.begin(), valid.end(), kEosToken) == valid.end());
    CHECK(std::find(valid.begin(), valid.end(), (int)Func::Count) == valid.end());
    CHECK(std::find(valid.begin(), valid.end(), (int)Func::Select) != valid.end());

    sb.apply((int)Func::Select);
    valid = sb.valid_tokens();  // expects an entity argument
    REQUIRE(valid.size() == 1);
    CHECK(valid[0] == kFixedVocab + 1);  // the only entity artifact

    sb.apply(kFixedVocab + 1);
    valid = sb.valid_tokens();  // expects a relation
    REQUIRE(valid.size() == 1);
    CHECK(valid[0] == kFixedVocab + 2);
    sb.apply(kFixedVocab + 2);
    sb.apply(kFixedVocab + 0);  // the type
    CHECK(sb.sequence().size() == 1);
    valid = sb.valid_tokens();
    CHECK(std::find(valid.begin(), valid.end(), kEosToken) != valid.end());
    sb.apply(kEosToken);
    CHECK(sb.finished());
}

TEST_CASE("beam search: beam 1 equals greedy decoding") {
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        auto w = tiny_world(8, seed);
        const auto greedy = greedy_decode(w.model, w.ex);
        const auto beam = beam_search(w.model, w.ex, 1, 1);
        REQUIRE(greedy.has_value());
        REQUIRE(beam.size() == 1);
        CHECK(serialize_sequence(greedy->sequence) == serialize_sequence(beam[0].sequence));
        CHECK(greedy->log_prob == doctest::Approx(beam[0].log_prob).epsilon(1e-12));
    }
}

namespace {

// Exhaustive enumeration of every finishable token path: an independent
// ranking oracle for beam search.
void enumerate_paths(const ModelParams& p, const EncoderOutput& enc, const DecoderState& state,
                     SequenceBuilder builder, double logp, int emitted, int max_tokens,
                     std::vector<Candidate>& out) {
    if (builder.finished()) {
        out.push_back(Candidate{builder.sequence(), logp / (double)emitted});
        return;
    }
    if (emitted >= max_tokens) return;
    const auto valid = builder.valid_tokens();
    if (valid.empty()) return;
    auto [dist, next] = decode_step(p, state, builder.last_token(), builder.last_kind(), enc);
    double z = 0.0;
    for (int v : valid) z += dist.mixed((Eigen::Index)v);
    for (int v : valid) {
        SequenceBuilder child = builder;
        child.apply(v);
        enumerate_paths(p, enc, next, std::move(child),
                        logp + std::log(dist.mixed((Eigen::Index)v) / z), emitted + 1,
                        max_tokens, out);
    }
}

}  // namespace

TEST_CASE("beam search ranks like exhaustive enumeration") {
    auto w = tiny_world(8, 11);
    w.model.cfg.max_actions = 2;  // keep the path space small
    const auto enc = encode(w.model, w.ex.tokens, w.ex.arg_tokens);
    std::vector<Candidate> all;
    enumerate_paths(w.model, enc, initial_decoder_state(w.model),
                    SequenceBuilder(w.q.artifacts, 2), 0.0, 0, 2 * 4 + 1, all);
    REQUIRE(!all.empty());
    std::sort(all.begin(), all.end(), [](const Candidate& a, const Candidate& b) {
        if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
        return serialize_sequence(a.sequence) < serialize_sequence(b.sequence);
    });
    const int n_best = std::min<int>(3, (int)all.size());
    const auto beam = beam_search(w.model, w.ex, 64, n_best);
    REQUIRE((int)beam.size() == n_best);
    for (int i = 0; i < n_best; ++i) {
        CHECK(serialize_sequence(beam[(size_t)i].sequence) ==
              serialize_sequence(all[(size_t)i].sequence));
        CHECK(beam[(size_t)i].log_prob == doctest::Approx(all[(size_t)i].log_prob));
    }
    // Enlarging the beam never lowers the top normalized score.
    const auto small = beam_search(w.model, w.ex, 2, 1);
    CHECK(beam[0].log_prob >= small[0].log_prob - 1e-12);
}

TEST_CASE("candidate log-probabilities are non-positive") {
    auto w = tiny_world(8, 13);
    for (const auto& c : beam_search(w.model, w.ex, 10, 5)) {
        CHECK(c.log_prob <= 0.0);
        CHECK(type_check(c.sequence).ok);
    }
}

TEST_CASE("pretrain: single pair is memorized") {
    auto w = tiny_world(12, 17);
    const auto losses = pretrain(w.model, {w.ex}, 60, 5e-3, 7);
    CHECK(losses.back() < losses.front());
    const auto greedy = greedy_decode(w.model, w.ex);
    REQUIRE(greedy.has_value());
    CHECK(compile_target(greedy->sequence, w.q.artifacts) == w.ex.target);
}

TEST_CASE("pretrain: loss is non-increasing over the first epochs of the smoke fixture") {
    auto w = tiny_world(12, 19);
    std::vector<CompiledExample> examples = {w.ex, w.ex, w.ex};
    const auto losses = pretrain(w.model, examples, 5, 1e-3, 7);
    for (size_t i = 1; i < losses.size(); ++i) CHECK(losses[i] <= losses[i - 1] + 1e-9);
}

TEST_CASE("pretrain: zero learning rate leaves parameters bit-identical") {
    auto w = tiny_world(8, 23);
    const TensorBag before = w.model.t;
    pretrain(w.model, {w.ex}, 3, 0.0, 7);
    bool identical = true;
    before.visit([&](const char* name, const auto& tensor) {
        w.model.t.visit([&](const char* name2, const auto& tensor2) {
            if (std::string(name) == name2 && (tensor - tensor2).cwiseAbs().maxCoeff() != 0.0)
                identical = false;
        });
    });
    CHECK(identical);
}

TEST_CASE("pretrain: empty example list is an error") {
    auto w = tiny_world();
    CHECK_THROWS_AS(pretrain(w.model, {}, 1, 1e-3, 7), Error);
}

TEST_CASE("adaptive reward: bonus, centering, EMA update") {
    BaselineState state;
    CHECK(adaptive_reward(1.0, state, "q") == doctest::Approx(1.5));
    CHECK(state.value["q"] == doctest::Approx(0.1));

    BaselineState state2;
    state2.value["q"] = 0.5;
    CHECK(adaptive_reward(0.5, state2, "q") == doctest::Approx(0.0));
}

TEST_CASE("reinforce: zero adjusted reward leaves parameters untouched") {
    auto w = tiny_world(8, 29);
    // Gold that no sampled sequence can match: reward 0, baseline 0.
    const Answer unreachable = Answer::of_entities({"ghost"});
    BaselineState baseline;
    AdamState adam;
    adam.lr = 1e-3;
    std::mt19937_64 rng(5);
    const TensorBag before = w.model.t;
    const auto res = reinforce_step(w.model, w.ex, w.kg, unreachable, baseline, adam, rng);
    CHECK(res.reward == 0.0);
    CHECK(res.adjusted == 0.0);
    std::vector<double> sums_before, sums_after;
    before.visit([&](const char*, const auto& t) { sums_before.push_back(t.sum()); });
    w.model.t.visit([&](const char*, const auto& t) { sums_after.push_back(t.sum()); });
    CHECK(sums_before == sums_after);
}

TEST_CASE("reinforce: full reward reinforces the sampled sequence") {
    auto w = tiny_world(8, 31);
    BaselineState baseline;
    AdamState adam;
    adam.lr = 1e-3;
    std::mt19937_64 rng(9);
    // Run until some sample hits reward 1 (the space is tiny).
    for (int i = 0; i < 50; ++i) {
        const auto res = reinforce_step(w.model, w.ex, w.kg, w.q.gold_answer, baseline, adam, rng);
        if (res.reward == 1.0) {
            CHECK(res.adjusted > 0.0);
            return;
        }
    }
    FAIL("no full-reward sample in 50 draws");
}

TEST_CASE("reinforce: seeded determinism") {
    auto run = [&]() {
        auto w = tiny_world(8, 37);
        BaselineState baseline;
        AdamState adam;
        adam.lr = 1e-3;
        std::mt19937_64 rng(17);
        std::string sampled;
        for (int i = 0; i < 5; ++i) {
            const auto res =
                reinforce_step(w.model, w.ex, w.kg, w.q.gold_answer, baseline, adam, rng);
            sampled += serialize_sequence(res.sampled) + ";";
        }
        double checksum = 0.0;
        w.model.t.visit([&](const char*, const auto& t) { checksum += t.sum(); });
        return std::make_pair(sampled, checksum);
    };
    const auto a = run();
    const auto b = run();
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
}

TEST_CASE("gradient check: analytic matches finite differences") {
    auto w = tiny_world(8, 41);
    // Two-action target exercises the argument-embedding path.
    ActionSequence gold;
    gold.actions = {make_action(Func::Select,
                                {w.q.artifacts[1], w.q.artifacts[2], w.q.artifacts[0]}),
                    make_action(Func::Count)};
    w.ex.target = compile_target(gold, w.q.artifacts);
    const double err = gradient_check(w.model, w.ex, 250, 1e-5, 43);
    CHECK(err < 1e-4);
}

TEST_CASE("gradient of an unused parameter is exactly zero") {
    auto w = tiny_world(8, 47);
    Gradients g = Gradients::zeros_like(w.model.t);
    sequence_loss(w.model, w.ex, &g, 1.0);
    // Embedding rows of tokens absent from the example stay untouched.
    std::set<int> used(w.ex.tokens.begin(), w.ex.tokens.end());
    for (const auto& at : w.ex.arg_tokens) used.insert(at.begin(), at.end());
    for (int row = 0; row < w.model.vocab.size(); ++row) {
        if (used.count(row)) continue;
        CHECK(g.embedding.row(row).cwiseAbs().maxCoeff() == 0.0);
    }
    // The <eos> row of w_func is never an input embedding.
    CHECK(g.w_func.row(kEosToken).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("checkpoint round-trip preserves behaviour") {
    auto w = tiny_world(8, 53);
    const std::string path = "kgqa_test_model.ckpt";
    w.model.save(path);
    const auto loaded = ModelParams::load(path);
    CHECK(loaded.vocab.tokens == w.model.vocab.tokens);
    const auto before = beam_search(w.model, w.ex, 5, 3);
    const auto after = beam_search(loaded, w.ex, 5, 3);
    REQUIRE(before.size() == after.size());
    for (size_t k = 0; k < before.size(); ++k) {
        CHECK(serialize_sequence(before[k].sequence) == serialize_sequence(after[k].sequence));
        CHECK(before[k].log_prob == after[k].log_prob);
    }
    std::remove(path.c_str());
}
