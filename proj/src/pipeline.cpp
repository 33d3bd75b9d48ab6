#include "kgqa/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace kgqa {

using json = nlohmann::json;

PipelineConfig PipelineConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open: " + path);
    json j;
    in >> j;
    PipelineConfig c;
    c.kg_path = j.value("kg_path", c.kg_path);
    c.dataset_path = j.value("dataset_path", c.dataset_path);
    c.checkpoint_path = j.value("checkpoint_path", c.checkpoint_path);
    c.corpus_path = j.value("corpus_path", c.corpus_path);
    c.memory_path = j.value("memory_path", c.memory_path);
    c.antonyms_path = j.value("antonyms_path", c.antonyms_path);
    c.beam = j.value("beam", c.beam);
    c.n_candidates = j.value("n_candidates", c.n_candidates);
    c.k = j.value("k", c.k);
    c.threshold = j.value("threshold", c.threshold);
    c.around_tolerance = j.value("around_tolerance", c.around_tolerance);
    c.seed = j.value("seed", c.seed);
    c.no_rewrite = j.value("no_rewrite", c.no_rewrite);
    c.no_select = j.value("no_select", c.no_select);
    c.model.d_e = j.value("d_e", c.model.d_e);
    c.model.d_h = j.value("d_h", c.model.d_h);
    c.model.d_s = j.value("d_s", c.model.d_s);
    c.model.d_tau = j.value("d_tau", c.model.d_tau);
    c.model.max_actions = j.value("max_actions", c.model.max_actions);
    c.model.init_scale = j.value("init_scale", c.model.init_scale);
    c.pretrain_epochs = j.value("pretrain_epochs", c.pretrain_epochs);
    c.pretrain_lr = j.value("pretrain_lr", c.pretrain_lr);
    c.rl_epochs = j.value("rl_epochs", c.rl_epochs);
    c.rl_lr = j.value("rl_lr", c.rl_lr);
    c.bfs_max_len = j.value("bfs_max_len", c.bfs_max_len);
    c.bfs_max_frontier = j.value("bfs_max_frontier", c.bfs_max_frontier);
    c.bfs_max_results = j.value("bfs_max_results", c.bfs_max_results);
    c.bfs_min_reward = j.value("bfs_min_reward", c.bfs_min_reward);
    c.model.seed = c.seed;
    return c;
}

std::string PipelineConfig::canonical_json() const {
    json j;
    j["kg_path"] = kg_path;
    j["dataset_path"] = dataset_path;
    j["checkpoint_path"] = checkpoint_path;
    j["corpus_path"] = corpus_path;
    j["memory_path"] = memory_path;
    j["antonyms_path"] = antonyms_path;
    j["beam"] = beam;
    j["n_candidates"] = n_candidates;
    j["k"] = k;
    j["threshold"] = threshold;
    j["around_tolerance"] = around_tolerance;
    j["seed"] = seed;
    j["no_rewrite"] = no_rewrite;
    j["no_select"] = no_select;
    j["d_e"] = model.d_e;
    j["d_h"] = model.d_h;
    j["d_s"] = model.d_s;
    j["d_tau"] = model.d_tau;
    j["max_actions"] = model.max_actions;
    j["init_scale"] = model.init_scale;
    j["pretrain_epochs"] = pretrain_epochs;
    j["pretrain_lr"] = pretrain_lr;
    j["rl_epochs"] = rl_epochs;
    j["rl_lr"] = rl_lr;
    j["bfs_max_len"] = bfs_max_len;
    j["bfs_max_frontier"] = bfs_max_frontier;
    j["bfs_max_results"] = bfs_max_results;
    j["bfs_min_reward"] = bfs_min_reward;
    return j.dump();  // nlohmann emits object keys sorted
}

EvalReport compute_report(const std::vector<std::pair<std::string, double>>& per_question,
                          const std::string& config_hash) {
    EvalReport r;
    r.config_hash = config_hash;
    std::map<std::string, std::pair<int, double>> acc;  // count, sum
    double total_sum = 0.0;
    for (const auto& [cat, f1] : per_question) {
        auto& [count, sum] = acc[cat];
        ++count;
        sum += f1;
        total_sum += f1;
        ++r.total;
    }
    double macro_sum = 0.0;
    for (const auto& [cat, cs] : acc) {
        EvalReport::CategoryStats stats;
        stats.count = cs.first;
        stats.mean_f1 = cs.second / cs.first;
        macro_sum += stats.mean_f1;
        r.categories[cat] = stats;
    }
    r.macro = acc.empty() ? 0.0 : macro_sum / (double)acc.size();
    r.micro = r.total == 0 ? 0.0 : total_sum / (double)r.total;
    return r;
}

std::string EvalReport::to_json() const {
    json cats;
    for (const auto& [cat, stats] : categories)
        cats[cat] = json{{"count", stats.count}, {"mean_f1", stats.mean_f1}};
    json j{{"config_hash", config_hash}, {"macro_f1", macro},  {"micro_f1", micro},
           {"total", total},             {"categories", cats}};
    return j.dump(2);
}

std::string EvalReport::to_csv() const {
    std::ostringstream out;
    out << "category,count,mean_f1\n";
    out.precision(17);
    for (const auto& [cat, stats] : categories)
        out << cat << "," << stats.count << "," << stats.mean_f1 << "\n";
    out << "macro," << total << "," << macro << "\n";
    out << "micro," << total << "," << micro << "\n";
    return out.str();
}

Pipeline Pipeline::load(const PipelineConfig& cfg) {
    Pipeline ctx;
    ctx.cfg = cfg;
    ctx.kg = KnowledgeGraph::load(cfg.kg_path);
    ctx.dataset = load_dataset(cfg.dataset_path);
    ctx.model = ModelParams::load(cfg.checkpoint_path);
    ctx.corpus = RewriteCorpus::load(cfg.corpus_path);
    ctx.antonyms = cfg.antonyms_path.empty() ? AntonymTable::defaults()
                                             : AntonymTable::load(cfg.antonyms_path);
    if (!cfg.memory_path.empty() && std::filesystem::exists(cfg.memory_path)) {
        ctx.memory = Memory::load(cfg.memory_path);
    } else {
        ctx.memory = Memory::build(ctx.split("train"));
        if (!cfg.memory_path.empty()) ctx.memory.save(cfg.memory_path);
    }
    ctx.rewriter = Rewriter(ctx.corpus, ctx.dataset, ctx.antonyms, cfg.threshold);
    return ctx;
}

std::vector<QuestionRecord> Pipeline::split(const std::string& name) const {
    std::vector<QuestionRecord> out;
    for (const auto& q : dataset)
        if (q.split == name) out.push_back(q);
    return out;
}

std::string decoder_input_text(const KnowledgeGraph& kg, const Rewriter& rewriter,
                               const QuestionRecord& q, bool no_rewrite) {
    if (no_rewrite) return make_decoder_input(kg, q, "", false);
    return make_decoder_input(kg, q, rewriter.rewrite(kg, q), true);
}

CompiledExample compile_example(const Vocab& vocab, const KnowledgeGraph& kg,
                                const QuestionRecord& q, const std::string& input_text) {
    CompiledExample ex;
    ex.question_id = q.id;
    ex.tokens = vocab.encode_text(input_text);
    for (const auto& a : q.artifacts.items) {
        const std::string label = a.kind == ArtifactKind::Constant ? a.id : kg.label(a.id);
        ex.arg_tokens.push_back(vocab.encode_text(label));
    }
    ex.args = q.artifacts;
    return ex;
}

AnswerResult answer_question(const Pipeline& ctx, const QuestionRecord& q) {
    AnswerResult res;
    res.answer = Answer::of_entities({});
    const auto input = decoder_input_text(ctx.kg, ctx.rewriter, q, ctx.cfg.no_rewrite);
    const auto ex = compile_example(ctx.model.vocab, ctx.kg, q, input);
    res.candidates = beam_search(ctx.model, ex, ctx.cfg.beam, ctx.cfg.n_candidates);
    if (res.candidates.empty()) return res;

    SupportSet support;
    if (!ctx.cfg.no_select && ctx.cfg.k > 0)
        support = retrieve(ctx.memory, q, ctx.cfg.k, ctx.cfg.threshold, ctx.antonyms);
    res.support_size = (int)support.size();

    const ExecOptions opts{ctx.cfg.around_tolerance};
    const auto sel = select_candidate(ctx.kg, res.candidates, q.artifacts, support, opts);
    res.chosen = sel.index;
    res.sequence = res.candidates[(size_t)sel.index].sequence;
    try {
        res.answer = execute(ctx.kg, res.sequence, opts);
    } catch (const Error&) {
        res.answer = Answer::of_entities({});
    }
    return res;
}

EvalReport evaluate(const Pipeline& ctx, const std::string& split) {
    std::vector<std::pair<std::string, double>> per_question;
    for (const auto& q : ctx.dataset) {
        if (q.split != split) continue;
        const auto res = answer_question(ctx, q);
        per_question.emplace_back(q.category, f1(res.answer, q.gold_answer));
    }
    if (per_question.empty()) throw Error("empty split: " + split);
    return compute_report(per_question, ctx.cfg.config_hash());
}

std::vector<AblationRow> run_ablations(const Pipeline& ctx, const std::string& split) {
    std::vector<AblationRow> rows;
    auto run = [&](const std::string& name, bool no_rewrite, bool no_select) {
        Pipeline variant;
        variant.cfg = ctx.cfg;
        variant.cfg.no_rewrite = no_rewrite;
        variant.cfg.no_select = no_select;
        variant.kg = ctx.kg;
        variant.dataset = ctx.dataset;
        variant.model = ctx.model;
        variant.corpus = ctx.corpus;
        variant.memory = ctx.memory;
        variant.antonyms = ctx.antonyms;
        variant.rewriter = ctx.rewriter;
        const auto report = evaluate(variant, split);
        rows.push_back(AblationRow{name, report.macro, report.micro});
    };
    run("full", false, false);
    run("no_rewrite", true, false);
    run("no_select", false, true);
    return rows;
}

std::vector<SweepCell> sweep(const Pipeline& ctx, const std::string& split,
                             const std::vector<int>& support_sizes,
                             const std::vector<int>& candidate_counts) {
    // Reference row for the k = 0 consistency check.
    std::map<int, std::pair<double, double>> no_select_by_cands;
    std::vector<SweepCell> cells;
    for (int k : support_sizes) {
        for (int n : candidate_counts) {
            Pipeline variant;
            variant.cfg = ctx.cfg;
            variant.cfg.k = k;
            variant.cfg.n_candidates = n;
            variant.cfg.beam = std::max(ctx.cfg.beam, n);
            variant.cfg.no_select = k == 0;
            variant.kg = ctx.kg;
            variant.dataset = ctx.dataset;
            variant.model = ctx.model;
            variant.corpus = ctx.corpus;
            variant.memory = ctx.memory;
            variant.antonyms = ctx.antonyms;
            variant.rewriter = ctx.rewriter;
            const auto report = evaluate(variant, split);
            cells.push_back(SweepCell{k, n, report.macro, report.micro});
            if (k == 0) no_select_by_cands[n] = {report.macro, report.micro};
        }
    }
    // k = 0 must equal an explicit no-select run.
    for (const auto& [n, expected] : no_select_by_cands) {
        Pipeline variant;
        variant.cfg = ctx.cfg;
        variant.cfg.n_candidates = n;
        variant.cfg.beam = std::max(ctx.cfg.beam, n);
        variant.cfg.no_select = true;
        variant.kg = ctx.kg;
        variant.dataset = ctx.dataset;
        variant.model = ctx.model;
        variant.corpus = ctx.corpus;
        variant.memory = ctx.memory;
        variant.antonyms = ctx.antonyms;
        variant.rewriter = ctx.rewriter;
        const auto report = evaluate(variant, split);
        if (report.macro != expected.first || report.micro != expected.second)
            throw Error("sweep k=0 column does not match the no-select ablation");
    }
    return cells;
}

std::vector<PseudoPair> run_bfs(const KnowledgeGraph& kg,
                                const std::vector<QuestionRecord>& questions,
                                const SearchConfig& cfg, int take_per_question) {
    std::vector<PseudoPair> out;
    for (const auto& q : questions) {
        auto found = search_pseudo_sequences(kg, q, cfg);
        for (int i = 0; i < (int)found.size() && i < take_per_question; ++i)
            out.push_back(std::move(found[(size_t)i]));
    }
    return out;
}

ModelParams pretrain_pipeline(const PipelineConfig& cfg, const KnowledgeGraph& kg,
                              const std::vector<QuestionRecord>& dataset,
                              const std::vector<PseudoPair>& pairs, const RewriteCorpus& corpus,
                              std::vector<double>* epoch_losses) {
    const AntonymTable antonyms = cfg.antonyms_path.empty()
                                      ? AntonymTable::defaults()
                                      : AntonymTable::load(cfg.antonyms_path);
    const Rewriter rewriter(corpus, dataset, antonyms, cfg.threshold);

    std::vector<std::string> inputs;
    for (const auto& pair : pairs)
        inputs.push_back(decoder_input_text(kg, rewriter, pair.question, cfg.no_rewrite));
    Vocab vocab = Vocab::build(inputs);

    ModelConfig mc = cfg.model;
    mc.seed = cfg.seed;
    ModelParams model = ModelParams::init(mc, std::move(vocab));

    std::vector<CompiledExample> examples;
    for (size_t i = 0; i < pairs.size(); ++i) {
        auto ex = compile_example(model.vocab, kg, pairs[i].question, inputs[i]);
        ex.target = compile_target(pairs[i].sequence, pairs[i].question.artifacts);
        examples.push_back(std::move(ex));
    }
    auto losses = pretrain(model, examples, cfg.pretrain_epochs, cfg.pretrain_lr, cfg.seed);
    if (epoch_losses) *epoch_losses = losses;
    return model;
}

void train_rl_pipeline(const PipelineConfig& cfg, const KnowledgeGraph& kg,
                       const std::vector<QuestionRecord>& dataset, const RewriteCorpus& corpus,
                       ModelParams& model, std::vector<double>* epoch_rewards) {
    const AntonymTable antonyms = cfg.antonyms_path.empty()
                                      ? AntonymTable::defaults()
                                      : AntonymTable::load(cfg.antonyms_path);
    const Rewriter rewriter(corpus, dataset, antonyms, cfg.threshold);
    const ExecOptions opts{cfg.around_tolerance};

    std::vector<const QuestionRecord*> train, dev;
    for (const auto& q : dataset) {
        if (q.split == "train") train.push_back(&q);
        else if (q.split == "dev") dev.push_back(&q);
    }
    if (train.empty()) throw Error("train-rl: empty train split");

    std::vector<CompiledExample> train_ex, dev_ex;
    for (const auto* q : train)
        train_ex.push_back(compile_example(
            model.vocab, kg, *q, decoder_input_text(kg, rewriter, *q, cfg.no_rewrite)));
    for (const auto* q : dev)
        dev_ex.push_back(compile_example(
            model.vocab, kg, *q, decoder_input_text(kg, rewriter, *q, cfg.no_rewrite)));

    auto dev_reward = [&](const ModelParams& m) {
        if (dev_ex.empty()) return 0.0;
        double sum = 0.0;
        for (size_t i = 0; i < dev_ex.size(); ++i) {
            auto cand = greedy_decode(m, dev_ex[i]);
            if (!cand) continue;
            try {
                sum += f1(execute(kg, cand->sequence, opts), dev[i]->gold_answer);
            } catch (const Error&) {
            }
        }
        return sum / (double)dev_ex.size();
    };

    std::mt19937_64 rng(cfg.seed ^ 0xda3e39cb94b95bdbull);
    AdamState adam;
    adam.lr = cfg.rl_lr;
    BaselineState baseline;
    ModelParams best = model;
    double best_dev = dev_reward(model);

    std::vector<size_t> order(train_ex.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (int epoch = 0; epoch < cfg.rl_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double mean_reward = 0.0;
        for (size_t idx : order) {
            const auto res = reinforce_step(model, train_ex[idx], kg,
                                            train[idx]->gold_answer, baseline, adam, rng, opts);
            mean_reward += res.reward;
        }
        mean_reward /= (double)train_ex.size();
        if (epoch_rewards) epoch_rewards->push_back(mean_reward);
        const double d = dev_reward(model);
        if (d > best_dev) {
            best_dev = d;
            best = model;
        }
    }
    model = std::move(best);
}

}  // namespace kgqa
