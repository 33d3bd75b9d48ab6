#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "kgqa/pipeline.hpp"

namespace fs = std::filesystem;
using namespace kgqa;

namespace {

PipelineConfig load_config(const std::string& config_path) {
    if (config_path.empty()) return PipelineConfig{};
    return PipelineConfig::from_json_file(config_path);
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open for writing: " + path);
    out << content;
}

std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
    return out;
}

int cmd_gen(const std::string& config_path, std::uint64_t seed, const std::string& out_dir,
            int per_category) {
    BenchConfig cfg;
    if (!config_path.empty()) cfg = BenchConfig::from_json_file(config_path);
    if (seed != 0) cfg.seed = seed;
    if (per_category > 0) {
        for (const auto& c : question_categories()) cfg.per_category[c] = per_category;
    }
    fs::create_directories(out_dir);
    const auto kg = generate_kg(cfg);
    kg.save(out_dir + "/kg.jsonl");
    const auto gen = generate_questions(kg, cfg);
    save_dataset(out_dir + "/dataset.jsonl", gen.records);
    AntonymTable::defaults().save(out_dir + "/antonyms.txt");

    std::map<std::string, std::map<std::string, int>> counts;
    for (const auto& q : gen.records) ++counts[q.category][q.split];
    std::cout << "kg: " << kg.entities().size() << " entities, " << kg.triples().size()
              << " triples\n";
    for (const auto& [cat, splits] : counts) {
        std::cout << cat << ":";
        for (const auto& [split, n] : splits) std::cout << " " << split << "=" << n;
        std::cout << "\n";
    }
    std::cout << "questions: " << gen.records.size() << " (skipped " << gen.skipped << ")\n";
    return 0;
}

int cmd_bfs(const std::string& kg_path, const std::string& dataset_path, int max_len,
            int max_frontier, int max_results, double min_reward, const std::string& split,
            int sample, const std::string& out_path) {
    const auto kg = KnowledgeGraph::load(kg_path);
    auto dataset = load_dataset(dataset_path);
    std::vector<QuestionRecord> questions;
    for (const auto& q : dataset)
        if (split.empty() || q.split == split) questions.push_back(q);
    if (sample > 0 && (int)questions.size() > sample) questions.resize((size_t)sample);

    SearchConfig cfg;
    cfg.max_len = max_len;
    cfg.max_frontier = max_frontier;
    cfg.max_results = max_results;
    cfg.min_reward_to_accept = min_reward;
    const auto pairs = run_bfs(kg, questions, cfg, 1);
    save_pairs(out_path, pairs);
    std::cout << "searched " << questions.size() << " questions, found sequences for "
              << pairs.size() << "\n";
    return 0;
}

int cmd_rewrite_corpus(const std::string& kg_path, const std::string& dataset_path,
                       const std::string& pairs_path, const std::string& out_path) {
    const auto kg = KnowledgeGraph::load(kg_path);
    const auto dataset = load_dataset(dataset_path);
    const auto pairs = load_pairs(pairs_path, dataset);
    const auto corpus = build_rewrite_corpus(pairs, template_back_translator(kg));
    corpus.save(out_path);
    std::cout << "corpus entries: " << corpus.entries.size() << "\n";
    return 0;
}

int cmd_pretrain(PipelineConfig cfg, const std::string& pairs_path, const std::string& out_path) {
    const auto kg = KnowledgeGraph::load(cfg.kg_path);
    const auto dataset = load_dataset(cfg.dataset_path);
    const auto pairs = load_pairs(pairs_path, dataset);
    const auto corpus = RewriteCorpus::load(cfg.corpus_path);
    std::vector<double> losses;
    auto model = pretrain_pipeline(cfg, kg, dataset, pairs, corpus, &losses);
    model.save(out_path);
    for (size_t i = 0; i < losses.size(); ++i)
        std::cout << "epoch " << i + 1 << " loss " << losses[i] << "\n";
    std::cout << "saved " << out_path << "\n";
    return 0;
}

int cmd_train_rl(PipelineConfig cfg, const std::string& in_path, const std::string& out_path) {
    const auto kg = KnowledgeGraph::load(cfg.kg_path);
    const auto dataset = load_dataset(cfg.dataset_path);
    const auto corpus = RewriteCorpus::load(cfg.corpus_path);
    auto model = ModelParams::load(in_path);
    std::vector<double> rewards;
    train_rl_pipeline(cfg, kg, dataset, corpus, model, &rewards);
    model.save(out_path);
    for (size_t i = 0; i < rewards.size(); ++i)
        std::cout << "epoch " << i + 1 << " mean reward " << rewards[i] << "\n";
    std::cout << "saved " << out_path << "\n";
    return 0;
}

int cmd_infer(const PipelineConfig& cfg, const std::string& question_id, const std::string& split,
              const std::string& out_path) {
    const auto ctx = Pipeline::load(cfg);
    std::ofstream out;
    if (!out_path.empty()) {
        out.open(out_path);
        if (!out) throw Error("cannot open for writing: " + out_path);
    }
    int answered = 0;
    for (const auto& q : ctx.dataset) {
        if (!question_id.empty() && q.id != question_id) continue;
        if (question_id.empty() && !split.empty() && q.split != split) continue;
        const auto res = answer_question(ctx, q);
        nlohmann::json j{{"id", q.id},
                         {"question", q.text},
                         {"sequence", serialize_sequence(res.sequence)},
                         {"surface", render_surface(ctx.kg, res.sequence)},
                         {"answer", nlohmann::json::parse(answer_to_json(res.answer))},
                         {"f1", f1(res.answer, q.gold_answer)}};
        if (out.is_open()) out << j.dump() << "\n";
        else std::cout << j.dump(2) << "\n";
        ++answered;
    }
    if (answered == 0) throw Error("no matching question");
    return 0;
}

int cmd_evaluate(const PipelineConfig& cfg, const std::string& split,
                 const std::string& report_path, const std::string& csv_path) {
    const auto ctx = Pipeline::load(cfg);
    const auto report = evaluate(ctx, split);
    std::cout << report.to_json() << "\n";
    if (!report_path.empty()) write_file(report_path, report.to_json() + "\n");
    if (!csv_path.empty()) write_file(csv_path, report.to_csv());
    return 0;
}

int cmd_ablate(const PipelineConfig& cfg, const std::string& split, const std::string& out_path) {
    const auto ctx = Pipeline::load(cfg);
    const auto rows = run_ablations(ctx, split);
    std::ostringstream csv;
    csv << "setting,macro_f1,micro_f1\n";
    csv.precision(17);
    for (const auto& r : rows) csv << r.name << "," << r.macro << "," << r.micro << "\n";
    std::cout << csv.str();
    if (!out_path.empty()) write_file(out_path, csv.str());
    const bool ok = rows[0].macro > rows[1].macro && rows[0].macro > rows[2].macro;
    std::cout << (ok ? "full model strictly ahead of both ablations\n"
                     : "warning: an ablation matched or beat the full model\n");
    return 0;
}

int cmd_sweep(const PipelineConfig& cfg, const std::string& split, const std::string& ks,
              const std::string& cands, const std::string& out_path) {
    const auto ctx = Pipeline::load(cfg);
    const auto cells = sweep(ctx, split, parse_int_list(ks), parse_int_list(cands));
    std::ostringstream csv;
    csv << "k,n_candidates,macro_f1,micro_f1\n";
    csv.precision(17);
    for (const auto& c : cells)
        csv << c.k << "," << c.n_candidates << "," << c.macro << "," << c.micro << "\n";
    std::cout << csv.str();
    if (!out_path.empty()) write_file(out_path, csv.str());
    return 0;
}

int cmd_grad_check(int dim, int samples, std::uint64_t seed) {
    // Tiny self-contained fixture: two entities, one relation, one type.
    KgBuilder b;
    b.add_type("T", "things").add_type("P", "people");
    b.add_relation("r", "play");
    b.add_entity("p0", {"P"}, "amber stone").add_entity("x0", {"T"}, "violet creek");
    b.add_entity("x1", {"T"}, "coral glen");
    b.add_triple("p0", "r", "x0").add_triple("p0", "r", "x1");
    const auto kg = b.build();

    QuestionRecord q;
    q.id = "g0";
    q.text = "which things does amber stone play";
    q.artifacts.items = {Artifact{ArtifactKind::Type, "T", 6, 12},
                         Artifact{ArtifactKind::Entity, "p0", 18, 29},
                         Artifact{ArtifactKind::Relation, "r", 30, 34}};
    Vocab vocab = Vocab::build({q.text + " <sep> amber stone play things"});
    ModelConfig mc;
    mc.d_e = dim;
    mc.d_h = dim;
    mc.d_s = dim;
    mc.d_tau = dim;
    mc.seed = seed;
    ModelParams model = ModelParams::init(mc, std::move(vocab));
    auto ex = compile_example(model.vocab, kg, q, q.text);
    ActionSequence gold;
    gold.actions = {Action{Func::Select, {q.artifacts[1], q.artifacts[2], q.artifacts[0]}},
                    Action{Func::Count, {}}};
    ex.target = compile_target(gold, q.artifacts);

    const double err = gradient_check(model, ex, samples, 1e-5, seed + 1);
    std::cout << "max relative error: " << err << " over " << samples << " parameters\n";
    return err < 1e-4 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Knowledge-graph question answering via action sequences"};
    app.require_subcommand(1);

    std::string config_path, kg_path, dataset_path, pairs_path, out_path, report_path, csv_path;
    std::string split = "test", bfs_split = "train", question_id, model_in;
    std::uint64_t seed = 0;
    int per_category = 0, max_len = 4, max_frontier = 5000, max_results = 1, sample = 0;
    double min_reward = 1.0;
    std::string ks = "0,1,3,6", cands = "1,3,5";
    int gc_dim = 8, gc_samples = 250;

    auto* gen = app.add_subcommand("gen", "Generate the synthetic benchmark");
    gen->add_option("--config", config_path, "Benchmark config JSON");
    gen->add_option("--seed", seed, "Override the config seed");
    gen->add_option("--per-category", per_category, "Questions per category");
    gen->add_option("--out", out_path, "Output directory")->required();

    auto* bfs = app.add_subcommand("bfs", "Search pseudo action sequences");
    bfs->add_option("--kg", kg_path)->required();
    bfs->add_option("--dataset", dataset_path)->required();
    bfs->add_option("--max-len", max_len);
    bfs->add_option("--max-frontier", max_frontier);
    bfs->add_option("--max-results", max_results);
    bfs->add_option("--min-reward", min_reward);
    bfs->add_option("--split", bfs_split, "Restrict to one split (empty = all)");
    bfs->add_option("--sample", sample, "Cap the number of searched questions");
    bfs->add_option("--out", out_path)->required();

    auto* rc = app.add_subcommand("rewrite-corpus", "Build the question-rewriting corpus");
    rc->add_option("--kg", kg_path)->required();
    rc->add_option("--dataset", dataset_path)->required();
    rc->add_option("--pairs", pairs_path)->required();
    rc->add_option("--out", out_path)->required();

    auto* pre = app.add_subcommand("pretrain", "Teacher-forced pretraining on searched pairs");
    pre->add_option("--config", config_path)->required();
    pre->add_option("--pairs", pairs_path)->required();
    pre->add_option("--out", out_path)->required();

    auto* rl = app.add_subcommand("train-rl", "REINFORCE fine-tuning");
    rl->add_option("--config", config_path)->required();
    rl->add_option("--model", model_in)->required();
    rl->add_option("--out", out_path)->required();

    auto* inf = app.add_subcommand("infer", "Answer questions with the full pipeline");
    inf->add_option("--config", config_path)->required();
    inf->add_option("--id", question_id, "Single question id");
    inf->add_option("--split", split);
    inf->add_option("--out", out_path, "JSONL output (stdout when omitted)");

    auto* ev = app.add_subcommand("evaluate", "Score a split");
    ev->add_option("--config", config_path)->required();
    ev->add_option("--split", split);
    ev->add_option("--report", report_path, "JSON report path");
    ev->add_option("--csv", csv_path, "CSV report path");

    auto* ab = app.add_subcommand("ablate", "Full vs no-rewrite vs no-select");
    ab->add_option("--config", config_path)->required();
    ab->add_option("--split", split);
    ab->add_option("--out", out_path, "CSV path");

    auto* sw = app.add_subcommand("sweep", "Grid over support sizes and candidate counts");
    sw->add_option("--config", config_path)->required();
    sw->add_option("--split", split);
    sw->add_option("--ks", ks, "Comma-separated support sizes");
    sw->add_option("--cands", cands, "Comma-separated candidate counts");
    sw->add_option("--out", out_path, "CSV path");

    auto* gc = app.add_subcommand("grad-check", "Finite-difference gradient verification");
    gc->add_option("--dim", gc_dim);
    gc->add_option("--samples", gc_samples);
    gc->add_option("--seed", seed);

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen(config_path, seed, out_path, per_category);
        if (bfs->parsed())
            return cmd_bfs(kg_path, dataset_path, max_len, max_frontier, max_results, min_reward,
                           bfs_split, sample, out_path);
        if (rc->parsed()) return cmd_rewrite_corpus(kg_path, dataset_path, pairs_path, out_path);
        if (pre->parsed()) return cmd_pretrain(load_config(config_path), pairs_path, out_path);
        if (rl->parsed()) return cmd_train_rl(load_config(config_path), model_in, out_path);
        if (inf->parsed()) return cmd_infer(load_config(config_path), question_id, split, out_path);
        if (ev->parsed()) return cmd_evaluate(load_config(config_path), split, report_path, csv_path);
        if (ab->parsed()) return cmd_ablate(load_config(config_path), split, out_path);
        if (sw->parsed()) return cmd_sweep(load_config(config_path), split, ks, cands, out_path);
        if (gc->parsed()) return cmd_grad_check(gc_dim, gc_samples, seed == 0 ? 7 : seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
