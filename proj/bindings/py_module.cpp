#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "kgqa/pipeline.hpp"

namespace py = pybind11;
using namespace kgqa;

namespace {

ArtifactKind kind_from_string(const std::string& s) {
    if (s == "entity") return ArtifactKind::Entity;
    if (s == "type") return ArtifactKind::Type;
    if (s == "relation") return ArtifactKind::Relation;
    if (s == "constant") return ArtifactKind::Constant;
    throw Error("unknown artifact kind: " + s);
}

py::object answer_value(const Answer& a) {
    switch (a.tag) {
        case Answer::Tag::Entities: {
            py::list out;
            for (const auto& e : a.entities) out.append(e);
            return out;
        }
        case Answer::Tag::Number:
            return py::int_(a.number);
        case Answer::Tag::Booleans: {
            py::list out;
            for (bool b : a.booleans) out.append(b);
            return out;
        }
    }
    return py::none();
}

}  // namespace

PYBIND11_MODULE(_kgqa, m) {
    m.doc() = "Knowledge-graph question answering via executable action sequences";

    py::register_exception<Error>(m, "KgqaError");

    py::class_<Artifact>(m, "Artifact")
        .def(py::init([](const std::string& kind, const std::string& id, int start, int end) {
                 return Artifact{kind_from_string(kind), id, start, end};
             }),
             py::arg("kind"), py::arg("id"), py::arg("start") = 0, py::arg("end") = 0)
        .def_property_readonly("kind", [](const Artifact& a) { return kind_name(a.kind); })
        .def_readonly("id", &Artifact::id)
        .def_readonly("start", &Artifact::start)
        .def_readonly("end", &Artifact::end)
        .def("__repr__", [](const Artifact& a) {
            return "Artifact(" + std::string(kind_name(a.kind)) + ", " + a.id + ")";
        });

    py::class_<ArgumentSet>(m, "ArgumentSet")
        .def(py::init([](const std::vector<Artifact>& items) {
                 ArgumentSet s;
                 s.items = items;
                 return s;
             }),
             py::arg("items"))
        .def("__len__", [](const ArgumentSet& s) { return s.items.size(); })
        .def_readonly("items", &ArgumentSet::items);

    py::class_<Answer>(m, "Answer")
        .def_static("of_entities",
                    [](const std::vector<std::string>& e) {
                        return Answer::of_entities({e.begin(), e.end()});
                    })
        .def_static("of_number", &Answer::of_number)
        .def_static("of_booleans", &Answer::of_booleans)
        .def_property_readonly("kind",
                               [](const Answer& a) {
                                   switch (a.tag) {
                                       case Answer::Tag::Entities: return "entities";
                                       case Answer::Tag::Number: return "number";
                                       default: return "booleans";
                                   }
                               })
        .def_property_readonly("value", &answer_value)
        .def("__eq__", [](const Answer& a, const Answer& b) { return a == b; })
        .def("__repr__", [](const Answer& a) { return answer_to_json(a); });

    py::class_<ActionSequence>(m, "ActionSequence")
        .def("__len__", [](const ActionSequence& s) { return s.size(); })
        .def("__str__", [](const ActionSequence& s) { return serialize_sequence(s); })
        .def("__repr__", [](const ActionSequence& s) { return serialize_sequence(s); });

    py::class_<KnowledgeGraph>(m, "KnowledgeGraph")
        .def_static("load", &KnowledgeGraph::load, py::arg("path"))
        .def("save", &KnowledgeGraph::save, py::arg("path"))
        .def("neighbors", &KnowledgeGraph::neighbors, py::arg("entity"), py::arg("relation"),
             py::arg("type"))
        .def("entities_of_type", &KnowledgeGraph::entities_of_type, py::arg("type"))
        .def("label", &KnowledgeGraph::label, py::arg("id"))
        .def_property_readonly("num_entities",
                               [](const KnowledgeGraph& kg) { return kg.entities().size(); })
        .def_property_readonly("num_triples",
                               [](const KnowledgeGraph& kg) { return kg.triples().size(); });

    py::class_<QuestionRecord>(m, "QuestionRecord")
        .def_readonly("id", &QuestionRecord::id)
        .def_readonly("text", &QuestionRecord::text)
        .def_readonly("category", &QuestionRecord::category)
        .def_readonly("split", &QuestionRecord::split)
        .def_readonly("artifacts", &QuestionRecord::artifacts)
        .def_readonly("gold_answer", &QuestionRecord::gold_answer)
        .def_property_readonly("gold_sequence", [](const QuestionRecord& q) -> py::object {
            if (!q.gold_sequence) return py::none();
            return py::cast(*q.gold_sequence);
        });

    m.def("parse_sequence", &parse_sequence, py::arg("text"), py::arg("arguments"));
    m.def("serialize_sequence", &serialize_sequence, py::arg("sequence"));
    m.def(
        "type_check",
        [](const ActionSequence& seq) {
            const auto res = type_check(seq);
            return py::make_tuple(res.ok, res.error);
        },
        py::arg("sequence"));
    m.def(
        "execute",
        [](const KnowledgeGraph& kg, const ActionSequence& seq, int around_tolerance) {
            return execute(kg, seq, ExecOptions{around_tolerance});
        },
        py::arg("kg"), py::arg("sequence"), py::arg("around_tolerance") = 5);
    m.def("f1", &f1, py::arg("pred"), py::arg("gold"));

    m.def(
        "mask_question",
        [](const std::string& text, const ArgumentSet& args) {
            return mask_question(text, args);
        },
        py::arg("text"), py::arg("arguments"));
    m.def(
        "similarity",
        [](const std::vector<std::string>& m1, const std::vector<std::string>& m2) {
            return similarity(m1, m2, AntonymTable::defaults());
        },
        py::arg("masked1"), py::arg("masked2"));

    m.def("load_dataset", &load_dataset, py::arg("path"));

    m.def(
        "generate_benchmark",
        [](const std::string& out_dir, std::uint64_t seed, int per_category) {
            BenchConfig cfg;
            cfg.seed = seed;
            if (per_category > 0)
                for (const auto& c : question_categories()) cfg.per_category[c] = per_category;
            const auto kg = generate_kg(cfg);
            kg.save(out_dir + "/kg.jsonl");
            const auto gen = generate_questions(kg, cfg);
            save_dataset(out_dir + "/dataset.jsonl", gen.records);
            AntonymTable::defaults().save(out_dir + "/antonyms.txt");
            return py::make_tuple(gen.records.size(), gen.skipped);
        },
        py::arg("out_dir"), py::arg("seed") = 1, py::arg("per_category") = 60);

    m.def(
        "search_pseudo_sequences",
        [](const KnowledgeGraph& kg, const QuestionRecord& q, int max_len, int max_results,
           double min_reward) {
            SearchConfig cfg;
            cfg.max_len = max_len;
            cfg.max_results = max_results;
            cfg.min_reward_to_accept = min_reward;
            std::vector<std::pair<std::string, double>> out;
            for (const auto& p : search_pseudo_sequences(kg, q, cfg))
                out.emplace_back(serialize_sequence(p.sequence), p.reward);
            return out;
        },
        py::arg("kg"), py::arg("question"), py::arg("max_len") = 4, py::arg("max_results") = 10,
        py::arg("min_reward") = 1.0);

    py::class_<Pipeline>(m, "Pipeline")
        .def_static(
            "load",
            [](const std::string& config_path) {
                return Pipeline::load(PipelineConfig::from_json_file(config_path));
            },
            py::arg("config_path"))
        .def(
            "answer",
            [](const Pipeline& ctx, const QuestionRecord& q) {
                const auto res = answer_question(ctx, q);
                return py::make_tuple(serialize_sequence(res.sequence), res.answer);
            },
            py::arg("question"))
        .def(
            "evaluate",
            [](const Pipeline& ctx, const std::string& split) {
                const auto report = evaluate(ctx, split);
                py::dict d;
                d["macro_f1"] = report.macro;
                d["micro_f1"] = report.micro;
                d["total"] = report.total;
                py::dict cats;
                for (const auto& [cat, stats] : report.categories) {
                    py::dict c;
                    c["count"] = stats.count;
                    c["mean_f1"] = stats.mean_f1;
                    cats[py::str(cat)] = c;
                }
                d["categories"] = cats;
                return d;
            },
            py::arg("split") = "test")
        .def_property_readonly("dataset", [](const Pipeline& ctx) { return ctx.dataset; });

    m.attr("__version__") = "0.1.0";
}
