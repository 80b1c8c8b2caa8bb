#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "nirprompt/cli_commands.hpp"
#include "nirprompt/experiments.hpp"

namespace py = pybind11;
using namespace nirprompt;

namespace {

std::map<Slot, Matrix> continuous_slots(const PromptSet& set) {
    std::map<Slot, Matrix> out;
    for (const auto& [slot, content] : set.slots)
        if (!content.is_manual()) out[slot] = content.embeddings;
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Core operations of the desk-scale multi-task neural IR framework.";

    py::register_exception<Error>(m, "NirError");

    py::enum_<Stage>(m, "Stage")
        .value("retrieval", Stage::Retrieval)
        .value("reranking", Stage::Reranking);
    py::enum_<PromptMode>(m, "PromptMode")
        .value("manual", PromptMode::Manual)
        .value("continuous", PromptMode::Continuous)
        .value("hybrid", PromptMode::Hybrid);
    py::enum_<Slot>(m, "Slot")
        .value("P1", Slot::P1)
        .value("P2", Slot::P2)
        .value("Pq", Slot::Pq)
        .value("Pd", Slot::Pd);
    py::enum_<Split>(m, "Split")
        .value("train", Split::Train)
        .value("test_in_domain", Split::TestInDomain)
        .value("test_out_of_domain", Split::TestOutOfDomain)
        .value("few_shot", Split::FewShot);

    py::class_<ModelConfig>(m, "ModelConfig")
        .def(py::init<>())
        .def_readwrite("num_layers", &ModelConfig::num_layers)
        .def_readwrite("hidden_dim", &ModelConfig::hidden_dim)
        .def_readwrite("num_heads", &ModelConfig::num_heads)
        .def_readwrite("vocab_size", &ModelConfig::vocab_size)
        .def_readwrite("max_seq_len", &ModelConfig::max_seq_len)
        .def_readwrite("boundary_layer", &ModelConfig::boundary_layer)
        .def_readwrite("seed", &ModelConfig::seed)
        .def("validate", &ModelConfig::validate);

    m.def("vocab_size", []() { return Vocabulary::standard().size(); });
    m.def("tokenize", [](const std::string& text) { return Vocabulary::standard().tokenize(text); });
    m.def("detokenize",
          [](const std::vector<int>& ids) { return Vocabulary::standard().detokenize(ids); });

    m.def("mask_distribution", &mask_distribution, py::arg("logits"),
          "Softmax over a row of logits; raises NirError on non-finite input.");
    m.def("in_batch_contrastive_loss", &in_batch_contrastive_loss, py::arg("query_vectors"),
          py::arg("doc_vectors"));
    m.def("fusion_weights", &fusion_weights, py::arg("raw_logits"));
    m.def(
        "ranking_metrics",
        [](const std::vector<std::vector<double>>& rels) {
            RankingMetrics r = ranking_metrics(rels);
            return py::dict(py::arg("p_at_1") = r.p_at_1, py::arg("mrr") = r.mrr,
                            py::arg("ndcg10") = r.ndcg10);
        },
        py::arg("ranked_relevances"));
    m.def(
        "classification_metrics",
        [](const std::vector<int>& pred, const std::vector<int>& gold) {
            ClassificationMetrics c = classification_metrics(pred, gold);
            return py::dict(py::arg("accuracy") = c.accuracy, py::arg("f1") = c.f1);
        },
        py::arg("predictions"), py::arg("labels"));
    m.def(
        "bm25_score",
        [](const std::vector<int>& q, const std::vector<int>& d,
           const std::vector<std::vector<int>>& corpus) {
            return bm25_score(q, d, Bm25Stats::build(corpus));
        },
        py::arg("query"), py::arg("document"), py::arg("corpus"));

    py::class_<TaskDataset>(m, "TaskDataset")
        .def_readonly("task_id", &TaskDataset::task_id)
        .def("__len__", [](const TaskDataset& d) { return d.examples.size(); })
        .def("rows", [](const TaskDataset& d) {
            py::list rows;
            for (const MatchExample& ex : d.examples)
                rows.append(py::make_tuple(ex.example_id, ex.task_id, to_string(ex.split),
                                           ex.text1, ex.text2, ex.label));
            return rows;
        });
    m.def(
        "generate_task_data",
        [](const std::string& task, int train, int test, int ood, int few, uint64_t seed) {
            return generate_task_data(task, GenCounts{train, test, ood, few}, seed);
        },
        py::arg("task_id"), py::arg("train") = 1000, py::arg("test") = 200, py::arg("ood") = 200,
        py::arg("few_shot") = 64, py::arg("seed") = 1);
    m.def("relation_oracle", &relation_oracle, py::arg("task_id"), py::arg("text1"),
          py::arg("text2"));
    m.def("serialize_dataset", &serialize_dataset, py::arg("dataset"), py::arg("path"));
    m.def("load_dataset", &load_dataset, py::arg("path"));

    py::class_<NirModel>(m, "NirModel")
        .def_static(
            "make_nir",
            [](const ModelConfig& cfg, Stage stage, PromptMode mode,
               const std::vector<std::string>& tasks, int prompt_len) {
                return NirModel::make_nir(cfg, stage, mode, tasks, prompt_len);
            },
            py::arg("config"), py::arg("stage"), py::arg("mode"), py::arg("tasks"),
            py::arg("prompt_length") = 3)
        .def_static("make_baseline", &NirModel::make_baseline, py::arg("config"),
                    py::arg("stage"), py::arg("variant"), py::arg("tasks"))
        .def_static("load", &NirModel::load, py::arg("dir"))
        .def("save", &NirModel::save, py::arg("dir"))
        .def_readonly("flavor", &NirModel::flavor)
        .def_readonly("tasks", &NirModel::tasks)
        .def_property_readonly("stage", [](const NirModel& m) { return m.stage; })
        .def("checkpoint_id", &NirModel::checkpoint_id)
        .def("group_tags",
             [](const NirModel& m) {
                 std::vector<std::string> tags;
                 for (const ParameterGroup& g : m.parameter_groups()) tags.push_back(g.tag);
                 return tags;
             })
        .def(
            "encode",
            [](const NirModel& m, const std::string& task, const std::vector<int>& text,
               bool is_query) {
                return model_encode(m, task, text,
                                    is_query ? TextRole::Query : TextRole::Document);
            },
            py::arg("task"), py::arg("text"), py::arg("is_query") = true)
        .def(
            "rel_score",
            [](const NirModel& m, const std::string& task, const std::vector<int>& x1,
               const std::vector<int>& x2) { return model_rel(m, task, x1, x2); },
            py::arg("task"), py::arg("x1"), py::arg("x2"))
        .def(
            "classify",
            [](const NirModel& m, const std::string& task, const std::vector<int>& x1,
               const std::vector<int>& x2) { return model_classify(m, task, x1, x2); },
            py::arg("task"), py::arg("x1"), py::arg("x2"))
        .def(
            "prompt_embeddings",
            [](const NirModel& m, const std::string& task) {
                return continuous_slots(m.prompts_for(task));
            },
            py::arg("task"));

    py::class_<CorpusIndex>(m, "CorpusIndex")
        .def(py::init<std::string, std::string, std::string, int>(), py::arg("task_id"),
             py::arg("prompt_mode"), py::arg("checkpoint_id"), py::arg("hidden_dim"))
        .def("add", &CorpusIndex::add, py::arg("doc_id"), py::arg("vector"))
        .def("__len__", &CorpusIndex::size)
        .def(
            "search",
            [](const CorpusIndex& idx, const Eigen::VectorXd& q, int k) {
                py::list hits;
                for (const SearchHit& h : idx.search(q, k))
                    hits.append(py::make_tuple(h.doc_id, h.score, h.rank));
                return hits;
            },
            py::arg("query"), py::arg("top_k"));

    m.def("run_cli", &nirprompt::cli::run, py::arg("args"),
          "Run a CLI command in-process; returns the exit code.");
}
