#pragma once

#include "nirprompt/eval.hpp"
#include "nirprompt/orchestrator.hpp"

namespace nirprompt {

// REL / classification / encoding under a model's own task conditioning
// (prompt sets for prompt models, mark tokens for the mark baseline, plain
// templates otherwise). `override_set` substitutes adapted or fused prompts.
double model_rel(const NirModel& model, const std::string& task, const std::vector<int>& x1,
                 const std::vector<int>& x2, const PromptSet* override_set = nullptr);
int model_classify(const NirModel& model, const std::string& task, const std::vector<int>& x1,
                   const std::vector<int>& x2, const PromptSet* override_set = nullptr);
Eigen::VectorXd model_encode(const NirModel& model, const std::string& task,
                             const std::vector<int>& text, TextRole role,
                             const PromptSet* override_set = nullptr);

TaskScorer scorer_for(const NirModel& model);

// Ranked row written by eval/pipeline commands.
struct RankedRow {
    std::string query_id;
    std::string doc_id;
    double score;
    int rank;
    int original_rank;  // -1 for first-stage rows
};

struct TaskEvalResult {
    std::map<std::string, double> metrics;
    std::vector<RankedRow> rows;
};

// Exact search over the split corpus; DR scores NDCG@10, QA/RD score
// P@1 and MRR. top_k = 0 ranks the entire corpus.
TaskEvalResult evaluate_retrieval_task(const NirModel& model, const TaskDataset& dataset,
                                       Split split, int top_k = 0,
                                       const PromptSet* override_set = nullptr);

// PI/NLI classify each pair (Accuracy, F1); ranking tasks rerank BM25
// candidates (bm25_k per query) and score like retrieval.
TaskEvalResult evaluate_reranking_task(const NirModel& model, const TaskDataset& dataset,
                                       Split split, int bm25_k = 10,
                                       const PromptSet* override_set = nullptr);

struct PipelineResult {
    std::map<std::string, double> retrieval_metrics;
    std::map<std::string, double> pipeline_metrics;
    std::vector<RankedRow> retrieval_rows;
    std::vector<RankedRow> reranked_rows;
};

PipelineResult run_pipeline_task(const NirModel& retriever, const NirModel& reranker,
                                 const TaskDataset& dataset, Split split, int top_k);

std::vector<ProbeItem> build_probe_items(const TaskDataset& qa_dataset, Split split,
                                         int max_items = 100);

void write_ranked_rows(const std::vector<RankedRow>& rows, const std::string& path);

// Serialized prompt sets (fused prompts travel outside encoder groups).
nlohmann::json prompt_set_to_json(const PromptSet& set);
PromptSet prompt_set_from_json(const nlohmann::json& j);

}  // namespace nirprompt
