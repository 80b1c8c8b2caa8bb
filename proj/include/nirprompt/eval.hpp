#pragma once

#include <functional>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "nirprompt/graph.hpp"
#include "nirprompt/prompts.hpp"

namespace nirprompt {

struct RankingMetrics {
    double p_at_1 = 0.0;
    double mrr = 0.0;
    double ndcg10 = 0.0;
};

// `ranked_relevances`: per query, the graded relevance of each returned item
// in rank order. P@1/MRR treat relevance > 0 as relevant; NDCG@10 uses
// gain 2^rel - 1 with log2(rank + 1) discounts, normalized per query by the
// ideal ordering of the same list. All three are macro-averaged.
RankingMetrics ranking_metrics(const std::vector<std::vector<double>>& ranked_relevances);

struct ClassificationMetrics {
    double accuracy = 0.0;
    double f1 = 0.0;
};

ClassificationMetrics classification_metrics(const std::vector<int>& predictions,
                                             const std::vector<int>& labels);

struct Bm25Stats {
    int doc_count = 0;
    double avg_doc_len = 0.0;
    std::unordered_map<int, int> doc_freq;

    static Bm25Stats build(const std::vector<std::vector<int>>& corpus);
};

// Okapi BM25 with k1 = 1.2, b = 0.75 and IDF = ln((N - df + 0.5)/(df + 0.5) + 1).
// Duplicate query terms accumulate their contributions.
double bm25_score(const std::vector<int>& query, const std::vector<int>& document,
                  const Bm25Stats& stats);

struct ProbeItem {
    std::vector<int> question;
    std::vector<int> answer_passage;
};

struct ProbeResult {
    double p_a_gt_q = 0.0;  // % REL(question, passage) > REL(question, question) as QA
    double p_q_gt_a = 0.0;  // % REL(question, question) > REL(question, passage) as PI
};

// Scorer signature: (task conditioning, text1, text2) -> REL.
using TaskScorer =
    std::function<double(const std::string&, const std::vector<int>&, const std::vector<int>&)>;

ProbeResult qa_vs_pi_probe(const TaskScorer& scorer, const std::vector<ProbeItem>& items);

// Pairwise cosine of concatenated slot embeddings, clamped below at zero,
// diagonal excluded, rows normalized to sum 1. Rows whose cosines all clamp
// to zero fall back to uniform and are reported through `flagged_rows`.
Matrix prompt_similarity_matrix(const std::vector<PromptSet>& prompt_sets,
                                std::vector<int>* flagged_rows = nullptr);

struct EvalReport {
    // per task -> metric name -> value in [0, 1]
    std::map<std::string, std::map<std::string, double>> per_task;
    double probe_p_a_gt_q = -1.0;  // percentages; negative = not measured
    double probe_p_q_gt_a = -1.0;
    Matrix similarity;  // row-normalized; empty when absent
    std::vector<std::string> similarity_tasks;
    Matrix fusion_weight_matrix;  // rows: held-out tasks, cols: source tasks
    std::vector<std::string> fusion_row_tasks, fusion_col_tasks;
    std::vector<int> flagged_similarity_rows;
    std::string run_manifest_ref;

    void validate() const;
    nlohmann::json to_json() const;
    std::string to_text() const;
    void save(const std::string& path) const;  // json next to a .txt rendering
};

void write_matrix_csv(const Matrix& m, const std::vector<std::string>& row_labels,
                      const std::vector<std::string>& col_labels, const std::string& path);

}  // namespace nirprompt
