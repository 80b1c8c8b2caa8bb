#pragma once

#include <string>
#include <vector>

#include "nirprompt/model.hpp"
#include "nirprompt/prompts.hpp"

namespace nirprompt {

enum class TextRole { Query, Document };

// A built encoder input plus the order in which continuous slots contribute
// rows to the injected block (training code concatenates the matching slot
// vars in this order).
struct BuiltInput {
    TokenSequence seq;
    std::vector<Slot> injected_slots;
};

// Query template: [CLS] P1 text Pq [MASK]; documents swap in P2/Pd.
// The text span is tail-truncated to fit max_seq_len; prompts and the
// trailing [MASK] are never cut.
BuiltInput build_retrieval_input(const std::vector<int>& text, TextRole role,
                                 const PromptSet& prompts, const ModelConfig& cfg);

// Final-layer hidden state at the [MASK] position.
Eigen::VectorXd encode_text(const std::vector<int>& text, TextRole role,
                            const PromptSet& prompts, const TransformerEncoder& model);

// Mean over queries of -log softmax(sim(q_i, d_i)) against all B documents,
// with sim the raw dot product.
double in_batch_contrastive_loss(const Matrix& query_vectors, const Matrix& doc_vectors);
Var in_batch_contrastive_loss_var(Graph& g, Var query_rows, Var doc_rows);

struct SearchHit {
    std::string doc_id;
    double score = 0.0;
    int rank = 0;  // 1-based
};

class CorpusIndex {
public:
    CorpusIndex() = default;
    CorpusIndex(std::string task_id, std::string prompt_mode, std::string checkpoint_id,
                int hidden_dim);

    void add(const std::string& doc_id, const Eigen::VectorXd& vec);
    size_t size() const { return doc_ids_.size(); }
    int hidden_dim() const { return hidden_dim_; }

    // Exact top-k by dot product, descending; ties broken by ascending doc id.
    std::vector<SearchHit> search(const Eigen::VectorXd& query, int top_k) const;

    void save(const std::string& dir) const;
    static CorpusIndex load(const std::string& dir);

    const std::vector<std::string>& doc_ids() const { return doc_ids_; }
    const std::string& task_id() const { return task_id_; }
    const std::string& prompt_mode() const { return prompt_mode_; }
    const std::string& checkpoint_id() const { return checkpoint_id_; }

private:
    std::string task_id_, prompt_mode_, checkpoint_id_;
    int hidden_dim_ = 0;
    std::vector<std::string> doc_ids_;
    std::vector<Eigen::VectorXd> vectors_;
};

}  // namespace nirprompt
