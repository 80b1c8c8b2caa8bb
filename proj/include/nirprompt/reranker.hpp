#pragma once

#include <string>
#include <vector>

#include "nirprompt/retriever.hpp"

namespace nirprompt {

// Maps the binary label set onto vocabulary words read off at [MASK].
struct Verbalizer {
    int yes_id;
    int no_id;

    Verbalizer();
    Verbalizer(int yes, int no);
};

// Pair template: [CLS] P1 x1 [SEP] P2 x2 [SEP] Pq [MASK]. When the pair is
// over budget, tokens are dropped from the tail of the longer text first
// (alternating on ties); prompts and specials are never cut.
BuiltInput build_rerank_input(const std::vector<int>& x1, const std::vector<int>& x2,
                              const PromptSet& prompts, const ModelConfig& cfg);

// REL = P(yes) - P(no) under the full-vocabulary mask distribution.
double rel_score(const std::vector<int>& x1, const std::vector<int>& x2,
                 const PromptSet& prompts, const TransformerEncoder& model,
                 const Verbalizer& verbalizer = Verbalizer());

struct Classification {
    int label;           // argmax of the two-way distribution; exact ties -> 0
    double probability;  // probability of the returned label
};

// Two-way distribution: P(y) = M(v(y)) / (M(yes) + M(no)).
Classification classify(const std::vector<int>& x1, const std::vector<int>& x2,
                        const PromptSet& prompts, const TransformerEncoder& model,
                        const Verbalizer& verbalizer = Verbalizer());

struct LabeledPair {
    std::vector<int> x1;
    std::vector<int> x2;
    int label;  // 0 or 1
};

// Mean binary cross-entropy of the two-way distribution over the batch.
double reranker_loss(const std::vector<LabeledPair>& batch, const PromptSet& prompts,
                     const TransformerEncoder& model,
                     const Verbalizer& verbalizer = Verbalizer());
// Per-example graph node given the mask probability row (1 x V).
Var reranker_example_loss_var(Graph& g, Var mask_probs, int label,
                              const Verbalizer& verbalizer = Verbalizer());

struct RerankCandidate {
    std::string doc_id;
    std::vector<int> tokens;
    double rel_score = 0.0;
    int original_rank = 0;
};

// Sorts by rel_score descending, ties by original_rank ascending.
std::vector<RerankCandidate> rerank_candidates(const std::vector<int>& query,
                                               std::vector<RerankCandidate> candidates,
                                               const PromptSet& prompts,
                                               const TransformerEncoder& model,
                                               const Verbalizer& verbalizer = Verbalizer());

}  // namespace nirprompt
