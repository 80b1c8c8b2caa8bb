#include "nirprompt/reranker.hpp"

#include <algorithm>
#include <cmath>

#include "nirprompt/errors.hpp"

namespace nirprompt {

Verbalizer::Verbalizer()
    : yes_id(Vocabulary::standard().yes()), no_id(Vocabulary::standard().no()) {}

Verbalizer::Verbalizer(int yes, int no) : yes_id(yes), no_id(no) {
    require(yes_id != no_id, "config", "verbalizer labels must map to distinct tokens");
}

namespace {

void append_slot_r(BuiltInput& out, const PromptSet& prompts, Slot slot) {
    const SlotContent& content = prompts.slot(slot);
    const Vocabulary& vocab = Vocabulary::standard();
    if (content.is_manual()) {
        for (int id : content.manual_tokens) out.seq.token_ids.push_back(id);
    } else {
        for (Eigen::Index r = 0; r < content.embeddings.rows(); ++r) {
            out.seq.prompt_positions.push_back(static_cast<int>(out.seq.token_ids.size()));
            out.seq.token_ids.push_back(vocab.prompt_placeholder());
        }
        out.injected_slots.push_back(slot);
    }
}

ForwardResult forward_pair(Graph& g, const std::vector<int>& x1, const std::vector<int>& x2,
                           const PromptSet& prompts, const TransformerEncoder& model) {
    BuiltInput input = build_rerank_input(x1, x2, prompts, model.config());
    return model.forward_values(g, input.seq);
}

}  // namespace

BuiltInput build_rerank_input(const std::vector<int>& x1, const std::vector<int>& x2,
                              const PromptSet& prompts, const ModelConfig& cfg) {
    require(!x1.empty() && !x2.empty(), "empty-input", "rerank texts must be non-empty");
    require(prompts.stage == Stage::Reranking, "config",
            "rerank input needs reranking-stage prompts");
    const Vocabulary& vocab = Vocabulary::standard();

    const int overhead = 4 + prompts.slot(Slot::P1).width() + prompts.slot(Slot::P2).width() +
                         prompts.slot(Slot::Pq).width();
    const int budget = cfg.max_seq_len - overhead;
    require(budget >= 2, "length", "prompts leave no room for the text pair");

    std::vector<int> a = x1, b = x2;
    bool drop_from_a = true;
    while (static_cast<int>(a.size() + b.size()) > budget) {
        if (a.size() > b.size()) {
            a.pop_back();
        } else if (b.size() > a.size()) {
            b.pop_back();
        } else {
            (drop_from_a ? a : b).pop_back();
            drop_from_a = !drop_from_a;
        }
        require(!a.empty() && !b.empty(), "length", "truncation exhausted a text span");
    }

    BuiltInput out;
    out.seq.token_ids.push_back(vocab.cls());
    append_slot_r(out, prompts, Slot::P1);
    for (int id : a) out.seq.token_ids.push_back(id);
    out.seq.token_ids.push_back(vocab.sep());
    append_slot_r(out, prompts, Slot::P2);
    for (int id : b) out.seq.token_ids.push_back(id);
    out.seq.token_ids.push_back(vocab.sep());
    append_slot_r(out, prompts, Slot::Pq);
    out.seq.mask_positions.push_back(static_cast<int>(out.seq.token_ids.size()));
    out.seq.token_ids.push_back(vocab.mask());

    Eigen::Index rows = 0;
    for (Slot s : out.injected_slots) rows += prompts.slot(s).embeddings.rows();
    if (rows > 0) {
        Matrix injected(rows, prompts.slot(out.injected_slots.front()).embeddings.cols());
        Eigen::Index at = 0;
        for (Slot s : out.injected_slots) {
            const Matrix& e = prompts.slot(s).embeddings;
            injected.middleRows(at, e.rows()) = e;
            at += e.rows();
        }
        out.seq.injected = std::move(injected);
    }
    return out;
}

double rel_score(const std::vector<int>& x1, const std::vector<int>& x2,
                 const PromptSet& prompts, const TransformerEncoder& model,
                 const Verbalizer& verbalizer) {
    Graph g;
    ForwardResult fwd = forward_pair(g, x1, x2, prompts, model);
    const Matrix& probs = g.value(fwd.mask_probs[0]);
    return probs(0, verbalizer.yes_id) - probs(0, verbalizer.no_id);
}

Classification classify(const std::vector<int>& x1, const std::vector<int>& x2,
                        const PromptSet& prompts, const TransformerEncoder& model,
                        const Verbalizer& verbalizer) {
    Graph g;
    ForwardResult fwd = forward_pair(g, x1, x2, prompts, model);
    const Matrix& probs = g.value(fwd.mask_probs[0]);
    const double s1 = probs(0, verbalizer.yes_id);
    const double s0 = probs(0, verbalizer.no_id);
    const double p1 = s1 / (s1 + s0);
    Classification result;
    result.label = s1 > s0 ? 1 : 0;  // exact tie falls through to 0
    result.probability = result.label == 1 ? p1 : 1.0 - p1;
    return result;
}

double reranker_loss(const std::vector<LabeledPair>& batch, const PromptSet& prompts,
                     const TransformerEncoder& model, const Verbalizer& verbalizer) {
    require(!batch.empty(), "batch", "empty reranker batch");
    double total = 0.0;
    for (const LabeledPair& ex : batch) {
        require(ex.label == 0 || ex.label == 1, "label",
                "label " + std::to_string(ex.label) + " outside {0, 1}");
        Graph g;
        ForwardResult fwd = forward_pair(g, ex.x1, ex.x2, prompts, model);
        const Matrix& probs = g.value(fwd.mask_probs[0]);
        const double s1 = probs(0, verbalizer.yes_id);
        const double s0 = probs(0, verbalizer.no_id);
        const double p_correct = (ex.label == 1 ? s1 : s0) / (s1 + s0);
        total -= std::log(p_correct);
    }
    return total / static_cast<double>(batch.size());
}

Var reranker_example_loss_var(Graph& g, Var mask_probs, int label,
                              const Verbalizer& verbalizer) {
    require(label == 0 || label == 1, "label",
            "label " + std::to_string(label) + " outside {0, 1}");
    Var s1 = g.pick(mask_probs, 0, verbalizer.yes_id);
    Var s0 = g.pick(mask_probs, 0, verbalizer.no_id);
    Var correct = label == 1 ? s1 : s0;
    Var p = g.div(correct, g.add(s1, s0));
    return g.scale(g.log_fn(p), -1.0);
}

std::vector<RerankCandidate> rerank_candidates(const std::vector<int>& query,
                                               std::vector<RerankCandidate> candidates,
                                               const PromptSet& prompts,
                                               const TransformerEncoder& model,
                                               const Verbalizer& verbalizer) {
    require(!candidates.empty(), "empty-candidates", "no candidates to rerank");
    for (RerankCandidate& c : candidates)
        c.rel_score = rel_score(query, c.tokens, prompts, model, verbalizer);
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const RerankCandidate& a, const RerankCandidate& b) {
                         if (a.rel_score != b.rel_score) return a.rel_score > b.rel_score;
                         return a.original_rank < b.original_rank;
                     });
    return candidates;
}

}  // namespace nirprompt
