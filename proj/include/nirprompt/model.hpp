#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "nirprompt/graph.hpp"
#include "nirprompt/rng.hpp"
#include "nirprompt/vocab.hpp"

namespace nirprompt {

struct ModelConfig {
    int num_layers = 4;
    int hidden_dim = 64;
    int num_heads = 4;
    int vocab_size = 0;  // 0 = size of the standard vocabulary
    int max_seq_len = 64;
    int boundary_layer = -1;  // -1 = num_layers - 1
    uint64_t seed = 1;

    int resolved_vocab_size() const;
    int resolved_boundary() const { return boundary_layer < 0 ? num_layers - 1 : boundary_layer; }
    int ffn_dim() const { return 4 * hidden_dim; }
    void validate() const;
};

// One encoder input: token ids plus externally injected embeddings at the
// prompt positions (row i of `injected` lands at prompt_positions[i]).
struct TokenSequence {
    std::vector<int> token_ids;
    std::vector<int> prompt_positions;
    Matrix injected;  // (#prompt_positions) x H; empty when no injection
    std::vector<int> mask_positions;

    int length() const { return static_cast<int>(token_ids.size()); }
    void validate(const ModelConfig& cfg) const;
};

struct ParameterGroup {
    std::string tag;
    std::vector<Parameter*> params;

    size_t scalar_count() const;
};

uint64_t group_hash(const ParameterGroup& g);

struct ForwardResult {
    std::vector<Var> layer_hidden;  // index 0 = post-injection embeddings, 1..n per layer
    Var final_hidden;
    std::vector<Var> mask_hidden;  // 1 x H per mask position
    std::vector<Var> mask_logits;  // 1 x V per mask position
    std::vector<Var> mask_probs;   // 1 x V per mask position
};

// Softmax over a logit row; throws a numeric error on non-finite input.
Matrix mask_distribution(const Matrix& logits);

// Trainable masked-language encoder (pre-norm transformer, learned absolute
// positions, untied MLM head). Prompt-position hidden states are overwritten
// with the injected embeddings after every layer up to the boundary layer,
// so prompt tokens steer the text but the text cannot reshape them.
class TransformerEncoder {
public:
    explicit TransformerEncoder(const ModelConfig& cfg);

    // `injected` must be a (#prompt_positions) x H graph node (or invalid
    // when the sequence has no prompt positions).
    ForwardResult forward(Graph& g, const TokenSequence& seq, Var injected,
                          bool need_mask = true) const;

    // Value-level forward for inference paths; builds its own graph.
    ForwardResult forward_values(Graph& g, const TokenSequence& seq,
                                 bool need_mask = true) const;

    ParameterGroup parameter_group();
    const ModelConfig& config() const { return cfg_; }

    std::vector<Parameter>& params() { return params_; }
    const std::vector<Parameter>& params() const { return params_; }

private:
    Parameter& p(const std::string& name);
    const Parameter& p(const std::string& name) const;

    ModelConfig cfg_;
    std::vector<Parameter> params_;
    std::unordered_map<std::string, size_t> by_name_;
};

}  // namespace nirprompt
