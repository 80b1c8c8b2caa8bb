#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "nirprompt/common.hpp"
#include "nirprompt/graph.hpp"
#include "nirprompt/model.hpp"

namespace nirprompt {

// Realized content for one prompt slot: token ids (manual) or an m x H
// embedding block (continuous).
struct SlotContent {
    std::vector<int> manual_tokens;
    Matrix embeddings;

    bool is_manual() const { return embeddings.size() == 0; }
    int width() const {
        return is_manual() ? static_cast<int>(manual_tokens.size())
                           : static_cast<int>(embeddings.rows());
    }
};

struct PromptSet {
    std::string task_id;
    Stage stage = Stage::Reranking;
    PromptMode mode = PromptMode::Manual;
    std::map<Slot, SlotContent> slots;

    const SlotContent& slot(Slot s) const;
};

std::vector<Slot> slots_for_stage(Stage stage);

// Manual template text for (task, stage, slot). Throws a missing-template
// error for tasks without a manual entry in that stage.
std::string manual_template(const std::string& task_id, Stage stage, Slot slot,
                            bool verbatim_typo = false);

extern const char* kHybridQuestion;  // shared manual Pq used by hybrid prompts

// Learned prompt generator for one slot: a bidirectional LSTM over a
// trainable init block, followed by a two-layer MLP. Encoders share no
// parameters; the output depends on encoder parameters only.
class PromptEncoder {
public:
    PromptEncoder(std::string key, int length, int hidden_dim, uint64_t seed);

    Var encode(Graph& g);           // m x H, differentiable
    Matrix encode_values() const;   // value-only convenience

    ParameterGroup parameter_group();
    const std::string& key() const { return key_; }
    int length() const { return m_; }

private:
    std::string key_;
    int m_, H_, Hl_;
    std::vector<Parameter> params_;
    Parameter& p(const std::string& name);
    const Parameter& p(const std::string& name) const;
    std::unordered_map<std::string, size_t> by_name_;
};

// All prompt state for one (stage, mode) across a set of tasks: the manual
// strings and one independent encoder per continuous slot per task.
class PromptBank {
public:
    PromptBank(Stage stage, PromptMode mode, std::vector<std::string> task_ids,
               int continuous_length, int hidden_dim, uint64_t seed,
               bool verbatim_typo = false);

    PromptSet render_manual(const std::string& task_id) const;
    PromptSet realize(const std::string& task_id) const;
    std::map<Slot, Var> realize_vars(Graph& g, const std::string& task_id) const;

    std::vector<ParameterGroup> parameter_groups();
    PromptEncoder& encoder(const std::string& task_id, Slot slot);
    const PromptEncoder& encoder(const std::string& task_id, Slot slot) const;
    bool has_encoders() const { return !encoders_.empty(); }

    Stage stage() const { return stage_; }
    PromptMode mode() const { return mode_; }
    int continuous_length() const { return m_; }
    const std::vector<std::string>& task_ids() const { return task_ids_; }

private:
    std::vector<Slot> continuous_slots() const;
    std::string encoder_key(const std::string& task_id, Slot slot) const;

    Stage stage_;
    PromptMode mode_;
    std::vector<std::string> task_ids_;
    int m_, H_;
    bool verbatim_typo_;
    std::map<std::string, std::unique_ptr<PromptEncoder>> encoders_;  // by key
};

// Softmax-normalized prompt fusion across source tasks. Continuous slots
// combine as the weighted sum; manual slots must agree and copy through.
std::vector<double> fusion_weights(const std::vector<double>& raw_logits);
PromptSet fuse_prompts(const std::vector<double>& raw_logits,
                       const std::vector<PromptSet>& sources);
// Graph-level fusion for learning the logits themselves.
std::map<Slot, Var> fuse_vars(Graph& g, Parameter& logits,
                              const std::vector<PromptSet>& sources);

}  // namespace nirprompt
