#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nirprompt/checkpoint.hpp"
#include "nirprompt/reranker.hpp"
#include "nirprompt/taskgen.hpp"

namespace nirprompt {

struct TrainConfig {
    std::string phase;  // mdm | emm | baseline_multi | baseline_mark
    // "auto" picks per stage: plain SGD for reranking, Adam for retrieval
    // (the raw dot-product scale must grow over orders of magnitude there,
    // which fixed-rate SGD either stalls on or blows up).
    std::string optimizer = "auto";  // auto | sgd | adam
    double learning_rate = 0.0;      // 0 = optimizer default
    int batch_size = 8;
    int steps = 500;
    uint64_t seed = 1;
    std::vector<std::string> tasks;
    Stage stage = Stage::Reranking;

    std::string resolved_optimizer() const;
    double resolved_learning_rate() const;
};

struct AdaptConfig {
    std::string held_out_task;
    int few_shot_positives = 32;
    int few_shot_negatives = 32;
    bool use_fusion = true;
    std::string optimizer = "auto";
    double learning_rate = 0.5;
    int batch_size = 8;
    int steps = 150;
    uint64_t seed = 1;
    bool also_train_plm = false;  // fidelity knob; default isolates the fusion weights
};

// Homogeneous-task batch stream: the task is drawn uniformly per step, and
// examples inside a task are consumed without replacement per epoch. The
// stream depends only on (task sizes, batch size, seed), so baselines and
// prompt runs share a schedule under a shared seed.
class BatchSampler {
public:
    struct Batch {
        std::string task;
        std::vector<size_t> indices;
    };

    BatchSampler(const std::vector<std::pair<std::string, size_t>>& task_sizes, int batch_size,
                 uint64_t seed);
    Batch next();

private:
    struct TaskState {
        std::string task;
        std::vector<size_t> order;
        size_t cursor = 0;
    };
    std::vector<TaskState> tasks_;
    int batch_size_;
    Rng rng_;
};

// Model bundle: the encoder plus (for prompt flavors) the per-task prompt
// bank. Baseline flavors carry no prompt state.
struct NirModel {
    std::string flavor = "nir";  // nir | baseline_multi | baseline_mark
    Stage stage = Stage::Reranking;
    PromptMode mode = PromptMode::Continuous;
    std::vector<std::string> tasks;
    int prompt_length = 3;
    ModelConfig config;
    std::unique_ptr<TransformerEncoder> encoder;
    std::unique_ptr<PromptBank> bank;

    static NirModel make_nir(const ModelConfig& cfg, Stage stage, PromptMode mode,
                             std::vector<std::string> tasks, int prompt_length = 3);
    static NirModel make_baseline(const ModelConfig& cfg, Stage stage, const std::string& variant,
                                  std::vector<std::string> tasks);

    std::vector<ParameterGroup> parameter_groups() const;
    PromptSet prompts_for(const std::string& task) const;  // realized, value-level

    void save(const std::string& dir) const;
    static NirModel load(const std::string& dir);
    std::string checkpoint_id() const { return checkpoint::compute_id(parameter_groups()); }
};

struct DataBundle {
    std::map<std::string, TaskDataset> tasks;

    static DataBundle generate(const std::vector<std::string>& task_ids, const GenCounts& counts,
                               uint64_t seed);
    static DataBundle load_dir(const std::string& dir, const std::vector<std::string>& task_ids);
    void save_dir(const std::string& dir) const;

    const TaskDataset& at(const std::string& task) const;
    // Training views. Retrieval keeps fully-relevant pairs only; reranking
    // uses every pair with the label binarized (DR grades >= 1 count as 1).
    std::vector<const MatchExample*> retrieval_positives(const std::string& task) const;
    std::vector<const MatchExample*> rerank_pairs(const std::string& task) const;
};

// Plain templates for the fine-tuning baselines. mark_token < 0 omits the
// task mark ([CLS] x [MASK]); otherwise the mark follows [CLS].
TokenSequence build_baseline_retrieval_input(const std::vector<int>& text, int mark_token,
                                             const ModelConfig& cfg);
TokenSequence build_baseline_rerank_input(const std::vector<int>& x1, const std::vector<int>& x2,
                                          int mark_token, const ModelConfig& cfg);

struct TrainLogRow {
    int step;
    std::string phase;
    std::string task;
    double loss;
};

struct TrainResult {
    std::vector<TrainLogRow> log;

    double mean_loss_first(int n) const;
    double mean_loss_last(int n) const;
    void write_tsv(const std::string& path) const;
};

TrainResult train_mdm(NirModel& model, const DataBundle& data, const TrainConfig& cfg);
TrainResult train_emm(NirModel& model, const DataBundle& data, const TrainConfig& cfg);
TrainResult train_baseline(NirModel& model, const DataBundle& data, const TrainConfig& cfg);
// MDM/EMM alternation; round count is configuration (default one round).
TrainResult train_alternating(NirModel& model, const DataBundle& data, const TrainConfig& mdm_cfg,
                              const TrainConfig& emm_cfg, int rounds);

struct AdaptResult {
    std::vector<double> weights;  // normalized; empty without fusion
    PromptSet prompts;            // prompts to use for the held-out task
    TrainResult train;
};

AdaptResult adapt_new_task(NirModel& model, const DataBundle& data, const AdaptConfig& cfg);

}  // namespace nirprompt
