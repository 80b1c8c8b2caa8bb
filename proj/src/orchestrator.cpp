#include "nirprompt/orchestrator.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "nirprompt/errors.hpp"

namespace nirprompt {

namespace {

int binarize_label(const std::string& task, int label) {
    if (task == "DR") return label >= 1 ? 1 : 0;
    return label;
}

bool is_retrieval_positive(const std::string& task, int label) {
    if (task == "DR") return label == 2;
    return label == 1;
}

}  // namespace

std::string TrainConfig::resolved_optimizer() const {
    if (optimizer == "auto") return stage == Stage::Retrieval ? "adam" : "sgd";
    require(optimizer == "sgd" || optimizer == "adam", "config",
            "unknown optimizer '" + optimizer + "'");
    return optimizer;
}

double TrainConfig::resolved_learning_rate() const {
    if (learning_rate > 0.0) return learning_rate;
    return resolved_optimizer() == "adam" ? 2e-3 : 0.1;
}

BatchSampler::BatchSampler(const std::vector<std::pair<std::string, size_t>>& task_sizes,
                           int batch_size, uint64_t seed)
    : batch_size_(batch_size), rng_(seed) {
    require(!task_sizes.empty(), "config", "sampler needs at least one task");
    require(batch_size_ >= 1, "config", "batch size must be positive");
    for (const auto& [task, size] : task_sizes) {
        require(size >= 1, "config", "task '" + task + "' has no training examples");
        require(static_cast<size_t>(batch_size_) <= size, "batch-size",
                "batch size " + std::to_string(batch_size_) + " exceeds task '" + task +
                    "' with " + std::to_string(size) + " examples");
        TaskState state;
        state.task = task;
        state.order.resize(size);
        for (size_t i = 0; i < size; ++i) state.order[i] = i;
        rng_.shuffle(state.order);
        tasks_.push_back(std::move(state));
    }
}

BatchSampler::Batch BatchSampler::next() {
    TaskState& state = tasks_[rng_.uniform_index(tasks_.size())];
    if (state.cursor + static_cast<size_t>(batch_size_) > state.order.size()) {
        rng_.shuffle(state.order);
        state.cursor = 0;
    }
    Batch batch;
    batch.task = state.task;
    batch.indices.assign(state.order.begin() + static_cast<long>(state.cursor),
                         state.order.begin() + static_cast<long>(state.cursor) +
                             batch_size_);
    state.cursor += static_cast<size_t>(batch_size_);
    return batch;
}

NirModel NirModel::make_nir(const ModelConfig& cfg, Stage stage, PromptMode mode,
                            std::vector<std::string> tasks, int prompt_length) {
    NirModel model;
    model.flavor = "nir";
    model.stage = stage;
    model.mode = mode;
    model.tasks = std::move(tasks);
    model.prompt_length = prompt_length;
    model.config = cfg;
    model.encoder = std::make_unique<TransformerEncoder>(cfg);
    model.bank = std::make_unique<PromptBank>(stage, mode, model.tasks, prompt_length,
                                              cfg.hidden_dim, cfg.seed);
    return model;
}

NirModel NirModel::make_baseline(const ModelConfig& cfg, Stage stage,
                                 const std::string& variant, std::vector<std::string> tasks) {
    require(variant == "baseline_multi" || variant == "baseline_mark", "config",
            "unknown baseline variant '" + variant + "'");
    NirModel model;
    model.flavor = variant;
    model.stage = stage;
    model.tasks = std::move(tasks);
    model.config = cfg;
    model.encoder = std::make_unique<TransformerEncoder>(cfg);
    return model;
}

std::vector<ParameterGroup> NirModel::parameter_groups() const {
    std::vector<ParameterGroup> groups;
    groups.push_back(encoder->parameter_group());
    if (bank) {
        for (ParameterGroup& g : bank->parameter_groups()) groups.push_back(std::move(g));
    }
    return groups;
}

PromptSet NirModel::prompts_for(const std::string& task) const {
    require(flavor == "nir" && bank, "config", "baseline models carry no prompt sets");
    return bank->realize(task);
}

void NirModel::save(const std::string& dir) const {
    std::vector<ParameterGroup> groups = parameter_groups();
    nlohmann::json manifest = {
        {"format_version", 1},
        {"flavor", flavor},
        {"stage", to_string(stage)},
        {"mode", to_string(mode)},
        {"tasks", tasks},
        {"prompt_length", prompt_length},
        {"config",
         {{"num_layers", config.num_layers},
          {"hidden_dim", config.hidden_dim},
          {"num_heads", config.num_heads},
          {"vocab_size", config.vocab_size},
          {"max_seq_len", config.max_seq_len},
          {"boundary_layer", config.boundary_layer},
          {"seed", config.seed}}},
        {"vocab_fingerprint", Vocabulary::standard().fingerprint()},
        {"checkpoint_id", checkpoint::compute_id(groups)},
    };
    std::vector<std::string> tags;
    for (const ParameterGroup& g : groups) tags.push_back(g.tag);
    manifest["group_tags"] = tags;
    checkpoint::write_manifest(dir, manifest);
    for (const ParameterGroup& g : groups) checkpoint::write_group(dir, g);
}

NirModel NirModel::load(const std::string& dir) {
    nlohmann::json manifest = checkpoint::read_manifest(dir);
    require(manifest.at("format_version") == 1, "compatibility",
            "unsupported checkpoint format version");
    require(manifest.at("vocab_fingerprint") == Vocabulary::standard().fingerprint(),
            "compatibility", "checkpoint was built against a different vocabulary");
    ModelConfig cfg;
    const auto& jc = manifest.at("config");
    cfg.num_layers = jc.at("num_layers");
    cfg.hidden_dim = jc.at("hidden_dim");
    cfg.num_heads = jc.at("num_heads");
    cfg.vocab_size = jc.at("vocab_size");
    cfg.max_seq_len = jc.at("max_seq_len");
    cfg.boundary_layer = jc.at("boundary_layer");
    cfg.seed = jc.at("seed");
    std::string flavor = manifest.at("flavor");
    Stage stage = stage_from_string(manifest.at("stage"));
    std::vector<std::string> tasks = manifest.at("tasks");
    NirModel model =
        flavor == "nir"
            ? make_nir(cfg, stage, prompt_mode_from_string(manifest.at("mode")), tasks,
                       manifest.at("prompt_length"))
            : make_baseline(cfg, stage, flavor, tasks);
    for (ParameterGroup& g : model.parameter_groups()) checkpoint::read_group(dir, g);
    return model;
}

DataBundle DataBundle::generate(const std::vector<std::string>& task_ids,
                                const GenCounts& counts, uint64_t seed) {
    DataBundle bundle;
    for (const std::string& task : task_ids)
        bundle.tasks.emplace(task, generate_task_data(task, counts, seed));
    return bundle;
}

DataBundle DataBundle::load_dir(const std::string& dir,
                                const std::vector<std::string>& task_ids) {
    DataBundle bundle;
    for (const std::string& task : task_ids) {
        std::filesystem::path path = std::filesystem::path(dir) / (task + ".tsv");
        bundle.tasks.emplace(task, load_dataset(path.string()));
    }
    return bundle;
}

void DataBundle::save_dir(const std::string& dir) const {
    for (const auto& [task, dataset] : tasks)
        serialize_dataset(dataset, (std::filesystem::path(dir) / (task + ".tsv")).string());
}

const TaskDataset& DataBundle::at(const std::string& task) const {
    auto it = tasks.find(task);
    require(it != tasks.end(), "invalid-task", "no dataset for task '" + task + "'");
    return it->second;
}

std::vector<const MatchExample*> DataBundle::retrieval_positives(const std::string& task) const {
    std::vector<const MatchExample*> out;
    for (const MatchExample* ex : at(task).split(Split::Train))
        if (is_retrieval_positive(task, ex->label)) out.push_back(ex);
    return out;
}

std::vector<const MatchExample*> DataBundle::rerank_pairs(const std::string& task) const {
    return at(task).split(Split::Train);
}

TokenSequence build_baseline_retrieval_input(const std::vector<int>& text, int mark_token,
                                             const ModelConfig& cfg) {
    require(!text.empty(), "empty-input", "retrieval text is empty");
    const Vocabulary& vocab = Vocabulary::standard();
    const int overhead = 2 + (mark_token >= 0 ? 1 : 0);
    const int budget = cfg.max_seq_len - overhead;
    TokenSequence seq;
    seq.token_ids.push_back(vocab.cls());
    if (mark_token >= 0) seq.token_ids.push_back(mark_token);
    for (size_t i = 0; i < std::min(text.size(), static_cast<size_t>(budget)); ++i)
        seq.token_ids.push_back(text[i]);
    seq.mask_positions.push_back(static_cast<int>(seq.token_ids.size()));
    seq.token_ids.push_back(vocab.mask());
    return seq;
}

TokenSequence build_baseline_rerank_input(const std::vector<int>& x1, const std::vector<int>& x2,
                                          int mark_token, const ModelConfig& cfg) {
    require(!x1.empty() && !x2.empty(), "empty-input", "rerank texts must be non-empty");
    const Vocabulary& vocab = Vocabulary::standard();
    const int overhead = 4 + (mark_token >= 0 ? 1 : 0);
    const int budget = cfg.max_seq_len - overhead;
    require(budget >= 2, "length", "no room for the text pair");
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
    TokenSequence seq;
    seq.token_ids.push_back(vocab.cls());
    if (mark_token >= 0) seq.token_ids.push_back(mark_token);
    for (int id : a) seq.token_ids.push_back(id);
    seq.token_ids.push_back(vocab.sep());
    for (int id : b) seq.token_ids.push_back(id);
    seq.token_ids.push_back(vocab.sep());
    seq.mask_positions.push_back(static_cast<int>(seq.token_ids.size()));
    seq.token_ids.push_back(vocab.mask());
    return seq;
}

double TrainResult::mean_loss_first(int n) const {
    require(!log.empty(), "config", "empty training log");
    double sum = 0.0;
    int count = std::min<int>(n, static_cast<int>(log.size()));
    for (int i = 0; i < count; ++i) sum += log[static_cast<size_t>(i)].loss;
    return sum / count;
}

double TrainResult::mean_loss_last(int n) const {
    require(!log.empty(), "config", "empty training log");
    double sum = 0.0;
    int count = std::min<int>(n, static_cast<int>(log.size()));
    for (int i = 0; i < count; ++i) sum += log[log.size() - 1 - static_cast<size_t>(i)].loss;
    return sum / count;
}

void TrainResult::write_tsv(const std::string& path) const {
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "io", "cannot write training log " + path);
    out << "step\tphase\ttask\tloss\n";
    out.setf(std::ios::fixed);
    out.precision(9);
    for (const TrainLogRow& row : log)
        out << row.step << "\t" << row.phase << "\t" << row.task << "\t" << row.loss << "\n";
}

namespace {

// Fixed-rate SGD or Adam over an explicit parameter list. Optimizer state
// lives for one phase; only listed parameters ever receive updates.
class Optimizer {
public:
    Optimizer(std::string kind, double lr, std::vector<Parameter*> params)
        : kind_(std::move(kind)), lr_(lr), params_(std::move(params)) {
        if (kind_ == "adam") {
            for (Parameter* p : params_) {
                m_.emplace_back(Matrix::Zero(p->value.rows(), p->value.cols()));
                v_.emplace_back(Matrix::Zero(p->value.rows(), p->value.cols()));
            }
        }
    }

    void step() {
        ++t_;
        if (kind_ == "sgd") {
            for (Parameter* p : params_) p->value -= lr_ * p->grad;
            return;
        }
        const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        const double c1 = 1.0 - std::pow(b1, t_);
        const double c2 = 1.0 - std::pow(b2, t_);
        for (size_t i = 0; i < params_.size(); ++i) {
            Parameter* p = params_[i];
            m_[i] = b1 * m_[i] + (1.0 - b1) * p->grad;
            v_[i] = b2 * v_[i] + (1.0 - b2) * p->grad.cwiseProduct(p->grad);
            p->value.array() -=
                lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps);
        }
    }

private:
    std::string kind_;
    double lr_;
    std::vector<Parameter*> params_;
    std::vector<Matrix> m_, v_;
    double t_ = 0;
};

// Shared machinery for every training phase: homogeneous-task batches, a
// per-step graph, an optimizer over the chosen parameters, zeroed
// gradients after.
struct PhaseRunner {
    NirModel& model;
    Stage stage;
    const TrainConfig& cfg;
    std::string phase_name;
    std::map<std::string, std::vector<const MatchExample*>> examples;
    std::vector<Parameter*> trainable;
    // Returns the continuous slot vars for this step's task, or empty.
    std::function<std::map<Slot, Var>(Graph&, const std::string&)> slot_provider;

    PromptSet snapshot(Graph& g, const std::string& task,
                       const std::map<Slot, Var>& vars) const {
        PromptSet set;
        set.task_id = task;
        set.stage = stage;
        set.mode = model.mode;
        for (Slot slot : slots_for_stage(stage)) {
            SlotContent content;
            auto it = vars.find(slot);
            if (it != vars.end()) {
                content.embeddings = g.value(it->second);
            } else if (model.mode == PromptMode::Hybrid && slot == Slot::Pq) {
                content.manual_tokens = Vocabulary::standard().tokenize(kHybridQuestion);
            } else {
                content.manual_tokens = Vocabulary::standard().tokenize(
                    manual_template(task, stage, slot));
            }
            set.slots[slot] = std::move(content);
        }
        return set;
    }

    Var injected_for(Graph& g, const BuiltInput& input,
                     const std::map<Slot, Var>& vars) const {
        if (input.injected_slots.empty()) return Var{};
        std::vector<Var> blocks;
        for (Slot s : input.injected_slots) blocks.push_back(vars.at(s));
        return blocks.size() == 1 ? blocks[0] : g.concat_rows(blocks);
    }

    TrainResult run() {
        require(!cfg.tasks.empty(), "config", "training needs at least one task");
        std::vector<std::pair<std::string, size_t>> sizes;
        for (const std::string& task : cfg.tasks) {
            auto it = examples.find(task);
            require(it != examples.end() && !it->second.empty(), "config",
                    "task '" + task + "' has no usable training examples");
            sizes.emplace_back(task, it->second.size());
        }
        BatchSampler sampler(sizes, cfg.batch_size, cfg.seed);
        const bool is_baseline = model.flavor != "nir";
        const int mark = model.flavor == "baseline_mark" ? 1 : -1;
        Optimizer optimizer(cfg.resolved_optimizer(), cfg.resolved_learning_rate(), trainable);

        TrainResult result;
        for (int step = 1; step <= cfg.steps; ++step) {
            BatchSampler::Batch batch = sampler.next();
            const auto& pool = examples.at(batch.task);
            Graph g;
            std::map<Slot, Var> vars;
            PromptSet prompts;
            if (!is_baseline) {
                vars = slot_provider ? slot_provider(g, batch.task)
                                     : std::map<Slot, Var>{};
                prompts = snapshot(g, batch.task, vars);
            }
            const int mark_token =
                mark > 0 ? Vocabulary::standard().mark(batch.task) : -1;

            Var loss;
            if (stage == Stage::Retrieval) {
                std::vector<Var> q_rows, d_rows;
                for (size_t idx : batch.indices) {
                    const MatchExample* ex = pool[idx];
                    if (is_baseline) {
                        TokenSequence qs =
                            build_baseline_retrieval_input(ex->text1, mark_token, model.config);
                        TokenSequence ds =
                            build_baseline_retrieval_input(ex->text2, mark_token, model.config);
                        q_rows.push_back(model.encoder->forward(g, qs, Var{}).mask_hidden[0]);
                        d_rows.push_back(model.encoder->forward(g, ds, Var{}).mask_hidden[0]);
                    } else {
                        BuiltInput qi = build_retrieval_input(ex->text1, TextRole::Query,
                                                              prompts, model.config);
                        BuiltInput di = build_retrieval_input(ex->text2, TextRole::Document,
                                                              prompts, model.config);
                        q_rows.push_back(
                            model.encoder->forward(g, qi.seq, injected_for(g, qi, vars))
                                .mask_hidden[0]);
                        d_rows.push_back(
                            model.encoder->forward(g, di.seq, injected_for(g, di, vars))
                                .mask_hidden[0]);
                    }
                }
                loss = in_batch_contrastive_loss_var(g, g.concat_rows(q_rows),
                                                     g.concat_rows(d_rows));
            } else {
                Var acc;
                for (size_t idx : batch.indices) {
                    const MatchExample* ex = pool[idx];
                    int label = binarize_label(batch.task, ex->label);
                    ForwardResult fwd;
                    if (is_baseline) {
                        TokenSequence seq = build_baseline_rerank_input(ex->text1, ex->text2,
                                                                        mark_token, model.config);
                        fwd = model.encoder->forward(g, seq, Var{});
                    } else {
                        BuiltInput in =
                            build_rerank_input(ex->text1, ex->text2, prompts, model.config);
                        fwd = model.encoder->forward(g, in.seq, injected_for(g, in, vars));
                    }
                    Var li = reranker_example_loss_var(g, fwd.mask_probs[0], label);
                    acc = acc.valid() ? g.add(acc, li) : li;
                }
                loss = g.scale(acc, 1.0 / static_cast<double>(batch.indices.size()));
            }

            double loss_value = g.value(loss)(0, 0);
            g.backward(loss);
            optimizer.step();
            for (ParameterGroup& group : model.parameter_groups())
                for (Parameter* p : group.params) p->zero_grad();
            for (Parameter* p : trainable) p->zero_grad();  // covers external params
            result.log.push_back(TrainLogRow{step, phase_name, batch.task, loss_value});
        }
        return result;
    }
};

std::map<std::string, std::vector<const MatchExample*>> training_examples(
    const DataBundle& data, const std::vector<std::string>& tasks, Stage stage) {
    std::map<std::string, std::vector<const MatchExample*>> out;
    for (const std::string& task : tasks)
        out[task] = stage == Stage::Retrieval ? data.retrieval_positives(task)
                                              : data.rerank_pairs(task);
    return out;
}

std::vector<Parameter*> plm_params(NirModel& model) {
    std::vector<Parameter*> out;
    for (Parameter& p : model.encoder->params()) out.push_back(&p);
    return out;
}

std::vector<Parameter*> prompt_params(NirModel& model) {
    std::vector<Parameter*> out;
    require(model.bank != nullptr, "config", "model has no prompt encoders");
    for (ParameterGroup& g : model.bank->parameter_groups())
        for (Parameter* p : g.params) out.push_back(p);
    return out;
}

}  // namespace

TrainResult train_mdm(NirModel& model, const DataBundle& data, const TrainConfig& cfg) {
    require(model.flavor == "nir", "config", "MDM training applies to prompt models");
    require(model.mode != PromptMode::Manual, "nothing-trainable",
            "manual prompts have no trainable prompt encoders");
    PhaseRunner runner{model, model.stage, cfg, "mdm",
                       training_examples(data, cfg.tasks, model.stage), prompt_params(model),
                       [&](Graph& g, const std::string& task) {
                           return model.bank->realize_vars(g, task);
                       }};
    return runner.run();
}

TrainResult train_emm(NirModel& model, const DataBundle& data, const TrainConfig& cfg) {
    require(model.flavor == "nir", "config", "EMM training applies to prompt models");
    PhaseRunner runner{model, model.stage, cfg, "emm",
                       training_examples(data, cfg.tasks, model.stage), plm_params(model),
                       [&](Graph& g, const std::string& task) {
                           return model.bank->realize_vars(g, task);
                       }};
    return runner.run();
}

TrainResult train_baseline(NirModel& model, const DataBundle& data, const TrainConfig& cfg) {
    require(model.flavor == "baseline_multi" || model.flavor == "baseline_mark", "config",
            "train_baseline needs a baseline-flavored model");
    PhaseRunner runner{model, model.stage, cfg, model.flavor,
                       training_examples(data, cfg.tasks, model.stage), plm_params(model),
                       nullptr};
    return runner.run();
}

TrainResult train_alternating(NirModel& model, const DataBundle& data,
                              const TrainConfig& mdm_cfg, const TrainConfig& emm_cfg,
                              int rounds) {
    require(rounds >= 1, "config", "alternation needs at least one round");
    TrainResult combined;
    for (int round = 0; round < rounds; ++round) {
        TrainConfig mdm = mdm_cfg;
        TrainConfig emm = emm_cfg;
        mdm.seed = mdm_cfg.seed + static_cast<uint64_t>(round) * 1000003ULL;
        emm.seed = emm_cfg.seed + static_cast<uint64_t>(round) * 1000003ULL;
        for (TrainResult part : {train_mdm(model, data, mdm), train_emm(model, data, emm)})
            combined.log.insert(combined.log.end(), part.log.begin(), part.log.end());
    }
    return combined;
}

AdaptResult adapt_new_task(NirModel& model, const DataBundle& data, const AdaptConfig& cfg) {
    require(model.flavor == "nir" && model.mode != PromptMode::Manual, "config",
            "adaptation needs a model with learned prompts");
    require(std::find(model.tasks.begin(), model.tasks.end(), cfg.held_out_task) ==
                model.tasks.end(),
            "config", "held-out task must be excluded from the source tasks");

    std::vector<const MatchExample*> few_shot;
    int positives = 0, negatives = 0;
    for (const MatchExample* ex : data.at(cfg.held_out_task).split(Split::FewShot)) {
        few_shot.push_back(ex);
        (binarize_label(cfg.held_out_task, ex->label) == 1 ? positives : negatives) += 1;
    }
    require(positives == cfg.few_shot_positives && negatives == cfg.few_shot_negatives,
            "few-shot-size",
            "expected " + std::to_string(cfg.few_shot_positives) + "+" +
                std::to_string(cfg.few_shot_negatives) + " few-shot examples, found " +
                std::to_string(positives) + "+" + std::to_string(negatives));

    TrainConfig step_cfg;
    step_cfg.phase = "adapt_new_task";
    step_cfg.optimizer = cfg.optimizer;
    step_cfg.learning_rate = cfg.learning_rate;
    step_cfg.batch_size = cfg.batch_size;
    step_cfg.steps = cfg.steps;
    step_cfg.seed = cfg.seed;
    step_cfg.tasks = {cfg.held_out_task};
    step_cfg.stage = model.stage;

    std::map<std::string, std::vector<const MatchExample*>> pool;
    if (model.stage == Stage::Retrieval) {
        std::vector<const MatchExample*> positives_only;
        for (const MatchExample* ex : few_shot)
            if (is_retrieval_positive(cfg.held_out_task, ex->label)) positives_only.push_back(ex);
        pool[cfg.held_out_task] = std::move(positives_only);
    } else {
        pool[cfg.held_out_task] = few_shot;
    }

    AdaptResult result;
    if (cfg.use_fusion) {
        std::vector<PromptSet> sources;
        for (const std::string& task : model.tasks) sources.push_back(model.bank->realize(task));
        Parameter logits("fusion_logits",
                         Matrix::Zero(1, static_cast<Eigen::Index>(sources.size())));

        std::vector<Parameter*> trainable = {&logits};
        if (cfg.also_train_plm)
            for (Parameter* p : plm_params(model)) trainable.push_back(p);

        PhaseRunner runner{model, model.stage, step_cfg, "adapt_new_task", pool, trainable,
                           [&](Graph& g, const std::string&) {
                               return fuse_vars(g, logits, sources);
                           }};
        TrainResult log = runner.run();
        std::vector<double> raw(static_cast<size_t>(logits.value.cols()));
        for (Eigen::Index i = 0; i < logits.value.cols(); ++i)
            raw[static_cast<size_t>(i)] = logits.value(0, i);
        result.weights = fusion_weights(raw);
        result.prompts = fuse_prompts(raw, sources);
        result.prompts.task_id = cfg.held_out_task;
        result.train = std::move(log);
    } else {
        PromptBank fresh(model.stage, model.mode, {cfg.held_out_task}, model.prompt_length,
                         model.config.hidden_dim,
                         cfg.seed ^ fnv1a64(cfg.held_out_task));
        std::vector<Parameter*> trainable;
        for (ParameterGroup& g : fresh.parameter_groups())
            for (Parameter* p : g.params) trainable.push_back(p);
        if (cfg.also_train_plm)
            for (Parameter* p : plm_params(model)) trainable.push_back(p);

        PhaseRunner runner{model, model.stage, step_cfg, "adapt_new_task", pool, trainable,
                           [&](Graph& g, const std::string& task) {
                               return fresh.realize_vars(g, task);
                           }};
        result.train = runner.run();
        result.prompts = fresh.realize(cfg.held_out_task);
    }
    return result;
}

}  // namespace nirprompt
