#include "nirprompt/cli_commands.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "nirprompt/experiments.hpp"
#include "nirprompt/manifest.hpp"
#include "nirprompt/plot.hpp"

namespace nirprompt::cli {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_csv(const std::string& csv) {
    std::vector<std::string> out;
    std::istringstream is(csv);
    std::string item;
    while (std::getline(is, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

std::string resolve_out(const std::string& out) {
    const char* root = std::getenv("NIRPROMPT_OUT_ROOT");
    fs::path p(out);
    if (root != nullptr && *root != '\0' && p.is_relative()) return (fs::path(root) / p).string();
    return out;
}

// --config accepts either a bare config object or a previously written run
// manifest (its "config" field is used), so runs replay from manifests.
nlohmann::json load_config_json(const std::string& path) {
    if (path.empty()) return nlohmann::json::object();
    std::ifstream in(path);
    require(in.good(), "io", "cannot read config file " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    if (j.contains("config")) return j.at("config");
    return j;
}

// Applies config-file values to options the user did not pass explicitly.
struct ConfigFallback {
    CLI::App* cmd;
    nlohmann::json j;

    template <typename T>
    void merge(const std::string& flag, const std::string& key, T& var) const {
        const CLI::Option* opt = cmd->get_option_no_throw(flag);
        if ((opt == nullptr || opt->count() == 0) && j.contains(key)) var = j.at(key).get<T>();
    }
};

struct ModelArgs {
    int layers = 4;
    int hidden = 64;
    int heads = 4;
    int max_seq_len = 64;
    int boundary = -1;
    uint64_t model_seed = 7;
    int prompt_len = 3;

    void attach(CLI::App* cmd) {
        cmd->add_option("--layers", layers, "Encoder layers");
        cmd->add_option("--hidden", hidden, "Hidden width");
        cmd->add_option("--heads", heads, "Attention heads");
        cmd->add_option("--max-seq-len", max_seq_len, "Maximum sequence length");
        cmd->add_option("--boundary", boundary, "Prompt-fixing boundary layer (-1 = layers-1)");
        cmd->add_option("--model-seed", model_seed, "Model init seed");
        cmd->add_option("--prompt-len", prompt_len, "Continuous prompt tokens per slot");
    }

    void merge(const ConfigFallback& f) {
        f.merge("--layers", "layers", layers);
        f.merge("--hidden", "hidden", hidden);
        f.merge("--heads", "heads", heads);
        f.merge("--max-seq-len", "max_seq_len", max_seq_len);
        f.merge("--boundary", "boundary", boundary);
        f.merge("--model-seed", "model_seed", model_seed);
        f.merge("--prompt-len", "prompt_len", prompt_len);
    }

    ModelConfig to_config() const {
        ModelConfig cfg;
        cfg.num_layers = layers;
        cfg.hidden_dim = hidden;
        cfg.num_heads = heads;
        cfg.max_seq_len = max_seq_len;
        cfg.boundary_layer = boundary;
        cfg.seed = model_seed;
        return cfg;
    }

    nlohmann::json to_json() const {
        return {{"layers", layers},       {"hidden", hidden},
                {"heads", heads},         {"max_seq_len", max_seq_len},
                {"boundary", boundary},   {"model_seed", model_seed},
                {"prompt_len", prompt_len}};
    }
};

void add_data_inputs(RunManifest& manifest, const std::string& data_dir,
                     const std::vector<std::string>& tasks) {
    for (const std::string& task : tasks)
        manifest.add_input((fs::path(data_dir) / (task + ".tsv")).string());
}

std::vector<std::string> default_tasks(Stage stage) {
    return stage == Stage::Retrieval ? kRetrievalTasks : kAllTasks;
}

struct TrainCommand {
    std::string kind;  // mdm | emm | baseline
    std::string config_path, data_dir, out_dir, stage_str = "reranking";
    std::string mode_str = "continuous", variant = "multi", tasks_csv, init_ckpt;
    std::string optimizer = "auto";
    double lr = 0.0;  // 0 = optimizer default
    int steps = 500, batch = 8;
    uint64_t seed = 1;
    ModelArgs model;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON config or manifest to replay");
        cmd->add_option("--data", data_dir, "Dataset directory");
        cmd->add_option("--out", out_dir, "Output directory")->required();
        cmd->add_option("--stage", stage_str, "retrieval | reranking");
        if (kind != "baseline") cmd->add_option("--mode", mode_str, "continuous | hybrid | manual");
        if (kind == "baseline") cmd->add_option("--variant", variant, "multi | mark");
        cmd->add_option("--tasks", tasks_csv, "Comma-separated task ids");
        cmd->add_option("--init", init_ckpt, "Checkpoint to continue from");
        cmd->add_option("--optimizer", optimizer, "auto | sgd | adam");
        cmd->add_option("--lr", lr, "Learning rate (0 = optimizer default)");
        cmd->add_option("--steps", steps, "Training steps");
        cmd->add_option("--batch-size", batch, "Batch size");
        cmd->add_option("--seed", seed, "Training seed");
        model.attach(cmd);
    }

    int execute(CLI::App* cmd) {
        ConfigFallback f{cmd, load_config_json(config_path)};
        f.merge("--data", "data", data_dir);
        f.merge("--stage", "stage", stage_str);
        f.merge("--mode", "mode", mode_str);
        f.merge("--variant", "variant", variant);
        f.merge("--tasks", "tasks", tasks_csv);
        f.merge("--init", "init", init_ckpt);
        f.merge("--optimizer", "optimizer", optimizer);
        f.merge("--lr", "lr", lr);
        f.merge("--steps", "steps", steps);
        f.merge("--batch-size", "batch_size", batch);
        f.merge("--seed", "seed", seed);
        model.merge(f);
        require(!data_dir.empty(), "config", "--data is required");

        const std::string out = resolve_out(out_dir);
        Stage stage = stage_from_string(stage_str);
        std::vector<std::string> tasks =
            tasks_csv.empty() ? default_tasks(stage) : split_csv(tasks_csv);
        DataBundle data = DataBundle::load_dir(data_dir, tasks);

        NirModel nir_model =
            !init_ckpt.empty()
                ? NirModel::load(init_ckpt)
                : (kind == "baseline"
                       ? NirModel::make_baseline(model.to_config(), stage,
                                                 "baseline_" + variant, tasks)
                       : NirModel::make_nir(model.to_config(), stage,
                                            prompt_mode_from_string(mode_str), tasks,
                                            model.prompt_len));
        require(nir_model.stage == stage, "config",
                "checkpoint stage does not match the requested stage");

        TrainConfig cfg;
        cfg.phase = kind == "baseline" ? nir_model.flavor : kind;
        cfg.optimizer = optimizer;
        cfg.learning_rate = lr;
        cfg.batch_size = batch;
        cfg.steps = steps;
        cfg.seed = seed;
        cfg.tasks = tasks;
        cfg.stage = stage;

        TrainResult result = kind == "mdm"   ? train_mdm(nir_model, data, cfg)
                             : kind == "emm" ? train_emm(nir_model, data, cfg)
                                             : train_baseline(nir_model, data, cfg);

        nir_model.save((fs::path(out) / "checkpoint").string());
        result.write_tsv((fs::path(out) / "train_log.tsv").string());
        std::vector<double> losses;
        for (const TrainLogRow& row : result.log) losses.push_back(row.loss);
        svg_training_curve(losses, "training loss (" + cfg.phase + ")",
                           (fs::path(out) / "train_loss.svg").string());

        RunManifest manifest;
        manifest.command = "train-" + kind;
        manifest.config = {{"data", data_dir},   {"stage", stage_str},
                           {"mode", mode_str},   {"variant", variant},
                           {"tasks", tasks_csv}, {"init", init_ckpt},
                           {"optimizer", optimizer}, {"lr", lr},
                           {"steps", steps},     {"batch_size", batch},
                           {"seed", seed}};
        nlohmann::json model_json = model.to_json();
        for (auto& [k, v] : model_json.items()) manifest.config[k] = v;
        manifest.seeds = {seed, model.model_seed};
        add_data_inputs(manifest, data_dir, tasks);
        if (!init_ckpt.empty())
            manifest.add_input((fs::path(init_ckpt) / "manifest.json").string());
        manifest.checkpoint_ids = {nir_model.checkpoint_id()};
        manifest.write(out);
        std::cout << "checkpoint " << nir_model.checkpoint_id() << " written to " << out
                  << "\n";
        return 0;
    }
};

EvalReport merged_report(const std::map<std::string, std::map<std::string, double>>& per_task) {
    EvalReport report;
    report.per_task = per_task;
    return report;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"Desk-scale multi-task neural IR with decoupled prompt training"};
    app.require_subcommand(1);

    // ---- gen-data ----
    auto* gen = app.add_subcommand("gen-data", "Generate the synthetic task suite");
    struct {
        std::string config_path, out, tasks_csv = "DR,QA,RD,PI,NLI";
        uint64_t seed = 1;
        int train = 1000, test = 200, ood = 200, few = 64;
    } gd;
    gen->add_option("--config", gd.config_path, "JSON config or manifest to replay");
    gen->add_option("--out", gd.out, "Output directory")->required();
    gen->add_option("--seed", gd.seed, "Generator seed");
    gen->add_option("--tasks", gd.tasks_csv, "Comma-separated task ids");
    gen->add_option("--train", gd.train, "Train examples per task");
    gen->add_option("--test", gd.test, "In-domain test examples per task");
    gen->add_option("--ood", gd.ood, "Out-of-domain test examples per task");
    gen->add_option("--few-shot", gd.few, "Few-shot examples per task");
    gen->callback([&]() {
        ConfigFallback f{gen, load_config_json(gd.config_path)};
        f.merge("--seed", "seed", gd.seed);
        f.merge("--tasks", "tasks", gd.tasks_csv);
        f.merge("--train", "train", gd.train);
        f.merge("--test", "test", gd.test);
        f.merge("--ood", "ood", gd.ood);
        f.merge("--few-shot", "few_shot", gd.few);
        const std::string out = resolve_out(gd.out);
        GenCounts counts{gd.train, gd.test, gd.ood, gd.few};
        DataBundle bundle = DataBundle::generate(split_csv(gd.tasks_csv), counts, gd.seed);
        bundle.save_dir(out);
        RunManifest manifest;
        manifest.command = "gen-data";
        manifest.config = {{"seed", gd.seed},   {"tasks", gd.tasks_csv}, {"train", gd.train},
                           {"test", gd.test},   {"ood", gd.ood},         {"few_shot", gd.few}};
        manifest.seeds = {gd.seed};
        manifest.write(out);
        std::cout << "wrote " << bundle.tasks.size() << " task datasets to " << out << "\n";
    });

    // ---- train commands ----
    TrainCommand mdm{"mdm"}, emm{"emm"}, baseline{"baseline"};
    auto* mdm_cmd = app.add_subcommand("train-mdm", "Train prompt encoders (PLM frozen)");
    mdm.attach(mdm_cmd);
    mdm_cmd->callback([&]() { mdm.execute(mdm_cmd); });
    auto* emm_cmd = app.add_subcommand("train-emm", "Train the PLM (prompt encoders frozen)");
    emm.attach(emm_cmd);
    emm_cmd->callback([&]() { emm.execute(emm_cmd); });
    auto* base_cmd = app.add_subcommand("train-baseline", "Fine-tuning baselines");
    baseline.attach(base_cmd);
    base_cmd->callback([&]() { baseline.execute(base_cmd); });

    // ---- eval ----
    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint per task");
    struct {
        std::string config_path, ckpt, data, out, split = "test_in_domain", tasks_csv,
                    prompts_json;
        int top_k = 0, bm25_k = 10;
    } ea;
    ev->add_option("--config", ea.config_path, "JSON config or manifest to replay");
    ev->add_option("--ckpt", ea.ckpt, "Checkpoint directory")->required();
    ev->add_option("--data", ea.data, "Dataset directory")->required();
    ev->add_option("--out", ea.out, "Output directory")->required();
    ev->add_option("--split", ea.split, "Dataset split to evaluate");
    ev->add_option("--tasks", ea.tasks_csv, "Tasks (default: checkpoint tasks)");
    ev->add_option("--prompts", ea.prompts_json, "Adapted prompt set JSON (single task)");
    ev->add_option("--top-k", ea.top_k, "Retrieval depth (0 = full corpus)");
    ev->add_option("--bm25-k", ea.bm25_k, "BM25 candidates for reranking");
    ev->callback([&]() {
        ConfigFallback f{ev, load_config_json(ea.config_path)};
        f.merge("--split", "split", ea.split);
        f.merge("--tasks", "tasks", ea.tasks_csv);
        f.merge("--top-k", "top_k", ea.top_k);
        f.merge("--bm25-k", "bm25_k", ea.bm25_k);
        const std::string out = resolve_out(ea.out);
        NirModel model = NirModel::load(ea.ckpt);
        PromptSet override_set;
        bool has_override = !ea.prompts_json.empty();
        if (has_override) {
            std::ifstream in(ea.prompts_json);
            require(in.good(), "io", "cannot read prompts file " + ea.prompts_json);
            override_set = prompt_set_from_json(nlohmann::json::parse(in));
        }
        std::vector<std::string> tasks = !ea.tasks_csv.empty() ? split_csv(ea.tasks_csv)
                                         : has_override
                                             ? std::vector<std::string>{override_set.task_id}
                                             : model.tasks;
        DataBundle data = DataBundle::load_dir(ea.data, tasks);
        Split split = split_from_string(ea.split);

        EvalReport report;
        for (const std::string& task : tasks) {
            const PromptSet* ov = has_override && override_set.task_id == task ? &override_set
                                                                               : nullptr;
            TaskEvalResult r = model.stage == Stage::Retrieval
                                   ? evaluate_retrieval_task(model, data.at(task), split,
                                                             ea.top_k, ov)
                                   : evaluate_reranking_task(model, data.at(task), split,
                                                             ea.bm25_k, ov);
            report.per_task[task] = r.metrics;
            if (!r.rows.empty())
                write_ranked_rows(r.rows, (fs::path(out) / ("rows_" + task + ".tsv")).string());
        }
        report.run_manifest_ref = "manifest.json";  // sibling of the report
        report.save((fs::path(out) / "report.json").string());

        RunManifest manifest;
        manifest.command = "eval";
        manifest.config = {{"ckpt", ea.ckpt},     {"data", ea.data},
                           {"split", ea.split},   {"tasks", ea.tasks_csv},
                           {"top_k", ea.top_k},   {"bm25_k", ea.bm25_k},
                           {"prompts", ea.prompts_json}};
        add_data_inputs(manifest, ea.data, tasks);
        manifest.add_input((fs::path(ea.ckpt) / "manifest.json").string());
        manifest.checkpoint_ids = {model.checkpoint_id()};
        manifest.write(out);
        std::cout << report.to_text();
    });

    // ---- pipeline ----
    auto* pl = app.add_subcommand("pipeline", "Retrieve then rerank end to end");
    struct {
        std::string config_path, retriever, reranker, data, out, split = "test_in_domain",
                    tasks_csv;
        int top_k = 10;
    } pa;
    pl->add_option("--config", pa.config_path, "JSON config or manifest to replay");
    pl->add_option("--retriever", pa.retriever, "Retrieval checkpoint")->required();
    pl->add_option("--reranker", pa.reranker, "Reranking checkpoint")->required();
    pl->add_option("--data", pa.data, "Dataset directory")->required();
    pl->add_option("--out", pa.out, "Output directory")->required();
    pl->add_option("--split", pa.split, "Dataset split");
    pl->add_option("--tasks", pa.tasks_csv, "Tasks (default: retriever tasks)");
    pl->add_option("--top-k", pa.top_k, "Candidates passed to the reranker");
    pl->callback([&]() {
        ConfigFallback f{pl, load_config_json(pa.config_path)};
        f.merge("--split", "split", pa.split);
        f.merge("--tasks", "tasks", pa.tasks_csv);
        f.merge("--top-k", "top_k", pa.top_k);
        const std::string out = resolve_out(pa.out);
        nlohmann::json m1 = checkpoint::read_manifest(pa.retriever);
        nlohmann::json m2 = checkpoint::read_manifest(pa.reranker);
        require(m1.at("vocab_fingerprint") == m2.at("vocab_fingerprint"), "compatibility",
                "retriever and reranker were built against different vocabularies");
        NirModel retriever = NirModel::load(pa.retriever);
        NirModel reranker = NirModel::load(pa.reranker);
        std::vector<std::string> tasks =
            pa.tasks_csv.empty() ? retriever.tasks : split_csv(pa.tasks_csv);
        DataBundle data = DataBundle::load_dir(pa.data, tasks);
        Split split = split_from_string(pa.split);

        EvalReport report;
        for (const std::string& task : tasks) {
            PipelineResult r =
                run_pipeline_task(retriever, reranker, data.at(task), split, pa.top_k);
            report.per_task[task + "/retrieval"] = r.retrieval_metrics;
            report.per_task[task + "/pipeline"] = r.pipeline_metrics;
            write_ranked_rows(r.retrieval_rows,
                              (fs::path(out) / ("retrieval_rows_" + task + ".tsv")).string());
            write_ranked_rows(r.reranked_rows,
                              (fs::path(out) / ("pipeline_rows_" + task + ".tsv")).string());
        }
        report.run_manifest_ref = "manifest.json";  // sibling of the report
        report.save((fs::path(out) / "report.json").string());

        RunManifest manifest;
        manifest.command = "pipeline";
        manifest.config = {{"retriever", pa.retriever}, {"reranker", pa.reranker},
                           {"data", pa.data},           {"split", pa.split},
                           {"tasks", pa.tasks_csv},     {"top_k", pa.top_k}};
        add_data_inputs(manifest, pa.data, tasks);
        manifest.add_input((fs::path(pa.retriever) / "manifest.json").string());
        manifest.add_input((fs::path(pa.reranker) / "manifest.json").string());
        manifest.checkpoint_ids = {retriever.checkpoint_id(), reranker.checkpoint_id()};
        manifest.write(out);
        std::cout << report.to_text();
    });

    // ---- adapt ----
    auto* ad = app.add_subcommand("adapt", "Few-shot adaptation to a held-out task");
    struct {
        std::string config_path, ckpt, data, out, held_out, optimizer = "auto";
        bool no_fusion = false, train_plm = false;
        double lr = 0.5;
        int steps = 150, batch = 8;
        uint64_t seed = 1;
    } aa;
    ad->add_option("--config", aa.config_path, "JSON config or manifest to replay");
    ad->add_option("--ckpt", aa.ckpt, "Multi-task source checkpoint")->required();
    ad->add_option("--data", aa.data, "Dataset directory")->required();
    ad->add_option("--out", aa.out, "Output directory")->required();
    ad->add_option("--held-out", aa.held_out, "New task id")->required();
    ad->add_flag("--no-fusion", aa.no_fusion, "Train fresh prompt encoders instead of fusing");
    ad->add_flag("--train-plm", aa.train_plm, "Also unfreeze the PLM (fidelity run)");
    ad->add_option("--optimizer", aa.optimizer, "auto | sgd | adam");
    ad->add_option("--lr", aa.lr, "Learning rate");
    ad->add_option("--steps", aa.steps, "Adaptation steps");
    ad->add_option("--batch-size", aa.batch, "Batch size");
    ad->add_option("--seed", aa.seed, "Adaptation seed");
    ad->callback([&]() {
        ConfigFallback f{ad, load_config_json(aa.config_path)};
        f.merge("--lr", "lr", aa.lr);
        f.merge("--steps", "steps", aa.steps);
        f.merge("--batch-size", "batch_size", aa.batch);
        f.merge("--seed", "seed", aa.seed);
        const std::string out = resolve_out(aa.out);
        NirModel model = NirModel::load(aa.ckpt);
        DataBundle data = DataBundle::load_dir(aa.data, {aa.held_out});
        AdaptConfig cfg;
        cfg.held_out_task = aa.held_out;
        cfg.use_fusion = !aa.no_fusion;
        cfg.optimizer = aa.optimizer;
        cfg.learning_rate = aa.lr;
        cfg.steps = aa.steps;
        cfg.batch_size = aa.batch;
        cfg.seed = aa.seed;
        cfg.also_train_plm = aa.train_plm;
        AdaptResult result = adapt_new_task(model, data, cfg);

        model.save((fs::path(out) / "checkpoint").string());
        {
            std::ofstream pout(fs::path(out) / "adapted_prompts.json", std::ios::binary);
            pout << prompt_set_to_json(result.prompts).dump(2) << "\n";
        }
        {
            nlohmann::json w = {{"source_tasks", model.tasks}, {"weights", result.weights}};
            std::ofstream wout(fs::path(out) / "weights.json", std::ios::binary);
            wout << w.dump(2) << "\n";
        }
        result.train.write_tsv((fs::path(out) / "train_log.tsv").string());

        RunManifest manifest;
        manifest.command = "adapt";
        manifest.config = {{"ckpt", aa.ckpt},         {"data", aa.data},
                           {"held_out", aa.held_out}, {"use_fusion", !aa.no_fusion},
                           {"train_plm", aa.train_plm},{"lr", aa.lr},
                           {"steps", aa.steps},       {"batch_size", aa.batch},
                           {"seed", aa.seed}};
        manifest.seeds = {aa.seed};
        add_data_inputs(manifest, aa.data, {aa.held_out});
        manifest.add_input((fs::path(aa.ckpt) / "manifest.json").string());
        manifest.checkpoint_ids = {model.checkpoint_id()};
        manifest.write(out);
        std::cout << "adapted prompts for " << aa.held_out << " written to " << out << "\n";
    });

    // ---- probe ----
    auto* pr = app.add_subcommand("probe", "QA-vs-PI task-distinguishing probe");
    struct {
        std::string config_path, ckpt, data, out, split = "test_in_domain";
        int max_items = 100;
    } qa;
    pr->add_option("--config", qa.config_path, "JSON config or manifest to replay");
    pr->add_option("--ckpt", qa.ckpt, "Reranking checkpoint")->required();
    pr->add_option("--data", qa.data, "Dataset directory")->required();
    pr->add_option("--out", qa.out, "Output directory")->required();
    pr->add_option("--split", qa.split, "Dataset split");
    pr->add_option("--max-items", qa.max_items, "Probe item cap");
    pr->callback([&]() {
        ConfigFallback f{pr, load_config_json(qa.config_path)};
        f.merge("--split", "split", qa.split);
        f.merge("--max-items", "max_items", qa.max_items);
        const std::string out = resolve_out(qa.out);
        NirModel model = NirModel::load(qa.ckpt);
        DataBundle data = DataBundle::load_dir(qa.data, {"QA"});
        std::vector<ProbeItem> items =
            build_probe_items(data.at("QA"), split_from_string(qa.split), qa.max_items);
        ProbeResult probe = qa_vs_pi_probe(scorer_for(model), items);

        EvalReport report;
        report.probe_p_a_gt_q = probe.p_a_gt_q;
        report.probe_p_q_gt_a = probe.p_q_gt_a;
        report.run_manifest_ref = "manifest.json";  // sibling of the report
        report.save((fs::path(out) / "report.json").string());

        RunManifest manifest;
        manifest.command = "probe";
        manifest.config = {{"ckpt", qa.ckpt},
                           {"data", qa.data},
                           {"split", qa.split},
                           {"max_items", qa.max_items}};
        add_data_inputs(manifest, qa.data, {"QA"});
        manifest.add_input((fs::path(qa.ckpt) / "manifest.json").string());
        manifest.checkpoint_ids = {model.checkpoint_id()};
        manifest.write(out);
        std::cout << report.to_text();
    });

    // ---- analyze ----
    auto* an = app.add_subcommand("analyze", "Prompt similarity and weight heatmaps");
    struct {
        std::string config_path, ckpt, out, weights_csv;
    } ana;
    an->add_option("--config", ana.config_path, "JSON config or manifest to replay");
    an->add_option("--ckpt", ana.ckpt, "Prompt-model checkpoint")->required();
    an->add_option("--out", ana.out, "Output directory")->required();
    an->add_option("--weights-csv", ana.weights_csv,
                   "Fusion-weight matrix CSV to render as a heatmap");
    an->callback([&]() {
        const std::string out = resolve_out(ana.out);
        NirModel model = NirModel::load(ana.ckpt);
        require(model.flavor == "nir" && model.mode != PromptMode::Manual, "config",
                "similarity analysis needs learned prompts");
        std::vector<PromptSet> sets;
        for (const std::string& task : model.tasks) sets.push_back(model.prompts_for(task));
        EvalReport report;
        report.similarity = prompt_similarity_matrix(sets, &report.flagged_similarity_rows);
        report.similarity_tasks = model.tasks;
        write_matrix_csv(report.similarity, model.tasks, model.tasks,
                         (fs::path(out) / "similarity.csv").string());
        svg_heatmap(report.similarity, model.tasks, model.tasks, "prompt cosine similarity",
                    (fs::path(out) / "similarity.svg").string());
        if (!ana.weights_csv.empty()) {
            std::ifstream in(ana.weights_csv);
            require(in.good(), "io", "cannot read weights csv " + ana.weights_csv);
            std::string line;
            std::vector<std::string> rows_labels, col_labels;
            std::vector<std::vector<double>> rows;
            bool first = true;
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                std::istringstream ls(line);
                std::string cellv;
                std::vector<std::string> cells;
                while (std::getline(ls, cellv, ',')) cells.push_back(cellv);
                if (first) {
                    col_labels.assign(cells.begin() + 1, cells.end());
                    first = false;
                    continue;
                }
                rows_labels.push_back(cells.at(0));
                std::vector<double> row;
                for (size_t i = 1; i < cells.size(); ++i) row.push_back(std::stod(cells[i]));
                rows.push_back(std::move(row));
            }
            Matrix w(static_cast<Eigen::Index>(rows.size()),
                     static_cast<Eigen::Index>(col_labels.size()));
            for (size_t r = 0; r < rows.size(); ++r)
                for (size_t c = 0; c < rows[r].size(); ++c)
                    w(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
            report.fusion_weight_matrix = w;
            report.fusion_row_tasks = rows_labels;
            report.fusion_col_tasks = col_labels;
            svg_heatmap(w, rows_labels, col_labels, "fusion weights",
                        (fs::path(out) / "fusion_weights.svg").string());
        }
        report.run_manifest_ref = "manifest.json";  // sibling of the report
        report.save((fs::path(out) / "report.json").string());

        RunManifest manifest;
        manifest.command = "analyze";
        manifest.config = {{"ckpt", ana.ckpt}, {"weights_csv", ana.weights_csv}};
        manifest.add_input((fs::path(ana.ckpt) / "manifest.json").string());
        manifest.checkpoint_ids = {model.checkpoint_id()};
        manifest.write(out);
        std::cout << report.to_text();
    });

    // ---- report ----
    auto* rp = app.add_subcommand("report", "Merge run reports into one");
    struct {
        std::vector<std::string> inputs;
        std::string out;
    } ra;
    rp->add_option("--in", ra.inputs, "Run directories holding report.json")->required();
    rp->add_option("--out", ra.out, "Output directory")->required();
    rp->callback([&]() {
        const std::string out = resolve_out(ra.out);
        EvalReport combined;
        RunManifest manifest;
        manifest.command = "report";
        for (const std::string& dir : ra.inputs) {
            std::ifstream in(fs::path(dir) / "report.json");
            require(in.good(), "io", "no report.json in " + dir);
            nlohmann::json j = nlohmann::json::parse(in);
            manifest.add_input((fs::path(dir) / "report.json").string());
            std::string prefix = fs::path(dir).filename().string();
            nlohmann::json per_task = j.value("per_task", nlohmann::json::object());
            for (const auto& [task, metrics] : per_task.items()) {
                std::string key = combined.per_task.count(task) ? prefix + ":" + task : task;
                for (const auto& [name, value] : metrics.items())
                    combined.per_task[key][name] = value;
            }
            if (combined.probe_p_a_gt_q < 0.0 && j.contains("probe")) {
                combined.probe_p_a_gt_q = j["probe"]["p_a_gt_q"];
                combined.probe_p_q_gt_a = j["probe"]["p_q_gt_a"];
            }
        }
        combined.run_manifest_ref = "manifest.json";
        combined.save((fs::path(out) / "report.json").string());
        manifest.config = {{"inputs", ra.inputs}};
        manifest.write(out);
        std::cout << combined.to_text();
    });

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const Error& e) {
        std::cerr << "error " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error [internal] " << e.what() << "\n";
        return 2;
    }
    return 0;
}

}  // namespace nirprompt::cli
