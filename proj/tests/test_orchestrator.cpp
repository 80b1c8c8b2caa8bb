#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "nirprompt/experiments.hpp"

using namespace nirprompt;

namespace {

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.num_layers = 2;
    cfg.hidden_dim = 16;
    cfg.num_heads = 2;
    cfg.max_seq_len = 40;
    cfg.seed = 11;
    return cfg;
}

DataBundle tiny_data(const std::vector<std::string>& tasks, int train = 64) {
    return DataBundle::generate(tasks, GenCounts{train, 16, 16, 64}, 99);
}

std::map<std::string, uint64_t> group_hashes(const NirModel& model) {
    std::map<std::string, uint64_t> out;
    for (const ParameterGroup& g : model.parameter_groups()) out[g.tag] = group_hash(g);
    return out;
}

TrainConfig quick_cfg(Stage stage, const std::vector<std::string>& tasks, int steps) {
    TrainConfig cfg;
    cfg.stage = stage;
    cfg.tasks = tasks;
    cfg.steps = steps;
    cfg.batch_size = 4;
    cfg.learning_rate = 0.05;
    cfg.seed = 17;
    return cfg;
}

}  // namespace

TEST_CASE("batch sampler: homogeneity, determinism, epochs, errors") {
    SUBCASE("batch size above the smallest task is rejected") {
        CHECK_THROWS_WITH_AS(BatchSampler({{"a", 10}, {"b", 3}}, 4, 1),
                             doctest::Contains("batch-size"), Error);
    }
    SUBCASE("identical seeds give identical schedules") {
        BatchSampler s1({{"a", 20}, {"b", 30}}, 4, 5);
        BatchSampler s2({{"a", 20}, {"b", 30}}, 4, 5);
        for (int i = 0; i < 50; ++i) {
            auto b1 = s1.next();
            auto b2 = s2.next();
            CHECK(b1.task == b2.task);
            CHECK(b1.indices == b2.indices);
        }
    }
    SUBCASE("a single task yields every batch") {
        BatchSampler s({{"only", 12}}, 4, 2);
        for (int i = 0; i < 10; ++i) CHECK(s.next().task == "only");
    }
    SUBCASE("within-task sampling is without replacement per epoch") {
        BatchSampler s({{"a", 16}}, 8, 3);
        std::set<size_t> seen;
        for (int b = 0; b < 2; ++b)
            for (size_t idx : s.next().indices) CHECK(seen.insert(idx).second);
        CHECK(seen.size() == 16);
    }
    SUBCASE("task choice counts stay within 3 sigma of an even split") {
        BatchSampler s({{"a", 20}, {"b", 20}}, 2, 23);
        int a_count = 0;
        const int steps = 10000;
        for (int i = 0; i < steps; ++i)
            if (s.next().task == "a") ++a_count;
        // Binomial(10000, 0.5): sigma = 50.
        CHECK(std::abs(a_count - 5000) <= 150);
    }
}

TEST_CASE("single-task reranking model exposes the expected parameter groups") {
    NirModel model = NirModel::make_nir(tiny_config(), Stage::Reranking,
                                        PromptMode::Continuous, {"QA"}, 2);
    std::vector<std::string> tags;
    size_t total = 0;
    std::set<const Parameter*> distinct;
    for (const ParameterGroup& g : model.parameter_groups()) {
        tags.push_back(g.tag);
        total += g.scalar_count();
        for (const Parameter* p : g.params) CHECK(distinct.insert(p).second);
    }
    CHECK(tags == std::vector<std::string>{"plm", "prompt_encoder:P1", "prompt_encoder:P2",
                                           "prompt_encoder:Pq"});
    size_t expected = 0;
    for (const Parameter* p : distinct) expected += static_cast<size_t>(p->value.size());
    CHECK(total == expected);
}

TEST_CASE("freeze contracts hold bit-exactly") {
    DataBundle data = tiny_data({"QA", "PI"});
    NirModel model = NirModel::make_nir(tiny_config(), Stage::Reranking,
                                        PromptMode::Continuous, {"QA", "PI"}, 2);
    auto before = group_hashes(model);

    SUBCASE("zero steps is the identity") {
        train_mdm(model, data, quick_cfg(Stage::Reranking, {"QA", "PI"}, 0));
        CHECK(group_hashes(model) == before);
    }
    SUBCASE("mdm freezes the plm and moves prompt encoders") {
        train_mdm(model, data, quick_cfg(Stage::Reranking, {"QA", "PI"}, 8));
        auto after = group_hashes(model);
        CHECK(after.at("plm") == before.at("plm"));
        CHECK(after.at("prompt_encoder:QA.P1") != before.at("prompt_encoder:QA.P1"));
    }
    SUBCASE("emm freezes prompt encoders and moves the plm") {
        train_emm(model, data, quick_cfg(Stage::Reranking, {"QA", "PI"}, 8));
        auto after = group_hashes(model);
        CHECK(after.at("plm") != before.at("plm"));
        for (const auto& [tag, hash] : before)
            if (tag != "plm") CHECK(after.at(tag) == hash);
    }
    SUBCASE("alternation leaves prompt encoders exactly at the MDM output") {
        train_mdm(model, data, quick_cfg(Stage::Reranking, {"QA", "PI"}, 8));
        auto post_mdm = group_hashes(model);
        train_emm(model, data, quick_cfg(Stage::Reranking, {"QA", "PI"}, 8));
        auto post_emm = group_hashes(model);
        for (const auto& [tag, hash] : post_mdm)
            if (tag != "plm") CHECK(post_emm.at(tag) == hash);
    }
}

TEST_CASE("manual prompts cannot enter MDM training") {
    DataBundle data = tiny_data({"QA"});
    NirModel model =
        NirModel::make_nir(tiny_config(), Stage::Reranking, PromptMode::Manual, {"QA"}, 2);
    CHECK_THROWS_WITH_AS(train_mdm(model, data, quick_cfg(Stage::Reranking, {"QA"}, 2)),
                         doctest::Contains("nothing-trainable"), Error);
}

TEST_CASE("baseline templates: marks only in mark mode") {
    ModelConfig cfg = tiny_config();
    const Vocabulary& v = Vocabulary::standard();
    std::vector<int> text = {v.head(0, 1), v.filler(0, 2)};

    TokenSequence mark = build_baseline_retrieval_input(text, v.mark("DR"), cfg);
    CHECK(mark.token_ids[0] == v.cls());
    CHECK(mark.token_ids[1] == v.mark("DR"));
    CHECK(mark.token_ids.back() == v.mask());

    TokenSequence multi = build_baseline_rerank_input(text, text, -1, cfg);
    for (const std::string& task : kAllTasks)
        CHECK(std::count(multi.token_ids.begin(), multi.token_ids.end(), v.mark(task)) == 0);
    CHECK(std::count(multi.token_ids.begin(), multi.token_ids.end(), v.sep()) == 2);
}

TEST_CASE("training runs are reproducible and losses fall on an overfit set") {
    DataBundle data = tiny_data({"PI"});
    auto run = [&]() {
        NirModel model = NirModel::make_nir(tiny_config(), Stage::Reranking,
                                            PromptMode::Hybrid, {"PI"}, 2);
        TrainConfig cfg = quick_cfg(Stage::Reranking, {"PI"}, 120);
        cfg.learning_rate = 0.4;
        TrainResult r = train_emm(model, data, cfg);
        return std::make_pair(group_hashes(model), r);
    };
    auto [h1, r1] = run();
    auto [h2, r2] = run();
    CHECK(h1 == h2);
    for (size_t i = 0; i < r1.log.size(); ++i) CHECK(r1.log[i].loss == r2.log[i].loss);
    CHECK(r1.mean_loss_last(30) < r1.mean_loss_first(30));
}

TEST_CASE("baselines consume the identical batch schedule under a shared seed") {
    DataBundle data = tiny_data({"QA", "PI"});
    TrainConfig cfg = quick_cfg(Stage::Reranking, {"QA", "PI"}, 12);

    NirModel nir = NirModel::make_nir(tiny_config(), Stage::Reranking, PromptMode::Continuous,
                                      {"QA", "PI"}, 2);
    NirModel base = NirModel::make_baseline(tiny_config(), Stage::Reranking, "baseline_mark",
                                            {"QA", "PI"});
    TrainResult a = train_emm(nir, data, cfg);
    TrainResult b = train_baseline(base, data, cfg);
    REQUIRE(a.log.size() == b.log.size());
    for (size_t i = 0; i < a.log.size(); ++i) CHECK(a.log[i].task == b.log[i].task);
}

TEST_CASE("retrieval training also respects freeze contracts") {
    DataBundle data = tiny_data({"QA"});
    NirModel model = NirModel::make_nir(tiny_config(), Stage::Retrieval,
                                        PromptMode::Continuous, {"QA"}, 2);
    auto before = group_hashes(model);
    TrainConfig cfg = quick_cfg(Stage::Retrieval, {"QA"}, 6);
    train_mdm(model, data, cfg);
    CHECK(group_hashes(model).at("plm") == before.at("plm"));
}

TEST_CASE("checkpoints round-trip and reject mismatched shapes") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "nirp_ckpt_test";
    NirModel model = NirModel::make_nir(tiny_config(), Stage::Reranking, PromptMode::Hybrid,
                                        {"QA", "PI"}, 2);
    model.save(dir.string());
    NirModel loaded = NirModel::load(dir.string());
    CHECK(group_hashes(loaded) == group_hashes(model));
    CHECK(loaded.checkpoint_id() == model.checkpoint_id());
    CHECK(loaded.tasks == model.tasks);

    // A model with a different width cannot absorb these tensors.
    nlohmann::json manifest = checkpoint::read_manifest(dir.string());
    manifest["config"]["hidden_dim"] = 32;
    checkpoint::write_manifest(dir.string(), manifest);
    CHECK_THROWS_WITH_AS(NirModel::load(dir.string()), doctest::Contains("compatibility"),
                         Error);
    fs::remove_all(dir);
}

TEST_CASE("adaptation trains fusion weights or fresh encoders") {
    DataBundle data = tiny_data({"QA", "PI", "NLI"});
    NirModel model = NirModel::make_nir(tiny_config(), Stage::Reranking, PromptMode::Hybrid,
                                        {"QA", "PI"}, 2);
    auto before = group_hashes(model);

    AdaptConfig cfg;
    cfg.held_out_task = "NLI";
    cfg.steps = 10;
    cfg.batch_size = 4;
    cfg.seed = 3;

    SUBCASE("fusion learns simplex weights and freezes everything else") {
        AdaptResult r = adapt_new_task(model, data, cfg);
        CHECK(r.weights.size() == 2);
        double sum = 0;
        for (double w : r.weights) {
            CHECK(w >= 0.0);
            sum += w;
        }
        CHECK(std::abs(sum - 1.0) < 1e-9);
        CHECK(group_hashes(model) == before);  // sources and plm untouched
        CHECK_FALSE(r.prompts.slot(Slot::P1).is_manual());
        CHECK(r.prompts.task_id == "NLI");
    }
    SUBCASE("without fusion fresh encoders train from scratch") {
        cfg.use_fusion = false;
        AdaptResult r = adapt_new_task(model, data, cfg);
        CHECK(r.weights.empty());
        CHECK(group_hashes(model) == before);
        CHECK(r.prompts.slot(Slot::P1).embeddings.rows() == 2);
    }
    SUBCASE("held-out task must be absent from the sources") {
        cfg.held_out_task = "QA";
        CHECK_THROWS_AS(adapt_new_task(model, data, cfg), Error);
    }
    SUBCASE("short few-shot sets are rejected") {
        DataBundle small = DataBundle::generate({"NLI"}, GenCounts{16, 8, 8, 20}, 4);
        CHECK_THROWS_WITH_AS(adapt_new_task(model, small, cfg),
                             doctest::Contains("few-shot-size"), Error);
    }
}

TEST_CASE("pipeline examples: singleton corpus and no-op retrieval filter") {
    DataBundle data = tiny_data({"QA"}, 64);
    NirModel retriever = NirModel::make_nir(tiny_config(), Stage::Retrieval,
                                            PromptMode::Continuous, {"QA"}, 2);
    NirModel reranker = NirModel::make_nir(tiny_config(), Stage::Reranking,
                                           PromptMode::Hybrid, {"QA"}, 2);

    SUBCASE("full-depth retrieval makes the pipeline equal rerank-over-corpus") {
        PipelineResult full =
            run_pipeline_task(retriever, reranker, data.at("QA"), Split::TestInDomain, 0);
        // Independent check: rerank every corpus document directly.
        TaskEvalResult direct = evaluate_reranking_task(reranker, data.at("QA"),
                                                        Split::TestInDomain, 1 << 20);
        CHECK(full.pipeline_metrics.at("MRR") ==
              doctest::Approx(direct.metrics.at("MRR")).epsilon(1e-9));
        CHECK(full.pipeline_metrics.at("P@1") ==
              doctest::Approx(direct.metrics.at("P@1")).epsilon(1e-9));
    }
    SUBCASE("a one-document corpus puts that document at rank 1 in both stages") {
        TaskDataset single;
        single.task_id = "QA";
        const Vocabulary& v = Vocabulary::standard();
        MatchExample ex;
        ex.example_id = "QA-test_in_domain-0";
        ex.task_id = "QA";
        ex.split = Split::TestInDomain;
        ex.text1 = {v.head(0, 1), v.filler(0, 0)};
        ex.text2 = {v.answer(0, 1), v.filler(0, 0)};
        ex.label = 1;
        single.examples.push_back(ex);
        PipelineResult r =
            run_pipeline_task(retriever, reranker, single, Split::TestInDomain, 10);
        CHECK(r.retrieval_metrics.at("P@1") == 1.0);
        CHECK(r.pipeline_metrics.at("P@1") == 1.0);
    }
}

TEST_CASE("bm25 reranking evaluation produces sane metrics on trained-free models") {
    DataBundle data = tiny_data({"QA"}, 64);
    NirModel reranker = NirModel::make_nir(tiny_config(), Stage::Reranking,
                                           PromptMode::Hybrid, {"QA"}, 2);
    TaskEvalResult r = evaluate_reranking_task(reranker, data.at("QA"), Split::TestInDomain, 5);
    CHECK(r.metrics.at("MRR") >= 0.0);
    CHECK(r.metrics.at("MRR") <= 1.0);
    CHECK(!r.rows.empty());
    CHECK(r.rows.front().original_rank >= 1);
}
