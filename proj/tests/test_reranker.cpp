#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "nirprompt/reranker.hpp"
#include "nirprompt/taskgen.hpp"
#include "nirprompt/rng.hpp"

using namespace nirprompt;

namespace {

const Vocabulary& v = Vocabulary::standard();

ModelConfig small_config() {
    ModelConfig cfg;
    cfg.num_layers = 2;
    cfg.hidden_dim = 16;
    cfg.num_heads = 2;
    cfg.max_seq_len = 32;
    cfg.seed = 5;
    return cfg;
}

std::vector<int> words(int n, int offset = 0) {
    std::vector<int> out;
    for (int i = 0; i < n; ++i) out.push_back(v.head(0, (offset + i) % Vocabulary::kFamilies));
    return out;
}

// Pins the mask distribution exactly: zeroing the MLM weights leaves the
// bias as the logits, so softmax(bias) is the distribution at every mask.
void pin_mask_distribution(TransformerEncoder& model, double p_yes, double p_no) {
    const int V = model.config().resolved_vocab_size();
    double rest = (1.0 - p_yes - p_no) / (V - 2);
    for (Parameter& p : model.params()) {
        if (p.name == "mlm_w") p.value.setZero();
        if (p.name == "mlm_b") {
            for (int j = 0; j < V; ++j) p.value(0, j) = std::log(rest);
            p.value(0, v.yes()) = std::log(p_yes);
            p.value(0, v.no()) = std::log(p_no);
        }
    }
}

PromptSet manual_prompts(const std::string& task) {
    PromptBank bank(Stage::Reranking, PromptMode::Manual, kAllTasks, 3, 16, 1);
    return bank.realize(task);
}

}  // namespace

TEST_CASE("rerank template layout and truncation") {
    ModelConfig cfg = small_config();
    PromptBank bank(Stage::Reranking, PromptMode::Continuous, {"PI"}, 3, cfg.hidden_dim, 1);
    PromptSet prompts = bank.realize("PI");

    BuiltInput in = build_rerank_input(words(3), words(2, 5), prompts, cfg);
    // [CLS] <3> x1 [SEP] <3> x2 [SEP] <3> [MASK]
    CHECK(in.seq.token_ids.size() == 1 + 3 + 3 + 1 + 3 + 2 + 1 + 3 + 1);
    CHECK(in.seq.token_ids.front() == v.cls());
    CHECK(in.seq.token_ids.back() == v.mask());
    CHECK(std::count(in.seq.token_ids.begin(), in.seq.token_ids.end(), v.sep()) == 2);
    CHECK(in.seq.mask_positions.size() == 1);
    CHECK(in.injected_slots == std::vector<Slot>{Slot::P1, Slot::P2, Slot::Pq});

    BuiltInput swapped = build_rerank_input(words(2, 5), words(3), prompts, cfg);
    CHECK(swapped.seq.token_ids != in.seq.token_ids);

    BuiltInput longpair = build_rerank_input(words(40), words(10, 3), prompts, cfg);
    CHECK(static_cast<int>(longpair.seq.token_ids.size()) <= cfg.max_seq_len);
    CHECK(std::count(longpair.seq.token_ids.begin(), longpair.seq.token_ids.end(), v.sep()) ==
          2);
    CHECK(longpair.seq.prompt_positions.size() == 9);  // prompts never truncate

    CHECK_THROWS_WITH_AS(build_rerank_input({}, words(2), prompts, cfg),
                         doctest::Contains("empty-input"), Error);
}

TEST_CASE("truncation removes from the longer text first") {
    ModelConfig cfg = small_config();
    PromptSet prompts = manual_prompts("PI");
    const int overhead = 4 + prompts.slot(Slot::P1).width() + prompts.slot(Slot::P2).width() +
                         prompts.slot(Slot::Pq).width();
    const int budget = cfg.max_seq_len - overhead;
    REQUIRE(budget >= 4);
    // x2 is much longer; the trim should come out of x2 only.
    std::vector<int> x1 = words(2);
    std::vector<int> x2 = words(budget + 6, 4);
    BuiltInput in = build_rerank_input(x1, x2, prompts, cfg);
    auto first_sep = std::find(in.seq.token_ids.begin(), in.seq.token_ids.end(), v.sep());
    int x1_kept = static_cast<int>(first_sep - in.seq.token_ids.begin()) - 1 -
                  prompts.slot(Slot::P1).width();
    CHECK(x1_kept == 2);
}

TEST_CASE("REL score closed forms and bounds") {
    ModelConfig cfg = small_config();
    TransformerEncoder model(cfg);
    PromptSet prompts = manual_prompts("QA");

    SUBCASE("equal yes/no mass gives zero") {
        pin_mask_distribution(model, 0.3, 0.3);
        CHECK(rel_score(words(2), words(3), prompts, model) ==
              doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("0.9 vs 0.05 gives 0.85") {
        pin_mask_distribution(model, 0.9, 0.05);
        CHECK(rel_score(words(2), words(3), prompts, model) ==
              doctest::Approx(0.85).epsilon(1e-9));
    }
    SUBCASE("always within [-1, 1] and increasing in the yes logit") {
        double prev = -2.0;
        for (double p_yes : {0.01, 0.2, 0.5, 0.7}) {
            pin_mask_distribution(model, p_yes, 0.1);
            double rel = rel_score(words(2), words(3), prompts, model);
            CHECK(rel >= -1.0);
            CHECK(rel <= 1.0);
            CHECK(rel > prev);
            prev = rel;
        }
    }
}

TEST_CASE("classify uses the two-way renormalized distribution with label-0 ties") {
    ModelConfig cfg = small_config();
    TransformerEncoder model(cfg);
    PromptSet prompts = manual_prompts("NLI");

    pin_mask_distribution(model, 0.25, 0.25);
    Classification tie = classify(words(2), words(2, 4), prompts, model);
    CHECK(tie.label == 0);

    pin_mask_distribution(model, 0.4, 0.2);  // s(1) = 2 s(0)
    Classification c = classify(words(2), words(2, 4), prompts, model);
    CHECK(c.label == 1);
    CHECK(c.probability == doctest::Approx(2.0 / 3.0).epsilon(1e-9));

    // Raw argmax over {M(yes), M(no)} equals the two-way argmax everywhere.
    Rng rng(7);
    for (int trial = 0; trial < 12; ++trial) {
        double a = 0.05 + 0.4 * rng.uniform();
        double b = 0.05 + 0.4 * rng.uniform();
        pin_mask_distribution(model, a, b);
        Classification r = classify(words(2), words(2, 4), prompts, model);
        CHECK(r.label == (a > b ? 1 : 0));
    }
}

TEST_CASE("reranker loss closed forms") {
    ModelConfig cfg = small_config();
    TransformerEncoder model(cfg);
    PromptSet prompts = manual_prompts("PI");
    std::vector<LabeledPair> one = {{words(2), words(2, 3), 1}};

    SUBCASE("uniform two-way prediction costs ln 2") {
        pin_mask_distribution(model, 0.31, 0.31);
        CHECK(reranker_loss(one, prompts, model) ==
              doctest::Approx(std::log(2.0)).epsilon(1e-9));
    }
    SUBCASE("P(correct) = 0.25 costs -ln 0.25") {
        pin_mask_distribution(model, 0.2, 0.6);  // renormalized: P(yes) = 0.25
        CHECK(reranker_loss(one, prompts, model) ==
              doctest::Approx(-std::log(0.25)).epsilon(1e-9));
    }
    SUBCASE("confident correct predictions drive the loss toward zero") {
        pin_mask_distribution(model, 0.99, 1e-9);
        CHECK(reranker_loss(one, prompts, model) < 1e-6);
    }
    SUBCASE("labels outside the set are rejected") {
        std::vector<LabeledPair> bad = {{words(2), words(2, 3), 2}};
        CHECK_THROWS_WITH_AS(reranker_loss(bad, prompts, model), doctest::Contains("label"),
                             Error);
    }
    SUBCASE("graph loss agrees with the value loss") {
        pin_mask_distribution(model, 0.37, 0.22);
        double value = reranker_loss(one, prompts, model);
        Graph g;
        BuiltInput in = build_rerank_input(one[0].x1, one[0].x2, prompts, cfg);
        ForwardResult fwd = model.forward_values(g, in.seq);
        double via_graph =
            g.value(reranker_example_loss_var(g, fwd.mask_probs[0], 1))(0, 0);
        CHECK(via_graph == doctest::Approx(value).epsilon(1e-12));
    }
}

TEST_CASE("rerank ordering is stable and matches a sort oracle") {
    ModelConfig cfg = small_config();
    TransformerEncoder model(cfg);
    PromptSet prompts = manual_prompts("QA");

    SUBCASE("single candidate lands at rank 1") {
        std::vector<RerankCandidate> cands = {{"only", words(3), 0.0, 1}};
        auto ranked = rerank_candidates(words(2), cands, prompts, model);
        CHECK(ranked.at(0).doc_id == "only");
    }
    SUBCASE("identical documents preserve original order") {
        std::vector<RerankCandidate> cands;
        for (int i = 0; i < 4; ++i)
            cands.push_back({"c" + std::to_string(i), words(3, 2), 0.0, i + 1});
        auto ranked = rerank_candidates(words(2), cands, prompts, model);
        for (int i = 0; i < 4; ++i) CHECK(ranked[static_cast<size_t>(i)].original_rank == i + 1);
    }
    SUBCASE("twenty candidates match an independent sort") {
        std::vector<RerankCandidate> cands;
        for (int i = 0; i < 20; ++i)
            cands.push_back({"c" + std::to_string(i), words(3 + i % 4, i), 0.0, i + 1});
        auto ranked = rerank_candidates(words(2, 1), cands, prompts, model);
        std::vector<std::pair<double, int>> oracle;
        for (const auto& c : cands)
            oracle.emplace_back(-rel_score(words(2, 1), c.tokens, prompts, model),
                                c.original_rank);
        std::sort(oracle.begin(), oracle.end());
        for (size_t i = 0; i < ranked.size(); ++i)
            CHECK(ranked[i].original_rank == oracle[i].second);
    }
    SUBCASE("empty candidate list is rejected") {
        CHECK_THROWS_WITH_AS(rerank_candidates(words(2), {}, prompts, model),
                             doctest::Contains("empty-candidates"), Error);
    }
}
