#include <doctest.h>

#include <cmath>

#include "nirprompt/eval.hpp"
#include "nirprompt/rng.hpp"

using namespace nirprompt;

namespace {

// Independent metric oracle: direct formula evaluation over a ranked list,
// written separately from the library path.
struct OracleMetrics {
    double p1 = 0, mrr = 0, ndcg = 0;
};

OracleMetrics oracle_eval(const std::vector<std::vector<double>>& queries) {
    OracleMetrics out;
    for (const auto& rels : queries) {
        out.p1 += rels.front() > 0 ? 1 : 0;
        for (size_t i = 0; i < rels.size(); ++i)
            if (rels[i] > 0) {
                out.mrr += 1.0 / (double)(i + 1);
                break;
            }
        auto dcg_at = [](const std::vector<double>& r) {
            double s = 0;
            for (size_t i = 0; i < r.size() && i < 10; ++i)
                s += (std::pow(2.0, r[i]) - 1.0) / (std::log(double(i) + 2.0) / std::log(2.0));
            return s;
        };
        std::vector<double> ideal = rels;
        std::sort(ideal.rbegin(), ideal.rend());
        double idcg = dcg_at(ideal);
        if (idcg > 0) out.ndcg += dcg_at(rels) / idcg;
    }
    out.p1 /= (double)queries.size();
    out.mrr /= (double)queries.size();
    out.ndcg /= (double)queries.size();
    return out;
}

}  // namespace

TEST_CASE("ranking metric closed forms") {
    RankingMetrics all_top = ranking_metrics({{1, 0}, {2, 0, 1}});
    CHECK(all_top.p_at_1 == 1.0);
    CHECK(all_top.mrr == 1.0);

    RankingMetrics second = ranking_metrics({{0, 1}});
    CHECK(second.p_at_1 == 0.0);
    CHECK(second.mrr == 0.5);
    // Hand DCG: (1/log2 3) / (1/log2 2)
    CHECK(second.ndcg10 == doctest::Approx(1.0 / std::log2(3.0)).epsilon(1e-12));
    CHECK(second.ndcg10 == doctest::Approx(0.6309297535714574).epsilon(1e-12));

    RankingMetrics none = ranking_metrics({{0, 0, 0}});
    CHECK(none.mrr == 0.0);
    CHECK(none.ndcg10 == 0.0);

    CHECK_THROWS_WITH_AS(ranking_metrics({}), doctest::Contains("empty-eval"), Error);
}

TEST_CASE("ranking metrics equal the brute-force oracle on 100 random instances") {
    Rng rng(41);
    for (int instance = 0; instance < 100; ++instance) {
        std::vector<std::vector<double>> queries;
        size_t nq = 1 + rng.uniform_index(5);
        for (size_t q = 0; q < nq; ++q) {
            std::vector<double> rels;
            size_t len = 1 + rng.uniform_index(15);
            for (size_t i = 0; i < len; ++i)
                rels.push_back(static_cast<double>(rng.uniform_index(3)));
            queries.push_back(std::move(rels));
        }
        RankingMetrics lib = ranking_metrics(queries);
        OracleMetrics ref = oracle_eval(queries);
        CHECK(lib.p_at_1 == doctest::Approx(ref.p1).epsilon(1e-9));
        CHECK(lib.mrr == doctest::Approx(ref.mrr).epsilon(1e-9));
        CHECK(lib.ndcg10 == doctest::Approx(ref.ndcg).epsilon(1e-9));
    }
}

TEST_CASE("NDCG is exactly 1 for ideal orderings") {
    Rng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> rels;
        for (int i = 0; i < 8; ++i) rels.push_back(static_cast<double>(rng.uniform_index(3)));
        std::sort(rels.rbegin(), rels.rend());
        if (rels.front() == 0) rels.front() = 1;
        CHECK(ranking_metrics({rels}).ndcg10 == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("metrics are invariant to query order") {
    std::vector<std::vector<double>> a = {{1, 0}, {0, 1}, {0, 0, 2}};
    std::vector<std::vector<double>> b = {{0, 0, 2}, {1, 0}, {0, 1}};
    RankingMetrics ma = ranking_metrics(a), mb = ranking_metrics(b);
    CHECK(ma.p_at_1 == mb.p_at_1);
    CHECK(ma.mrr == mb.mrr);
    CHECK(ma.ndcg10 == mb.ndcg10);
}

TEST_CASE("classification metric closed forms") {
    ClassificationMetrics perfect = classification_metrics({1, 0, 1}, {1, 0, 1});
    CHECK(perfect.accuracy == 1.0);
    CHECK(perfect.f1 == 1.0);

    // Confusion TP=1 FP=1 FN=1 TN=1.
    ClassificationMetrics half = classification_metrics({1, 1, 0, 0}, {1, 0, 1, 0});
    CHECK(half.accuracy == 0.5);
    CHECK(half.f1 == 0.5);

    ClassificationMetrics negatives = classification_metrics({0, 0}, {0, 0});
    CHECK(negatives.accuracy == 1.0);
    CHECK(negatives.f1 == 0.0);  // declared convention when P+R = 0

    CHECK_THROWS_AS(classification_metrics({1}, {1, 0}), Error);
}

TEST_CASE("BM25 matches a hand-evaluated Okapi oracle") {
    std::vector<std::vector<int>> corpus = {{1, 2, 2, 3}, {2, 4}, {5, 6, 7, 8, 9, 10}};
    Bm25Stats stats = Bm25Stats::build(corpus);
    CHECK(stats.doc_count == 3);
    CHECK(stats.avg_doc_len == doctest::Approx(4.0));

    SUBCASE("no shared term scores zero") {
        CHECK(bm25_score({99, 98}, corpus[0], stats) == 0.0);
    }
    SUBCASE("duplicate query terms accumulate") {
        double once = bm25_score({2}, corpus[0], stats);
        double twice = bm25_score({2, 2}, corpus[0], stats);
        CHECK(twice == doctest::Approx(2.0 * once).epsilon(1e-12));
    }
    SUBCASE("hand-computed score on the toy corpus") {
        // Query {1, 2} against doc {1, 2, 2, 3}: tf(1)=1 df(1)=1; tf(2)=2 df(2)=2.
        const double k1 = 1.2, b = 0.75, N = 3, dl = 4, avg = 4.0;
        double idf1 = std::log((N - 1 + 0.5) / (1 + 0.5) + 1.0);
        double idf2 = std::log((N - 2 + 0.5) / (2 + 0.5) + 1.0);
        double norm = k1 * (1 - b + b * dl / avg);
        double expected = idf1 * (1 * (k1 + 1)) / (1 + norm) + idf2 * (2 * (k1 + 1)) / (2 + norm);
        CHECK(bm25_score({1, 2}, corpus[0], stats) == doctest::Approx(expected).epsilon(1e-9));
    }
    SUBCASE("monotone nondecreasing in within-document term frequency") {
        double prev = -1.0;
        for (int tf = 1; tf <= 6; ++tf) {
            std::vector<int> doc(6, 99);
            for (int i = 0; i < tf; ++i) doc[static_cast<size_t>(i)] = 2;
            double s = bm25_score({2}, doc, stats);
            CHECK(s >= prev);
            prev = s;
        }
    }
    SUBCASE("empty corpus is rejected") {
        CHECK_THROWS_WITH_AS(Bm25Stats::build({}), doctest::Contains("empty-corpus"), Error);
    }
}

TEST_CASE("probe percentages under an exact-equality oracle scorer") {
    std::vector<ProbeItem> items;
    const Vocabulary& v = Vocabulary::standard();
    for (int i = 0; i < 10; ++i)
        items.push_back(ProbeItem{{v.head(0, i), v.filler(0, i)},
                                  {v.answer(0, i), v.filler(0, i), v.filler(0, (i + 1) % 20)}});

    // Rewards exact string equality under PI conditioning, answer tokens under QA.
    TaskScorer scorer = [&](const std::string& task, const std::vector<int>& x1,
                            const std::vector<int>& x2) {
        if (task == "PI") return x1 == x2 ? 1.0 : 0.0;
        for (int id : x2)
            if (v.is_content(id) && v.content_form(id) == 2) return 1.0;
        return 0.0;
    };
    ProbeResult r = qa_vs_pi_probe(scorer, items);
    CHECK(r.p_q_gt_a == 100.0);
    CHECK(r.p_a_gt_q == 100.0);

    TaskScorer constant = [](const std::string&, const std::vector<int>&,
                             const std::vector<int>&) { return 0.5; };
    ProbeResult ties = qa_vs_pi_probe(constant, items);
    CHECK(ties.p_a_gt_q == 0.0);  // ties count as failures
    CHECK(ties.p_q_gt_a == 0.0);

    CHECK_THROWS_WITH_AS(qa_vs_pi_probe(scorer, {}), doctest::Contains("empty-eval"), Error);
}

TEST_CASE("prompt similarity matrix normalization") {
    auto make_set = [](const Matrix& emb) {
        PromptSet s;
        s.task_id = "t";
        s.stage = Stage::Reranking;
        s.mode = PromptMode::Continuous;
        SlotContent c;
        c.embeddings = emb;
        s.slots[Slot::P1] = c;
        return s;
    };

    SUBCASE("two tasks give off-diagonal ones") {
        Matrix a(1, 3), b(1, 3);
        a << 1, 0, 0;
        b << 1, 1, 0;
        Matrix m = prompt_similarity_matrix({make_set(a), make_set(b)});
        CHECK(m(0, 1) == doctest::Approx(1.0));
        CHECK(m(1, 0) == doctest::Approx(1.0));
        CHECK(m(0, 0) == 0.0);
    }
    SUBCASE("five equal-similarity tasks give uniform 0.25 rows") {
        std::vector<PromptSet> sets;
        Matrix base(1, 4);
        base << 1, 1, 1, 1;
        for (int i = 0; i < 5; ++i) sets.push_back(make_set(base));
        Matrix m = prompt_similarity_matrix(sets);
        for (int r = 0; r < 5; ++r)
            for (int c = 0; c < 5; ++c)
                if (r != c) CHECK(m(r, c) == doctest::Approx(0.25).epsilon(1e-12));
    }
    SUBCASE("rows sum to one for random prompt sets") {
        Rng rng(12);
        std::vector<PromptSet> sets;
        for (int i = 0; i < 4; ++i) {
            Matrix e(2, 6);
            for (int r = 0; r < 2; ++r)
                for (int c = 0; c < 6; ++c) e(r, c) = rng.normal(0, 1);
            sets.push_back(make_set(e));
        }
        Matrix m = prompt_similarity_matrix(sets);
        for (int r = 0; r < 4; ++r) CHECK(std::abs(m.row(r).sum() - 1.0) < 1e-9);
    }
    SUBCASE("all-negative rows fall back to uniform and are flagged") {
        Matrix a(1, 2), b(1, 2), c(1, 2);
        a << 1, 0;
        b << -1, 0;
        c << -1, -1e-3;
        std::vector<int> flagged;
        Matrix m = prompt_similarity_matrix({make_set(a), make_set(b), make_set(c)}, &flagged);
        CHECK(!flagged.empty());
        for (int r = 0; r < 3; ++r) CHECK(std::abs(m.row(r).sum() - 1.0) < 1e-9);
    }
    SUBCASE("shape mismatch is rejected") {
        Matrix a(1, 2), b(1, 3);
        a << 1, 0;
        b << 1, 0, 0;
        CHECK_THROWS_AS(prompt_similarity_matrix({make_set(a), make_set(b)}), Error);
    }
}

TEST_CASE("eval report validation ranges") {
    EvalReport report;
    report.per_task["QA"]["MRR"] = 0.5;
    CHECK_NOTHROW(report.validate());
    report.per_task["QA"]["MRR"] = 1.5;
    CHECK_THROWS_AS(report.validate(), Error);
}
