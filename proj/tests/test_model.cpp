#include <doctest.h>

#include <cmath>

#include "nirprompt/model.hpp"
#include "nirprompt/errors.hpp"

using namespace nirprompt;

namespace {

ModelConfig tiny_config(int boundary) {
    ModelConfig cfg;
    cfg.num_layers = 3;
    cfg.hidden_dim = 16;
    cfg.num_heads = 2;
    cfg.max_seq_len = 32;
    cfg.boundary_layer = boundary;
    cfg.seed = 42;
    return cfg;
}

TokenSequence prompt_sequence(const ModelConfig& cfg, int flip_token = -1) {
    const Vocabulary& v = Vocabulary::standard();
    TokenSequence seq;
    seq.token_ids = {v.cls(), v.prompt_placeholder(), v.head(0, 1), v.head(0, 2),
                     v.prompt_placeholder(), v.mask()};
    if (flip_token >= 0) seq.token_ids[3] = flip_token;
    seq.prompt_positions = {1, 4};
    seq.mask_positions = {5};
    seq.injected = Matrix::Zero(2, cfg.hidden_dim);
    for (int j = 0; j < cfg.hidden_dim; ++j) {
        seq.injected(0, j) = 0.01 * j;
        seq.injected(1, j) = -0.02 * j;
    }
    return seq;
}

}  // namespace

TEST_CASE("mask_distribution matches closed forms") {
    Matrix zeros = Matrix::Zero(1, 4);
    Matrix uniform = mask_distribution(zeros);
    for (int j = 0; j < 4; ++j) CHECK(uniform(0, j) == doctest::Approx(0.25).epsilon(1e-12));

    Matrix two(1, 2);
    two << 1.0, 0.0;
    Matrix dist = mask_distribution(two);
    const double e = std::exp(1.0);
    CHECK(dist(0, 0) == doctest::Approx(e / (e + 1.0)).epsilon(1e-12));
    CHECK(dist(0, 1) == doctest::Approx(1.0 / (e + 1.0)).epsilon(1e-12));
    CHECK(dist(0, 0) == doctest::Approx(0.7310585786).epsilon(1e-9));

    Matrix shifted = two.array() + 123.0;
    CHECK((mask_distribution(shifted) - dist).cwiseAbs().maxCoeff() < 1e-12);

    Matrix large(1, 3);
    large << 500.0, -500.0, 0.0;
    Matrix d = mask_distribution(large);
    CHECK(std::abs(d.row(0).sum() - 1.0) < 1e-9);
    CHECK(d.minCoeff() >= 0.0);

    Matrix bad(1, 2);
    bad << std::numeric_limits<double>::infinity(), 0.0;
    CHECK_THROWS_WITH_AS(mask_distribution(bad), doctest::Contains("numeric"), Error);
}

TEST_CASE("config and sequence validation") {
    ModelConfig cfg = tiny_config(1);
    cfg.num_heads = 3;  // does not divide 16
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = tiny_config(7);  // boundary > layers
    CHECK_THROWS_AS(cfg.validate(), Error);

    cfg = tiny_config(1);
    TransformerEncoder model(cfg);
    TokenSequence seq = prompt_sequence(cfg);
    seq.token_ids.assign(40, Vocabulary::standard().cls());
    seq.prompt_positions.clear();
    seq.injected = Matrix();
    seq.mask_positions = {1};
    Graph g;
    CHECK_THROWS_WITH_AS(model.forward_values(g, seq), doctest::Contains("length"), Error);

    TokenSequence no_mask = prompt_sequence(cfg);
    no_mask.mask_positions.clear();
    Graph g2;
    CHECK_THROWS_WITH_AS(model.forward_values(g2, no_mask), doctest::Contains("missing-mask"),
                         Error);
    CHECK_NOTHROW(model.forward_values(g2, no_mask, /*need_mask=*/false));
}

TEST_CASE("boundary k = n pins prompt rows to the injected embeddings everywhere") {
    ModelConfig cfg = tiny_config(3);  // k == n
    TransformerEncoder model(cfg);
    TokenSequence seq = prompt_sequence(cfg);
    Graph g;
    ForwardResult fwd = model.forward_values(g, seq);
    for (size_t layer = 0; layer < fwd.layer_hidden.size(); ++layer) {
        const Matrix& h = g.value(fwd.layer_hidden[layer]);
        for (size_t p = 0; p < seq.prompt_positions.size(); ++p) {
            CHECK((h.row(seq.prompt_positions[p]) -
                   seq.injected.row(static_cast<Eigen::Index>(p)))
                      .cwiseAbs()
                      .maxCoeff() == 0.0);
        }
    }
}

TEST_CASE("one-way influence: text edits cannot reach prompt rows at layers <= k") {
    const Vocabulary& v = Vocabulary::standard();
    ModelConfig cfg = tiny_config(2);  // k = 2 of n = 3
    TransformerEncoder model(cfg);
    TokenSequence a = prompt_sequence(cfg);
    TokenSequence b = prompt_sequence(cfg, v.head(0, 9));  // one non-prompt token differs
    Graph ga, gb;
    ForwardResult fa = model.forward_values(ga, a);
    ForwardResult fb = model.forward_values(gb, b);

    for (int layer = 0; layer <= 2; ++layer) {
        const Matrix& ha = ga.value(fa.layer_hidden[static_cast<size_t>(layer)]);
        const Matrix& hb = gb.value(fb.layer_hidden[static_cast<size_t>(layer)]);
        for (int p : a.prompt_positions)
            CHECK((ha.row(p) - hb.row(p)).cwiseAbs().maxCoeff() == 0.0);
    }
    const Matrix& ha = ga.value(fa.layer_hidden[3]);
    const Matrix& hb = gb.value(fb.layer_hidden[3]);
    double diff = 0.0;
    for (int p : a.prompt_positions) diff += (ha.row(p) - hb.row(p)).cwiseAbs().maxCoeff();
    CHECK(diff > 0.0);
}

TEST_CASE("boundary k = 0 disables fixing: prompts behave like ordinary inputs") {
    const Vocabulary& v = Vocabulary::standard();
    ModelConfig cfg = tiny_config(0);
    TransformerEncoder model(cfg);
    TokenSequence a = prompt_sequence(cfg);
    TokenSequence b = prompt_sequence(cfg, v.head(0, 9));
    Graph ga, gb;
    ForwardResult fa = model.forward_values(ga, a);
    ForwardResult fb = model.forward_values(gb, b);

    // Layer 0 still injects at the input.
    const Matrix& h0 = ga.value(fa.layer_hidden[0]);
    CHECK((h0.row(1) - a.injected.row(0)).cwiseAbs().maxCoeff() == 0.0);
    // With the mechanism disabled the text token reshapes prompt rows.
    const Matrix& ha = ga.value(fa.layer_hidden[1]);
    const Matrix& hb = gb.value(fb.layer_hidden[1]);
    double diff = 0.0;
    for (int p : a.prompt_positions) diff += (ha.row(p) - hb.row(p)).cwiseAbs().maxCoeff();
    CHECK(diff > 0.0);
}

TEST_CASE("identical seed and inputs give bit-identical outputs") {
    ModelConfig cfg = tiny_config(2);
    TransformerEncoder m1(cfg), m2(cfg);
    TokenSequence seq = prompt_sequence(cfg);
    Graph g1, g2;
    Matrix p1 = g1.value(m1.forward_values(g1, seq).mask_probs[0]);
    Matrix p2 = g2.value(m2.forward_values(g2, seq).mask_probs[0]);
    CHECK((p1 - p2).cwiseAbs().maxCoeff() == 0.0);
    CHECK(std::abs(p1.row(0).sum() - 1.0) < 1e-9);
}

TEST_CASE("plm parameter group is a stable partition") {
    ModelConfig cfg = tiny_config(2);
    TransformerEncoder model(cfg);
    ParameterGroup group = model.parameter_group();
    CHECK(group.tag == "plm");
    size_t total = 0;
    for (const Parameter& p : model.params()) total += static_cast<size_t>(p.value.size());
    CHECK(group.scalar_count() == total);
    CHECK(group_hash(group) == group_hash(model.parameter_group()));  // stable across calls
}
