import math

import numpy as np
import pytest

import nirprompt as nirp


def test_vocab_and_tokenizer_roundtrip():
    assert nirp.vocab_size() > 200
    ids = nirp.tokenize("Do these two sentences match?")
    assert nirp.detokenize(ids) == "Do these two sentences match?"
    with pytest.raises(nirp.NirError):
        nirp.tokenize("definitely_not_a_token")


def test_mask_distribution_is_softmax():
    dist = nirp.mask_distribution(np.zeros((1, 4)))
    np.testing.assert_allclose(dist, 0.25)
    logits = np.array([[1.0, 0.0]])
    dist = nirp.mask_distribution(logits)
    e = math.e
    np.testing.assert_allclose(dist, [[e / (e + 1), 1 / (e + 1)]], atol=1e-12)


def test_contrastive_loss_uniform_is_ln_b():
    q = np.zeros((8, 16))
    d = np.zeros((8, 16))
    assert nirp.in_batch_contrastive_loss(q, d) == pytest.approx(math.log(8))


def test_metrics_match_manual_formulas():
    r = nirp.ranking_metrics([[0.0, 1.0]])
    assert r["p_at_1"] == 0.0
    assert r["mrr"] == pytest.approx(0.5)
    assert r["ndcg10"] == pytest.approx(1.0 / math.log2(3.0))

    c = nirp.classification_metrics([1, 1, 0, 0], [1, 0, 1, 0])
    assert c["accuracy"] == pytest.approx(0.5)
    assert c["f1"] == pytest.approx(0.5)


def test_bm25_zero_without_shared_terms():
    corpus = [[1, 2, 3], [4, 5]]
    assert nirp.bm25_score([9], [1, 2, 3], corpus) == 0.0
    assert nirp.bm25_score([1], [1, 2, 3], corpus) > 0.0


def test_dataset_generation_and_oracle():
    data = nirp.generate_task_data("PI", train=20, test=8, ood=8, few_shot=8, seed=3)
    rows = data.rows()
    assert len(rows) == 44
    for _, task, _, t1, t2, label in rows:
        assert nirp.relation_oracle(task, t1, t2) == label


def test_model_encode_and_scores():
    cfg = nirp.ModelConfig()
    cfg.num_layers = 2
    cfg.hidden_dim = 16
    cfg.num_heads = 2
    cfg.max_seq_len = 40
    model = nirp.NirModel.make_nir(cfg, nirp.Stage.reranking, nirp.PromptMode.hybrid,
                                   ["QA", "PI"], 2)
    x1 = nirp.tokenize("ih00 if01")
    x2 = nirp.tokenize("ia00 if01 if02")
    rel = model.rel_score("QA", x1, x2)
    assert -1.0 <= rel <= 1.0
    assert model.classify("QA", x1, x2) in (0, 1)
    assert model.group_tags()[0] == "plm"

    retr = nirp.NirModel.make_nir(cfg, nirp.Stage.retrieval, nirp.PromptMode.continuous,
                                  ["QA"], 2)
    vec = retr.encode("QA", x1, is_query=True)
    assert vec.shape == (16,)
    emb = retr.prompt_embeddings("QA")
    assert emb[nirp.Slot.P1].shape == (2, 16)


def test_search_matches_numpy_argsort():
    rng = np.random.default_rng(5)
    docs = rng.normal(size=(50, 8))
    index = nirp.CorpusIndex("QA", "continuous", "test", 8)
    for i, row in enumerate(docs):
        index.add(f"d{i:03d}", row)
    query = rng.normal(size=8)
    hits = index.search(query, 5)
    expected = np.argsort(-(docs @ query))[:5]
    assert [h[0] for h in hits] == [f"d{i:03d}" for i in expected]


def test_cli_runs_in_process(tmp_path):
    out = tmp_path / "data"
    code = nirp.run_cli(["gen-data", "--out", str(out), "--seed", "7", "--tasks", "QA",
                         "--train", "12", "--test", "4", "--ood", "4", "--few-shot", "4"])
    assert code == 0
    assert (out / "QA.tsv").exists()
    loaded = nirp.load_dataset(str(out / "QA.tsv"))
    assert loaded.task_id == "QA"
    assert nirp.run_cli(["eval", "--ckpt", str(tmp_path / "missing"), "--data", str(out),
                         "--out", str(tmp_path / "x")]) != 0
