#include "nirprompt/experiments.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <unordered_map>

#include "nirprompt/errors.hpp"

namespace nirprompt {

namespace {

struct SplitView {
    // Corpus documents in first-appearance order and queries with at least
    // one relevant document; qrels hold the max label per (query, doc).
    std::vector<std::vector<int>> docs;
    std::vector<std::string> doc_ids;
    std::unordered_map<std::string, size_t> doc_index_by_key;
    std::vector<std::vector<int>> queries;
    std::vector<std::string> query_ids;
    std::vector<std::unordered_map<size_t, int>> qrels;  // per query: doc index -> label
};

std::string token_key(const std::vector<int>& tokens) {
    std::string k;
    for (int id : tokens) k += std::to_string(id) + ",";
    return k;
}

SplitView build_split_view(const TaskDataset& dataset, Split split) {
    // The corpus is the collection: documents that are relevant to some
    // query. Artificial negative texts (for instance QA's copy-of-the-
    // question judgments) train the reranker but are not collection
    // documents.
    SplitView view;
    for (const MatchExample* ex : dataset.split(split)) {
        if (ex->label < 1) continue;
        std::string dkey = token_key(ex->text2);
        if (view.doc_index_by_key.count(dkey)) continue;
        size_t didx = view.docs.size();
        view.doc_index_by_key.emplace(dkey, didx);
        view.docs.push_back(ex->text2);
        char buf[16];
        std::snprintf(buf, sizeof(buf), "d%06zu", didx);
        view.doc_ids.emplace_back(buf);
    }
    std::unordered_map<std::string, size_t> query_index;
    for (const MatchExample* ex : dataset.split(split)) {
        auto dit = view.doc_index_by_key.find(token_key(ex->text2));
        if (dit == view.doc_index_by_key.end()) continue;
        std::string qkey = token_key(ex->text1);
        auto qit = query_index.find(qkey);
        size_t qidx;
        if (qit == query_index.end()) {
            qidx = view.queries.size();
            query_index.emplace(qkey, qidx);
            view.queries.push_back(ex->text1);
            view.query_ids.push_back(ex->example_id);
            view.qrels.emplace_back();
        } else {
            qidx = qit->second;
        }
        auto& rel = view.qrels[qidx][dit->second];
        rel = std::max(rel, ex->label);
    }
    // Keep only queries with a relevant document.
    SplitView filtered;
    filtered.docs = view.docs;
    filtered.doc_ids = view.doc_ids;
    filtered.doc_index_by_key = view.doc_index_by_key;
    for (size_t q = 0; q < view.queries.size(); ++q) {
        bool has_rel = false;
        for (const auto& [d, label] : view.qrels[q]) has_rel |= label > 0;
        if (!has_rel) continue;
        filtered.queries.push_back(view.queries[q]);
        filtered.query_ids.push_back(view.query_ids[q]);
        filtered.qrels.push_back(view.qrels[q]);
    }
    return filtered;
}

std::map<std::string, double> ranking_to_metrics(const std::string& task,
                                                 const RankingMetrics& m) {
    if (task == "DR") return {{"NDCG@10", m.ndcg10}};
    return {{"P@1", m.p_at_1}, {"MRR", m.mrr}};
}

bool is_classification_task(const std::string& task) { return task == "PI" || task == "NLI"; }

PromptSet resolve_prompts(const NirModel& model, const std::string& task,
                          const PromptSet* override_set) {
    if (override_set) return *override_set;
    return model.prompts_for(task);
}

}  // namespace

double model_rel(const NirModel& model, const std::string& task, const std::vector<int>& x1,
                 const std::vector<int>& x2, const PromptSet* override_set) {
    require(model.stage == Stage::Reranking, "config", "REL scoring needs a reranking model");
    Verbalizer verbalizer;
    if (model.flavor == "nir") {
        PromptSet prompts = resolve_prompts(model, task, override_set);
        return rel_score(x1, x2, prompts, *model.encoder, verbalizer);
    }
    int mark = model.flavor == "baseline_mark" ? Vocabulary::standard().mark(task) : -1;
    TokenSequence seq = build_baseline_rerank_input(x1, x2, mark, model.config);
    Graph g;
    ForwardResult fwd = model.encoder->forward_values(g, seq);
    const Matrix& probs = g.value(fwd.mask_probs[0]);
    return probs(0, verbalizer.yes_id) - probs(0, verbalizer.no_id);
}

int model_classify(const NirModel& model, const std::string& task, const std::vector<int>& x1,
                   const std::vector<int>& x2, const PromptSet* override_set) {
    if (model.flavor == "nir") {
        PromptSet prompts = resolve_prompts(model, task, override_set);
        return classify(x1, x2, prompts, *model.encoder).label;
    }
    // Baselines share the verbalizer objective; only the template differs.
    double rel = model_rel(model, task, x1, x2, override_set);
    return rel > 0.0 ? 1 : 0;
}

Eigen::VectorXd model_encode(const NirModel& model, const std::string& task,
                             const std::vector<int>& text, TextRole role,
                             const PromptSet* override_set) {
    require(model.stage == Stage::Retrieval, "config", "encoding needs a retrieval model");
    if (model.flavor == "nir") {
        PromptSet prompts = resolve_prompts(model, task, override_set);
        return encode_text(text, role, prompts, *model.encoder);
    }
    int mark = model.flavor == "baseline_mark" ? Vocabulary::standard().mark(task) : -1;
    TokenSequence seq = build_baseline_retrieval_input(text, mark, model.config);
    Graph g;
    ForwardResult fwd = model.encoder->forward_values(g, seq);
    return g.value(fwd.mask_hidden[0]).row(0).transpose();
}

TaskScorer scorer_for(const NirModel& model) {
    return [&model](const std::string& task, const std::vector<int>& x1,
                    const std::vector<int>& x2) { return model_rel(model, task, x1, x2); };
}

TaskEvalResult evaluate_retrieval_task(const NirModel& model, const TaskDataset& dataset,
                                       Split split, int top_k, const PromptSet* override_set) {
    const std::string& task = dataset.task_id;
    SplitView view = build_split_view(dataset, split);
    require(!view.queries.empty(), "empty-eval", "no evaluable queries in split");

    PromptSet prompts;
    const PromptSet* prompt_ptr = nullptr;
    if (model.flavor == "nir") {
        prompts = resolve_prompts(model, task, override_set);
        prompt_ptr = &prompts;
    }

    CorpusIndex index(task, model.flavor == "nir" ? to_string(model.mode) : model.flavor,
                      model.checkpoint_id(), model.config.hidden_dim);
    for (size_t d = 0; d < view.docs.size(); ++d)
        index.add(view.doc_ids[d],
                  model_encode(model, task, view.docs[d], TextRole::Document, prompt_ptr));

    const int k = top_k > 0 ? top_k : static_cast<int>(view.docs.size());
    std::unordered_map<std::string, size_t> idx_of_doc;
    for (size_t d = 0; d < view.doc_ids.size(); ++d) idx_of_doc[view.doc_ids[d]] = d;

    TaskEvalResult result;
    std::vector<std::vector<double>> ranked_rels;
    for (size_t q = 0; q < view.queries.size(); ++q) {
        Eigen::VectorXd qv =
            model_encode(model, task, view.queries[q], TextRole::Query, prompt_ptr);
        std::vector<SearchHit> hits = index.search(qv, k);
        std::vector<double> rels;
        for (const SearchHit& hit : hits) {
            size_t didx = idx_of_doc.at(hit.doc_id);
            auto it = view.qrels[q].find(didx);
            rels.push_back(it == view.qrels[q].end() ? 0.0 : it->second);
            result.rows.push_back(
                RankedRow{view.query_ids[q], hit.doc_id, hit.score, hit.rank, -1});
        }
        ranked_rels.push_back(std::move(rels));
    }
    result.metrics = ranking_to_metrics(task, ranking_metrics(ranked_rels));
    return result;
}

TaskEvalResult evaluate_reranking_task(const NirModel& model, const TaskDataset& dataset,
                                       Split split, int bm25_k, const PromptSet* override_set) {
    const std::string& task = dataset.task_id;
    TaskEvalResult result;

    if (is_classification_task(task)) {
        std::vector<int> predictions, labels;
        for (const MatchExample* ex : dataset.split(split)) {
            predictions.push_back(model_classify(model, task, ex->text1, ex->text2, override_set));
            labels.push_back(ex->label);
        }
        ClassificationMetrics m = classification_metrics(predictions, labels);
        result.metrics = {{"Accuracy", m.accuracy}, {"F1", m.f1}};
        return result;
    }

    SplitView view = build_split_view(dataset, split);
    require(!view.queries.empty(), "empty-eval", "no evaluable queries in split");
    Bm25Stats stats = Bm25Stats::build(view.docs);
    const size_t k = std::min<size_t>(static_cast<size_t>(bm25_k), view.docs.size());

    std::vector<std::vector<double>> ranked_rels;
    for (size_t q = 0; q < view.queries.size(); ++q) {
        // First-stage BM25 candidates, ties by ascending doc index.
        std::vector<size_t> order(view.docs.size());
        std::vector<double> scores(view.docs.size());
        for (size_t d = 0; d < view.docs.size(); ++d) {
            order[d] = d;
            scores[d] = bm25_score(view.queries[q], view.docs[d], stats);
        }
        std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
            if (scores[a] != scores[b]) return scores[a] > scores[b];
            return a < b;
        });
        order.resize(k);

        std::vector<std::pair<double, size_t>> reranked;  // (-REL, candidate slot)
        std::vector<double> rel_of(k);
        for (size_t slot = 0; slot < k; ++slot) {
            rel_of[slot] =
                model_rel(model, task, view.queries[q], view.docs[order[slot]], override_set);
        }
        std::vector<size_t> slots(k);
        for (size_t i = 0; i < k; ++i) slots[i] = i;
        std::stable_sort(slots.begin(), slots.end(), [&](size_t a, size_t b) {
            if (rel_of[a] != rel_of[b]) return rel_of[a] > rel_of[b];
            return a < b;  // original BM25 rank breaks ties
        });

        std::vector<double> rels;
        for (size_t i = 0; i < k; ++i) {
            size_t didx = order[slots[i]];
            auto it = view.qrels[q].find(didx);
            rels.push_back(it == view.qrels[q].end() ? 0.0 : it->second);
            result.rows.push_back(RankedRow{view.query_ids[q], view.doc_ids[didx],
                                            rel_of[slots[i]], static_cast<int>(i) + 1,
                                            static_cast<int>(slots[i]) + 1});
        }
        ranked_rels.push_back(std::move(rels));
    }
    result.metrics = ranking_to_metrics(task, ranking_metrics(ranked_rels));
    return result;
}

PipelineResult run_pipeline_task(const NirModel& retriever, const NirModel& reranker,
                                 const TaskDataset& dataset, Split split, int top_k) {
    require(retriever.stage == Stage::Retrieval && reranker.stage == Stage::Reranking, "config",
            "pipeline needs a retrieval model and a reranking model");
    const std::string& task = dataset.task_id;
    SplitView view = build_split_view(dataset, split);
    require(!view.queries.empty(), "empty-eval", "no evaluable queries in split");

    PromptSet retr_prompts;
    const PromptSet* retr_ptr = nullptr;
    if (retriever.flavor == "nir") {
        retr_prompts = retriever.prompts_for(task);
        retr_ptr = &retr_prompts;
    }
    CorpusIndex index(task, retriever.flavor, retriever.checkpoint_id(),
                      retriever.config.hidden_dim);
    for (size_t d = 0; d < view.docs.size(); ++d)
        index.add(view.doc_ids[d],
                  model_encode(retriever, task, view.docs[d], TextRole::Document, retr_ptr));
    std::unordered_map<std::string, size_t> idx_of_doc;
    for (size_t d = 0; d < view.doc_ids.size(); ++d) idx_of_doc[view.doc_ids[d]] = d;

    const int k = std::min<int>(top_k > 0 ? top_k : static_cast<int>(view.docs.size()),
                                static_cast<int>(view.docs.size()));

    PipelineResult result;
    std::vector<std::vector<double>> stage1_rels, stage2_rels;
    for (size_t q = 0; q < view.queries.size(); ++q) {
        Eigen::VectorXd qv =
            model_encode(retriever, task, view.queries[q], TextRole::Query, retr_ptr);
        std::vector<SearchHit> hits = index.search(qv, k);

        std::vector<double> rels1;
        std::vector<double> rel_scores(hits.size());
        for (size_t i = 0; i < hits.size(); ++i) {
            size_t didx = idx_of_doc.at(hits[i].doc_id);
            auto it = view.qrels[q].find(didx);
            rels1.push_back(it == view.qrels[q].end() ? 0.0 : it->second);
            result.retrieval_rows.push_back(
                RankedRow{view.query_ids[q], hits[i].doc_id, hits[i].score, hits[i].rank, -1});
            rel_scores[i] =
                model_rel(reranker, task, view.queries[q], view.docs[didx]);
        }
        std::vector<size_t> slots(hits.size());
        for (size_t i = 0; i < slots.size(); ++i) slots[i] = i;
        std::stable_sort(slots.begin(), slots.end(), [&](size_t a, size_t b) {
            if (rel_scores[a] != rel_scores[b]) return rel_scores[a] > rel_scores[b];
            return a < b;
        });
        std::vector<double> rels2;
        for (size_t i = 0; i < slots.size(); ++i) {
            rels2.push_back(rels1[slots[i]]);
            result.reranked_rows.push_back(RankedRow{view.query_ids[q], hits[slots[i]].doc_id,
                                                     rel_scores[slots[i]],
                                                     static_cast<int>(i) + 1,
                                                     static_cast<int>(slots[i]) + 1});
        }
        stage1_rels.push_back(std::move(rels1));
        stage2_rels.push_back(std::move(rels2));
    }
    result.retrieval_metrics = ranking_to_metrics(task, ranking_metrics(stage1_rels));
    result.pipeline_metrics = ranking_to_metrics(task, ranking_metrics(stage2_rels));
    return result;
}

std::vector<ProbeItem> build_probe_items(const TaskDataset& qa_dataset, Split split,
                                         int max_items) {
    require(qa_dataset.task_id == "QA", "config", "probe items come from the QA dataset");
    std::vector<ProbeItem> items;
    for (const MatchExample* ex : qa_dataset.split(split)) {
        if (ex->label != 1) continue;
        items.push_back(ProbeItem{ex->text1, ex->text2});
        if (static_cast<int>(items.size()) >= max_items) break;
    }
    require(!items.empty(), "empty-eval", "no positive QA pairs for the probe");
    return items;
}

void write_ranked_rows(const std::vector<RankedRow>& rows, const std::string& path) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "io", "cannot write ranked rows " + path);
    out << "query_id\tdoc_id\tscore\trank\toriginal_rank\n";
    out.setf(std::ios::fixed);
    out.precision(9);
    for (const RankedRow& r : rows)
        out << r.query_id << "\t" << r.doc_id << "\t" << r.score << "\t" << r.rank << "\t"
            << r.original_rank << "\n";
}

nlohmann::json prompt_set_to_json(const PromptSet& set) {
    nlohmann::json j;
    j["task_id"] = set.task_id;
    j["stage"] = to_string(set.stage);
    j["mode"] = to_string(set.mode);
    for (const auto& [slot, content] : set.slots) {
        nlohmann::json c;
        if (content.is_manual()) {
            c["manual_tokens"] = content.manual_tokens;
        } else {
            nlohmann::json rows = nlohmann::json::array();
            for (Eigen::Index r = 0; r < content.embeddings.rows(); ++r) {
                nlohmann::json row = nlohmann::json::array();
                for (Eigen::Index cc = 0; cc < content.embeddings.cols(); ++cc)
                    row.push_back(content.embeddings(r, cc));
                rows.push_back(row);
            }
            c["embeddings"] = rows;
        }
        j["slots"][to_string(slot)] = c;
    }
    return j;
}

PromptSet prompt_set_from_json(const nlohmann::json& j) {
    PromptSet set;
    set.task_id = j.at("task_id");
    set.stage = stage_from_string(j.at("stage"));
    set.mode = prompt_mode_from_string(j.at("mode"));
    for (const auto& [slot_name, c] : j.at("slots").items()) {
        SlotContent content;
        if (c.contains("manual_tokens")) {
            content.manual_tokens = c.at("manual_tokens").get<std::vector<int>>();
        } else {
            const auto& rows = c.at("embeddings");
            content.embeddings.resize(static_cast<Eigen::Index>(rows.size()),
                                      static_cast<Eigen::Index>(rows.at(0).size()));
            for (size_t r = 0; r < rows.size(); ++r)
                for (size_t cc = 0; cc < rows.at(r).size(); ++cc)
                    content.embeddings(static_cast<Eigen::Index>(r),
                                       static_cast<Eigen::Index>(cc)) = rows.at(r).at(cc);
        }
        set.slots[slot_from_string(slot_name)] = std::move(content);
    }
    return set;
}

}  // namespace nirprompt
