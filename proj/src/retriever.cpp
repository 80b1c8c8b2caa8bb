#include "nirprompt/retriever.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "nirprompt/errors.hpp"

namespace nirprompt {

namespace {

// Appends one slot to the sequence under construction. Continuous slots
// reserve [PRM] positions and record themselves in the injected order.
void append_slot(BuiltInput& out, const PromptSet& prompts, Slot slot) {
    const SlotContent& content = prompts.slot(slot);
    const Vocabulary& vocab = Vocabulary::standard();
    if (content.is_manual()) {
        for (int id : content.manual_tokens) out.seq.token_ids.push_back(id);
    } else {
        for (Eigen::Index r = 0; r < content.embeddings.rows(); ++r) {
            out.seq.prompt_positions.push_back(static_cast<int>(out.seq.token_ids.size()));
            out.seq.token_ids.push_back(vocab.prompt_placeholder());
        }
        out.injected_slots.push_back(slot);
    }
}

void finalize_injected(BuiltInput& out, const PromptSet& prompts) {
    Eigen::Index rows = 0;
    for (Slot s : out.injected_slots) rows += prompts.slot(s).embeddings.rows();
    if (rows == 0) return;
    Matrix injected(rows, prompts.slot(out.injected_slots.front()).embeddings.cols());
    Eigen::Index at = 0;
    for (Slot s : out.injected_slots) {
        const Matrix& e = prompts.slot(s).embeddings;
        injected.middleRows(at, e.rows()) = e;
        at += e.rows();
    }
    out.seq.injected = std::move(injected);
}

}  // namespace

BuiltInput build_retrieval_input(const std::vector<int>& text, TextRole role,
                                 const PromptSet& prompts, const ModelConfig& cfg) {
    require(!text.empty(), "empty-input", "retrieval text is empty");
    require(prompts.stage == Stage::Retrieval, "config",
            "retrieval input needs retrieval-stage prompts");
    const Vocabulary& vocab = Vocabulary::standard();
    const Slot lead = role == TextRole::Query ? Slot::P1 : Slot::P2;
    const Slot tail = role == TextRole::Query ? Slot::Pq : Slot::Pd;

    const int overhead = 2 + prompts.slot(lead).width() + prompts.slot(tail).width();
    const int budget = cfg.max_seq_len - overhead;
    require(budget >= 1, "length", "prompts leave no room for text");
    std::vector<int> span(text.begin(),
                          text.begin() + std::min<size_t>(text.size(), static_cast<size_t>(budget)));

    BuiltInput out;
    out.seq.token_ids.push_back(vocab.cls());
    append_slot(out, prompts, lead);
    for (int id : span) out.seq.token_ids.push_back(id);
    append_slot(out, prompts, tail);
    out.seq.mask_positions.push_back(static_cast<int>(out.seq.token_ids.size()));
    out.seq.token_ids.push_back(vocab.mask());
    finalize_injected(out, prompts);
    return out;
}

Eigen::VectorXd encode_text(const std::vector<int>& text, TextRole role,
                            const PromptSet& prompts, const TransformerEncoder& model) {
    BuiltInput input = build_retrieval_input(text, role, prompts, model.config());
    Graph g;
    ForwardResult fwd = model.forward_values(g, input.seq);
    return g.value(fwd.mask_hidden[0]).row(0).transpose();
}

double in_batch_contrastive_loss(const Matrix& query_vectors, const Matrix& doc_vectors) {
    require(query_vectors.rows() == doc_vectors.rows(), "batch",
            "query/document batch sizes differ");
    require(query_vectors.rows() >= 1, "batch", "empty batch");
    require(query_vectors.cols() == doc_vectors.cols(), "batch",
            "query/document widths differ");
    const Matrix sims = query_vectors * doc_vectors.transpose();
    double total = 0.0;
    for (Eigen::Index i = 0; i < sims.rows(); ++i) {
        double mx = sims.row(i).maxCoeff();
        double lse = mx + std::log((sims.row(i).array() - mx).exp().sum());
        total += lse - sims(i, i);
    }
    return total / static_cast<double>(sims.rows());
}

Var in_batch_contrastive_loss_var(Graph& g, Var query_rows, Var doc_rows) {
    Var sims = g.matmul(query_rows, g.transpose(doc_rows));
    Var lse = g.log_sum_exp_rows(sims);
    Var pos = g.diag_col(sims);
    return g.mean_all(g.sub(lse, pos));
}

CorpusIndex::CorpusIndex(std::string task_id, std::string prompt_mode,
                         std::string checkpoint_id, int hidden_dim)
    : task_id_(std::move(task_id)), prompt_mode_(std::move(prompt_mode)),
      checkpoint_id_(std::move(checkpoint_id)), hidden_dim_(hidden_dim) {}

void CorpusIndex::add(const std::string& doc_id, const Eigen::VectorXd& vec) {
    require(vec.size() == hidden_dim_, "config", "vector width does not match the index");
    require(vec.allFinite(), "numeric", "non-finite document vector");
    doc_ids_.push_back(doc_id);
    vectors_.push_back(vec);
}

std::vector<SearchHit> CorpusIndex::search(const Eigen::VectorXd& query, int top_k) const {
    require(!doc_ids_.empty(), "empty-index", "search over an empty index");
    require(top_k >= 1, "config", "top_k must be at least 1");
    const size_t n = doc_ids_.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> scores(n);
    for (size_t i = 0; i < n; ++i) scores[i] = vectors_[i].dot(query);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return doc_ids_[a] < doc_ids_[b];
    });
    const size_t k = std::min(static_cast<size_t>(top_k), n);
    std::vector<SearchHit> hits;
    hits.reserve(k);
    for (size_t i = 0; i < k; ++i)
        hits.push_back(SearchHit{doc_ids_[order[i]], scores[order[i]], static_cast<int>(i) + 1});
    return hits;
}

void CorpusIndex::save(const std::string& dir) const {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json manifest = {
        {"format_version", 1},
        {"task_id", task_id_},
        {"prompt_mode", prompt_mode_},
        {"checkpoint_id", checkpoint_id_},
        {"hidden_dim", hidden_dim_},
        {"count", doc_ids_.size()},
    };
    std::ofstream mf(fs::path(dir) / "index_manifest.json");
    mf << manifest.dump(2) << "\n";

    std::ofstream ids(fs::path(dir) / "doc_ids.txt");
    for (const std::string& id : doc_ids_) ids << id << "\n";

    std::ofstream bin(fs::path(dir) / "vectors.bin", std::ios::binary);
    for (const Eigen::VectorXd& v : vectors_)
        bin.write(reinterpret_cast<const char*>(v.data()),
                  static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(v.size())));
}

CorpusIndex CorpusIndex::load(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream mf(fs::path(dir) / "index_manifest.json");
    require(mf.good(), "io", "missing index manifest in " + dir);
    nlohmann::json manifest = nlohmann::json::parse(mf);
    CorpusIndex index(manifest.at("task_id"), manifest.at("prompt_mode"),
                      manifest.at("checkpoint_id"), manifest.at("hidden_dim"));
    size_t count = manifest.at("count");

    std::ifstream ids(fs::path(dir) / "doc_ids.txt");
    require(ids.good(), "io", "missing doc id list in " + dir);
    std::ifstream bin(fs::path(dir) / "vectors.bin", std::ios::binary);
    require(bin.good(), "io", "missing vector file in " + dir);
    for (size_t i = 0; i < count; ++i) {
        std::string id;
        require(static_cast<bool>(std::getline(ids, id)), "parse", "doc id list is short");
        Eigen::VectorXd v(index.hidden_dim_);
        bin.read(reinterpret_cast<char*>(v.data()),
                 static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(v.size())));
        require(bin.gcount() ==
                    static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(v.size())),
                "parse", "vector file is short");
        index.add(id, v);
    }
    return index;
}

}  // namespace nirprompt
