#include "nirprompt/eval.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nirprompt/errors.hpp"

namespace nirprompt {

RankingMetrics ranking_metrics(const std::vector<std::vector<double>>& ranked_relevances) {
    require(!ranked_relevances.empty(), "empty-eval", "no queries to evaluate");
    RankingMetrics out;
    for (const std::vector<double>& rels : ranked_relevances) {
        require(!rels.empty(), "empty-eval", "a query has no ranked items");
        if (rels[0] > 0.0) out.p_at_1 += 1.0;
        for (size_t i = 0; i < rels.size(); ++i) {
            if (rels[i] > 0.0) {
                out.mrr += 1.0 / static_cast<double>(i + 1);
                break;
            }
        }
        double dcg = 0.0;
        for (size_t i = 0; i < std::min<size_t>(rels.size(), 10); ++i)
            dcg += (std::pow(2.0, rels[i]) - 1.0) / std::log2(static_cast<double>(i) + 2.0);
        std::vector<double> ideal = rels;
        std::sort(ideal.begin(), ideal.end(), std::greater<>());
        double idcg = 0.0;
        for (size_t i = 0; i < std::min<size_t>(ideal.size(), 10); ++i)
            idcg += (std::pow(2.0, ideal[i]) - 1.0) / std::log2(static_cast<double>(i) + 2.0);
        if (idcg > 0.0) out.ndcg10 += dcg / idcg;
    }
    const double n = static_cast<double>(ranked_relevances.size());
    out.p_at_1 /= n;
    out.mrr /= n;
    out.ndcg10 /= n;
    return out;
}

ClassificationMetrics classification_metrics(const std::vector<int>& predictions,
                                             const std::vector<int>& labels) {
    require(predictions.size() == labels.size(), "batch",
            "predictions and labels have different lengths");
    require(!predictions.empty(), "empty-eval", "no predictions to evaluate");
    int tp = 0, fp = 0, fn = 0, correct = 0;
    for (size_t i = 0; i < predictions.size(); ++i) {
        if (predictions[i] == labels[i]) ++correct;
        if (predictions[i] == 1 && labels[i] == 1) ++tp;
        if (predictions[i] == 1 && labels[i] == 0) ++fp;
        if (predictions[i] == 0 && labels[i] == 1) ++fn;
    }
    ClassificationMetrics out;
    out.accuracy = static_cast<double>(correct) / static_cast<double>(predictions.size());
    const double denom = 2.0 * tp + fp + fn;  // equals P+R scaled; zero iff no positive anywhere
    out.f1 = denom > 0.0 ? 2.0 * tp / denom : 0.0;
    return out;
}

Bm25Stats Bm25Stats::build(const std::vector<std::vector<int>>& corpus) {
    require(!corpus.empty(), "empty-corpus", "BM25 statistics need a non-empty corpus");
    Bm25Stats stats;
    stats.doc_count = static_cast<int>(corpus.size());
    size_t total_len = 0;
    for (const std::vector<int>& doc : corpus) {
        total_len += doc.size();
        std::vector<int> uniq = doc;
        std::sort(uniq.begin(), uniq.end());
        uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
        for (int t : uniq) stats.doc_freq[t] += 1;
    }
    stats.avg_doc_len = static_cast<double>(total_len) / static_cast<double>(corpus.size());
    return stats;
}

double bm25_score(const std::vector<int>& query, const std::vector<int>& document,
                  const Bm25Stats& stats) {
    require(stats.doc_count > 0, "empty-corpus", "BM25 needs corpus statistics");
    constexpr double k1 = 1.2;
    constexpr double b = 0.75;
    const double dl = static_cast<double>(document.size());
    double score = 0.0;
    for (int term : query) {
        int tf = static_cast<int>(std::count(document.begin(), document.end(), term));
        if (tf == 0) continue;
        auto it = stats.doc_freq.find(term);
        const double df = it == stats.doc_freq.end() ? 0.0 : static_cast<double>(it->second);
        const double idf = std::log((stats.doc_count - df + 0.5) / (df + 0.5) + 1.0);
        score += idf * (tf * (k1 + 1.0)) /
                 (tf + k1 * (1.0 - b + b * dl / stats.avg_doc_len));
    }
    return score;
}

ProbeResult qa_vs_pi_probe(const TaskScorer& scorer, const std::vector<ProbeItem>& items) {
    require(!items.empty(), "empty-eval", "probe needs at least one item");
    int a_wins = 0, q_wins = 0;
    for (const ProbeItem& item : items) {
        require(!item.question.empty() && !item.answer_passage.empty(), "empty-input",
                "probe items need a question and an answer passage");
        double qa_a = scorer("QA", item.question, item.answer_passage);
        double qa_q = scorer("QA", item.question, item.question);
        if (qa_a > qa_q) ++a_wins;  // ties count as failures
        double pi_q = scorer("PI", item.question, item.question);
        double pi_a = scorer("PI", item.question, item.answer_passage);
        if (pi_q > pi_a) ++q_wins;
    }
    const double n = static_cast<double>(items.size());
    return ProbeResult{100.0 * a_wins / n, 100.0 * q_wins / n};
}

namespace {

Eigen::VectorXd flatten_prompts(const PromptSet& set) {
    std::vector<double> values;
    for (const auto& [slot, content] : set.slots) {
        if (content.is_manual()) continue;
        for (Eigen::Index i = 0; i < content.embeddings.rows(); ++i)
            for (Eigen::Index j = 0; j < content.embeddings.cols(); ++j)
                values.push_back(content.embeddings(i, j));
    }
    require(!values.empty(), "config", "prompt set has no continuous slots to compare");
    return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

Matrix prompt_similarity_matrix(const std::vector<PromptSet>& prompt_sets,
                                std::vector<int>* flagged_rows) {
    const size_t n = prompt_sets.size();
    require(n >= 2, "config", "similarity matrix needs at least two tasks");
    std::vector<Eigen::VectorXd> flat;
    flat.reserve(n);
    for (const PromptSet& s : prompt_sets) flat.push_back(flatten_prompts(s));
    for (const Eigen::VectorXd& v : flat)
        require(v.size() == flat[0].size(), "config", "prompt shapes differ across tasks");

    Matrix sim = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            double denom = flat[i].norm() * flat[j].norm();
            double c = denom > 0.0 ? flat[i].dot(flat[j]) / denom : 0.0;
            sim(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = std::max(0.0, c);
        }
    }
    for (Eigen::Index r = 0; r < sim.rows(); ++r) {
        double row_sum = sim.row(r).sum();
        if (row_sum <= 0.0) {
            // Every cosine clamped to zero: fall back to a uniform row.
            if (flagged_rows) flagged_rows->push_back(static_cast<int>(r));
            for (Eigen::Index c = 0; c < sim.cols(); ++c)
                if (c != r) sim(r, c) = 1.0 / static_cast<double>(n - 1);
        } else {
            sim.row(r) /= row_sum;
        }
    }
    return sim;
}

void EvalReport::validate() const {
    for (const auto& [task, metrics] : per_task)
        for (const auto& [name, value] : metrics)
            require(value >= 0.0 && value <= 1.0, "numeric",
                    "metric " + task + "/" + name + " out of [0,1]");
    for (double p : {probe_p_a_gt_q, probe_p_q_gt_a})
        require(p < 0.0 || (p >= 0.0 && p <= 100.0), "numeric", "probe percentage out of range");
    auto check_rows = [](const Matrix& m, const char* what) {
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            require(std::abs(m.row(r).sum() - 1.0) < 1e-9, "numeric",
                    std::string(what) + " row does not sum to 1");
    };
    if (similarity.size() > 0) check_rows(similarity, "similarity matrix");
    if (fusion_weight_matrix.size() > 0) check_rows(fusion_weight_matrix, "fusion weight matrix");
}

nlohmann::json EvalReport::to_json() const {
    nlohmann::json j;
    j["per_task"] = per_task;
    if (probe_p_a_gt_q >= 0.0) {
        j["probe"]["p_a_gt_q"] = probe_p_a_gt_q;
        j["probe"]["p_q_gt_a"] = probe_p_q_gt_a;
    }
    auto matrix_json = [](const Matrix& m) {
        nlohmann::json rows = nlohmann::json::array();
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            nlohmann::json row = nlohmann::json::array();
            for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
            rows.push_back(row);
        }
        return rows;
    };
    if (similarity.size() > 0) {
        j["similarity"]["tasks"] = similarity_tasks;
        j["similarity"]["rows"] = matrix_json(similarity);
        j["similarity"]["uniform_fallback_rows"] = flagged_similarity_rows;
    }
    if (fusion_weight_matrix.size() > 0) {
        j["fusion_weights"]["row_tasks"] = fusion_row_tasks;
        j["fusion_weights"]["col_tasks"] = fusion_col_tasks;
        j["fusion_weights"]["rows"] = matrix_json(fusion_weight_matrix);
    }
    if (!run_manifest_ref.empty()) j["run_manifest"] = run_manifest_ref;
    return j;
}

std::string EvalReport::to_text() const {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(4);
    for (const auto& [task, metrics] : per_task) {
        os << task << ":";
        for (const auto& [name, value] : metrics) os << "  " << name << "=" << value;
        os << "\n";
    }
    if (probe_p_a_gt_q >= 0.0)
        os << "probe: P_{a>q}=" << probe_p_a_gt_q << "%  P_{q>a}=" << probe_p_q_gt_a << "%\n";
    if (!run_manifest_ref.empty()) os << "manifest: " << run_manifest_ref << "\n";
    return os.str();
}

void EvalReport::save(const std::string& path) const {
    validate();
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream json_out(path, std::ios::binary);
    require(json_out.good(), "io", "cannot write report " + path);
    json_out << to_json().dump(2) << "\n";
    std::filesystem::path txt = p;
    txt.replace_extension(".txt");
    std::ofstream text_out(txt, std::ios::binary);
    text_out << to_text();
}

void write_matrix_csv(const Matrix& m, const std::vector<std::string>& row_labels,
                      const std::vector<std::string>& col_labels, const std::string& path) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "io", "cannot write matrix file " + path);
    out << "task";
    for (const std::string& c : col_labels) out << "," << c;
    out << "\n";
    out.setf(std::ios::fixed);
    out.precision(9);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        out << row_labels[static_cast<size_t>(r)];
        for (Eigen::Index c = 0; c < m.cols(); ++c) out << "," << m(r, c);
        out << "\n";
    }
}

}  // namespace nirprompt
