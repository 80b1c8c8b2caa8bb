#include "nirprompt/prompts.hpp"

#include <algorithm>
#include <cmath>

#include "nirprompt/errors.hpp"
#include "nirprompt/rng.hpp"
#include "nirprompt/vocab.hpp"

namespace nirprompt {

const char* kHybridQuestion = "Do these two sentences match?";

const SlotContent& PromptSet::slot(Slot s) const {
    auto it = slots.find(s);
    require(it != slots.end(), "config",
            "prompt set for task '" + task_id + "' has no slot " + to_string(s));
    return it->second;
}

std::vector<Slot> slots_for_stage(Stage stage) {
    if (stage == Stage::Retrieval) return {Slot::P1, Slot::P2, Slot::Pq, Slot::Pd};
    return {Slot::P1, Slot::P2, Slot::Pq};
}

namespace {

struct ManualRow {
    const char* p1;
    const char* p2;
    const char* pq;  // retrieval rows use this for both Pq and Pd
};

const std::map<std::string, ManualRow>& retrieval_table() {
    static const std::map<std::string, ManualRow> table = {
        {"DR", {"The query:", "The passage:", "Representation for document retrieval is:"}},
        {"QA", {"The question:", "The passage:", "Representation for question answering is:"}},
        {"RD",
         {"The first sentence:", "The second sentence:",
          "Representation for retrieval-based dialogue is:"}},
    };
    return table;
}

const std::map<std::string, ManualRow>& reranking_table() {
    static const std::map<std::string, ManualRow> table = {
        {"DR", {"Query:", "Passage:", "Does the passage include the content that matches the query?"}},
        {"QA", {"Question:", "Passage:", "Does the passage include the answer of the question?"}},
        {"RD", {"The first text:", "The second text:", "Can the second text reply to the first text?"}},
        {"PI", {"The first text:", "The second text:", "Do these two texts mean the same thing?"}},
        {"NLI", {"Premise:", "Hypothesis:", "Can the hypothesis be concluded from the premise?"}},
    };
    return table;
}

}  // namespace

std::string manual_template(const std::string& task_id, Stage stage, Slot slot,
                            bool verbatim_typo) {
    const auto& table = stage == Stage::Retrieval ? retrieval_table() : reranking_table();
    auto it = table.find(task_id);
    require(it != table.end(), "missing-template",
            "no manual " + to_string(stage) + " template for task '" + task_id + "'");
    switch (slot) {
        case Slot::P1: return it->second.p1;
        case Slot::P2: return it->second.p2;
        default: break;
    }
    require(stage == Stage::Retrieval || slot == Slot::Pq, "config",
            "slot Pd exists only in the retrieval stage");
    std::string q = it->second.pq;
    if (stage == Stage::Reranking && task_id == "DR" && verbatim_typo) {
        // Table as printed opens with "Dose"; the shipped default corrects it.
        q = "Dose" + q.substr(4);
    }
    return q;
}

PromptEncoder::PromptEncoder(std::string key, int length, int hidden_dim, uint64_t seed)
    : key_(std::move(key)), m_(length), H_(hidden_dim), Hl_(hidden_dim / 2) {
    require(m_ >= 1, "config", "continuous prompt length must be at least 1");
    require(H_ % 2 == 0, "config", "hidden_dim must be even for the bidirectional encoder");
    Rng rng(seed);
    auto normal = [&](int r, int c) {
        Matrix m(r, c);
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.normal(0.0, 0.02);
        return m;
    };
    auto push = [&](const std::string& name, Matrix v) {
        by_name_[name] = params_.size();
        params_.emplace_back(key_ + "." + name, std::move(v));
    };
    push("p_init", normal(m_, H_));
    for (const char* dir : {"fwd", "bwd"}) {
        std::string d(dir);
        push(d + ".w_ih", normal(H_, 4 * Hl_));
        push(d + ".w_hh", normal(Hl_, 4 * Hl_));
        push(d + ".b", Matrix::Zero(1, 4 * Hl_));
    }
    push("mlp.w1", normal(H_, H_));
    push("mlp.b1", Matrix::Zero(1, H_));
    push("mlp.w2", normal(H_, H_));
    push("mlp.b2", Matrix::Zero(1, H_));
}

Parameter& PromptEncoder::p(const std::string& name) {
    return params_[by_name_.at(name)];
}

const Parameter& PromptEncoder::p(const std::string& name) const {
    return params_[by_name_.at(name)];
}

Var PromptEncoder::encode(Graph& g) {
    Var p_init = g.param(p("p_init"));

    auto run_direction = [&](const std::string& d, bool reverse) {
        Var w_ih = g.param(p(d + ".w_ih"));
        Var w_hh = g.param(p(d + ".w_hh"));
        Var b = g.param(p(d + ".b"));
        Var h = g.constant(Matrix::Zero(1, Hl_));
        Var c = g.constant(Matrix::Zero(1, Hl_));
        std::vector<Var> states(static_cast<size_t>(m_));
        for (int step = 0; step < m_; ++step) {
            int t = reverse ? m_ - 1 - step : step;
            Var xt = g.row(p_init, t);
            Var pre = g.add(g.add_row_broadcast(g.matmul(xt, w_ih), b), g.matmul(h, w_hh));
            Var gi = g.sigmoid(g.slice_cols(pre, 0, Hl_));
            Var gf = g.sigmoid(g.slice_cols(pre, Hl_, Hl_));
            Var gg = g.tanh_fn(g.slice_cols(pre, 2 * Hl_, Hl_));
            Var go = g.sigmoid(g.slice_cols(pre, 3 * Hl_, Hl_));
            c = g.add(g.mul(gf, c), g.mul(gi, gg));
            h = g.mul(go, g.tanh_fn(c));
            states[static_cast<size_t>(t)] = h;
        }
        return states;
    };

    std::vector<Var> fwd = run_direction("fwd", false);
    std::vector<Var> bwd = run_direction("bwd", true);
    std::vector<Var> rows;
    rows.reserve(static_cast<size_t>(m_));
    for (int t = 0; t < m_; ++t)
        rows.push_back(g.concat_cols({fwd[static_cast<size_t>(t)], bwd[static_cast<size_t>(t)]}));
    Var x = m_ == 1 ? rows[0] : g.concat_rows(rows);
    Var hid = g.tanh_fn(g.add_row_broadcast(g.matmul(x, g.param(p("mlp.w1"))),
                                            g.param(p("mlp.b1"))));
    return g.add_row_broadcast(g.matmul(hid, g.param(p("mlp.w2"))),
                               g.param(p("mlp.b2")));
}

Matrix PromptEncoder::encode_values() const {
    Graph g;
    return g.value(const_cast<PromptEncoder*>(this)->encode(g));
}

ParameterGroup PromptEncoder::parameter_group() {
    ParameterGroup group{"prompt_encoder:" + key_, {}};
    for (Parameter& p : params_) group.params.push_back(&p);
    return group;
}

PromptBank::PromptBank(Stage stage, PromptMode mode, std::vector<std::string> task_ids,
                       int continuous_length, int hidden_dim, uint64_t seed,
                       bool verbatim_typo)
    : stage_(stage), mode_(mode), task_ids_(std::move(task_ids)), m_(continuous_length),
      H_(hidden_dim), verbatim_typo_(verbatim_typo) {
    require(!(mode_ == PromptMode::Hybrid && stage_ == Stage::Retrieval), "unsupported-mode",
            "hybrid prompts exist only for the reranking stage");
    if (mode_ == PromptMode::Manual) return;
    for (const std::string& task : task_ids_) {
        for (Slot slot : continuous_slots()) {
            std::string key = encoder_key(task, slot);
            uint64_t enc_seed = fnv1a64(key.data(), key.size(), seed * 1099511628211ULL + 17);
            encoders_[key] = std::make_unique<PromptEncoder>(key, m_, H_, enc_seed);
        }
    }
}

std::vector<Slot> PromptBank::continuous_slots() const {
    std::vector<Slot> slots = slots_for_stage(stage_);
    if (mode_ == PromptMode::Hybrid)
        slots.erase(std::remove(slots.begin(), slots.end(), Slot::Pq), slots.end());
    return slots;
}

std::string PromptBank::encoder_key(const std::string& task_id, Slot slot) const {
    if (task_ids_.size() == 1) return to_string(slot);
    return task_id + "." + to_string(slot);
}

PromptSet PromptBank::render_manual(const std::string& task_id) const {
    const Vocabulary& vocab = Vocabulary::standard();
    PromptSet set;
    set.task_id = task_id;
    set.stage = stage_;
    set.mode = PromptMode::Manual;
    for (Slot slot : slots_for_stage(stage_)) {
        SlotContent content;
        content.manual_tokens =
            vocab.tokenize(manual_template(task_id, stage_, slot, verbatim_typo_));
        set.slots[slot] = std::move(content);
    }
    return set;
}

PromptSet PromptBank::realize(const std::string& task_id) const {
    if (mode_ == PromptMode::Manual) return render_manual(task_id);
    PromptSet set;
    set.task_id = task_id;
    set.stage = stage_;
    set.mode = mode_;
    for (Slot slot : slots_for_stage(stage_)) {
        SlotContent content;
        if (mode_ == PromptMode::Hybrid && slot == Slot::Pq) {
            content.manual_tokens = Vocabulary::standard().tokenize(kHybridQuestion);
        } else {
            content.embeddings = encoder(task_id, slot).encode_values();
        }
        set.slots[slot] = std::move(content);
    }
    return set;
}

std::map<Slot, Var> PromptBank::realize_vars(Graph& g, const std::string& task_id) const {
    std::map<Slot, Var> out;
    if (mode_ == PromptMode::Manual) return out;
    for (Slot slot : continuous_slots())
        out[slot] = const_cast<PromptBank*>(this)->encoder(task_id, slot).encode(g);
    return out;
}

PromptEncoder& PromptBank::encoder(const std::string& task_id, Slot slot) {
    auto it = encoders_.find(encoder_key(task_id, slot));
    require(it != encoders_.end(), "config",
            "no prompt encoder for task '" + task_id + "' slot " + to_string(slot));
    return *it->second;
}

const PromptEncoder& PromptBank::encoder(const std::string& task_id, Slot slot) const {
    return const_cast<PromptBank*>(this)->encoder(task_id, slot);
}

std::vector<ParameterGroup> PromptBank::parameter_groups() {
    std::vector<ParameterGroup> groups;
    for (auto& [key, enc] : encoders_) groups.push_back(enc->parameter_group());
    return groups;
}

std::vector<double> fusion_weights(const std::vector<double>& raw_logits) {
    require(!raw_logits.empty(), "config", "fusion needs at least one source");
    for (double v : raw_logits)
        require(std::isfinite(v), "numeric", "non-finite fusion logit");
    double mx = *std::max_element(raw_logits.begin(), raw_logits.end());
    std::vector<double> w(raw_logits.size());
    double sum = 0.0;
    for (size_t i = 0; i < w.size(); ++i) {
        w[i] = std::exp(raw_logits[i] - mx);
        sum += w[i];
    }
    for (double& v : w) v /= sum;
    return w;
}

PromptSet fuse_prompts(const std::vector<double>& raw_logits,
                       const std::vector<PromptSet>& sources) {
    require(!sources.empty(), "incompatible-prompts", "no source prompt sets");
    require(raw_logits.size() == sources.size(), "incompatible-prompts",
            "one fusion logit per source is required");
    const PromptSet& first = sources.front();
    require(first.mode != PromptMode::Manual, "unsupported-mode",
            "fusion requires continuous or hybrid prompts");
    for (const PromptSet& s : sources) {
        require(s.stage == first.stage && s.mode == first.mode, "incompatible-prompts",
                "sources must share stage and mode");
        for (const auto& [slot, content] : first.slots) {
            const SlotContent& other = s.slot(slot);
            require(content.is_manual() == other.is_manual(), "incompatible-prompts",
                    "slot kinds differ across sources");
            if (content.is_manual())
                require(content.manual_tokens == other.manual_tokens, "incompatible-prompts",
                        "manual slots must agree across sources");
            else
                require(content.embeddings.rows() == other.embeddings.rows() &&
                            content.embeddings.cols() == other.embeddings.cols(),
                        "incompatible-prompts", "slot shapes differ across sources");
        }
    }
    std::vector<double> w = fusion_weights(raw_logits);
    PromptSet fused;
    fused.task_id = "fused";
    fused.stage = first.stage;
    fused.mode = first.mode;
    for (const auto& [slot, content] : first.slots) {
        SlotContent out;
        if (content.is_manual()) {
            out.manual_tokens = content.manual_tokens;
        } else {
            out.embeddings = Matrix::Zero(content.embeddings.rows(), content.embeddings.cols());
            for (size_t t = 0; t < sources.size(); ++t)
                out.embeddings += w[t] * sources[t].slot(slot).embeddings;
        }
        fused.slots[slot] = std::move(out);
    }
    return fused;
}

std::map<Slot, Var> fuse_vars(Graph& g, Parameter& logits,
                              const std::vector<PromptSet>& sources) {
    require(!sources.empty(), "incompatible-prompts", "no source prompt sets");
    require(static_cast<size_t>(logits.value.size()) == sources.size(), "incompatible-prompts",
            "one fusion logit per source is required");
    Var w = g.softmax_rows(g.param(logits));
    std::map<Slot, Var> out;
    for (const auto& [slot, content] : sources.front().slots) {
        if (content.is_manual()) continue;
        const int m = static_cast<int>(content.embeddings.rows());
        const int H = static_cast<int>(content.embeddings.cols());
        Matrix flat(static_cast<Eigen::Index>(sources.size()), m * H);
        for (size_t t = 0; t < sources.size(); ++t) {
            const Matrix& e = sources[t].slot(slot).embeddings;
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < H; ++j)
                    flat(static_cast<Eigen::Index>(t), i * H + j) = e(i, j);
        }
        out[slot] = g.reshape(g.matmul(w, g.constant(std::move(flat))), m, H);
    }
    return out;
}

}  // namespace nirprompt
