#include "nirprompt/model.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "nirprompt/errors.hpp"

namespace nirprompt {

int ModelConfig::resolved_vocab_size() const {
    return vocab_size > 0 ? vocab_size : Vocabulary::standard().size();
}

void ModelConfig::validate() const {
    require(num_layers > 0, "config", "num_layers must be positive");
    require(hidden_dim > 0, "config", "hidden_dim must be positive");
    require(num_heads > 0 && hidden_dim % num_heads == 0, "config",
            "hidden_dim must be divisible by num_heads");
    require(resolved_vocab_size() > 0, "config", "vocab_size must be positive");
    require(max_seq_len > 0, "config", "max_seq_len must be positive");
    int k = resolved_boundary();
    require(k >= 0 && k <= num_layers, "config",
            "boundary_layer must lie in [0, num_layers]");
}

void TokenSequence::validate(const ModelConfig& cfg) const {
    require(!token_ids.empty(), "empty-input", "token sequence is empty");
    require(length() <= cfg.max_seq_len, "length",
            "sequence length " + std::to_string(length()) + " exceeds max_seq_len " +
                std::to_string(cfg.max_seq_len));
    std::unordered_set<int> prompt_set;
    for (int p : prompt_positions) {
        require(p >= 0 && p < length(), "config", "prompt position out of range");
        prompt_set.insert(p);
    }
    require(prompt_set.size() == prompt_positions.size(), "config",
            "duplicate prompt positions");
    for (int m : mask_positions) {
        require(m >= 0 && m < length(), "config", "mask position out of range");
        require(!prompt_set.count(m), "config", "mask position collides with a prompt position");
    }
    require(static_cast<size_t>(injected.rows()) == prompt_positions.size(), "config",
            "each prompt position needs exactly one injected embedding");
    if (injected.rows() > 0)
        require(injected.cols() == cfg.hidden_dim, "config",
                "injected embedding width must equal hidden_dim");
}

size_t ParameterGroup::scalar_count() const {
    size_t n = 0;
    for (const Parameter* p : params) n += static_cast<size_t>(p->value.size());
    return n;
}

uint64_t group_hash(const ParameterGroup& g) {
    uint64_t h = 1469598103934665603ULL;
    for (const Parameter* p : g.params) {
        h = fnv1a64(p->name.data(), p->name.size(), h);
        h = fnv1a64(p->value.data(), sizeof(double) * static_cast<size_t>(p->value.size()), h);
    }
    return h;
}

Matrix mask_distribution(const Matrix& logits) {
    require(logits.allFinite(), "numeric", "non-finite logit in mask distribution");
    Matrix out(logits.rows(), logits.cols());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        double mx = logits.row(r).maxCoeff();
        Eigen::ArrayXXd e = (logits.row(r).array() - mx).exp();
        out.row(r) = (e / e.sum()).matrix();
    }
    return out;
}

TransformerEncoder::TransformerEncoder(const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const int H = cfg_.hidden_dim;
    const int V = cfg_.resolved_vocab_size();
    const int F = cfg_.ffn_dim();
    Rng rng(cfg_.seed);
    auto normal = [&](int r, int c) {
        Matrix m(r, c);
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.normal(0.0, 0.02);
        return m;
    };
    auto push = [&](const std::string& name, Matrix v) {
        by_name_[name] = params_.size();
        params_.emplace_back(name, std::move(v));
    };
    push("tok_emb", normal(V, H));
    push("pos_emb", normal(cfg_.max_seq_len, H));
    for (int l = 0; l < cfg_.num_layers; ++l) {
        std::string pre = "layer" + std::to_string(l) + ".";
        push(pre + "ln1_g", Matrix::Ones(1, H));
        push(pre + "ln1_b", Matrix::Zero(1, H));
        push(pre + "wq", normal(H, H));
        push(pre + "bq", Matrix::Zero(1, H));
        push(pre + "wk", normal(H, H));
        push(pre + "bk", Matrix::Zero(1, H));
        push(pre + "wv", normal(H, H));
        push(pre + "bv", Matrix::Zero(1, H));
        push(pre + "wo", normal(H, H));
        push(pre + "bo", Matrix::Zero(1, H));
        push(pre + "ln2_g", Matrix::Ones(1, H));
        push(pre + "ln2_b", Matrix::Zero(1, H));
        push(pre + "w1", normal(H, F));
        push(pre + "b1", Matrix::Zero(1, F));
        push(pre + "w2", normal(F, H));
        push(pre + "b2", Matrix::Zero(1, H));
    }
    push("mlm_w", normal(H, V));
    push("mlm_b", Matrix::Zero(1, V));
}

Parameter& TransformerEncoder::p(const std::string& name) {
    return params_[by_name_.at(name)];
}

const Parameter& TransformerEncoder::p(const std::string& name) const {
    return params_[by_name_.at(name)];
}

ForwardResult TransformerEncoder::forward(Graph& g, const TokenSequence& seq, Var injected,
                                          bool need_mask) const {
    seq.validate(cfg_);
    if (need_mask)
        require(!seq.mask_positions.empty(), "missing-mask",
                "mask output requested but sequence has no mask position");
    const bool has_prompts = !seq.prompt_positions.empty();
    require(!has_prompts || injected.valid(), "config",
            "prompt positions present but no injected embeddings supplied");

    auto& self = const_cast<TransformerEncoder&>(*this);
    const int L = seq.length();
    const int H = cfg_.hidden_dim;
    const int heads = cfg_.num_heads;
    const int dh = H / heads;
    const int k = cfg_.resolved_boundary();
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

    std::vector<int> positions(static_cast<size_t>(L));
    for (int i = 0; i < L; ++i) positions[static_cast<size_t>(i)] = i;

    Var x = g.add(g.gather_rows(g.param(self.p("tok_emb")), seq.token_ids),
                  g.gather_rows(g.param(self.p("pos_emb")), positions));
    if (has_prompts) x = g.replace_rows(x, seq.prompt_positions, injected);

    ForwardResult out;
    out.layer_hidden.push_back(x);

    for (int l = 0; l < cfg_.num_layers; ++l) {
        std::string pre = "layer" + std::to_string(l) + ".";
        Var xn = g.layer_norm_rows(x, g.param(self.p(pre + "ln1_g")),
                                   g.param(self.p(pre + "ln1_b")), 1e-5);
        Var q = g.add_row_broadcast(g.matmul(xn, g.param(self.p(pre + "wq"))),
                                    g.param(self.p(pre + "bq")));
        Var kk = g.add_row_broadcast(g.matmul(xn, g.param(self.p(pre + "wk"))),
                                     g.param(self.p(pre + "bk")));
        Var v = g.add_row_broadcast(g.matmul(xn, g.param(self.p(pre + "wv"))),
                                    g.param(self.p(pre + "bv")));
        std::vector<Var> head_outputs;
        head_outputs.reserve(static_cast<size_t>(heads));
        for (int h = 0; h < heads; ++h) {
            Var qh = g.slice_cols(q, h * dh, dh);
            Var kh = g.slice_cols(kk, h * dh, dh);
            Var vh = g.slice_cols(v, h * dh, dh);
            Var scores = g.scale(g.matmul(qh, g.transpose(kh)), inv_sqrt_dh);
            Var attn = g.softmax_rows(scores);
            head_outputs.push_back(g.matmul(attn, vh));
        }
        Var concat = heads == 1 ? head_outputs[0] : g.concat_cols(head_outputs);
        Var attn_out = g.add_row_broadcast(g.matmul(concat, g.param(self.p(pre + "wo"))),
                                           g.param(self.p(pre + "bo")));
        x = g.add(x, attn_out);
        Var xn2 = g.layer_norm_rows(x, g.param(self.p(pre + "ln2_g")),
                                    g.param(self.p(pre + "ln2_b")), 1e-5);
        Var hid = g.gelu(g.add_row_broadcast(g.matmul(xn2, g.param(self.p(pre + "w1"))),
                                             g.param(self.p(pre + "b1"))));
        Var ffn_out = g.add_row_broadcast(g.matmul(hid, g.param(self.p(pre + "w2"))),
                                          g.param(self.p(pre + "b2")));
        x = g.add(x, ffn_out);
        if (has_prompts && l + 1 <= k) x = g.replace_rows(x, seq.prompt_positions, injected);
        out.layer_hidden.push_back(x);
    }
    out.final_hidden = x;

    for (int m : seq.mask_positions) {
        Var h = g.row(x, m);
        Var logits = g.add_row_broadcast(g.matmul(h, g.param(self.p("mlm_w"))),
                                         g.param(self.p("mlm_b")));
        out.mask_hidden.push_back(h);
        out.mask_logits.push_back(logits);
        out.mask_probs.push_back(g.softmax_rows(logits));
    }
    return out;
}

ForwardResult TransformerEncoder::forward_values(Graph& g, const TokenSequence& seq,
                                                 bool need_mask) const {
    Var injected;
    if (!seq.prompt_positions.empty()) injected = g.constant(seq.injected);
    return forward(g, seq, injected, need_mask);
}

ParameterGroup TransformerEncoder::parameter_group() {
    ParameterGroup group{"plm", {}};
    group.params.reserve(params_.size());
    for (Parameter& p : params_) group.params.push_back(&p);
    return group;
}

}  // namespace nirprompt
