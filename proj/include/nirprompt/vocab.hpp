#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace nirprompt {

// Closed synthetic vocabulary shared by the model, the prompt templates and
// the task generator. Layout: special tokens, task mark tokens, the words
// used by the manual prompt templates, then the content tokens (an
// in-domain half and an out-of-domain half with mirrored structure).
class Vocabulary {
public:
    // Content-token structure: per half, kFamilies families with four
    // surface forms (head, synonym, answer, consequence) plus kFillers
    // filler tokens.
    static constexpr int kFamilies = 20;
    static constexpr int kFillers = 20;

    static const Vocabulary& standard();

    int size() const { return static_cast<int>(tokens_.size()); }
    const std::string& token(int id) const;
    int id(const std::string& token) const;  // throws parse error on unknown
    bool contains(const std::string& token) const;

    std::vector<int> tokenize(const std::string& text) const;
    std::string detokenize(const std::vector<int>& ids) const;

    int pad() const { return pad_; }
    int cls() const { return cls_; }
    int sep() const { return sep_; }
    int mask() const { return mask_; }
    int prompt_placeholder() const { return prm_; }
    int yes() const { return yes_; }
    int no() const { return no_; }
    int mark(const std::string& task_id) const;

    // Content-token accessors. half: 0 = in-domain, 1 = out-of-domain.
    int head(int half, int family) const { return content(half, 0, family); }
    int synonym(int half, int family) const { return content(half, 1, family); }
    int answer(int half, int family) const { return content(half, 2, family); }
    int consequence(int half, int family) const { return content(half, 3, family); }
    int filler(int half, int index) const { return content(half, 4, index); }

    bool is_content(int id) const { return id >= content_base_; }
    // Half/form/family of a content token; form 4 means filler.
    int content_half(int id) const;
    int content_form(int id) const;
    int content_family(int id) const;

    uint64_t fingerprint() const { return fingerprint_; }

private:
    Vocabulary();
    int add(const std::string& token);
    int content(int half, int form, int index) const;

    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
    int pad_ = 0, cls_ = 0, sep_ = 0, mask_ = 0, prm_ = 0, yes_ = 0, no_ = 0;
    std::unordered_map<std::string, int> marks_;
    int content_base_ = 0;
    uint64_t fingerprint_ = 0;
};

// FNV-1a 64-bit, used for file and vocabulary fingerprints.
uint64_t fnv1a64(const void* data, size_t len, uint64_t seed = 1469598103934665603ULL);
uint64_t fnv1a64(const std::string& s);

}  // namespace nirprompt
