#include "nirprompt/vocab.hpp"

#include <array>
#include <sstream>

#include "nirprompt/errors.hpp"

namespace nirprompt {

uint64_t fnv1a64(const void* data, size_t len, uint64_t seed) {
    const auto* p = static_cast<const unsigned char*>(data);
    uint64_t h = seed;
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

namespace {

const char* kTaskIds[] = {"DR", "QA", "RD", "PI", "NLI"};

// Every manual prompt template, in both stages, including the
// verbatim-typo variant kept behind a config flag; the vocabulary carries
// each distinct word.
const char* kTemplateSentences[] = {
    "The query:",
    "The passage:",
    "Representation for document retrieval is:",
    "The question:",
    "Representation for question answering is:",
    "The first sentence:",
    "The second sentence:",
    "Representation for retrieval-based dialogue is:",
    "Query:",
    "Passage:",
    "Question:",
    "Does the passage include the content that matches the query?",
    "Dose the passage include the content that matches the query?",
    "Does the passage include the answer of the question?",
    "The first text:",
    "The second text:",
    "Can the second text reply to the first text?",
    "Do these two texts mean the same thing?",
    "Premise:",
    "Hypothesis:",
    "Can the hypothesis be concluded from the premise?",
    "Do these two sentences match?",
};

std::string content_name(int half, int form, int index) {
    static const char* half_prefix[] = {"i", "o"};
    static const char* form_prefix[] = {"h", "s", "a", "c", "f"};
    std::ostringstream os;
    os << half_prefix[half] << form_prefix[form] << (index < 10 ? "0" : "") << index;
    return os.str();
}

}  // namespace

Vocabulary::Vocabulary() {
    pad_ = add("[PAD]");
    cls_ = add("[CLS]");
    sep_ = add("[SEP]");
    mask_ = add("[MASK]");
    prm_ = add("[PRM]");
    yes_ = add("yes");
    no_ = add("no");
    for (const char* t : kTaskIds) marks_[t] = add(std::string("[MARK_") + t + "]");
    for (const char* sentence : kTemplateSentences) {
        std::istringstream is(sentence);
        std::string word;
        while (is >> word)
            if (!contains(word)) add(word);
    }
    content_base_ = static_cast<int>(tokens_.size());
    for (int half = 0; half < 2; ++half)
        for (int form = 0; form < 5; ++form)
            for (int i = 0; i < (form == 4 ? kFillers : kFamilies); ++i)
                add(content_name(half, form, i));
    uint64_t h = 1469598103934665603ULL;
    for (const std::string& t : tokens_) {
        h = fnv1a64(t.data(), t.size(), h);
        h = fnv1a64("\x1f", 1, h);
    }
    fingerprint_ = h;
}

const Vocabulary& Vocabulary::standard() {
    static const Vocabulary v;
    return v;
}

int Vocabulary::add(const std::string& token) {
    int id = static_cast<int>(tokens_.size());
    tokens_.push_back(token);
    index_[token] = id;
    return id;
}

const std::string& Vocabulary::token(int id) const {
    require(id >= 0 && id < size(), "parse", "token id out of range");
    return tokens_[static_cast<size_t>(id)];
}

int Vocabulary::id(const std::string& token) const {
    auto it = index_.find(token);
    require(it != index_.end(), "parse", "unknown token '" + token + "'");
    return it->second;
}

bool Vocabulary::contains(const std::string& token) const {
    return index_.count(token) > 0;
}

std::vector<int> Vocabulary::tokenize(const std::string& text) const {
    std::vector<int> out;
    std::istringstream is(text);
    std::string word;
    while (is >> word) out.push_back(id(word));
    return out;
}

std::string Vocabulary::detokenize(const std::vector<int>& ids) const {
    std::string out;
    for (size_t i = 0; i < ids.size(); ++i) {
        if (i) out += ' ';
        out += token(ids[i]);
    }
    return out;
}

int Vocabulary::mark(const std::string& task_id) const {
    auto it = marks_.find(task_id);
    require(it != marks_.end(), "invalid-task", "no mark token for task '" + task_id + "'");
    return it->second;
}

int Vocabulary::content(int half, int form, int index) const {
    int at = content_base_;
    for (int h = 0; h < 2; ++h) {
        for (int f = 0; f < 5; ++f) {
            int count = (f == 4 ? kFillers : kFamilies);
            if (h == half && f == form) {
                require(index >= 0 && index < count, "internal", "content index out of range");
                return at + index;
            }
            at += count;
        }
    }
    fail("internal", "bad content half/form");
}

int Vocabulary::content_half(int id) const {
    require(is_content(id), "internal", "not a content token");
    int off = id - content_base_;
    int per_half = 4 * kFamilies + kFillers;
    return off / per_half;
}

int Vocabulary::content_form(int id) const {
    int off = (id - content_base_) % (4 * kFamilies + kFillers);
    if (off >= 4 * kFamilies) return 4;
    return off / kFamilies;
}

int Vocabulary::content_family(int id) const {
    int off = (id - content_base_) % (4 * kFamilies + kFillers);
    if (off >= 4 * kFamilies) return off - 4 * kFamilies;  // filler index
    return off % kFamilies;
}

}  // namespace nirprompt
