#include "nirprompt/taskgen.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "nirprompt/errors.hpp"
#include "nirprompt/rng.hpp"

namespace nirprompt {

const std::vector<std::string> kAllTasks = {"DR", "QA", "RD", "PI", "NLI"};
const std::vector<std::string> kRetrievalTasks = {"DR", "QA", "RD"};

bool is_known_task(const std::string& task_id) {
    return std::find(kAllTasks.begin(), kAllTasks.end(), task_id) != kAllTasks.end();
}

std::vector<const MatchExample*> TaskDataset::split(Split s) const {
    std::vector<const MatchExample*> out;
    for (const MatchExample& ex : examples)
        if (ex.split == s) out.push_back(&ex);
    return out;
}

namespace {

const Vocabulary& vocab() { return Vocabulary::standard(); }

std::vector<int> families_of_form(const std::vector<int>& text, int form) {
    std::vector<int> out;
    for (int id : text)
        if (vocab().is_content(id) && vocab().content_form(id) == form)
            out.push_back(vocab().content_family(id));
    return out;
}

std::vector<int> filler_tokens(const std::vector<int>& text) {
    std::vector<int> out;
    for (int id : text)
        if (vocab().is_content(id) && vocab().content_form(id) == 4) out.push_back(id);
    std::sort(out.begin(), out.end());
    return out;
}

// Family ids of head/synonym tokens, sorted (heads and synonyms are the
// same family under the paraphrase relation).
std::vector<int> family_multiset(const std::vector<int>& text) {
    std::vector<int> out;
    for (int id : text) {
        if (!vocab().is_content(id)) continue;
        int form = vocab().content_form(id);
        if (form == 0 || form == 1) out.push_back(vocab().content_family(id));
    }
    std::sort(out.begin(), out.end());
    return out;
}

double dr_overlap_ratio(const std::vector<int>& query, const std::vector<int>& doc) {
    std::set<int> q(query.begin(), query.end());
    std::set<int> d(doc.begin(), doc.end());
    if (q.empty()) return 0.0;
    int hit = 0;
    for (int id : q)
        if (d.count(id)) ++hit;
    return static_cast<double>(hit) / static_cast<double>(q.size());
}

// Sentence-construction helpers bound to one vocabulary half.
struct HalfSampler {
    Rng& rng;
    int half;

    int pick_filler() { return vocab().filler(half, static_cast<int>(rng.uniform_index(Vocabulary::kFillers))); }

    int pick_filler_excluding(const std::vector<int>& banned) {
        for (;;) {
            int f = pick_filler();
            if (std::find(banned.begin(), banned.end(), f) == banned.end()) return f;
        }
    }

    std::vector<int> pick_families(size_t n, const std::vector<int>& banned = {}) {
        std::vector<int> out;
        while (out.size() < n) {
            int f = static_cast<int>(rng.uniform_index(Vocabulary::kFamilies));
            if (std::find(out.begin(), out.end(), f) != out.end()) continue;
            if (std::find(banned.begin(), banned.end(), f) != banned.end()) continue;
            out.push_back(f);
        }
        return out;
    }
};

struct PairDraft {
    std::vector<int> text1, text2;
    int label = 0;
};

PairDraft make_dr(HalfSampler& s, int grade) {
    PairDraft d;
    std::vector<int> fams = s.pick_families(2);
    d.text1 = {vocab().head(s.half, fams[0]), vocab().head(s.half, fams[1]), s.pick_filler()};
    if (s.rng.uniform() < 0.5) d.text1.push_back(s.pick_filler_excluding(d.text1));
    s.rng.shuffle(d.text1);

    std::set<int> qset(d.text1.begin(), d.text1.end());
    std::vector<int> banned_fillers(d.text1.begin(), d.text1.end());
    if (grade == 2) {
        d.text2 = d.text1;
        d.text2.push_back(s.pick_filler_excluding(banned_fillers));
        if (s.rng.uniform() < 0.5) d.text2.push_back(s.pick_filler_excluding(d.text2));
    } else if (grade == 1) {
        std::vector<int> kept(d.text1.begin(), d.text1.end());
        s.rng.shuffle(kept);
        kept.resize(qset.size() / 2);  // lands in the [0.25, 0.75) overlap band
        d.text2 = kept;
        while (d.text2.size() < 4) d.text2.push_back(s.pick_filler_excluding(banned_fillers));
    } else {
        std::vector<int> other = s.pick_families(2, fams);
        d.text2 = {vocab().head(s.half, other[0]), vocab().head(s.half, other[1])};
        while (d.text2.size() < 4) d.text2.push_back(s.pick_filler_excluding(banned_fillers));
    }
    s.rng.shuffle(d.text2);
    d.label = grade;
    return d;
}

PairDraft make_qa(HalfSampler& s, bool positive, double self_negative_rate) {
    PairDraft d;
    std::vector<int> fam = s.pick_families(1);
    int u = s.pick_filler();
    int v = s.pick_filler_excluding({u});
    d.text1 = {vocab().head(s.half, fam[0]), u, v};
    s.rng.shuffle(d.text1);
    if (positive) {
        int topic = s.rng.uniform() < 0.5 ? u : v;
        d.text2 = {vocab().answer(s.half, fam[0]), topic, s.pick_filler(), s.pick_filler()};
        s.rng.shuffle(d.text2);
        d.label = 1;
    } else if (s.rng.uniform() < self_negative_rate) {
        d.text2 = d.text1;  // the question itself can never be its own answer
        d.label = 0;
    } else {
        std::vector<int> other = s.pick_families(1, fam);
        d.text2 = {vocab().answer(s.half, other[0]), s.pick_filler(), s.pick_filler(),
                   s.pick_filler()};
        s.rng.shuffle(d.text2);
        d.label = 0;
    }
    return d;
}

PairDraft make_pi(HalfSampler& s, bool positive) {
    PairDraft d;
    std::vector<int> fams = s.pick_families(2);
    int a = s.pick_filler();
    int b = s.pick_filler_excluding({a});
    d.text1 = {vocab().head(s.half, fams[0]), vocab().head(s.half, fams[1]), a, b};
    s.rng.shuffle(d.text1);
    if (positive) {
        d.text2 = {s.rng.uniform() < 0.5 ? vocab().synonym(s.half, fams[0])
                                         : vocab().head(s.half, fams[0]),
                   s.rng.uniform() < 0.5 ? vocab().synonym(s.half, fams[1])
                                         : vocab().head(s.half, fams[1]),
                   a, b};
        d.label = 1;
    } else {
        std::vector<int> other = s.pick_families(2, fams);
        d.text2 = {s.rng.uniform() < 0.5 ? vocab().synonym(s.half, other[0])
                                         : vocab().head(s.half, other[0]),
                   vocab().head(s.half, other[1]), a, s.pick_filler()};
        d.label = 0;
    }
    s.rng.shuffle(d.text2);
    return d;
}

PairDraft make_nli(HalfSampler& s, bool positive) {
    PairDraft d;
    std::vector<int> fams = s.pick_families(3);
    int filler = s.pick_filler();
    d.text1 = {vocab().head(s.half, fams[0]), vocab().head(s.half, fams[1]),
               vocab().head(s.half, fams[2]), filler};
    s.rng.shuffle(d.text1);
    if (positive) {
        std::vector<int> chosen = fams;
        s.rng.shuffle(chosen);
        d.text2 = {vocab().consequence(s.half, chosen[0]), vocab().consequence(s.half, chosen[1])};
        if (s.rng.uniform() < 0.5) d.text2.push_back(filler);
        d.label = 1;
    } else {
        std::vector<int> outside = s.pick_families(1, fams);
        d.text2 = {vocab().consequence(s.half, outside[0]),
                   vocab().consequence(s.half, fams[static_cast<size_t>(s.rng.uniform_index(3))])};
        if (s.rng.uniform() < 0.5) d.text2.push_back(s.pick_filler());
        d.label = 0;
    }
    s.rng.shuffle(d.text2);
    return d;
}

PairDraft make_rd(HalfSampler& s, bool positive) {
    PairDraft d;
    std::vector<int> fams = s.pick_families(2);
    int u = s.pick_filler();
    d.text1 = {vocab().head(s.half, fams[0]), u, vocab().head(s.half, fams[1])};
    s.rng.shuffle(d.text1);
    if (positive) {
        int f = fams[static_cast<size_t>(s.rng.uniform_index(2))];
        d.text2 = {vocab().consequence(s.half, f)};
        if (s.rng.uniform() < 0.5) d.text2.push_back(u);  // echo one post token
        d.text2.push_back(s.pick_filler());
        d.label = 1;
    } else {
        std::vector<int> outside = s.pick_families(1, fams);
        d.text2 = {vocab().consequence(s.half, outside[0]), s.pick_filler(), s.pick_filler()};
        d.label = 0;
    }
    s.rng.shuffle(d.text2);
    return d;
}

PairDraft make_pair(const std::string& task, HalfSampler& s, int target_label) {
    if (task == "DR") return make_dr(s, target_label);
    if (task == "QA") return make_qa(s, target_label == 1, 0.25);
    if (task == "PI") return make_pi(s, target_label == 1);
    if (task == "NLI") return make_nli(s, target_label == 1);
    if (task == "RD") return make_rd(s, target_label == 1);
    fail("invalid-task", "unknown task '" + task + "'");
}

std::string pair_key(const PairDraft& d) {
    std::string k;
    for (int id : d.text1) k += std::to_string(id) + ",";
    k += "|";
    for (int id : d.text2) k += std::to_string(id) + ",";
    return k;
}

}  // namespace

int relation_oracle(const std::string& task_id, const std::vector<int>& text1,
                    const std::vector<int>& text2) {
    if (task_id == "DR") {
        double r = dr_overlap_ratio(text1, text2);
        return r >= 0.75 ? 2 : (r >= 0.25 ? 1 : 0);
    }
    if (task_id == "QA") {
        for (int id : text1) {
            if (vocab().is_content(id) && vocab().content_form(id) == 0) {
                int answer = vocab().answer(vocab().content_half(id), vocab().content_family(id));
                return std::find(text2.begin(), text2.end(), answer) != text2.end() ? 1 : 0;
            }
        }
        return 0;
    }
    if (task_id == "PI") {
        return family_multiset(text1) == family_multiset(text2) &&
                       filler_tokens(text1) == filler_tokens(text2)
                   ? 1
                   : 0;
    }
    if (task_id == "NLI") {
        std::vector<int> premise = families_of_form(text1, 0);
        std::vector<int> cons;
        for (int id : text2)
            if (vocab().is_content(id) && vocab().content_form(id) == 3)
                cons.push_back(vocab().content_family(id));
        if (cons.empty()) return 0;
        for (int f : cons)
            if (std::find(premise.begin(), premise.end(), f) == premise.end()) return 0;
        return 1;
    }
    if (task_id == "RD") {
        std::vector<int> post = families_of_form(text1, 0);
        std::vector<int> cons;
        for (int id : text2)
            if (vocab().is_content(id) && vocab().content_form(id) == 3)
                cons.push_back(vocab().content_family(id));
        if (cons.size() != 1) return 0;
        return std::find(post.begin(), post.end(), cons[0]) != post.end() ? 1 : 0;
    }
    fail("invalid-task", "unknown task '" + task_id + "'");
}

TaskDataset generate_task_data(const std::string& task_id, const GenCounts& counts,
                               uint64_t seed) {
    require(is_known_task(task_id), "invalid-task", "unknown task '" + task_id + "'");
    require(counts.train >= 1 && counts.test_in_domain >= 1 && counts.test_out_of_domain >= 1 &&
                counts.few_shot >= 1,
            "config", "split counts must be at least 1");

    TaskDataset dataset;
    dataset.task_id = task_id;
    dataset.generator_seed = seed;
    Rng rng(seed ^ fnv1a64(task_id));
    std::unordered_set<std::string> seen;

    auto emit_split = [&](Split split, int count) {
        int half = split == Split::TestOutOfDomain ? 1 : 0;
        HalfSampler sampler{rng, half};
        for (int i = 0; i < count; ++i) {
            int target;
            if (task_id == "DR") {
                target = split == Split::FewShot ? (i % 2 == 0 ? 2 : 0) : 2 - (i % 3);
            } else {
                target = i % 2 == 0 ? 1 : 0;
            }
            PairDraft draft;
            int attempts = 0;
            for (;;) {
                draft = make_pair(task_id, sampler, target);
                require(relation_oracle(task_id, draft.text1, draft.text2) == draft.label,
                        "internal", "generator produced a label the oracle rejects");
                if (seen.insert(pair_key(draft)).second) break;
                require(++attempts < 10000, "internal", "could not sample a fresh pair");
            }
            std::ostringstream id;
            id << task_id << "-" << to_string(split) << "-" << i;
            dataset.examples.push_back(MatchExample{id.str(), task_id, split, draft.text1,
                                                    draft.text2, draft.label});
        }
    };

    emit_split(Split::Train, counts.train);
    emit_split(Split::TestInDomain, counts.test_in_domain);
    emit_split(Split::TestOutOfDomain, counts.test_out_of_domain);
    emit_split(Split::FewShot, counts.few_shot);
    return dataset;
}

void serialize_dataset(const TaskDataset& dataset, const std::string& path) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "io", "cannot write dataset file " + path);
    out << "#nirprompt-dataset v1\n";
    out << "#meta\t" << dataset.task_id << "\t" << dataset.generator_seed << "\t"
        << dataset.domain_shift << "\n";
    const Vocabulary& v = vocab();
    for (const MatchExample& ex : dataset.examples) {
        out << ex.example_id << "\t" << ex.task_id << "\t" << to_string(ex.split) << "\t"
            << v.detokenize(ex.text1) << "\t" << v.detokenize(ex.text2) << "\t" << ex.label
            << "\n";
    }
}

TaskDataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "io", "cannot read dataset file " + path);
    TaskDataset dataset;
    std::string line;
    int line_no = 0;
    bool saw_header = false;
    const Vocabulary& v = vocab();
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line_no == 1) {
            require(line == "#nirprompt-dataset v1", "parse",
                    "line 1: unrecognized dataset header");
            saw_header = true;
            continue;
        }
        if (line.rfind("#meta\t", 0) == 0) {
            std::istringstream ms(line.substr(6));
            std::string seed_str;
            require(static_cast<bool>(std::getline(ms, dataset.task_id, '\t')) &&
                        static_cast<bool>(std::getline(ms, seed_str, '\t')) &&
                        static_cast<bool>(std::getline(ms, dataset.domain_shift, '\t')),
                    "parse", "line " + std::to_string(line_no) + ": malformed meta line");
            dataset.generator_seed = std::stoull(seed_str);
            continue;
        }
        std::vector<std::string> fields;
        std::string field;
        std::istringstream ls(line);
        while (std::getline(ls, field, '\t')) fields.push_back(field);
        static const char* kFieldNames[] = {"example_id", "task_id", "split",
                                            "text1",      "text2",   "label"};
        if (fields.size() < 6)
            fail("parse", "line " + std::to_string(line_no) + ": missing field '" +
                              std::string(kFieldNames[fields.size()]) + "'");
        MatchExample ex;
        ex.example_id = fields[0];
        ex.task_id = fields[1];
        ex.split = split_from_string(fields[2]);
        ex.text1 = v.tokenize(fields[3]);
        ex.text2 = v.tokenize(fields[4]);
        try {
            ex.label = std::stoi(fields[5]);
        } catch (const std::exception&) {
            fail("parse", "line " + std::to_string(line_no) + ": label is not an integer");
        }
        require(!ex.text1.empty() && !ex.text2.empty(), "parse",
                "line " + std::to_string(line_no) + ": empty text span");
        dataset.examples.push_back(std::move(ex));
    }
    if (!dataset.examples.empty())
        require(saw_header, "parse", "dataset file lacks the schema header");
    if (dataset.task_id.empty() && !dataset.examples.empty())
        dataset.task_id = dataset.examples.front().task_id;
    return dataset;
}

}  // namespace nirprompt
