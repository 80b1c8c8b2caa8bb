#pragma once

#include <string>
#include <vector>

#include "nirprompt/common.hpp"
#include "nirprompt/vocab.hpp"

namespace nirprompt {

struct MatchExample {
    std::string example_id;
    std::string task_id;
    Split split = Split::Train;
    std::vector<int> text1;
    std::vector<int> text2;
    int label = 0;  // binary; DR uses graded {0,1,2}

    bool operator==(const MatchExample&) const = default;
};

struct GenCounts {
    int train = 1000;
    int test_in_domain = 200;
    int test_out_of_domain = 200;
    int few_shot = 64;  // 32 positive + 32 negative
};

struct TaskDataset {
    std::string task_id;
    uint64_t generator_seed = 0;
    std::string domain_shift = "disjoint-surface-vocabulary";
    std::vector<MatchExample> examples;

    std::vector<const MatchExample*> split(Split s) const;
    bool operator==(const TaskDataset&) const = default;
};

extern const std::vector<std::string> kAllTasks;  // DR QA RD PI NLI
extern const std::vector<std::string> kRetrievalTasks;  // DR QA RD

bool is_known_task(const std::string& task_id);

// Deterministic synthetic data for one task. The out-of-domain split uses
// the mirrored token half, sharing no surface tokens with in-domain text.
TaskDataset generate_task_data(const std::string& task_id, const GenCounts& counts,
                               uint64_t seed);

// Label re-derivation from the generator's relation rules; ground truth for
// both negative sampling and the self-consistency tests.
int relation_oracle(const std::string& task_id, const std::vector<int>& text1,
                    const std::vector<int>& text2);

void serialize_dataset(const TaskDataset& dataset, const std::string& path);
TaskDataset load_dataset(const std::string& path);

}  // namespace nirprompt
