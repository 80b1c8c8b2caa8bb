#pragma once

#include <string>

#include "nirprompt/errors.hpp"

namespace nirprompt {

enum class Stage { Retrieval, Reranking };
enum class PromptMode { Manual, Continuous, Hybrid };
enum class Slot { P1, P2, Pq, Pd };

inline std::string to_string(Stage s) {
    return s == Stage::Retrieval ? "retrieval" : "reranking";
}

inline Stage stage_from_string(const std::string& s) {
    if (s == "retrieval") return Stage::Retrieval;
    if (s == "reranking") return Stage::Reranking;
    fail("config", "unknown stage '" + s + "'");
}

inline std::string to_string(PromptMode m) {
    switch (m) {
        case PromptMode::Manual: return "manual";
        case PromptMode::Continuous: return "continuous";
        default: return "hybrid";
    }
}

inline PromptMode prompt_mode_from_string(const std::string& s) {
    if (s == "manual") return PromptMode::Manual;
    if (s == "continuous") return PromptMode::Continuous;
    if (s == "hybrid") return PromptMode::Hybrid;
    fail("config", "unknown prompt mode '" + s + "'");
}

inline std::string to_string(Slot s) {
    switch (s) {
        case Slot::P1: return "P1";
        case Slot::P2: return "P2";
        case Slot::Pq: return "Pq";
        default: return "Pd";
    }
}

inline Slot slot_from_string(const std::string& s) {
    if (s == "P1") return Slot::P1;
    if (s == "P2") return Slot::P2;
    if (s == "Pq") return Slot::Pq;
    if (s == "Pd") return Slot::Pd;
    fail("config", "unknown prompt slot '" + s + "'");
}

enum class Split { Train, TestInDomain, TestOutOfDomain, FewShot };

inline std::string to_string(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::TestInDomain: return "test_in_domain";
        case Split::TestOutOfDomain: return "test_out_of_domain";
        default: return "few_shot";
    }
}

inline Split split_from_string(const std::string& s) {
    if (s == "train") return Split::Train;
    if (s == "test_in_domain") return Split::TestInDomain;
    if (s == "test_out_of_domain") return Split::TestOutOfDomain;
    if (s == "few_shot") return Split::FewShot;
    fail("parse", "unknown split '" + s + "'");
}

}  // namespace nirprompt
