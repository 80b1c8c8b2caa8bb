#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nirprompt/model.hpp"

namespace nirprompt {

// Checkpoint directory layout: manifest.json plus one binary tensor file
// per parameter group (tag characters unsafe for filenames map to '_').
namespace checkpoint {

std::string compute_id(const std::vector<ParameterGroup>& groups);
std::string group_file_name(const std::string& tag);

void write_group(const std::string& dir, const ParameterGroup& group);
// Loads tensors into the group's existing parameters, validating that
// names and shapes match the constructed model.
void read_group(const std::string& dir, ParameterGroup& group);

void write_manifest(const std::string& dir, const nlohmann::json& manifest);
nlohmann::json read_manifest(const std::string& dir);

}  // namespace checkpoint

}  // namespace nirprompt
