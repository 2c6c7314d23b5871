#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "evidence3/perturb.hpp"

#include "json.hpp"

namespace ev3 {

// One dataset record: an image on disk plus its instruction, ground-truth
// actions, the optional perturbation that produced it, and reference
// explanation.
// The spec field carries the truth annotation in three states: disengaged
// means the record carries no annotation (truth unknown, JSON key absent),
// an engaged empty spec marks a known-clean record (JSON null), and an
// engaged non-empty spec describes the applied perturbation (JSON object).
// A perturbed record keeps a pointer to the clean image it was derived from.
struct ManifestRecord {
  std::string image_path;  // relative to the manifest's directory
  std::optional<std::string> clean_path;
  std::string instruction;
  std::array<double, 7> action_now{};
  std::array<double, 7> action_next{};
  std::optional<PerturbationSpec> spec;
  std::string explanation_ref;
  std::string split;  // "train" or "eval"
};

// PerturbationSpec <-> JSON with exact field round-trip (u64 seed included).
nlohmann::ordered_json spec_to_json(const PerturbationSpec& spec);
PerturbationSpec spec_from_json(const nlohmann::json& j);

nlohmann::ordered_json record_to_json(const ManifestRecord& record);
ManifestRecord record_from_json(const nlohmann::json& j);

// True when the path stays inside the manifest's directory: non-empty,
// relative, and not escaping through "..".
bool manifest_path_ok(const std::string& path);

// Joins a record-relative path onto the directory containing the manifest.
std::filesystem::path resolve_manifest_path(
    const std::filesystem::path& manifest_path, const std::string& relative);

// Line-delimited JSON, one record per line. load throws IoError when the
// file cannot be read and ValidationError on a malformed record; save is
// atomic (temp file + rename).
std::vector<ManifestRecord> load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path,
                   const std::vector<ManifestRecord>& records);

}  // namespace ev3
