#include "evidence3/manifest.hpp"

#include <sstream>

#include "evidence3/errors.hpp"
#include "evidence3/io_util.hpp"

namespace ev3 {

namespace {

void validate_spec(const PerturbationSpec& spec, const std::string& where) {
  if (spec.use_color &&
      !(spec.delta_hue > -180.0 && spec.delta_hue <= 180.0))
    throw ValidationError(where + ": delta_hue must be in (-180, 180]");
  if (spec.use_illum && !(spec.gain > 0.0))
    throw ValidationError(where + ": gain must be positive");
  if (spec.use_noise && !(spec.sigma >= 0.0))
    throw ValidationError(where + ": sigma must be nonnegative");
}

std::array<double, 7> action_from_json(const nlohmann::json& j,
                                       const std::string& where) {
  if (!j.is_array() || j.size() != 7)
    throw ValidationError(where + ": action vector must have 7 components");
  std::array<double, 7> out{};
  for (std::size_t i = 0; i < 7; ++i) out[i] = j[i].get<double>();
  return out;
}

}  // namespace

nlohmann::ordered_json spec_to_json(const PerturbationSpec& spec) {
  nlohmann::ordered_json j;
  j["use_color"] = spec.use_color;
  j["delta_hue"] = spec.delta_hue;
  j["use_illum"] = spec.use_illum;
  j["gain"] = spec.gain;
  j["use_noise"] = spec.use_noise;
  j["sigma"] = spec.sigma;
  j["seed"] = spec.seed;
  return j;
}

PerturbationSpec spec_from_json(const nlohmann::json& j) {
  PerturbationSpec spec;
  try {
    spec.use_color = j.at("use_color").get<bool>();
    spec.delta_hue = j.at("delta_hue").get<double>();
    spec.use_illum = j.at("use_illum").get<bool>();
    spec.gain = j.at("gain").get<double>();
    spec.use_noise = j.at("use_noise").get<bool>();
    spec.sigma = j.at("sigma").get<double>();
    spec.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed perturbation spec: ") +
                          e.what());
  }
  validate_spec(spec, "perturbation spec");
  return spec;
}

nlohmann::ordered_json record_to_json(const ManifestRecord& record) {
  nlohmann::ordered_json j;
  j["image_path"] = record.image_path;
  if (record.clean_path.has_value())
    j["clean_path"] = *record.clean_path;
  else
    j["clean_path"] = nullptr;
  j["instruction"] = record.instruction;
  j["action_now"] = record.action_now;
  j["action_next"] = record.action_next;
  // Three states: an active spec serializes as an object, a known-clean
  // record as an explicit null, and a record with no truth annotation at
  // all omits the key.
  if (record.spec.has_value()) {
    if (record.spec->empty())
      j["spec"] = nullptr;
    else
      j["spec"] = spec_to_json(*record.spec);
  }
  j["explanation_ref"] = record.explanation_ref;
  j["split"] = record.split;
  return j;
}

ManifestRecord record_from_json(const nlohmann::json& j) {
  ManifestRecord record;
  try {
    record.image_path = j.at("image_path").get<std::string>();
    const auto& clean = j.at("clean_path");
    if (!clean.is_null()) record.clean_path = clean.get<std::string>();
    record.instruction = j.at("instruction").get<std::string>();
    record.action_now = action_from_json(j.at("action_now"), "manifest record");
    record.action_next =
        action_from_json(j.at("action_next"), "manifest record");
    if (j.contains("spec")) {
      const auto& spec = j["spec"];
      record.spec = spec.is_null() ? PerturbationSpec{} : spec_from_json(spec);
    }
    record.explanation_ref = j.at("explanation_ref").get<std::string>();
    record.split = j.at("split").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed manifest record: ") +
                          e.what());
  }
  if (record.split != "train" && record.split != "eval")
    throw ValidationError("manifest record: split must be 'train' or 'eval'");
  if (!manifest_path_ok(record.image_path))
    throw ValidationError(
        "manifest record: image_path must be a relative path inside the "
        "manifest directory");
  if (record.clean_path.has_value() && !manifest_path_ok(*record.clean_path))
    throw ValidationError(
        "manifest record: clean_path must be a relative path inside the "
        "manifest directory");
  return record;
}

bool manifest_path_ok(const std::string& path) {
  if (path.empty()) return false;
  const std::filesystem::path p(path);
  if (p.is_absolute()) return false;
  const std::filesystem::path normal = p.lexically_normal();
  if (normal.empty()) return false;
  // A normalized path escaping upward starts with a ".." component.
  return normal.begin()->string() != "..";
}

std::filesystem::path resolve_manifest_path(
    const std::filesystem::path& manifest_path, const std::string& relative) {
  return manifest_path.parent_path() / relative;
}

std::vector<ManifestRecord> load_manifest(const std::filesystem::path& path) {
  const std::string bytes = read_file_bytes(path.string());
  std::vector<ManifestRecord> records;
  std::istringstream stream(bytes);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("manifest " + path.string() + " line " +
                            std::to_string(line_no) + ": " + e.what());
    }
    try {
      records.push_back(record_from_json(j));
    } catch (const ValidationError& e) {
      throw ValidationError("manifest " + path.string() + " line " +
                            std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

void save_manifest(const std::filesystem::path& path,
                   const std::vector<ManifestRecord>& records) {
  std::string out;
  for (const ManifestRecord& record : records) {
    out += record_to_json(record).dump();
    out += '\n';
  }
  atomic_write_text(path.string(), out);
}

}  // namespace ev3
