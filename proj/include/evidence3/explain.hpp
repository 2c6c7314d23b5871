#pragma once

#include <string>
#include <vector>

#include "evidence3/evidence.hpp"
#include "evidence3/perturb.hpp"

#include "json.hpp"

namespace ev3 {

// Deterministic rendered explanation. cause flags follow the report flags;
// the spatial slot doubles as the illumination/spatial-irregularity cause.
struct Explanation {
  bool cause_color = false;
  bool cause_noise = false;
  bool cause_spatial = false;
  std::string text;
  std::vector<std::string> tokens;  // whitespace split of text
};

// Cause/effect sentence per flag, with a <metric> placeholder, plus the
// canonical clean sentence. Shipped as a versioned JSON resource; the
// compiled-in defaults match data/explanation_templates.json.
struct ExplainTemplates {
  int version = 1;
  std::string clean;
  std::string color;
  std::string noise;
  std::string spatial;
};

const ExplainTemplates& default_templates();
ExplainTemplates templates_from_json(const nlohmann::json& j);
nlohmann::ordered_json templates_to_json(const ExplainTemplates& t);

std::vector<std::string> tokenize(const std::string& text);

// Bit-exact cue line appended to instructions:
//   [EVIDENCE mahal=%.3f hf=%.3f entstd=%.3f flags=<subset-of-CNS-or-dash>]
std::string render_cue(const EvidenceReport& report);

// One canonical sentence per raised flag, concatenated in the fixed order
// color, noise, spatial; no raised flags yields the clean sentence.
// Metric values are rendered with 3 decimals, so equal reports (after that
// rounding) produce byte-identical text.
Explanation render_explanation(const EvidenceReport& report,
                               const ExplainTemplates& templates = default_templates());

// Positional exact-match accuracy against the reference length.
// Throws ValidationError on an empty reference.
double token_accuracy(const std::vector<std::string>& predicted,
                      const std::vector<std::string>& reference);

// Bijection between transform subsets and class ids 0..7:
// color -> 1, illum -> 2, noise -> 4; the empty subset is 0.
int explanation_class(const PerturbationSpec& spec);

// Inverse of explanation_class, with all parameters left at defaults.
PerturbationSpec class_to_subset(int cls);

}  // namespace ev3
