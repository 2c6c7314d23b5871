#include "evidence3/explain.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "evidence3/errors.hpp"

namespace ev3 {

namespace {

std::string format_metric(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", value);
  return buf;
}

// Replace every occurrence of the <metric> placeholder with the value
// formatted at 3 decimals.
std::string instantiate(const std::string& tmpl, double value) {
  static const std::string kPlaceholder = "<metric>";
  const std::string formatted = format_metric(value);
  std::string out = tmpl;
  std::size_t pos = 0;
  while ((pos = out.find(kPlaceholder, pos)) != std::string::npos) {
    out.replace(pos, kPlaceholder.size(), formatted);
    pos += formatted.size();
  }
  return out;
}

}  // namespace

const ExplainTemplates& default_templates() {
  static const ExplainTemplates t{
      /*version=*/1,
      /*clean=*/
      "No photometric perturbation detected; inputs are consistent with the "
      "calibration corpus.",
      /*color=*/
      "Hue distribution deviates from the clean reference (Mahalanobis "
      "distance <metric>); object colors may be misread, risking wrong "
      "target selection.",
      /*noise=*/
      "High-frequency energy exceeds the clean reference (energy ratio "
      "<metric>); fine-grained sensor noise may mask object boundaries, "
      "risking unstable grasp placement.",
      /*spatial=*/
      "Local entropy dispersion departs from the clean reference (entropy "
      "std <metric>); lighting or texture statistics may be distorted, "
      "risking misjudged scene geometry."};
  return t;
}

ExplainTemplates templates_from_json(const nlohmann::json& j) {
  ExplainTemplates t;
  try {
    t.version = j.at("version").get<int>();
    bool have_clean = false, have_color = false, have_noise = false,
         have_spatial = false;
    for (const auto& entry : j.at("templates")) {
      const std::string flag = entry.at("flag").get<std::string>();
      const std::string tmpl = entry.at("template").get<std::string>();
      if (flag == "clean") {
        t.clean = tmpl;
        have_clean = true;
      } else if (flag == "color") {
        t.color = tmpl;
        have_color = true;
      } else if (flag == "noise") {
        t.noise = tmpl;
        have_noise = true;
      } else if (flag == "spatial") {
        t.spatial = tmpl;
        have_spatial = true;
      } else {
        throw ValidationError("explanation templates: unknown flag '" + flag +
                              "'");
      }
    }
    if (!(have_clean && have_color && have_noise && have_spatial)) {
      throw ValidationError(
          "explanation templates: need entries for clean, color, noise, and "
          "spatial");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("explanation templates: malformed JSON: ") +
                          e.what());
  }
  return t;
}

nlohmann::ordered_json templates_to_json(const ExplainTemplates& t) {
  nlohmann::ordered_json entries = nlohmann::ordered_json::array();
  auto add = [&entries](const char* flag, const std::string& tmpl) {
    nlohmann::ordered_json e;
    e["flag"] = flag;
    e["template"] = tmpl;
    entries.push_back(std::move(e));
  };
  add("clean", t.clean);
  add("color", t.color);
  add("noise", t.noise);
  add("spatial", t.spatial);
  nlohmann::ordered_json j;
  j["version"] = t.version;
  j["templates"] = std::move(entries);
  return j;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::istringstream stream(text);
  std::string token;
  while (stream >> token) tokens.push_back(token);
  return tokens;
}

std::string render_cue(const EvidenceReport& report) {
  std::string flags;
  if (report.flag_color) flags += 'C';
  if (report.flag_noise) flags += 'N';
  if (report.flag_spatial) flags += 'S';
  if (flags.empty()) flags = "-";
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "[EVIDENCE mahal=%.3f hf=%.3f entstd=%.3f flags=%s]",
                report.d_mahal, report.hf_ratio, report.ent_std, flags.c_str());
  return buf;
}

Explanation render_explanation(const EvidenceReport& report,
                               const ExplainTemplates& templates) {
  Explanation out;
  out.cause_color = report.flag_color;
  out.cause_noise = report.flag_noise;
  out.cause_spatial = report.flag_spatial;

  std::vector<std::string> sentences;
  if (report.flag_color)
    sentences.push_back(instantiate(templates.color, report.d_mahal));
  if (report.flag_noise)
    sentences.push_back(instantiate(templates.noise, report.hf_ratio));
  if (report.flag_spatial)
    sentences.push_back(instantiate(templates.spatial, report.ent_std));

  if (sentences.empty()) {
    out.text = templates.clean;
  } else {
    std::string text = sentences.front();
    for (std::size_t i = 1; i < sentences.size(); ++i) {
      text += ' ';
      text += sentences[i];
    }
    out.text = std::move(text);
  }
  out.tokens = tokenize(out.text);
  return out;
}

double token_accuracy(const std::vector<std::string>& predicted,
                      const std::vector<std::string>& reference) {
  if (reference.empty())
    throw ValidationError("token_accuracy: reference token list is empty");
  const std::size_t limit = std::min(predicted.size(), reference.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < limit; ++i)
    if (predicted[i] == reference[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(reference.size());
}

int explanation_class(const PerturbationSpec& spec) {
  int cls = 0;
  if (spec.use_color) cls |= 1;
  if (spec.use_illum) cls |= 2;
  if (spec.use_noise) cls |= 4;
  return cls;
}

PerturbationSpec class_to_subset(int cls) {
  if (cls < 0 || cls > 7)
    throw ValidationError("class_to_subset: class id must be in [0,7]");
  PerturbationSpec spec;
  spec.use_color = (cls & 1) != 0;
  spec.use_illum = (cls & 2) != 0;
  spec.use_noise = (cls & 4) != 0;
  return spec;
}

}  // namespace ev3
