#include "rdvq/trainer/curriculum.hpp"

#include <algorithm>
#include <cctype>

#include "rdvq/common.hpp"

namespace rdvq {

namespace {

const std::string kEmptySet = "\xE2\x88\x85";  // ∅
const std::string kArrow = "\xE2\x86\x92";     // →

std::string strip_spaces(const std::string& s) {
  std::string out;
  for (char c : s)
    if (!std::isspace(static_cast<unsigned char>(c))) out.push_back(c);
  return out;
}

std::vector<std::string> split_stages(std::string s) {
  std::size_t at;
  while ((at = s.find(kArrow)) != std::string::npos) s.replace(at, kArrow.size(), "->");
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find("->", start);
    parts.push_back(s.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 2;
  }
  return parts;
}

CurriculumStage parse_stage(std::string s, const std::string& whole) {
  CurriculumStage st;
  if (auto colon = s.find(':'); colon != std::string::npos) {
    const std::string n = s.substr(colon + 1);
    if (n.empty() || !std::all_of(n.begin(), n.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
      throw UsageError("curriculum '" + whole + "': bad epoch count '" + n + "'");
    st.epochs = std::stoul(n);
    s = s.substr(0, colon);
  }
  if (s == kEmptySet || s == "0" || s == "{}" || s == "{" + kEmptySet + "}") return st;
  if (s.size() < 2 || s.front() != '{' || s.back() != '}')
    throw UsageError("curriculum '" + whole + "': stage '" + s + "' is not a set like {2,3}");
  const std::string inner = s.substr(1, s.size() - 2);
  std::size_t start = 0;
  while (start <= inner.size()) {
    const auto comma = inner.find(',', start);
    const std::string item = inner.substr(start, comma - start);
    if (item != "2" && item != "3")
      throw UsageError("curriculum '" + whole + "': unknown VQ layer '" + item + "' (choose 2 or 3)");
    if (!st.layers.insert(item[0] - '0').second)
      throw UsageError("curriculum '" + whole + "': layer " + item + " repeated");
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return st;
}

}  // namespace

std::vector<CurriculumStage> parse_curriculum(const std::string& text) {
  const std::string s = strip_spaces(text);
  if (s.empty()) throw UsageError("empty curriculum");
  std::vector<CurriculumStage> stages;
  for (const auto& part : split_stages(s)) {
    if (part.empty()) throw UsageError("curriculum '" + text + "': empty stage");
    CurriculumStage st = parse_stage(part, text);
    if (!stages.empty()) {
      const auto& prev = stages.back().layers;
      if (!std::includes(st.layers.begin(), st.layers.end(), prev.begin(), prev.end()))
        throw UsageError("curriculum '" + text + "': stage " + stage_set_text(st.layers) +
                         " drops layers enabled in " + stage_set_text(prev));
      st.warm_start = true;
    }
    stages.push_back(std::move(st));
  }
  return stages;
}

std::string stage_set_text(const std::set<int>& layers) {
  if (layers.empty()) return kEmptySet;
  std::string s = "{";
  for (int l : layers) s += (s.size() > 1 ? "," : "") + std::to_string(l);
  return s + "}";
}

std::string canonical_curriculum(const std::vector<CurriculumStage>& stages) {
  std::string s;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    if (i) s += "->";
    s += stage_set_text(stages[i].layers);
    if (stages[i].epochs) s += ":" + std::to_string(*stages[i].epochs);
  }
  return s;
}

std::string stage_name(const std::vector<CurriculumStage>& stages, std::size_t i) {
  std::string s;
  for (std::size_t k = 0; k <= i && k < stages.size(); ++k) {
    if (k) s += kArrow;
    s += stage_set_text(stages[k].layers);
  }
  return s;
}

std::string stage_slug(const std::set<int>& layers) {
  if (layers.empty()) return "none";
  std::string s;
  for (int l : layers) s += std::to_string(l);
  return s;
}

}  // namespace rdvq
