#pragma once

// Curriculum strings "A1 -> A2 -> ... -> AM". A stage is "∅", "0" or "{}"
// for no quantizer, or a set such as "{2,3}", optionally followed by
// ":epochs". Stages after the first warm-start from their predecessor.

#include <optional>
#include <set>
#include <string>
#include <vector>

namespace rdvq {

struct CurriculumStage {
  std::set<int> layers;
  bool warm_start = false;
  std::optional<std::size_t> epochs;

  bool operator==(const CurriculumStage&) const = default;
};

std::vector<CurriculumStage> parse_curriculum(const std::string& text);

// "∅", "{3}", "{2,3}".
std::string stage_set_text(const std::set<int>& layers);
// Canonical text; parse_curriculum(canonical_curriculum(s)) == s.
std::string canonical_curriculum(const std::vector<CurriculumStage>& stages);
// Name of the model produced by stage i, e.g. "∅→{3}" for i = 1 of "∅->{3}->{2,3}".
std::string stage_name(const std::vector<CurriculumStage>& stages, std::size_t i);
// File-name-safe form: "none", "3", "23".
std::string stage_slug(const std::set<int>& layers);

}  // namespace rdvq
