#include "rdvq/synth/abx_triples.hpp"

#include <algorithm>
#include <map>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

namespace rdvq {

SpeakerMode parse_speaker_mode(const std::string& s) {
  if (s == "within") return SpeakerMode::kWithin;
  if (s == "across") return SpeakerMode::kAcross;
  throw UsageError("speaker mode must be 'within' or 'across', got '" + s + "'");
}

std::vector<AnnotatedUtterance> annotations(const std::vector<GroundedPair>& utts) {
  std::vector<AnnotatedUtterance> out;
  out.reserve(utts.size());
  for (const auto& g : utts) out.push_back({g.id, g.speaker, g.phones});
  return out;
}

std::vector<TriphoneToken> triphone_tokens(const std::vector<AnnotatedUtterance>& utts) {
  std::vector<TriphoneToken> out;
  for (std::size_t u = 0; u < utts.size(); ++u) {
    const auto& ph = utts[u].phones;
    for (std::size_t i = 0; i + 2 < ph.size(); ++i)
      out.push_back({u, ph[i].start, ph[i + 2].end, ph[i].label, ph[i + 1].label, ph[i + 2].label});
  }
  return out;
}

namespace {

struct Index {
  // (left, right) -> center -> speaker -> token ids
  std::map<std::pair<std::string, std::string>,
           std::map<std::string, std::map<std::string, std::vector<std::size_t>>>>
      by_context;
};

}  // namespace

AbxEnumeration enumerate_abx_triples(const std::vector<AnnotatedUtterance>& utts,
                                     std::size_t max_triples, SpeakerMode mode, Rng& rng) {
  AbxEnumeration result;
  const auto tokens = triphone_tokens(utts);
  auto spk = [&](std::size_t t) -> const std::string& { return utts[tokens[t].utt].speaker; };

  Index index;
  for (std::size_t t = 0; t < tokens.size(); ++t)
    index.by_context[{tokens[t].left, tokens[t].right}][tokens[t].center][spk(t)].push_back(t);

  for (const auto& [ctx, centers] : index.by_context)
    if (centers.size() < 2) ++result.warnings;

  // Candidate lists are built on demand from the index, in a fixed order.
  auto x_candidates = [&](std::size_t a) {
    std::vector<std::size_t> xs;
    const auto& per_spk = index.by_context.at({tokens[a].left, tokens[a].right}).at(tokens[a].center);
    for (const auto& [s, ids] : per_spk) {
      const bool same = s == spk(a);
      if ((mode == SpeakerMode::kWithin) != same) continue;
      for (std::size_t x : ids)
        if (x != a) xs.push_back(x);
    }
    return xs;
  };
  auto b_candidates = [&](std::size_t a) {
    std::vector<std::size_t> bs;
    for (const auto& [c, per_spk] : index.by_context.at({tokens[a].left, tokens[a].right})) {
      if (c == tokens[a].center) continue;
      auto it = per_spk.find(spk(a));
      if (it != per_spk.end()) bs.insert(bs.end(), it->second.begin(), it->second.end());
    }
    return bs;
  };
  auto count_x = [&](std::size_t a) {
    std::size_t n = 0;
    const auto& per_spk = index.by_context.at({tokens[a].left, tokens[a].right}).at(tokens[a].center);
    for (const auto& [s, ids] : per_spk) {
      const bool same = s == spk(a);
      if ((mode == SpeakerMode::kWithin) != same) continue;
      n += ids.size() - (same ? 1 : 0);
    }
    return n;
  };
  auto count_b = [&](std::size_t a) {
    std::size_t n = 0;
    for (const auto& [c, per_spk] : index.by_context.at({tokens[a].left, tokens[a].right})) {
      if (c == tokens[a].center) continue;
      auto it = per_spk.find(spk(a));
      if (it != per_spk.end()) n += it->second.size();
    }
    return n;
  };

  std::vector<std::size_t> prefix(tokens.size() + 1, 0);
  std::vector<std::size_t> nx(tokens.size());
  for (std::size_t a = 0; a < tokens.size(); ++a) {
    nx[a] = count_x(a);
    prefix[a + 1] = prefix[a] + (nx[a] ? nx[a] * count_b(a) : 0);
  }
  result.total_valid = prefix.back();
  if (result.total_valid == 0) {
    log_warn(str_cat("no ABX minimal pair found (", result.warnings, " single-center contexts)"));
    return result;
  }

  std::vector<std::size_t> picks;
  if (result.total_valid <= max_triples) {
    picks.resize(result.total_valid);
    for (std::size_t i = 0; i < picks.size(); ++i) picks[i] = i;
  } else {
    // Floyd's sampling of max_triples distinct indices.
    std::unordered_set<std::size_t> chosen;
    chosen.reserve(max_triples * 2);
    for (std::size_t j = result.total_valid - max_triples; j < result.total_valid; ++j) {
      const std::size_t t = std::uniform_int_distribution<std::size_t>(0, j)(rng);
      if (!chosen.insert(t).second) chosen.insert(j);
    }
    picks.assign(chosen.begin(), chosen.end());
    std::sort(picks.begin(), picks.end());
  }

  auto seg = [&](std::size_t t) {
    return SegmentRef{utts[tokens[t].utt].id, tokens[t].start, tokens[t].end};
  };
  std::size_t cached_a = std::size_t(-1);
  std::vector<std::size_t> bs, xs;
  for (std::size_t idx : picks) {
    const std::size_t a = std::size_t(std::upper_bound(prefix.begin(), prefix.end(), idx) - prefix.begin()) - 1;
    if (a != cached_a) {
      bs = b_candidates(a);
      xs = x_candidates(a);
      cached_a = a;
    }
    const std::size_t local = idx - prefix[a];
    const std::size_t b = bs[local / xs.size()], x = xs[local % xs.size()];
    const auto& ta = tokens[a];
    std::string cell = ta.left + "_" + ta.center + "_" + ta.right + "/" + tokens[b].center + "|" + spk(a);
    if (mode == SpeakerMode::kAcross) cell += ">" + spk(x);
    result.triples.push_back({seg(a), seg(b), seg(x), cell});
  }
  return result;
}

std::string validate_triple(const std::vector<AnnotatedUtterance>& utts, const TripleRecord& t,
                            SpeakerMode mode) {
  struct Tri {
    std::string speaker;
    std::vector<std::string> labels;
  };
  auto resolve = [&](const SegmentRef& s, Tri& out) -> std::string {
    auto it = std::find_if(utts.begin(), utts.end(), [&](const auto& u) { return u.id == s.utt_id; });
    if (it == utts.end()) return "unknown utterance " + s.utt_id;
    out.speaker = it->speaker;
    bool open = false;
    for (const auto& p : it->phones) {
      if (p.start == s.start) open = true;
      if (open) out.labels.push_back(p.label);
      if (open && p.end == s.end) break;
      if (p.end > s.end) return s.id() + " does not end on a phone boundary";
    }
    if (out.labels.size() != 3) return s.id() + " does not span exactly three phones";
    return "";
  };
  Tri a, b, x;
  for (auto [seg, tri] : {std::pair{&t.a, &a}, std::pair{&t.b, &b}, std::pair{&t.x, &x}})
    if (auto err = resolve(*seg, *tri); !err.empty()) return err;
  if (t.a == t.x) return "A and X are the same token";
  if (a.labels != x.labels) return "A and X differ in triphone";
  if (a.labels[0] != b.labels[0] || a.labels[2] != b.labels[2]) return "A and B differ in context";
  if (a.labels[1] == b.labels[1]) return "A and B share the center phone";
  if (a.speaker != b.speaker) return "A and B speakers differ";
  if (mode == SpeakerMode::kAcross && x.speaker == a.speaker) return "X shares A's speaker";
  if (mode == SpeakerMode::kWithin && x.speaker != a.speaker) return "X speaker differs from A";
  return "";
}

}  // namespace rdvq
