#include "rdvq/unitstats/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "rdvq/common.hpp"

namespace rdvq {

namespace {

constexpr double kAlignRate = 100.0;

// Index of the interval holding time t (seconds), or -1.
long interval_at(const std::vector<TimedLabel>& track, double t) {
  auto it = std::upper_bound(track.begin(), track.end(), t,
                             [](double v, const TimedLabel& l) { return v < l.start / kAlignRate; });
  if (it == track.begin()) return -1;
  --it;
  if (t < it->end / kAlignRate) return long(it - track.begin());
  return -1;
}

double plogp_sum(const std::vector<double>& v, double total) {
  double h = 0;
  for (double c : v)
    if (c > 0) {
      const double p = c / total;
      h -= p * std::log(p);
    }
  return h;
}

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

}  // namespace

UnitMap to_unit_map(const std::vector<UnitSequence>& units) {
  UnitMap m;
  for (const auto& u : units) m[u.utt_id] = u.codes;
  return m;
}

double ContingencyTable::total() const {
  double s = 0;
  for (const auto& row : counts)
    for (double c : row) s += c;
  return s;
}

ContingencyTable cooccurrence(const UnitMap& units, double rate, const TrackMap& align) {
  std::map<std::pair<std::string, int>, double> cells;
  std::set<std::string> labels;
  std::set<int> used;
  ContingencyTable t;
  for (const auto& [utt, codes] : units) {
    auto it = align.find(utt);
    if (it == align.end()) {
      t.dropped += codes.size();
      continue;
    }
    for (std::size_t j = 0; j < codes.size(); ++j) {
      const long k = interval_at(it->second, (j + 0.5) / rate);
      if (k < 0) {
        ++t.dropped;
        continue;
      }
      const std::string& label = it->second[std::size_t(k)].label;
      cells[{label, codes[j]}] += 1;
      labels.insert(label);
      used.insert(codes[j]);
    }
  }
  if (cells.empty()) throw DataError("cooccurrence: no unit frame falls inside an aligned interval");
  t.labels.assign(labels.begin(), labels.end());
  t.units.assign(used.begin(), used.end());
  t.counts.assign(t.labels.size(), std::vector<double>(t.units.size(), 0.0));
  for (const auto& [key, c] : cells) {
    const auto li = std::lower_bound(t.labels.begin(), t.labels.end(), key.first) - t.labels.begin();
    const auto ui = std::lower_bound(t.units.begin(), t.units.end(), key.second) - t.units.begin();
    t.counts[li][ui] = c;
  }
  return t;
}

ConditionalMatrix conditional_matrix(const ContingencyTable& t) {
  ConditionalMatrix m;
  const std::size_t L = t.labels.size(), U = t.units.size();
  m.p.assign(L, std::vector<double>(U, 0.0));
  m.empty_unit.assign(U, false);
  for (std::size_t u = 0; u < U; ++u) {
    double col = 0;
    for (std::size_t l = 0; l < L; ++l) col += t.counts[l][u];
    if (col <= 0) {
      m.empty_unit[u] = true;
      continue;
    }
    for (std::size_t l = 0; l < L; ++l) m.p[l][u] = t.counts[l][u] / col;
  }
  return m;
}

double nmi(const std::vector<std::vector<double>>& counts) {
  const std::size_t L = counts.size();
  if (L == 0) throw DataError("nmi: empty table");
  const std::size_t U = counts[0].size();
  std::vector<double> row(L, 0.0), col(U, 0.0);
  double total = 0;
  for (std::size_t l = 0; l < L; ++l) {
    if (counts[l].size() != U) throw DataError("nmi: ragged table");
    for (std::size_t u = 0; u < U; ++u) {
      if (counts[l][u] < 0) throw DataError("nmi: negative count");
      row[l] += counts[l][u];
      col[u] += counts[l][u];
      total += counts[l][u];
    }
  }
  if (!(total > 0)) throw DataError("nmi: table has no counts");
  const double hl = plogp_sum(row, total), hu = plogp_sum(col, total);
  if (hl + hu <= 0) return 1.0;
  double mi = 0;
  for (std::size_t l = 0; l < L; ++l)
    for (std::size_t u = 0; u < U; ++u) {
      const double c = counts[l][u];
      if (c > 0) mi += (c / total) * std::log(c * total / (row[l] * col[u]));
    }
  const double v = 2.0 * mi / (hl + hu);
  return std::clamp(v, 0.0, 1.0);
}

WordMatch parse_word_match(const std::string& s) {
  if (s == "midpoint") return WordMatch::kMidpoint;
  if (s == "overlap") return WordMatch::kOverlap;
  throw UsageError("word match must be 'midpoint' or 'overlap', got '" + s + "'");
}

double f1_score(double precision, double recall) {
  return precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
}

std::vector<WordDetectorRow> word_detector_stats(const UnitMap& units, double rate, const TrackMap& words,
                                                 WordMatch match) {
  std::map<int, std::size_t> runs_of;
  std::map<std::string, std::size_t> tokens_of;
  std::map<std::pair<int, std::string>, std::size_t> occ;
  std::map<std::pair<int, std::string>, std::size_t> hit_tokens;
  for (const auto& [utt, track] : words)
    if (units.count(utt))
      for (const auto& w : track) ++tokens_of[w.label];

  for (const auto& [utt, codes] : units) {
    auto it = words.find(utt);
    const std::vector<TimedLabel> none;
    const auto& track = it == words.end() ? none : it->second;
    std::map<std::pair<int, std::size_t>, bool> token_hit;  // (code, token index)
    std::size_t start = 0;
    while (start < codes.size()) {
      std::size_t end = start;
      while (end < codes.size() && codes[end] == codes[start]) ++end;
      const int c = codes[start];
      ++runs_of[c];
      const double t0 = start / rate, t1 = end / rate;
      long k = -1;
      if (match == WordMatch::kMidpoint) {
        k = interval_at(track, 0.5 * (t0 + t1));
      } else {
        for (std::size_t i = 0; i < track.size() && k < 0; ++i) {
          const double ov = std::min(t1, track[i].end / kAlignRate) - std::max(t0, track[i].start / kAlignRate);
          if (ov >= 0.5 * (t1 - t0)) k = long(i);
        }
      }
      if (k >= 0) {
        const std::string& w = track[std::size_t(k)].label;
        ++occ[{c, w}];
        if (!token_hit[{c, std::size_t(k)}]) {
          token_hit[{c, std::size_t(k)}] = true;
          ++hit_tokens[{c, w}];
        }
      }
      start = end;
    }
  }

  std::vector<WordDetectorRow> rows;
  for (const auto& [key, n] : occ) {
    WordDetectorRow r;
    r.code = key.first;
    r.word = key.second;
    r.occ = n;
    r.code_runs = runs_of[key.first];
    r.word_tokens = tokens_of[key.second];
    r.precision = double(n) / double(r.code_runs);
    r.recall = r.word_tokens ? double(hit_tokens[key]) / double(r.word_tokens) : 0.0;
    r.f1 = f1_score(r.precision, r.recall);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<WordDetectorRow> rank_codes(const std::vector<WordDetectorRow>& rows) {
  std::map<int, WordDetectorRow> best;
  for (const auto& r : rows) {
    auto it = best.find(r.code);
    if (it == best.end() || r.f1 > it->second.f1) best[r.code] = r;
  }
  std::vector<WordDetectorRow> out;
  for (auto& [c, r] : best) out.push_back(r);
  std::stable_sort(out.begin(), out.end(),
                   [](const WordDetectorRow& a, const WordDetectorRow& b) { return a.f1 > b.f1; });
  return out;
}

std::size_t f1_threshold_count(const std::vector<WordDetectorRow>& rows, double tau) {
  std::size_t n = 0;
  for (const auto& r : rank_codes(rows)) n += r.f1 > tau;
  return n;
}

std::string format_conditional_matrix(const ContingencyTable& t, const ConditionalMatrix& m) {
  std::string out = "label";
  for (int u : t.units) out += "\t" + std::to_string(u);
  out += "\n";
  for (std::size_t l = 0; l < t.labels.size(); ++l) {
    out += t.labels[l];
    for (std::size_t u = 0; u < t.units.size(); ++u) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "\t%.6g", m.p[l][u]);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

std::string format_detector_report(const std::vector<WordDetectorRow>& rows) {
  std::vector<WordDetectorRow> sorted = rows;
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    return a.f1 > b.f1 || (a.f1 == b.f1 && a.code < b.code);
  });
  std::string out = "code,word,F1,P,R,occ\n";
  for (const auto& r : sorted)
    out += str_cat(r.code, ",", r.word, ",", pct(r.f1), ",", pct(r.precision), ",", pct(r.recall), ",", r.occ, "\n");
  return out;
}

std::string format_threshold_curve(const std::vector<WordDetectorRow>& rows, const std::vector<double>& taus) {
  std::string out = "tau\tcodes\n";
  for (double t : taus) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f\t%zu\n", t, f1_threshold_count(rows, t));
    out += buf;
  }
  return out;
}

std::string format_unit_track(const std::string& utt, const std::vector<int>& codes, double rate) {
  std::string out = "utt\tframe_time\tcode\n";
  for (std::size_t j = 0; j < codes.size(); ++j) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "\t%.4f\t%d\n", j / rate, codes[j]);
    out += utt + buf;
  }
  return out;
}

}  // namespace rdvq
