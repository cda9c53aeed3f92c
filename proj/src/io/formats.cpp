#include "rdvq/io/formats.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "rdvq/common.hpp"

namespace rdvq {

namespace {

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint32_t get_u32(const std::string& in, std::size_t pos) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= uint32_t(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return v;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

std::vector<std::string> split_tab(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

double parse_double(const std::string& s, const std::string& where) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0') throw DataError(where + ": expected a number, got '" + s + "'");
  return v;
}

long parse_long(const std::string& s, const std::string& where) {
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (s.empty() || *end != '\0') throw DataError(where + ": expected an integer, got '" + s + "'");
  return v;
}

std::string fmt_g9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string fmt_fixed6(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

void write_file_atomic(const std::string& path, const std::string& bytes) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(path + ": cannot open for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError(path + ": write failed");
  }
  fs::rename(tmp, target);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path + ": cannot open");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string encode_features(const Tensor<float>& m) {
  if (m.rank() != 2) throw std::invalid_argument("features must be a rank-2 matrix");
  std::string out = "VQGF";
  put_u32(out, kFeatureFormatVersion);
  put_u32(out, static_cast<uint32_t>(m.dim(0)));
  put_u32(out, static_cast<uint32_t>(m.dim(1)));
  out.reserve(out.size() + 4 * m.size());
  for (float v : m.values()) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
  }
  return out;
}

Tensor<float> decode_features(const std::string& bytes, const std::string& source) {
  if (bytes.size() < 16 || bytes.compare(0, 4, "VQGF") != 0)
    throw DataError(source + ": offset 0: missing VQGF magic");
  const uint32_t version = get_u32(bytes, 4);
  if (version != kFeatureFormatVersion)
    throw DataError(str_cat(source, ": offset 4: unsupported version ", version));
  const uint32_t rows = get_u32(bytes, 8), cols = get_u32(bytes, 12);
  const std::size_t expected = 16 + std::size_t(rows) * cols * 4;
  if (bytes.size() != expected)
    throw DataError(str_cat(source, ": offset 16: expected ", expected, " bytes for ", rows, "x",
                            cols, ", file has ", bytes.size()));
  Tensor<float> m({rows, cols});
  for (std::size_t i = 0; i < m.size(); ++i) {
    const uint32_t bits = get_u32(bytes, 16 + 4 * i);
    std::memcpy(&m[i], &bits, 4);
  }
  return m;
}

void write_features(const std::string& path, const Tensor<float>& m) {
  write_file_atomic(path, encode_features(m));
}

Tensor<float> read_features(const std::string& path) { return decode_features(read_file(path), path); }

std::string format_units(const std::vector<UnitSequence>& units) {
  std::string out;
  for (const auto& u : units) {
    out += u.utt_id;
    out += '\t';
    for (std::size_t i = 0; i < u.codes.size(); ++i) {
      if (i) out += ' ';
      out += std::to_string(u.codes[i]);
    }
    out += '\n';
  }
  return out;
}

std::vector<UnitSequence> parse_units(const std::string& text, const std::string& source) {
  std::vector<UnitSequence> out;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    const std::string where = str_cat(source, ":", lineno);
    if (tab == std::string::npos || tab == 0) throw DataError(where + ": expected utt_id<TAB>codes");
    UnitSequence u;
    u.utt_id = line.substr(0, tab);
    for (const auto& tok : split_ws(line.substr(tab + 1))) {
      const long c = parse_long(tok, where);
      if (c < 0) throw DataError(where + ": negative unit index");
      u.codes.push_back(static_cast<int>(c));
    }
    if (!seen.insert(u.utt_id).second) throw DataError(where + ": duplicate utterance " + u.utt_id);
    out.push_back(std::move(u));
  }
  return out;
}

void write_units(const std::string& path, const std::vector<UnitSequence>& units) {
  write_file_atomic(path, format_units(units));
}

std::vector<UnitSequence> read_units(const std::string& path) { return parse_units(read_file(path), path); }

std::string format_alignments(const std::vector<AlignmentInterval>& rows) {
  std::string out;
  for (const auto& r : rows)
    out += r.utt_id + '\t' + fmt_fixed6(r.start_s) + '\t' + fmt_fixed6(r.end_s) + '\t' + r.tier +
           '\t' + r.label + '\n';
  return out;
}

std::vector<AlignmentInterval> parse_alignments(const std::string& text, const std::string& source) {
  std::vector<AlignmentInterval> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  std::map<std::pair<std::string, std::string>, std::vector<std::pair<double, int>>> spans;
  std::vector<int> line_of;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    const std::string where = str_cat(source, ":", lineno);
    const auto f = split_tab(line);
    if (f.size() != 5) throw DataError(where + ": expected 5 tab-separated columns");
    AlignmentInterval a{f[0], parse_double(f[1], where), parse_double(f[2], where), f[3], f[4]};
    if (!(a.end_s > a.start_s)) throw DataError(where + ": interval end must exceed start");
    out.push_back(a);
    line_of.push_back(lineno);
  }
  // Overlap check per (utterance, tier), order independent.
  std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < out.size(); ++i) groups[{out[i].utt_id, out[i].tier}].push_back(i);
  for (auto& [key, idx] : groups) {
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return out[a].start_s < out[b].start_s;
    });
    for (std::size_t k = 1; k < idx.size(); ++k)
      if (out[idx[k]].start_s < out[idx[k - 1]].end_s - 1e-9)
        throw DataError(str_cat(source, ":", line_of[idx[k]], ": interval overlaps another ",
                                key.second, " interval of ", key.first));
  }
  return out;
}

void write_alignments(const std::string& path, const std::vector<AlignmentInterval>& rows) {
  write_file_atomic(path, format_alignments(rows));
}

std::vector<AlignmentInterval> read_alignments(const std::string& path) {
  return parse_alignments(read_file(path), path);
}

std::string SegmentRef::id() const { return str_cat(utt_id, ":", start, ":", end); }

SegmentRef SegmentRef::parse(const std::string& id) {
  const auto c2 = id.rfind(':');
  const auto c1 = c2 == std::string::npos || c2 == 0 ? std::string::npos : id.rfind(':', c2 - 1);
  if (c1 == std::string::npos || c1 == 0)
    throw DataError("segment id '" + id + "' is not of the form utt:start:end");
  SegmentRef s;
  s.utt_id = id.substr(0, c1);
  const long a = parse_long(id.substr(c1 + 1, c2 - c1 - 1), "segment id '" + id + "'");
  const long b = parse_long(id.substr(c2 + 1), "segment id '" + id + "'");
  if (a < 0 || b <= a) throw DataError("segment id '" + id + "' needs 0 <= start < end");
  s.start = static_cast<std::size_t>(a);
  s.end = static_cast<std::size_t>(b);
  return s;
}

std::string format_triples(const std::vector<TripleRecord>& triples) {
  std::string out;
  for (const auto& t : triples) out += t.a.id() + ' ' + t.b.id() + ' ' + t.x.id() + ' ' + t.contrast + '\n';
  return out;
}

std::vector<TripleRecord> parse_triples(const std::string& text, const std::string& source) {
  std::vector<TripleRecord> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto f = split_ws(line);
    const std::string where = str_cat(source, ":", lineno);
    if (f.size() != 4) throw DataError(where + ": expected 'idA idB idX contrast_id'");
    try {
      out.push_back({SegmentRef::parse(f[0]), SegmentRef::parse(f[1]), SegmentRef::parse(f[2]), f[3]});
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  return out;
}

void write_triples(const std::string& path, const std::vector<TripleRecord>& triples) {
  write_file_atomic(path, format_triples(triples));
}

std::vector<TripleRecord> read_triples(const std::string& path) {
  return parse_triples(read_file(path), path);
}

std::string format_image_features(const std::vector<std::pair<std::string, std::vector<float>>>& rows) {
  std::string out;
  for (const auto& [id, v] : rows) {
    out += id;
    out += '\t';
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out += ' ';
      out += fmt_g9(v[i]);
    }
    out += '\n';
  }
  return out;
}

std::vector<std::pair<std::string, std::vector<float>>> parse_image_features(
    const std::string& text, const std::string& source) {
  std::vector<std::pair<std::string, std::vector<float>>> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    const std::string where = str_cat(source, ":", lineno);
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) throw DataError(where + ": expected utt_id<TAB>values");
    std::vector<float> v;
    for (const auto& tok : split_ws(line.substr(tab + 1)))
      v.push_back(static_cast<float>(parse_double(tok, where)));
    if (!out.empty() && v.size() != out.front().second.size())
      throw DataError(where + ": inconsistent image feature dimension");
    out.emplace_back(line.substr(0, tab), std::move(v));
  }
  return out;
}

}  // namespace rdvq
