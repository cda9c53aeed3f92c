#include <cctype>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "doctest.h"
#include "rdvq/synth/abx_triples.hpp"
#include "rdvq/synth/corpus.hpp"

using namespace rdvq;

namespace {

SynthConfig small_config() {
  SynthConfig c;
  c.train_utts = 60;
  c.val_utts = 20;
  c.speakers = 4;
  return c;
}

const SynthCorpus& default_corpus() {
  static const SynthCorpus c = generate_corpus(SynthConfig{});
  return c;
}

int word_index(const std::string& name) {
  std::size_t i = name.size();
  while (i > 0 && std::isdigit(static_cast<unsigned char>(name[i - 1]))) --i;
  return std::stoi(name.substr(i));
}

std::vector<TimedLabel> track(std::initializer_list<std::string> labels, std::size_t len = 4) {
  std::vector<TimedLabel> out;
  std::size_t at = 0;
  for (const auto& l : labels) {
    out.push_back({at, at + len, l});
    at += len;
  }
  return out;
}

// Every (A, B, X) over triphone tokens, checked against the definition directly.
std::set<std::string> brute_triples(const std::vector<AnnotatedUtterance>& utts, SpeakerMode mode) {
  struct Tok {
    std::size_t u;
    std::size_t i;
  };
  std::vector<Tok> toks;
  for (std::size_t u = 0; u < utts.size(); ++u)
    for (std::size_t i = 0; i + 2 < utts[u].phones.size(); ++i) toks.push_back({u, i});
  auto lab = [&](const Tok& t, std::size_t k) { return utts[t.u].phones[t.i + k].label; };
  auto id = [&](const Tok& t) {
    return SegmentRef{utts[t.u].id, utts[t.u].phones[t.i].start, utts[t.u].phones[t.i + 2].end}.id();
  };
  std::set<std::string> out;
  for (const auto& a : toks)
    for (const auto& b : toks)
      for (const auto& x : toks) {
        if (id(a) == id(x)) continue;
        bool ok = true;
        for (std::size_t k = 0; k < 3; ++k) ok = ok && lab(a, k) == lab(x, k);
        ok = ok && lab(a, 0) == lab(b, 0) && lab(a, 2) == lab(b, 2) && lab(a, 1) != lab(b, 1);
        ok = ok && utts[a.u].speaker == utts[b.u].speaker;
        const bool same_x = utts[x.u].speaker == utts[a.u].speaker;
        ok = ok && (mode == SpeakerMode::kAcross ? !same_x : same_x);
        if (ok) out.insert(id(a) + " " + id(b) + " " + id(x));
      }
  return out;
}

std::set<std::string> as_set(const std::vector<TripleRecord>& t) {
  std::set<std::string> out;
  for (const auto& r : t) out.insert(r.a.id() + " " + r.b.id() + " " + r.x.id());
  return out;
}

}  // namespace

TEST_CASE("generation is deterministic and alignments tile every utterance") {
  const SynthCorpus a = generate_corpus(small_config());
  const SynthCorpus b = generate_corpus(small_config());
  REQUIRE(a.train.size() == 60);
  REQUIRE(a.val.size() == 20);
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    CHECK(a.train[i].features == b.train[i].features);
    CHECK(a.train[i].image == b.train[i].image);
    CHECK(a.train[i].phones == b.train[i].phones);
  }
  std::set<std::string> lexicon;
  for (std::size_t w = 0; w < a.lexicon.spellings.size(); ++w) lexicon.insert(a.lexicon.word_name(int(w)));
  for (const auto* split : {&a.train, &a.val})
    for (const auto& g : *split) {
      CHECK_NOTHROW(check_tiling(g.phones, g.num_frames(), g.id));
      CHECK_NOTHROW(check_tiling(g.words, g.num_frames(), g.id));
      CHECK(g.words.size() >= 4);
      CHECK(g.words.size() <= 8);
      CHECK(g.features.dim(1) == 40);
      CHECK(g.image.size() == 64);
      for (const auto& w : g.words) CHECK(lexicon.count(w.label) == 1);
    }
  SynthConfig other = small_config();
  other.seed = 2;
  CHECK_FALSE(generate_corpus(other).train[0].features == a.train[0].features);
}

TEST_CASE("lexicon, templates and speakers meet their invariants") {
  const SynthCorpus& c = default_corpus();
  std::set<std::vector<int>> spellings(c.lexicon.spellings.begin(), c.lexicon.spellings.end());
  CHECK(spellings.size() == 40);
  for (const auto& s : c.lexicon.spellings) {
    CHECK(s.size() >= 2);
    CHECK(s.size() <= 4);
    for (int p : s) CHECK((p >= 0 && p < 12));
  }
  for (std::size_t i = 0; i < c.templates.size(); ++i)
    for (std::size_t j = i + 1; j < c.templates.size(); ++j) {
      double d = 0;
      for (std::size_t k = 0; k < 40; ++k)
        d += std::pow(c.templates[i].mel_profile[k] - c.templates[j].mel_profile[k], 2);
      CHECK(std::sqrt(d) > c.config.template_margin);
    }
  for (const auto& s : c.speakers) {
    CHECK(s.tempo >= 0.8);
    CHECK(s.tempo <= 1.25);
    for (float g : s.gain) CHECK(g > 0.0f);
  }
  Rng rng(1);
  CHECK_THROWS_AS(make_lexicon(2, 3, 2, 2, rng), DataError);
  CHECK(make_lexicon(2, 2, 2, 2, rng).spellings.size() == 2);
}

TEST_CASE("every word appears at least ten times in the default training split") {
  std::map<std::string, int> counts;
  for (const auto& g : default_corpus().train)
    for (const auto& w : g.words) ++counts[w.label];
  CHECK(counts.size() == 40);
  for (const auto& [w, n] : counts) CHECK_MESSAGE(n >= 10, w, " appears ", n, " times");
}

TEST_CASE("image vectors of utterances with disjoint content words are uncorrelated") {
  const auto& c = default_corpus();
  const std::size_t fw = c.config.function_words;
  std::vector<std::set<int>> content;
  for (const auto& g : c.val) {
    std::set<int> s;
    for (const auto& w : g.words)
      if (std::size_t(word_index(w.label)) >= fw) s.insert(word_index(w.label));
    content.push_back(s);
  }
  double sum = 0, sq = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < c.val.size(); ++i)
    for (std::size_t j = i + 1; j < c.val.size(); ++j) {
      bool shared = false;
      for (int w : content[i]) shared = shared || content[j].count(w);
      if (shared) continue;
      double d = 0;
      for (std::size_t k = 0; k < c.val[i].image.size(); ++k) d += c.val[i].image[k] * c.val[j].image[k];
      sum += d, sq += d * d, ++n;
    }
  REQUIRE(n > 100);
  const double mean = sum / double(n), sd = std::sqrt(sq / double(n) - mean * mean);
  CHECK(std::abs(mean) <= 3 * sd / std::sqrt(double(n)));
}

TEST_CASE("noise-free rendering is repeatable") {
  SynthConfig cfg = small_config();
  cfg.speakers = 1;
  cfg.frame_noise = 0.0;
  const SynthCorpus c = generate_corpus(cfg);
  const auto& spk = c.speakers.at(0);
  Rng r1(3), r2(3);
  std::vector<TimedLabel> t1, t2;
  const auto a = render_phones(c, c.lexicon.spellings[5], spk, r1, &t1);
  const auto b = render_phones(c, c.lexicon.spellings[5], spk, r2, &t2);
  CHECK(a == b);
  CHECK(t1 == t2);
}

TEST_CASE("tiling checks and alignment conversion") {
  CHECK_NOTHROW(check_tiling(track({"a", "b"}), 8, "t"));
  CHECK_THROWS_AS(check_tiling(track({"a", "b"}), 9, "t"), DataError);
  auto gap = track({"a", "b"});
  gap[1].start = 5;
  CHECK_THROWS_AS(check_tiling(gap, 8, "t"), DataError);

  const SynthCorpus c = generate_corpus(small_config());
  const auto rows = alignment_rows(c.val);
  const auto phones = tracks_from_alignments(rows, "phone");
  const auto words = tracks_from_alignments(rows, "word");
  for (const auto& g : c.val) {
    CHECK(phones.at(g.id) == g.phones);
    CHECK(words.at(g.id) == g.words);
  }
}

TEST_CASE("corpus directory round trip") {
  const SynthCorpus c = generate_corpus(small_config());
  const auto dir = (std::filesystem::temp_directory_path() / "rdvq_corpus_test").string();
  std::filesystem::remove_all(dir);
  write_corpus_dir(dir, c);
  const CorpusSplits s = read_corpus_dir(dir);
  REQUIRE(s.train.size() == c.train.size());
  REQUIRE(s.val.size() == c.val.size());
  for (std::size_t i = 0; i < c.val.size(); ++i) {
    CHECK(s.val[i].id == c.val[i].id);
    CHECK(s.val[i].speaker == c.val[i].speaker);
    CHECK(s.val[i].features == c.val[i].features);
    CHECK(s.val[i].image == c.val[i].image);
    CHECK(s.val[i].phones == c.val[i].phones);
    CHECK(s.val[i].words == c.val[i].words);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("triples on a hand-built corpus match brute-force enumeration") {
  const std::vector<AnnotatedUtterance> utts{
      {"u1", "s1", track({"a", "b", "a"})},
      {"u2", "s1", track({"a", "c", "a"})},
      {"u3", "s2", track({"a", "b", "a", "c", "a"})},
  };
  for (SpeakerMode mode : {SpeakerMode::kAcross, SpeakerMode::kWithin}) {
    Rng rng(1);
    const auto e = enumerate_abx_triples(utts, 1000, mode, rng);
    CHECK(as_set(e.triples) == brute_triples(utts, mode));
    CHECK(e.total_valid == e.triples.size());
    for (const auto& t : e.triples) CHECK(validate_triple(utts, t, mode) == "");
  }
  Rng rng(1);
  const auto across = enumerate_abx_triples(utts, 1000, SpeakerMode::kAcross, rng);
  CHECK(as_set(across.triples).count("u1:0:12 u2:0:12 u3:0:12") == 1);
  CHECK(across.triples.size() == 4);
}

TEST_CASE("a single-phone corpus yields no triples") {
  const std::vector<AnnotatedUtterance> utts{{"u1", "s1", track({"a", "a", "a", "a"})},
                                             {"u2", "s2", track({"a", "a", "a"})}};
  Rng rng(1);
  const auto e = enumerate_abx_triples(utts, 100, SpeakerMode::kAcross, rng);
  CHECK(e.triples.empty());
  CHECK(e.total_valid == 0);
  CHECK(e.warnings >= 1);
}

TEST_CASE("the cap samples distinct triples and every triple validates") {
  const SynthCorpus c = generate_corpus(small_config());
  const auto ann = annotations(c.train);
  Rng r1(4), r2(4);
  const auto full = enumerate_abx_triples(ann, std::size_t(-1), SpeakerMode::kAcross, r1);
  REQUIRE(full.total_valid > 100);
  const auto capped = enumerate_abx_triples(ann, 100, SpeakerMode::kAcross, r2);
  CHECK(capped.triples.size() == 100);
  CHECK(capped.total_valid == full.total_valid);
  const auto s = as_set(capped.triples);
  CHECK(s.size() == 100);
  const auto all = as_set(full.triples);
  for (const auto& t : s) CHECK(all.count(t) == 1);
  for (const auto& t : capped.triples) CHECK(validate_triple(ann, t, SpeakerMode::kAcross) == "");

  TripleRecord bad = capped.triples[0];
  bad.x = bad.a;
  CHECK(validate_triple(ann, bad, SpeakerMode::kAcross) != "");
  bad = capped.triples[0];
  std::swap(bad.b, bad.x);
  CHECK(validate_triple(ann, bad, SpeakerMode::kAcross) != "");
  CHECK_THROWS_AS(parse_speaker_mode("both"), UsageError);
}
