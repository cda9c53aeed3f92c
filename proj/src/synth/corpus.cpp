#include "rdvq/synth/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>
#include <sstream>

namespace rdvq {

namespace {

constexpr double kFrameS = 0.01;

Rng derive_rng(uint64_t seed, const std::string& tag, uint64_t index = 0) {
  const std::string key = str_cat(tag, "/", seed, "/", index);
  return Rng(fnv1a64(key));
}

std::size_t uniform_size(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

double l2(const std::vector<float>& a, const std::vector<float>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += double(a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

std::vector<float> smooth_profile(std::size_t bins, Rng& rng) {
  std::uniform_real_distribution<double> center(1.5, bins - 2.5), width(1.5, 4.0), amp(1.5, 3.5);
  std::vector<float> p(bins, 0.0f);
  const std::size_t bumps = uniform_size(rng, 2, 3);
  for (std::size_t k = 0; k < bumps; ++k) {
    const double c = center(rng), w = width(rng), a = amp(rng);
    for (std::size_t b = 0; b < bins; ++b) p[b] += float(a * std::exp(-0.5 * std::pow((b - c) / w, 2)));
  }
  return p;
}

std::size_t spellable(std::size_t phones, std::size_t min_len, std::size_t max_len) {
  // Words never repeat a phone back to back: P (P-1)^(L-1) spellings of length L.
  double total = 0;
  for (std::size_t len = min_len; len <= max_len; ++len)
    total += double(phones) * std::pow(double(phones) - 1.0, double(len) - 1.0);
  return total > 1e15 ? std::size_t(1e15) : std::size_t(total);
}

}  // namespace

SynthConfig SynthConfig::from(const Config& cfg) {
  SynthConfig s;
  s.phones = cfg.get_int("synth", "phones");
  s.words = cfg.get_int("synth", "words");
  s.speakers = cfg.get_int("synth", "speakers");
  s.train_utts = cfg.get_int("synth", "train_utts");
  s.val_utts = cfg.get_int("synth", "val_utts");
  s.bins = cfg.get_int("model", "input_bins");
  s.image_dim = cfg.get_int("synth", "image_dim");
  s.min_words = cfg.get_int("synth", "min_words");
  s.max_words = cfg.get_int("synth", "max_words");
  s.min_phone_frames = cfg.get_int("synth", "min_phone_frames");
  s.max_phone_frames = cfg.get_int("synth", "max_phone_frames");
  s.zipf = cfg.get_double("synth", "zipf");
  s.function_words = cfg.get_int("synth", "function_words");
  s.frame_noise = cfg.get_double("synth", "frame_noise");
  s.image_noise = cfg.get_double("synth", "image_noise");
  s.template_margin = cfg.get_double("synth", "template_margin");
  s.seed = static_cast<uint64_t>(cfg.get_int("synth", "seed"));
  return s;
}

std::string ToyLexicon::phone_name(int p) const { return str_cat("p", p); }

std::string ToyLexicon::word_name(int w) const {
  std::string name = "w";
  for (int p : spellings.at(w)) name += char('a' + p % 26);
  return str_cat(name, w);
}

ToyLexicon make_lexicon(std::size_t phones, std::size_t words, std::size_t min_len,
                        std::size_t max_len, Rng& rng) {
  if (phones < 2) throw DataError("lexicon needs at least two phones");
  if (min_len < 1 || max_len < min_len) throw DataError("bad word length range");
  if (words > spellable(phones, min_len, max_len))
    throw DataError(str_cat(words, " words cannot be spelled uniquely with ", phones, " phones"));
  ToyLexicon lex;
  lex.num_phones = phones;
  std::set<std::vector<int>> seen;
  while (lex.spellings.size() < words) {
    std::vector<int> w(uniform_size(rng, min_len, max_len));
    for (std::size_t i = 0; i < w.size(); ++i) {
      do {
        w[i] = int(uniform_size(rng, 0, phones - 1));
      } while (i > 0 && w[i] == w[i - 1]);
    }
    if (seen.insert(w).second) lex.spellings.push_back(std::move(w));
  }
  return lex;
}

Tensor<float> render_phones(const SynthCorpus& corpus, const std::vector<int>& phones,
                            const SpeakerProfile& speaker, Rng& rng,
                            std::vector<TimedLabel>* phone_track) {
  const std::size_t bins = corpus.config.bins;
  std::vector<std::size_t> durations;
  for (int p : phones) {
    const auto& t = corpus.templates.at(p);
    // Noise-free speakers render the range midpoint so repeated words are identical.
    double frames = 0.5 * double(t.min_frames + t.max_frames);
    if (speaker.noise > 0) frames = double(uniform_size(rng, t.min_frames, t.max_frames));
    const long d = std::lround(frames * speaker.tempo);
    durations.push_back(std::size_t(std::max(1L, d)));
  }
  const std::size_t total = std::accumulate(durations.begin(), durations.end(), std::size_t{0});
  Tensor<float> out({total, bins});
  std::normal_distribution<double> noise(0.0, 1.0);
  std::size_t f = 0;
  for (std::size_t k = 0; k < phones.size(); ++k) {
    const auto& prof = corpus.templates[phones[k]].mel_profile;
    if (phone_track) phone_track->push_back({f, f + durations[k], corpus.lexicon.phone_name(phones[k])});
    for (std::size_t j = 0; j < durations[k]; ++j, ++f)
      for (std::size_t b = 0; b < bins; ++b) {
        double v = prof[b] + std::log(double(speaker.gain[b]));
        if (speaker.noise > 0) v += speaker.noise * noise(rng);
        out(f, b) = float(v);
      }
  }
  return out;
}

Tensor<float> noise_features(std::size_t frames, std::size_t bins, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> shape(bins);
  const double tilt = 0.5 * n(rng), wobble = 0.5 * n(rng), phase = 3.0 * n(rng);
  for (std::size_t b = 0; b < bins; ++b)
    shape[b] = 1.0 + tilt * (double(b) / bins - 0.5) + wobble * std::sin(phase + 6.0 * b / bins);
  Tensor<float> out({frames, bins});
  double level = 0.0;
  for (std::size_t f = 0; f < frames; ++f) {
    level = 0.9 * level + 0.3 * n(rng);
    for (std::size_t b = 0; b < bins; ++b) out(f, b) = float(shape[b] + level + 0.3 * n(rng));
  }
  return out;
}

void check_tiling(const std::vector<TimedLabel>& track, std::size_t frames, const std::string& what) {
  std::size_t at = 0;
  for (const auto& l : track) {
    if (l.start != at) throw DataError(str_cat(what, ": gap or overlap at frame ", at));
    if (l.end <= l.start) throw DataError(str_cat(what, ": empty interval at frame ", at));
    at = l.end;
  }
  if (at != frames) throw DataError(str_cat(what, ": track ends at ", at, " of ", frames, " frames"));
}

SynthCorpus generate_corpus(const SynthConfig& cfg) {
  if (cfg.phones == 0 || cfg.words == 0 || cfg.speakers == 0 || cfg.train_utts + cfg.val_utts == 0)
    throw DataError("synthetic corpus needs phones, words, speakers and utterances > 0");
  if (cfg.min_words < 1 || cfg.max_words < cfg.min_words) throw DataError("bad words-per-utterance range");
  if (cfg.min_phone_frames < 1 || cfg.max_phone_frames < cfg.min_phone_frames)
    throw DataError("bad phone duration range");
  SynthCorpus c;
  c.config = cfg;

  Rng lex_rng = derive_rng(cfg.seed, "lexicon");
  c.lexicon = make_lexicon(cfg.phones, cfg.words, cfg.min_word_phones, cfg.max_word_phones, lex_rng);

  Rng tpl_rng = derive_rng(cfg.seed, "templates");
  for (std::size_t p = 0; p < cfg.phones; ++p) {
    for (int attempt = 0;; ++attempt) {
      if (attempt > 10000)
        throw DataError(str_cat("cannot place ", cfg.phones, " phone templates with margin ",
                                cfg.template_margin));
      auto prof = smooth_profile(cfg.bins, tpl_rng);
      bool ok = true;
      for (const auto& t : c.templates) ok = ok && l2(t.mel_profile, prof) >= cfg.template_margin;
      if (ok) {
        c.templates.push_back({std::move(prof), cfg.min_phone_frames, cfg.max_phone_frames});
        break;
      }
    }
  }

  Rng spk_rng = derive_rng(cfg.seed, "speakers");
  std::uniform_real_distribution<double> u(-1.0, 1.0), tempo(0.8, 1.25), noise_scale(0.8, 1.2);
  for (std::size_t s = 0; s < cfg.speakers; ++s) {
    SpeakerProfile sp;
    char id[16];
    std::snprintf(id, sizeof id, "s%02zu", s);
    sp.id = id;
    const double a0 = 0.5 * u(spk_rng), a1 = 0.3 * u(spk_rng), a2 = 0.2 * u(spk_rng);
    sp.gain.resize(cfg.bins);
    for (std::size_t b = 0; b < cfg.bins; ++b) {
      const double x = M_PI * (b + 0.5) / cfg.bins;
      sp.gain[b] = float(std::exp(a0 + a1 * std::cos(x) + a2 * std::cos(2 * x)));
    }
    sp.tempo = cfg.speakers == 1 ? 1.0 : tempo(spk_rng);
    sp.noise = cfg.frame_noise * noise_scale(spk_rng);
    c.speakers.push_back(std::move(sp));
  }

  Rng obj_rng = derive_rng(cfg.seed, "objects");
  std::normal_distribution<double> gauss(0.0, 1.0);
  c.objects.resize(cfg.words);
  for (std::size_t w = cfg.function_words; w < cfg.words; ++w) {
    c.objects[w].resize(cfg.image_dim);
    for (auto& v : c.objects[w]) v = float(gauss(obj_rng) / std::sqrt(double(cfg.image_dim)));
  }

  c.word_probs.resize(cfg.words);
  for (std::size_t w = 0; w < cfg.words; ++w) c.word_probs[w] = 1.0 / std::pow(double(w + 1), cfg.zipf);
  const double z = std::accumulate(c.word_probs.begin(), c.word_probs.end(), 0.0);
  for (auto& p : c.word_probs) p /= z;

  auto make_utt = [&](const std::string& split, std::size_t index) {
    Rng rng = derive_rng(cfg.seed, split, index);
    std::discrete_distribution<int> pick_word(c.word_probs.begin(), c.word_probs.end());
    GroundedPair g;
    const auto& spk = c.speakers[uniform_size(rng, 0, cfg.speakers - 1)];
    char id[32];
    std::snprintf(id, sizeof id, "%s%04zu", split.c_str(), index);
    g.id = id;
    g.speaker = spk.id;
    const std::size_t n = uniform_size(rng, cfg.min_words, cfg.max_words);
    std::vector<int> words(n), phones;
    std::vector<std::size_t> word_end_phone;
    for (auto& w : words) {
      w = pick_word(rng);
      for (int p : c.lexicon.spellings[w]) phones.push_back(p);
      word_end_phone.push_back(phones.size());
    }
    g.features = render_phones(c, phones, spk, rng, &g.phones);
    std::size_t first = 0;
    for (std::size_t k = 0; k < n; ++k) {
      g.words.push_back({g.phones[first].start, g.phones[word_end_phone[k] - 1].end,
                         c.lexicon.word_name(words[k])});
      first = word_end_phone[k];
    }
    check_tiling(g.phones, g.num_frames(), g.id + " phones");
    check_tiling(g.words, g.num_frames(), g.id + " words");

    g.image.assign(cfg.image_dim, 0.0f);
    std::set<int> distinct(words.begin(), words.end());
    for (int w : distinct)
      if (!c.objects[w].empty())
        for (std::size_t d = 0; d < cfg.image_dim; ++d) g.image[d] += c.objects[w][d];
    for (auto& v : g.image) v += float(cfg.image_noise * gauss(rng));
    return g;
  };

  for (std::size_t i = 0; i < cfg.train_utts; ++i) c.train.push_back(make_utt("tr", i));
  for (std::size_t i = 0; i < cfg.val_utts; ++i) c.val.push_back(make_utt("va", i));
  return c;
}

std::vector<AlignmentInterval> alignment_rows(const std::vector<GroundedPair>& utts) {
  std::vector<AlignmentInterval> rows;
  for (const auto& g : utts) {
    for (const auto& w : g.words) rows.push_back({g.id, w.start * kFrameS, w.end * kFrameS, "word", w.label});
    for (const auto& p : g.phones)
      rows.push_back({g.id, p.start * kFrameS, p.end * kFrameS, "phone", p.label});
  }
  return rows;
}

std::map<std::string, std::vector<TimedLabel>> tracks_from_alignments(
    const std::vector<AlignmentInterval>& rows, const std::string& tier) {
  std::map<std::string, std::vector<TimedLabel>> out;
  for (const auto& r : rows) {
    if (r.tier != tier) continue;
    out[r.utt_id].push_back({std::size_t(std::llround(r.start_s / kFrameS)),
                             std::size_t(std::llround(r.end_s / kFrameS)), r.label});
  }
  for (auto& [id, track] : out)
    std::sort(track.begin(), track.end(), [](const TimedLabel& a, const TimedLabel& b) { return a.start < b.start; });
  return out;
}

void write_corpus_dir(const std::string& dir, const SynthCorpus& corpus) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "feats");
  std::vector<std::pair<std::string, std::vector<float>>> images;
  std::string speakers, train_list, val_list;
  for (const auto* split : {&corpus.train, &corpus.val})
    for (const auto& g : *split) {
      write_features((fs::path(dir) / "feats" / (g.id + ".vqgf")).string(), g.features);
      images.emplace_back(g.id, g.image);
      speakers += g.id + '\t' + g.speaker + '\n';
      (split == &corpus.train ? train_list : val_list) += g.id + '\n';
    }
  std::vector<GroundedPair> all = corpus.train;
  all.insert(all.end(), corpus.val.begin(), corpus.val.end());
  write_file_atomic((fs::path(dir) / "images.tsv").string(), format_image_features(images));
  write_alignments((fs::path(dir) / "align.tsv").string(), alignment_rows(all));
  write_file_atomic((fs::path(dir) / "speakers.tsv").string(), speakers);
  write_file_atomic((fs::path(dir) / "train.list").string(), train_list);
  write_file_atomic((fs::path(dir) / "val.list").string(), val_list);
}

CorpusSplits read_corpus_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  const auto images_vec = parse_image_features(read_file((root / "images.tsv").string()),
                                               (root / "images.tsv").string());
  std::map<std::string, std::vector<float>> images(images_vec.begin(), images_vec.end());
  std::map<std::string, std::string> speakers;
  {
    std::istringstream in(read_file((root / "speakers.tsv").string()));
    std::string line;
    while (std::getline(in, line)) {
      const auto tab = line.find('\t');
      if (tab != std::string::npos) speakers[line.substr(0, tab)] = line.substr(tab + 1);
    }
  }
  const auto rows = read_alignments((root / "align.tsv").string());
  auto words = tracks_from_alignments(rows, "word");
  auto phones = tracks_from_alignments(rows, "phone");

  auto load_split = [&](const std::string& list) {
    std::vector<GroundedPair> out;
    std::istringstream in(read_file((root / list).string()));
    std::string id;
    while (std::getline(in, id)) {
      if (id.empty()) continue;
      GroundedPair g;
      g.id = id;
      g.features = read_features((root / "feats" / (id + ".vqgf")).string());
      auto it = images.find(id);
      if (it == images.end()) throw DataError(str_cat((root / "images.tsv").string(), ": no image for ", id));
      g.image = it->second;
      g.speaker = speakers.count(id) ? speakers[id] : "";
      g.words = words[id];
      g.phones = phones[id];
      out.push_back(std::move(g));
    }
    return out;
  };
  return {load_split("train.list"), load_split("val.list")};
}

}  // namespace rdvq
