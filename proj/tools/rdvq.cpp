// rdvq: command-line front end. Exit codes: 0 success, 1 usage error,
// 2 data error.

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "rdvq/frontend/logmel.hpp"
#include "rdvq/pipeline/pipeline.hpp"
#include "rdvq/trainer/trainer.hpp"
#include "rdvq/unitstats/stats.hpp"

namespace fs = std::filesystem;
using namespace rdvq;

namespace {

struct Common {
  std::string config_path;
  long seed = -1;
  std::size_t threads = 0;
  int verbose = 1;
};

Config load_config(const Common& c, const std::vector<std::string>& seed_keys) {
  Config cfg = c.config_path.empty() ? Config() : Config::load(c.config_path);
  const int env = cfg.apply_env();
  if (c.seed >= 0)
    for (const auto& section : seed_keys) cfg.set(section, "seed", std::to_string(c.seed));
  if (c.threads > 0) cfg.set("eval", "threads", std::to_string(c.threads));
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(cfg.hash()));
  log_info(str_cat("config hash ", hash, env ? str_cat(" (", env, " environment overrides)") : ""));
  if (log_verbosity() > 1) std::cerr << cfg.canonical();
  return cfg;
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config_path, "Configuration file");
  sub->add_option("--seed", c.seed, "Random seed (overrides the config)");
  sub->add_option("--threads", c.threads, "Evaluator threads");
  sub->add_option("-v,--verbose", c.verbose, "0 quiet, 1 progress, 2 also prints the resolved config");
}

// A corpus directory, a directory of .vqgf files, or a single .vqgf file.
std::vector<GroundedPair> read_inputs(const std::string& path, const std::string& split) {
  if (fs::is_directory(path) && fs::exists(fs::path(path) / "train.list")) {
    CorpusSplits s = read_corpus_dir(path);
    if (split == "train") return std::move(s.train);
    if (split == "val") return std::move(s.val);
    if (split != "all") throw UsageError("--split must be train, val or all");
    s.train.insert(s.train.end(), s.val.begin(), s.val.end());
    return std::move(s.train);
  }
  std::vector<fs::path> files;
  if (fs::is_directory(path)) {
    for (const auto& e : fs::directory_iterator(path))
      if (e.path().extension() == ".vqgf") files.push_back(e.path());
    std::sort(files.begin(), files.end());
  } else if (fs::exists(path)) {
    files.push_back(path);
  } else {
    throw DataError(path + ": no such file or directory");
  }
  std::vector<GroundedPair> out;
  for (const auto& f : files) {
    GroundedPair g;
    g.id = f.stem().string();
    g.features = read_features(f.string());
    out.push_back(std::move(g));
  }
  if (out.empty()) throw DataError(path + ": no feature files");
  return out;
}

std::size_t num_units_of(const std::vector<UnitSequence>& units) {
  int top = -1;
  for (const auto& u : units)
    for (int c : u.codes) {
      if (c < 0) throw DataError("units for " + u.utt_id + " contain a negative code");
      top = std::max(top, c);
    }
  return std::size_t(top + 1);
}

double unit_rate(double given, const std::string& layer) {
  if (given > 0) return given;
  if (!layer.empty()) {
    if (!vq_layer_of(layer)) throw UsageError("--layer must be vq2 or vq3");
    return tap_frame_rate(AudioBranchConfig{}, layer);
  }
  log_warn("no --rate given, assuming 50 Hz (vq2) units");
  return 50.0;
}

std::string fmt(double v, const char* f = "%.4f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

int cmd_synth(const Common& c, const std::string& out, std::size_t max_triples) {
  Config cfg = load_config(c, {"synth"});
  const SynthCorpus corpus = generate_corpus(SynthConfig::from(cfg));
  write_corpus_dir(out, corpus);
  if (max_triples == 0) max_triples = std::size_t(cfg.get_int("eval", "max_triples"));
  const SpeakerMode mode = parse_speaker_mode(cfg.get("eval", "speaker_mode"));
  const AbxEnumeration en = make_triples(corpus.val, max_triples, mode, corpus.config.seed);
  write_triples((fs::path(out) / "triples.txt").string(), en.triples);
  std::cout << "train " << corpus.train.size() << " val " << corpus.val.size() << " triples "
            << en.triples.size() << " of " << en.total_valid << "\n";
  return 0;
}

int cmd_featurize(const Common& c, const std::string& in, const std::string& out, bool normalize) {
  load_config(c, {});
  LogMelOptions opt;
  opt.normalize = normalize;
  std::vector<std::pair<fs::path, fs::path>> jobs;
  if (fs::is_directory(in)) {
    fs::create_directories(out);
    for (const auto& e : fs::directory_iterator(in))
      if (e.path().extension() == ".wav")
        jobs.emplace_back(e.path(), fs::path(out) / e.path().stem().concat(".vqgf"));
    std::sort(jobs.begin(), jobs.end());
  } else {
    jobs.emplace_back(in, out);
  }
  if (jobs.empty()) throw DataError(in + ": no .wav files");
  for (const auto& [src, dst] : jobs) write_features(dst.string(), logmel(read_wav(src.string()), opt).frames);
  std::cout << "featurized " << jobs.size() << " file(s)\n";
  return 0;
}

int cmd_train(const Common& c, const std::string& curriculum, const std::string& data, const std::string& out,
              const std::string& init_path) {
  Config cfg = load_config(c, {"train"});
  const auto stages = parse_curriculum(curriculum);
  const TrainConfig tc = TrainConfig::from(cfg);
  CorpusSplits splits = read_corpus_dir(data);
  fs::create_directories(out);
  write_file_atomic((fs::path(out) / "config.txt").string(), cfg.canonical());
  ModelState init = init_path.empty()
                        ? build_model(AudioBranchConfig::from(cfg), QuantizerConfig::from(cfg), tc.seed, cfg.hash())
                        : load_checkpoint(init_path);
  log_info(str_cat("curriculum ", canonical_curriculum(stages), ", ", init.parameter_count(), " parameters"));
  const TrainData td = make_train_data(splits.train, splits.val);
  const CurriculumResult r = run_curriculum(stages, init, td, tc, out);
  for (const auto& s : r.stages)
    std::cout << s.meta.stage << " best epoch " << s.meta.epoch << " R@" << tc.recall_n << " a2i "
              << fmt(s.meta.r10_a2i) << " i2a " << fmt(s.meta.r10_i2a) << " avg " << fmt(s.meta.r10_avg) << "\n";
  return 0;
}

int cmd_encode(const Common& c, const std::string& ckpt, const std::string& layer, const std::string& in,
               const std::string& split, const std::string& out) {
  load_config(c, {});
  ModelState st = load_checkpoint(ckpt);
  const auto utts = read_inputs(in, split);
  const auto named = named_features(utts);
  const double rate = tap_frame_rate(st.config, layer);
  if (const int l = vq_layer_of(layer)) {
    write_units(out, encode_units(st, named, l));
  } else {
    fs::create_directories(out);
    const FeatureSet set = encode_features(st, named, layer);
    for (const auto& [id, f] : set.utts) write_features((fs::path(out) / (id + ".vqgf")).string(), f);
  }
  std::cout << "encoded " << utts.size() << " utterance(s) at " << rate << " Hz\n";
  return 0;
}

struct AbxArgs {
  std::string units, features, triples, mode = "frame", ckpt, layer, metric, aggregation;
  double rate = 0;
  bool one_hot = false;
};

int cmd_abx(const Common& c, const AbxArgs& a) {
  Config cfg = load_config(c, {});
  if (a.units.empty() == a.features.empty()) throw UsageError("give exactly one of --units and --features");
  if (a.mode != "frame" && a.mode != "segment" && a.mode != "all")
    throw UsageError("--mode must be frame, segment or all");
  AbxOptions opt;
  opt.metric = parse_frame_metric(a.metric.empty() ? cfg.get("eval", "metric") : a.metric);
  opt.aggregation = parse_aggregation(a.aggregation.empty() ? cfg.get("eval", "aggregation") : a.aggregation);
  opt.threads = std::size_t(cfg.get_int("eval", "threads"));
  const auto triples = read_triples(a.triples);
  std::cout << "mode,abx,bitrate,triples_used,skipped\n";
  if (!a.features.empty()) {
    FeatureSet set;
    set.frame_rate = a.rate > 0 ? a.rate : kInputFrameRate;
    for (auto& g : read_inputs(a.features, "all")) set.utts[g.id] = std::move(g.features);
    const AbxResult r = abx_error(triples, feature_extractor(set), opt);
    std::cout << "features," << fmt(r.error) << ",," << r.triples_used << "," << r.skipped << "\n";
    return 0;
  }
  double rate = a.rate;
  if (!(rate > 0) && !a.ckpt.empty() && vq_layer_of(a.layer)) rate = tap_frame_rate(load_checkpoint(a.ckpt).config, a.layer);
  rate = unit_rate(rate, a.layer);
  const auto units = read_units(a.units);
  Tensor<float> table;
  std::size_t k = num_units_of(units);
  const bool one_hot = a.one_hot || a.ckpt.empty() || cfg.get("eval", "unit_embedding") == "onehot";
  if (!a.ckpt.empty() && !one_hot) {
    const int l = vq_layer_of(a.layer);
    if (!l) throw UsageError("--layer must be vq2 or vq3 with --ckpt");
    const ModelState st = load_checkpoint(a.ckpt);
    table = st.codebook(l).E;
    if (k > table.dim(0)) throw DataError("units exceed the codebook size of " + a.ckpt);
    k = table.dim(0);
  }
  UnitAbxOptions uo;
  uo.abx = opt;
  uo.frame_rate = rate;
  uo.one_hot = one_hot;
  const bool seg = a.mode != "frame";
  const UnitReport r = evaluate_units(units, table, k, triples, uo, seg);
  auto row = [&](const char* name, double abx, double br) {
    std::cout << name << "," << fmt(abx) << "," << fmt(br, "%.2f") << "," << r.triples_used << "," << r.skipped
              << "\n";
  };
  if (a.mode != "segment") {
    row("frame", r.abx, r.bitrate);
    std::vector<UnitSequence> rle = units;
    for (auto& u : rle) u.codes = rle_decode(rle_encode(u.codes));
    const UnitReport rr = evaluate_units(rle, table, k, triples, uo, false);
    row("rle", rr.abx, r.rle_bitrate);
  }
  if (seg) row("segment", r.segment_abx, r.segment_bitrate);
  return 0;
}

int cmd_bitrate(const Common& c, const std::string& units_path, double rate) {
  load_config(c, {});
  const auto units = read_units(units_path);
  std::vector<std::vector<int>> corpus;
  for (const auto& u : units) corpus.push_back(u.codes);
  const BitrateReport r = all_bitrates(corpus, total_duration_s(units, rate));
  std::cout << "mode,bitrate,symbols\n"
            << "frame," << fmt(r.frame, "%.4f") << "," << r.frames << "\n"
            << "rle," << fmt(r.rle, "%.4f") << "," << r.runs << "\n"
            << "segment," << fmt(r.segment, "%.4f") << "," << r.runs << "\n";
  return 0;
}

int cmd_analyze(const Common& c, const std::string& units_path, double rate, const std::string& align_path,
                const std::string& out, const std::string& match, const std::vector<std::string>& tracks) {
  Config cfg = load_config(c, {});
  const UnitMap units = to_unit_map(read_units(units_path));
  const auto rows = read_alignments(align_path);
  fs::create_directories(out);
  auto path = [&](const std::string& name) { return (fs::path(out) / name).string(); };
  for (const std::string tier : {"phone", "word"}) {
    const TrackMap t = tracks_from_alignments(rows, tier);
    if (t.empty()) continue;
    const ContingencyTable table = cooccurrence(units, rate, t);
    write_file_atomic(path("conditional_" + tier + ".tsv"), format_conditional_matrix(table, conditional_matrix(table)));
    std::cout << "nmi_" << tier << "," << fmt(nmi(table.counts), "%.6f") << "\n";
  }
  const TrackMap words = tracks_from_alignments(rows, "word");
  if (!words.empty()) {
    const auto det = word_detector_stats(units, rate, words,
                                         parse_word_match(match.empty() ? cfg.get("eval", "word_match") : match));
    const auto ranked = rank_codes(det);
    write_file_atomic(path("detectors.csv"), format_detector_report(ranked));
    std::vector<double> taus;
    for (int i = 0; i <= 20; ++i) taus.push_back(i * 0.05);
    write_file_atomic(path("f1_curve.tsv"), format_threshold_curve(det, taus));
    std::cout << "codes_f1_above_0.5," << f1_threshold_count(det, 0.5) << "\n";
  }
  for (const auto& utt : tracks) {
    const auto it = units.find(utt);
    if (it == units.end()) throw DataError("no units for utterance " + utt);
    fs::create_directories(fs::path(out) / "tracks");
    write_file_atomic(path("tracks/" + utt + ".tsv"), format_unit_track(utt, it->second, rate));
  }
  return 0;
}

int cmd_retrieval(const Common& c, const std::string& ckpt, const std::string& data, const std::string& split,
                  std::size_t n) {
  load_config(c, {});
  ModelState st = load_checkpoint(ckpt);
  const auto utts = read_inputs(data, split);
  std::vector<const GroundedPair*> ptrs;
  for (const auto& g : utts) {
    if (g.image.empty()) throw DataError(data + ": utterance " + g.id + " has no image features");
    ptrs.push_back(&g);
  }
  const Recall r = evaluate_recall(st, ptrs, n);
  std::cout << "direction,R@" << n << "\n"
            << "audio_to_image," << fmt(r.audio_to_image) << "\nimage_to_audio," << fmt(r.image_to_audio)
            << "\naverage," << fmt(r.average) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Visually grounded speech with vector-quantized layers, and unit evaluation"};
  app.require_subcommand(1);
  Common common;

  std::string out, in, data, curriculum, ckpt, layer, split = "val", init, units, align, match;
  std::size_t max_triples = 0, n = 10;
  bool normalize = false;
  double rate = 0;
  std::vector<std::string> tracks;
  AbxArgs abx;

  auto* synth = app.add_subcommand("synth", "Generate the synthetic grounded corpus and ABX triples");
  add_common(synth, common);
  synth->add_option("--out", out, "Output corpus directory")->required();
  synth->add_option("--max-triples", max_triples, "Cap on validation triples (default eval.max_triples)");

  auto* feat = app.add_subcommand("featurize", "Compute log-Mel features from 16-bit mono WAV");
  add_common(feat, common);
  feat->add_option("--in", in, "WAV file or directory")->required();
  feat->add_option("--out", out, "Feature file or directory")->required();
  feat->add_flag("--normalize", normalize, "Per-utterance mean/variance normalization");

  auto* train = app.add_subcommand("train", "Train through a curriculum such as \"∅->{3}->{2,3}\"");
  add_common(train, common);
  train->add_option("--curriculum", curriculum, "Stage chain")->required();
  train->add_option("--data", data, "Corpus directory")->required();
  train->add_option("--out", out, "Checkpoint directory")->required();
  train->add_option("--init", init, "Start from this checkpoint");

  auto* enc = app.add_subcommand("encode", "Emit codes (vq2, vq3) or activations of a layer");
  add_common(enc, common);
  enc->add_option("--ckpt", ckpt, "Checkpoint")->required();
  enc->add_option("--layer", layer, "conv1, res1, res2, vq2, res3, vq3 or res4")->required();
  enc->add_option("--in", in, "Corpus directory, feature directory or feature file")->required();
  enc->add_option("--split", split, "Corpus split: train, val or all");
  enc->add_option("--out", out, "Units file (VQ layers) or feature directory")->required();

  auto* abxc = app.add_subcommand("abx", "ABX error with bitrate columns");
  add_common(abxc, common);
  abxc->add_option("--units", abx.units, "Units file");
  abxc->add_option("--features", abx.features, "Feature directory or corpus directory");
  abxc->add_option("--triples", abx.triples, "Triples file")->required();
  abxc->add_option("--mode", abx.mode, "frame, segment or all");
  abxc->add_option("--rate", abx.rate, "Frames per second of the units (default: rate of --layer, else 50) or features");
  abxc->add_option("--ckpt", abx.ckpt, "Checkpoint whose codebook embeds the units");
  abxc->add_option("--layer", abx.layer, "vq2 or vq3, with --ckpt");
  abxc->add_flag("--one-hot", abx.one_hot, "Embed units as one-hot vectors");
  abxc->add_option("--metric", abx.metric, "cosine or euclidean");
  abxc->add_option("--aggregation", abx.aggregation, "cell or flat");

  auto* br = app.add_subcommand("bitrate", "Frame, RLE and segment bitrates of a units file");
  add_common(br, common);
  br->add_option("--units", units, "Units file")->required();
  br->add_option("--rate", rate, "Unit frames per second (default 50)");

  auto* an = app.add_subcommand("analyze", "Conditional matrices, NMI, word detectors and unit tracks");
  add_common(an, common);
  an->add_option("--units", units, "Units file")->required();
  an->add_option("--rate", rate, "Unit frames per second (default 50)");
  an->add_option("--align", align, "Alignment TSV")->required();
  an->add_option("--out", out, "Report directory")->required();
  an->add_option("--word-match", match, "midpoint or overlap");
  an->add_option("--track", tracks, "Write the unit track of this utterance");

  auto* ret = app.add_subcommand("retrieval", "Image/speech retrieval recall");
  add_common(ret, common);
  ret->add_option("--ckpt", ckpt, "Checkpoint")->required();
  ret->add_option("--data", data, "Corpus directory")->required();
  ret->add_option("--split", split, "train, val or all");
  ret->add_option("--n", n, "Recall cutoff");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  set_log_verbosity(common.verbose);
  try {
    if (*synth) return cmd_synth(common, out, max_triples);
    if (*feat) return cmd_featurize(common, in, out, normalize);
    if (*train) return cmd_train(common, curriculum, data, out, init);
    if (*enc) return cmd_encode(common, ckpt, layer, in, split, out);
    if (*abxc) return cmd_abx(common, abx);
    if (*br) return cmd_bitrate(common, units, unit_rate(rate, ""));
    if (*an) return cmd_analyze(common, units, unit_rate(rate, ""), align, out, match, tracks);
    if (*ret) return cmd_retrieval(common, ckpt, data, split, n);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
