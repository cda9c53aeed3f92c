#include "rdvq/trainer/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>

#include "rdvq/objective/triplet.hpp"

namespace rdvq {

TrainConfig TrainConfig::from(const Config& cfg) {
  TrainConfig t;
  t.lr = cfg.get_double("train", "lr");
  t.lr_decay = cfg.get_double("train", "lr_decay");
  t.decay_every = cfg.get_int("train", "decay_every");
  t.batch_size = cfg.get_int("train", "batch_size");
  t.epochs = cfg.get_int("train", "epochs");
  t.seed = static_cast<uint64_t>(cfg.get_int("train", "seed"));
  t.adam.beta1 = cfg.get_double("train", "adam_beta1");
  t.adam.beta2 = cfg.get_double("train", "adam_beta2");
  t.adam.eps = cfg.get_double("train", "adam_eps");
  t.recall_n = cfg.get_int("train", "recall_n");
  t.validate();
  return t;
}

void TrainConfig::validate() const {
  if (!(lr > 0)) throw DataError("train.lr must be positive");
  if (batch_size < 2) throw DataError("train.batch_size must be at least 2");
  if (decay_every == 0) throw DataError("train.decay_every must be positive");
  if (recall_n == 0) throw DataError("train.recall_n must be positive");
}

double learning_rate(const TrainConfig& cfg, std::size_t epoch) {
  return cfg.lr * std::pow(cfg.lr_decay, double(epoch / cfg.decay_every));
}

TrainData make_train_data(const std::vector<GroundedPair>& train, const std::vector<GroundedPair>& val) {
  TrainData d;
  for (const auto& g : train) d.train.push_back(&g);
  for (const auto& g : val) d.val.push_back(&g);
  return d;
}

std::string format_log_csv(const std::vector<EpochLog>& rows) {
  std::string out = "stage,epoch,L_s,L_h,total,r10_a2i,r10_i2a,r10_avg,lr,ppl_vq2,ppl_vq3\n";
  for (const auto& r : rows) {
    char buf[512];
    std::snprintf(buf, sizeof buf, "\"%s\",%zu,%.6f,%.6f,%.6f,%.4f,%.4f,%.4f,%.6g,%.3f,%.3f\n", r.stage.c_str(),
                  r.epoch, r.loss_s, r.loss_h, r.loss_total, r.recall.audio_to_image, r.recall.image_to_audio,
                  r.recall.average, r.lr, r.ppl_vq2, r.ppl_vq3);
    out += buf;
  }
  return out;
}

Recall evaluate_recall(ModelState& state, const std::vector<const GroundedPair*>& val, std::size_t n) {
  std::vector<const Tensor<float>*> specs;
  std::vector<const std::vector<float>*> images;
  for (const auto* g : val) {
    specs.push_back(&g->features);
    images.push_back(&g->image);
  }
  const Tensor<float> a = embed_audio_batch(specs, state);
  const Tensor<float> i = embed_image_batch(images, state);
  return recall_at_n(similarity_matrix(i, a), std::min(n, val.size()));
}

namespace {

std::vector<Parameter<float>*> param_list(ModelState& st) {
  std::vector<Parameter<float>*> out;
  for (auto& [name, p] : st.params) out.push_back(&p);
  return out;
}

}  // namespace

StageResult run_stage(ModelState init, const std::set<int>& layers, std::size_t epochs,
                      const TrainData& data, const TrainConfig& cfg, const std::string& name,
                      const EpochCallback& on_epoch) {
  cfg.validate();
  if (data.train.size() < 2) throw DataError("training needs at least two utterances");
  if (data.val.empty()) throw DataError("training needs a validation split");
  ModelState st = std::move(init);
  enable_layers(st, layers);
  Rng rng(fnv1a64(str_cat("train/", cfg.seed, "/", name)));

  StageResult res;
  auto record = [&](EpochLog row) {
    res.log.push_back(row);
    if (on_epoch) on_epoch(row);
  };

  EpochLog row0;
  row0.stage = name;
  row0.recall = evaluate_recall(st, data.val, cfg.recall_n);
  row0.lr = learning_rate(cfg, 0);
  record(row0);
  res.best = st;
  res.meta = {name, 0, row0.recall.audio_to_image, row0.recall.image_to_audio, row0.recall.average};
  double best_avg = -1;

  AdamState<float> adam;
  auto params = param_list(st);
  std::vector<std::size_t> order(data.train.size());
  std::size_t batch_id = 0;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = learning_rate(cfg, epoch);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::array<std::vector<std::size_t>, 2> hist;
    for (int l : kVqLayers) hist[l - 2].assign(st.codebook(l).size(), 0);
    double sum_s = 0, sum_h = 0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start + 2 <= order.size(); start += cfg.batch_size, ++batch_id) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      if (end - start < 2) break;
      std::vector<const Tensor<float>*> specs;
      Tensor<float> feats({st.config.image_dim, end - start});
      for (std::size_t j = start; j < end; ++j) {
        const GroundedPair* g = data.train[order[j]];
        specs.push_back(&g->features);
        if (g->image.size() != st.config.image_dim)
          throw DataError(str_cat(g->id, ": image feature has dimension ", g->image.size()));
        for (std::size_t d = 0; d < st.config.image_dim; ++d) feats(d, j - start) = g->image[d];
      }
      Graph<float> graph;
      ForwardOptions opt;
      opt.mode = Mode::kTrain;
      opt.rng = &rng;
      AudioForward f = audio_forward(graph, st, specs, opt);
      Var<float> img = image_forward(graph, st, feats, Mode::kTrain);
      Var<float> S = similarity_matrix(img, f.embeddings);
      LossBreakdown lb;
      Var<float> loss = triplet_loss(S, sample_impostors(end - start, rng), &lb);
      if (!std::isfinite(lb.total) || !all_finite(S.value()))
        throw DivergenceError(str_cat("non-finite loss in stage ", name, " at batch ", batch_id), batch_id);
      for (auto* p : params) p->zero_grad();
      graph.backward(loss);
      adam_step(params, adam, lr, cfg.adam);
      for (int l : kVqLayers) {
        const std::size_t slot = l - 2;
        if (f.codes[slot].empty()) continue;
        Codebook<float>& cb = st.codebook(l);
        ema_update(cb, f.pre_quant[slot], f.codes[slot], st.quantizer.gamma, st.quantizer.eps_smooth);
        if (st.quantizer.reinit_dead_codes) reinit_dead_codes(cb, f.pre_quant[slot], rng);
        for (int c : f.codes[slot]) ++hist[slot][std::size_t(c)];
      }
      sum_s += lb.sampled;
      sum_h += lb.semihard;
      ++batches;
    }
    EpochLog row;
    row.stage = name;
    row.epoch = epoch + 1;
    row.loss_s = batches ? sum_s / batches : 0;
    row.loss_h = batches ? sum_h / batches : 0;
    row.loss_total = row.loss_s + row.loss_h;
    row.lr = lr;
    row.ppl_vq2 = code_perplexity(hist[0]);
    row.ppl_vq3 = code_perplexity(hist[1]);
    row.recall = evaluate_recall(st, data.val, cfg.recall_n);
    record(row);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log_info(str_cat("stage ", name, " epoch ", row.epoch, "/", epochs, " loss ", row.loss_total, " R@",
                     cfg.recall_n, " ", row.recall.average, " (", secs, " s)"));
    if (row.recall.average > best_avg) {
      best_avg = row.recall.average;
      res.best = st;
      res.meta = {name, uint32_t(row.epoch), row.recall.audio_to_image, row.recall.image_to_audio,
                  row.recall.average};
    }
  }
  for (auto& [n, p] : res.best.params) p.zero_grad();
  return res;
}

CurriculumResult run_curriculum(const std::vector<CurriculumStage>& stages, const ModelState& init,
                                const TrainData& data, const TrainConfig& cfg, const std::string& out_dir,
                                const EpochCallback& on_epoch) {
  if (stages.empty()) throw UsageError("empty curriculum");
  CurriculumResult out;
  const ModelState* prev = &init;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const auto& stage = stages[i];
    if (!stage.warm_start) {
      const auto have = init.enabled_layers();
      if (!std::includes(stage.layers.begin(), stage.layers.end(), have.begin(), have.end()))
        throw DataError("initial checkpoint enables layers outside stage " + stage_set_text(stage.layers));
    }
    ModelState st = build_model(init.config, init.quantizer, cfg.seed, init.config_hash);
    enable_layers(st, stage.layers);
    warm_start(st, *prev);
    const std::string name = stage_name(stages, i);
    StageResult r = run_stage(std::move(st), stage.layers, stage.epochs.value_or(cfg.epochs), data, cfg, name,
                              on_epoch);
    out.log.insert(out.log.end(), r.log.begin(), r.log.end());
    if (!out_dir.empty()) {
      save_checkpoint((std::filesystem::path(out_dir) / str_cat("stage", i + 1, "_", stage_slug(stage.layers), ".rdvq")).string(),
                      r.best, r.meta);
      write_file_atomic((std::filesystem::path(out_dir) / "train_log.csv").string(), format_log_csv(out.log));
    }
    out.stages.push_back(std::move(r));
    prev = &out.stages.back().best;
  }
  if (!out_dir.empty())
    save_checkpoint((std::filesystem::path(out_dir) / "best.rdvq").string(), out.stages.back().best,
                    out.stages.back().meta);
  return out;
}

}  // namespace rdvq
