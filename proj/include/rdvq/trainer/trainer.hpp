#pragma once

#include <functional>
#include <string>
#include <vector>

#include "rdvq/groundnet/checkpoint.hpp"
#include "rdvq/objective/retrieval.hpp"
#include "rdvq/synth/corpus.hpp"
#include "rdvq/trainer/adam.hpp"
#include "rdvq/trainer/curriculum.hpp"

namespace rdvq {

struct TrainConfig {
  double lr = 2e-4;
  double lr_decay = 0.95;
  std::size_t decay_every = 3;
  std::size_t batch_size = 32;
  std::size_t epochs = 30;
  uint64_t seed = 1;
  AdamConfig adam;
  std::size_t recall_n = 10;

  static TrainConfig from(const Config& cfg);
  void validate() const;
};

// lr0 * decay^floor(epoch / decay_every), epoch counted from 0.
double learning_rate(const TrainConfig& cfg, std::size_t epoch);

struct TrainData {
  std::vector<const GroundedPair*> train;
  std::vector<const GroundedPair*> val;
};

TrainData make_train_data(const std::vector<GroundedPair>& train, const std::vector<GroundedPair>& val);

struct EpochLog {
  std::string stage;
  std::size_t epoch = 0;  // 0 is the initialized model before any update
  double loss_s = 0, loss_h = 0, loss_total = 0;  // mean per batch
  Recall recall;
  double lr = 0;
  double ppl_vq2 = 0, ppl_vq3 = 0;
};

std::string format_log_csv(const std::vector<EpochLog>& rows);

// Validation recall of the model in eval mode.
Recall evaluate_recall(ModelState& state, const std::vector<const GroundedPair*>& val, std::size_t n);

struct StageResult {
  ModelState best;
  CheckpointMeta meta;
  std::vector<EpochLog> log;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Trains `init` with `layers` enabled for `epochs` epochs. The returned
// model is the epoch with the highest average validation R@n; the
// initialized model is returned only when no epoch runs.
StageResult run_stage(ModelState init, const std::set<int>& layers, std::size_t epochs,
                      const TrainData& data, const TrainConfig& cfg, const std::string& name,
                      const EpochCallback& on_epoch = {});

struct CurriculumResult {
  std::vector<StageResult> stages;
  std::vector<EpochLog> log;
};

// Runs every stage in order, warm-starting each from the previous best.
// When `out_dir` is set, writes stage<i>_<slug>.rdvq, best.rdvq and
// train_log.csv there.
CurriculumResult run_curriculum(const std::vector<CurriculumStage>& stages, const ModelState& init,
                                const TrainData& data, const TrainConfig& cfg,
                                const std::string& out_dir = "", const EpochCallback& on_epoch = {});

}  // namespace rdvq
