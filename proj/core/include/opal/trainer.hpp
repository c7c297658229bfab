#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "opal/data.hpp"
#include "opal/embedding.hpp"
#include "opal/losses.hpp"
#include "opal/model.hpp"

namespace opal {

struct TrainConfig {
  int d = 64;
  int k = 4;
  int batch_size = 1024;
  double learning_rate = 0.001;
  double epsilon = 0.1;
  double lambda_o = 10.0;
  double lambda_f = 1.0;
  double lambda_q = 1.0;
  int patience = 5;
  int max_epochs = 100;  // per stage
  int l_max = 200;
  int min_history = 1;
  int future_window = 0;  // 0 = whole remaining sequence
  int val_k = 200;        // early stopping watches Recall@val_k
  std::uint64_t seed = 42;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

struct AdamHyper {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update on a parameter slice; m/v are the slice's
// moment buffers and t the global step count (>= 1).
void adam_step(std::span<double> params, std::span<const double> grads,
               std::span<double> m, std::span<double> v, long long t,
               const AdamHyper& h);

struct EpochStats {
  Stage stage = Stage::pretrain;
  int epoch = 0;
  double main = 0.0, orth = 0.0, unif = 0.0, unique = 0.0, total = 0.0;
  double val_recall = 0.0;
  int since_improve = 0;
};

struct TrainState {
  Stage stage = Stage::pretrain;
  int epochs_run = 0;
  double best_val_recall = -1.0;
  int best_epoch = -1;
  int since_improve = 0;
  std::vector<EpochStats> history;
};

// Two-stage training driver. Owns the parameters; each stage restarts Adam,
// runs until Recall@val_k stops improving for `patience` epochs (or
// max_epochs), and rolls back to the best epoch's parameters.
class Trainer {
 public:
  using LogFn = std::function<void(const EpochStats&)>;

  Trainer(TrainConfig cfg, const DatasetSplit& data);

  TrainState pretrain();
  TrainState finetune();

  // Orchestrates the stages, honoring the ablation flags.
  void run(bool skip_pretrain = false, bool skip_finetune = false);

  const EmbeddingStore& store() const { return store_; }
  const GruParams& gru() const { return gru_; }
  EmbeddingStore& mutable_store() { return store_; }
  Stage serving_stage() const { return serving_stage_; }

  void set_log(LogFn fn) { log_ = std::move(fn); }

 private:
  TrainState run_stage(Stage stage);
  double validate(Stage stage) const;

  TrainConfig cfg_;
  const DatasetSplit& data_;
  std::vector<std::unordered_set<int>> interacted_;
  std::vector<int> eligible_;  // train sequence indices long enough to sample
  EmbeddingStore store_;
  GruParams gru_;
  Stage serving_stage_ = Stage::pretrain;
  Rng rng_;
  LogFn log_;
};

}  // namespace opal
