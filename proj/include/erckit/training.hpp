#pragma once

#include <optional>
#include <string>
#include <vector>

#include "erckit/models.hpp"

namespace erc::training {

using models::ModelBundle;
using nn::ParamGroup;
using nn::Parameter;

// Decoupled weight decay:
//   m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
//   theta <- theta - lr * mhat / (sqrt(vhat) + eps) - lr * wd * theta
// with bias-corrected mhat, vhat. One learning rate per parameter group;
// a scheduler scales all groups by a common factor, so the group ratio is
// invariant.
class AdamW {
 public:
  struct Config {
    double lr_main = 1e-4;
    double lr_encoder = 5e-6;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
  };

  AdamW(std::vector<Parameter*> params, const Config& cfg);

  void step();        // NumericError on non-finite gradients, names the parameter
  void zero_grads();
  void scale_lr(double factor) { lr_scale_ *= factor; }

  double lr(ParamGroup g) const;
  double lr_scale() const { return lr_scale_; }
  int steps() const { return t_; }

 private:
  std::vector<Parameter*> params_;
  std::vector<Tensor> m_, v_;
  Config cfg_;
  double lr_scale_ = 1.0;
  int t_ = 0;
};

// Clips the global L2 norm of all parameter gradients to `max_norm`
// (no-op when max_norm <= 0 or the norm is already within). Returns the
// pre-clip norm.
double clip_grad_norm(const std::vector<Parameter*>& params, double max_norm);

// Reduce-on-plateau for a higher-is-better metric: after `patience`
// consecutive epochs without improvement over the best seen, asks for one
// lr scaling by `factor` and resets the counter.
class PlateauScheduler {
 public:
  PlateauScheduler(double factor = 0.5, int patience = 2);
  // Returns the scale factor to apply now (1.0 = none).
  double observe(double metric);
  double best() const { return best_; }

 private:
  double factor_;
  int patience_;
  double best_;
  int bad_ = 0;
};

// Stops after `patience` consecutive epochs without improvement; tracks the
// best epoch (strict improvement, so ties keep the earliest).
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience = 5);
  // Returns true when training should stop after this epoch.
  bool observe(double metric);
  bool improved_last() const { return improved_last_; }
  double best() const { return best_; }
  int best_epoch() const { return best_epoch_; }  // 1-based; 0 = none yet
  int observed() const { return epoch_; }

 private:
  int patience_;
  double best_;
  int best_epoch_ = 0;
  int epoch_ = 0;
  int bad_ = 0;
  bool improved_last_ = false;
};

struct TrainConfig {
  int max_epochs = 50;
  int batch_size = 0;  // 0 = per-kind default: 1 for context_gru, 4 otherwise
  double grad_clip = 5.0;
  AdamW::Config optim;
  double scheduler_factor = 0.5;
  int scheduler_patience = 2;
  int early_stop_patience = 5;
  // Stop once training-set accuracy (measured by standard inference)
  // reaches this value; <= 0 disables the check.
  double stop_at_train_accuracy = 0.0;
  bool fixed_epochs = false;  // disable early stopping / validation selection
};

int default_batch_size(models::ModelKind kind);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  std::optional<double> val_weighted_f1;
  std::optional<double> train_accuracy;
  double lr_main = 0.0;
  double lr_encoder = 0.0;
  bool is_best = false;
};

struct TrainResult {
  std::vector<EpochLog> epochs;
  int best_epoch = 0;
  double best_val_f1 = 0.0;
  bool stopped_early = false;
};

std::string trainlog_to_jsonl(const TrainResult& r);

// Trains in place. Teacher forcing: training windows carry gold previous
// emotions. Validation (unless cfg.fixed_epochs or val is empty) runs
// standard chained inference each epoch and scores weighted F1; the bundle
// ends at the best-epoch parameters. Shuffling is per-utterance for batched
// kinds and per-conversation for context_gru. Deterministic for a fixed
// (bundle seed, run_seed).
TrainResult train_model(ModelBundle& m, const std::vector<corpus::Conversation>& train,
                        const std::vector<corpus::Conversation>& val, const TrainConfig& cfg,
                        uint64_t run_seed,
                        const std::vector<double>* val_metric_override = nullptr);

}  // namespace erc::training
