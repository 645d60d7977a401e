#include "erckit/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <json.hpp>

#include "erckit/checkpoint.hpp"
#include "erckit/evalmetrics.hpp"

namespace erc::training {

namespace {

using json = nlohmann::ordered_json;
using corpus::Conversation;
using corpus::ContextWindow;
using corpus::Utterance;
using models::Prediction;
using models::WindowSpec;
using nn::Graph;
using nn::Mode;
using nn::Var;

struct Sample {
  ContextWindow window;
  int target = 0;
};

// Windows with a gold label, grouped by conversation, teacher-forced: the
// previous emotion comes from the data, not from chained predictions.
std::vector<std::vector<Sample>> labeled_windows(const ModelBundle& m,
                                                 const std::vector<Conversation>& data) {
  WindowSpec spec = models::window_spec(m.kind, m.dims, m.no_context);
  std::vector<std::vector<Sample>> out;
  for (const Conversation& conv : data) {
    std::vector<Sample> ss;
    for (ContextWindow& w : corpus::make_windows(conv, spec.w_prev, spec.use_next))
      if (w.gold) {
        int target = m.labels.index(*w.gold);
        ss.push_back({std::move(w), target});
      }
    if (!ss.empty()) out.push_back(std::move(ss));
  }
  return out;
}

// Chained inference over `data`, scored against gold labels.
evalmetrics::EvalReport score_inference(ModelBundle& m, const std::vector<Conversation>& data) {
  std::vector<int> preds, golds;
  for (const Conversation& conv : data) {
    std::vector<Prediction> ps = models::predict_conversation(m, conv);
    for (const Prediction& p : ps) {
      const Utterance& u = conv.utterances[size_t(p.index)];
      if (u.gold) {
        preds.push_back(p.label);
        golds.push_back(m.labels.index(*u.gold));
      }
    }
  }
  if (preds.empty()) throw DataError("no labeled utterances to score");
  return evalmetrics::evaluate(preds, golds, m.labels);
}

template <typename T>
void shuffle_in_place(std::vector<T>& v, Rng& rng) {
  for (size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[size_t(rng.uniform_int(int(i)))]);
}

}  // namespace

AdamW::AdamW(std::vector<Parameter*> params, const Config& cfg)
    : params_(std::move(params)), cfg_(cfg) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Parameter* p : params_) {
    m_.emplace_back(p->value.rows, p->value.cols);
    v_.emplace_back(p->value.rows, p->value.cols);
  }
}

double AdamW::lr(ParamGroup g) const {
  return lr_scale_ * (g == ParamGroup::encoder ? cfg_.lr_encoder : cfg_.lr_main);
}

void AdamW::step() {
  // validate up front so a poisoned batch leaves everything untouched
  for (const Parameter* p : params_)
    if (!p->grad.all_finite())
      throw NumericError("non-finite gradient in parameter " + p->name);
  ++t_;
  double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
  double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
  for (size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    double step_lr = lr(p.group);
    for (size_t k = 0; k < p.value.size(); ++k) {
      double g = p.grad.data[k];
      double& m = m_[i].data[k];
      double& v = v_[i].data[k];
      m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
      v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g * g;
      double mhat = m / bc1;
      double vhat = v / bc2;
      double& th = p.value.data[k];
      th -= step_lr * (mhat / (std::sqrt(vhat) + cfg_.eps)) + step_lr * cfg_.weight_decay * th;
    }
  }
}

void AdamW::zero_grads() {
  for (Parameter* p : params_) p->zero_grad();
}

double clip_grad_norm(const std::vector<Parameter*>& params, double max_norm) {
  double sq = 0.0;
  for (const Parameter* p : params)
    for (double g : p->grad.data) sq += g * g;
  double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    double s = max_norm / norm;
    for (Parameter* p : params)
      for (double& g : p->grad.data) g *= s;
  }
  return norm;
}

PlateauScheduler::PlateauScheduler(double factor, int patience)
    : factor_(factor), patience_(patience), best_(-std::numeric_limits<double>::infinity()) {}

double PlateauScheduler::observe(double metric) {
  if (metric > best_) {
    best_ = metric;
    bad_ = 0;
    return 1.0;
  }
  ++bad_;
  if (bad_ > patience_) {
    bad_ = 0;
    return factor_;
  }
  return 1.0;
}

EarlyStopping::EarlyStopping(int patience)
    : patience_(patience), best_(-std::numeric_limits<double>::infinity()) {}

bool EarlyStopping::observe(double metric) {
  ++epoch_;
  if (metric > best_) {
    best_ = metric;
    best_epoch_ = epoch_;
    bad_ = 0;
    improved_last_ = true;
    return false;
  }
  improved_last_ = false;
  ++bad_;
  return bad_ >= patience_;
}

int default_batch_size(models::ModelKind kind) {
  return kind == models::ModelKind::context_gru ? 1 : 4;
}

std::string trainlog_to_jsonl(const TrainResult& r) {
  std::string out;
  for (const EpochLog& e : r.epochs) {
    json j;
    j["epoch"] = e.epoch;
    j["train_loss"] = e.train_loss;
    if (e.val_weighted_f1)
      j["val_weighted_f1"] = *e.val_weighted_f1;
    else
      j["val_weighted_f1"] = nullptr;
    if (e.train_accuracy)
      j["train_accuracy"] = *e.train_accuracy;
    else
      j["train_accuracy"] = nullptr;
    j["lr_main"] = e.lr_main;
    j["lr_encoder"] = e.lr_encoder;
    j["is_best"] = e.is_best;
    out += j.dump();
    out += '\n';
  }
  return out;
}

TrainResult train_model(ModelBundle& m, const std::vector<Conversation>& train,
                        const std::vector<Conversation>& val, const TrainConfig& cfg,
                        uint64_t run_seed, const std::vector<double>* val_metric_override) {
  std::vector<std::vector<Sample>> by_conv = labeled_windows(m, train);
  size_t total = 0;
  for (const auto& ss : by_conv) total += ss.size();
  if (total == 0) throw DataError("no labeled training windows in the corpus");

  int batch_size = cfg.batch_size > 0 ? cfg.batch_size : default_batch_size(m.kind);
  bool per_conversation = m.kind == models::ModelKind::context_gru;
  bool do_val = !cfg.fixed_epochs && (val_metric_override != nullptr || !val.empty());

  AdamW opt(m.registry.params(), cfg.optim);
  PlateauScheduler scheduler(cfg.scheduler_factor, cfg.scheduler_patience);
  EarlyStopping stopper(cfg.early_stop_patience);

  TrainResult res;
  nn::ParamSnapshot best_snap;
  Rng root(run_seed);

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    Rng shuffle_rng = root.split("shuffle", uint64_t(epoch));
    Rng dropout_rng = root.split("dropout", uint64_t(epoch));

    // assemble this epoch's sample order
    std::vector<const Sample*> order;
    order.reserve(total);
    if (per_conversation) {
      std::vector<size_t> convs(by_conv.size());
      for (size_t i = 0; i < convs.size(); ++i) convs[i] = i;
      shuffle_in_place(convs, shuffle_rng);
      for (size_t ci : convs)
        for (const Sample& s : by_conv[ci]) order.push_back(&s);
    } else {
      for (const auto& ss : by_conv)
        for (const Sample& s : ss) order.push_back(&s);
      shuffle_in_place(order, shuffle_rng);
    }

    double loss_sum = 0.0;
    for (size_t start = 0; start < order.size(); start += size_t(batch_size)) {
      size_t end = std::min(order.size(), start + size_t(batch_size));
      std::vector<ContextWindow> ws;
      std::vector<int> targets;
      for (size_t i = start; i < end; ++i) {
        ws.push_back(order[i]->window);
        targets.push_back(order[i]->target);
      }
      m.registry.zero_grads();
      Graph g;
      Var loss = nn::cross_entropy_logits(m.arch->logits(g, ws, Mode::train, dropout_rng),
                                          targets);
      g.backward(loss);
      clip_grad_norm(m.registry.params(), cfg.grad_clip);
      opt.step();
      loss_sum += loss.value().at(0, 0) * double(ws.size());
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = loss_sum / double(total);
    log.lr_main = opt.lr(ParamGroup::main);
    log.lr_encoder = opt.lr(ParamGroup::encoder);

    bool hit_accuracy_target = false;
    if (cfg.stop_at_train_accuracy > 0.0) {
      double acc = score_inference(m, train).accuracy;
      log.train_accuracy = acc;
      hit_accuracy_target = acc >= cfg.stop_at_train_accuracy;
    }

    bool stop = false;
    if (do_val) {
      double metric;
      if (val_metric_override) {
        if (size_t(epoch) > val_metric_override->size())
          throw DataError("validation override has no entry for epoch " +
                          std::to_string(epoch));
        metric = (*val_metric_override)[size_t(epoch) - 1];
      } else {
        metric = score_inference(m, val).weighted_f1;
      }
      log.val_weighted_f1 = metric;
      stop = stopper.observe(metric);
      if (stopper.improved_last()) {
        best_snap = nn::snapshot(m.registry);
        res.best_epoch = epoch;
        res.best_val_f1 = metric;
        log.is_best = true;
      }
      double factor = scheduler.observe(metric);
      if (factor != 1.0) opt.scale_lr(factor);
    } else {
      res.best_epoch = epoch;
    }

    res.epochs.push_back(log);
    if (stop) {
      res.stopped_early = true;
      break;
    }
    if (hit_accuracy_target) break;
  }

  if (do_val && res.best_epoch > 0 && !best_snap.params.empty())
    nn::restore(m.registry, best_snap);
  return res;
}

}  // namespace erc::training
