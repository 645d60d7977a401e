// Acceptance gate: ten end-to-end properties of the whole toolkit, one
// printed PASS/FAIL line each. Each criterion is self-contained and keeps
// its own oracle so a regression anywhere below shows up here.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "erckit/checkpoint.hpp"
#include "erckit/cli.hpp"
#include "erckit/common.hpp"
#include "erckit/corpus.hpp"
#include "erckit/evalmetrics.hpp"
#include "erckit/gradcheck.hpp"
#include "erckit/graph.hpp"
#include "erckit/layers.hpp"
#include "erckit/models.hpp"
#include "erckit/preprocess.hpp"
#include "erckit/training.hpp"
#include "support/crafted.hpp"
#include "support/synthetic.hpp"

using namespace erc;
using corpus::Conversation;
using corpus::ContextWindow;
using corpus::Corpus;
using corpus::EmotionLabelSet;
using corpus::Utterance;
using models::ModelBundle;
using models::ModelDims;
using models::ModelKind;
using models::Prediction;

namespace {

struct Gate {
  int id;
  std::string what;
  bool ok = true;
  std::string note;
  std::string detail;
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

  Gate(int i, std::string w) : id(i), what(std::move(w)) {}

  void expect(bool cond, const std::string& msg) {
    if (cond) return;
    ok = false;
    if (!note.empty()) note += "; ";
    note += msg;
  }

  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

  void finish() {
    std::printf("criterion %2d %s  %s%s%s  [%.1fs]\n", id, ok ? "PASS" : "FAIL", what.c_str(),
                detail.empty() ? "" : "  ", detail.c_str(), seconds());
    std::fflush(stdout);
    CHECK_MESSAGE(ok, note);
  }
};

#define GATE_BODY(gate, ...)                                         \
  try {                                                              \
    __VA_ARGS__                                                      \
  } catch (const std::exception& e) {                                \
    (gate).expect(false, std::string("exception: ") + e.what());     \
  }                                                                  \
  (gate).finish();

Tensor rand_tensor(long rows, long cols, Rng& rng) {
  Tensor t = Tensor::zeros(rows, cols);
  for (double& v : t.data) v = rng.uniform(-1.0, 1.0);
  return t;
}

const std::vector<ModelKind> kAllKinds = {ModelKind::simple_history,
                                          ModelKind::simple_history_aug,
                                          ModelKind::full_history, ModelKind::context_gru};

models::EncoderSpec desk_encoder(uint64_t seed) {
  models::EncoderSpec e;
  e.type = "hashed";
  e.dim = ModelDims::desk().d_enc;
  e.vocab_hash_dim = 256;
  e.seed = seed;
  return e;
}

struct TempDir {
  std::filesystem::path p;
  explicit TempDir(const std::string& tag) {
    p = std::filesystem::temp_directory_path() /
        ("erckit_accept_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(p, ec);
  }
  std::string file(const std::string& name) const { return (p / name).string(); }
};

double chained_accuracy(ModelBundle& m, const std::vector<Conversation>& convs) {
  std::vector<int> p, g;
  for (const Conversation& conv : convs) {
    for (const Prediction& pr : models::predict_conversation(m, conv)) {
      const Utterance& u = conv.utterances[size_t(pr.index)];
      if (!u.gold) continue;
      p.push_back(pr.label);
      g.push_back(m.labels.index(*u.gold));
    }
  }
  return evalmetrics::evaluate(p, g, m.labels).accuracy;
}

}  // namespace

// ---------------------------------------------------------------------------

TEST_CASE("gradient integrity") {
  Gate gate(1, "gradients match central differences for every layer and architecture");
  GATE_BODY(gate, {
    // individual layers
    {
      nn::ParamRegistry reg;
      Rng rng(5);
      nn::Linear lin(reg, "lin", 6, 4, nn::ParamGroup::main, rng);
      Tensor x = rand_tensor(3, 6, rng);
      auto res = nn::grad_check_fn(
          "linear",
          [&](nn::Graph& g) {
            nn::Var y = lin(g, g.input(x));
            return nn::sum_all(nn::mul(y, y));
          },
          reg.params(), 1e-5, 1e-4, 64);
      gate.expect(res.pass, "linear: rel err " + std::to_string(res.max_rel_err));
    }
    {
      nn::ParamRegistry reg;
      Rng rng(6);
      nn::Embedding emb(reg, "emb", 7, 5, nn::ParamGroup::main, rng);
      auto res = nn::grad_check_fn(
          "embedding",
          [&](nn::Graph& g) {
            nn::Var e = nn::concat_rows({emb(g, 1), emb(g, 3), emb(g, 1)});
            return nn::sum_all(nn::mul(e, e));
          },
          reg.params(), 1e-5, 1e-4, 64);
      gate.expect(res.pass, "embedding: rel err " + std::to_string(res.max_rel_err));
    }
    {
      nn::ParamRegistry reg;
      Rng rng(7);
      nn::MultiHeadAttention attn(reg, "attn", 8, 2, nn::ParamGroup::main, rng);
      Tensor q = rand_tensor(3, 8, rng), k = rand_tensor(4, 8, rng), v = rand_tensor(4, 8, rng);
      auto res = nn::grad_check_fn(
          "attention",
          [&](nn::Graph& g) {
            nn::Var y = attn(g, g.input(q), g.input(k), g.input(v));
            return nn::sum_all(nn::mul(y, y));
          },
          reg.params(), 1e-5, 1e-4, 64);
      gate.expect(res.pass, "attention: rel err " + std::to_string(res.max_rel_err));
    }
    {
      nn::ParamRegistry reg;
      Rng rng(8);
      nn::GruStack gru(reg, "gru", 6, 5, 0.25, nn::ParamGroup::main, rng);
      Tensor seq = rand_tensor(4, 6, rng);
      auto res = nn::grad_check_fn(
          "gru_stack",
          [&](nn::Graph& g) {
            Rng drop(99);
            auto out = gru.run(g, g.input(seq), nn::Mode::train, drop);
            return nn::sum_all(
                nn::mul(nn::concat_rows({out.outputs, out.final_l1, out.final_l2}),
                        nn::concat_rows({out.outputs, out.final_l1, out.final_l2})));
          },
          reg.params(), 1e-5, 1e-4, 64);
      gate.expect(res.pass, "gru_stack: rel err " + std::to_string(res.max_rel_err));
    }
    {
      nn::ParamRegistry reg;
      Rng rng(9);
      nn::BatchNorm1d bn(reg, "bn", 5);
      Tensor x = rand_tensor(4, 5, rng);
      // a mixing tensor keeps every gradient entry away from zero: the
      // standardized output itself has structurally zero beta gradients
      // under a pure sum-of-squares loss
      Tensor mix = rand_tensor(4, 5, rng);
      auto res = nn::grad_check_fn(
          "batchnorm_train",
          [&](nn::Graph& g) {
            nn::Var y = bn(g, g.input(x), nn::Mode::train);
            return nn::sum_all(nn::mul(y, nn::add(y, g.input(mix))));
          },
          reg.params(), 1e-5, 1e-4, 64);
      gate.expect(res.pass, "batchnorm train: rel err " + std::to_string(res.max_rel_err));
      auto res2 = nn::grad_check_fn(
          "batchnorm_eval",
          [&](nn::Graph& g) {
            nn::Var y = bn(g, g.input(x), nn::Mode::eval);
            return nn::sum_all(nn::mul(y, nn::add(y, g.input(mix))));
          },
          reg.params(), 1e-5, 1e-4, 64);
      gate.expect(res2.pass, "batchnorm eval: rel err " + std::to_string(res2.max_rel_err));
    }

    // full architectures at desk dims, 4 labels
    EmotionLabelSet labels4(testsupport::kContextLabels);
    std::vector<ContextWindow> batch(2);
    batch[0].cid = "g";
    batch[0].index = 1;
    batch[0].current = "checking the gradients here";
    batch[0].previous = {"an earlier turn", "the turn before this one"};
    batch[0].next = "a following turn";
    batch[0].previous_emotion = "joy";
    batch[1].cid = "g";
    batch[1].index = 2;
    batch[1].current = "a second window with different words";
    batch[1].previous = {"some other context"};
    batch[1].next = std::string();
    batch[1].previous_emotion = "anger";
    std::vector<int> targets = {2, 1};

    // architectures contain parameters whose true gradient is structurally
    // zero (any bias feeding a train-mode batchnorm), where central
    // differences measure only rounding noise; 1e-10 absolute slack admits
    // those entries and nothing a real defect could hide under
    for (ModelKind kind : kAllKinds) {
      ModelBundle m = ModelBundle::create(kind, ModelDims::desk(), labels4, desk_encoder(4), 31);
      auto res = nn::grad_check_fn(
          models::kind_name(kind),
          [&](nn::Graph& g) {
            Rng drop(123);
            return nn::cross_entropy_logits(m.arch->logits(g, batch, nn::Mode::train, drop),
                                            targets);
          },
          m.registry.params(), 1e-5, 1e-4, 32, 17, 1e-10);
      gate.expect(res.pass, std::string(models::kind_name(kind)) + ": rel err " +
                                std::to_string(res.max_rel_err) + " at " + res.worst_param);
    }
    gate.expect(gate.seconds() <= 60.0, "took longer than 60s");
  })
}

TEST_CASE("distribution contracts") {
  Gate gate(2, "probabilities form a simplex and attention rows sum to one");
  GATE_BODY(gate, {
    const std::vector<std::string> words = {"sun",  "rain",  "trade", "song", "field",
                                            "book", "stone", "wind",  "road", "light"};
    EmotionLabelSet labels;  // default 8
    Rng rng(77);
    auto rand_text = [&] {
      int n = 2 + int(rng.uniform_int(6));
      std::string t;
      for (int i = 0; i < n; ++i) {
        if (i) t += ' ';
        t += words[size_t(rng.uniform_int(int(words.size())))];
      }
      return t;
    };

    for (ModelKind kind : kAllKinds) {
      ModelBundle m = ModelBundle::create(kind, ModelDims::desk(), labels, desk_encoder(6), 13);
      double worst_sum = 0.0;
      bool nonneg = true, width = true;
      for (int it = 0; it < 1000; ++it) {
        ContextWindow w;
        w.cid = "r";
        w.index = 1 + int(rng.uniform_int(5));
        w.current = rand_text();
        int np = int(rng.uniform_int(4));
        for (int i = 0; i < np; ++i) w.previous.push_back(rand_text());
        w.next = rng.uniform() < 0.5 ? rand_text() : std::string();
        if (rng.uniform() < 0.8)
          w.previous_emotion = labels.name(int(rng.uniform_int(labels.size())));
        Prediction p = models::predict_window(m, w);
        width = width && int(p.probs.size()) == labels.size();
        double s = 0.0;
        for (double v : p.probs) {
          s += v;
          nonneg = nonneg && v >= 0.0;
        }
        worst_sum = std::max(worst_sum, std::fabs(s - 1.0));
      }
      gate.expect(width, std::string(models::kind_name(kind)) + ": wrong prob width");
      gate.expect(nonneg, std::string(models::kind_name(kind)) + ": negative probability");
      gate.expect(worst_sum <= 1e-9, std::string(models::kind_name(kind)) +
                                         ": prob sum off by " + std::to_string(worst_sum));
    }

    // attention weight rows across random shapes
    double worst_row = 0.0;
    bool attn_nonneg = true;
    for (int it = 0; it < 1000; ++it) {
      const int dims_pool[] = {8, 16, 32};
      int d = dims_pool[rng.uniform_int(3)];
      const int head_pool[] = {1, 2, 4, 8};
      int heads = head_pool[rng.uniform_int(4)];
      int lq = 1 + int(rng.uniform_int(5)), lk = 1 + int(rng.uniform_int(5));
      nn::ParamRegistry reg;
      Rng init(1000 + uint64_t(it));
      nn::MultiHeadAttention attn(reg, "a", d, heads, nn::ParamGroup::main, init);
      nn::Graph g;
      std::vector<Tensor> aw;
      attn(g, g.input(rand_tensor(lq, d, rng)), g.input(rand_tensor(lk, d, rng)),
           g.input(rand_tensor(lk, d, rng)), &aw);
      if (int(aw.size()) != heads) {
        gate.expect(false, "head count mismatch");
        break;
      }
      for (const Tensor& h : aw) {
        for (long r = 0; r < h.rows; ++r) {
          double s = 0.0;
          for (long c = 0; c < h.cols; ++c) {
            s += h.at(r, c);
            attn_nonneg = attn_nonneg && h.at(r, c) >= 0.0;
          }
          worst_row = std::max(worst_row, std::fabs(s - 1.0));
        }
      }
    }
    gate.expect(worst_row <= 1e-12,
                "attention row sum off by " + std::to_string(worst_row));
    gate.expect(attn_nonneg, "negative attention weight");
    gate.detail = "(worst prob-row drift within 1e-9, attention within 1e-12)";
  })
}

TEST_CASE("voting oracle") {
  Gate gate(3, "ensemble vote matches brute-force enumeration on 10000 fixtures");
  GATE_BODY(gate, {
    Rng rng(31337);
    auto oracle = [](const std::vector<std::pair<ModelKind, Prediction>>& ms,
                     const std::vector<ModelKind>& prio) {
      int k = int(ms[0].second.probs.size());
      std::vector<int> counts(size_t(k), 0);
      for (const auto& m : ms) counts[size_t(m.second.label)]++;
      int best = *std::max_element(counts.begin(), counts.end());
      std::vector<int> tied;
      for (int c = 0; c < k; ++c)
        if (counts[size_t(c)] == best) tied.push_back(c);
      if (tied.size() == 1) return tied[0];
      double best_mean = -1.0;
      std::vector<int> tied2;
      for (int c : tied) {
        double s = 0.0;
        for (const auto& m : ms) s += m.second.probs[size_t(c)];
        double mean = s / double(ms.size());
        if (mean > best_mean) {
          best_mean = mean;
          tied2 = {c};
        } else if (mean == best_mean) {
          tied2.push_back(c);
        }
      }
      if (tied2.size() == 1) return tied2[0];
      auto in_tied2 = [&](int c) {
        return std::find(tied2.begin(), tied2.end(), c) != tied2.end();
      };
      for (ModelKind want : prio)
        for (const auto& m : ms)
          if (m.first == want && in_tied2(m.second.label)) return m.second.label;
      for (const auto& m : ms)
        if (in_tied2(m.second.label)) return m.second.label;
      return tied2[0];
    };

    int mismatches = 0;
    double worst_sum = 0.0;
    for (int it = 0; it < 10000; ++it) {
      int k = 2 + int(rng.uniform_int(7));
      int active = std::min(k, 3);  // force vote collisions
      bool flat = it % 5 == 0;
      std::vector<std::pair<ModelKind, Prediction>> ms;
      for (ModelKind kind : kAllKinds) {
        Prediction p;
        p.cid = "c";
        p.index = 4;
        p.label = int(rng.uniform_int(active));
        p.probs.assign(size_t(k), 0.0);
        if (flat) {
          for (double& v : p.probs) v = 1.0 / double(k);
        } else {
          double s = 0.0;
          for (double& v : p.probs) {
            v = rng.uniform(0.01, 1.0);
            s += v;
          }
          for (double& v : p.probs) v /= s;
        }
        ms.emplace_back(kind, std::move(p));
      }
      Prediction got = models::ensemble_vote(ms, models::kDefaultPriority);
      int want = oracle(ms, models::kDefaultPriority);
      if (got.label != want) ++mismatches;
      double s = 0.0;
      for (double v : got.probs) s += v;
      worst_sum = std::max(worst_sum, std::fabs(s - 1.0));
    }
    gate.expect(mismatches == 0, std::to_string(mismatches) + " label mismatches");
    gate.expect(worst_sum <= 1e-12, "ensemble probs not normalized");
  })
}

TEST_CASE("metrics oracle") {
  Gate gate(4, "evaluation matches confusion recomputation on 10000 fixtures");
  GATE_BODY(gate, {
    Rng rng(2024);
    double worst = 0.0;
    bool recall_identity = true;
    for (int it = 0; it < 10000; ++it) {
      int k = 2 + int(rng.uniform_int(7));
      std::vector<std::string> names;
      for (int c = 0; c < k; ++c) names.push_back("l" + std::to_string(c));
      EmotionLabelSet labels(names);
      int n = 1 + int(rng.uniform_int(200));
      std::vector<int> preds(static_cast<size_t>(n)), golds(static_cast<size_t>(n));
      for (int i = 0; i < n; ++i) {
        preds[size_t(i)] = int(rng.uniform_int(k));
        golds[size_t(i)] = int(rng.uniform_int(k));
      }
      evalmetrics::EvalReport r = evalmetrics::evaluate(preds, golds, labels);

      std::vector<long> tp(size_t(k), 0), fp(size_t(k), 0), fn(size_t(k), 0),
          support(size_t(k), 0);
      long total_tp = 0;
      for (int i = 0; i < n; ++i) {
        ++support[size_t(golds[size_t(i)])];
        if (preds[size_t(i)] == golds[size_t(i)]) {
          ++tp[size_t(golds[size_t(i)])];
          ++total_tp;
        } else {
          ++fn[size_t(golds[size_t(i)])];
          ++fp[size_t(preds[size_t(i)])];
        }
      }
      double wp = 0.0, wf = 0.0;
      for (int c = 0; c < k; ++c) {
        double prec = tp[size_t(c)] + fp[size_t(c)] > 0
                          ? double(tp[size_t(c)]) / double(tp[size_t(c)] + fp[size_t(c)])
                          : 0.0;
        double rec = support[size_t(c)] > 0
                         ? double(tp[size_t(c)]) / double(support[size_t(c)])
                         : 0.0;
        double f1 = prec + rec > 0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
        wp += double(support[size_t(c)]) * prec / double(n);
        wf += double(support[size_t(c)]) * f1 / double(n);
        worst = std::max({worst, std::fabs(r.per_class[size_t(c)].precision - prec),
                          std::fabs(r.per_class[size_t(c)].recall - rec),
                          std::fabs(r.per_class[size_t(c)].f1 - f1)});
      }
      double acc = double(total_tp) / double(n);
      worst = std::max({worst, std::fabs(r.accuracy - acc), std::fabs(r.weighted_precision - wp),
                        std::fabs(r.weighted_f1 - wf), std::fabs(r.weighted_recall - acc)});
      recall_identity = recall_identity && r.weighted_recall == r.accuracy;
    }
    gate.expect(worst <= 1e-12, "metric drift " + std::to_string(worst));
    gate.expect(recall_identity, "weighted recall != accuracy bitwise");

    // hand-checked case: two labels, preds [A,A,B] against gold [A,B,B]
    EmotionLabelSet ab(std::vector<std::string>{"A", "B"});
    evalmetrics::EvalReport hand = evalmetrics::evaluate({0, 0, 1}, {0, 1, 1}, ab);
    gate.expect(std::fabs(hand.accuracy - 2.0 / 3.0) <= 1e-12, "hand accuracy");
    gate.expect(std::fabs(hand.weighted_f1 - 2.0 / 3.0) <= 1e-12, "hand weighted f1");
    std::string table = evalmetrics::render_table({{"hand", hand}});
    gate.expect(table.find("0.6667") != std::string::npos, "table lacks 0.6667");
  })
}

TEST_CASE("learnability at desk scale") {
  Gate gate(5, "all architectures learn the synthetic corpus; context beats context-free");
  GATE_BODY(gate, {
    Corpus train_c = testsupport::context_benchmark_corpus(16, 101, 0);
    Corpus held = testsupport::context_benchmark_corpus(8, 202, 16);

    Corpus aug_c = train_c;
    preprocess::RuleBasedParaphraser para(testsupport::filler_synonyms());
    preprocess::augment_corpus(aug_c, para, 7);

    training::TrainConfig tc;
    tc.max_epochs = 300;
    tc.fixed_epochs = true;
    tc.stop_at_train_accuracy = 0.95;
    tc.optim.lr_main = 3e-3;
    tc.optim.lr_encoder = 1.5e-4;

    ModelBundle ctx_simple = ModelBundle::create(ModelKind::simple_history, ModelDims::desk(),
                                                 train_c.labels, desk_encoder(3), 11);
    std::ostringstream measured;
    for (ModelKind kind : kAllKinds) {
      const Corpus& src = kind == ModelKind::simple_history_aug ? aug_c : train_c;
      ModelBundle local = ModelBundle::create(kind, ModelDims::desk(), src.labels,
                                              desk_encoder(3), 11);
      ModelBundle& m = kind == ModelKind::simple_history ? ctx_simple : local;
      auto t0 = std::chrono::steady_clock::now();
      training::TrainResult r = training::train_model(m, src.conversations, {}, tc, 5);
      double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      double acc = r.epochs.empty() || !r.epochs.back().train_accuracy
                       ? 0.0
                       : *r.epochs.back().train_accuracy;
      measured << models::kind_name(kind) << " " << acc << "@" << r.epochs.size() << "ep ";
      gate.expect(acc >= 0.95, std::string(models::kind_name(kind)) + ": train accuracy " +
                                   std::to_string(acc) + " after " +
                                   std::to_string(r.epochs.size()) + " epochs");
      gate.expect(secs <= 300.0, std::string(models::kind_name(kind)) + ": training took " +
                                     std::to_string(secs) + "s");
    }

    ModelBundle no_ctx = ModelBundle::create(ModelKind::simple_history, ModelDims::desk(),
                                             train_c.labels, desk_encoder(3), 11, true);
    training::train_model(no_ctx, train_c.conversations, {}, tc, 5);

    double ctx_acc = chained_accuracy(ctx_simple, held.conversations);
    double nc_acc = chained_accuracy(no_ctx, held.conversations);
    measured << "| held-out ctx " << ctx_acc << " vs ctx-free " << nc_acc;
    gate.detail = "(" + measured.str() + ")";
    gate.expect(ctx_acc - nc_acc >= 0.15,
                "context margin " + std::to_string(ctx_acc - nc_acc) + " (ctx " +
                    std::to_string(ctx_acc) + ", no-ctx " + std::to_string(nc_acc) + ")");
  })
}

TEST_CASE("chaining semantics") {
  Gate gate(6, "prediction overrides propagate through history models, not the recurrent one");
  GATE_BODY(gate, {
    EmotionLabelSet two(std::vector<std::string>{"calm", "tense"});
    Conversation conv;
    conv.cid = "chain";
    for (int i = 0; i < 4; ++i) {
      Utterance u;
      u.cid = conv.cid;
      u.index = i;
      u.text_raw = "utterance number " + std::to_string(i);
      conv.utterances.push_back(std::move(u));
    }

    for (ModelKind kind : {ModelKind::simple_history, ModelKind::simple_history_aug,
                           ModelKind::full_history}) {
      ModelBundle m = ModelBundle::create(kind, ModelDims::desk(), two, desk_encoder(9), 41);
      testsupport::craft_emotion_follower(m);
      std::vector<Prediction> base = models::predict_conversation(m, conv);
      bool all_zero = true;
      for (const Prediction& p : base) all_zero = all_zero && p.label == 0;
      gate.expect(all_zero, std::string(models::kind_name(kind)) +
                                ": baseline chain should rest at the first label");
      std::vector<Prediction> forced = models::predict_conversation(
          m, conv, [](int idx) { return idx == 1 ? std::optional<int>(1) : std::nullopt; });
      gate.expect(forced[1].label == 1 && forced[2].label == 1 && forced[3].label == 1 &&
                      forced[0].label == 0,
                  std::string(models::kind_name(kind)) +
                      ": flipping utterance 1 must flip the context of the rest");
    }

    ModelBundle gru = ModelBundle::create(ModelKind::context_gru, ModelDims::desk(),
                                          EmotionLabelSet(), desk_encoder(9), 41);
    Conversation conv5 = conv;
    {
      Utterance u;
      u.cid = conv.cid;
      u.index = 4;
      u.text_raw = "utterance number 4";
      conv5.utterances.push_back(std::move(u));
    }
    std::vector<Prediction> base = models::predict_conversation(gru, conv5);
    std::vector<Prediction> forced = models::predict_conversation(
        gru, conv5, [&](int idx) {
          return idx == 1 ? std::optional<int>((base[1].label + 1) % EmotionLabelSet().size())
                          : std::nullopt;
        });
    bool invariant = true;
    for (size_t i = 0; i < base.size(); ++i) {
      if (i == 1) continue;
      invariant = invariant && base[i].label == forced[i].label &&
                  base[i].probs == forced[i].probs;
    }
    gate.expect(invariant, "recurrent model must ignore other utterances' predicted labels");
  })
}

TEST_CASE("window law") {
  Gate gate(7, "recurrent context window: at most 3 previous, next present except at the end");
  GATE_BODY(gate, {
    models::WindowSpec ws = models::window_spec(ModelKind::context_gru, ModelDims::desk(), false);
    gate.expect(ws.w_prev == 3 && ws.use_next, "window spec should be 3 previous plus next");
    for (int len = 1; len <= 50; ++len) {
      Conversation conv;
      conv.cid = "w" + std::to_string(len);
      for (int i = 0; i < len; ++i) {
        Utterance u;
        u.cid = conv.cid;
        u.index = i;
        u.text_raw = "t" + std::to_string(i);
        conv.utterances.push_back(std::move(u));
      }
      std::vector<ContextWindow> ws2 = corpus::make_windows(conv, ws.w_prev, ws.use_next);
      if (int(ws2.size()) != len) {
        gate.expect(false, "window count mismatch at length " + std::to_string(len));
        break;
      }
      for (int p = 0; p < len; ++p) {
        const ContextWindow& w = ws2[size_t(p)];
        int want_prev = std::min(p, 3);
        bool ok_prev = int(w.previous.size()) == want_prev;
        for (int j = 0; j < want_prev && ok_prev; ++j)
          ok_prev = w.previous[size_t(j)] == "t" + std::to_string(p - want_prev + j);
        bool ok_next = w.next.has_value() &&
                       *w.next == (p + 1 < len ? "t" + std::to_string(p + 1) : std::string());
        if (!(ok_prev && ok_next && w.current == "t" + std::to_string(p))) {
          gate.expect(false, "window contents wrong at length " + std::to_string(len) +
                                 " position " + std::to_string(p));
          p = len;
          len = 51;
        }
      }
    }
  })
}

TEST_CASE("training regime conformance") {
  Gate gate(8, "optimizer groups, batch sizes, and best-checkpoint early stopping");
  GATE_BODY(gate, {
    training::AdamW::Config oc;
    gate.expect(oc.lr_main == 1e-4 && oc.lr_encoder == 5e-6,
                "default group learning rates must be 1e-4 and 5e-6");

    nn::Parameter pm("m", nn::ParamGroup::main, Tensor::zeros(1, 1));
    nn::Parameter pe("e", nn::ParamGroup::encoder, Tensor::zeros(1, 1));
    training::AdamW opt({&pm, &pe}, oc);
    gate.expect(opt.lr(nn::ParamGroup::main) == 1e-4 &&
                    opt.lr(nn::ParamGroup::encoder) == 5e-6,
                "constructed optimizer must expose the exact group rates");

    gate.expect(training::default_batch_size(ModelKind::context_gru) == 1,
                "recurrent model must default to batch 1");
    for (ModelKind kind : {ModelKind::simple_history, ModelKind::simple_history_aug,
                           ModelKind::full_history})
      gate.expect(training::default_batch_size(kind) == 4,
                  std::string(models::kind_name(kind)) + " must default to batch 4");

    // crafted validation trace: the best epoch sits in the middle
    Corpus c = testsupport::context_benchmark_corpus(4, 66, 0);
    training::TrainConfig tc;
    tc.max_epochs = 40;
    tc.early_stop_patience = 2;
    tc.optim.lr_main = 1e-3;
    std::vector<double> trace = {0.3, 0.9, 0.2, 0.15, 0.1, 0.05};

    ModelBundle a = ModelBundle::create(ModelKind::simple_history, ModelDims::desk(), c.labels,
                                        desk_encoder(2), 21);
    training::TrainResult ra =
        training::train_model(a, c.conversations, {}, tc, 6, &trace);
    gate.expect(ra.stopped_early, "crafted trace must stop early");
    gate.expect(ra.best_epoch == 2 && ra.best_val_f1 == 0.9,
                "best checkpoint must be the max-metric epoch");

    training::TrainConfig tc2 = tc;
    tc2.max_epochs = 2;
    ModelBundle b = ModelBundle::create(ModelKind::simple_history, ModelDims::desk(), c.labels,
                                        desk_encoder(2), 21);
    training::train_model(b, c.conversations, {}, tc2, 6, &trace);
    auto pa = a.registry.params();
    auto pb = b.registry.params();
    bool same = pa.size() == pb.size();
    for (size_t i = 0; same && i < pa.size(); ++i)
      same = pa[i]->value.data == pb[i]->value.data;
    gate.expect(same, "restored parameters must equal a run truncated at the best epoch");
  })
}

TEST_CASE("pipeline determinism") {
  Gate gate(9, "augment, train, predict, evaluate twice with one seed, byte-identical");
  GATE_BODY(gate, {
    TempDir td("determinism");
    Corpus base = testsupport::context_benchmark_corpus(8, 55, 0);
    write_text_file(td.file("corpus.jsonl"), corpus::corpus_to_jsonl(base));
    std::string syn;
    for (const auto& [w, alts] : testsupport::filler_synonyms()) {
      syn += w + "\t";
      for (size_t i = 0; i < alts.size(); ++i) syn += (i ? "," : "") + alts[i];
      syn += "\n";
    }
    write_text_file(td.file("syn.tsv"), syn);

    auto run_pipeline = [&](const std::string& tag) {
      std::string aug = td.file(tag + "_aug.jsonl");
      std::string mdir = td.file(tag + "_model");
      std::string preds = td.file(tag + "_preds.jsonl");
      std::string report = td.file(tag + "_report.json");
      int rc = 0;
      rc |= cli::run_cli({"augment", "--in", td.file("corpus.jsonl"), "--out", aug,
                          "--synonyms", td.file("syn.tsv"), "--seed", "3"});
      rc |= cli::run_cli({"train", "--kind", "simple_history", "--in", aug, "--train-on-all",
                          "--epochs", "5", "--desk", "--out", mdir, "--seed", "3"});
      rc |= cli::run_cli({"predict", "--model", mdir, "--in", td.file("corpus.jsonl"), "--out",
                          preds, "--seed", "3"});
      rc |= cli::run_cli({"evaluate", "--in", td.file("corpus.jsonl"), "--preds", preds,
                          "--json", report});
      return rc;
    };

    gate.expect(run_pipeline("a") == 0, "first pipeline run failed");
    gate.expect(run_pipeline("b") == 0, "second pipeline run failed");
    gate.expect(read_text_file(td.file("a_preds.jsonl")) ==
                    read_text_file(td.file("b_preds.jsonl")),
                "prediction files differ between runs");
    gate.expect(read_text_file(td.file("a_report.json")) ==
                    read_text_file(td.file("b_report.json")),
                "evaluation reports differ between runs");
    gate.expect(read_text_file(td.file("a_model/weights.json")) ==
                    read_text_file(td.file("b_model/weights.json")),
                "trained weights differ between runs");
  })
}

TEST_CASE("augmentation law") {
  Gate gate(10, "three distinct paraphrases per utterance, drawn from the first ten offered");
  GATE_BODY(gate, {
    Corpus c;
    Rng rng(64);
    for (int ci = 0; ci < 100; ++ci) {
      Conversation conv;
      conv.cid = "a" + std::to_string(ci);
      for (int i = 0; i < 10; ++i) {
        Utterance u;
        u.cid = conv.cid;
        u.index = i;
        u.text_raw = "note " + std::to_string(ci) + " " + std::to_string(i) + " tag " +
                     std::to_string(rng.uniform_int(1000));
        u.gold = c.labels.name(int(rng.uniform_int(c.labels.size())));
        conv.utterances.push_back(std::move(u));
      }
      c.conversations.push_back(std::move(conv));
    }

    testsupport::CountingParaphraser stub;
    preprocess::AugmentStats stats = preprocess::augment_corpus(c, stub, 5);
    gate.expect(stats.originals == 1000, "expected 1000 originals");
    gate.expect(stats.synthesized == 3000,
                "expected 3000 synthetics, got " + std::to_string(stats.synthesized));

    bool law = true;
    for (const Conversation& conv : c.conversations) {
      std::map<int, std::set<std::string>> by_origin;
      for (const Utterance& u : conv.utterances) {
        if (!u.synthetic) continue;
        if (!u.paraphrase_of) {
          law = false;
          continue;
        }
        by_origin[*u.paraphrase_of].insert(u.text_raw);
      }
      if (by_origin.size() != 10) law = false;
      for (const auto& [origin_idx, texts] : by_origin) {
        if (texts.size() != 3) law = false;  // pairwise distinct and exactly three
        const Utterance& origin = conv.utterances[size_t(origin_idx)];
        for (const std::string& t : texts) {
          bool in_first_ten = false;
          for (int j = 0; j < 10; ++j)
            in_first_ten = in_first_ten ||
                           t == "variant " + std::to_string(j) + " of " + origin.text_raw;
          law = law && in_first_ten;
        }
      }
    }
    gate.expect(law, "synthetic records break the selection law");
  })
}
