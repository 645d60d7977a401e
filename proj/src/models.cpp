#include "erckit/models.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <json.hpp>

#include "erckit/checkpoint.hpp"

namespace erc::models {

namespace {

using json = nlohmann::ordered_json;
using encoder::HashedEncoderConfig;
using encoder::HashedProjectionEncoder;
using nn::BatchNorm1d;
using nn::Embedding;
using nn::GruStack;
using nn::Linear;
using nn::MultiHeadAttention;
using nn::ParamGroup;

int emotion_row_of(const EmotionLabelSet& labels, const std::optional<std::string>& pe,
                   bool no_context) {
  if (no_context || !pe) return labels.size();
  return labels.index(*pe);
}

Var stack_rows(std::vector<Var>& rows) {
  return rows.size() == 1 ? rows[0] : nn::concat_rows(rows);
}

// Previous utterance, current, attention over both, plus an embedding of the
// previous turn's emotion. No normalization or dropout anywhere, so train
// and eval forwards coincide.
class SimpleHistoryArch final : public ArchModel {
 public:
  SimpleHistoryArch(ParamRegistry& reg, const ModelDims& dims, const EmotionLabelSet& labels,
                    bool no_context, std::shared_ptr<SentenceEncoder> enc, Rng& rng)
      : dims_(dims),
        labels_(labels),
        no_context_(no_context),
        enc_(std::move(enc)),
        attn_(reg, "sh.attn", dims.d_enc, dims.heads, ParamGroup::main, rng),
        emotion_(reg, "sh.emotion", labels.size() + 1, dims.emotion_dim, ParamGroup::main, rng),
        fc1_(reg, "sh.fc1", dims.d_enc + dims.emotion_dim, dims.sh_hidden, ParamGroup::main, rng),
        fc2_(reg, "sh.fc2", dims.sh_hidden, labels.size(), ParamGroup::main, rng) {}

  Var logits(Graph& g, const std::vector<ContextWindow>& batch, Mode, Rng&) override {
    std::vector<Var> rows;
    rows.reserve(batch.size());
    for (const ContextWindow& w : batch) {
      Var cur = enc_->embed(g, w.current);
      std::string prev_text;
      if (!no_context_ && !w.previous.empty()) prev_text = w.previous.back();
      Var prev = enc_->embed(g, prev_text);
      Var a = attn_(g, cur, prev, cur);
      Var e = emotion_(g, emotion_row_of(labels_, w.previous_emotion, no_context_));
      rows.push_back(nn::concat_cols({a, e}));
    }
    Var z = stack_rows(rows);
    return fc2_(g, nn::leaky_relu(fc1_(g, z), dims_.leaky_slope));
  }

  bool uses_previous_emotion() const override { return true; }

 private:
  ModelDims dims_;
  EmotionLabelSet labels_;
  bool no_context_;
  std::shared_ptr<SentenceEncoder> enc_;
  MultiHeadAttention attn_;
  Embedding emotion_;
  Linear fc1_, fc2_;
};

// The whole preceding conversation joined into one history text, run through
// a normalized FFN; attention between the current utterance and the history;
// previous emotion embedding; three-layer classifier with BatchNorm after
// the first layer. Forwards batch all windows so BatchNorm sees real batch
// statistics in train mode.
class FullHistoryArch final : public ArchModel {
 public:
  FullHistoryArch(ParamRegistry& reg, const ModelDims& dims, const EmotionLabelSet& labels,
                  std::shared_ptr<SentenceEncoder> enc, Rng& rng)
      : dims_(dims),
        labels_(labels),
        enc_(std::move(enc)),
        ffn1_(reg, "fh.ffn1", dims.d_enc, dims.fh_ffn_hidden, ParamGroup::main, rng),
        ffn_bn_(reg, "fh.ffn_bn", dims.fh_ffn_hidden),
        ffn2_(reg, "fh.ffn2", dims.fh_ffn_hidden, dims.fh_ffn_out, ParamGroup::main, rng),
        attn_(reg, "fh.attn", dims.d_enc, dims.heads, ParamGroup::main, rng),
        emotion_(reg, "fh.emotion", labels.size() + 1, dims.emotion_dim, ParamGroup::main, rng),
        cls1_(reg, "fh.cls1", dims.fh_ffn_out + dims.d_enc + dims.emotion_dim, dims.fh_cls_h1,
              ParamGroup::main, rng),
        cls_bn_(reg, "fh.cls_bn", dims.fh_cls_h1),
        cls2_(reg, "fh.cls2", dims.fh_cls_h1, dims.fh_cls_h2, ParamGroup::main, rng),
        cls3_(reg, "fh.cls3", dims.fh_cls_h2, labels.size(), ParamGroup::main, rng) {}

  Var logits(Graph& g, const std::vector<ContextWindow>& batch, Mode mode, Rng& rng) override {
    std::vector<Var> hist_rows, attn_rows, emo_rows;
    for (const ContextWindow& w : batch) {
      Var cur = enc_->embed(g, w.current);
      Var hist = enc_->embed(g, join(w.previous, " "));
      hist_rows.push_back(hist);
      attn_rows.push_back(attn_(g, cur, hist, cur));
      emo_rows.push_back(emotion_(g, emotion_row_of(labels_, w.previous_emotion, false)));
    }
    Var h = ffn1_(g, stack_rows(hist_rows));
    h = nn::leaky_relu(ffn_bn_(g, h, mode), dims_.leaky_slope);
    h = ffn2_(g, nn::dropout(h, dims_.dropout, mode, rng));
    Var z = nn::concat_cols({h, stack_rows(attn_rows), stack_rows(emo_rows)});
    Var c = cls1_(g, z);
    c = nn::leaky_relu(cls_bn_(g, c, mode), dims_.leaky_slope);
    c = cls2_(g, nn::dropout(c, dims_.dropout, mode, rng));
    c = nn::dropout(nn::relu(c), dims_.dropout, mode, rng);
    return cls3_(g, c);
  }

  bool uses_previous_emotion() const override { return true; }

 private:
  ModelDims dims_;
  EmotionLabelSet labels_;
  std::shared_ptr<SentenceEncoder> enc_;
  Linear ffn1_;
  BatchNorm1d ffn_bn_;
  Linear ffn2_;
  MultiHeadAttention attn_;
  Embedding emotion_;
  Linear cls1_;
  BatchNorm1d cls_bn_;
  Linear cls2_, cls3_;
};

// A short window of utterance encodings (previous turns, current, next) runs
// through two GRU layers; self-attention over the two final states; the
// current and next encodings come in again through a shared projection. No
// emotion input, so predictions depend on text alone.
class ContextGruArch final : public ArchModel {
 public:
  ContextGruArch(ParamRegistry& reg, const ModelDims& dims, const EmotionLabelSet& labels,
                 std::shared_ptr<SentenceEncoder> enc, Rng& rng)
      : dims_(dims),
        enc_(std::move(enc)),
        gru_(reg, "gru.stack", dims.d_enc, dims.gru_hidden, dims.dropout, ParamGroup::main, rng),
        attn_(reg, "gru.attn", dims.gru_hidden, dims.heads, ParamGroup::main, rng),
        proj_(reg, "gru.proj", dims.d_enc, dims.gru_hidden, ParamGroup::main, rng),
        cls1_(reg, "gru.cls1", 5 * dims.gru_hidden, dims.gru_cls_hidden, ParamGroup::main, rng),
        cls2_(reg, "gru.cls2", dims.gru_cls_hidden, labels.size(), ParamGroup::main, rng) {}

  Var logits(Graph& g, const std::vector<ContextWindow>& batch, Mode mode, Rng& rng) override {
    std::vector<Var> rows;
    for (const ContextWindow& w : batch) {
      Var cur = enc_->embed(g, w.current);
      Var nxt = enc_->embed(g, w.next ? *w.next : std::string());
      std::vector<Var> seq;
      for (const std::string& p : w.previous) seq.push_back(enc_->embed(g, p));
      seq.push_back(cur);
      if (dims_.gru_includes_next) seq.push_back(nxt);
      GruStack::Out out = gru_.run(g, stack_rows(seq), mode, rng);
      Var states = nn::concat_rows({out.final_l1, out.final_l2});
      Var sa = attn_(g, states, states, states);
      Var flat = nn::concat_cols({nn::row(sa, 0), nn::row(sa, 1)});
      Var pc = nn::dropout(proj_(g, cur), dims_.dropout, mode, rng);
      Var pn = nn::dropout(proj_(g, nxt), dims_.dropout, mode, rng);
      rows.push_back(nn::concat_cols({out.final_l2, flat, pc, pn}));
    }
    Var h = nn::dropout(cls1_(g, stack_rows(rows)), dims_.dropout, mode, rng);
    return cls2_(g, nn::leaky_relu(h, dims_.leaky_slope));
  }

  bool uses_previous_emotion() const override { return false; }

 private:
  ModelDims dims_;
  std::shared_ptr<SentenceEncoder> enc_;
  GruStack gru_;
  MultiHeadAttention attn_;
  Linear proj_;
  Linear cls1_, cls2_;
};

json dims_to_json(const ModelDims& d) {
  return json{{"d_enc", d.d_enc},
              {"emotion_dim", d.emotion_dim},
              {"heads", d.heads},
              {"sh_hidden", d.sh_hidden},
              {"fh_ffn_hidden", d.fh_ffn_hidden},
              {"fh_ffn_out", d.fh_ffn_out},
              {"fh_cls_h1", d.fh_cls_h1},
              {"fh_cls_h2", d.fh_cls_h2},
              {"gru_hidden", d.gru_hidden},
              {"gru_window", d.gru_window},
              {"gru_cls_hidden", d.gru_cls_hidden},
              {"gru_includes_next", d.gru_includes_next},
              {"dropout", d.dropout},
              {"leaky_slope", d.leaky_slope}};
}

const json& need(const json& j, const char* key, const std::string& origin) {
  auto it = j.find(key);
  if (it == j.end()) throw DataError(origin + ": missing key \"" + std::string(key) + "\"");
  return *it;
}

template <typename T>
T get_as(const json& j, const char* key, const std::string& origin) {
  try {
    return need(j, key, origin).get<T>();
  } catch (const json::exception& e) {
    throw DataError(origin + ": bad value for \"" + std::string(key) + "\": " + e.what());
  }
}

ModelDims dims_from_json(const json& j, const std::string& origin) {
  ModelDims d;
  d.d_enc = get_as<int>(j, "d_enc", origin);
  d.emotion_dim = get_as<int>(j, "emotion_dim", origin);
  d.heads = get_as<int>(j, "heads", origin);
  d.sh_hidden = get_as<int>(j, "sh_hidden", origin);
  d.fh_ffn_hidden = get_as<int>(j, "fh_ffn_hidden", origin);
  d.fh_ffn_out = get_as<int>(j, "fh_ffn_out", origin);
  d.fh_cls_h1 = get_as<int>(j, "fh_cls_h1", origin);
  d.fh_cls_h2 = get_as<int>(j, "fh_cls_h2", origin);
  d.gru_hidden = get_as<int>(j, "gru_hidden", origin);
  d.gru_window = get_as<int>(j, "gru_window", origin);
  d.gru_cls_hidden = get_as<int>(j, "gru_cls_hidden", origin);
  d.gru_includes_next = get_as<bool>(j, "gru_includes_next", origin);
  d.dropout = get_as<double>(j, "dropout", origin);
  d.leaky_slope = get_as<double>(j, "leaky_slope", origin);
  return d;
}

std::vector<double> softmax_vec(const Tensor& logits, int row) {
  double mx = logits.at(row, 0);
  for (int c = 1; c < logits.cols; ++c) mx = std::max(mx, logits.at(row, c));
  std::vector<double> p(size_t(logits.cols));
  double z = 0.0;
  for (int c = 0; c < logits.cols; ++c) {
    p[size_t(c)] = std::exp(logits.at(row, c) - mx);
    z += p[size_t(c)];
  }
  for (double& v : p) v /= z;
  return p;
}

int argmax(const std::vector<double>& v) {
  int best = 0;
  for (size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[size_t(best)]) best = int(i);
  return best;
}

}  // namespace

const char* kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::simple_history: return "simple_history";
    case ModelKind::simple_history_aug: return "simple_history_aug";
    case ModelKind::full_history: return "full_history";
    case ModelKind::context_gru: return "context_gru";
  }
  throw DataError("invalid model kind value");
}

ModelKind kind_from_name(const std::string& s) {
  if (s == "simple_history") return ModelKind::simple_history;
  if (s == "simple_history_aug") return ModelKind::simple_history_aug;
  if (s == "full_history") return ModelKind::full_history;
  if (s == "context_gru") return ModelKind::context_gru;
  throw DataError("unknown model kind: " + s);
}

ModelDims ModelDims::desk() {
  ModelDims d;
  d.d_enc = 32;
  d.sh_hidden = 64;
  d.fh_ffn_hidden = 32;
  d.fh_ffn_out = 16;
  d.fh_cls_h1 = 64;
  d.fh_cls_h2 = 32;
  d.gru_hidden = 32;
  d.gru_cls_hidden = 64;
  return d;
}

WindowSpec window_spec(ModelKind kind, const ModelDims& dims, bool no_context) {
  switch (kind) {
    case ModelKind::simple_history:
    case ModelKind::simple_history_aug:
      return {no_context ? 0 : 1, false};
    case ModelKind::full_history:
      return {corpus::kUnboundedPrev, false};
    case ModelKind::context_gru:
      return {dims.gru_window, true};
  }
  throw DataError("invalid model kind value");
}

ModelBundle ModelBundle::create(ModelKind kind, const ModelDims& dims,
                                const EmotionLabelSet& labels, const EncoderSpec& enc,
                                uint64_t seed, bool no_context, bool lenient) {
  if (no_context &&
      (kind == ModelKind::full_history || kind == ModelKind::context_gru))
    throw DataError(std::string("the no-context setting applies only to ") +
                    kind_name(ModelKind::simple_history) + " kinds, not " + kind_name(kind));
  ModelBundle m;
  m.kind = kind;
  m.dims = dims;
  m.labels = labels;
  m.encoder_spec = enc;
  m.seed = seed;
  m.no_context = no_context;

  if (enc.type == "hashed") {
    HashedEncoderConfig cfg;
    cfg.dim = enc.dim;
    cfg.vocab_hash_dim = enc.vocab_hash_dim;
    cfg.seed = enc.seed;
    m.encoder = std::make_shared<HashedProjectionEncoder>(cfg);
  } else if (enc.type == "precomputed") {
    m.encoder = encoder::load_precomputed(enc.path, lenient);
  } else {
    throw DataError("unknown encoder type: " + enc.type);
  }
  if (m.encoder->dim() != dims.d_enc)
    throw DataError("encoder dimension " + std::to_string(m.encoder->dim()) +
                    " does not match the model width " + std::to_string(dims.d_enc));

  m.encoder->register_params(m.registry);
  Rng rng(seed);
  switch (kind) {
    case ModelKind::simple_history:
    case ModelKind::simple_history_aug:
      m.arch = std::make_unique<SimpleHistoryArch>(m.registry, dims, labels, no_context,
                                                   m.encoder, rng);
      break;
    case ModelKind::full_history:
      m.arch = std::make_unique<FullHistoryArch>(m.registry, dims, labels, m.encoder, rng);
      break;
    case ModelKind::context_gru:
      m.arch = std::make_unique<ContextGruArch>(m.registry, dims, labels, m.encoder, rng);
      break;
  }
  return m;
}

void ModelBundle::save(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  json j;
  j["format"] = "erckit-model";
  j["version"] = 1;
  j["kind"] = kind_name(kind);
  j["no_context"] = no_context;
  j["seed"] = seed;
  j["labels"] = labels.names();
  j["dims"] = dims_to_json(dims);
  j["encoder"] = json{{"type", encoder_spec.type},
                      {"dim", encoder_spec.dim},
                      {"vocab_hash_dim", encoder_spec.vocab_hash_dim},
                      {"seed", encoder_spec.seed},
                      {"path", encoder_spec.path}};
  write_text_file((std::filesystem::path(dir) / "model.json").string(), j.dump(2) + "\n");
  nn::save_checkpoint(registry, (std::filesystem::path(dir) / "weights.json").string());
}

ModelBundle ModelBundle::load(const std::string& dir, bool lenient) {
  std::string origin = (std::filesystem::path(dir) / "model.json").string();
  json j;
  try {
    j = json::parse(read_text_file(origin));
  } catch (const json::exception& e) {
    throw DataError(origin + ": " + e.what());
  }
  if (get_as<std::string>(j, "format", origin) != "erckit-model")
    throw DataError(origin + ": not a model description");
  if (get_as<int>(j, "version", origin) != 1)
    throw DataError(origin + ": unsupported version");

  ModelKind kind = kind_from_name(get_as<std::string>(j, "kind", origin));
  bool no_context = get_as<bool>(j, "no_context", origin);
  uint64_t seed = get_as<uint64_t>(j, "seed", origin);
  EmotionLabelSet labels(get_as<std::vector<std::string>>(j, "labels", origin));
  ModelDims dims = dims_from_json(need(j, "dims", origin), origin);

  const json& ej = need(j, "encoder", origin);
  EncoderSpec enc;
  enc.type = get_as<std::string>(ej, "type", origin);
  enc.dim = get_as<int>(ej, "dim", origin);
  enc.vocab_hash_dim = get_as<int>(ej, "vocab_hash_dim", origin);
  enc.seed = get_as<uint64_t>(ej, "seed", origin);
  enc.path = get_as<std::string>(ej, "path", origin);

  ModelBundle m = create(kind, dims, labels, enc, seed, no_context, lenient);
  nn::load_checkpoint(m.registry, (std::filesystem::path(dir) / "weights.json").string());
  return m;
}

int ModelBundle::emotion_row(const std::optional<std::string>& previous_emotion) const {
  return emotion_row_of(labels, previous_emotion, no_context);
}

Prediction predict_window(ModelBundle& m, const ContextWindow& w) {
  Graph g;
  Rng rng(0);  // eval mode draws nothing
  Tensor logits = m.arch->logits(g, {w}, Mode::eval, rng).value();
  Prediction p;
  p.cid = w.cid;
  p.index = w.index;
  p.probs = softmax_vec(logits, 0);
  p.label = argmax(p.probs);
  return p;
}

std::vector<Prediction> predict_conversation(
    ModelBundle& m, const Conversation& conv,
    const std::function<std::optional<int>(int utterance_index)>& override_label) {
  WindowSpec spec = window_spec(m.kind, m.dims, m.no_context);
  std::vector<ContextWindow> windows = corpus::make_windows(conv, spec.w_prev, spec.use_next);
  std::vector<Prediction> out;
  std::optional<std::string> chained;
  for (ContextWindow& w : windows) {
    if (w.synthetic) continue;
    // the model sees its own previous prediction, never the gold label
    w.previous_emotion = chained;
    Prediction p = predict_window(m, w);
    if (override_label) {
      if (std::optional<int> forced = override_label(w.index)) {
        if (*forced < 0 || *forced >= m.labels.size())
          throw DataError("forced label index " + std::to_string(*forced) + " is out of range");
        p.label = *forced;
      }
    }
    chained = m.labels.name(p.label);
    out.push_back(std::move(p));
  }
  return out;
}

Prediction ensemble_vote(const std::vector<std::pair<ModelKind, Prediction>>& members,
                         const std::vector<ModelKind>& priority) {
  if (members.size() != 4)
    throw DataError("ensemble vote needs exactly 4 members, got " +
                    std::to_string(members.size()));
  const Prediction& first = members[0].second;
  size_t k = first.probs.size();
  if (k == 0) throw DataError("ensemble vote members carry no probabilities");
  for (const auto& [kind, p] : members) {
    if (p.probs.size() != k)
      throw DataError("ensemble vote members disagree on the number of labels");
    if (p.label < 0 || size_t(p.label) >= k)
      throw DataError("ensemble vote member label " + std::to_string(p.label) +
                      " is out of range");
    if (p.cid != first.cid || p.index != first.index)
      throw DataError("ensemble vote members refer to different utterances");
  }

  std::vector<int> count(k, 0);
  for (const auto& [kind, p] : members) ++count[size_t(p.label)];
  int max_count = *std::max_element(count.begin(), count.end());

  std::vector<double> mean(k, 0.0);
  for (const auto& [kind, p] : members)
    for (size_t c = 0; c < k; ++c) mean[c] += p.probs[c];
  for (double& v : mean) v /= 4.0;

  int label = -1;
  int tied = 0;
  for (size_t c = 0; c < k; ++c)
    if (count[c] == max_count) {
      ++tied;
      label = int(c);
    }
  if (tied > 1) {
    // highest mean probability among the tied labels
    double best = -1.0;
    for (size_t c = 0; c < k; ++c)
      if (count[c] == max_count && mean[c] > best) best = mean[c];
    std::vector<char> best_set(k, 0);
    int n_best = 0;
    label = -1;
    for (size_t c = 0; c < k; ++c)
      if (count[c] == max_count && mean[c] == best) {
        best_set[c] = 1;
        ++n_best;
        if (label < 0) label = int(c);
      }
    if (n_best > 1) {
      // still tied: the first kind in priority order whose member voted for
      // one of the remaining labels decides
      label = -1;
      for (ModelKind pk : priority) {
        for (const auto& [kind, p] : members)
          if (kind == pk && best_set[size_t(p.label)]) {
            label = p.label;
            break;
          }
        if (label >= 0) break;
      }
      if (label < 0)
        for (const auto& [kind, p] : members)
          if (best_set[size_t(p.label)]) {
            label = p.label;
            break;
          }
    }
  }

  Prediction out;
  out.cid = first.cid;
  out.index = first.index;
  out.label = label;
  double z = 0.0;
  for (double v : mean) z += v;
  out.probs.resize(k);
  for (size_t c = 0; c < k; ++c) out.probs[c] = mean[c] / z;
  for (const auto& [kind, p] : members) out.votes.emplace_back(kind, p.label);
  return out;
}

std::vector<Prediction> ensemble_predict_conversation(Ensemble& e, const Conversation& conv) {
  if (e.members.size() != 4)
    throw DataError("an ensemble needs exactly 4 members, got " +
                    std::to_string(e.members.size()));
  for (const ModelBundle& m : e.members)
    if (!(m.labels == e.members[0].labels))
      throw DataError("ensemble members disagree on the label inventory");

  std::vector<std::vector<Prediction>> per_member;
  per_member.reserve(4);
  for (ModelBundle& m : e.members) per_member.push_back(predict_conversation(m, conv));
  for (const auto& preds : per_member)
    if (preds.size() != per_member[0].size())
      throw DataError("ensemble members produced different prediction counts");

  std::vector<Prediction> out;
  for (size_t i = 0; i < per_member[0].size(); ++i) {
    std::vector<std::pair<ModelKind, Prediction>> votes;
    for (size_t j = 0; j < 4; ++j) votes.emplace_back(e.members[j].kind, per_member[j][i]);
    out.push_back(ensemble_vote(votes, e.priority));
  }
  return out;
}

}  // namespace erc::models
