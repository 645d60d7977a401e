#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "erckit/corpus.hpp"
#include "erckit/encoder.hpp"
#include "erckit/layers.hpp"

namespace erc::models {

using corpus::ContextWindow;
using corpus::Conversation;
using corpus::EmotionLabelSet;
using encoder::SentenceEncoder;
using nn::Graph;
using nn::Mode;
using nn::ParamRegistry;
using nn::Var;

enum class ModelKind { simple_history, simple_history_aug, full_history, context_gru };

const char* kind_name(ModelKind k);
ModelKind kind_from_name(const std::string& s);

// Default member priority for ensemble tie-breaks.
inline const std::vector<ModelKind> kDefaultPriority = {
    ModelKind::context_gru, ModelKind::simple_history, ModelKind::full_history,
    ModelKind::simple_history_aug};

struct ModelDims {
  int d_enc = 768;
  int emotion_dim = 50;
  int heads = 8;
  int sh_hidden = 256;      // simple-history classifier hidden
  int fh_ffn_hidden = 256;  // full-history FFN hidden
  int fh_ffn_out = 128;
  int fh_cls_h1 = 512;
  int fh_cls_h2 = 128;
  int gru_hidden = 256;     // also the shared projection width
  int gru_window = 3;
  int gru_cls_hidden = 256;
  bool gru_includes_next = true;  // feed the next sentence into the GRU input
  double dropout = 0.25;
  double leaky_slope = 0.01;

  // Small configuration for tests: d_enc 32, hidden sizes scaled down.
  static ModelDims desk();
};

// How much context a model kind consumes.
struct WindowSpec {
  int w_prev = 0;
  bool use_next = false;
};
WindowSpec window_spec(ModelKind kind, const ModelDims& dims, bool no_context);

struct Prediction {
  std::string cid;
  int index = 0;
  int label = 0;
  std::vector<double> probs;
  // member kind -> label index, in member order; empty for single models
  std::vector<std::pair<ModelKind, int>> votes;
};

// One architecture. Forward passes batch all windows through the shared
// classifier head so batch statistics (BatchNorm) see the whole batch.
class ArchModel {
 public:
  virtual ~ArchModel() = default;
  // [batch, |labels|] pre-softmax scores.
  virtual Var logits(Graph& g, const std::vector<ContextWindow>& batch, Mode mode,
                     Rng& dropout_rng) = 0;
  virtual bool uses_previous_emotion() const = 0;
};

struct EncoderSpec {
  std::string type = "hashed";  // "hashed" | "precomputed"
  int dim = 768;
  int vocab_hash_dim = 4096;
  uint64_t seed = 1;
  std::string path;  // precomputed table (JSONL)
};

// A trained or trainable model: label inventory, dims, encoder, architecture,
// and the registry that orders every parameter and buffer deterministically
// (encoder parameters first, then architecture parameters).
struct ModelBundle {
  ModelKind kind = ModelKind::simple_history;
  ModelDims dims;
  EmotionLabelSet labels;
  EncoderSpec encoder_spec;
  uint64_t seed = 0;
  bool no_context = false;

  std::shared_ptr<SentenceEncoder> encoder;
  std::unique_ptr<ArchModel> arch;
  ParamRegistry registry;

  ModelBundle() = default;
  ModelBundle(ModelBundle&&) = default;
  ModelBundle& operator=(ModelBundle&&) = default;

  static ModelBundle create(ModelKind kind, const ModelDims& dims, const EmotionLabelSet& labels,
                            const EncoderSpec& enc, uint64_t seed, bool no_context = false,
                            bool lenient = false);

  void save(const std::string& dir) const;
  static ModelBundle load(const std::string& dir, bool lenient = false);

  // Row in the emotion embedding table for a window's previous emotion:
  // labels map to their class index, the conversation-start sentinel to the
  // extra final row.
  int emotion_row(const std::optional<std::string>& previous_emotion) const;
};

// Softmax over `logits` for a single window; fills cid/index from `w`.
Prediction predict_window(ModelBundle& m, const ContextWindow& w);

// Sequential inference over one conversation (synthetic records are
// excluded). For kinds with an emotion input the predicted label of
// utterance i-1 replaces the window's previous_emotion of utterance i;
// gold labels are never consulted. `override_label` (test hook) forces the
// recorded prediction at given utterance indices before chaining continues.
std::vector<Prediction> predict_conversation(
    ModelBundle& m, const Conversation& conv,
    const std::function<std::optional<int>(int utterance_index)>& override_label = nullptr);

// Majority vote over exactly 4 member predictions for one utterance.
// Ties: highest mean probability of the tied label across all members, then
// the tied label voted by the kind earliest in `priority`. Output probs are
// the renormalized member mean; votes records every member's label.
Prediction ensemble_vote(const std::vector<std::pair<ModelKind, Prediction>>& members,
                         const std::vector<ModelKind>& priority);

struct Ensemble {
  std::vector<ModelBundle> members;  // exactly 4, matching label sets
  std::vector<ModelKind> priority = kDefaultPriority;
};

std::vector<Prediction> ensemble_predict_conversation(Ensemble& e, const Conversation& conv);

}  // namespace erc::models
