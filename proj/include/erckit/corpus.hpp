#pragma once

#include <optional>
#include <string>
#include <vector>

#include "erckit/common.hpp"

namespace erc::corpus {

// Reserved conversation-start marker; never a valid label.
inline const std::string kStartSentinel = "«START»";

inline const std::vector<std::string> kDefaultLabels = {
    "anger", "contempt", "disgust", "fear", "joy", "neutral", "sadness", "surprise"};

// Ordered label inventory. The class index of a label is its position.
class EmotionLabelSet {
 public:
  EmotionLabelSet() : EmotionLabelSet(kDefaultLabels) {}
  explicit EmotionLabelSet(std::vector<std::string> labels);

  int size() const { return int(labels_.size()); }
  const std::string& name(int index) const;
  int index(const std::string& label) const;              // DataError on unknown
  std::optional<int> find(const std::string& label) const;
  const std::vector<std::string>& names() const { return labels_; }

  bool operator==(const EmotionLabelSet& o) const { return labels_ == o.labels_; }

 private:
  std::vector<std::string> labels_;
};

struct Utterance {
  std::string cid;
  int index = 0;
  std::optional<std::string> speaker;
  std::string text_raw;
  std::optional<std::string> text_en;
  std::optional<std::string> gold;
  bool synthetic = false;                  // augmentation output
  std::optional<int> paraphrase_of;       // origin index, set iff synthetic

  // The text models consume: the translated side when present.
  const std::string& model_text() const { return text_en ? *text_en : text_raw; }
};

struct Conversation {
  std::string cid;
  std::vector<Utterance> utterances;  // index == position
};

// One model input. `previous` holds model-visible texts of the (up to w_prev)
// utterances before the current one; `previous_emotion` is nullopt at a
// conversation start (the sentinel) and otherwise the gold label of the
// preceding utterance when available. Synthetic utterances get a copy of
// their origin's context with only the current text swapped.
struct ContextWindow {
  std::string cid;
  int index = 0;
  std::vector<std::string> previous;
  std::string current;
  std::optional<std::string> next;
  std::optional<std::string> previous_emotion;
  std::optional<std::string> gold;
  bool synthetic = false;
};

inline constexpr int kUnboundedPrev = 1 << 29;

// One window per utterance, in index order. Windowing runs over the
// subsequence of non-synthetic utterances; a synthetic utterance receives its
// origin's window with the current text replaced by its own.
std::vector<ContextWindow> make_windows(const Conversation& conv, int w_prev, bool use_next);

struct Corpus {
  EmotionLabelSet labels;
  bool labels_from_header = false;
  std::vector<Conversation> conversations;

  size_t utterance_count() const;
};

// JSONL, one utterance per line:
//   {"cid": str, "index": int, "speaker": str|null, "text_raw": str,
//    "text_en": str|null, "gold": str|null}
// plus "synthetic": true, "paraphrase_of": int on augmentation output.
// An optional first line {"labels": [...]} sets the label inventory.
// Strict mode rejects unknown keys; lenient mode ignores them. Errors carry
// the 1-based line number. `labels_override` wins over the header.
Corpus load_corpus(const std::string& path, bool lenient = false,
                   const std::optional<std::vector<std::string>>& labels_override = std::nullopt);
Corpus parse_corpus(const std::string& content, const std::string& origin, bool lenient = false,
                    const std::optional<std::vector<std::string>>& labels_override = std::nullopt);

std::string corpus_to_jsonl(const Corpus& c);
void save_corpus(const Corpus& c, const std::string& path);

}  // namespace erc::corpus
