#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "erckit/common.hpp"
#include "erckit/corpus.hpp"

namespace erc::preprocess {

// Stage 1 of the code-mixed pipeline: script conversion.
struct TransliterationProvider {
  virtual ~TransliterationProvider() = default;
  virtual std::string name() const = 0;
  virtual std::string transliterate(const std::string& text) = 0;
  virtual int max_parallelism() const { return 1; }
};

// Stage 2: cross-lingual translation into English.
struct TranslationProvider {
  virtual ~TranslationProvider() = default;
  virtual std::string name() const = 0;
  virtual std::string translate(const std::string& text) = 0;
  virtual int max_parallelism() const { return 1; }
};

struct ParaphraseProvider {
  virtual ~ParaphraseProvider() = default;
  virtual std::string name() const = 0;
  // Up to `k` distinct paraphrases, none equal to the input. May return
  // fewer, including zero.
  virtual std::vector<std::string> paraphrases(const std::string& text, int k) = 0;
};

struct IdentityTransliterator final : TransliterationProvider {
  std::string name() const override { return "identity"; }
  std::string transliterate(const std::string& text) override { return text; }
};

struct IdentityTranslator final : TranslationProvider {
  std::string name() const override { return "identity"; }
  std::string translate(const std::string& text) override { return text; }
};

// word -> replacement lookup applied token-wise (whitespace tokens; unknown
// words pass through). TSV lines: source<TAB>target.
std::map<std::string, std::string> load_lexicon_tsv(const std::string& path);

struct DictionaryTransliterator final : TransliterationProvider {
  std::map<std::string, std::string> lexicon;
  std::string label;
  DictionaryTransliterator(std::map<std::string, std::string> lex, std::string label = "dict");
  std::string name() const override { return label; }
  std::string transliterate(const std::string& text) override;
};

struct DictionaryTranslator final : TranslationProvider {
  std::map<std::string, std::string> lexicon;
  std::string label;
  DictionaryTranslator(std::map<std::string, std::string> lex, std::string label = "dict");
  std::string name() const override { return label; }
  std::string translate(const std::string& text) override;
};

// Deterministic offline paraphraser: single- and double-position synonym
// substitutions in position order, then comma-clause rotation, deduplicated,
// input excluded. No randomness.
struct RuleBasedParaphraser final : ParaphraseProvider {
  std::map<std::string, std::vector<std::string>> synonyms;

  RuleBasedParaphraser();  // built-in table
  explicit RuleBasedParaphraser(std::map<std::string, std::vector<std::string>> table);

  std::string name() const override { return "rule"; }
  std::vector<std::string> paraphrases(const std::string& text, int k) override;
};

std::map<std::string, std::vector<std::string>> load_synonyms_tsv(const std::string& path);

// Content-addressed result cache keyed by (provider name, config hash, input
// text). Always memoizes in memory; persists to `dir` when non-empty.
class ProviderCache {
 public:
  ProviderCache() = default;
  explicit ProviderCache(std::string dir);

  std::optional<std::string> get(const std::string& provider, uint64_t config_hash,
                                 const std::string& input);
  void put(const std::string& provider, uint64_t config_hash, const std::string& input,
           const std::string& output);

 private:
  std::string key(const std::string& provider, uint64_t config_hash,
                  const std::string& input) const;
  std::string dir_;
  std::map<std::string, std::string> mem_;
};

struct TranslateStats {
  size_t translated = 0;
  size_t skipped = 0;   // text_en already present
  size_t failed = 0;    // provider error; text_raw passed through
};

// Fills u.text_en = translate(transliterate(text_raw)). Skips utterances
// whose text_en is already set unless `force`. A provider failure logs a
// warning naming the stage and falls back to the raw text.
TranslateStats translate_corpus(corpus::Corpus& c, TransliterationProvider& tl,
                                TranslationProvider& tr, bool force = false,
                                ProviderCache* cache = nullptr,
                                std::vector<std::string>* warnings = nullptr);

struct AugmentStats {
  size_t originals = 0;
  size_t synthesized = 0;
  size_t skipped_no_paraphrases = 0;
};

// For each utterance: request the first 10 paraphrases of its model-visible
// text, sample min(3, n) of them uniformly without replacement, and append
// them to the conversation as synthetic utterances (contiguous indices,
// gold and context copied from the origin). Original records are never
// modified. Runs over non-synthetic records only; augmenting twice is
// refused.
AugmentStats augment_corpus(corpus::Corpus& c, ParaphraseProvider& p, uint64_t seed);

}  // namespace erc::preprocess
