#include "erckit/preprocess.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace erc::preprocess {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::vector<std::string> whitespace_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::string map_tokens(const std::map<std::string, std::string>& lexicon,
                       const std::string& text) {
  auto toks = whitespace_tokens(text);
  for (std::string& t : toks) {
    auto it = lexicon.find(t);
    if (it != lexicon.end()) t = it->second;
  }
  return join(toks, " ");
}

}  // namespace

std::map<std::string, std::string> load_lexicon_tsv(const std::string& path) {
  std::map<std::string, std::string> out;
  std::istringstream in(read_text_file(path));
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0)
      throw DataError(path + ": line " + std::to_string(lineno) + ": expected source<TAB>target");
    out[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return out;
}

DictionaryTransliterator::DictionaryTransliterator(std::map<std::string, std::string> lex,
                                                   std::string label_)
    : lexicon(std::move(lex)), label(std::move(label_)) {}

std::string DictionaryTransliterator::transliterate(const std::string& text) {
  return map_tokens(lexicon, text);
}

DictionaryTranslator::DictionaryTranslator(std::map<std::string, std::string> lex,
                                           std::string label_)
    : lexicon(std::move(lex)), label(std::move(label_)) {}

std::string DictionaryTranslator::translate(const std::string& text) {
  return map_tokens(lexicon, text);
}

std::map<std::string, std::vector<std::string>> load_synonyms_tsv(const std::string& path) {
  std::map<std::string, std::vector<std::string>> out;
  std::istringstream in(read_text_file(path));
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0)
      throw DataError(path + ": line " + std::to_string(lineno) +
                      ": expected word<TAB>synonym[,synonym...]");
    std::vector<std::string> syns;
    std::istringstream rest(line.substr(tab + 1));
    std::string s;
    while (std::getline(rest, s, ','))
      if (!s.empty()) syns.push_back(s);
    if (syns.empty())
      throw DataError(path + ": line " + std::to_string(lineno) + ": no synonyms given");
    out[line.substr(0, tab)] = std::move(syns);
  }
  return out;
}

RuleBasedParaphraser::RuleBasedParaphraser()
    : synonyms({
          {"angry", {"mad", "furious"}},
          {"bad", {"awful", "terrible"}},
          {"big", {"huge", "large"}},
          {"fast", {"quick", "rapid"}},
          {"friend", {"buddy", "pal"}},
          {"good", {"great", "fine"}},
          {"happy", {"glad", "cheerful"}},
          {"hate", {"despise", "detest"}},
          {"love", {"adore", "cherish"}},
          {"nice", {"pleasant", "lovely"}},
          {"no", {"nope"}},
          {"okay", {"fine", "alright"}},
          {"really", {"truly", "genuinely"}},
          {"sad", {"unhappy", "gloomy"}},
          {"scared", {"afraid", "frightened"}},
          {"small", {"tiny", "little"}},
          {"sure", {"certain", "definite"}},
          {"very", {"really", "truly"}},
          {"yes", {"yeah", "yep"}},
      }) {}

RuleBasedParaphraser::RuleBasedParaphraser(std::map<std::string, std::vector<std::string>> table)
    : synonyms(std::move(table)) {}

std::vector<std::string> RuleBasedParaphraser::paraphrases(const std::string& text, int k) {
  if (k <= 0) return {};
  auto toks = whitespace_tokens(text);

  std::vector<std::string> out;
  std::vector<std::string> seen = {text};
  auto emit = [&](const std::string& s) {
    if (std::find(seen.begin(), seen.end(), s) != seen.end()) return;
    seen.push_back(s);
    out.push_back(s);
  };

  auto substituted = [&](size_t i, const std::string& s) {
    auto copy = toks;
    copy[i] = s;
    return join(copy, " ");
  };

  // single substitutions, position order
  for (size_t i = 0; i < toks.size(); ++i) {
    auto it = synonyms.find(toks[i]);
    if (it == synonyms.end()) continue;
    for (const std::string& s : it->second) emit(substituted(i, s));
  }
  // double substitutions
  for (size_t i = 0; i < toks.size(); ++i) {
    auto it = synonyms.find(toks[i]);
    if (it == synonyms.end()) continue;
    for (size_t j = i + 1; j < toks.size(); ++j) {
      auto jt = synonyms.find(toks[j]);
      if (jt == synonyms.end()) continue;
      for (const std::string& si : it->second)
        for (const std::string& sj : jt->second) {
          auto copy = toks;
          copy[i] = si;
          copy[j] = sj;
          emit(join(copy, " "));
        }
    }
  }
  // clause rotation around the first comma
  auto comma = text.find(", ");
  if (comma != std::string::npos && comma > 0 && comma + 2 < text.size()) {
    std::string head = text.substr(0, comma), tail = text.substr(comma + 2);
    emit(tail + ", " + head);
  }

  if (int(out.size()) > k) out.resize(size_t(k));
  return out;
}

ProviderCache::ProviderCache(std::string dir) : dir_(std::move(dir)) {
  if (!dir_.empty()) fs::create_directories(dir_);
}

std::string ProviderCache::key(const std::string& provider, uint64_t config_hash,
                               const std::string& input) const {
  std::ostringstream k;
  k << provider << '\x1f' << std::hex << config_hash << '\x1f' << input;
  return k.str();
}

std::optional<std::string> ProviderCache::get(const std::string& provider, uint64_t config_hash,
                                              const std::string& input) {
  std::string k = key(provider, config_hash, input);
  auto it = mem_.find(k);
  if (it != mem_.end()) return it->second;
  if (dir_.empty()) return std::nullopt;

  std::ostringstream name;
  name << std::hex << fnv1a64(k) << ".json";
  fs::path file = fs::path(dir_) / name.str();
  if (!fs::exists(file)) return std::nullopt;
  try {
    json j = json::parse(read_text_file(file.string()));
    if (j.value("key", "") != k) return std::nullopt;  // hash collision
    std::string out = j.at("output").get<std::string>();
    mem_[k] = out;
    return out;
  } catch (const std::exception&) {
    return std::nullopt;  // unreadable entries are treated as misses
  }
}

void ProviderCache::put(const std::string& provider, uint64_t config_hash,
                        const std::string& input, const std::string& output) {
  std::string k = key(provider, config_hash, input);
  mem_[k] = output;
  if (dir_.empty()) return;
  std::ostringstream name;
  name << std::hex << fnv1a64(k) << ".json";
  json j;
  j["key"] = k;
  j["output"] = output;
  write_text_file((fs::path(dir_) / name.str()).string(), j.dump() + "\n");
}

namespace {

// Runs one provider stage with caching; reports failure through `error`.
template <typename CallFn>
std::optional<std::string> run_stage(const std::string& provider, const std::string& input,
                                     ProviderCache* cache, CallFn call, std::string* error) {
  if (cache)
    if (auto hit = cache->get(provider, 0, input)) return hit;
  try {
    std::string out = call(input);
    if (cache) cache->put(provider, 0, input, out);
    return out;
  } catch (const std::exception& e) {
    *error = e.what();
    return std::nullopt;
  }
}

}  // namespace

TranslateStats translate_corpus(corpus::Corpus& c, TransliterationProvider& tl,
                                TranslationProvider& tr, bool force, ProviderCache* cache,
                                std::vector<std::string>* warnings) {
  TranslateStats stats;
  auto warn = [&](const std::string& m) {
    if (warnings) warnings->push_back(m);
  };

  for (corpus::Conversation& conv : c.conversations)
    for (corpus::Utterance& u : conv.utterances) {
      if (u.text_en && !force) {
        ++stats.skipped;
        continue;
      }
      std::string error;
      std::string mid = u.text_raw;
      auto t1 = run_stage(
          tl.name(), u.text_raw, cache, [&](const std::string& s) { return tl.transliterate(s); },
          &error);
      if (t1) {
        mid = *t1;
      } else {
        warn("transliteration provider " + tl.name() + " failed for " + conv.cid + "#" +
             std::to_string(u.index) + ": " + error);
      }
      auto t2 = run_stage(
          tr.name(), mid, cache, [&](const std::string& s) { return tr.translate(s); }, &error);
      if (t2) {
        u.text_en = *t2;
        ++stats.translated;
      } else {
        warn("translation provider " + tr.name() + " failed for " + conv.cid + "#" +
             std::to_string(u.index) + ": " + error);
        u.text_en = u.text_raw;
        ++stats.failed;
      }
    }
  return stats;
}

AugmentStats augment_corpus(corpus::Corpus& c, ParaphraseProvider& p, uint64_t seed) {
  for (const corpus::Conversation& conv : c.conversations)
    for (const corpus::Utterance& u : conv.utterances)
      if (u.synthetic) throw DataError("corpus already contains synthetic utterances");

  AugmentStats stats;
  Rng root(seed);
  for (corpus::Conversation& conv : c.conversations) {
    size_t originals = conv.utterances.size();
    stats.originals += originals;
    int next_index = int(originals);
    for (size_t i = 0; i < originals; ++i) {
      const corpus::Utterance origin = conv.utterances[i];  // copy; vector grows below
      auto candidates = p.paraphrases(origin.model_text(), 10);
      if (candidates.size() > 10) candidates.resize(10);
      if (candidates.empty()) {
        ++stats.skipped_no_paraphrases;
        continue;
      }
      int n = int(candidates.size());
      int m = std::min(3, n);
      Rng rng = root.split(conv.cid + "#" + std::to_string(origin.index));
      std::vector<int> idx(static_cast<size_t>(n));
      for (int j = 0; j < n; ++j) idx[size_t(j)] = j;
      for (int j = 0; j < m; ++j) {
        int swap_with = j + int(rng.uniform_int(uint64_t(n - j)));
        std::swap(idx[size_t(j)], idx[size_t(swap_with)]);
      }
      for (int j = 0; j < m; ++j) {
        corpus::Utterance syn = origin;
        syn.index = next_index++;
        syn.synthetic = true;
        syn.paraphrase_of = origin.index;
        if (origin.text_en)
          syn.text_en = candidates[size_t(idx[size_t(j)])];
        else
          syn.text_raw = candidates[size_t(idx[size_t(j)])];
        conv.utterances.push_back(std::move(syn));
        ++stats.synthesized;
      }
    }
  }
  return stats;
}

}  // namespace erc::preprocess
