#include "erckit/corpus.hpp"

#include <json.hpp>

#include <algorithm>
#include <set>
#include <sstream>
#include <unordered_map>

namespace erc::corpus {

using json = nlohmann::ordered_json;

EmotionLabelSet::EmotionLabelSet(std::vector<std::string> labels) : labels_(std::move(labels)) {
  if (labels_.empty()) throw DataError("label inventory must not be empty");
  std::set<std::string> seen;
  for (const std::string& l : labels_) {
    if (l == kStartSentinel) throw DataError("label inventory may not contain the start sentinel");
    if (!seen.insert(l).second) throw DataError("duplicate label: " + l);
  }
}

const std::string& EmotionLabelSet::name(int index) const {
  if (index < 0 || index >= size()) throw DataError("label index out of range");
  return labels_[size_t(index)];
}

int EmotionLabelSet::index(const std::string& label) const {
  if (auto i = find(label)) return *i;
  throw DataError("unknown label: " + label);
}

std::optional<int> EmotionLabelSet::find(const std::string& label) const {
  auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) return std::nullopt;
  return int(it - labels_.begin());
}

size_t Corpus::utterance_count() const {
  size_t n = 0;
  for (const Conversation& c : conversations) n += c.utterances.size();
  return n;
}

namespace {

[[noreturn]] void fail(const std::string& origin, int line, const std::string& msg) {
  throw DataError(origin + ": line " + std::to_string(line) + ": " + msg);
}

std::optional<std::string> opt_string(const json& j, const char* key, const std::string& origin,
                                      int line) {
  auto it = j.find(key);
  if (it == j.end()) return std::nullopt;
  const auto& v = *it;
  if (v.is_null()) return std::nullopt;
  if (!v.is_string()) fail(origin, line, std::string(key) + " must be a string or null");
  return v.get<std::string>();
}

}  // namespace

Corpus parse_corpus(const std::string& content, const std::string& origin, bool lenient,
                    const std::optional<std::vector<std::string>>& labels_override) {
  static const std::set<std::string> known_keys = {
      "cid", "index", "speaker", "text_raw", "text_en", "gold", "synthetic", "paraphrase_of"};

  Corpus corpus;
  std::optional<std::vector<std::string>> header_labels;
  bool any_record = false;

  std::vector<Conversation>& convs = corpus.conversations;
  std::unordered_map<std::string, size_t> conv_pos;
  std::string active_cid;

  std::istringstream in(content);
  std::string line;
  int lineno = 0;
  // Records are validated structurally first; gold labels are checked against
  // the final inventory in a second pass (the override may arrive later than
  // the header would).
  std::vector<std::pair<int, std::string>> gold_sites;

  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;

    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      fail(origin, lineno, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) fail(origin, lineno, "each line must be a JSON object");

    if (j.contains("labels")) {
      if (any_record || header_labels)
        fail(origin, lineno, "labels header must be the first line and appear once");
      if (!lenient)
        for (auto it = j.begin(); it != j.end(); ++it)
          if (it.key() != "labels") fail(origin, lineno, "unknown key in header: " + it.key());
      std::vector<std::string> names;
      try {
        names = j.at("labels").get<std::vector<std::string>>();
      } catch (const json::exception&) {
        fail(origin, lineno, "labels must be an array of strings");
      }
      try {
        header_labels = names;
        EmotionLabelSet check(names);  // validates now so the error names the line
      } catch (const DataError& e) {
        fail(origin, lineno, e.what());
      }
      continue;
    }

    any_record = true;
    if (!lenient)
      for (auto it = j.begin(); it != j.end(); ++it)
        if (!known_keys.count(it.key())) fail(origin, lineno, "unknown key: " + it.key());

    Utterance u;
    try {
      const auto& cid = j.at("cid");
      if (!cid.is_string()) fail(origin, lineno, "cid must be a string");
      u.cid = cid.get<std::string>();
      const auto& idx = j.at("index");
      if (!idx.is_number_integer()) fail(origin, lineno, "index must be an integer");
      u.index = idx.get<int>();
      const auto& raw = j.at("text_raw");
      if (!raw.is_string()) fail(origin, lineno, "text_raw must be a string");
      u.text_raw = raw.get<std::string>();
      u.speaker = opt_string(j, "speaker", origin, lineno);
      u.text_en = opt_string(j, "text_en", origin, lineno);
      u.gold = opt_string(j, "gold", origin, lineno);
      if (j.contains("synthetic")) {
        if (!j["synthetic"].is_boolean()) fail(origin, lineno, "synthetic must be a boolean");
        u.synthetic = j["synthetic"].get<bool>();
      }
      if (j.contains("paraphrase_of")) {
        if (!j["paraphrase_of"].is_number_integer())
          fail(origin, lineno, "paraphrase_of must be an integer");
        u.paraphrase_of = j["paraphrase_of"].get<int>();
      }
    } catch (const json::exception& e) {
      fail(origin, lineno, std::string("missing or malformed key: ") + e.what());
    }

    if (u.synthetic && !u.paraphrase_of)
      fail(origin, lineno, "synthetic utterance missing paraphrase_of");
    if (!u.synthetic && u.paraphrase_of)
      fail(origin, lineno, "paraphrase_of is only valid on synthetic utterances");
    if (u.gold) {
      if (*u.gold == kStartSentinel)
        fail(origin, lineno, "gold may not be the start sentinel");
      gold_sites.emplace_back(lineno, *u.gold);
    }

    if (u.cid != active_cid) {
      if (conv_pos.count(u.cid))
        fail(origin, lineno, "conversation " + u.cid + " resumes after another began");
      conv_pos[u.cid] = convs.size();
      convs.push_back(Conversation{u.cid, {}});
      active_cid = u.cid;
    }
    Conversation& conv = convs[conv_pos[u.cid]];
    int expected = int(conv.utterances.size());
    if (u.index != expected)
      fail(origin, lineno,
           "index " + std::to_string(u.index) + " out of order (expected " +
               std::to_string(expected) + ")");
    if (!conv.utterances.empty() && conv.utterances.back().synthetic && !u.synthetic)
      fail(origin, lineno, "non-synthetic utterance after synthetic ones");
    if (u.synthetic) {
      int origin_idx = *u.paraphrase_of;
      bool ok = origin_idx >= 0 && origin_idx < expected &&
                !conv.utterances[size_t(origin_idx)].synthetic;
      if (!ok)
        fail(origin, lineno,
             "paraphrase_of " + std::to_string(origin_idx) + " is not an earlier real utterance");
    }
    conv.utterances.push_back(std::move(u));
  }

  if (labels_override) {
    corpus.labels = EmotionLabelSet(*labels_override);
    corpus.labels_from_header = false;
  } else if (header_labels) {
    corpus.labels = EmotionLabelSet(*header_labels);
    corpus.labels_from_header = true;
  }

  for (const auto& [ln, gold] : gold_sites)
    if (!corpus.labels.find(gold)) fail(origin, ln, "unknown gold label: " + gold);

  return corpus;
}

Corpus load_corpus(const std::string& path, bool lenient,
                   const std::optional<std::vector<std::string>>& labels_override) {
  return parse_corpus(read_text_file(path), path, lenient, labels_override);
}

std::string corpus_to_jsonl(const Corpus& c) {
  std::string out;
  if (c.labels_from_header) {
    json h;
    h["labels"] = c.labels.names();
    out += h.dump() + "\n";
  }
  for (const Conversation& conv : c.conversations)
    for (const Utterance& u : conv.utterances) {
      json j;
      j["cid"] = u.cid;
      j["index"] = u.index;
      j["speaker"] = u.speaker ? json(*u.speaker) : json(nullptr);
      j["text_raw"] = u.text_raw;
      j["text_en"] = u.text_en ? json(*u.text_en) : json(nullptr);
      j["gold"] = u.gold ? json(*u.gold) : json(nullptr);
      if (u.synthetic) {
        j["synthetic"] = true;
        j["paraphrase_of"] = *u.paraphrase_of;
      }
      out += j.dump() + "\n";
    }
  return out;
}

void save_corpus(const Corpus& c, const std::string& path) {
  write_text_file(path, corpus_to_jsonl(c));
}

std::vector<ContextWindow> make_windows(const Conversation& conv, int w_prev, bool use_next) {
  if (w_prev < 0) throw DataError("window depth must be non-negative");

  std::vector<size_t> reals;
  for (size_t i = 0; i < conv.utterances.size(); ++i)
    if (!conv.utterances[i].synthetic) reals.push_back(i);

  std::unordered_map<int, ContextWindow> by_index;
  for (size_t p = 0; p < reals.size(); ++p) {
    const Utterance& u = conv.utterances[reals[p]];
    ContextWindow w;
    w.cid = conv.cid;
    w.index = u.index;
    w.current = u.model_text();
    size_t lo = p > size_t(w_prev) ? p - size_t(w_prev) : 0;
    for (size_t q = lo; q < p; ++q)
      w.previous.push_back(conv.utterances[reals[q]].model_text());
    if (use_next)
      w.next = p + 1 < reals.size() ? conv.utterances[reals[p + 1]].model_text() : std::string();
    if (p > 0) w.previous_emotion = conv.utterances[reals[p - 1]].gold;
    w.gold = u.gold;
    by_index[u.index] = w;
  }

  std::vector<ContextWindow> out;
  out.reserve(conv.utterances.size());
  for (const Utterance& u : conv.utterances) {
    if (!u.synthetic) {
      out.push_back(by_index.at(u.index));
      continue;
    }
    auto it = by_index.find(*u.paraphrase_of);
    if (it == by_index.end())
      throw DataError("synthetic utterance " + std::to_string(u.index) +
                      " references missing origin " + std::to_string(*u.paraphrase_of));
    ContextWindow w = it->second;
    w.index = u.index;
    w.current = u.model_text();
    w.gold = u.gold;
    w.synthetic = true;
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace erc::corpus
