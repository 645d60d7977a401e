#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>
#include <vector>

#include "erckit/corpus.hpp"

using namespace erc::corpus;
using erc::DataError;

namespace {

std::string sample_jsonl() {
  return R"({"cid": "d1", "index": 0, "speaker": "A", "text_raw": "kya haal hai", "text_en": "how are you", "gold": "joy"}
{"cid": "d1", "index": 1, "speaker": "B", "text_raw": "sab theek", "text_en": null, "gold": "neutral"}
{"cid": "d2", "index": 0, "speaker": null, "text_raw": "bura laga", "text_en": "that hurt", "gold": "sadness"}
)";
}

Conversation numbered_conv(int n) {
  Conversation c;
  c.cid = "c";
  for (int i = 0; i < n; ++i) {
    Utterance u;
    u.cid = "c";
    u.index = i;
    u.text_raw = "u" + std::to_string(i);
    u.gold = i % 2 == 0 ? "joy" : "anger";
    c.utterances.push_back(u);
  }
  return c;
}

}  // namespace

TEST_CASE("label set indexes by position and rejects unknowns") {
  EmotionLabelSet ls;
  CHECK(ls.size() == 8);
  CHECK(ls.name(0) == "anger");
  CHECK(ls.name(7) == "surprise");
  CHECK(ls.index("joy") == 4);
  CHECK(ls.find("nope") == std::nullopt);
  CHECK_THROWS_AS(ls.index("nope"), DataError);
  CHECK_THROWS_AS(ls.name(8), DataError);
  CHECK_THROWS_AS(EmotionLabelSet({"a", "a"}), DataError);
  CHECK_THROWS_AS(EmotionLabelSet({"a", kStartSentinel}), DataError);
  CHECK_THROWS_AS(EmotionLabelSet(std::vector<std::string>{}), DataError);
}

TEST_CASE("parses well-formed jsonl grouping by conversation") {
  Corpus c = parse_corpus(sample_jsonl(), "test");
  CHECK(c.conversations.size() == 2);
  CHECK(c.utterance_count() == 3);
  CHECK_FALSE(c.labels_from_header);
  CHECK(c.labels.size() == 8);

  const Conversation& d1 = c.conversations[0];
  CHECK(d1.cid == "d1");
  REQUIRE(d1.utterances.size() == 2);
  CHECK(d1.utterances[0].speaker == "A");
  CHECK(d1.utterances[0].text_en == "how are you");
  CHECK(d1.utterances[0].model_text() == "how are you");
  CHECK(d1.utterances[1].text_en == std::nullopt);
  CHECK(d1.utterances[1].model_text() == "sab theek");
  CHECK(d1.utterances[1].gold == "neutral");
  CHECK(c.conversations[1].utterances[0].speaker == std::nullopt);
}

TEST_CASE("header line sets the label inventory and the override wins") {
  std::string text =
      R"({"labels": ["joy", "sadness"]}
{"cid": "x", "index": 0, "speaker": null, "text_raw": "hi", "text_en": null, "gold": "joy"}
)";
  Corpus c = parse_corpus(text, "test");
  CHECK(c.labels_from_header);
  CHECK(c.labels.size() == 2);
  CHECK(c.labels.index("sadness") == 1);

  Corpus o = parse_corpus(text, "test", false, std::vector<std::string>{"joy", "fear", "anger"});
  CHECK(o.labels.size() == 3);
  CHECK_FALSE(o.labels_from_header);
}

TEST_CASE("gold labels outside the inventory are rejected with the line number") {
  std::string text =
      R"({"labels": ["joy", "sadness"]}
{"cid": "x", "index": 0, "speaker": null, "text_raw": "hi", "text_en": null, "gold": "anger"}
)";
  try {
    parse_corpus(text, "test");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    std::string m = e.what();
    CHECK(m.find("line 2") != std::string::npos);
    CHECK(m.find("anger") != std::string::npos);
  }
}

TEST_CASE("strict mode rejects unknown keys; lenient ignores them") {
  std::string text =
      R"({"cid": "x", "index": 0, "speaker": null, "text_raw": "hi", "text_en": null, "gold": null, "bogus": 1}
)";
  try {
    parse_corpus(text, "test");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    std::string m = e.what();
    CHECK(m.find("line 1") != std::string::npos);
    CHECK(m.find("bogus") != std::string::npos);
  }
  Corpus c = parse_corpus(text, "test", true);
  CHECK(c.utterance_count() == 1);
}

TEST_CASE("missing required key, bad json, and wrong types carry line numbers") {
  try {
    parse_corpus(R"({"cid": "x", "index": 0, "text_raw": "hi"}
)",
                 "test");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
  }
  try {
    parse_corpus("{oops\n", "test");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
  }
  try {
    parse_corpus(
        R"({"cid": "x", "index": "zero", "speaker": null, "text_raw": "hi", "text_en": null, "gold": null}
)",
        "test");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
  }
}

TEST_CASE("indices must be contiguous from zero within a conversation") {
  std::string gap =
      R"({"cid": "x", "index": 0, "speaker": null, "text_raw": "a", "text_en": null, "gold": null}
{"cid": "x", "index": 2, "speaker": null, "text_raw": "b", "text_en": null, "gold": null}
)";
  CHECK_THROWS_AS(parse_corpus(gap, "test"), DataError);

  std::string late_restart =
      R"({"cid": "x", "index": 0, "speaker": null, "text_raw": "a", "text_en": null, "gold": null}
{"cid": "y", "index": 0, "speaker": null, "text_raw": "b", "text_en": null, "gold": null}
{"cid": "x", "index": 1, "speaker": null, "text_raw": "c", "text_en": null, "gold": null}
)";
  CHECK_THROWS_AS(parse_corpus(late_restart, "test"), DataError);

  std::string starts_at_one =
      R"({"cid": "x", "index": 1, "speaker": null, "text_raw": "a", "text_en": null, "gold": null}
)";
  CHECK_THROWS_AS(parse_corpus(starts_at_one, "test"), DataError);
}

TEST_CASE("gold may never be the start sentinel") {
  std::string text = std::string(R"({"cid": "x", "index": 0, "speaker": null, "text_raw": "a", )") +
                     R"("text_en": null, "gold": ")" + kStartSentinel + R"("}
)";
  CHECK_THROWS_AS(parse_corpus(text, "test"), DataError);
}

TEST_CASE("round trip through jsonl serialization preserves everything") {
  std::string text =
      R"({"labels": ["joy", "sadness"]}
{"cid": "x", "index": 0, "speaker": "A", "text_raw": "hi", "text_en": "hi", "gold": "joy"}
{"cid": "x", "index": 1, "speaker": null, "text_raw": "ok", "text_en": null, "gold": null}
{"cid": "x", "index": 2, "speaker": null, "text_raw": "ok2", "text_en": "okay", "gold": "sadness", "synthetic": true, "paraphrase_of": 1}
)";
  Corpus c = parse_corpus(text, "test");
  std::string out = corpus_to_jsonl(c);
  Corpus c2 = parse_corpus(out, "round-trip");
  REQUIRE(c2.utterance_count() == 3);
  CHECK(c2.labels == c.labels);
  CHECK(c2.labels_from_header);
  const auto& u = c2.conversations[0].utterances;
  CHECK(u[0].speaker == "A");
  CHECK(u[1].gold == std::nullopt);
  CHECK(u[2].synthetic);
  CHECK(u[2].paraphrase_of == 1);
  CHECK(u[2].text_en == "okay");
  CHECK(corpus_to_jsonl(c2) == out);
}

TEST_CASE("synthetic rows must name an earlier origin utterance") {
  std::string text =
      R"({"cid": "x", "index": 0, "speaker": null, "text_raw": "a", "text_en": null, "gold": null}
{"cid": "x", "index": 1, "speaker": null, "text_raw": "b", "text_en": null, "gold": null, "synthetic": true, "paraphrase_of": 5}
)";
  CHECK_THROWS_AS(parse_corpus(text, "test"), DataError);

  std::string missing_origin =
      R"({"cid": "x", "index": 0, "speaker": null, "text_raw": "a", "text_en": null, "gold": null, "synthetic": true}
)";
  CHECK_THROWS_AS(parse_corpus(missing_origin, "test"), DataError);

  std::string origin_on_real =
      R"({"cid": "x", "index": 0, "speaker": null, "text_raw": "a", "text_en": null, "gold": null, "paraphrase_of": 0}
)";
  CHECK_THROWS_AS(parse_corpus(origin_on_real, "test"), DataError);
}

TEST_CASE("window law: previous depth, sentinel start, and next marker") {
  for (int n : {1, 2, 3, 7}) {
    Conversation conv = numbered_conv(n);

    auto w1 = make_windows(conv, 1, false);
    REQUIRE(int(w1.size()) == n);
    for (int i = 0; i < n; ++i) {
      CHECK(w1[size_t(i)].index == i);
      CHECK(w1[size_t(i)].current == "u" + std::to_string(i));
      CHECK(int(w1[size_t(i)].previous.size()) == (i == 0 ? 0 : 1));
      if (i > 0) CHECK(w1[size_t(i)].previous[0] == "u" + std::to_string(i - 1));
      CHECK(w1[size_t(i)].next == std::nullopt);
      if (i == 0)
        CHECK(w1[size_t(i)].previous_emotion == std::nullopt);
      else
        CHECK(w1[size_t(i)].previous_emotion == conv.utterances[size_t(i - 1)].gold);
    }

    auto wu = make_windows(conv, kUnboundedPrev, false);
    for (int i = 0; i < n; ++i) CHECK(int(wu[size_t(i)].previous.size()) == i);

    auto w3n = make_windows(conv, 3, true);
    for (int i = 0; i < n; ++i) {
      CHECK(int(w3n[size_t(i)].previous.size()) == std::min(i, 3));
      REQUIRE(w3n[size_t(i)].next.has_value());
      if (i + 1 < n)
        CHECK(*w3n[size_t(i)].next == "u" + std::to_string(i + 1));
      else
        CHECK(*w3n[size_t(i)].next == "");  // end marker
    }
  }
}

TEST_CASE("windows for synthetic utterances copy the origin context") {
  Conversation conv = numbered_conv(3);
  Utterance syn;
  syn.cid = "c";
  syn.index = 3;
  syn.text_raw = "u1-paraphrased";
  syn.gold = conv.utterances[1].gold;
  syn.synthetic = true;
  syn.paraphrase_of = 1;
  conv.utterances.push_back(syn);

  auto ws = make_windows(conv, 1, true);
  REQUIRE(ws.size() == 4);
  // real windows ignore the synthetic tail entirely
  CHECK(*ws[2].next == "");
  CHECK(ws[2].previous[0] == "u1");
  // the synthetic window is u1's with the current text swapped
  const ContextWindow& s = ws[3];
  CHECK(s.synthetic);
  CHECK(s.index == 3);
  CHECK(s.current == "u1-paraphrased");
  CHECK(s.previous == ws[1].previous);
  CHECK(s.next == ws[1].next);
  CHECK(s.previous_emotion == ws[1].previous_emotion);
  CHECK(s.gold == conv.utterances[1].gold);
}

TEST_CASE("duplicate index within a conversation is rejected") {
  std::string dup =
      R"({"cid": "x", "index": 0, "speaker": null, "text_raw": "a", "text_en": null, "gold": null}
{"cid": "x", "index": 0, "speaker": null, "text_raw": "b", "text_en": null, "gold": null}
)";
  CHECK_THROWS_AS(parse_corpus(dup, "test"), DataError);
}

TEST_CASE("blank lines are skipped") {
  std::string text =
      "\n" +
      std::string(
          R"({"cid": "x", "index": 0, "speaker": null, "text_raw": "a", "text_en": null, "gold": null})") +
      "\n\n";
  Corpus c = parse_corpus(text, "test");
  CHECK(c.utterance_count() == 1);
}
