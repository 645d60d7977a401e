#include "erckit/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "erckit/common.hpp"
#include "erckit/corpus.hpp"
#include "erckit/graph.hpp"
#include "erckit/evalmetrics.hpp"
#include "erckit/gradcheck.hpp"
#include "erckit/kernels.hpp"
#include "erckit/models.hpp"
#include "erckit/preprocess.hpp"
#include "erckit/training.hpp"

namespace erc::cli {

namespace {

using json = nlohmann::ordered_json;
using corpus::Conversation;
using corpus::Corpus;
using corpus::EmotionLabelSet;
using corpus::Utterance;
using models::ContextWindow;
using models::ModelBundle;
using models::ModelDims;
using models::ModelKind;
using models::Prediction;

const std::vector<std::string> kKindNames = {"simple_history", "simple_history_aug",
                                             "full_history", "context_gru"};

struct GlobalOpts {
  uint64_t seed = 1;
  std::string config_path;
  int jobs = 1;
  bool lenient = false;
  bool float32 = false;
};

struct EncoderOverrides {
  std::optional<std::string> type;
  std::optional<int> vocab_hash_dim;
  std::optional<uint64_t> seed;
  std::optional<std::string> path;
};

struct AppConfig {
  training::TrainConfig train;
  json dims_section;  // applied over the base dims once --desk is known
  EncoderOverrides enc;
};

void apply_train_section(training::TrainConfig& t, const json& j, const std::string& origin,
                         bool lenient) {
  if (!j.is_object()) throw DataError(origin + ": \"train\" must be an object");
  for (const auto& [k, v] : j.items()) {
    try {
      if (k == "max_epochs")
        t.max_epochs = v.get<int>();
      else if (k == "batch_size")
        t.batch_size = v.get<int>();
      else if (k == "grad_clip")
        t.grad_clip = v.get<double>();
      else if (k == "lr_main")
        t.optim.lr_main = v.get<double>();
      else if (k == "lr_encoder")
        t.optim.lr_encoder = v.get<double>();
      else if (k == "weight_decay")
        t.optim.weight_decay = v.get<double>();
      else if (k == "beta1")
        t.optim.beta1 = v.get<double>();
      else if (k == "beta2")
        t.optim.beta2 = v.get<double>();
      else if (k == "eps")
        t.optim.eps = v.get<double>();
      else if (k == "scheduler_factor")
        t.scheduler_factor = v.get<double>();
      else if (k == "scheduler_patience")
        t.scheduler_patience = v.get<int>();
      else if (k == "early_stop_patience")
        t.early_stop_patience = v.get<int>();
      else if (k == "stop_at_train_accuracy")
        t.stop_at_train_accuracy = v.get<double>();
      else if (!lenient)
        throw DataError(origin + ": unknown train setting \"" + k + "\"");
    } catch (const json::exception& e) {
      throw DataError(origin + ": bad value for \"" + k + "\": " + e.what());
    }
  }
}

void apply_dims_section(ModelDims& d, const json& j, const std::string& origin, bool lenient) {
  if (j.is_null()) return;
  if (!j.is_object()) throw DataError(origin + ": \"dims\" must be an object");
  for (const auto& [k, v] : j.items()) {
    try {
      if (k == "d_enc")
        d.d_enc = v.get<int>();
      else if (k == "emotion_dim")
        d.emotion_dim = v.get<int>();
      else if (k == "heads")
        d.heads = v.get<int>();
      else if (k == "sh_hidden")
        d.sh_hidden = v.get<int>();
      else if (k == "fh_ffn_hidden")
        d.fh_ffn_hidden = v.get<int>();
      else if (k == "fh_ffn_out")
        d.fh_ffn_out = v.get<int>();
      else if (k == "fh_cls_h1")
        d.fh_cls_h1 = v.get<int>();
      else if (k == "fh_cls_h2")
        d.fh_cls_h2 = v.get<int>();
      else if (k == "gru_hidden")
        d.gru_hidden = v.get<int>();
      else if (k == "gru_window")
        d.gru_window = v.get<int>();
      else if (k == "gru_cls_hidden")
        d.gru_cls_hidden = v.get<int>();
      else if (k == "gru_includes_next")
        d.gru_includes_next = v.get<bool>();
      else if (k == "dropout")
        d.dropout = v.get<double>();
      else if (k == "leaky_slope")
        d.leaky_slope = v.get<double>();
      else if (!lenient)
        throw DataError(origin + ": unknown dims setting \"" + k + "\"");
    } catch (const json::exception& e) {
      throw DataError(origin + ": bad value for \"" + k + "\": " + e.what());
    }
  }
}

void apply_encoder_section(EncoderOverrides& e, const json& j, const std::string& origin,
                           bool lenient) {
  if (!j.is_object()) throw DataError(origin + ": \"encoder\" must be an object");
  for (const auto& [k, v] : j.items()) {
    try {
      if (k == "type")
        e.type = v.get<std::string>();
      else if (k == "vocab_hash_dim")
        e.vocab_hash_dim = v.get<int>();
      else if (k == "seed")
        e.seed = v.get<uint64_t>();
      else if (k == "path")
        e.path = v.get<std::string>();
      else if (!lenient)
        throw DataError(origin + ": unknown encoder setting \"" + k + "\"");
    } catch (const json::exception& e2) {
      throw DataError(origin + ": bad value for \"" + k + "\": " + e2.what());
    }
  }
}

AppConfig load_app_config(const GlobalOpts& g) {
  AppConfig cfg;
  if (g.config_path.empty()) return cfg;
  json j;
  try {
    j = json::parse(read_text_file(g.config_path));
  } catch (const json::exception& e) {
    throw DataError(g.config_path + ": " + e.what());
  }
  if (!j.is_object()) throw DataError(g.config_path + ": config must be a json object");
  for (const auto& [k, v] : j.items()) {
    if (k == "train")
      apply_train_section(cfg.train, v, g.config_path, g.lenient);
    else if (k == "dims")
      cfg.dims_section = v;
    else if (k == "encoder")
      apply_encoder_section(cfg.enc, v, g.config_path, g.lenient);
    else if (!g.lenient)
      throw DataError(g.config_path + ": unknown config section \"" + k + "\"");
  }
  return cfg;
}

models::EncoderSpec encoder_spec_for(const AppConfig& cfg, const ModelDims& dims, bool desk,
                                     uint64_t seed) {
  models::EncoderSpec enc;
  enc.type = cfg.enc.type.value_or("hashed");
  enc.dim = dims.d_enc;
  enc.vocab_hash_dim = cfg.enc.vocab_hash_dim.value_or(desk ? 256 : 4096);
  enc.seed = cfg.enc.seed.value_or(seed);
  enc.path = cfg.enc.path.value_or("");
  return enc;
}

// ---------------------------------------------------------------------------

struct TranslateOpts {
  std::string in, out, lexicon, translit, cache;
  bool force = false;
};

int cmd_translate(const TranslateOpts& o, const GlobalOpts& g) {
  Corpus c = corpus::load_corpus(o.in, g.lenient);

  preprocess::IdentityTransliterator id_tl;
  std::unique_ptr<preprocess::DictionaryTransliterator> dict_tl;
  preprocess::TransliterationProvider* tl = &id_tl;
  if (!o.translit.empty()) {
    dict_tl = std::make_unique<preprocess::DictionaryTransliterator>(
        preprocess::load_lexicon_tsv(o.translit), "lexicon-translit");
    tl = dict_tl.get();
  }

  preprocess::IdentityTranslator id_tr;
  std::unique_ptr<preprocess::DictionaryTranslator> dict_tr;
  preprocess::TranslationProvider* tr = &id_tr;
  if (!o.lexicon.empty()) {
    dict_tr = std::make_unique<preprocess::DictionaryTranslator>(
        preprocess::load_lexicon_tsv(o.lexicon), "lexicon-translate");
    tr = dict_tr.get();
  }

  std::unique_ptr<preprocess::ProviderCache> cache;
  if (!o.cache.empty()) {
    std::filesystem::create_directories(o.cache);
    cache = std::make_unique<preprocess::ProviderCache>(o.cache);
  }

  std::vector<std::string> warnings;
  preprocess::TranslateStats stats =
      preprocess::translate_corpus(c, *tl, *tr, o.force, cache.get(), &warnings);
  for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";
  corpus::save_corpus(c, o.out);
  std::cout << "translated " << stats.translated << ", skipped " << stats.skipped
            << ", failed " << stats.failed << " -> " << o.out << "\n";
  return 0;
}

struct AugmentOpts {
  std::string in, out, synonyms;
};

int cmd_augment(const AugmentOpts& o, const GlobalOpts& g) {
  Corpus c = corpus::load_corpus(o.in, g.lenient);
  std::unique_ptr<preprocess::RuleBasedParaphraser> para;
  if (o.synonyms.empty())
    para = std::make_unique<preprocess::RuleBasedParaphraser>();
  else
    para = std::make_unique<preprocess::RuleBasedParaphraser>(
        preprocess::load_synonyms_tsv(o.synonyms));
  preprocess::AugmentStats stats = preprocess::augment_corpus(c, *para, g.seed);
  corpus::save_corpus(c, o.out);
  std::cout << "augmented " << stats.originals << " utterances with " << stats.synthesized
            << " paraphrases (" << stats.skipped_no_paraphrases << " had none) -> " << o.out
            << "\n";
  return 0;
}

struct TrainOpts {
  std::string kind, in, val, out;
  bool no_context = false;
  bool train_on_all = false;
  int epochs = 0;
  bool desk = false;
};

bool corpus_has_synthetic(const Corpus& c) {
  for (const Conversation& conv : c.conversations)
    for (const Utterance& u : conv.utterances)
      if (u.synthetic) return true;
  return false;
}

int cmd_train(const TrainOpts& o, const GlobalOpts& g, const AppConfig& cfg) {
  ModelKind kind = models::kind_from_name(o.kind);
  if (o.no_context && kind != ModelKind::simple_history &&
      kind != ModelKind::simple_history_aug)
    throw UsageError("--no-context applies only to the simple history kinds");
  if (!o.train_on_all && o.val.empty())
    throw UsageError("training needs --val or --train-on-all");

  Corpus train_c = corpus::load_corpus(o.in, g.lenient);
  bool has_synth = corpus_has_synthetic(train_c);
  if (kind == ModelKind::simple_history_aug) {
    if (!has_synth)
      throw DataError(o.in +
                      ": no synthetic records found; run augment before training the "
                      "augmented kind");
  } else if (has_synth) {
    // synthetic records form the tail of each conversation; the plain kinds
    // train without them
    for (Conversation& conv : train_c.conversations) {
      size_t real = 0;
      while (real < conv.utterances.size() && !conv.utterances[real].synthetic) ++real;
      conv.utterances.resize(real);
    }
  }

  training::TrainConfig tc = cfg.train;
  if (o.epochs > 0) tc.max_epochs = o.epochs;
  if (o.train_on_all) tc.fixed_epochs = true;

  ModelDims dims = o.desk ? ModelDims::desk() : ModelDims();
  apply_dims_section(dims, cfg.dims_section, g.config_path, g.lenient);
  models::EncoderSpec enc = encoder_spec_for(cfg, dims, o.desk, g.seed);

  ModelBundle m =
      ModelBundle::create(kind, dims, train_c.labels, enc, g.seed, o.no_context, g.lenient);
  std::vector<Conversation> val_convs;
  if (!o.val.empty()) val_convs = corpus::load_corpus(o.val, g.lenient).conversations;

  training::TrainResult r =
      training::train_model(m, train_c.conversations, val_convs, tc, g.seed);
  m.save(o.out);
  write_text_file((std::filesystem::path(o.out) / "trainlog.jsonl").string(),
                  training::trainlog_to_jsonl(r));

  std::cout << "trained " << o.kind << " for " << r.epochs.size() << " epochs";
  if (!r.epochs.empty()) std::cout << ", final train loss " << r.epochs.back().train_loss;
  if (r.best_val_f1 > 0.0)
    std::cout << ", best epoch " << r.best_epoch << " (val weighted F1 " << r.best_val_f1
              << ")";
  std::cout << " -> " << o.out << "\n";
  return 0;
}

struct PredictOpts {
  std::vector<std::string> model_dirs;
  std::string in, out;
};

std::string prediction_line(const Prediction& p, const EmotionLabelSet& labels) {
  json j;
  j["cid"] = p.cid;
  j["index"] = p.index;
  j["label"] = labels.name(p.label);
  j["probs"] = p.probs;
  if (!p.votes.empty()) {
    json v = json::object();
    for (const auto& [kind, lab] : p.votes) v[models::kind_name(kind)] = labels.name(lab);
    j["votes"] = v;
  }
  return j.dump() + "\n";
}

int cmd_predict(const PredictOpts& o, const GlobalOpts& g) {
  if (o.model_dirs.size() != 1 && o.model_dirs.size() != 4)
    throw UsageError("--model must be given once (single model) or four times (ensemble), "
                     "got " +
                     std::to_string(o.model_dirs.size()));
  Corpus c = corpus::load_corpus(o.in, g.lenient);
  std::string out;
  size_t n = 0;
  if (o.model_dirs.size() == 1) {
    ModelBundle m = ModelBundle::load(o.model_dirs[0], g.lenient);
    for (const Conversation& conv : c.conversations)
      for (const Prediction& p : models::predict_conversation(m, conv)) {
        out += prediction_line(p, m.labels);
        ++n;
      }
  } else {
    models::Ensemble ens;
    for (const std::string& dir : o.model_dirs)
      ens.members.push_back(ModelBundle::load(dir, g.lenient));
    for (const Conversation& conv : c.conversations)
      for (const Prediction& p : models::ensemble_predict_conversation(ens, conv)) {
        out += prediction_line(p, ens.members[0].labels);
        ++n;
      }
  }
  write_text_file(o.out, out);
  std::cout << "wrote " << n << " predictions -> " << o.out << "\n";
  return 0;
}

struct EvaluateOpts {
  std::string in;
  std::vector<std::string> preds;
  std::vector<std::string> names;
  std::string json_out;
};

std::map<std::pair<std::string, int>, int> load_pred_map(const std::string& path,
                                                         const EmotionLabelSet& labels) {
  std::map<std::pair<std::string, int>, int> out;
  std::istringstream in(read_text_file(path));
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError(path + ": line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("cid") || !j.contains("index") || !j.contains("label"))
      throw DataError(path + ": line " + std::to_string(lineno) +
                      ": expected an object with cid, index, and label");
    std::string cid;
    int index = 0;
    std::string label;
    try {
      cid = j["cid"].get<std::string>();
      index = j["index"].get<int>();
      label = j["label"].get<std::string>();
    } catch (const json::exception& e) {
      throw DataError(path + ": line " + std::to_string(lineno) + ": " + e.what());
    }
    int cls = labels.index(label);
    if (!out.emplace(std::make_pair(cid, index), cls).second)
      throw DataError(path + ": line " + std::to_string(lineno) + ": duplicate prediction for " +
                      cid + "#" + std::to_string(index));
  }
  return out;
}

int cmd_evaluate(const EvaluateOpts& o, const GlobalOpts& g) {
  if (!o.json_out.empty() && o.preds.size() != 1)
    throw UsageError("--json needs exactly one --preds file");
  if (!o.names.empty() && o.names.size() != o.preds.size())
    throw UsageError("--name count must match --preds count");

  Corpus c = corpus::load_corpus(o.in, g.lenient);
  std::vector<std::pair<std::string, evalmetrics::EvalReport>> rows;
  for (size_t i = 0; i < o.preds.size(); ++i) {
    auto pred_map = load_pred_map(o.preds[i], c.labels);
    std::vector<int> preds, golds;
    long unscored = 0;
    for (const Conversation& conv : c.conversations)
      for (const Utterance& u : conv.utterances) {
        if (u.synthetic || !u.gold) continue;
        auto it = pred_map.find({u.cid, u.index});
        if (it == pred_map.end()) {
          if (g.lenient) {
            ++unscored;
            continue;
          }
          throw DataError(o.preds[i] + ": no prediction for " + u.cid + "#" +
                          std::to_string(u.index));
        }
        preds.push_back(it->second);
        golds.push_back(c.labels.index(*u.gold));
      }
    evalmetrics::EvalReport r = evalmetrics::evaluate(preds, golds, c.labels);
    r.unscored = unscored;
    std::string name = i < o.names.size()
                           ? o.names[i]
                           : std::filesystem::path(o.preds[i]).stem().string();
    rows.emplace_back(name, r);
  }
  std::cout << evalmetrics::render_table(rows);
  if (!o.json_out.empty())
    write_text_file(o.json_out, evalmetrics::report_to_json(rows[0].second, c.labels));
  return 0;
}

struct GradcheckOpts {
  std::string kind;
  bool full = false;
  double tol = 1e-4;
  int entries = 24;
  double noise_floor = 1e-10;
};

int cmd_gradcheck(const GradcheckOpts& o, const GlobalOpts& g) {
  ModelDims dims = o.full ? ModelDims() : ModelDims::desk();
  std::vector<ModelKind> kinds;
  if (o.kind.empty())
    kinds = {ModelKind::simple_history, ModelKind::simple_history_aug,
             ModelKind::full_history, ModelKind::context_gru};
  else
    kinds = {models::kind_from_name(o.kind)};

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
  std::vector<int> targets = {2, 5};

  bool all_pass = true;
  for (ModelKind kind : kinds) {
    models::EncoderSpec enc;
    enc.dim = dims.d_enc;
    enc.vocab_hash_dim = o.full ? 4096 : 128;
    enc.seed = g.seed;
    ModelBundle m = ModelBundle::create(kind, dims, EmotionLabelSet(), enc, g.seed);
    auto build = [&](nn::Graph& gr) {
      Rng r(g.seed + 101);
      return nn::cross_entropy_logits(m.arch->logits(gr, batch, nn::Mode::train, r), targets);
    };
    nn::GradCheckResult res =
        nn::grad_check_fn(models::kind_name(kind), build, m.registry.params(), 1e-5, o.tol,
                          o.entries, 17, o.noise_floor);
    std::cout << res.name << ": max rel err " << res.max_rel_err << " over " << res.checked
              << " entries " << (res.pass ? "PASS" : "FAIL");
    if (!res.pass) std::cout << " (worst: " << res.worst_param << ")";
    std::cout << "\n";
    all_pass = all_pass && res.pass;
  }
  if (!all_pass) throw NumericError("gradient check failed");
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"context-aware emotion recognition over conversations"};
  app.name("erckit");
  app.require_subcommand(0, 1);

  GlobalOpts g;
  app.add_option("--seed", g.seed, "master random seed")->capture_default_str();
  app.add_option("--config", g.config_path, "json settings file");
  app.add_option("--jobs", g.jobs, "matmul worker threads")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_flag("--lenient", g.lenient, "tolerate unknown keys and missing lookups");
  app.add_flag("--float32", g.float32, "accumulate matmuls in single precision");

  TranslateOpts to;
  CLI::App* t = app.add_subcommand("translate", "fill the english side of a corpus");
  t->fallthrough();
  t->add_option("--in", to.in, "input corpus jsonl")->required();
  t->add_option("--out", to.out, "output corpus jsonl")->required();
  t->add_option("--lexicon", to.lexicon, "translation lexicon tsv");
  t->add_option("--translit", to.translit, "transliteration lexicon tsv");
  t->add_option("--cache", to.cache, "provider cache directory");
  t->add_flag("--force", to.force, "retranslate records that already have text_en");

  AugmentOpts ao;
  CLI::App* a = app.add_subcommand("augment", "append paraphrases as synthetic records");
  a->fallthrough();
  a->add_option("--in", ao.in, "input corpus jsonl")->required();
  a->add_option("--out", ao.out, "output corpus jsonl")->required();
  a->add_option("--synonyms", ao.synonyms, "synonym table tsv");

  TrainOpts tro;
  CLI::App* tr = app.add_subcommand("train", "train one model kind");
  tr->fallthrough();
  tr->add_option("--kind", tro.kind, "model kind")
      ->required()
      ->check(CLI::IsMember(kKindNames));
  tr->add_option("--in", tro.in, "training corpus jsonl")->required();
  tr->add_option("--val", tro.val, "validation corpus jsonl");
  tr->add_option("--out", tro.out, "output model directory")->required();
  tr->add_flag("--no-context", tro.no_context, "ignore conversation context (simple kinds)");
  tr->add_flag("--train-on-all", tro.train_on_all,
               "fixed-epoch training without a validation split");
  tr->add_option("--epochs", tro.epochs, "epoch count override")->check(CLI::PositiveNumber);
  tr->add_flag("--desk", tro.desk, "small dimensions for quick runs");

  PredictOpts po;
  CLI::App* p = app.add_subcommand("predict", "run inference over a corpus");
  p->fallthrough();
  p->add_option("--model", po.model_dirs, "model directory (one, or four for an ensemble)")
      ->required();
  p->add_option("--in", po.in, "input corpus jsonl")->required();
  p->add_option("--out", po.out, "output predictions jsonl")->required();

  EvaluateOpts eo;
  CLI::App* e = app.add_subcommand("evaluate", "score predictions against gold labels");
  e->fallthrough();
  e->add_option("--in", eo.in, "corpus jsonl with gold labels")->required();
  e->add_option("--preds", eo.preds, "predictions jsonl (repeatable)")->required();
  e->add_option("--name", eo.names, "table row name per --preds");
  e->add_option("--json", eo.json_out, "write the full report as json");

  GradcheckOpts go;
  CLI::App* gc = app.add_subcommand("gradcheck", "finite-difference gradient audit");
  gc->fallthrough();
  gc->add_option("--kind", go.kind, "restrict to one model kind")
      ->check(CLI::IsMember(kKindNames));
  gc->add_flag("--full", go.full, "publication-scale dimensions");
  gc->add_option("--tol", go.tol, "relative error tolerance")->capture_default_str();
  gc->add_option("--entries", go.entries, "checked entries per parameter")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  gc->add_option("--noise-floor", go.noise_floor,
                 "absolute slack for entries whose gradient is below finite-difference "
                 "resolution")
      ->capture_default_str();

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& err) {
    int code = app.exit(err);
    return code == 0 ? 0 : 1;
  }

  try {
    kernels::set_threads(g.jobs);
    kernels::set_compute_precision(g.float32 ? kernels::Precision::f32
                                             : kernels::Precision::f64);
    AppConfig cfg = load_app_config(g);
    if (t->parsed()) return cmd_translate(to, g);
    if (a->parsed()) return cmd_augment(ao, g);
    if (tr->parsed()) return cmd_train(tro, g, cfg);
    if (p->parsed()) return cmd_predict(po, g);
    if (e->parsed()) return cmd_evaluate(eo, g);
    if (gc->parsed()) return cmd_gradcheck(go, g);
    std::cerr << app.help();
    throw UsageError("a subcommand is required");
  } catch (const UsageError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  } catch (const NumericError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 3;
  } catch (const DataError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  }
}

}  // namespace erc::cli
