#include "erckit/encoder.hpp"

#include <json.hpp>

#include <cmath>
#include <sstream>

namespace erc::encoder {

using json = nlohmann::ordered_json;

Tensor SentenceEncoder::encode(const std::string& text) {
  Graph g;
  return embed(g, text).value();
}

namespace {

nn::Linear make_tune(ParamRegistry& reg, int dim) {
  Rng unused(0);
  return nn::Linear(reg, "encoder.tune", dim, dim, nn::ParamGroup::encoder, unused,
                    /*zero_init=*/true);
}

}  // namespace

HashedProjectionEncoder::HashedProjectionEncoder(const HashedEncoderConfig& cfg)
    : cfg_(cfg),
      projection_(cfg.vocab_hash_dim, cfg.dim),
      tune_(make_tune(own_, cfg.dim)),
      sentinel_("encoder.sentinel", nn::ParamGroup::encoder, Tensor(1, cfg.dim)) {
  if (cfg.dim < 1 || cfg.vocab_hash_dim < 1) throw DataError("encoder dimensions must be positive");
  Rng rng(cfg_.seed);
  double sd = 1.0 / std::sqrt(double(cfg_.dim));
  for (double& v : projection_.data) v = rng.normal(0.0, sd);
  for (double& v : sentinel_.value.data) v = rng.normal(0.0, 0.02);
  own_.add(&sentinel_);
}

Tensor HashedProjectionEncoder::base_projection(const std::string& text) {
  auto it = cache_.find(text);
  if (it != cache_.end()) return it->second;

  std::vector<std::string> toks = tokenize(text);
  Tensor out(1, cfg_.dim);
  if (!toks.empty()) {
    std::vector<double> counts(size_t(cfg_.vocab_hash_dim), 0.0);
    for (const std::string& t : toks)
      counts[size_t(fnv1a64(t) % uint64_t(cfg_.vocab_hash_dim))] += 1.0;
    double norm = 0;
    for (double c : counts) norm += c * c;
    norm = std::sqrt(norm);
    for (int b = 0; b < cfg_.vocab_hash_dim; ++b) {
      double c = counts[size_t(b)];
      if (c == 0.0) continue;
      double w = c / norm;
      for (int j = 0; j < cfg_.dim; ++j) out.at(0, j) += w * projection_.at(b, j);
    }
  }
  cache_[text] = out;
  return out;
}

Var HashedProjectionEncoder::embed(Graph& g, const std::string& text) {
  if (tokenize(text).empty()) return g.param(sentinel_);
  Var base = g.input(base_projection(text));
  return nn::add(base, tune_(g, base));
}

std::vector<Parameter*> HashedProjectionEncoder::trainable_params() {
  return {&tune_.w, &tune_.b, &sentinel_};
}

void HashedProjectionEncoder::register_params(ParamRegistry& reg) {
  for (Parameter* p : trainable_params()) reg.add(p);
}

PrecomputedEncoder::PrecomputedEncoder(std::map<std::string, Tensor> table, int dim, bool lenient)
    : table_(std::move(table)), dim_(dim), lenient_(lenient), sentinel_(1, dim) {
  if (dim < 1) throw DataError("encoder dimension must be positive");
  for (const auto& [text, vec] : table_)
    if (vec.rows != 1 || vec.cols != dim)
      throw DataError("precomputed vector for \"" + text + "\" has the wrong shape");
}

const Tensor& PrecomputedEncoder::lookup(const std::string& text) {
  auto it = table_.find(text);
  if (it != table_.end()) return it->second;
  if (lenient_) return sentinel_;
  throw DataError("no precomputed vector for text: \"" + text + "\"");
}

Var PrecomputedEncoder::embed(Graph& g, const std::string& text) {
  return g.input(lookup(text));
}

std::shared_ptr<PrecomputedEncoder> load_precomputed(const std::string& path, bool lenient) {
  std::istringstream in(read_text_file(path));
  std::string line;
  int lineno = 0;
  std::map<std::string, Tensor> table;
  int dim = -1;
  auto fail = [&](const std::string& msg) -> void {
    throw DataError(path + ": line " + std::to_string(lineno) + ": " + msg);
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      fail(std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("text") || !j.contains("vec"))
      fail("expected an object with \"text\" and \"vec\"");
    if (!j["text"].is_string() || !j["vec"].is_array()) fail("text must be a string, vec an array");
    std::string text = j["text"].get<std::string>();
    std::vector<double> vec;
    try {
      vec = j["vec"].get<std::vector<double>>();
    } catch (const json::exception&) {
      fail("vec must hold numbers");
    }
    if (vec.empty()) fail("vec must not be empty");
    if (dim < 0) dim = int(vec.size());
    if (int(vec.size()) != dim)
      fail("vector length " + std::to_string(vec.size()) + " does not match dimension " +
           std::to_string(dim));
    if (table.count(text)) fail("duplicate text: \"" + text + "\"");
    table[text] = Tensor::row_vector(std::move(vec));
  }
  if (dim < 0) throw DataError(path + ": no vectors found");
  return std::make_shared<PrecomputedEncoder>(std::move(table), dim, lenient);
}

}  // namespace erc::encoder
