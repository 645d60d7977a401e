#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "erckit/layers.hpp"

namespace erc::encoder {

using nn::Graph;
using nn::ParamRegistry;
using nn::Parameter;
using nn::Var;

// Maps text to a fixed-dimension sentence vector. `embed` is the
// differentiable path; trainable parameters (if any) carry the encoder
// group tag and train at the encoder learning rate. Encoding is a pure
// function of (parameters, text): repeated calls agree exactly.
class SentenceEncoder {
 public:
  virtual ~SentenceEncoder() = default;
  virtual std::string kind() const = 0;
  virtual int dim() const = 0;
  virtual Var embed(Graph& g, const std::string& text) = 0;
  virtual std::vector<Parameter*> trainable_params() { return {}; }
  virtual void register_params(ParamRegistry&) {}

  // Runs `embed` on a scratch graph and returns the value.
  Tensor encode(const std::string& text);
};

struct HashedEncoderConfig {
  int dim = 768;
  int vocab_hash_dim = 4096;
  uint64_t seed = 1;
};

// Offline stand-in for a pretrained sentence encoder. Tokens are FNV-1a
// hashed into vocab_hash_dim buckets; the L2-normalized bucket counts go
// through a frozen seeded projection (reproducible from the seed alone) and
// a residual trainable tune layer: out = proj + tune(proj). The tune layer
// is zero-initialized, so a fresh encoder returns the projection exactly.
// Empty input (no tokens) returns a dedicated trainable sentinel vector.
class HashedProjectionEncoder final : public SentenceEncoder {
 public:
  explicit HashedProjectionEncoder(const HashedEncoderConfig& cfg);

  std::string kind() const override { return "hashed"; }
  int dim() const override { return cfg_.dim; }
  Var embed(Graph& g, const std::string& text) override;
  std::vector<Parameter*> trainable_params() override;
  void register_params(ParamRegistry& reg) override;

  const HashedEncoderConfig& config() const { return cfg_; }
  // Pre-tune projection of the hashed bag (cached per text).
  Tensor base_projection(const std::string& text);

 private:
  HashedEncoderConfig cfg_;
  Tensor projection_;  // [vocab_hash_dim, dim], frozen
  ParamRegistry own_;  // holds tune_ + sentinel_ registration; must precede tune_
  nn::Linear tune_;
  Parameter sentinel_;
  std::map<std::string, Tensor> cache_;
};

// Lookup table of precomputed sentence vectors, loaded from JSONL lines
// {"text": str, "vec": [..]}. Strict misses are an error; lenient mode
// substitutes a zero sentinel. No trainable parameters.
class PrecomputedEncoder final : public SentenceEncoder {
 public:
  PrecomputedEncoder(std::map<std::string, Tensor> table, int dim, bool lenient);

  std::string kind() const override { return "precomputed"; }
  int dim() const override { return dim_; }
  Var embed(Graph& g, const std::string& text) override;

  const Tensor& lookup(const std::string& text);

 private:
  std::map<std::string, Tensor> table_;
  int dim_;
  bool lenient_;
  Tensor sentinel_;
};

// DataError on malformed lines, inconsistent dimensions, or duplicate texts;
// messages carry the 1-based line number.
std::shared_ptr<PrecomputedEncoder> load_precomputed(const std::string& path, bool lenient);

}  // namespace erc::encoder
