#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lightxml/corpus.hpp"
#include "lightxml/optim.hpp"
#include "lightxml/tensor.hpp"

namespace lightxml {

struct EncoderConfig {
  std::size_t vocab_size = 0;
  std::size_t hidden = 64;
  std::size_t layers = 5;
  std::size_t heads = 4;
  std::size_t ffn = 256;
  std::size_t max_positions = 128;
  // Inside residual blocks, and on the concatenated representation.
  double block_dropout = 0.1;
  double rep_dropout = 0.5;
  std::size_t concat_layers = 5;

  /// Throws ConfigError when hidden % heads != 0, concat_layers is 0 or exceeds layers,
  /// or any size is zero.
  void validate() const;
  std::size_t rep_width() const { return concat_layers * hidden; }
  bool operator==(const EncoderConfig&) const = default;
};

/// Pre-norm transformer over token ids with learned positions. e is the concatenation
/// of the [CLS] state (position 0) of the last `concat_layers` layers, oldest first,
/// each passed through its own output LayerNorm (the residual stream of a pre-norm
/// stack is unnormalized).
template <typename T>
class Encoder {
 public:
  static constexpr double kInitStd = 0.02;

  /// Registers parameters under `prefix` in `params`.
  Encoder(const EncoderConfig& config, ParameterSet<T>& params, std::mt19937_64& init_rng,
          const std::string& prefix = "encoder.");

  const EncoderConfig& config() const { return config_; }

  /// tokens/mask are batch x seq row-major; mask 0 marks padding. Returns
  /// [batch x rep_width]. Throws ContractError when seq exceeds max_positions or a
  /// token id is out of range.
  Tensor<T> encode(std::span<const std::size_t> tokens, std::span<const std::uint8_t> mask, std::size_t batch,
                   std::size_t seq, bool training, std::mt19937_64& rng) const;
  Tensor<T> encode(const Batch& batch, bool training, std::mt19937_64& rng) const;

  struct Layer {
    Tensor<T> ln1_gamma, ln1_beta;
    Tensor<T> wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor<T> ln2_gamma, ln2_beta;
    Tensor<T> w1, b1, w2, b2;
    // Only for layers that feed e.
    Tensor<T> out_gamma, out_beta;
  };
  const std::vector<Layer>& layers() const { return layers_; }
  const Tensor<T>& token_embedding() const { return token_embedding_; }

 private:
  EncoderConfig config_;
  Tensor<T> token_embedding_;
  Tensor<T> position_embedding_;
  std::vector<Layer> layers_;
};

extern template class Encoder<float>;
extern template class Encoder<double>;

}  // namespace lightxml
