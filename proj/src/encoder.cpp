#include "lightxml/encoder.hpp"

#include "lightxml/errors.hpp"
#include "lightxml/init.hpp"
#include "lightxml/ops.hpp"

namespace lightxml {

void EncoderConfig::validate() const {
  if (vocab_size == 0 || hidden == 0 || layers == 0 || heads == 0 || ffn == 0 || max_positions == 0) {
    throw ConfigError("encoder sizes must be positive");
  }
  if (hidden % heads != 0) {
    throw ConfigError("hidden size " + std::to_string(hidden) + " is not divisible by " + std::to_string(heads) +
                      " heads");
  }
  if (concat_layers == 0 || concat_layers > layers) {
    throw ConfigError("concat_layers must lie in [1, " + std::to_string(layers) + "], got " +
                      std::to_string(concat_layers));
  }
  if (block_dropout < 0.0 || block_dropout >= 1.0 || rep_dropout < 0.0 || rep_dropout >= 1.0) {
    throw ConfigError("dropout rates must lie in [0, 1)");
  }
}

template <typename T>
Encoder<T>::Encoder(const EncoderConfig& config, ParameterSet<T>& params, std::mt19937_64& init_rng,
                    const std::string& prefix)
    : config_(config) {
  config_.validate();
  const std::size_t l = config_.hidden;
  auto weight = [&](const std::string& name, Shape shape) {
    return params.add(prefix + name, random_normal<T>(std::move(shape), kInitStd, init_rng));
  };
  auto constant = [&](const std::string& name, std::size_t n, T value) {
    return params.add(prefix + name, Tensor<T>::full({n}, value), true);
  };
  token_embedding_ = weight("token_embedding", {config_.vocab_size, l});
  position_embedding_ = weight("position_embedding", {config_.max_positions, l});
  layers_.resize(config_.layers);
  for (std::size_t i = 0; i < config_.layers; ++i) {
    const std::string p = "layer" + std::to_string(i) + ".";
    auto& layer = layers_[i];
    layer.ln1_gamma = constant(p + "ln1.gamma", l, T(1));
    layer.ln1_beta = constant(p + "ln1.beta", l, T(0));
    layer.wq = weight(p + "attn.wq", {l, l});
    layer.bq = constant(p + "attn.bq", l, T(0));
    layer.wk = weight(p + "attn.wk", {l, l});
    layer.bk = constant(p + "attn.bk", l, T(0));
    layer.wv = weight(p + "attn.wv", {l, l});
    layer.bv = constant(p + "attn.bv", l, T(0));
    layer.wo = weight(p + "attn.wo", {l, l});
    layer.bo = constant(p + "attn.bo", l, T(0));
    layer.ln2_gamma = constant(p + "ln2.gamma", l, T(1));
    layer.ln2_beta = constant(p + "ln2.beta", l, T(0));
    layer.w1 = weight(p + "ffn.w1", {config_.ffn, l});
    layer.b1 = constant(p + "ffn.b1", config_.ffn, T(0));
    layer.w2 = weight(p + "ffn.w2", {l, config_.ffn});
    layer.b2 = constant(p + "ffn.b2", l, T(0));
    if (i >= config_.layers - config_.concat_layers) {
      layer.out_gamma = constant(p + "out_ln.gamma", l, T(1));
      layer.out_beta = constant(p + "out_ln.beta", l, T(0));
    }
  }
}

template <typename T>
Tensor<T> Encoder<T>::encode(std::span<const std::size_t> tokens, std::span<const std::uint8_t> mask,
                             std::size_t batch, std::size_t seq, bool training, std::mt19937_64& rng) const {
  if (seq == 0 || batch == 0) throw ContractError("cannot encode an empty batch");
  if (seq > config_.max_positions) {
    throw ContractError("sequence length " + std::to_string(seq) + " exceeds max positions " +
                        std::to_string(config_.max_positions));
  }
  if (tokens.size() != batch * seq || mask.size() != batch * seq) {
    throw ContractError("token/mask buffers do not match batch " + std::to_string(batch) + " x seq " +
                        std::to_string(seq));
  }
  std::vector<std::size_t> positions(batch * seq), cls_rows(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    cls_rows[b] = b * seq;
    for (std::size_t j = 0; j < seq; ++j) positions[b * seq + j] = j;
  }

  auto x = ops::add(ops::gather_rows(token_embedding_, tokens), ops::gather_rows(position_embedding_, positions));
  const double p = config_.block_dropout;
  std::vector<Tensor<T>> cls_states;
  const std::size_t first_kept = config_.layers - config_.concat_layers;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& L = layers_[i];
    auto h = ops::layer_norm(x, L.ln1_gamma, L.ln1_beta);
    auto q = ops::linear(h, L.wq, L.bq);
    auto k = ops::linear(h, L.wk, L.bk);
    auto v = ops::linear(h, L.wv, L.bv);
    auto attn = ops::masked_self_attention(q, k, v, mask, batch, seq, config_.heads);
    x = ops::add(x, ops::dropout(ops::linear(attn, L.wo, L.bo), p, training, rng));

    h = ops::layer_norm(x, L.ln2_gamma, L.ln2_beta);
    auto f = ops::linear(ops::gelu(ops::linear(h, L.w1, L.b1)), L.w2, L.b2);
    x = ops::add(x, ops::dropout(f, p, training, rng));

    if (i >= first_kept) {
      auto cls = ops::gather_rows(x, cls_rows);
      cls_states.push_back(ops::layer_norm(cls, L.out_gamma, L.out_beta));
    }
  }
  auto e = cls_states.size() == 1 ? cls_states.front() : ops::concat_cols(cls_states);
  return ops::dropout(e, config_.rep_dropout, training, rng);
}

template <typename T>
Tensor<T> Encoder<T>::encode(const Batch& batch, bool training, std::mt19937_64& rng) const {
  return encode(batch.tokens, batch.mask, batch.batch_size, batch.seq_len, training, rng);
}

template class Encoder<float>;
template class Encoder<double>;

}  // namespace lightxml
