#include "lightxml/model.hpp"

#include <cmath>

#include "lightxml/errors.hpp"

namespace lightxml {

namespace {

constexpr const char* kDimsRecord = "meta.dims";
constexpr const char* kEpochRecord = "meta.epoch";
constexpr const char* kSwaCountRecord = "swa.count";
constexpr const char* kStepRecord = "optim.step";

std::vector<float> encode_dims(const ModelDims& d) {
  const auto& e = d.encoder;
  return {static_cast<float>(e.vocab_size),    static_cast<float>(e.hidden),
          static_cast<float>(e.layers),        static_cast<float>(e.heads),
          static_cast<float>(e.ffn),           static_cast<float>(e.max_positions),
          static_cast<float>(e.concat_layers), static_cast<float>(d.num_clusters),
          static_cast<float>(d.num_labels),    static_cast<float>(d.embed_dim),
          d.bottleneck == Bottleneck::sigmoid ? 0.0f : 1.0f,
          static_cast<float>(e.block_dropout), static_cast<float>(e.rep_dropout)};
}

float scalar_record(const std::vector<NamedArray>& records, const std::string& name) {
  const auto* r = find_record(records, name);
  if (!r || r->values.size() != 1) throw ConfigError("checkpoint lacks scalar record '" + name + "'");
  return r->values[0];
}

template <typename T>
NamedArray to_array(std::string name, const Shape& shape, const std::vector<T>& values) {
  return {std::move(name), shape, std::vector<float>(values.begin(), values.end())};
}

}  // namespace

template <typename T>
ModelBundle<T>::ModelBundle(const ModelDims& dims, ClusterMap clusters, std::uint64_t init_seed, AdamWConfig optim,
                            int swa_start_epoch)
    : dims_(dims),
      clusters_(std::move(clusters)),
      init_rng_(init_seed),
      encoder_(dims.encoder, params_, init_rng_),
      generator_(dims.num_clusters, dims.encoder.rep_width(), params_, init_rng_),
      discriminator_(dims.num_labels, dims.embed_dim, dims.encoder.rep_width(), params_, init_rng_, dims.bottleneck),
      optimizer_(optim),
      swa_(swa_start_epoch) {
  if (clusters_.num_clusters() != dims.num_clusters || clusters_.num_labels() != dims.num_labels) {
    throw ConfigError("cluster map (K=" + std::to_string(clusters_.num_clusters()) + ", L=" +
                      std::to_string(clusters_.num_labels()) + ") does not match the model (K=" +
                      std::to_string(dims.num_clusters) + ", L=" + std::to_string(dims.num_labels) + ")");
  }
}

template <typename T>
std::vector<NamedArray> ModelBundle<T>::to_records() const {
  auto records = export_parameters(params_);
  const auto& items = params_.items();
  if (!swa_.empty()) {
    for (std::size_t i = 0; i < items.size(); ++i)
      records.push_back(to_array(items[i].name + kSwaSuffix, items[i].tensor.shape(), swa_.average()[i]));
    records.push_back({kSwaCountRecord, {1}, {static_cast<float>(swa_.count())}});
  }
  if (optimizer_.step_count() > 0) {
    for (std::size_t i = 0; i < items.size(); ++i) {
      records.push_back(to_array("optim.m." + items[i].name, items[i].tensor.shape(), optimizer_.first_moments()[i]));
      records.push_back(to_array("optim.v." + items[i].name, items[i].tensor.shape(), optimizer_.second_moments()[i]));
    }
    records.push_back({kStepRecord, {1}, {static_cast<float>(optimizer_.step_count())}});
  }
  auto dims = encode_dims(dims_);
  records.push_back({kDimsRecord, {dims.size()}, dims});
  records.push_back({kEpochRecord, {1}, {static_cast<float>(epoch_)}});
  return records;
}

template <typename T>
void ModelBundle<T>::save(const std::filesystem::path& path) const {
  write_checkpoint(path, to_records());
}

ModelDims read_model_dims(const std::vector<NamedArray>& records) {
  const auto* r = find_record(records, kDimsRecord);
  if (!r || r->values.size() != 13) throw ConfigError("checkpoint lacks model dimensions");
  const auto& v = r->values;
  auto size = [&](std::size_t i) { return static_cast<std::size_t>(std::lround(v[i])); };
  ModelDims d;
  d.encoder.vocab_size = size(0);
  d.encoder.hidden = size(1);
  d.encoder.layers = size(2);
  d.encoder.heads = size(3);
  d.encoder.ffn = size(4);
  d.encoder.max_positions = size(5);
  d.encoder.concat_layers = size(6);
  d.num_clusters = size(7);
  d.num_labels = size(8);
  d.embed_dim = size(9);
  d.bottleneck = v[10] == 0.0f ? Bottleneck::sigmoid : Bottleneck::relu;
  // Rates are stored as float; snap back to the 6-decimal value they were given as.
  auto rate = [](float x) { return std::round(static_cast<double>(x) * 1e6) / 1e6; };
  d.encoder.block_dropout = rate(v[11]);
  d.encoder.rep_dropout = rate(v[12]);
  return d;
}

template <typename T>
std::unique_ptr<ModelBundle<T>> load_bundle(const std::vector<NamedArray>& records, ClusterMap clusters,
                                            WeightSource weights) {
  auto bundle = std::make_unique<ModelBundle<T>>(read_model_dims(records), std::move(clusters), 0);
  auto& params = bundle->params();
  const auto& items = params.items();
  const bool has_swa = !items.empty() && find_record(records, items.front().name + kSwaSuffix) != nullptr;
  if (weights == WeightSource::swa && !has_swa) throw ConfigError("checkpoint has no SWA averages");
  const bool use_swa = has_swa && weights != WeightSource::last;
  import_parameters(params, records, use_swa ? kSwaSuffix : "");
  bundle->set_swa_weights_loaded(use_swa);

  if (has_swa) {
    std::vector<std::vector<double>> avg;
    for (const auto& p : items) {
      const auto* r = find_record(records, p.name + kSwaSuffix);
      if (!r) throw ConfigError("checkpoint lacks SWA record for '" + p.name + "'");
      avg.emplace_back(r->values.begin(), r->values.end());
    }
    bundle->swa().restore(static_cast<std::size_t>(scalar_record(records, kSwaCountRecord)), std::move(avg));
  }
  if (find_record(records, kStepRecord)) {
    std::vector<std::vector<T>> m, v;
    for (const auto& p : items) {
      const auto* rm = find_record(records, "optim.m." + p.name);
      const auto* rv = find_record(records, "optim.v." + p.name);
      if (!rm || !rv) throw ConfigError("checkpoint lacks optimizer state for '" + p.name + "'");
      m.emplace_back(rm->values.begin(), rm->values.end());
      v.emplace_back(rv->values.begin(), rv->values.end());
    }
    bundle->optimizer().restore(static_cast<std::uint64_t>(scalar_record(records, kStepRecord)), std::move(m),
                                std::move(v));
  }
  bundle->set_epoch(static_cast<int>(scalar_record(records, kEpochRecord)));
  return bundle;
}

template <typename T>
std::unique_ptr<ModelBundle<T>> load_bundle(const std::filesystem::path& checkpoint, ClusterMap clusters,
                                            WeightSource weights) {
  return load_bundle<T>(read_checkpoint(checkpoint), std::move(clusters), weights);
}

template class ModelBundle<float>;
template class ModelBundle<double>;
template std::unique_ptr<ModelBundle<float>> load_bundle<float>(const std::vector<NamedArray>&, ClusterMap,
                                                                WeightSource);
template std::unique_ptr<ModelBundle<double>> load_bundle<double>(const std::vector<NamedArray>&, ClusterMap,
                                                                  WeightSource);
template std::unique_ptr<ModelBundle<float>> load_bundle<float>(const std::filesystem::path&, ClusterMap,
                                                                WeightSource);
template std::unique_ptr<ModelBundle<double>> load_bundle<double>(const std::filesystem::path&, ClusterMap,
                                                                  WeightSource);

}  // namespace lightxml
