#include "lightxml/predictor.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <unordered_map>

#include "lightxml/errors.hpp"

namespace lightxml {

std::vector<ScoredLabel> top_k(std::vector<ScoredLabel> scored, std::size_t k) {
  auto better = [](const ScoredLabel& a, const ScoredLabel& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.label < b.label;
  };
  k = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(), better);
  scored.resize(k);
  return scored;
}

double precision_at_k(std::span<const std::uint32_t> ranking, std::span<const std::uint32_t> truth, std::size_t k) {
  if (k == 0) throw ContractError("precision@k needs k >= 1");
  std::size_t hits = 0;
  const std::size_t n = std::min(k, ranking.size());
  for (std::size_t i = 0; i < n; ++i)
    if (std::find(truth.begin(), truth.end(), ranking[i]) != truth.end()) ++hits;
  return static_cast<double>(hits) / static_cast<double>(k);
}

double precision_at_k(const PredictionRow& row, std::span<const std::uint32_t> truth, std::size_t k) {
  std::vector<std::uint32_t> ranking;
  ranking.reserve(row.labels.size());
  for (const auto& s : row.labels) ranking.push_back(s.label);
  return precision_at_k(ranking, truth, k);
}

double cluster_recall(std::span<const std::uint32_t> selected, std::span<const std::uint32_t> truth,
                      const ClusterMap& map) {
  if (truth.empty()) return 1.0;
  std::size_t covered = 0;
  for (auto l : truth)
    if (std::find(selected.begin(), selected.end(), map.cluster_of(l)) != selected.end()) ++covered;
  return static_cast<double>(covered) / static_cast<double>(truth.size());
}

template <typename T>
double cluster_recall(std::span<const T> scores, std::span<const std::uint32_t> truth, const ClusterMap& map,
                      std::size_t b_top) {
  if (scores.size() != map.num_clusters()) throw DimensionError("score row does not match K");
  auto selected = top_clusters(scores, b_top);
  return cluster_recall(std::span<const std::uint32_t>(selected), truth, map);
}

template <typename T>
ModelOutput score_batch(const ModelBundle<T>& bundle, const Batch& batch, std::size_t b_top) {
  NoGradScope<T> no_grad;
  std::mt19937_64 unused_rng(0);
  auto e = bundle.encoder().encode(batch, false, unused_rng);
  auto recall = bundle.generator().scores(e);
  auto candidates = sample_candidates(recall, bundle.clusters(), b_top, nullptr);
  auto rank = bundle.discriminator().scores(e, candidates);

  const std::size_t k = bundle.clusters().num_clusters();
  ModelOutput out;
  out.fused.resize(batch.batch_size);
  out.clusters.resize(batch.batch_size);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < batch.batch_size; ++i) {
    const auto& row = candidates.rows[i];
    auto& fused = out.fused[i];
    fused.reserve(row.size());
    for (std::size_t j = 0; j < row.size(); ++j) {
      const double r = recall.at(i * k + row.source_cluster[j]);
      fused.push_back({row.labels[j], r * static_cast<double>(rank.at(offset + j))});
    }
    offset += row.size();
    out.clusters[i] = row.clusters;
  }
  return out;
}

template <typename T>
ModelOutput score_dataset(const ModelBundle<T>& bundle, const XmcDataset& dataset, std::size_t b_top,
                          std::size_t batch_size) {
  if (dataset.num_labels != bundle.dims().num_labels) {
    throw ConfigError("dataset has " + std::to_string(dataset.num_labels) + " labels, model has " +
                      std::to_string(bundle.dims().num_labels));
  }
  ModelOutput out;
  BatchIterator it(dataset, batch_size, 0, 0, false);
  while (auto batch = it.next()) {
    auto part = score_batch(bundle, *batch, b_top);
    std::move(part.fused.begin(), part.fused.end(), std::back_inserter(out.fused));
    std::move(part.clusters.begin(), part.clusters.end(), std::back_inserter(out.clusters));
  }
  return out;
}

std::vector<PredictionRow> rank_outputs(const ModelOutput& output, std::size_t k) {
  if (k == 0) throw ContractError("top-K needs K >= 1");
  std::vector<PredictionRow> rows(output.fused.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].labels = top_k(output.fused[i], k);
    rows[i].short_list = rows[i].labels.size() < k;
  }
  return rows;
}

template <typename T>
std::vector<PredictionRow> predict(const ModelBundle<T>& bundle, const Batch& batch, std::size_t b_top,
                                   std::size_t k) {
  return rank_outputs(score_batch(bundle, batch, b_top), k);
}

std::vector<PredictionRow> ensemble_combine(const std::vector<ModelOutput>& outputs, std::size_t k) {
  if (outputs.empty()) throw ConfigError("ensemble needs at least one model");
  const std::size_t n = outputs.front().fused.size();
  for (const auto& o : outputs) {
    if (o.fused.size() != n) throw ConfigError("ensemble members scored different instance counts");
  }
  ModelOutput mean;
  mean.fused.resize(n);
  const double inv = 1.0 / static_cast<double>(outputs.size());
  for (std::size_t i = 0; i < n; ++i) {
    std::unordered_map<std::uint32_t, double> total;
    std::vector<std::uint32_t> order;
    for (const auto& o : outputs) {
      for (const auto& s : o.fused[i]) {
        auto [it, fresh] = total.try_emplace(s.label, 0.0);
        if (fresh) order.push_back(s.label);
        it->second += s.score;
      }
    }
    for (auto l : order) mean.fused[i].push_back({l, total[l] * inv});
  }
  return rank_outputs(mean, k);
}

EvalReport evaluate_rows(const std::vector<PredictionRow>& rows, const XmcDataset& dataset,
                         const std::vector<std::size_t>& extra_ks) {
  if (rows.size() != dataset.size()) throw ContractError("prediction count does not match the dataset");
  EvalReport r;
  r.instances = rows.size();
  std::vector<std::size_t> ks = {1, 3, 5};
  ks.insert(ks.end(), extra_ks.begin(), extra_ks.end());
  for (auto k : ks) {
    double sum = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) sum += precision_at_k(rows[i], dataset.documents[i].labels, k);
    r.precision[k] = rows.empty() ? 0.0 : sum / static_cast<double>(rows.size());
  }
  r.p1 = r.precision[1];
  r.p3 = r.precision[3];
  r.p5 = r.precision[5];
  return r;
}

double mean_cluster_recall(const ModelOutput& output, const XmcDataset& dataset, const ClusterMap& map) {
  if (output.clusters.size() != dataset.size()) throw ContractError("model output does not match the dataset");
  double recall = 0.0;
  std::size_t counted = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& truth = dataset.documents[i].labels;
    if (truth.empty()) continue;
    recall += cluster_recall(std::span<const std::uint32_t>(output.clusters[i]), truth, map);
    ++counted;
  }
  return counted ? recall / static_cast<double>(counted) : 1.0;
}

template <typename T>
EvalReport evaluate(const ModelBundle<T>& bundle, const XmcDataset& dataset, std::size_t b_top,
                    std::size_t batch_size, const std::vector<std::size_t>& extra_ks) {
  auto output = score_dataset(bundle, dataset, b_top, batch_size);
  std::size_t depth = 5;
  for (auto k : extra_ks) depth = std::max(depth, k);
  auto report = evaluate_rows(rank_outputs(output, depth), dataset, extra_ks);
  report.b_top = b_top;
  report.cluster_recall = mean_cluster_recall(output, dataset, bundle.clusters());
  return report;
}

void print_report(std::ostream& out, const EvalReport& r) {
  char cell[32];
  std::string header = "instances ", values;
  std::snprintf(cell, sizeof cell, "%-10zu", r.instances);
  values = cell;
  for (const auto& [k, p] : r.precision) {
    std::snprintf(cell, sizeof cell, " %8s", ("P@" + std::to_string(k)).c_str());
    header += cell;
    std::snprintf(cell, sizeof cell, " %8.4f", p);
    values += cell;
  }
  std::snprintf(cell, sizeof cell, " %16s", "cluster_recall");
  header += cell;
  std::snprintf(cell, sizeof cell, " %16.4f", r.cluster_recall);
  values += cell;
  out << header << '\n' << values << '\n';
  out << "instances=" << r.instances << '\n';
  for (const auto& [k, p] : r.precision) out << 'p' << k << '=' << p << '\n';
  out << "cluster_recall=" << r.cluster_recall << "\nb_top=" << r.b_top << '\n';
}

void write_predictions(std::ostream& out, const std::vector<PredictionRow>& rows) {
  char buf[64];
  for (const auto& row : rows) {
    for (std::size_t j = 0; j < row.labels.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%s%u:%.6g", j ? " " : "", row.labels[j].label, row.labels[j].score);
      out << buf;
    }
    out << '\n';
  }
}

#define LIGHTXML_INSTANTIATE_PREDICT(T)                                                                        \
  template double cluster_recall(std::span<const T>, std::span<const std::uint32_t>, const ClusterMap&,        \
                                 std::size_t);                                                                 \
  template ModelOutput score_batch(const ModelBundle<T>&, const Batch&, std::size_t);                          \
  template ModelOutput score_dataset(const ModelBundle<T>&, const XmcDataset&, std::size_t, std::size_t);      \
  template std::vector<PredictionRow> predict(const ModelBundle<T>&, const Batch&, std::size_t, std::size_t);  \
  template EvalReport evaluate(const ModelBundle<T>&, const XmcDataset&, std::size_t, std::size_t,               \
                              const std::vector<std::size_t>&);

LIGHTXML_INSTANTIATE_PREDICT(float)
LIGHTXML_INSTANTIATE_PREDICT(double)

}  // namespace lightxml
