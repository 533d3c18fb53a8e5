#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <vector>

#include "lightxml/corpus.hpp"
#include "lightxml/label_cluster.hpp"
#include "lightxml/model.hpp"

namespace lightxml {

struct ScoredLabel {
  std::uint32_t label = 0;
  double score = 0.0;

  bool operator==(const ScoredLabel&) const = default;
};

/// Top-K labels of one instance, scores non-increasing, ties by ascending label id.
struct PredictionRow {
  std::vector<ScoredLabel> labels;
  // Fewer than K candidates were available.
  bool short_list = false;
};

/// The k best entries; ties by ascending label id.
std::vector<ScoredLabel> top_k(std::vector<ScoredLabel> scored, std::size_t k);

/// |top-k(ranking) ∩ truth| / k; missing slots count as misses. k must be >= 1.
double precision_at_k(std::span<const std::uint32_t> ranking, std::span<const std::uint32_t> truth, std::size_t k);
double precision_at_k(const PredictionRow& row, std::span<const std::uint32_t> truth, std::size_t k);

/// Fraction of `truth` whose cluster is among `selected`. 1 for an empty truth set.
double cluster_recall(std::span<const std::uint32_t> selected, std::span<const std::uint32_t> truth,
                      const ClusterMap& map);
/// Same, selecting the top `b_top` clusters of a score row.
template <typename T>
double cluster_recall(std::span<const T> scores, std::span<const std::uint32_t> truth, const ClusterMap& map,
                      std::size_t b_top);

/// Fused scores recall(g_c(l)) * rank(l) for every candidate of every instance, plus
/// the recalled clusters. No positives are injected.
struct ModelOutput {
  std::vector<std::vector<ScoredLabel>> fused;
  std::vector<std::vector<std::uint32_t>> clusters;
};

template <typename T>
ModelOutput score_batch(const ModelBundle<T>& bundle, const Batch& batch, std::size_t b_top);
/// Throws ConfigError when the dataset label space differs from the bundle's.
template <typename T>
ModelOutput score_dataset(const ModelBundle<T>& bundle, const XmcDataset& dataset, std::size_t b_top,
                          std::size_t batch_size);

std::vector<PredictionRow> rank_outputs(const ModelOutput& output, std::size_t k);

template <typename T>
std::vector<PredictionRow> predict(const ModelBundle<T>& bundle, const Batch& batch, std::size_t b_top,
                                   std::size_t k);

/// Mean fused score per label across models, absent labels counting 0, then top-k.
/// Throws ConfigError when the models cover different instance counts.
std::vector<PredictionRow> ensemble_combine(const std::vector<ModelOutput>& outputs, std::size_t k);

struct EvalReport {
  double p1 = 0.0;
  double p3 = 0.0;
  double p5 = 0.0;
  // Mean over instances with at least one positive label.
  double cluster_recall = 0.0;
  std::size_t b_top = 0;
  std::size_t instances = 0;
  // P@k for every requested k, including 1, 3 and 5.
  std::map<std::size_t, double> precision;
};

/// Mean P@k over instances for k in {1, 3, 5} and `extra_ks`. Rows must hold at least
/// max(k) entries where available.
EvalReport evaluate_rows(const std::vector<PredictionRow>& rows, const XmcDataset& dataset,
                         const std::vector<std::size_t>& extra_ks = {});
/// Mean cluster recall over instances with at least one positive label.
double mean_cluster_recall(const ModelOutput& output, const XmcDataset& dataset, const ClusterMap& map);
/// P@k and cluster recall over `dataset`.
template <typename T>
EvalReport evaluate(const ModelBundle<T>& bundle, const XmcDataset& dataset, std::size_t b_top,
                    std::size_t batch_size, const std::vector<std::size_t>& extra_ks = {});

/// Aligned table followed by key=value lines.
void print_report(std::ostream& out, const EvalReport& report);
/// One line per instance of `label:score` pairs, scores with 6 significant digits.
void write_predictions(std::ostream& out, const std::vector<PredictionRow>& rows);

}  // namespace lightxml
