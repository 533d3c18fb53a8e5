#include "lightxml/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "lightxml/errors.hpp"

namespace lightxml {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    const std::size_t start = i;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

template <typename Int>
bool parse_int(std::string_view s, Int& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_float(std::string_view s, float& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

SparseLabeledData parse_sparse(std::istream& in, Split split, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError("empty sparse file " + source, 1);
  ++line_no;
  const auto header = split_ws(line);
  std::size_t n = 0;
  SparseLabeledData data;
  if (header.size() != 3 || !parse_int(header[0], n) || !parse_int(header[1], data.feature_dim) ||
      !parse_int(header[2], data.num_labels)) {
    throw ParseError(source + ": header must be \"N D L\"", line_no);
  }
  data.features.reserve(n);
  data.labels.reserve(n);
  while (data.features.size() < n) {
    if (!std::getline(in, line)) {
      throw ParseError(source + ": header declares " + std::to_string(n) + " rows, found " +
                           std::to_string(data.features.size()),
                       line_no + 1);
    }
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto fields = split_ws(line);
    std::vector<std::uint32_t> labels;
    std::size_t first_feature = 0;
    const bool has_label_field = !line.empty() && !std::isspace(static_cast<unsigned char>(line.front())) &&
                                 !fields.empty() && fields[0].find(':') == std::string_view::npos;
    if (has_label_field) {
      first_feature = 1;
      std::string_view lf = fields[0];
      while (!lf.empty()) {
        const auto comma = lf.find(',');
        const auto tok = lf.substr(0, comma);
        std::uint32_t label = 0;
        if (!parse_int(tok, label)) throw ParseError(source + ": bad label id '" + std::string(tok) + "'", line_no);
        if (label >= data.num_labels) {
          throw ParseError(source + ": label " + std::to_string(label) + " >= L=" + std::to_string(data.num_labels),
                           line_no);
        }
        labels.push_back(label);
        if (comma == std::string_view::npos) break;
        lf.remove_prefix(comma + 1);
      }
      std::sort(labels.begin(), labels.end());
      labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    }
    if (split == Split::train && labels.empty()) {
      throw ParseError(source + ": training row " + std::to_string(data.features.size()) + " has no labels",
                       line_no);
    }
    SparseVec vec;
    vec.dim = static_cast<std::uint32_t>(data.feature_dim);
    for (std::size_t f = first_feature; f < fields.size(); ++f) {
      const auto colon = fields[f].find(':');
      std::uint32_t idx = 0;
      float val = 0.0f;
      if (colon == std::string_view::npos || !parse_int(fields[f].substr(0, colon), idx) ||
          !parse_float(fields[f].substr(colon + 1), val)) {
        throw ParseError(source + ": bad feature '" + std::string(fields[f]) + "'", line_no);
      }
      if (idx >= data.feature_dim) {
        throw ParseError(source + ": feature " + std::to_string(idx) + " >= D=" + std::to_string(data.feature_dim),
                         line_no);
      }
      if (!vec.indices.empty() && idx <= vec.indices.back()) {
        throw ParseError(source + ": feature indices not strictly increasing", line_no);
      }
      if (!std::isfinite(val)) throw ParseError(source + ": non-finite feature value", line_no);
      vec.indices.push_back(idx);
      vec.values.push_back(val);
    }
    data.features.push_back(std::move(vec));
    data.labels.push_back(std::move(labels));
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      throw ParseError(source + ": more rows than the header's N=" + std::to_string(n), line_no);
    }
  }
  return data;
}

SparseLabeledData load_sparse(const std::filesystem::path& path, Split split) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open sparse file: " + path.string());
  return parse_sparse(in, split, path.string());
}

void write_sparse(std::ostream& out, const SparseLabeledData& data) {
  out << data.size() << ' ' << data.feature_dim << ' ' << data.num_labels << '\n';
  std::ostringstream row;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& labels = data.labels[i];
    for (std::size_t j = 0; j < labels.size(); ++j) out << (j ? "," : "") << labels[j];
    const auto& f = data.features[i];
    for (std::size_t j = 0; j < f.nnz(); ++j) {
      out << ' ' << f.indices[j] << ':' << std::setprecision(9) << f.values[j];
    }
    out << '\n';
  }
}

void save_sparse(const std::filesystem::path& path, const SparseLabeledData& data) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  write_sparse(out, data);
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open text file: " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) words.push_back(std::move(current));
    current.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else if (c < 0x80 && std::ispunct(c)) {
      flush();
      words.emplace_back(1, ch);
    } else {
      current.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
    }
  }
  flush();
  return words;
}

Vocab::Vocab() : tokens_{"[PAD]", "[CLS]", "[UNK]"} {
  for (std::uint32_t i = 0; i < tokens_.size(); ++i) ids_.emplace(tokens_[i], i);
}

Vocab Vocab::build(const std::vector<std::string>& texts, std::size_t min_freq) {
  std::map<std::string, std::size_t> counts;
  for (const auto& t : texts)
    for (auto& w : split_words(t)) ++counts[std::move(w)];
  if (counts.empty()) throw ConfigError("cannot build a vocabulary from an empty corpus");
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocab v;
  v.min_freq_ = min_freq;
  for (auto& [tok, n] : ranked) {
    if (n < min_freq || v.ids_.count(tok)) continue;
    v.ids_.emplace(tok, static_cast<std::uint32_t>(v.tokens_.size()));
    v.tokens_.push_back(tok);
  }
  return v;
}

Vocab Vocab::build_from_file(const std::filesystem::path& raw_text, std::size_t min_freq) {
  return build(read_lines(raw_text), min_freq);
}

std::uint32_t Vocab::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write vocabulary " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
}

Vocab Vocab::load(const std::filesystem::path& path) {
  auto lines = read_lines(path);
  if (lines.size() < kReserved || lines[kPad] != "[PAD]" || lines[kCls] != "[CLS]" || lines[kUnk] != "[UNK]") {
    throw ParseError("vocabulary file lacks the reserved tokens: " + path.string());
  }
  Vocab v;
  for (std::size_t i = kReserved; i < lines.size(); ++i) {
    if (!v.ids_.emplace(lines[i], static_cast<std::uint32_t>(v.tokens_.size())).second) {
      throw ParseError("duplicate vocabulary token '" + lines[i] + "'", i + 1);
    }
    v.tokens_.push_back(lines[i]);
  }
  return v;
}

std::vector<std::uint32_t> tokenize(std::string_view text, const Vocab& vocab, std::size_t max_len) {
  if (max_len < 2) throw ConfigError("max_len must be at least 2");
  std::vector<std::uint32_t> ids{Vocab::kCls};
  for (const auto& w : split_words(text)) {
    if (ids.size() >= max_len) break;
    ids.push_back(vocab.id(w));
  }
  return ids;
}

void XmcDataset::validate() const {
  const std::size_t vocab_size = vocab ? vocab->size() : 0;
  for (const auto& d : documents) {
    if (d.tokens.empty() || d.tokens.front() != Vocab::kCls) {
      throw ContractError("document " + std::to_string(d.id) + " does not start with [CLS]");
    }
    for (auto t : d.tokens) {
      if (vocab && t >= vocab_size) throw ContractError("token id out of range in document " + std::to_string(d.id));
    }
    for (auto l : d.labels) {
      if (l >= num_labels) throw ContractError("label id out of range in document " + std::to_string(d.id));
    }
    if (split == Split::train && d.labels.empty()) {
      throw ContractError("training document " + std::to_string(d.id) + " has no labels");
    }
  }
}

SparseLabeledData XmcDataset::sparse_view() const {
  SparseLabeledData s;
  s.feature_dim = feature_dim;
  s.num_labels = num_labels;
  for (const auto& d : documents) {
    s.features.push_back(d.sparse);
    s.labels.push_back(d.labels);
  }
  return s;
}

XmcDataset make_dataset(const SparseLabeledData& sparse, const std::vector<std::string>& texts,
                        std::shared_ptr<const Vocab> vocab, std::size_t max_len, Split split) {
  if (sparse.size() != texts.size()) {
    throw ConfigError("sparse file has " + std::to_string(sparse.size()) + " rows but text file has " +
                      std::to_string(texts.size()) + " lines");
  }
  if (!vocab) throw ConfigError("dataset requires a vocabulary");
  XmcDataset ds;
  ds.num_labels = sparse.num_labels;
  ds.feature_dim = sparse.feature_dim;
  ds.split = split;
  ds.vocab = vocab;
  ds.documents.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    ds.documents.push_back({i, tokenize(texts[i], *vocab, max_len), sparse.labels[i], sparse.features[i]});
  }
  ds.validate();
  return ds;
}

std::vector<SparseVec> build_tfidf(const std::vector<std::vector<std::uint32_t>>& docs, std::size_t dim) {
  std::vector<std::size_t> df(dim, 0);
  std::vector<std::map<std::uint32_t, std::size_t>> tf(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    for (auto t : docs[i]) {
      if (t < Vocab::kReserved) continue;
      if (t >= dim) throw ContractError("token id " + std::to_string(t) + " >= feature dim " + std::to_string(dim));
      ++tf[i][t];
    }
    for (const auto& kv : tf[i]) ++df[kv.first];
  }
  const double n = static_cast<double>(docs.size());
  std::vector<SparseVec> rows;
  rows.reserve(docs.size());
  for (const auto& counts : tf) {
    SparseVec v;
    v.dim = static_cast<std::uint32_t>(dim);
    for (const auto& [t, c] : counts) {
      const double idf = std::log((1.0 + n) / (1.0 + static_cast<double>(df[t]))) + 1.0;
      v.indices.push_back(t);
      v.values.push_back(static_cast<float>(static_cast<double>(c) * idf));
    }
    rows.push_back(normalized(v));
  }
  return rows;
}

Batch make_batch(const XmcDataset& dataset, const std::vector<std::size_t>& doc_indices) {
  Batch b;
  b.doc_indices = doc_indices;
  b.batch_size = doc_indices.size();
  for (auto i : doc_indices) b.seq_len = std::max(b.seq_len, dataset.documents.at(i).tokens.size());
  b.tokens.assign(b.batch_size * b.seq_len, Vocab::kPad);
  b.mask.assign(b.batch_size * b.seq_len, 0);
  b.labels.reserve(b.batch_size);
  for (std::size_t r = 0; r < b.batch_size; ++r) {
    const auto& doc = dataset.documents[doc_indices[r]];
    for (std::size_t j = 0; j < doc.tokens.size(); ++j) {
      b.tokens[r * b.seq_len + j] = doc.tokens[j];
      b.mask[r * b.seq_len + j] = 1;
    }
    b.labels.push_back(doc.labels);
  }
  return b;
}

BatchIterator::BatchIterator(const XmcDataset& dataset, std::size_t batch_size, std::uint64_t seed,
                             std::uint64_t epoch, bool shuffle)
    : dataset_(&dataset), batch_size_(batch_size), order_(dataset.size()) {
  if (batch_size == 0) throw ConfigError("batch size must be at least 1");
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  if (shuffle) {
    std::mt19937_64 rng(mix_seed(seed, epoch));
    std::shuffle(order_.begin(), order_.end(), rng);
  }
}

std::optional<Batch> BatchIterator::next() {
  if (cursor_ >= order_.size()) return std::nullopt;
  const std::size_t end = std::min(order_.size(), cursor_ + batch_size_);
  std::vector<std::size_t> idx(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                               order_.begin() + static_cast<std::ptrdiff_t>(end));
  cursor_ = end;
  return make_batch(*dataset_, idx);
}

std::size_t BatchIterator::num_batches() const { return (order_.size() + batch_size_ - 1) / batch_size_; }

}  // namespace lightxml
