#ifndef MIHASH_INDEX_HPP
#define MIHASH_INDEX_HPP

#include <cstddef>
#include <string>
#include <vector>

#include "mihash/hashcode.hpp"

namespace mihash {

enum class IndexMode { BagCode, InstanceCodes };

std::string to_string(IndexMode m);
IndexMode index_mode_from_string(const std::string& s);

// One database entry: a bag's code(s) plus its label for evaluation.
struct IndexedBag {
  std::string id;
  std::string label;
  std::vector<HashCode> codes;  // one bag code, or one code per instance
};

// Linear-scan hash database. Entries keep insertion order, which is also the
// tie-break order for equal distances. Immutable once built.
class RetrievalIndex {
 public:
  RetrievalIndex() = default;
  RetrievalIndex(std::size_t code_bits, IndexMode mode)
      : code_bits_(code_bits), mode_(mode) {}

  void add(IndexedBag entry);  // validates K and mode arity

  std::size_t code_bits() const { return code_bits_; }
  IndexMode mode() const { return mode_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const IndexedBag& entry(std::size_t i) const { return entries_[i]; }
  const std::vector<IndexedBag>& entries() const { return entries_; }

 private:
  std::size_t code_bits_ = 0;
  IndexMode mode_ = IndexMode::BagCode;
  std::vector<IndexedBag> entries_;
};

// Directional bag distance: mean over the query's codes of the smallest
// Hamming distance into the database bag's codes. Not symmetric.
double bag_distance(const std::vector<HashCode>& query, const std::vector<HashCode>& db);

RetrievalIndex build_index(const std::vector<IndexedBag>& bags, IndexMode mode);

struct QueryHit {
  std::string id;
  std::string label;
  double distance = 0.0;
};

// Ranked top-k scan; ascending distance, ties by insertion order. A non-null
// exclude_id drops that entry from the candidate set (self-queries).
std::vector<QueryHit> query_topk(const RetrievalIndex& index,
                                 const std::vector<HashCode>& query, std::size_t k,
                                 const std::string* exclude_id = nullptr);

struct LabeledQuery {
  std::string id;  // matched against entry ids for self-exclusion
  std::string label;
  std::vector<HashCode> codes;
};

// Fraction of queries whose nearest neighbor shares the query label.
double nnca(const RetrievalIndex& index, const std::vector<LabeledQuery>& queries);

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;
};

struct EvalReport {
  double nnca = 0.0;
  double mean_average_precision = 0.0;
  std::vector<PrPoint> pr_points;  // 20-point interpolated recall grid
  double latency_p50_us = 0.0;
  double latency_p90_us = 0.0;
  double latency_p99_us = 0.0;
};

// Full evaluation pass: nnCA, per-query average precision under label-match
// relevance, precision interpolated at recall {0.05, 0.10, ..., 1.0}, and
// per-query latency percentiles.
EvalReport evaluate(const RetrievalIndex& index, const std::vector<LabeledQuery>& queries);

// Euclidean nearest-neighbor accuracy over real-valued embeddings; the
// non-binarized reference point for ablations.
struct DenseEntry {
  std::string id;
  std::string label;
  std::vector<double> vec;
};
double nnca_dense(const std::vector<DenseEntry>& db, const std::vector<DenseEntry>& queries);

// Index file: one header line (K, mode, entry count), then one line per
// entry: id, label and each code as colon-joined hexadecimal words.
void save_index(const RetrievalIndex& index, const std::string& path);
RetrievalIndex load_index(const std::string& path);

void write_pr_points(const std::vector<PrPoint>& points, const std::string& path);
void write_eval_report(const EvalReport& report, const std::string& path);

}  // namespace mihash

#endif  // MIHASH_INDEX_HPP
