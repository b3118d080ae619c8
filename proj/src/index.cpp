#include "mihash/index.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace mihash {

std::string to_string(IndexMode m) {
  return m == IndexMode::BagCode ? "bag_code" : "instance_codes";
}

IndexMode index_mode_from_string(const std::string& s) {
  if (s == "bag_code") return IndexMode::BagCode;
  if (s == "instance_codes") return IndexMode::InstanceCodes;
  throw std::invalid_argument("unknown index mode '" + s + "'");
}

void RetrievalIndex::add(IndexedBag entry) {
  if (entry.codes.empty()) {
    throw std::invalid_argument("RetrievalIndex: entry '" + entry.id + "' has no codes");
  }
  if (mode_ == IndexMode::BagCode && entry.codes.size() != 1) {
    throw std::invalid_argument("RetrievalIndex: bag_code entries carry exactly one code");
  }
  for (const auto& c : entry.codes) {
    if (c.bits() != code_bits_) {
      throw std::invalid_argument("RetrievalIndex: entry '" + entry.id + "' has " +
                                  std::to_string(c.bits()) + "-bit code, index expects " +
                                  std::to_string(code_bits_));
    }
  }
  entries_.push_back(std::move(entry));
}

double bag_distance(const std::vector<HashCode>& query, const std::vector<HashCode>& db) {
  if (query.empty() || db.empty()) {
    throw std::invalid_argument("bag_distance: empty code list");
  }
  std::size_t total = 0;
  for (const auto& q : query) {
    std::size_t best = hamming(q, db.front());
    for (std::size_t j = 1; j < db.size(); ++j) {
      best = std::min(best, hamming(q, db[j]));
    }
    total += best;
  }
  return static_cast<double>(total) / static_cast<double>(query.size());
}

RetrievalIndex build_index(const std::vector<IndexedBag>& bags, IndexMode mode) {
  if (bags.empty()) {
    return RetrievalIndex(0, mode);
  }
  RetrievalIndex index(bags.front().codes.empty() ? 0 : bags.front().codes.front().bits(),
                       mode);
  for (const auto& b : bags) {
    index.add(b);
  }
  return index;
}

namespace {

double entry_distance(const RetrievalIndex& index, const IndexedBag& entry,
                      const std::vector<HashCode>& query) {
  if (index.mode() == IndexMode::BagCode) {
    if (query.size() != 1) {
      throw std::invalid_argument("query_topk: bag_code index expects a single query code");
    }
    return static_cast<double>(hamming(query.front(), entry.codes.front()));
  }
  return bag_distance(query, entry.codes);
}

}  // namespace

std::vector<QueryHit> query_topk(const RetrievalIndex& index,
                                 const std::vector<HashCode>& query, std::size_t k,
                                 const std::string* exclude_id) {
  if (index.empty()) {
    throw std::invalid_argument("query_topk: empty index");
  }
  if (k < 1) {
    throw std::invalid_argument("query_topk: k must be >= 1");
  }
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    const auto& entry = index.entry(i);
    if (exclude_id != nullptr && entry.id == *exclude_id) continue;
    scored.emplace_back(entry_distance(index, entry, query), i);
  }
  // Pair ordering on (distance, insertion position) is the tie-break rule.
  const std::size_t keep = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + keep, scored.end());
  scored.resize(keep);

  std::vector<QueryHit> hits;
  hits.reserve(scored.size());
  for (const auto& [dist, i] : scored) {
    hits.push_back({index.entry(i).id, index.entry(i).label, dist});
  }
  return hits;
}

double nnca(const RetrievalIndex& index, const std::vector<LabeledQuery>& queries) {
  if (index.empty()) {
    throw std::invalid_argument("nnca: empty index");
  }
  if (queries.empty()) {
    throw std::invalid_argument("nnca: no queries");
  }
  std::size_t correct = 0;
  for (const auto& q : queries) {
    const auto hits = query_topk(index, q.codes, 1, &q.id);
    if (!hits.empty() && hits.front().label == q.label) {
      ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(queries.size());
}

EvalReport evaluate(const RetrievalIndex& index, const std::vector<LabeledQuery>& queries) {
  if (index.empty()) {
    throw std::invalid_argument("evaluate: empty index");
  }
  if (queries.empty()) {
    throw std::invalid_argument("evaluate: no queries");
  }

  constexpr std::size_t kGridPoints = 20;
  EvalReport report;
  report.pr_points.resize(kGridPoints);
  for (std::size_t g = 0; g < kGridPoints; ++g) {
    report.pr_points[g].recall = static_cast<double>(g + 1) * 0.05;
  }

  std::vector<double> grid_precision_sum(kGridPoints, 0.0);
  std::vector<double> latencies;
  latencies.reserve(queries.size());
  double ap_sum = 0.0;
  std::size_t top1_correct = 0;

  for (const auto& q : queries) {
    const auto start = std::chrono::steady_clock::now();
    const auto ranking = query_topk(index, q.codes, index.size(), &q.id);
    const auto stop = std::chrono::steady_clock::now();
    latencies.push_back(
        std::chrono::duration<double, std::micro>(stop - start).count());

    if (ranking.empty()) {
      throw std::invalid_argument("evaluate: query '" + q.id +
                                  "' has an empty candidate set");
    }
    std::size_t relevant_total = 0;
    for (const auto& hit : ranking) {
      if (hit.label == q.label) ++relevant_total;
    }
    if (relevant_total == 0) {
      throw std::invalid_argument("evaluate: query label '" + q.label +
                                  "' absent from index");
    }
    if (ranking.front().label == q.label) {
      ++top1_correct;
    }

    // Precision/recall down the ranking, then AP and the interpolated grid.
    std::vector<double> precision(ranking.size());
    std::vector<double> recall(ranking.size());
    std::size_t hits_so_far = 0;
    double ap = 0.0;
    for (std::size_t r = 0; r < ranking.size(); ++r) {
      if (ranking[r].label == q.label) {
        ++hits_so_far;
        ap += static_cast<double>(hits_so_far) / static_cast<double>(r + 1);
      }
      precision[r] = static_cast<double>(hits_so_far) / static_cast<double>(r + 1);
      recall[r] = static_cast<double>(hits_so_far) / static_cast<double>(relevant_total);
    }
    ap_sum += ap / static_cast<double>(relevant_total);

    // Interpolated precision: best precision at any rank reaching the grid
    // recall. Computed right-to-left as a running max.
    std::vector<double> interp(ranking.size());
    double running = 0.0;
    for (std::size_t r = ranking.size(); r-- > 0;) {
      running = std::max(running, precision[r]);
      interp[r] = running;
    }
    std::size_t r = 0;
    for (std::size_t g = 0; g < kGridPoints; ++g) {
      const double target = report.pr_points[g].recall;
      while (r < ranking.size() && recall[r] + 1e-12 < target) ++r;
      grid_precision_sum[g] += r < ranking.size() ? interp[r] : 0.0;
    }
  }

  const double nq = static_cast<double>(queries.size());
  report.nnca = static_cast<double>(top1_correct) / nq;
  report.mean_average_precision = ap_sum / nq;
  for (std::size_t g = 0; g < kGridPoints; ++g) {
    report.pr_points[g].precision = grid_precision_sum[g] / nq;
  }

  std::sort(latencies.begin(), latencies.end());
  auto percentile = [&latencies](double p) {
    const auto idx = static_cast<std::size_t>(
        p * static_cast<double>(latencies.size() - 1) + 0.5);
    return latencies[std::min(idx, latencies.size() - 1)];
  };
  report.latency_p50_us = percentile(0.50);
  report.latency_p90_us = percentile(0.90);
  report.latency_p99_us = percentile(0.99);
  return report;
}

double nnca_dense(const std::vector<DenseEntry>& db, const std::vector<DenseEntry>& queries) {
  if (db.empty() || queries.empty()) {
    throw std::invalid_argument("nnca_dense: empty input");
  }
  std::size_t correct = 0;
  for (const auto& q : queries) {
    double best = std::numeric_limits<double>::infinity();
    const DenseEntry* winner = nullptr;
    for (const auto& e : db) {
      if (e.id == q.id) continue;
      if (e.vec.size() != q.vec.size()) {
        throw std::invalid_argument("nnca_dense: dimension mismatch");
      }
      double d2 = 0.0;
      for (std::size_t k = 0; k < e.vec.size(); ++k) {
        const double diff = e.vec[k] - q.vec[k];
        d2 += diff * diff;
      }
      if (d2 < best) {
        best = d2;
        winner = &e;
      }
    }
    if (winner != nullptr && winner->label == q.label) {
      ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(queries.size());
}

namespace {

std::string code_to_hex(const HashCode& code) {
  std::ostringstream out;
  for (std::size_t w = 0; w < code.words(); ++w) {
    if (w > 0) out << ':';
    out << std::hex << std::setw(16) << std::setfill('0') << code.word(w);
  }
  return out.str();
}

HashCode code_from_hex(const std::string& hex, std::size_t bits) {
  HashCode code(bits);
  std::size_t w = 0;
  std::size_t pos = 0;
  while (pos < hex.size()) {
    const std::size_t sep = hex.find(':', pos);
    const std::string word = hex.substr(pos, sep == std::string::npos ? sep : sep - pos);
    if (w >= code.words() || word.size() != 16) {
      throw std::runtime_error("index file: malformed code word '" + hex + "'");
    }
    std::uint64_t value = std::stoull(word, nullptr, 16);
    for (std::size_t b = 0; b < 64; ++b) {
      const std::size_t k = w * 64 + b;
      if (k < bits) {
        code.set_sign(k, (value >> b) & 1 ? +1 : -1);
      } else if ((value >> b) & 1) {
        throw std::runtime_error("index file: bits set past code length");
      }
    }
    ++w;
    if (sep == std::string::npos) break;
    pos = sep + 1;
  }
  if (w != code.words()) {
    throw std::runtime_error("index file: code word count mismatch");
  }
  return code;
}

}  // namespace

void save_index(const RetrievalIndex& index, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) {
    throw std::runtime_error("save_index: cannot open " + path);
  }
  f << "K=" << index.code_bits() << " mode=" << to_string(index.mode())
    << " entries=" << index.size() << "\n";
  for (const auto& e : index.entries()) {
    f << e.id << '\t' << e.label << '\t';
    for (std::size_t c = 0; c < e.codes.size(); ++c) {
      if (c > 0) f << ',';
      f << code_to_hex(e.codes[c]);
    }
    f << '\n';
  }
  if (!f) {
    throw std::runtime_error("save_index: write failed for " + path);
  }
}

RetrievalIndex load_index(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    throw std::runtime_error("load_index: cannot open " + path);
  }
  std::string header;
  if (!std::getline(f, header)) {
    throw std::runtime_error("load_index: " + path + ": empty file");
  }
  std::size_t bits = 0, count = 0;
  char mode_buf[32] = {0};
  if (std::sscanf(header.c_str(), "K=%zu mode=%31s entries=%zu", &bits, mode_buf,
                  &count) != 3) {
    throw std::runtime_error("load_index: " + path + ": malformed header");
  }
  RetrievalIndex index(bits, index_mode_from_string(mode_buf));

  std::string line;
  std::size_t lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::size_t tab1 = line.find('\t');
    const std::size_t tab2 = tab1 == std::string::npos ? std::string::npos
                                                       : line.find('\t', tab1 + 1);
    if (tab2 == std::string::npos) {
      throw std::runtime_error("load_index: " + path + ":" + std::to_string(lineno) +
                               ": expected id, label and codes");
    }
    IndexedBag entry;
    entry.id = line.substr(0, tab1);
    entry.label = line.substr(tab1 + 1, tab2 - tab1 - 1);
    std::size_t pos = tab2 + 1;
    while (pos <= line.size()) {
      std::size_t comma = line.find(',', pos);
      if (comma == std::string::npos) comma = line.size();
      entry.codes.push_back(code_from_hex(line.substr(pos, comma - pos), bits));
      pos = comma + 1;
    }
    index.add(std::move(entry));
  }
  if (index.size() != count) {
    throw std::runtime_error("load_index: " + path + ": header declares " +
                             std::to_string(count) + " entries, file has " +
                             std::to_string(index.size()));
  }
  return index;
}

void write_pr_points(const std::vector<PrPoint>& points, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) {
    throw std::runtime_error("write_pr_points: cannot open " + path);
  }
  f << "recall,precision\n";
  f.precision(17);
  for (const auto& p : points) {
    f << p.recall << ',' << p.precision << '\n';
  }
}

void write_eval_report(const EvalReport& report, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) {
    throw std::runtime_error("write_eval_report: cannot open " + path);
  }
  f << "metric,value\n";
  f.precision(17);
  f << "nnca," << report.nnca << '\n';
  f << "map," << report.mean_average_precision << '\n';
  f << "latency_p50_us," << report.latency_p50_us << '\n';
  f << "latency_p90_us," << report.latency_p90_us << '\n';
  f << "latency_p99_us," << report.latency_p99_us << '\n';
}

}  // namespace mihash
