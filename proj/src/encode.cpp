#include "mihash/encode.hpp"

namespace mihash {

namespace {

std::vector<std::vector<HashCode>> codes_per_bag(const ModelParams& params,
                                                 const BagDataset& ds, PoolMode pool,
                                                 IndexMode mode) {
  const ForwardTrace trace = forward(params, ds, pool);
  std::vector<std::vector<HashCode>> out(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (mode == IndexMode::BagCode) {
      out[i].push_back(
          quantize(std::span<const double>(trace.h_mi.row(i), trace.h_mi.cols)));
    } else {
      for (std::size_t r = trace.bag_offsets[i]; r < trace.bag_offsets[i + 1]; ++r) {
        out[i].push_back(
            quantize(std::span<const double>(trace.h_si.row(r), trace.h_si.cols)));
      }
    }
  }
  return out;
}

}  // namespace

std::vector<IndexedBag> encode_bags(const ModelParams& params, const BagDataset& ds,
                                    PoolMode pool, IndexMode mode) {
  auto codes = codes_per_bag(params, ds, pool, mode);
  std::vector<IndexedBag> out;
  out.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out.push_back({ds.bags[i].id, ds.bags[i].label, std::move(codes[i])});
  }
  return out;
}

std::vector<LabeledQuery> encode_queries(const ModelParams& params, const BagDataset& ds,
                                         PoolMode pool, IndexMode mode) {
  auto codes = codes_per_bag(params, ds, pool, mode);
  std::vector<LabeledQuery> out;
  out.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out.push_back({ds.bags[i].id, ds.bags[i].label, std::move(codes[i])});
  }
  return out;
}

std::vector<DenseEntry> encode_dense(const ModelParams& params, const BagDataset& ds,
                                     PoolMode pool) {
  const ForwardTrace trace = forward(params, ds, pool);
  std::vector<DenseEntry> out;
  out.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out.push_back({ds.bags[i].id, ds.bags[i].label, trace.h_mi.row_vec(i)});
  }
  return out;
}

}  // namespace mihash
