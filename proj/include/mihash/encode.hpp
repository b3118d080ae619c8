#ifndef MIHASH_ENCODE_HPP
#define MIHASH_ENCODE_HPP

#include <vector>

#include "mihash/data.hpp"
#include "mihash/index.hpp"
#include "mihash/net.hpp"

namespace mihash {

// One forward pass over the dataset, quantized into index entries: the bag
// code in BagCode mode, per-instance codes in InstanceCodes mode.
std::vector<IndexedBag> encode_bags(const ModelParams& params, const BagDataset& ds,
                                    PoolMode pool, IndexMode mode);

std::vector<LabeledQuery> encode_queries(const ModelParams& params, const BagDataset& ds,
                                         PoolMode pool, IndexMode mode);

// Real-valued bag embeddings (no sign step) for non-binarized evaluation.
std::vector<DenseEntry> encode_dense(const ModelParams& params, const BagDataset& ds,
                                     PoolMode pool);

}  // namespace mihash

#endif  // MIHASH_ENCODE_HPP
