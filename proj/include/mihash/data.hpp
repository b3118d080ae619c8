#ifndef MIHASH_DATA_HPP
#define MIHASH_DATA_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mihash/rng.hpp"

namespace mihash {

// One feature vector inside a bag; stands in for an image patch or view.
struct Instance {
  std::vector<double> features;
};

// The retrieval unit: a set of instances sharing one weak label.
struct Bag {
  std::string id;
  std::string label;
  std::vector<Instance> instances;

  std::size_t size() const { return instances.size(); }
};

struct BagDataset {
  std::size_t dim = 0;
  std::size_t num_classes = 0;
  std::vector<Bag> bags;

  std::size_t size() const { return bags.size(); }
  std::vector<std::string> labels() const;         // one per bag
  std::vector<std::string> class_labels() const;   // distinct, sorted
  std::size_t total_instances() const;
};

// Symmetric 0/1 similarity with unit diagonal; entry (i, j) is 1 iff the
// two items carry equal labels.
class SimilarityMatrix {
 public:
  SimilarityMatrix() = default;
  explicit SimilarityMatrix(std::size_t n) : n_(n), s_(n * n, 0) {}

  std::size_t size() const { return n_; }
  bool similar(std::size_t i, std::size_t j) const { return s_[i * n_ + j] != 0; }
  void set(std::size_t i, std::size_t j, bool v) { s_[i * n_ + j] = v ? 1 : 0; }

 private:
  std::size_t n_ = 0;
  std::vector<std::uint8_t> s_;
};

SimilarityMatrix similarity_from_labels(const std::vector<std::string>& labels);

// Instance-level similarity: every instance inherits its bag's label, so two
// instances of the same bag are always similar.
SimilarityMatrix instance_similarity(const std::vector<const Bag*>& bags);

struct SyntheticSpec {
  std::size_t classes = 4;
  std::size_t bags_per_class = 50;
  std::size_t dim = 16;
  std::size_t bag_min = 2;
  std::size_t bag_max = 6;
  // Probability that an instance beyond the first carries the bag's concept;
  // the first instance of every bag is always a witness.
  double witness_rate = 0.5;
  double background_spread = 1.0;
  // Distance of concept means from the origin and the spread of witness
  // instances around them.
  double concept_radius = 3.0;
  double witness_spread = 0.25;

  void validate() const;  // throws std::invalid_argument
};

// Draws a weakly labeled bag dataset under the standard MI assumption: a bag
// of class c contains at least one instance near the class concept mean, and
// the rest come from a background distribution shared by all classes.
// Deterministic given the Rng seed.
BagDataset generate_synthetic(Rng& rng, const SyntheticSpec& spec);

// Reassigns floor(rate * N) bag labels, chosen without replacement, each to a
// uniformly drawn different class.
BagDataset inject_label_noise(const BagDataset& ds, Rng& rng, double rate);

struct Split {
  BagDataset train;
  BagDataset test;
};

// Stratified split by class; per-class counts are rounded to the requested
// fraction and clamped so both sides keep at least one bag of every class.
Split split(const BagDataset& ds, Rng& rng, double train_fraction);

// Line-delimited bag file. First line is a header object with keys "dim" and
// "classes"; every following line is one bag with fields "id", "label" and
// "instances" (array of arrays of reals). UTF-8, LF.
void save_bags(const BagDataset& ds, const std::string& path);
BagDataset load_bags(const std::string& path);

}  // namespace mihash

#endif  // MIHASH_DATA_HPP
