#include "mihash/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace mihash {

std::vector<std::string> BagDataset::labels() const {
  std::vector<std::string> out;
  out.reserve(bags.size());
  for (const auto& b : bags) out.push_back(b.label);
  return out;
}

std::vector<std::string> BagDataset::class_labels() const {
  std::set<std::string> distinct;
  for (const auto& b : bags) distinct.insert(b.label);
  return std::vector<std::string>(distinct.begin(), distinct.end());
}

std::size_t BagDataset::total_instances() const {
  std::size_t n = 0;
  for (const auto& b : bags) n += b.size();
  return n;
}

SimilarityMatrix similarity_from_labels(const std::vector<std::string>& labels) {
  if (labels.empty()) {
    throw std::invalid_argument("similarity_from_labels: empty label list");
  }
  SimilarityMatrix s(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t j = 0; j < labels.size(); ++j) {
      s.set(i, j, labels[i] == labels[j]);
    }
  }
  return s;
}

SimilarityMatrix instance_similarity(const std::vector<const Bag*>& bags) {
  if (bags.empty()) {
    throw std::invalid_argument("instance_similarity: empty bag list");
  }
  std::vector<std::string> labels;
  for (const Bag* b : bags) {
    labels.insert(labels.end(), b->size(), b->label);
  }
  return similarity_from_labels(labels);
}

void SyntheticSpec::validate() const {
  if (classes < 2) throw std::invalid_argument("SyntheticSpec: need at least 2 classes");
  if (dim < 2) throw std::invalid_argument("SyntheticSpec: need dim >= 2");
  if (bags_per_class < 1) throw std::invalid_argument("SyntheticSpec: need bags");
  if (bag_min < 1 || bag_max < bag_min) {
    throw std::invalid_argument("SyntheticSpec: bad bag size range");
  }
  if (witness_rate < 0.0 || witness_rate > 1.0) {
    throw std::invalid_argument("SyntheticSpec: witness_rate outside [0,1]");
  }
  if (background_spread <= 0.0 || witness_spread <= 0.0 || concept_radius <= 0.0) {
    throw std::invalid_argument("SyntheticSpec: spreads and radius must be positive");
  }
}

BagDataset generate_synthetic(Rng& rng, const SyntheticSpec& spec) {
  spec.validate();

  // Concept means: random directions scaled to a fixed radius.
  std::vector<std::vector<double>> means(spec.classes, std::vector<double>(spec.dim));
  for (auto& mu : means) {
    double norm2 = 0.0;
    for (auto& v : mu) {
      v = rng.normal();
      norm2 += v * v;
    }
    const double scale = spec.concept_radius / std::sqrt(std::max(norm2, 1e-300));
    for (auto& v : mu) v *= scale;
  }

  BagDataset ds;
  ds.dim = spec.dim;
  ds.num_classes = spec.classes;
  std::size_t serial = 0;
  for (std::size_t c = 0; c < spec.classes; ++c) {
    for (std::size_t b = 0; b < spec.bags_per_class; ++b) {
      Bag bag;
      bag.id = "b" + std::to_string(serial++);
      bag.label = "c" + std::to_string(c);
      const std::size_t n =
          spec.bag_min + rng.below(spec.bag_max - spec.bag_min + 1);
      bag.instances.reserve(n);
      for (std::size_t j = 0; j < n; ++j) {
        const bool witness = (j == 0) || rng.uniform() < spec.witness_rate;
        Instance inst;
        inst.features.resize(spec.dim);
        for (std::size_t k = 0; k < spec.dim; ++k) {
          inst.features[k] = witness
                                 ? means[c][k] + spec.witness_spread * rng.normal()
                                 : spec.background_spread * rng.normal();
        }
        bag.instances.push_back(std::move(inst));
      }
      ds.bags.push_back(std::move(bag));
    }
  }
  return ds;
}

BagDataset inject_label_noise(const BagDataset& ds, Rng& rng, double rate) {
  if (rate < 0.0 || rate > 1.0) {
    throw std::invalid_argument("inject_label_noise: rate outside [0,1]");
  }
  const std::size_t flips = static_cast<std::size_t>(
      std::floor(rate * static_cast<double>(ds.size())));
  const auto classes = ds.class_labels();
  if (flips > 0 && classes.size() < 2) {
    throw std::invalid_argument("inject_label_noise: need at least 2 classes to flip");
  }

  std::vector<std::size_t> order(ds.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);

  BagDataset out = ds;
  for (std::size_t f = 0; f < flips; ++f) {
    Bag& bag = out.bags[order[f]];
    // Uniform over the other classes.
    std::size_t pick = rng.below(classes.size() - 1);
    for (std::size_t c = 0; c <= pick; ++c) {
      if (classes[c] == bag.label) {
        ++pick;
        break;
      }
    }
    bag.label = classes[pick];
  }
  return out;
}

Split split(const BagDataset& ds, Rng& rng, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("split: train_fraction must lie in (0,1)");
  }
  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    by_class[ds.bags[i].label].push_back(i);
  }

  Split out;
  out.train.dim = out.test.dim = ds.dim;
  out.train.num_classes = out.test.num_classes = ds.num_classes;
  std::vector<std::size_t> train_ids, test_ids;
  for (auto& [label, ids] : by_class) {
    if (ids.size() < 2) {
      throw std::invalid_argument("split: class '" + label +
                                  "' has fewer than 2 bags, cannot stratify");
    }
    rng.shuffle(ids);
    auto n_train = static_cast<std::size_t>(
        std::llround(train_fraction * static_cast<double>(ids.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, ids.size() - 1);
    train_ids.insert(train_ids.end(), ids.begin(), ids.begin() + n_train);
    test_ids.insert(test_ids.end(), ids.begin() + n_train, ids.end());
  }
  // Keep the original dataset order within each side.
  std::sort(train_ids.begin(), train_ids.end());
  std::sort(test_ids.begin(), test_ids.end());
  for (auto i : train_ids) out.train.bags.push_back(ds.bags[i]);
  for (auto i : test_ids) out.test.bags.push_back(ds.bags[i]);
  return out;
}

void save_bags(const BagDataset& ds, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) {
    throw std::runtime_error("save_bags: cannot open " + path);
  }
  nlohmann::json header;
  header["dim"] = ds.dim;
  header["classes"] = ds.num_classes;
  f << header.dump() << "\n";
  for (const auto& bag : ds.bags) {
    nlohmann::json rec;
    rec["id"] = bag.id;
    rec["label"] = bag.label;
    auto& inst = rec["instances"] = nlohmann::json::array();
    for (const auto& i : bag.instances) {
      inst.push_back(i.features);
    }
    f << rec.dump() << "\n";
  }
  if (!f) {
    throw std::runtime_error("save_bags: write failed for " + path);
  }
}

BagDataset load_bags(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    throw std::runtime_error("load_bags: cannot open " + path);
  }
  auto fail = [&](std::size_t line, const std::string& what) {
    throw std::runtime_error("load_bags: " + path + ":" + std::to_string(line) +
                             ": " + what);
  };

  std::string line;
  std::size_t lineno = 0;
  BagDataset ds;
  bool have_header = false;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(lineno, std::string("malformed record: ") + e.what());
    }
    if (!have_header) {
      if (!rec.contains("dim") || !rec.contains("classes")) {
        fail(lineno, "header must declare 'dim' and 'classes'");
      }
      ds.dim = rec.at("dim").get<std::size_t>();
      ds.num_classes = rec.at("classes").get<std::size_t>();
      if (ds.dim == 0 || ds.num_classes == 0) {
        fail(lineno, "header dims must be positive");
      }
      have_header = true;
      continue;
    }
    if (!rec.contains("id") || !rec.contains("label") || !rec.contains("instances")) {
      fail(lineno, "bag record needs 'id', 'label' and 'instances'");
    }
    Bag bag;
    bag.id = rec.at("id").get<std::string>();
    bag.label = rec.at("label").get<std::string>();
    const auto& inst = rec.at("instances");
    if (!inst.is_array() || inst.empty()) {
      fail(lineno, "bag '" + bag.id + "' has no instances");
    }
    for (const auto& row : inst) {
      Instance i;
      i.features = row.get<std::vector<double>>();
      if (i.features.size() != ds.dim) {
        fail(lineno, "bag '" + bag.id + "' has an instance of dimension " +
                         std::to_string(i.features.size()) + ", expected " +
                         std::to_string(ds.dim));
      }
      for (double v : i.features) {
        if (!std::isfinite(v)) {
          fail(lineno, "bag '" + bag.id + "' contains a non-finite feature");
        }
      }
      bag.instances.push_back(std::move(i));
    }
    ds.bags.push_back(std::move(bag));
  }
  if (!have_header || ds.bags.empty()) {
    throw std::runtime_error("load_bags: " + path + ": no bags");
  }
  if (ds.class_labels().size() != ds.num_classes) {
    throw std::runtime_error("load_bags: " + path + ": header declares " +
                             std::to_string(ds.num_classes) + " classes but file has " +
                             std::to_string(ds.class_labels().size()));
  }
  return ds;
}

}  // namespace mihash
