#include "mihash/net.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mihash {

std::string to_string(PoolMode m) {
  return m == PoolMode::Max ? "max" : "mean";
}

PoolMode pool_mode_from_string(const std::string& s) {
  if (s == "max") return PoolMode::Max;
  if (s == "mean") return PoolMode::Mean;
  throw std::invalid_argument("unknown pool mode '" + s + "'");
}

std::string to_string(Activation a) {
  return a == Activation::ReLU ? "relu" : "linear";
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::ReLU;
  if (s == "linear") return Activation::Linear;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

namespace {

Matrix glorot_uniform(Rng& rng, std::size_t out_dim, std::size_t in_dim) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
  Matrix w(out_dim, in_dim);
  for (auto& v : w.data) {
    v = rng.uniform(-limit, limit);
  }
  return w;
}

}  // namespace

ModelParams init_params(Rng& rng, std::size_t input_dim,
                        const std::vector<std::size_t>& hidden_dims,
                        std::size_t embed_dim, std::size_t code_bits) {
  if (input_dim < 1 || embed_dim < 1 || code_bits < 1) {
    throw std::invalid_argument("init_params: dims must be positive");
  }
  for (auto h : hidden_dims) {
    if (h < 1) throw std::invalid_argument("init_params: dims must be positive");
  }

  ModelParams p;
  p.code_bits = code_bits;
  std::size_t prev = input_dim;
  for (auto h : hidden_dims) {
    p.encoder.push_back({glorot_uniform(rng, h, prev), std::vector<double>(h, 0.0),
                         Activation::ReLU});
    prev = h;
  }
  p.encoder.push_back({glorot_uniform(rng, embed_dim, prev),
                       std::vector<double>(embed_dim, 0.0), Activation::Linear});
  p.mi_head = {glorot_uniform(rng, code_bits, embed_dim),
               std::vector<double>(code_bits, 0.0)};
  p.si_head = {glorot_uniform(rng, code_bits, embed_dim),
               std::vector<double>(code_bits, 0.0)};
  return p;
}

Gradients zeros_like(const ModelParams& params) {
  Gradients g = params;
  visit_params(g, [](const std::string&, std::vector<double>& v) {
    std::fill(v.begin(), v.end(), 0.0);
  });
  return g;
}

void visit_params(ModelParams& p,
                  const std::function<void(const std::string&, std::vector<double>&)>& fn) {
  for (std::size_t l = 0; l < p.encoder.size(); ++l) {
    const std::string tag = "encoder" + std::to_string(l);
    fn(tag + ".weight", p.encoder[l].weight.data);
    fn(tag + ".bias", p.encoder[l].bias);
  }
  fn("mi_head.weight", p.mi_head.weight.data);
  fn("mi_head.bias", p.mi_head.bias);
  fn("si_head.weight", p.si_head.weight.data);
  fn("si_head.bias", p.si_head.bias);
}

void visit_params(const ModelParams& p,
                  const std::function<void(const std::string&, const std::vector<double>&)>& fn) {
  visit_params(const_cast<ModelParams&>(p),
               [&fn](const std::string& name, std::vector<double>& v) {
                 fn(name, v);
               });
}

std::size_t param_count(const ModelParams& p) {
  std::size_t n = 0;
  visit_params(p, [&n](const std::string&, const std::vector<double>& v) {
    n += v.size();
  });
  return n;
}

double weight_decay_term(const ModelParams& p) {
  double sum = 0.0;
  visit_params(p, [&sum](const std::string&, const std::vector<double>& v) {
    for (double x : v) sum += x * x;
  });
  return sum;
}

std::vector<const Bag*> bag_pointers(const BagDataset& ds) {
  std::vector<const Bag*> out;
  out.reserve(ds.size());
  for (const auto& b : ds.bags) out.push_back(&b);
  return out;
}

namespace {

// y = x * W^T + b rowwise; x is M x in, W is out x in, y is M x out.
Matrix affine(const Matrix& x, const Matrix& w, const std::vector<double>& b) {
  Matrix y(x.rows, w.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    const double* xi = x.row(i);
    double* yi = y.row(i);
    for (std::size_t o = 0; o < w.rows; ++o) {
      const double* wo = w.row(o);
      double s = b[o];
      for (std::size_t k = 0; k < w.cols; ++k) {
        s += wo[k] * xi[k];
      }
      yi[o] = s;
    }
  }
  return y;
}

Matrix apply_activation(const Matrix& pre, Activation act) {
  if (act == Activation::Linear) return pre;
  return map_elementwise(pre, [](double v) { return v > 0.0 ? v : 0.0; });
}

}  // namespace

ForwardTrace forward(const ModelParams& params, const std::vector<const Bag*>& batch,
                     PoolMode pool) {
  if (batch.empty()) {
    throw std::invalid_argument("forward: empty batch");
  }
  const std::size_t d = params.input_dim();
  std::size_t total = 0;
  for (const Bag* b : batch) {
    if (b->instances.empty()) {
      throw std::invalid_argument("forward: bag '" + b->id + "' is empty");
    }
    for (const auto& inst : b->instances) {
      if (inst.features.size() != d) {
        throw std::invalid_argument("forward: bag '" + b->id +
                                    "' instance dimension mismatch");
      }
    }
    total += b->size();
  }

  ForwardTrace t;
  t.pool = pool;
  t.inputs = Matrix(total, d);
  t.bag_offsets.resize(batch.size() + 1, 0);
  std::size_t r = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (const auto& inst : batch[i]->instances) {
      std::copy(inst.features.begin(), inst.features.end(), t.inputs.row(r));
      ++r;
    }
    t.bag_offsets[i + 1] = r;
  }

  const Matrix* x = &t.inputs;
  for (const auto& layer : params.encoder) {
    t.pre.push_back(affine(*x, layer.weight, layer.bias));
    t.act.push_back(apply_activation(t.pre.back(), layer.activation));
    x = &t.act.back();
  }
  const Matrix& z = t.act.back();  // M x embed_dim
  const std::size_t dz = z.cols;
  const std::size_t n_bags = batch.size();

  t.pooled = Matrix(n_bags, dz);
  if (pool == PoolMode::Max) {
    t.routing.assign(n_bags * dz, 0);
    for (std::size_t i = 0; i < n_bags; ++i) {
      const std::size_t lo = t.bag_offsets[i], hi = t.bag_offsets[i + 1];
      for (std::size_t k = 0; k < dz; ++k) {
        std::size_t best = lo;
        for (std::size_t j = lo + 1; j < hi; ++j) {
          if (z(j, k) > z(best, k)) best = j;  // ties keep the lowest row
        }
        t.routing[i * dz + k] = best;
        t.pooled(i, k) = z(best, k);
      }
    }
  } else {
    for (std::size_t i = 0; i < n_bags; ++i) {
      const std::size_t lo = t.bag_offsets[i], hi = t.bag_offsets[i + 1];
      const double inv = 1.0 / static_cast<double>(hi - lo);
      for (std::size_t k = 0; k < dz; ++k) {
        double s = 0.0;
        for (std::size_t j = lo; j < hi; ++j) s += z(j, k);
        t.pooled(i, k) = s * inv;
      }
    }
  }

  t.h_mi = map_elementwise(affine(t.pooled, params.mi_head.weight, params.mi_head.bias),
                           [](double v) { return std::tanh(v); });
  t.h_si = map_elementwise(affine(z, params.si_head.weight, params.si_head.bias),
                           [](double v) { return std::tanh(v); });
  return t;
}

ForwardTrace forward(const ModelParams& params, const BagDataset& ds, PoolMode pool) {
  return forward(params, bag_pointers(ds), pool);
}

HashCode quantize(std::span<const double> h) {
  return HashCode::from_signs(h);
}

std::vector<HashCode> quantize_rows(const Matrix& h) {
  std::vector<HashCode> out;
  out.reserve(h.rows);
  for (std::size_t i = 0; i < h.rows; ++i) {
    out.push_back(quantize(std::span<const double>(h.row(i), h.cols)));
  }
  return out;
}

namespace {

// Accumulates dW += g^T x and db += g for one dense block, then returns
// dx = g * W for the next stage.
void accumulate_affine_grads(const Matrix& x, const Matrix& g, const Matrix& w,
                             Matrix& dw, std::vector<double>& db, Matrix* dx) {
  for (std::size_t i = 0; i < x.rows; ++i) {
    const double* xi = x.row(i);
    const double* gi = g.row(i);
    for (std::size_t o = 0; o < w.rows; ++o) {
      const double go = gi[o];
      if (go != 0.0) {
        double* dwo = dw.row(o);
        for (std::size_t k = 0; k < w.cols; ++k) {
          dwo[k] += go * xi[k];
        }
      }
      db[o] += go;
    }
    if (dx) {
      double* dxi = dx->row(i);
      for (std::size_t o = 0; o < w.rows; ++o) {
        const double go = gi[o];
        if (go == 0.0) continue;
        const double* wo = w.row(o);
        for (std::size_t k = 0; k < w.cols; ++k) {
          dxi[k] += go * wo[k];
        }
      }
    }
  }
}

}  // namespace

Gradients backward(const ModelParams& params, const ForwardTrace& trace,
                   const Matrix& d_h_mi, const Matrix& d_h_si, double lambda_w) {
  const std::size_t n_bags = trace.bag_count();
  const std::size_t n_inst = trace.instance_count();
  const std::size_t dz = trace.pooled.cols;
  if (d_h_mi.rows != n_bags || d_h_mi.cols != params.code_bits ||
      d_h_si.rows != n_inst || d_h_si.cols != params.code_bits) {
    throw std::invalid_argument("backward: head gradient shape mismatch (got " +
                                d_h_mi.shape() + " and " + d_h_si.shape() + ")");
  }

  Gradients grads = zeros_like(params);
  const Matrix& z = trace.act.back();

  // tanh heads: d_pre = d_h * (1 - h^2)
  Matrix d_pre_mi(n_bags, params.code_bits);
  for (std::size_t i = 0; i < d_pre_mi.data.size(); ++i) {
    d_pre_mi.data[i] = d_h_mi.data[i] * (1.0 - trace.h_mi.data[i] * trace.h_mi.data[i]);
  }
  Matrix d_pre_si(n_inst, params.code_bits);
  for (std::size_t i = 0; i < d_pre_si.data.size(); ++i) {
    d_pre_si.data[i] = d_h_si.data[i] * (1.0 - trace.h_si.data[i] * trace.h_si.data[i]);
  }

  Matrix d_pooled(n_bags, dz);
  accumulate_affine_grads(trace.pooled, d_pre_mi, params.mi_head.weight,
                          grads.mi_head.weight, grads.mi_head.bias, &d_pooled);

  // dz gets the instance-head path plus the routed bag-head path.
  Matrix d_z(n_inst, dz);
  accumulate_affine_grads(z, d_pre_si, params.si_head.weight, grads.si_head.weight,
                          grads.si_head.bias, &d_z);

  if (trace.pool == PoolMode::Max) {
    for (std::size_t i = 0; i < n_bags; ++i) {
      for (std::size_t k = 0; k < dz; ++k) {
        d_z(trace.routing[i * dz + k], k) += d_pooled(i, k);
      }
    }
  } else {
    for (std::size_t i = 0; i < n_bags; ++i) {
      const std::size_t lo = trace.bag_offsets[i], hi = trace.bag_offsets[i + 1];
      const double inv = 1.0 / static_cast<double>(hi - lo);
      for (std::size_t k = 0; k < dz; ++k) {
        const double g = d_pooled(i, k) * inv;
        for (std::size_t j = lo; j < hi; ++j) {
          d_z(j, k) += g;
        }
      }
    }
  }

  // Encoder, last layer to first.
  Matrix d_act = std::move(d_z);
  for (std::size_t l = params.encoder.size(); l-- > 0;) {
    const auto& layer = params.encoder[l];
    Matrix d_pre;
    if (layer.activation == Activation::ReLU) {
      d_pre = Matrix(d_act.rows, d_act.cols);
      for (std::size_t i = 0; i < d_pre.data.size(); ++i) {
        d_pre.data[i] = trace.pre[l].data[i] > 0.0 ? d_act.data[i] : 0.0;
      }
    } else {
      d_pre = std::move(d_act);
    }
    const Matrix& input = l == 0 ? trace.inputs : trace.act[l - 1];
    Matrix d_input(input.rows, input.cols);
    accumulate_affine_grads(input, d_pre, layer.weight, grads.encoder[l].weight,
                            grads.encoder[l].bias, l == 0 ? nullptr : &d_input);
    d_act = std::move(d_input);
  }

  if (lambda_w != 0.0) {
    const double scale = 2.0 * lambda_w;
    const ModelParams& theta = params;
    std::vector<std::vector<double>*> slots;
    visit_params(grads, [&slots](const std::string&, std::vector<double>& v) {
      slots.push_back(&v);
    });
    std::size_t slot = 0;
    visit_params(theta, [&](const std::string&, const std::vector<double>& v) {
      std::vector<double>& g = *slots[slot++];
      for (std::size_t i = 0; i < v.size(); ++i) {
        g[i] += scale * v[i];
      }
    });
  }
  return grads;
}

GradCheckReport finite_diff_check(const ModelParams& params,
                                  const std::function<double(const ModelParams&)>& loss,
                                  const Gradients& analytic, double eps,
                                  std::size_t max_coords_per_block, Rng* subsample) {
  if (!(eps > 0.0)) {
    throw std::invalid_argument("finite_diff_check: eps must be positive");
  }
  GradCheckReport report;
  ModelParams probe = params;

  // Collect block views over probe and analytic in lockstep order.
  std::vector<std::pair<std::string, std::vector<double>*>> blocks;
  visit_params(probe, [&blocks](const std::string& name, std::vector<double>& v) {
    blocks.emplace_back(name, &v);
  });
  std::vector<const std::vector<double>*> grad_blocks;
  visit_params(analytic, [&grad_blocks](const std::string&, const std::vector<double>& v) {
    grad_blocks.push_back(&v);
  });

  for (std::size_t b = 0; b < blocks.size(); ++b) {
    auto& [name, values] = blocks[b];
    const std::vector<double>& grad = *grad_blocks[b];
    if (grad.size() != values->size()) {
      throw std::invalid_argument("finite_diff_check: gradient shape mismatch in " + name);
    }

    std::vector<std::size_t> coords(values->size());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    if (max_coords_per_block > 0 && coords.size() > max_coords_per_block) {
      if (subsample == nullptr) {
        throw std::invalid_argument("finite_diff_check: subsampling needs an Rng");
      }
      subsample->shuffle(coords);
      coords.resize(max_coords_per_block);
    }

    double block_max = 0.0;
    for (std::size_t i : coords) {
      const double saved = (*values)[i];
      (*values)[i] = saved + eps;
      const double plus = loss(probe);
      (*values)[i] = saved - eps;
      const double minus = loss(probe);
      (*values)[i] = saved;

      const double numeric = (plus - minus) / (2.0 * eps);
      const double a = grad[i];
      const double rel = std::abs(a - numeric) /
                         std::max({std::abs(a), std::abs(numeric), 1e-8});
      block_max = std::max(block_max, rel);
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_block = name;
        report.worst_index = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
    report.block_errors.emplace_back(name, block_max);
  }
  return report;
}

}  // namespace mihash
