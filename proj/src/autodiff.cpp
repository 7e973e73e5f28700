// Copyright 2026 The dpgdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "dpg/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "dpg/kernels.hpp"

namespace dpg {

const Tensor& Var::value() const {
  if (!tape) throw std::logic_error("Var is not attached to a tape");
  return tape->value(id);
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, nullptr, false});
  return Var{this, nodes_.size() - 1};
}

Var Tape::leaf(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, nullptr, tracking_});
  return Var{this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward) {
  bool needs = false;
  if (tracking_) {
    for (auto id : inputs) needs = needs || nodes_.at(id).requires_grad;
  }
  Node node{std::move(value), {}, nullptr, needs};
  if (needs) {
    node.inputs = std::move(inputs);
    node.backward = std::move(backward);
  }
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Tensor& Tape::grad_slot(std::size_t id) {
  Tensor& g = grads_.at(id);
  if (g.size() == 0) g = Tensor::zeros(nodes_[id].value.shape());
  return g;
}

void Tape::backward(Var root) {
  if (root.tape != this) throw std::invalid_argument("backward: root belongs to another tape");
  const Tensor& rv = value(root.id);
  if (!rv.is_scalar()) {
    throw std::invalid_argument("backward: root must be scalar, got shape " +
                                shape_str(rv.shape()));
  }
  grads_.assign(nodes_.size(), Tensor());
  grads_[root.id] = Tensor::ones(rv.shape());
  for (std::size_t i = root.id + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.backward || grads_[i].size() == 0) continue;
    // Copy: the callback may grow grads_ slots of earlier nodes only.
    const Tensor upstream = grads_[i];
    node.backward(*this, upstream);
  }
}

Tensor Tape::grad(Var v) const {
  if (v.id < grads_.size() && grads_[v.id].size() != 0) return grads_[v.id];
  return Tensor::zeros(value(v.id).shape());
}

namespace ad {

namespace {

Tape& same_tape(Var a, Var b, const char* op) {
  if (!a.tape || a.tape != b.tape) {
    throw std::invalid_argument(std::string(op) + ": operands live on different tapes");
  }
  return *a.tape;
}

void accumulate(Tape& tape, std::size_t id, const Tensor& g) {
  if (!tape.requires_grad(id)) return;
  Tensor& slot = tape.grad_slot(id);
  for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i];
}

// rows/cols view for matmul operands; rank-1 is a single row.
std::pair<std::size_t, std::size_t> as_matrix(const Tensor& t) {
  if (t.rank() == 1) return {1, t.dim(0)};
  if (t.rank() == 2) return {t.dim(0), t.dim(1)};
  throw std::invalid_argument("matmul: operand must be rank 1 or 2, got " + shape_str(t.shape()));
}

}  // namespace

Var add(Var a, Var b) {
  Tape& tape = same_tape(a, b, "add");
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return tape.record(std::move(out), {a.id, b.id}, [ia = a.id, ib = b.id](Tape& t, const Tensor& g) {
    accumulate(t, ia, g);
    accumulate(t, ib, g);
  });
}

Var sub(Var a, Var b) {
  Tape& tape = same_tape(a, b, "sub");
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return tape.record(std::move(out), {a.id, b.id}, [ia = a.id, ib = b.id](Tape& t, const Tensor& g) {
    accumulate(t, ia, g);
    if (t.requires_grad(ib)) {
      Tensor& slot = t.grad_slot(ib);
      for (std::size_t i = 0; i < g.size(); ++i) slot[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  Tape& tape = same_tape(a, b, "mul");
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return tape.record(std::move(out), {a.id, b.id}, [ia = a.id, ib = b.id](Tape& t, const Tensor& g) {
    const Tensor& av = t.value(ia);
    const Tensor& bv = t.value(ib);
    if (t.requires_grad(ia)) {
      Tensor& slot = t.grad_slot(ia);
      for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i] * bv[i];
    }
    if (t.requires_grad(ib)) {
      Tensor& slot = t.grad_slot(ib);
      for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i] * av[i];
    }
  });
}

Var add_bias(Var x, Var bias) {
  Tape& tape = same_tape(x, bias, "add_bias");
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  if (xv.cols() != bv.size()) {
    throw std::invalid_argument("add_bias: shape mismatch " + shape_str(xv.shape()) + " vs " +
                                shape_str(bv.shape()));
  }
  Tensor out = xv;
  const std::size_t n = bv.size();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i % n];
  return tape.record(std::move(out), {x.id, bias.id},
                     [ix = x.id, ib = bias.id, n](Tape& t, const Tensor& g) {
                       accumulate(t, ix, g);
                       if (t.requires_grad(ib)) {
                         Tensor& slot = t.grad_slot(ib);
                         for (std::size_t i = 0; i < g.size(); ++i) slot[i % n] += g[i];
                       }
                     });
}

Var matmul(Var a, Var b) {
  Tape& tape = same_tape(a, b, "matmul");
  const auto [m, k] = as_matrix(a.value());
  const auto [k2, n] = as_matrix(b.value());
  if (k != k2 || b.value().rank() != 2) {
    throw std::invalid_argument("matmul: shape mismatch " + shape_str(a.value().shape()) +
                                " vs " + shape_str(b.value().shape()));
  }
  Tensor out(Shape{m, n});
  kernels::matmul(a.value().data(), b.value().data(), out.data(), m, k, n);
  return tape.record(std::move(out), {a.id, b.id},
                     [ia = a.id, ib = b.id, m, k, n](Tape& t, const Tensor& g) {
                       if (t.requires_grad(ia)) {
                         kernels::matmul_add_bt(g.data(), t.value(ib).data(),
                                                t.grad_slot(ia).data(), m, n, k);
                       }
                       if (t.requires_grad(ib)) {
                         kernels::matmul_add_at(t.value(ia).data(), g.data(),
                                                t.grad_slot(ib).data(), m, k, n);
                       }
                     });
}

Var scale(Var a, double s) {
  Tensor out = a.value();
  for (double& v : out.data()) v *= s;
  return a.tape->record(std::move(out), {a.id}, [ia = a.id, s](Tape& t, const Tensor& g) {
    if (!t.requires_grad(ia)) return;
    Tensor& slot = t.grad_slot(ia);
    for (std::size_t i = 0; i < g.size(); ++i) slot[i] += s * g[i];
  });
}

Var sum(Var a) {
  return a.tape->record(Tensor::scalar(dpg::sum(a.value())), {a.id},
                        [ia = a.id](Tape& t, const Tensor& g) {
                          if (!t.requires_grad(ia)) return;
                          Tensor& slot = t.grad_slot(ia);
                          for (double& v : slot.data()) v += g[0];
                        });
}

Var mean(Var a) {
  const double inv = 1.0 / static_cast<double>(a.value().size());
  return a.tape->record(Tensor::scalar(dpg::sum(a.value()) * inv), {a.id},
                        [ia = a.id, inv](Tape& t, const Tensor& g) {
                          if (!t.requires_grad(ia)) return;
                          Tensor& slot = t.grad_slot(ia);
                          for (double& v : slot.data()) v += g[0] * inv;
                        });
}

Var square(Var a) {
  Tensor out = a.value();
  for (double& v : out.data()) v *= v;
  return a.tape->record(std::move(out), {a.id}, [ia = a.id](Tape& t, const Tensor& g) {
    if (!t.requires_grad(ia)) return;
    const Tensor& av = t.value(ia);
    Tensor& slot = t.grad_slot(ia);
    for (std::size_t i = 0; i < g.size(); ++i) slot[i] += 2.0 * av[i] * g[i];
  });
}

Var sqrt(Var a) {
  Tensor out = a.value();
  for (double& v : out.data()) {
    if (v < 0.0) throw std::domain_error("sqrt: negative input");
    v = std::sqrt(v);
  }
  return a.tape->record(std::move(out), {a.id}, [ia = a.id, self = a.tape->size()](Tape& t, const Tensor& g) {
    if (!t.requires_grad(ia)) return;
    const Tensor& y = t.value(self);
    Tensor& slot = t.grad_slot(ia);
    for (std::size_t i = 0; i < g.size(); ++i) slot[i] += 0.5 * g[i] / y[i];
  });
}

Var tanh(Var a) {
  Tensor out(a.value().shape());
  kernels::tanh_map(a.value().data(), out.data());
  return a.tape->record(std::move(out), {a.id}, [ia = a.id, self = a.tape->size()](Tape& t, const Tensor& g) {
    if (!t.requires_grad(ia)) return;
    const Tensor& y = t.value(self);
    Tensor& slot = t.grad_slot(ia);
    for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var l2norm(Var a) {
  const double norm = std::sqrt(squared_norm(a.value()));
  return a.tape->record(Tensor::scalar(norm), {a.id}, [ia = a.id, norm](Tape& t, const Tensor& g) {
    if (!t.requires_grad(ia) || norm == 0.0) return;
    const Tensor& av = t.value(ia);
    Tensor& slot = t.grad_slot(ia);
    for (std::size_t i = 0; i < av.size(); ++i) slot[i] += g[0] * av[i] / norm;
  });
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no operands");
  Tape& tape = *parts.front().tape;
  const Tensor& first = parts.front().value();
  const std::size_t rank = first.rank();
  const std::size_t rows = first.rows();
  if (rank > 2) throw std::invalid_argument("concat: rank > 2 unsupported");
  std::vector<std::size_t> widths;
  std::vector<std::size_t> ids;
  std::size_t total = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    if (p.tape != &tape || v.rank() != rank || v.rows() != rows) {
      throw std::invalid_argument("concat: shape mismatch " + shape_str(first.shape()) + " vs " +
                                  shape_str(v.shape()));
    }
    widths.push_back(v.cols());
    ids.push_back(p.id);
    total += v.cols();
  }
  Tensor out(rank == 1 ? Shape{total} : Shape{rows, total});
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Tensor& v = parts[p].value();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(v.data().begin() + r * widths[p], widths[p],
                  out.data().begin() + r * total + offset);
    }
    offset += widths[p];
  }
  auto inputs = ids;
  return tape.record(std::move(out), std::move(inputs),
                     [ids, widths, rows, total](Tape& t, const Tensor& g) {
                       std::size_t off = 0;
                       for (std::size_t p = 0; p < ids.size(); ++p) {
                         if (t.requires_grad(ids[p])) {
                           Tensor& slot = t.grad_slot(ids[p]);
                           for (std::size_t r = 0; r < rows; ++r) {
                             for (std::size_t c = 0; c < widths[p]; ++c) {
                               slot[r * widths[p] + c] += g[r * total + off + c];
                             }
                           }
                         }
                         off += widths[p];
                       }
                     });
}

Var concat(std::initializer_list<Var> parts) {
  return concat(std::span<const Var>(parts.begin(), parts.size()));
}

Var reshape(Var a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return a.tape->record(std::move(out), {a.id}, [ia = a.id](Tape& t, const Tensor& g) {
    accumulate(t, ia, g);
  });
}

Var gather_rows(Var table, std::vector<std::size_t> indices) {
  const Tensor& tv = table.value();
  if (tv.rank() != 2) throw std::invalid_argument("gather_rows: table must be rank 2");
  const std::size_t width = tv.cols();
  Tensor out(Shape{indices.size(), width});
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= tv.dim(0)) {
      throw std::out_of_range("gather_rows: index " + std::to_string(indices[r]) +
                              " outside table of " + std::to_string(tv.dim(0)) + " rows");
    }
    std::copy_n(tv.row(indices[r]).begin(), width, out.row(r).begin());
  }
  return table.tape->record(std::move(out), {table.id},
                            [it = table.id, indices = std::move(indices), width](Tape& t, const Tensor& g) {
                              if (!t.requires_grad(it)) return;
                              Tensor& slot = t.grad_slot(it);
                              for (std::size_t r = 0; r < indices.size(); ++r) {
                                for (std::size_t c = 0; c < width; ++c) {
                                  slot[indices[r] * width + c] += g[r * width + c];
                                }
                              }
                            });
}

Var scale_rows(Var x, std::vector<double> coeffs) {
  const Tensor& xv = x.value();
  if (coeffs.size() != xv.rows()) {
    throw std::invalid_argument("scale_rows: " + std::to_string(coeffs.size()) +
                                " coefficients for shape " + shape_str(xv.shape()));
  }
  Tensor out = xv;
  const std::size_t w = xv.cols();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= coeffs[i / w];
  return x.tape->record(std::move(out), {x.id},
                        [ix = x.id, coeffs = std::move(coeffs), w](Tape& t, const Tensor& g) {
                          if (!t.requires_grad(ix)) return;
                          Tensor& slot = t.grad_slot(ix);
                          for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i] * coeffs[i / w];
                        });
}

Var sum_rows(Var x) {
  const Tensor& xv = x.value();
  const std::size_t rows = xv.rows();
  const std::size_t w = xv.cols();
  Tensor out(Shape{rows, 1});
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (double v : xv.row(r)) s += v;
    out[r] = s;
  }
  return x.tape->record(std::move(out), {x.id}, [ix = x.id, w](Tape& t, const Tensor& g) {
    if (!t.requires_grad(ix)) return;
    Tensor& slot = t.grad_slot(ix);
    for (std::size_t i = 0; i < slot.size(); ++i) slot[i] += g[i / w];
  });
}

Var normalize_rows(Var x) {
  const Tensor& xv = x.value();
  const std::size_t rows = xv.rows();
  const std::size_t w = xv.cols();
  Tensor out = xv;
  std::vector<double> norms(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (double v : xv.row(r)) s += v * v;
    norms[r] = std::sqrt(s);
    if (norms[r] == 0.0) throw std::domain_error("normalize_rows: zero row");
    for (double& v : out.row(r)) v /= norms[r];
  }
  return x.tape->record(std::move(out), {x.id},
                        [ix = x.id, self = x.tape->size(), norms = std::move(norms), w](Tape& t, const Tensor& g) {
                          if (!t.requires_grad(ix)) return;
                          const Tensor& y = t.value(self);
                          Tensor& slot = t.grad_slot(ix);
                          // d(x/|x|) = (g - y (y.g)) / |x|
                          for (std::size_t r = 0; r < norms.size(); ++r) {
                            double yg = 0.0;
                            for (std::size_t c = 0; c < w; ++c) yg += y[r * w + c] * g[r * w + c];
                            for (std::size_t c = 0; c < w; ++c) {
                              slot[r * w + c] += (g[r * w + c] - y[r * w + c] * yg) / norms[r];
                            }
                          }
                        });
}

Var clip_grad_rows(Var x, double max_norm) {
  if (!(max_norm > 0.0)) throw std::invalid_argument("clip_grad_rows: max_norm must be > 0");
  const std::size_t w = x.value().cols();
  return x.tape->record(x.value(), {x.id}, [ix = x.id, w, max_norm](Tape& t, const Tensor& g) {
    if (!t.requires_grad(ix)) return;
    Tensor& slot = t.grad_slot(ix);
    for (std::size_t r = 0; r * w < g.size(); ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < w; ++c) s += g[r * w + c] * g[r * w + c];
      const double n = std::sqrt(s);
      const double k = n > max_norm ? max_norm / n : 1.0;
      for (std::size_t c = 0; c < w; ++c) slot[r * w + c] += k * g[r * w + c];
    }
  });
}

}  // namespace ad
}  // namespace dpg
