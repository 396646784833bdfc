// Copyright 2026 The vectok Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "vectok/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_set>

namespace vectok::nn {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

void check(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

// C[m,n] += A[m,k] * B[k,n], optionally transposing either input.
void gemm_acc(const double* a, size_t ar, size_t ac, bool ta, const double* b,
              size_t br, size_t bc, bool tb, double* c) {
  const size_t m = ta ? ac : ar;
  const size_t k = ta ? ar : ac;
  const size_t n = tb ? br : bc;
  for (size_t i = 0; i < m; ++i) {
    for (size_t p = 0; p < k; ++p) {
      const double av = ta ? a[p * ac + i] : a[i * ac + p];
      if (av == 0.0) continue;
      const double* brow = tb ? nullptr : &b[p * bc];
      double* crow = &c[i * n];
      if (!tb) {
        for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      } else {
        for (size_t j = 0; j < n; ++j) crow[j] += av * b[j * bc + p];
      }
    }
  }
}

TensorPtr make_node(size_t rows, size_t cols,
                    std::vector<TensorPtr> parents) {
  auto t = std::make_shared<Tensor>();
  t->rows = rows;
  t->cols = cols;
  t->value.assign(rows * cols, 0.0);
  t->parents = std::move(parents);
  t->requires_grad = std::any_of(
      t->parents.begin(), t->parents.end(),
      [](const TensorPtr& p) { return p->requires_grad; });
  return t;
}

}  // namespace

TensorPtr make_tensor(size_t rows, size_t cols, bool requires_grad) {
  auto t = std::make_shared<Tensor>();
  t->rows = rows;
  t->cols = cols;
  t->value.assign(rows * cols, 0.0);
  t->requires_grad = requires_grad;
  return t;
}

TensorPtr make_constant(size_t rows, size_t cols,
                        const std::vector<double>& value) {
  check(value.size() == rows * cols, "constant size mismatch");
  auto t = make_tensor(rows, cols, false);
  t->value = value;
  return t;
}

TensorPtr make_param(size_t rows, size_t cols) {
  return make_tensor(rows, cols, true);
}

void init_gaussian(const TensorPtr& t, SplitMix64& rng, double stddev) {
  for (double& v : t->value) v = rng.gaussian() * stddev;
}

void init_constant(const TensorPtr& t, double value) {
  std::fill(t->value.begin(), t->value.end(), value);
}

TensorPtr matmul(const TensorPtr& a, const TensorPtr& b) {
  check(a->cols == b->rows, "matmul shape mismatch");
  auto out = make_node(a->rows, b->cols, {a, b});
  gemm_acc(a->value.data(), a->rows, a->cols, false, b->value.data(), b->rows,
           b->cols, false, out->value.data());
  Tensor* pa = a.get();
  Tensor* pb = b.get();
  out->backward_fn = [pa, pb](const Tensor& self) {
    if (pa->requires_grad) {
      pa->ensure_grad();
      gemm_acc(self.grad.data(), self.rows, self.cols, false,
               pb->value.data(), pb->rows, pb->cols, true, pa->grad.data());
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      gemm_acc(pa->value.data(), pa->rows, pa->cols, true, self.grad.data(),
               self.rows, self.cols, false, pb->grad.data());
    }
  };
  return out;
}

TensorPtr matmul_nt(const TensorPtr& a, const TensorPtr& b) {
  check(a->cols == b->cols, "matmul_nt shape mismatch");
  auto out = make_node(a->rows, b->rows, {a, b});
  gemm_acc(a->value.data(), a->rows, a->cols, false, b->value.data(), b->rows,
           b->cols, true, out->value.data());
  Tensor* pa = a.get();
  Tensor* pb = b.get();
  out->backward_fn = [pa, pb](const Tensor& self) {
    if (pa->requires_grad) {
      pa->ensure_grad();
      gemm_acc(self.grad.data(), self.rows, self.cols, false,
               pb->value.data(), pb->rows, pb->cols, false, pa->grad.data());
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      gemm_acc(self.grad.data(), self.rows, self.cols, true, pa->value.data(),
               pa->rows, pa->cols, false, pb->grad.data());
    }
  };
  return out;
}

TensorPtr add(const TensorPtr& a, const TensorPtr& b) {
  check(a->rows == b->rows && a->cols == b->cols, "add shape mismatch");
  auto out = make_node(a->rows, a->cols, {a, b});
  for (size_t i = 0; i < out->value.size(); ++i)
    out->value[i] = a->value[i] + b->value[i];
  Tensor* pa = a.get();
  Tensor* pb = b.get();
  out->backward_fn = [pa, pb](const Tensor& self) {
    for (Tensor* p : {pa, pb}) {
      if (!p->requires_grad) continue;
      p->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
    }
  };
  return out;
}

TensorPtr sub(const TensorPtr& a, const TensorPtr& b) {
  check(a->rows == b->rows && a->cols == b->cols, "sub shape mismatch");
  auto out = make_node(a->rows, a->cols, {a, b});
  for (size_t i = 0; i < out->value.size(); ++i)
    out->value[i] = a->value[i] - b->value[i];
  Tensor* pa = a.get();
  Tensor* pb = b.get();
  out->backward_fn = [pa, pb](const Tensor& self) {
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i)
        pa->grad[i] += self.grad[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i)
        pb->grad[i] -= self.grad[i];
    }
  };
  return out;
}

TensorPtr scale(const TensorPtr& a, double s) {
  auto out = make_node(a->rows, a->cols, {a});
  for (size_t i = 0; i < out->value.size(); ++i) out->value[i] = a->value[i] * s;
  Tensor* pa = a.get();
  out->backward_fn = [pa, s](const Tensor& self) {
    if (!pa->requires_grad) return;
    pa->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i)
      pa->grad[i] += self.grad[i] * s;
  };
  return out;
}

TensorPtr add_rowvec(const TensorPtr& a, const TensorPtr& v) {
  return add_rowvec_range(a, v, 0, a->rows);
}

TensorPtr add_rowvec_range(const TensorPtr& a, const TensorPtr& v, size_t r0,
                           size_t r1) {
  check(v->rows == 1 && v->cols == a->cols, "row vector shape mismatch");
  check(r0 <= r1 && r1 <= a->rows, "row range out of bounds");
  auto out = make_node(a->rows, a->cols, {a, v});
  out->value = a->value;
  for (size_t r = r0; r < r1; ++r)
    for (size_t c = 0; c < a->cols; ++c) out->v(r, c) += v->value[c];
  Tensor* pa = a.get();
  Tensor* pv = v.get();
  out->backward_fn = [pa, pv, r0, r1](const Tensor& self) {
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i)
        pa->grad[i] += self.grad[i];
    }
    if (pv->requires_grad) {
      pv->ensure_grad();
      for (size_t r = r0; r < r1; ++r)
        for (size_t c = 0; c < self.cols; ++c)
          pv->grad[c] += self.grad[r * self.cols + c];
    }
  };
  return out;
}

TensorPtr gelu(const TensorPtr& a) {
  auto out = make_node(a->rows, a->cols, {a});
  for (size_t i = 0; i < a->value.size(); ++i) {
    double x = a->value[i];
    out->value[i] = x * 0.5 * (1.0 + std::erf(x * kInvSqrt2));
  }
  Tensor* pa = a.get();
  out->backward_fn = [pa](const Tensor& self) {
    if (!pa->requires_grad) return;
    pa->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) {
      double x = pa->value[i];
      double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
      double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
      pa->grad[i] += self.grad[i] * (cdf + x * pdf);
    }
  };
  return out;
}

TensorPtr layer_norm(const TensorPtr& a, const TensorPtr& gamma,
                     const TensorPtr& beta, double eps) {
  check(gamma->rows == 1 && gamma->cols == a->cols, "layer_norm gamma shape");
  check(beta->rows == 1 && beta->cols == a->cols, "layer_norm beta shape");
  auto out = make_node(a->rows, a->cols, {a, gamma, beta});
  const size_t c = a->cols;
  // Cache per-row statistics and normalized values for the backward pass.
  auto xhat = std::make_shared<std::vector<double>>(a->value.size());
  auto inv_sigma = std::make_shared<std::vector<double>>(a->rows);
  for (size_t r = 0; r < a->rows; ++r) {
    double mean = 0.0;
    for (size_t j = 0; j < c; ++j) mean += a->v(r, j);
    mean /= static_cast<double>(c);
    double var = 0.0;
    for (size_t j = 0; j < c; ++j) {
      double d = a->v(r, j) - mean;
      var += d * d;
    }
    var /= static_cast<double>(c);
    double is = 1.0 / std::sqrt(var + eps);
    (*inv_sigma)[r] = is;
    for (size_t j = 0; j < c; ++j) {
      double xh = (a->v(r, j) - mean) * is;
      (*xhat)[r * c + j] = xh;
      out->v(r, j) = gamma->value[j] * xh + beta->value[j];
    }
  }
  Tensor* pa = a.get();
  Tensor* pg = gamma.get();
  Tensor* pb = beta.get();
  out->backward_fn = [pa, pg, pb, xhat, inv_sigma, c](const Tensor& self) {
    for (size_t r = 0; r < self.rows; ++r) {
      const double* dy = &self.grad[r * c];
      const double* xh = &(*xhat)[r * c];
      if (pg->requires_grad) {
        pg->ensure_grad();
        for (size_t j = 0; j < c; ++j) pg->grad[j] += dy[j] * xh[j];
      }
      if (pb->requires_grad) {
        pb->ensure_grad();
        for (size_t j = 0; j < c; ++j) pb->grad[j] += dy[j];
      }
      if (pa->requires_grad) {
        pa->ensure_grad();
        double mean_d = 0.0, mean_dx = 0.0;
        for (size_t j = 0; j < c; ++j) {
          double d = dy[j] * pg->value[j];
          mean_d += d;
          mean_dx += d * xh[j];
        }
        mean_d /= static_cast<double>(c);
        mean_dx /= static_cast<double>(c);
        double is = (*inv_sigma)[r];
        for (size_t j = 0; j < c; ++j) {
          double d = dy[j] * pg->value[j];
          pa->grad[r * c + j] += is * (d - mean_d - xh[j] * mean_dx);
        }
      }
    }
  };
  return out;
}

TensorPtr softmax_rows(const TensorPtr& a) {
  auto out = make_node(a->rows, a->cols, {a});
  for (size_t r = 0; r < a->rows; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < a->cols; ++j) mx = std::max(mx, a->v(r, j));
    double denom = 0.0;
    for (size_t j = 0; j < a->cols; ++j) {
      double e = std::exp(a->v(r, j) - mx);
      out->v(r, j) = e;
      denom += e;
    }
    for (size_t j = 0; j < a->cols; ++j) out->v(r, j) /= denom;
  }
  Tensor* pa = a.get();
  out->backward_fn = [pa](const Tensor& self) {
    if (!pa->requires_grad) return;
    pa->ensure_grad();
    for (size_t r = 0; r < self.rows; ++r) {
      double dot = 0.0;
      for (size_t j = 0; j < self.cols; ++j)
        dot += self.grad[r * self.cols + j] * self.value[r * self.cols + j];
      for (size_t j = 0; j < self.cols; ++j) {
        size_t i = r * self.cols + j;
        pa->grad[i] += (self.grad[i] - dot) * self.value[i];
      }
    }
  };
  return out;
}

TensorPtr gather_rows(const TensorPtr& table,
                      const std::vector<uint32_t>& indices) {
  for (uint32_t idx : indices)
    check(idx < table->rows, "gather index out of range");
  auto out = make_node(indices.size(), table->cols, {table});
  for (size_t r = 0; r < indices.size(); ++r)
    std::copy_n(&table->value[indices[r] * table->cols], table->cols,
                &out->value[r * table->cols]);
  Tensor* pt = table.get();
  auto idx = indices;
  out->backward_fn = [pt, idx](const Tensor& self) {
    if (!pt->requires_grad) return;
    pt->ensure_grad();
    for (size_t r = 0; r < idx.size(); ++r)
      for (size_t c = 0; c < self.cols; ++c)
        pt->grad[idx[r] * self.cols + c] += self.grad[r * self.cols + c];
  };
  return out;
}

TensorPtr concat_rows(const TensorPtr& a, const TensorPtr& b) {
  check(a->cols == b->cols, "concat_rows column mismatch");
  auto out = make_node(a->rows + b->rows, a->cols, {a, b});
  std::copy(a->value.begin(), a->value.end(), out->value.begin());
  std::copy(b->value.begin(), b->value.end(),
            out->value.begin() + a->value.size());
  Tensor* pa = a.get();
  Tensor* pb = b.get();
  out->backward_fn = [pa, pb](const Tensor& self) {
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (size_t i = 0; i < pa->grad.size(); ++i) pa->grad[i] += self.grad[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      size_t off = pa->value.size();
      for (size_t i = 0; i < pb->grad.size(); ++i)
        pb->grad[i] += self.grad[off + i];
    }
  };
  return out;
}

TensorPtr slice_rows(const TensorPtr& a, size_t r0, size_t r1) {
  check(r0 < r1 && r1 <= a->rows, "slice_rows out of bounds");
  auto out = make_node(r1 - r0, a->cols, {a});
  std::copy(a->value.begin() + r0 * a->cols, a->value.begin() + r1 * a->cols,
            out->value.begin());
  Tensor* pa = a.get();
  out->backward_fn = [pa, r0](const Tensor& self) {
    if (!pa->requires_grad) return;
    pa->ensure_grad();
    size_t off = r0 * self.cols;
    for (size_t i = 0; i < self.grad.size(); ++i)
      pa->grad[off + i] += self.grad[i];
  };
  return out;
}

TensorPtr slice_cols(const TensorPtr& a, size_t c0, size_t c1) {
  check(c0 < c1 && c1 <= a->cols, "slice_cols out of bounds");
  auto out = make_node(a->rows, c1 - c0, {a});
  for (size_t r = 0; r < a->rows; ++r)
    std::copy_n(&a->value[r * a->cols + c0], c1 - c0,
                &out->value[r * out->cols]);
  Tensor* pa = a.get();
  out->backward_fn = [pa, c0](const Tensor& self) {
    if (!pa->requires_grad) return;
    pa->ensure_grad();
    for (size_t r = 0; r < self.rows; ++r)
      for (size_t c = 0; c < self.cols; ++c)
        pa->grad[r * pa->cols + c0 + c] += self.grad[r * self.cols + c];
  };
  return out;
}

TensorPtr concat_cols(const std::vector<TensorPtr>& parts) {
  check(!parts.empty(), "concat_cols needs at least one part");
  size_t rows = parts[0]->rows;
  size_t cols = 0;
  for (const auto& p : parts) {
    check(p->rows == rows, "concat_cols row mismatch");
    cols += p->cols;
  }
  auto out = make_node(rows, cols, parts);
  size_t off = 0;
  for (const auto& p : parts) {
    for (size_t r = 0; r < rows; ++r)
      std::copy_n(&p->value[r * p->cols], p->cols,
                  &out->value[r * cols + off]);
    off += p->cols;
  }
  std::vector<Tensor*> raw;
  for (const auto& p : parts) raw.push_back(p.get());
  out->backward_fn = [raw](const Tensor& self) {
    size_t off = 0;
    for (Tensor* p : raw) {
      if (p->requires_grad) {
        p->ensure_grad();
        for (size_t r = 0; r < self.rows; ++r)
          for (size_t c = 0; c < p->cols; ++c)
            p->grad[r * p->cols + c] += self.grad[r * self.cols + off + c];
      }
      off += p->cols;
    }
  };
  return out;
}

TensorPtr mse(const TensorPtr& pred, const TensorPtr& target) {
  check(pred->rows == target->rows && pred->cols == target->cols,
        "mse shape mismatch");
  auto out = make_node(1, 1, {pred, target});
  const double n = static_cast<double>(pred->value.size());
  double acc = 0.0;
  for (size_t i = 0; i < pred->value.size(); ++i) {
    double d = pred->value[i] - target->value[i];
    acc += d * d;
  }
  out->value[0] = acc / n;
  Tensor* pp = pred.get();
  Tensor* pt = target.get();
  out->backward_fn = [pp, pt, n](const Tensor& self) {
    if (!pp->requires_grad) return;
    pp->ensure_grad();
    const double s = 2.0 * self.grad[0] / n;
    for (size_t i = 0; i < pp->grad.size(); ++i)
      pp->grad[i] += s * (pp->value[i] - pt->value[i]);
  };
  return out;
}

TensorPtr ssim(const TensorPtr& pred, const TensorPtr& target, size_t window) {
  check(pred->rows == target->rows && pred->cols == target->cols,
        "ssim shape mismatch");
  check(window >= 1, "ssim window must be >= 1");
  const size_t wr = std::min(window, pred->rows);
  const size_t wc = std::min(window, pred->cols);
  const size_t positions_r = pred->rows - wr + 1;
  const size_t positions_c = pred->cols - wc + 1;
  const double n = static_cast<double>(wr * wc);
  const size_t num_windows = positions_r * positions_c;

  double range = 0.0;
  {
    double lo = target->value[0], hi = target->value[0];
    for (double v : target->value) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    range = hi - lo;
  }
  if (range == 0.0) range = 1.0;  // degenerate constant target
  const double c1 = 0.01 * range * 0.01 * range;
  const double c2 = 0.03 * range * 0.03 * range;

  auto out = make_node(1, 1, {pred, target});
  double total = 0.0;
  for (size_t r0 = 0; r0 < positions_r; ++r0)
    for (size_t c0 = 0; c0 < positions_c; ++c0) {
      double mx = 0.0, my = 0.0;
      for (size_t r = 0; r < wr; ++r)
        for (size_t c = 0; c < wc; ++c) {
          mx += pred->v(r0 + r, c0 + c);
          my += target->v(r0 + r, c0 + c);
        }
      mx /= n;
      my /= n;
      double vx = 0.0, vy = 0.0, cov = 0.0;
      for (size_t r = 0; r < wr; ++r)
        for (size_t c = 0; c < wc; ++c) {
          double dx = pred->v(r0 + r, c0 + c) - mx;
          double dy = target->v(r0 + r, c0 + c) - my;
          vx += dx * dx;
          vy += dy * dy;
          cov += dx * dy;
        }
      vx /= n;
      vy /= n;
      cov /= n;
      double a1 = 2.0 * mx * my + c1;
      double a2 = 2.0 * cov + c2;
      double b1 = mx * mx + my * my + c1;
      double b2 = vx + vy + c2;
      total += (a1 * a2) / (b1 * b2);
    }
  out->value[0] = total / static_cast<double>(num_windows);

  Tensor* pp = pred.get();
  Tensor* pt = target.get();
  out->backward_fn = [pp, pt, wr, wc, positions_r, positions_c, n, c1, c2,
                      num_windows](const Tensor& self) {
    if (!pp->requires_grad) return;
    pp->ensure_grad();
    const double gscale = self.grad[0] / static_cast<double>(num_windows);
    for (size_t r0 = 0; r0 < positions_r; ++r0)
      for (size_t c0 = 0; c0 < positions_c; ++c0) {
        double mx = 0.0, my = 0.0;
        for (size_t r = 0; r < wr; ++r)
          for (size_t c = 0; c < wc; ++c) {
            mx += pp->v(r0 + r, c0 + c);
            my += pt->v(r0 + r, c0 + c);
          }
        mx /= n;
        my /= n;
        double vx = 0.0, vy = 0.0, cov = 0.0;
        for (size_t r = 0; r < wr; ++r)
          for (size_t c = 0; c < wc; ++c) {
            double dx = pp->v(r0 + r, c0 + c) - mx;
            double dy = pt->v(r0 + r, c0 + c) - my;
            vx += dx * dx;
            vy += dy * dy;
            cov += dx * dy;
          }
        vx /= n;
        vy /= n;
        cov /= n;
        double a1 = 2.0 * mx * my + c1;
        double a2 = 2.0 * cov + c2;
        double b1 = mx * mx + my * my + c1;
        double b2 = vx + vy + c2;
        double s = (a1 * a2) / (b1 * b2);
        double inv_b1b2 = 1.0 / (b1 * b2);
        for (size_t r = 0; r < wr; ++r)
          for (size_t c = 0; c < wc; ++c) {
            double x = pp->v(r0 + r, c0 + c);
            double y = pt->v(r0 + r, c0 + c);
            double da1 = 2.0 * my / n;
            double da2 = 2.0 * (y - my) / n;
            double db1 = 2.0 * mx / n;
            double db2 = 2.0 * (x - mx) / n;
            double ds = (da1 * a2 + a1 * da2) * inv_b1b2 -
                        s * (db1 / b1 + db2 / b2);
            pp->grad[(r0 + r) * pp->cols + (c0 + c)] += gscale * ds;
          }
      }
  };
  return out;
}

TensorPtr nll_rows(const TensorPtr& logits,
                   const std::vector<uint32_t>& targets,
                   const std::vector<uint8_t>& include) {
  check(targets.size() == logits->rows, "nll target count mismatch");
  check(include.size() == logits->rows, "nll mask size mismatch");
  size_t count = 0;
  for (uint8_t m : include)
    if (m) ++count;
  check(count > 0, "nll needs at least one included row");
  for (size_t r = 0; r < logits->rows; ++r)
    if (include[r]) check(targets[r] < logits->cols, "nll target out of range");

  auto out = make_node(1, 1, {logits});
  const size_t v = logits->cols;
  double total = 0.0;
  for (size_t r = 0; r < logits->rows; ++r) {
    if (!include[r]) continue;
    const double* row = &logits->value[r * v];
    double mx = row[0];
    for (size_t j = 1; j < v; ++j) mx = std::max(mx, row[j]);
    double denom = 0.0;
    for (size_t j = 0; j < v; ++j) denom += std::exp(row[j] - mx);
    total += std::log(denom) + mx - row[targets[r]];
  }
  out->value[0] = total / static_cast<double>(count);

  Tensor* pl = logits.get();
  auto tgt = targets;
  auto inc = include;
  out->backward_fn = [pl, tgt, inc, v, count](const Tensor& self) {
    if (!pl->requires_grad) return;
    pl->ensure_grad();
    const double s = self.grad[0] / static_cast<double>(count);
    for (size_t r = 0; r < pl->rows; ++r) {
      if (!inc[r]) continue;
      const double* row = &pl->value[r * v];
      double mx = row[0];
      for (size_t j = 1; j < v; ++j) mx = std::max(mx, row[j]);
      double denom = 0.0;
      for (size_t j = 0; j < v; ++j) denom += std::exp(row[j] - mx);
      for (size_t j = 0; j < v; ++j) {
        double p = std::exp(row[j] - mx) / denom;
        pl->grad[r * v + j] += s * (p - (j == tgt[r] ? 1.0 : 0.0));
      }
    }
  };
  return out;
}

TensorPtr one_minus(const TensorPtr& a) {
  auto out = make_node(a->rows, a->cols, {a});
  for (size_t i = 0; i < a->value.size(); ++i)
    out->value[i] = 1.0 - a->value[i];
  Tensor* pa = a.get();
  out->backward_fn = [pa](const Tensor& self) {
    if (!pa->requires_grad) return;
    pa->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i)
      pa->grad[i] -= self.grad[i];
  };
  return out;
}

void backward(const TensorPtr& root) {
  check(root->size() == 1, "backward requires a scalar root");
  std::vector<Tensor*> order;
  std::unordered_set<Tensor*> visited;
  // Iterative post-order DFS over parents.
  std::vector<std::pair<Tensor*, size_t>> stack{{root.get(), 0}};
  while (!stack.empty()) {
    auto& [node, child] = stack.back();
    if (child == 0 && visited.count(node)) {
      stack.pop_back();
      continue;
    }
    if (child < node->parents.size()) {
      Tensor* next = node->parents[child].get();
      ++child;
      if (!visited.count(next)) stack.push_back({next, 0});
    } else {
      visited.insert(node);
      order.push_back(node);
      stack.pop_back();
    }
  }
  root->ensure_grad();
  root->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Tensor* node = *it;
    if (node->backward_fn && node->requires_grad) {
      node->ensure_grad();
      node->backward_fn(*node);
    }
  }
}

void AttentionBlock::init(size_t d_model, size_t d_ff, SplitMix64& rng) {
  auto weight = [&](size_t r, size_t c) {
    auto t = make_param(r, c);
    init_gaussian(t, rng, 0.02);
    return t;
  };
  auto zeros = [&](size_t c) { return make_param(1, c); };
  auto ones = [&](size_t c) {
    auto t = make_param(1, c);
    init_constant(t, 1.0);
    return t;
  };
  ln1_gamma = ones(d_model);
  ln1_beta = zeros(d_model);
  wq = weight(d_model, d_model);
  bq = zeros(d_model);
  wk = weight(d_model, d_model);
  bk = zeros(d_model);
  wv = weight(d_model, d_model);
  bv = zeros(d_model);
  wo = weight(d_model, d_model);
  bo = zeros(d_model);
  ln2_gamma = ones(d_model);
  ln2_beta = zeros(d_model);
  w1 = weight(d_model, d_ff);
  b1 = zeros(d_ff);
  w2 = weight(d_ff, d_model);
  b2 = zeros(d_model);
}

void AttentionBlock::collect_params(std::vector<TensorPtr>& out) const {
  for (const TensorPtr& t :
       {ln1_gamma, ln1_beta, wq, bq, wk, bk, wv, bv, wo, bo, ln2_gamma,
        ln2_beta, w1, b1, w2, b2})
    out.push_back(t);
}

TensorPtr AttentionBlock::forward(const TensorPtr& x, size_t heads,
                                  bool causal) const {
  const size_t d = x->cols;
  check(d % heads == 0, "d_model must be divisible by heads");
  const size_t dh = d / heads;
  const size_t t = x->rows;

  TensorPtr h = layer_norm(x, ln1_gamma, ln1_beta);
  TensorPtr q = add_rowvec(matmul(h, wq), bq);
  TensorPtr k = add_rowvec(matmul(h, wk), bk);
  TensorPtr v = add_rowvec(matmul(h, wv), bv);

  TensorPtr mask;
  if (causal) {
    std::vector<double> m(t * t, 0.0);
    for (size_t r = 0; r < t; ++r)
      for (size_t c = r + 1; c < t; ++c) m[r * t + c] = -1e30;
    mask = make_constant(t, t, m);
  }

  std::vector<TensorPtr> ctx;
  ctx.reserve(heads);
  for (size_t hd = 0; hd < heads; ++hd) {
    TensorPtr qh = slice_cols(q, hd * dh, (hd + 1) * dh);
    TensorPtr kh = slice_cols(k, hd * dh, (hd + 1) * dh);
    TensorPtr vh = slice_cols(v, hd * dh, (hd + 1) * dh);
    TensorPtr scores = scale(matmul_nt(qh, kh),
                             1.0 / std::sqrt(static_cast<double>(dh)));
    if (mask) scores = add(scores, mask);
    TensorPtr att = softmax_rows(scores);
    ctx.push_back(matmul(att, vh));
  }
  TensorPtr merged = heads == 1 ? ctx[0] : concat_cols(ctx);
  TensorPtr attn_out = add_rowvec(matmul(merged, wo), bo);
  TensorPtr x1 = add(x, attn_out);

  TensorPtr h2 = layer_norm(x1, ln2_gamma, ln2_beta);
  TensorPtr ff =
      add_rowvec(matmul(gelu(add_rowvec(matmul(h2, w1), b1)), w2), b2);
  return add(x1, ff);
}

std::vector<double> sinusoid_rows(size_t n, size_t d_model, size_t offset) {
  std::vector<double> out(n * d_model, 0.0);
  for (size_t pos = 0; pos < n; ++pos)
    for (size_t i = 0; i < d_model; ++i) {
      double exponent = static_cast<double>(2 * (i / 2)) /
                        static_cast<double>(d_model);
      double angle = static_cast<double>(pos + offset) /
                     std::pow(10000.0, exponent);
      out[pos * d_model + i] = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  return out;
}

void AdamW::step(const std::vector<TensorPtr>& params, double lr_now) {
  if (m_.size() != params.size()) {
    m_.assign(params.size(), {});
    v_.assign(params.size(), {});
    for (size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(params[i]->value.size(), 0.0);
      v_[i].assign(params[i]->value.size(), 0.0);
    }
    t_ = 0;
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    p.ensure_grad();
    for (size_t j = 0; j < p.value.size(); ++j) {
      double g = p.grad[j];
      m_[i][j] = beta1 * m_[i][j] + (1.0 - beta1) * g;
      v_[i][j] = beta2 * v_[i][j] + (1.0 - beta2) * g * g;
      double mhat = m_[i][j] / bc1;
      double vhat = v_[i][j] / bc2;
      p.value[j] -=
          lr_now * (mhat / (std::sqrt(vhat) + eps) + weight_decay * p.value[j]);
    }
  }
}

double cosine_lr(double base_lr, size_t step, size_t total_steps,
                 double min_lr) {
  if (total_steps <= 1) return base_lr;
  double frac = static_cast<double>(std::min(step, total_steps - 1)) /
                static_cast<double>(total_steps - 1);
  return min_lr + 0.5 * (base_lr - min_lr) * (1.0 + std::cos(kPi * frac));
}

}  // namespace vectok::nn
