#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>

#include "sval/tensor.hpp"

namespace sval {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1>;
using VecMap = Eigen::Map<Vec>;
using ConstVecMap = Eigen::Map<const Vec>;

using detail::Node;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
  }
}

bool wants_grad(const Node& n, std::size_t parent) {
  return n.parents.size() > parent && n.parents[parent]->requires_grad;
}

std::vector<double>& parent_grad(Node& n, std::size_t parent) {
  return n.parents[parent]->ensure_grad();
}

const std::vector<double>& parent_data(const Node& n, std::size_t parent) {
  return n.parents[parent]->data;
}

template <typename F>
Tensor unary(const Tensor& a, F&& f, std::function<void(Node&)> backward) {
  std::vector<double> out(a.numel());
  auto in = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  return Tensor::make_result(a.shape(), std::move(out), {a},
                             std::move(backward));
}

std::size_t last_axis(const Tensor& a, const char* op) {
  if (a.rank() == 0 || a.shape().back() == 0) {
    throw DimensionError(std::string(op) + " needs a non-empty final axis");
  }
  return a.shape().back();
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& n) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (!wants_grad(n, p)) continue;
      auto& g = parent_grad(n, p);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& n) {
    if (wants_grad(n, 0)) {
      auto& g = parent_grad(n, 0);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    }
    if (wants_grad(n, 1)) {
      auto& g = parent_grad(n, 1);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= n.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& n) {
    const auto& x = parent_data(n, 0);
    const auto& y = parent_data(n, 1);
    if (wants_grad(n, 0)) {
      auto& g = parent_grad(n, 0);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * y[i];
    }
    if (wants_grad(n, 1)) {
      auto& g = parent_grad(n, 1);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * x[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(a, [factor](double v) { return v * factor; },
               [factor](Node& n) {
                 auto& g = parent_grad(n, 0);
                 for (std::size_t i = 0; i < g.size(); ++i)
                   g[i] += n.grad[i] * factor;
               });
}

Tensor add_scalar(const Tensor& a, double value) {
  return unary(a, [value](double v) { return v + value; }, [](Node& n) {
    auto& g = parent_grad(n, 0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
  });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return Tensor::make_result(Shape{}, {s}, {a}, [](Node& n) {
    auto& g = parent_grad(n, 0);
    for (double& v : g) v += n.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) throw DimensionError("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor dot(const Tensor& a, const Tensor& b) {
  if (a.numel() != b.numel()) {
    throw DimensionError("dot: length mismatch " + shape_to_string(a.shape()) +
                         " vs " + shape_to_string(b.shape()));
  }
  double s = 0.0;
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return Tensor::make_result(Shape{}, {s}, {a, b}, [](Node& n) {
    const double go = n.grad[0];
    const auto& x = parent_data(n, 0);
    const auto& y = parent_data(n, 1);
    if (wants_grad(n, 0)) {
      auto& g = parent_grad(n, 0);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += go * y[i];
    }
    if (wants_grad(n, 1)) {
      auto& g = parent_grad(n, 1);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += go * x[i];
    }
  });
}

Tensor exp(const Tensor& a) {
  return unary(a, [](double v) { return std::exp(v); }, [](Node& n) {
    auto& g = parent_grad(n, 0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * n.data[i];
  });
}

Tensor log(const Tensor& a) {
  return unary(a, [](double v) { return std::log(v); }, [](Node& n) {
    const auto& x = parent_data(n, 0);
    auto& g = parent_grad(n, 0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] / x[i];
  });
}

Tensor sqrt(const Tensor& a) {
  return unary(a, [](double v) { return std::sqrt(v); }, [](Node& n) {
    auto& g = parent_grad(n, 0);
    for (std::size_t i = 0; i < g.size(); ++i)
      g[i] += n.grad[i] * 0.5 / n.data[i];
  });
}

Tensor relu(const Tensor& a) {
  return unary(a, [](double v) { return v > 0.0 ? v : 0.0; }, [](Node& n) {
    const auto& x = parent_data(n, 0);
    auto& g = parent_grad(n, 0);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (x[i] > 0.0) g[i] += n.grad[i];
  });
}

Tensor select(const Tensor& a, std::size_t flat_index) {
  if (flat_index >= a.numel()) {
    throw DimensionError("select: index " + std::to_string(flat_index) +
                         " out of range for shape " +
                         shape_to_string(a.shape()));
  }
  return Tensor::make_result(Shape{}, {a.data()[flat_index]}, {a},
                             [flat_index](Node& n) {
                               parent_grad(n, 0)[flat_index] += n.grad[0];
                             });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw DimensionError("reshape: cannot view " + shape_to_string(a.shape()) +
                         " as " + shape_to_string(shape));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  return Tensor::make_result(std::move(shape), std::move(out), {a},
                             [](Node& n) {
                               auto& g = parent_grad(n, 0);
                               for (std::size_t i = 0; i < g.size(); ++i)
                                 g[i] += n.grad[i];
                             });
}

Tensor concat(const std::vector<Tensor>& parts) {
  std::vector<double> out;
  std::vector<std::size_t> offsets;
  for (const Tensor& t : parts) {
    offsets.push_back(out.size());
    out.insert(out.end(), t.data().begin(), t.data().end());
  }
  const std::size_t total = out.size();
  return Tensor::make_result(Shape{total}, std::move(out), parts,
                             [offsets](Node& n) {
                               for (std::size_t p = 0; p < n.parents.size(); ++p) {
                                 if (!wants_grad(n, p)) continue;
                                 auto& g = parent_grad(n, p);
                                 for (std::size_t i = 0; i < g.size(); ++i)
                                   g[i] += n.grad[offsets[p] + i];
                               }
                             });
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw DimensionError("transpose needs a 2-D tensor");
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  std::vector<double> out(a.numel());
  MatMap(out.data(), cols, rows) = ConstMatMap(a.data().data(), rows, cols).transpose();
  return Tensor::make_result(Shape{cols, rows}, std::move(out), {a},
                             [rows, cols](Node& n) {
                               auto& g = parent_grad(n, 0);
                               MatMap(g.data(), rows, cols) +=
                                   ConstMatMap(n.grad.data(), cols, rows).transpose();
                             });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " +
                         shape_to_string(a.shape()) + " x " +
                         shape_to_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), p = b.dim(1);
  std::vector<double> out(m * p);
  MatMap(out.data(), m, p).noalias() =
      ConstMatMap(a.data().data(), m, k) * ConstMatMap(b.data().data(), k, p);
  return Tensor::make_result(
      Shape{m, p}, std::move(out), {a, b}, [m, k, p](Node& n) {
        ConstMatMap dc(n.grad.data(), m, p);
        if (wants_grad(n, 0)) {
          MatMap(parent_grad(n, 0).data(), m, k).noalias() +=
              dc * ConstMatMap(parent_data(n, 1).data(), k, p).transpose();
        }
        if (wants_grad(n, 1)) {
          MatMap(parent_grad(n, 1).data(), k, p).noalias() +=
              ConstMatMap(parent_data(n, 0).data(), m, k).transpose() * dc;
        }
      });
}

Tensor fully_connected(const Tensor& input, const Tensor& weight,
                       const Tensor& bias) {
  if (weight.rank() != 2) {
    throw DimensionError("fully_connected: weight must be [d_out,d_in], got " +
                         shape_to_string(weight.shape()));
  }
  const std::size_t d_out = weight.dim(0), d_in = weight.dim(1);
  std::size_t rows = 0;
  Shape out_shape;
  if (input.rank() == 1 && input.dim(0) == d_in) {
    rows = 1;
    out_shape = {d_out};
  } else if (input.rank() == 2 && input.dim(1) == d_in) {
    rows = input.dim(0);
    out_shape = {rows, d_out};
  } else {
    throw DimensionError("fully_connected: input " +
                         shape_to_string(input.shape()) +
                         " does not match weight " +
                         shape_to_string(weight.shape()));
  }
  const bool has_bias = bias.defined();
  if (has_bias && (bias.rank() != 1 || bias.dim(0) != d_out)) {
    throw DimensionError("fully_connected: bias " +
                         shape_to_string(bias.shape()) + " expected [" +
                         std::to_string(d_out) + "]");
  }

  std::vector<double> out(rows * d_out);
  MatMap y(out.data(), rows, d_out);
  y.noalias() = ConstMatMap(input.data().data(), rows, d_in) *
                ConstMatMap(weight.data().data(), d_out, d_in).transpose();
  if (has_bias) {
    y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.data().data(), d_out);
  }

  std::vector<Tensor> parents{input, weight};
  if (has_bias) parents.push_back(bias);
  return Tensor::make_result(
      std::move(out_shape), std::move(out), std::move(parents),
      [rows, d_in, d_out](Node& n) {
        ConstMatMap dy(n.grad.data(), rows, d_out);
        if (wants_grad(n, 0)) {
          MatMap(parent_grad(n, 0).data(), rows, d_in).noalias() +=
              dy * ConstMatMap(parent_data(n, 1).data(), d_out, d_in);
        }
        if (wants_grad(n, 1)) {
          MatMap(parent_grad(n, 1).data(), d_out, d_in).noalias() +=
              dy.transpose() * ConstMatMap(parent_data(n, 0).data(), rows, d_in);
        }
        if (wants_grad(n, 2)) {
          std::span<double> db = parent_grad(n, 2);
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < d_out; ++j) db[j] += dy(r, j);
          }
        }
      });
}

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              std::size_t stride, std::size_t padding) {
  if (input.rank() != 3) {
    throw DimensionError("conv2d: input must be [C,H,W], got " +
                         shape_to_string(input.shape()));
  }
  if (weight.rank() != 4 || weight.dim(2) != weight.dim(3)) {
    throw DimensionError("conv2d: weight must be [C_out,C_in,k,k], got " +
                         shape_to_string(weight.shape()));
  }
  if (stride == 0) throw DimensionError("conv2d: stride must be >= 1");
  const std::size_t c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t c_out = weight.dim(0), k = weight.dim(2);
  if (weight.dim(1) != c_in) {
    throw DimensionError("conv2d: input has " + std::to_string(c_in) +
                         " channels but weight expects " +
                         std::to_string(weight.dim(1)));
  }
  if (k > h + 2 * padding || k > w + 2 * padding) {
    throw DimensionError("conv2d: kernel larger than padded input");
  }
  const bool has_bias = bias.defined();
  if (has_bias && (bias.rank() != 1 || bias.dim(0) != c_out)) {
    throw DimensionError("conv2d: bias " + shape_to_string(bias.shape()) +
                         " expected [" + std::to_string(c_out) + "]");
  }
  const std::size_t ho = (h + 2 * padding - k) / stride + 1;
  const std::size_t wo = (w + 2 * padding - k) / stride + 1;
  const std::size_t kk = c_in * k * k;
  const std::size_t positions = ho * wo;

  // im2col: one row per (channel, kernel offset), one column per output pixel.
  std::vector<double> cols(kk * positions, 0.0);
  const double* x = input.data().data();
  for (std::size_t c = 0; c < c_in; ++c) {
    for (std::size_t ki = 0; ki < k; ++ki) {
      for (std::size_t kj = 0; kj < k; ++kj) {
        double* row = cols.data() + ((c * k + ki) * k + kj) * positions;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const long iy = static_cast<long>(oy * stride + ki) - static_cast<long>(padding);
          if (iy < 0 || iy >= static_cast<long>(h)) continue;
          const double* src = x + (c * h + static_cast<std::size_t>(iy)) * w;
          double* dst = row + oy * wo;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const long ix = static_cast<long>(ox * stride + kj) - static_cast<long>(padding);
            if (ix >= 0 && ix < static_cast<long>(w)) dst[ox] = src[ix];
          }
        }
      }
    }
  }

  std::vector<double> out(c_out * positions);
  MatMap y(out.data(), c_out, positions);
  y.noalias() = ConstMatMap(weight.data().data(), c_out, kk) *
                ConstMatMap(cols.data(), kk, positions);
  if (has_bias) {
    y.colwise() += ConstVecMap(bias.data().data(), c_out);
  }

  std::vector<Tensor> parents{input, weight};
  if (has_bias) parents.push_back(bias);
  return Tensor::make_result(
      Shape{c_out, ho, wo}, std::move(out), std::move(parents),
      [cols = std::move(cols), c_in, h, w, c_out, k, kk, ho, wo, positions,
       stride, padding](Node& n) {
        ConstMatMap dy(n.grad.data(), c_out, positions);
        if (wants_grad(n, 1)) {
          MatMap(parent_grad(n, 1).data(), c_out, kk).noalias() +=
              dy * ConstMatMap(cols.data(), kk, positions).transpose();
        }
        if (wants_grad(n, 2)) {
          std::span<double> db = parent_grad(n, 2);
          for (std::size_t c = 0; c < c_out; ++c) {
            double acc = 0.0;
            for (std::size_t p = 0; p < positions; ++p) acc += dy(c, p);
            db[c] += acc;
          }
        }
        if (wants_grad(n, 0)) {
          std::vector<double> dcols(kk * positions);
          MatMap(dcols.data(), kk, positions).noalias() =
              ConstMatMap(parent_data(n, 1).data(), c_out, kk).transpose() * dy;
          auto& dx = parent_grad(n, 0);
          for (std::size_t c = 0; c < c_in; ++c) {
            for (std::size_t ki = 0; ki < k; ++ki) {
              for (std::size_t kj = 0; kj < k; ++kj) {
                const double* row = dcols.data() + ((c * k + ki) * k + kj) * positions;
                for (std::size_t oy = 0; oy < ho; ++oy) {
                  const long iy = static_cast<long>(oy * stride + ki) - static_cast<long>(padding);
                  if (iy < 0 || iy >= static_cast<long>(h)) continue;
                  double* dst = dx.data() + (c * h + static_cast<std::size_t>(iy)) * w;
                  const double* src = row + oy * wo;
                  for (std::size_t ox = 0; ox < wo; ++ox) {
                    const long ix = static_cast<long>(ox * stride + kj) - static_cast<long>(padding);
                    if (ix >= 0 && ix < static_cast<long>(w)) dst[ix] += src[ox];
                  }
                }
              }
            }
          }
        }
      });
}

Tensor max_pool(const Tensor& input, std::size_t size) {
  if (input.rank() != 3) {
    throw DimensionError("max_pool: input must be [C,H,W], got " +
                         shape_to_string(input.shape()));
  }
  if (size == 0) throw DimensionError("max_pool: window must be >= 1");
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t ho = h / size, wo = w / size;
  if (ho == 0 || wo == 0) {
    throw DimensionError("max_pool: input " + shape_to_string(input.shape()) +
                         " smaller than window");
  }
  std::vector<double> out(c * ho * wo);
  std::vector<std::size_t> argmax(out.size());
  const double* x = input.data().data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox) {
        std::size_t best = (ch * h + oy * size) * w + ox * size;
        for (std::size_t dy = 0; dy < size; ++dy) {
          for (std::size_t dx = 0; dx < size; ++dx) {
            const std::size_t idx = (ch * h + oy * size + dy) * w + ox * size + dx;
            if (x[idx] > x[best]) best = idx;
          }
        }
        const std::size_t o = (ch * ho + oy) * wo + ox;
        out[o] = x[best];
        argmax[o] = best;
      }
    }
  }
  return Tensor::make_result(Shape{c, ho, wo}, std::move(out), {input},
                             [argmax = std::move(argmax)](Node& n) {
                               auto& g = parent_grad(n, 0);
                               for (std::size_t o = 0; o < argmax.size(); ++o)
                                 g[argmax[o]] += n.grad[o];
                             });
}

Tensor mean_pool(const Tensor& input) {
  if (input.rank() != 3) {
    throw DimensionError("mean_pool: input must be [C,H,W], got " +
                         shape_to_string(input.shape()));
  }
  const std::size_t c = input.dim(0);
  const std::size_t area = input.dim(1) * input.dim(2);
  if (area == 0) throw DimensionError("mean_pool: empty spatial extent");
  std::vector<double> out(c);
  const double* x = input.data().data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    double s = 0.0;
    for (std::size_t i = 0; i < area; ++i) s += x[ch * area + i];
    out[ch] = s / static_cast<double>(area);
  }
  return Tensor::make_result(Shape{c}, std::move(out), {input},
                             [c, area](Node& n) {
                               auto& g = parent_grad(n, 0);
                               const double inv = 1.0 / static_cast<double>(area);
                               for (std::size_t ch = 0; ch < c; ++ch)
                                 for (std::size_t i = 0; i < area; ++i)
                                   g[ch * area + i] += n.grad[ch] * inv;
                             });
}

Tensor softmax(const Tensor& a) {
  const std::size_t cols = last_axis(a, "softmax");
  const std::size_t rows = a.numel() / cols;
  std::vector<double> out(a.numel());
  auto x = a.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.data() + r * cols;
    double* o = out.data() + r * cols;
    const double mx = *std::max_element(in, in + cols);
    double s = 0.0;
    for (std::size_t i = 0; i < cols; ++i) s += (o[i] = std::exp(in[i] - mx));
    for (std::size_t i = 0; i < cols; ++i) o[i] /= s;
  }
  return Tensor::make_result(a.shape(), std::move(out), {a},
                             [rows, cols](Node& n) {
                               auto& g = parent_grad(n, 0);
                               for (std::size_t r = 0; r < rows; ++r) {
                                 const double* y = n.data.data() + r * cols;
                                 const double* dy = n.grad.data() + r * cols;
                                 double inner = 0.0;
                                 for (std::size_t i = 0; i < cols; ++i) inner += dy[i] * y[i];
                                 for (std::size_t i = 0; i < cols; ++i)
                                   g[r * cols + i] += y[i] * (dy[i] - inner);
                               }
                             });
}

Tensor log_softmax(const Tensor& a) {
  const std::size_t cols = last_axis(a, "log_softmax");
  const std::size_t rows = a.numel() / cols;
  std::vector<double> out(a.numel());
  auto x = a.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.data() + r * cols;
    double* o = out.data() + r * cols;
    const double mx = *std::max_element(in, in + cols);
    double s = 0.0;
    for (std::size_t i = 0; i < cols; ++i) s += std::exp(in[i] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t i = 0; i < cols; ++i) o[i] = in[i] - lse;
  }
  return Tensor::make_result(a.shape(), std::move(out), {a},
                             [rows, cols](Node& n) {
                               auto& g = parent_grad(n, 0);
                               for (std::size_t r = 0; r < rows; ++r) {
                                 const double* y = n.data.data() + r * cols;
                                 const double* dy = n.grad.data() + r * cols;
                                 double total = 0.0;
                                 for (std::size_t i = 0; i < cols; ++i) total += dy[i];
                                 for (std::size_t i = 0; i < cols; ++i)
                                   g[r * cols + i] += dy[i] - std::exp(y[i]) * total;
                               }
                             });
}

NormalizeResult l2_normalize_checked(const Tensor& a) {
  const std::size_t cols = last_axis(a, "l2_normalize");
  const std::size_t rows = a.numel() / cols;
  std::vector<double> out(a.numel());
  std::vector<double> norms(rows);
  std::vector<char> floored(rows, 0);
  bool degenerate = false;
  auto x = a.data();
  for (std::size_t r = 0; r < rows; ++r) {
    double ss = 0.0;
    for (std::size_t i = 0; i < cols; ++i) ss += x[r * cols + i] * x[r * cols + i];
    double norm = std::sqrt(ss);
    if (norm < kNormFloor) {
      norm = kNormFloor;
      floored[r] = 1;
      degenerate = true;
    }
    norms[r] = norm;
    for (std::size_t i = 0; i < cols; ++i) out[r * cols + i] = x[r * cols + i] / norm;
  }
  Tensor value = Tensor::make_result(
      a.shape(), std::move(out), {a},
      [rows, cols, norms = std::move(norms), floored = std::move(floored)](Node& n) {
        auto& g = parent_grad(n, 0);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* y = n.data.data() + r * cols;
          const double* dy = n.grad.data() + r * cols;
          const double inv = 1.0 / norms[r];
          if (floored[r]) {
            for (std::size_t i = 0; i < cols; ++i) g[r * cols + i] += dy[i] * inv;
            continue;
          }
          double inner = 0.0;
          for (std::size_t i = 0; i < cols; ++i) inner += y[i] * dy[i];
          for (std::size_t i = 0; i < cols; ++i)
            g[r * cols + i] += (dy[i] - y[i] * inner) * inv;
        }
      });
  return {std::move(value), degenerate};
}

Tensor l2_normalize(const Tensor& a) { return l2_normalize_checked(a).value; }

}  // namespace sval
