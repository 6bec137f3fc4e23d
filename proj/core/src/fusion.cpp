// Copyright 2026 The popcast Authors
// SPDX-License-Identifier: Apache-2.0

#include "popcast/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "popcast/error.hpp"
#include "popcast/ingest.hpp"

namespace popcast {

Batch gather_rows(const Batch& batch, std::span<const std::size_t> rows) {
  Batch out;
  for (const auto& [id, m] : batch) {
    Matrix sub(rows.size(), m.cols);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto src = m.row(rows[i]);
      std::copy(src.begin(), src.end(), sub.row(i).begin());
    }
    out.emplace(id, std::move(sub));
  }
  return out;
}

Batch make_batch(const std::map<int, EmbeddingSet>& embeddings, std::span<const int> sources,
                 std::span<const std::string> ids) {
  Batch out;
  for (int s : sources) {
    auto it = embeddings.find(s);
    if (it == embeddings.end()) throw Error(ErrorCode::MissingSource, "no embeddings for source " + std::to_string(s));
    const EmbeddingSet& set = it->second;
    Matrix m(ids.size(), set.dim());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const auto v = set.find(ids[i]);
      if (v.empty()) throw Error(ErrorCode::MissingSource, "source " + std::to_string(s) + " lacks " + ids[i]);
      std::copy(v.begin(), v.end(), m.row(i).begin());
    }
    out.emplace(s, std::move(m));
  }
  return out;
}

bool has_all_sources(const std::map<int, EmbeddingSet>& embeddings, std::span<const int> sources,
                     const std::string& id) {
  for (int s : sources) {
    auto it = embeddings.find(s);
    if (it == embeddings.end() || !it->second.contains(id)) return false;
  }
  return true;
}

BranchSpec make_branch_spec(int source_id, std::size_t input_dim, std::size_t unified_width) {
  return {source_id, input_dim, is_text_source(source_id) ? BranchKind::Text : BranchKind::Video, unified_width};
}

namespace {

// C += A * W, W is in x out row-major. Summation runs over k in ascending
// order for every row, so a row's result never depends on its batch mates.
void matmul_add(const Matrix& A, const std::vector<double>& W, std::size_t out, Matrix& C) {
  for (std::size_t r = 0; r < A.rows; ++r) {
    double* c = C.data.data() + r * out;
    const double* a = A.data.data() + r * A.cols;
    for (std::size_t k = 0; k < A.cols; ++k) {
      const double ak = a[k];
      const double* w = W.data() + k * out;
      for (std::size_t j = 0; j < out; ++j) c[j] += ak * w[j];
    }
  }
}

Matrix dense_forward(const Matrix& x, const DenseLayer& layer) {
  Matrix z(x.rows, layer.out);
  if (!layer.bias.empty()) {
    for (std::size_t r = 0; r < x.rows; ++r) std::copy(layer.bias.begin(), layer.bias.end(), z.row(r).begin());
  }
  matmul_add(x, layer.weight, layer.out, z);
  return z;
}

// Accumulates weight/bias gradients; returns dLoss/dx when wanted.
Matrix dense_backward(const Matrix& x, const Matrix& dz, const DenseLayer& layer, std::vector<double>& dw,
                      std::vector<double>* db, bool want_dx) {
  for (std::size_t r = 0; r < x.rows; ++r) {
    const double* g = dz.data.data() + r * layer.out;
    for (std::size_t k = 0; k < layer.in; ++k) {
      const double xk = x(r, k);
      double* w = dw.data() + k * layer.out;
      for (std::size_t j = 0; j < layer.out; ++j) w[j] += xk * g[j];
    }
    if (db) {
      for (std::size_t j = 0; j < layer.out; ++j) (*db)[j] += g[j];
    }
  }
  Matrix dx;
  if (!want_dx) return dx;
  dx = Matrix(x.rows, layer.in);
  for (std::size_t r = 0; r < x.rows; ++r) {
    const double* g = dz.data.data() + r * layer.out;
    for (std::size_t k = 0; k < layer.in; ++k) {
      const double* w = layer.weight.data() + k * layer.out;
      double s = 0.0;
      for (std::size_t j = 0; j < layer.out; ++j) s += g[j] * w[j];
      dx(r, k) = s;
    }
  }
  return dx;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

DenseLayer init_dense(Rng& rng, std::size_t in, std::size_t out, bool bias, bool he) {
  DenseLayer layer;
  layer.in = in;
  layer.out = out;
  const double bound = he ? std::sqrt(6.0 / static_cast<double>(in)) : std::sqrt(6.0 / static_cast<double>(in + out));
  layer.weight.resize(in * out);
  for (auto& w : layer.weight) w = rng.uniform(-bound, bound);
  if (bias) layer.bias.assign(out, 0.0);
  return layer;
}

}  // namespace

FusionNet build_fusion_net(std::vector<BranchSpec> specs, std::vector<std::size_t> head_widths, std::uint64_t seed,
                           double dropout) {
  if (specs.empty()) throw Error(ErrorCode::InvalidArgument, "fusion net needs at least one branch");
  if (head_widths.empty() || head_widths.back() != 1) {
    throw Error(ErrorCode::BadHeadShape, "head widths must end in 1");
  }
  for (std::size_t i = 0; i < head_widths.size(); ++i) {
    if (head_widths[i] == 0 || (i > 0 && head_widths[i] >= head_widths[i - 1])) {
      throw Error(ErrorCode::BadHeadShape, "head widths must be positive and strictly decreasing");
    }
  }
  std::sort(specs.begin(), specs.end(), [](const BranchSpec& a, const BranchSpec& b) { return a.source_id < b.source_id; });
  for (std::size_t i = 1; i < specs.size(); ++i) {
    if (specs[i].source_id == specs[i - 1].source_id) {
      throw Error(ErrorCode::DuplicateSource, "source " + std::to_string(specs[i].source_id) + " listed twice");
    }
  }
  for (const auto& s : specs) {
    if (s.input_dim == 0 || s.unified_width == 0) {
      throw Error(ErrorCode::InvalidArgument, "branch dimensions must be positive");
    }
    if (s.unified_width != specs.front().unified_width) {
      throw Error(ErrorCode::ShapeMismatch, "branches must share one unified width");
    }
    if ((s.kind == BranchKind::Text) != is_text_source(s.source_id)) {
      throw Error(ErrorCode::InvalidArgument, "branch kind does not match source " + std::to_string(s.source_id));
    }
  }

  FusionNet net;
  net.seed_ = seed;
  net.set_dropout(dropout);
  Rng rng(seed);
  for (const auto& s : specs) {
    Branch b;
    b.spec = s;
    const bool text = s.kind == BranchKind::Text;
    b.projection = init_dense(rng, s.input_dim, s.unified_width, text, !text);
    b.gamma.assign(s.unified_width, 1.0);
    b.beta.assign(s.unified_width, 0.0);
    if (!text) {
      b.running_mean.assign(s.unified_width, 0.0);
      b.running_var.assign(s.unified_width, 1.0);
    }
    net.branches_.push_back(std::move(b));
  }
  std::size_t in = net.concat_width();
  for (std::size_t i = 0; i < head_widths.size(); ++i) {
    const bool last = i + 1 == head_widths.size();
    net.head_.push_back(init_dense(rng, in, head_widths[i], true, !last));
    in = head_widths[i];
  }
  return net;
}

std::vector<std::size_t> FusionNet::head_widths() const {
  std::vector<std::size_t> w;
  for (const auto& l : head_) w.push_back(l.out);
  return w;
}

std::size_t FusionNet::concat_width() const {
  std::size_t w = 0;
  for (const auto& b : branches_) w += b.spec.unified_width;
  return w;
}

void FusionNet::set_dropout(double rate) {
  if (!(rate >= 0.0 && rate < 1.0)) throw Error(ErrorCode::InvalidArgument, "dropout must be in [0, 1)");
  dropout_ = rate;
}

std::vector<std::span<double>> FusionNet::parameters() {
  std::vector<std::span<double>> p;
  for (auto& b : branches_) {
    p.emplace_back(b.projection.weight);
    if (!b.projection.bias.empty()) p.emplace_back(b.projection.bias);
    p.emplace_back(b.gamma);
    p.emplace_back(b.beta);
  }
  for (auto& l : head_) {
    p.emplace_back(l.weight);
    p.emplace_back(l.bias);
  }
  return p;
}

std::vector<std::span<const double>> FusionNet::parameters() const {
  std::vector<std::span<const double>> out;
  for (auto s : const_cast<FusionNet*>(this)->parameters()) out.emplace_back(s);
  return out;
}

std::vector<std::string> FusionNet::parameter_names() const {
  std::vector<std::string> names;
  for (const auto& b : branches_) {
    const std::string prefix = "branch" + std::to_string(b.spec.source_id) + ".";
    names.push_back(prefix + "weight");
    if (!b.projection.bias.empty()) names.push_back(prefix + "bias");
    names.push_back(prefix + "gamma");
    names.push_back(prefix + "beta");
  }
  for (std::size_t i = 0; i < head_.size(); ++i) {
    names.push_back("head" + std::to_string(i) + ".weight");
    names.push_back("head" + std::to_string(i) + ".bias");
  }
  return names;
}

std::size_t FusionNet::parameter_count() const {
  std::size_t n = 0;
  for (auto s : parameters()) n += s.size();
  return n;
}

Gradients FusionNet::zero_gradients() const {
  Gradients g;
  for (auto s : parameters()) g.emplace_back(s.size(), 0.0);
  return g;
}

bool FusionNet::operator==(const FusionNet& other) const {
  if (dropout_ != other.dropout_ || seed_ != other.seed_) return false;
  if (branches_.size() != other.branches_.size() || head_.size() != other.head_.size()) return false;
  for (std::size_t i = 0; i < branches_.size(); ++i) {
    const auto& a = branches_[i];
    const auto& b = other.branches_[i];
    if (!(a.spec == b.spec) || a.running_mean != b.running_mean || a.running_var != b.running_var) return false;
  }
  for (std::size_t i = 0; i < head_.size(); ++i) {
    if (head_[i].in != other.head_[i].in || head_[i].out != other.head_[i].out) return false;
  }
  const auto pa = parameters();
  const auto pb = other.parameters();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (!std::equal(pa[i].begin(), pa[i].end(), pb[i].begin(), pb[i].end())) return false;
  }
  return true;
}

std::vector<double> FusionNet::forward(const Batch& batch, Mode mode, Rng* dropout_rng, ForwardCache* cache) const {
  std::size_t n_rows = 0;
  bool first = true;
  for (const auto& b : branches_) {
    auto it = batch.find(b.spec.source_id);
    if (it == batch.end()) {
      throw Error(ErrorCode::MissingSourceInBatch, "batch lacks source " + std::to_string(b.spec.source_id));
    }
    const Matrix& m = it->second;
    if (m.cols != b.spec.input_dim || m.data.size() != m.rows * m.cols) {
      throw Error(ErrorCode::ShapeMismatch, "source " + std::to_string(b.spec.source_id) + " has width " +
                                                std::to_string(m.cols) + ", expected " +
                                                std::to_string(b.spec.input_dim));
    }
    if (!first && m.rows != n_rows) throw Error(ErrorCode::ShapeMismatch, "sources disagree on row count");
    n_rows = m.rows;
    first = false;
  }
  if (n_rows == 0) throw Error(ErrorCode::EmptyData, "empty batch");

  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  c = ForwardCache{};
  c.mode = mode;
  c.batch = &batch;

  Matrix concat(n_rows, concat_width());
  std::size_t offset = 0;
  for (const auto& b : branches_) {
    const Matrix& x = batch.at(b.spec.source_id);
    const std::size_t U = b.spec.unified_width;
    BranchCache bc;
    bc.pre = dense_forward(x, b.projection);
    bc.normalized = Matrix(n_rows, U);
    if (b.spec.kind == BranchKind::Text) {
      bc.mean.resize(n_rows);
      bc.inv_std.resize(n_rows);
      for (std::size_t r = 0; r < n_rows; ++r) {
        const auto z = bc.pre.row(r);
        double mean = 0.0;
        for (double v : z) mean += v;
        mean /= static_cast<double>(U);
        double var = 0.0;
        for (double v : z) var += (v - mean) * (v - mean);
        var /= static_cast<double>(U);
        const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
        bc.mean[r] = mean;
        bc.inv_std[r] = inv;
        for (std::size_t j = 0; j < U; ++j) bc.normalized(r, j) = (z[j] - mean) * inv;
      }
    } else {
      bc.mean.assign(U, 0.0);
      bc.inv_std.assign(U, 0.0);
      if (mode == Mode::Train) {
        bc.variance.assign(U, 0.0);
        for (std::size_t r = 0; r < n_rows; ++r) {
          for (std::size_t j = 0; j < U; ++j) bc.mean[j] += bc.pre(r, j);
        }
        for (auto& m : bc.mean) m /= static_cast<double>(n_rows);
        for (std::size_t r = 0; r < n_rows; ++r) {
          for (std::size_t j = 0; j < U; ++j) {
            const double d = bc.pre(r, j) - bc.mean[j];
            bc.variance[j] += d * d;
          }
        }
        for (std::size_t j = 0; j < U; ++j) {
          bc.variance[j] /= static_cast<double>(n_rows);
          bc.inv_std[j] = 1.0 / std::sqrt(bc.variance[j] + kBatchNormEps);
        }
      } else {
        bc.mean = b.running_mean;
        for (std::size_t j = 0; j < U; ++j) bc.inv_std[j] = 1.0 / std::sqrt(b.running_var[j] + kBatchNormEps);
      }
      for (std::size_t r = 0; r < n_rows; ++r) {
        for (std::size_t j = 0; j < U; ++j) bc.normalized(r, j) = (bc.pre(r, j) - bc.mean[j]) * bc.inv_std[j];
      }
    }
    bc.affine = Matrix(n_rows, U);
    bc.out = Matrix(n_rows, U);
    for (std::size_t r = 0; r < n_rows; ++r) {
      for (std::size_t j = 0; j < U; ++j) {
        const double a = b.gamma[j] * bc.normalized(r, j) + b.beta[j];
        bc.affine(r, j) = a;
        const double o = b.spec.kind == BranchKind::Text ? gelu(a) : std::max(a, 0.0);
        bc.out(r, j) = o;
        concat(r, offset + j) = o;
      }
    }
    offset += U;
    if (cache) c.branches.push_back(std::move(bc));
  }

  const bool drop = mode == Mode::Train && dropout_rng != nullptr && dropout_ > 0.0;
  const double keep_scale = 1.0 / (1.0 - dropout_);
  Matrix x = std::move(concat);
  for (std::size_t l = 0; l < head_.size(); ++l) {
    HeadCache hc;
    Matrix z = dense_forward(x, head_[l]);
    const bool hidden = l + 1 < head_.size();
    Matrix next = z;
    if (hidden) {
      for (auto& v : next.data) v = std::max(v, 0.0);
      if (drop) {
        hc.mask = Matrix(next.rows, next.cols);
        for (std::size_t i = 0; i < next.data.size(); ++i) {
          const double m = dropout_rng->uniform() >= dropout_ ? keep_scale : 0.0;
          hc.mask.data[i] = m;
          next.data[i] *= m;
        }
      }
    }
    if (cache) {
      hc.input = std::move(x);
      hc.pre = std::move(z);
      c.head.push_back(std::move(hc));
    }
    x = std::move(next);
  }
  c.output = x.data;
  return x.data;
}

void FusionNet::backward(const ForwardCache& cache, std::span<const double> grad_output, Gradients& grads) const {
  if (cache.head.size() != head_.size() || cache.branches.size() != branches_.size()) {
    throw Error(ErrorCode::InvalidArgument, "backward needs a cache filled by forward");
  }
  const std::size_t n_rows = cache.output.size();
  if (grad_output.size() != n_rows) throw Error(ErrorCode::LengthMismatch, "grad_output does not match batch");

  // Gradient slots: branch tensors first, then head weight/bias pairs.
  std::vector<std::size_t> branch_slot;
  std::size_t slot = 0;
  for (const auto& b : branches_) {
    branch_slot.push_back(slot);
    slot += b.projection.bias.empty() ? 3 : 4;
  }
  const std::size_t head_slot = slot;

  Matrix dz(n_rows, 1);
  std::copy(grad_output.begin(), grad_output.end(), dz.data.begin());
  Matrix dx;
  for (std::size_t l = head_.size(); l-- > 0;) {
    const auto& hc = cache.head[l];
    dx = dense_backward(hc.input, dz, head_[l], grads[head_slot + 2 * l], &grads[head_slot + 2 * l + 1], true);
    if (l == 0) break;
    // Input of layer l is dropout(relu(pre of layer l-1)).
    const auto& prev = cache.head[l - 1];
    dz = Matrix(n_rows, head_[l - 1].out);
    for (std::size_t i = 0; i < dz.data.size(); ++i) {
      double g = prev.pre.data[i] > 0.0 ? dx.data[i] : 0.0;
      if (!prev.mask.data.empty()) g *= prev.mask.data[i];
      dz.data[i] = g;
    }
  }

  std::size_t offset = 0;
  for (std::size_t bi = 0; bi < branches_.size(); ++bi) {
    const auto& b = branches_[bi];
    const auto& bc = cache.branches[bi];
    const std::size_t U = b.spec.unified_width;
    const bool text = b.spec.kind == BranchKind::Text;
    const std::size_t s = branch_slot[bi];
    auto& dgamma = grads[s + (text ? 2 : 1)];
    auto& dbeta = grads[s + (text ? 3 : 2)];

    Matrix dxhat(n_rows, U);
    for (std::size_t r = 0; r < n_rows; ++r) {
      for (std::size_t j = 0; j < U; ++j) {
        const double a = bc.affine(r, j);
        const double g_out = dx(r, offset + j);
        const double da = text ? g_out * gelu_grad(a) : (a > 0.0 ? g_out : 0.0);
        dgamma[j] += da * bc.normalized(r, j);
        dbeta[j] += da;
        dxhat(r, j) = da * b.gamma[j];
      }
    }

    Matrix dpre(n_rows, U);
    if (text) {
      for (std::size_t r = 0; r < n_rows; ++r) {
        double mean_g = 0.0;
        double mean_gx = 0.0;
        for (std::size_t j = 0; j < U; ++j) {
          mean_g += dxhat(r, j);
          mean_gx += dxhat(r, j) * bc.normalized(r, j);
        }
        mean_g /= static_cast<double>(U);
        mean_gx /= static_cast<double>(U);
        for (std::size_t j = 0; j < U; ++j) {
          dpre(r, j) = bc.inv_std[r] * (dxhat(r, j) - mean_g - bc.normalized(r, j) * mean_gx);
        }
      }
    } else if (cache.mode == Mode::Train) {
      std::vector<double> mean_g(U, 0.0);
      std::vector<double> mean_gx(U, 0.0);
      for (std::size_t r = 0; r < n_rows; ++r) {
        for (std::size_t j = 0; j < U; ++j) {
          mean_g[j] += dxhat(r, j);
          mean_gx[j] += dxhat(r, j) * bc.normalized(r, j);
        }
      }
      for (std::size_t j = 0; j < U; ++j) {
        mean_g[j] /= static_cast<double>(n_rows);
        mean_gx[j] /= static_cast<double>(n_rows);
      }
      for (std::size_t r = 0; r < n_rows; ++r) {
        for (std::size_t j = 0; j < U; ++j) {
          dpre(r, j) = bc.inv_std[j] * (dxhat(r, j) - mean_g[j] - bc.normalized(r, j) * mean_gx[j]);
        }
      }
    } else {
      for (std::size_t r = 0; r < n_rows; ++r) {
        for (std::size_t j = 0; j < U; ++j) dpre(r, j) = dxhat(r, j) * bc.inv_std[j];
      }
    }
    const Matrix& x = cache.batch->at(b.spec.source_id);
    dense_backward(x, dpre, b.projection, grads[s], text ? &grads[s + 1] : nullptr, false);
    offset += U;
  }
}

void FusionNet::update_running_stats(const ForwardCache& cache, double momentum) {
  if (cache.mode != Mode::Train) return;
  const std::size_t n_rows = cache.output.size();
  for (std::size_t bi = 0; bi < branches_.size(); ++bi) {
    auto& b = branches_[bi];
    if (b.spec.kind != BranchKind::Video) continue;
    const auto& bc = cache.branches.at(bi);
    const double correction = n_rows > 1 ? static_cast<double>(n_rows) / static_cast<double>(n_rows - 1) : 1.0;
    for (std::size_t j = 0; j < b.spec.unified_width; ++j) {
      b.running_mean[j] = (1.0 - momentum) * b.running_mean[j] + momentum * bc.mean[j];
      b.running_var[j] = (1.0 - momentum) * b.running_var[j] + momentum * bc.variance[j] * correction;
    }
  }
}

double mse_loss(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) throw Error(ErrorCode::LengthMismatch, "prediction and target lengths differ");
  if (pred.empty()) throw Error(ErrorCode::EmptyData, "empty loss batch");
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) total += (pred[i] - target[i]) * (pred[i] - target[i]);
  return total / static_cast<double>(pred.size());
}

std::vector<double> mse_loss_grad(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) throw Error(ErrorCode::LengthMismatch, "prediction and target lengths differ");
  std::vector<double> g(pred.size());
  const double scale = 2.0 / static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) g[i] = scale * (pred[i] - target[i]);
  return g;
}

GradientCheckResult gradient_check(const FusionNet& net, const Batch& batch, std::span<const double> targets,
                                   double epsilon) {
  if (net.parameter_count() > 5000) {
    throw Error(ErrorCode::InvalidArgument, "gradient check is limited to 5000 parameters");
  }
  ForwardCache cache;
  const auto pred = net.forward(batch, Mode::Train, nullptr, &cache);
  auto grads = net.zero_gradients();
  net.backward(cache, mse_loss_grad(pred, targets), grads);

  FusionNet probe = net;
  auto params = probe.parameters();
  const auto names = probe.parameter_names();
  GradientCheckResult result;
  result.max_rel_error = 0.0;
  for (std::size_t t = 0; t < params.size(); ++t) {
    for (std::size_t i = 0; i < params[t].size(); ++i) {
      const double saved = params[t][i];
      params[t][i] = saved + epsilon;
      const double up = mse_loss(probe.forward(batch, Mode::Train), targets);
      params[t][i] = saved - epsilon;
      const double down = mse_loss(probe.forward(batch, Mode::Train), targets);
      params[t][i] = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double analytic = grads[t][i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
      const double rel = std::abs(analytic - numeric) / denom;
      if (rel > result.max_rel_error || result.worst_parameter.empty()) {
        result.max_rel_error = std::max(result.max_rel_error, rel);
        result.worst_parameter = names[t] + "[" + std::to_string(i) + "]";
      }
      ++result.n_checked;
    }
  }
  return result;
}

}  // namespace popcast
