#include "amp/nncore.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace amp {

void MlpSpec::validate() const {
  if (layer_sizes.size() < 2) throw std::invalid_argument("MlpSpec: need at least 2 layer sizes");
  for (std::size_t s : layer_sizes)
    if (s < 1) throw std::invalid_argument("MlpSpec: layer sizes must be >= 1");
}

std::size_t MlpSpec::num_params() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l)
    n += layer_sizes[l] * layer_sizes[l + 1] + layer_sizes[l + 1];
  return n;
}

std::size_t MlpSpec::layer_offset(std::size_t layer) const {
  std::size_t off = 0;
  for (std::size_t l = 0; l < layer; ++l) off += fan_in(l) * fan_out(l) + fan_out(l);
  return off;
}

ParamVector init_params(const MlpSpec& spec, Rng rng) {
  spec.validate();
  ParamVector theta(spec.num_params(), 0.0);
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const std::size_t in = spec.fan_in(l);
    const std::size_t out = spec.fan_out(l);
    const double s = std::sqrt(6.0 / static_cast<double>(in + out));
    const std::size_t off = spec.layer_offset(l);
    for (std::size_t k = 0; k < in * out; ++k) theta[off + k] = (2.0 * rng.uniform() - 1.0) * s;
  }
  return theta;
}

namespace {

void check_layout(const MlpSpec& spec, std::span<const double> theta, std::size_t width) {
  spec.validate();
  if (theta.size() != spec.num_params() || width != spec.input_dim())
    throw std::invalid_argument("layout mismatch");
}

// Pre-activations of every layer; zs[l] is m x fan_out(l).
std::vector<RealMat> forward_trace(const MlpSpec& spec, std::span<const double> theta,
                                   const RealMat& inputs) {
  const std::size_t m = inputs.rows();
  std::vector<RealMat> zs;
  zs.reserve(spec.num_layers());
  const RealMat* prev = &inputs;
  RealMat act;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const std::size_t in = spec.fan_in(l);
    const std::size_t out = spec.fan_out(l);
    const double* w = theta.data() + spec.layer_offset(l);
    const double* b = w + in * out;
    // Transposed copy so the inner loop runs over contiguous outputs.
    RealVec wt(in * out);
    for (std::size_t j = 0; j < out; ++j)
      for (std::size_t k = 0; k < in; ++k) wt[k * out + j] = w[j * in + k];
    RealMat z(m, out);
    for (std::size_t i = 0; i < m; ++i) {
      const auto a = prev->row(i);
      double* zi = z.row(i).data();
      for (std::size_t j = 0; j < out; ++j) zi[j] = b[j];
      for (std::size_t k = 0; k < in; ++k) {
        const double ak = a[k];
        if (ak == 0.0) continue;
        const double* wk = wt.data() + k * out;
        for (std::size_t j = 0; j < out; ++j) zi[j] += ak * wk[j];
      }
    }
    zs.push_back(std::move(z));
    if (l + 1 < spec.num_layers()) {
      act = zs.back();
      for (double& v : act.data()) v = v > 0.0 ? v : 0.0;
      prev = &act;
    }
  }
  return zs;
}

RealMat relu(const RealMat& z) {
  RealMat a = z;
  for (double& v : a.data()) v = v > 0.0 ? v : 0.0;
  return a;
}

void check_labels(const RealMat& logits, const Labels& labels) {
  if (logits.rows() != labels.size()) throw std::invalid_argument("layout mismatch");
  for (std::size_t y : labels)
    if (y >= logits.cols()) throw std::invalid_argument("label out of range");
}

}  // namespace

RealMat forward(const MlpSpec& spec, std::span<const double> theta, const RealMat& inputs) {
  check_layout(spec, theta, inputs.cols());
  auto zs = forward_trace(spec, theta, inputs);
  return std::move(zs.back());
}

RealMat softmax(const RealMat& logits) {
  RealMat p = logits;
  for (std::size_t i = 0; i < p.rows(); ++i) {
    auto r = p.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double sum = 0.0;
    for (double& v : r) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (double& v : r) v /= sum;
  }
  return p;
}

XentResult xent_loss(const RealMat& logits, const Labels& labels) {
  check_labels(logits, labels);
  XentResult out;
  out.per_example.resize(labels.size());
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto r = logits.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double sum = 0.0;
    for (double v : r) sum += std::exp(v - mx);
    // -log softmax[y] = log sum exp(z - mx) - (z_y - mx)
    const double li = std::log(sum) - (r[labels[i]] - mx);
    out.per_example[i] = li;
    total += li;
  }
  out.mean_loss = labels.empty() ? 0.0 : total / static_cast<double>(labels.size());
  return out;
}

LossAndGrad loss_and_grad(const MlpSpec& spec, std::span<const double> theta, const Batch& batch) {
  check_layout(spec, theta, batch.inputs.cols());
  check_labels(RealMat(batch.inputs.rows(), spec.output_dim()), batch.labels);
  const std::size_t m = batch.inputs.rows();
  if (m == 0) throw std::invalid_argument("empty batch");
  const auto zs = forward_trace(spec, theta, batch.inputs);

  LossAndGrad res;
  res.loss = xent_loss(zs.back(), batch.labels).mean_loss;
  res.grad.assign(theta.size(), 0.0);

  // dL/dz for the output layer: (softmax - onehot) / m.
  RealMat delta = softmax(zs.back());
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t i = 0; i < m; ++i) {
    auto r = delta.row(i);
    r[batch.labels[i]] -= 1.0;
    for (double& v : r) v *= inv_m;
  }

  for (std::size_t l = spec.num_layers(); l-- > 0;) {
    const std::size_t in = spec.fan_in(l);
    const std::size_t out = spec.fan_out(l);
    const std::size_t off = spec.layer_offset(l);
    const double* w = theta.data() + off;
    double* gw = res.grad.data() + off;
    double* gb = gw + in * out;
    const RealMat a = l == 0 ? batch.inputs : relu(zs[l - 1]);

    for (std::size_t i = 0; i < m; ++i) {
      const auto d = delta.row(i);
      const auto ai = a.row(i);
      for (std::size_t j = 0; j < out; ++j) {
        const double dj = d[j];
        if (dj == 0.0) continue;
        double* gwj = gw + j * in;
        for (std::size_t k = 0; k < in; ++k) gwj[k] += dj * ai[k];
        gb[j] += dj;
      }
    }
    if (l == 0) break;

    RealMat prev(m, in);
    const RealMat& zprev = zs[l - 1];
    for (std::size_t i = 0; i < m; ++i) {
      const auto d = delta.row(i);
      auto p = prev.row(i);
      for (std::size_t j = 0; j < out; ++j) {
        const double dj = d[j];
        if (dj == 0.0) continue;
        const double* wj = w + j * in;
        for (std::size_t k = 0; k < in; ++k) p[k] += dj * wj[k];
      }
      // ReLU subgradient at 0 is 0.
      const auto z = zprev.row(i);
      for (std::size_t k = 0; k < in; ++k)
        if (!(z[k] > 0.0)) p[k] = 0.0;
    }
    delta = std::move(prev);
  }
  return res;
}

ParamVector grad(const MlpSpec& spec, std::span<const double> theta, const Batch& batch) {
  return loss_and_grad(spec, theta, batch).grad;
}

double batch_loss(const MlpSpec& spec, std::span<const double> theta, const Batch& batch) {
  return xent_loss(forward(spec, theta, batch.inputs), batch.labels).mean_loss;
}

RealVec input_grad(const MlpSpec& spec, std::span<const double> theta, std::span<const double> x,
                   std::size_t label) {
  RealMat row(1, x.size(), RealVec(x.begin(), x.end()));
  check_layout(spec, theta, row.cols());
  if (label >= spec.output_dim()) throw std::invalid_argument("label out of range");
  const auto zs = forward_trace(spec, theta, row);

  RealVec delta = softmax(zs.back()).data();
  delta[label] -= 1.0;
  for (std::size_t l = spec.num_layers(); l-- > 0;) {
    const std::size_t in = spec.fan_in(l);
    const std::size_t out = spec.fan_out(l);
    const double* w = theta.data() + spec.layer_offset(l);
    RealVec prev(in, 0.0);
    for (std::size_t j = 0; j < out; ++j) {
      if (delta[j] == 0.0) continue;
      for (std::size_t k = 0; k < in; ++k) prev[k] += delta[j] * w[j * in + k];
    }
    if (l > 0) {
      const auto z = zs[l - 1].row(0);
      for (std::size_t k = 0; k < in; ++k)
        if (!(z[k] > 0.0)) prev[k] = 0.0;
    }
    delta = std::move(prev);
  }
  return delta;
}

std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < v.size(); ++j)
    if (v[j] > v[best]) best = j;
  return best;
}

Labels predict(const MlpSpec& spec, std::span<const double> theta, const RealMat& inputs) {
  const RealMat logits = forward(spec, theta, inputs);
  Labels out(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) out[i] = argmax(logits.row(i));
  return out;
}

double BatchObjective::value(std::span<const double> theta) const {
  return batch_loss(spec_, theta, batch_);
}

RealVec BatchObjective::gradient(std::span<const double> theta) const {
  return grad(spec_, theta, batch_);
}

LossAndGrad BatchObjective::value_and_gradient(std::span<const double> theta) const {
  return loss_and_grad(spec_, theta, batch_);
}

ToyLossGrad toy_loss_and_grad(const PiecewiseToyLoss& toy, double theta) {
  const double z = theta * toy.x;
  if (z >= 0.0) return {z, toy.x};
  return {-2.0 * z, -2.0 * toy.x};
}

double ToyObjective::value(std::span<const double> theta) const {
  if (theta.size() != 1) throw std::invalid_argument("layout mismatch");
  return toy_loss_and_grad(toy_, theta[0]).loss;
}

RealVec ToyObjective::gradient(std::span<const double> theta) const {
  if (theta.size() != 1) throw std::invalid_argument("layout mismatch");
  return {toy_loss_and_grad(toy_, theta[0]).subgradient};
}

}  // namespace amp
