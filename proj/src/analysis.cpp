#include "amp/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace amp {

ParamVector filter_normalized_direction(const MlpSpec& spec, std::span<const double> theta, Rng rng) {
  spec.validate();
  if (theta.size() != spec.num_params()) throw std::invalid_argument("layout mismatch");
  ParamVector d = rng_standard_normal(rng, theta.size());
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const std::size_t in = spec.fan_in(l);
    const std::size_t out = spec.fan_out(l);
    const std::size_t w = spec.layer_offset(l);
    const std::size_t b = w + in * out;
    for (std::size_t j = 0; j < out; ++j) {
      double tn = theta[b + j] * theta[b + j];
      double dn = d[b + j] * d[b + j];
      for (std::size_t k = 0; k < in; ++k) {
        tn += theta[w + j * in + k] * theta[w + j * in + k];
        dn += d[w + j * in + k] * d[w + j * in + k];
      }
      const double s = dn > 0.0 ? std::sqrt(tn) / std::sqrt(dn) : 0.0;
      for (std::size_t k = 0; k < in; ++k) d[w + j * in + k] *= s;
      d[b + j] *= s;
    }
  }
  return d;
}

RealVec linspace(double lo, double hi, std::size_t count) {
  RealVec out(count);
  for (std::size_t i = 0; i < count; ++i)
    out[i] = count == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  return out;
}

RealVec scan_1d(const Objective& loss, std::span<const double> theta, std::span<const double> direction,
                std::span<const double> alphas) {
  if (direction.size() != theta.size()) throw std::invalid_argument("layout mismatch");
  RealVec out(alphas.size());
  for (std::size_t i = 0; i < alphas.size(); ++i) out[i] = loss.value(add_scaled(theta, alphas[i], direction));
  return out;
}

RealMat scan_2d(const Objective& loss, std::span<const double> theta, std::span<const double> dx,
                std::span<const double> dy, std::span<const double> grid_x, std::span<const double> grid_y) {
  if (dx.size() != theta.size() || dy.size() != theta.size()) throw std::invalid_argument("layout mismatch");
  RealMat out(grid_x.size(), grid_y.size());
  RealVec probe(theta.size());
  for (std::size_t i = 0; i < grid_x.size(); ++i)
    for (std::size_t j = 0; j < grid_y.size(); ++j) {
      for (std::size_t k = 0; k < theta.size(); ++k) probe[k] = theta[k] + grid_x[i] * dx[k] + grid_y[j] * dy[k];
      out(i, j) = loss.value(probe);
    }
  return out;
}

LandscapeScan1D landscape_1d(const MlpSpec& spec, std::span<const double> theta, const SplitDataset& data,
                             ParamVector direction, RealVec alphas) {
  LandscapeScan1D scan;
  const Batch train = data.train.as_batch();
  scan.losses_train = scan_1d(BatchObjective(spec, train), theta, direction, alphas);
  if (data.test.size() > 0) {
    const Batch test = data.test.as_batch();
    scan.losses_test = scan_1d(BatchObjective(spec, test), theta, direction, alphas);
  } else {
    scan.losses_test.assign(alphas.size(), 0.0);
  }
  scan.direction = std::move(direction);
  scan.alphas = std::move(alphas);
  return scan;
}

LandscapeScan2D landscape_2d(const MlpSpec& spec, std::span<const double> theta, const Dataset& data,
                             ParamVector dx, ParamVector dy, RealVec grid_x, RealVec grid_y) {
  LandscapeScan2D scan;
  const Batch batch = data.as_batch();
  scan.losses = scan_2d(BatchObjective(spec, batch), theta, dx, dy, grid_x, grid_y);
  scan.dx = std::move(dx);
  scan.dy = std::move(dy);
  scan.grid_x = std::move(grid_x);
  scan.grid_y = std::move(grid_y);
  return scan;
}

InnerAscentSpec default_sharpness_ascent(double eps) {
  return {eps > 0.0 ? eps / 50.0 : 1.0, 50};
}

double sharpness(const Objective& loss, std::span<const double> theta, double eps,
                 const InnerAscentSpec& inner, std::uint64_t seed) {
  inner.validate();
  if (!(eps >= 0.0)) throw std::invalid_argument("eps must be >= 0");
  const double base = loss.value(theta);
  if (eps == 0.0) return 0.0;
  const BallSpec ball{eps};

  std::vector<RealVec> starts;
  const RealVec g0 = loss.gradient(theta);
  const double g0n = l2_norm(g0);
  if (g0n > 0.0) starts.push_back(scaled(eps / g0n, g0));
  Rng rng(seed, "sharpness");
  RealVec r = rng_standard_normal(rng, theta.size());
  starts.push_back(scaled(eps / l2_norm(r), r));

  double best = base;
  RealVec probe(theta.size());
  for (RealVec& delta : starts) {
    for (std::size_t n = 0; n < inner.n_steps; ++n) {
      for (std::size_t i = 0; i < theta.size(); ++i) probe[i] = theta[i] + delta[i];
      const RealVec g = loss.gradient(probe);
      const double gn = l2_norm(g);
      if (gn == 0.0) break;
      axpy(inner.zeta / gn, g, delta);
      delta = project_to_ball(delta, ball);
    }
    for (std::size_t i = 0; i < theta.size(); ++i) probe[i] = theta[i] + delta[i];
    best = std::max(best, loss.value(probe));
  }
  return best - base;
}

double sharpness(const MlpSpec& spec, std::span<const double> theta, const Dataset& data, double eps,
                 const InnerAscentSpec& inner, std::uint64_t seed) {
  const Batch batch = data.as_batch();
  return sharpness(BatchObjective(spec, batch), theta, eps, inner, seed);
}

double hessian_top_eig(const Objective& loss, std::span<const double> theta, std::size_t iters,
                       std::uint64_t seed) {
  if (iters < 1) throw std::invalid_argument("hessian_top_eig: iters must be >= 1");
  Rng rng(seed, "power-iteration");
  RealVec v = rng_standard_normal(rng, theta.size());
  v = scaled(1.0 / l2_norm(v), v);
  double estimate = 0.0;
  for (std::size_t it = 0; it < iters; ++it) {
    const RealVec hv = hessian_vector_product(loss, theta, v);
    estimate = dot(v, hv);
    const double n = l2_norm(hv);
    if (n == 0.0) break;
    v = scaled(1.0 / n, hv);
  }
  return estimate;
}

double hessian_top_eig(const MlpSpec& spec, std::span<const double> theta, const Dataset& data,
                       std::size_t iters, std::uint64_t seed) {
  const Batch batch = data.as_batch();
  return hessian_top_eig(BatchObjective(spec, batch), theta, iters, seed);
}

CalibrationReport ece(std::span<const double> confidences, const std::vector<bool>& correct,
                      std::size_t num_bins) {
  if (num_bins < 1) throw std::invalid_argument("ece: need at least one bin");
  if (confidences.size() != correct.size()) throw std::invalid_argument("ece: length mismatch");
  const double m = static_cast<double>(num_bins);
  std::vector<std::size_t> counts(num_bins, 0), hits(num_bins, 0);
  RealVec conf_sum(num_bins, 0.0);
  for (std::size_t i = 0; i < confidences.size(); ++i) {
    const double c = confidences[i];
    if (!(c > 0.0 && c <= 1.0)) throw std::invalid_argument("ece: confidence outside (0, 1]");
    // Bin b (0-based) holds (b/M, (b+1)/M].
    auto b = static_cast<std::size_t>(std::ceil(c * m));
    b = std::clamp<std::size_t>(b, 1, num_bins) - 1;
    if (b > 0 && c <= static_cast<double>(b) / m) --b;
    if (b + 1 < num_bins && c > static_cast<double>(b + 1) / m) ++b;
    ++counts[b];
    conf_sum[b] += c;
    if (correct[i]) ++hits[b];
  }
  CalibrationReport rep;
  rep.num_bins = num_bins;
  const double n = static_cast<double>(confidences.size());
  for (std::size_t b = 0; b < num_bins; ++b) {
    CalibrationBin bin;
    bin.lo = static_cast<double>(b) / m;
    bin.hi = static_cast<double>(b + 1) / m;
    bin.count = counts[b];
    if (counts[b] > 0) {
      const double cnt = static_cast<double>(counts[b]);
      bin.acc = static_cast<double>(hits[b]) / cnt;
      bin.conf = conf_sum[b] / cnt;
      rep.ece += (cnt / n) * std::abs(bin.acc - bin.conf);
    }
    rep.bins.push_back(bin);
  }
  return rep;
}

CalibrationReport calibrate_model(const MlpSpec& spec, std::span<const double> theta, const Dataset& data,
                                  std::size_t num_bins) {
  const RealMat probs = softmax(forward(spec, theta, data.inputs));
  RealVec conf(data.size());
  std::vector<bool> correct(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto row = probs.row(i);
    const std::size_t k = argmax(row);
    conf[i] = row[k];
    correct[i] = k == data.labels[i];
  }
  return ece(conf, correct, num_bins);
}

RealVec default_sweep_grid() {
  RealVec grid{0.0};
  const double lo = std::log(0.005), hi = std::log(1.0);
  for (int i = 0; i < 13; ++i) grid.push_back(std::exp(lo + (hi - lo) * i / 12.0));
  grid.back() = 1.0;
  return grid;
}

void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < jobs; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < count;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

std::vector<SweepRow> epsilon_sweep(const MlpSpec& spec, const SplitDataset& data, const TrainConfig& base_cfg,
                                    std::span<const double> eps_grid, std::span<const std::uint64_t> seeds,
                                    std::size_t jobs) {
  if (base_cfg.mode != TrainMode::AMP) throw std::invalid_argument("epsilon_sweep: base config must be amp");
  std::vector<SweepRow> rows(seeds.size() * eps_grid.size());
  parallel_for(rows.size(), jobs, [&](std::size_t idx) {
    TrainConfig cfg = base_cfg;
    cfg.seed = seeds[idx / eps_grid.size()];
    cfg.ball.epsilon = eps_grid[idx % eps_grid.size()];
    const RunRecord rec = train(spec, data, cfg);
    SweepRow& row = rows[idx];
    row.epsilon = cfg.ball.epsilon;
    row.seed = cfg.seed;
    row.train_risk = evaluate(spec, rec.theta, data.train).mean_loss;
    row.test_risk = data.test.size() > 0 ? evaluate(spec, rec.theta, data.test).mean_loss : 0.0;
  });
  return rows;
}

double robustness_eval(const MlpSpec& spec, std::span<const double> theta, const Dataset& data,
                       const AttackSpec& attack) {
  attack.validate();
  if (data.size() == 0) return 0.0;
  std::size_t wrong = 0;
  RealMat row(1, data.dim());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const RealVec adv = run_attack(spec, theta, data.inputs.row(i), data.labels[i], attack);
    std::copy(adv.begin(), adv.end(), row.row(0).begin());
    if (argmax(forward(spec, theta, row).row(0)) != data.labels[i]) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(data.size());
}

}  // namespace amp
