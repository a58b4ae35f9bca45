#include "amp/trainer.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <numeric>

namespace amp {

const char* to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::ERM: return "erm";
    case TrainMode::AMP: return "amp";
    case TrainMode::RMP: return "rmp";
    case TrainMode::ADV: return "adv";
    case TrainMode::GNP: return "gnp";
  }
  return "?";
}

TrainMode parse_train_mode(std::string_view name) {
  std::string lower(name);
  for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "erm") return TrainMode::ERM;
  if (lower == "amp") return TrainMode::AMP;
  if (lower == "rmp") return TrainMode::RMP;
  if (lower == "adv") return TrainMode::ADV;
  if (lower == "gnp") return TrainMode::GNP;
  throw std::invalid_argument("unknown training mode '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (!(outer_lr > 0.0)) throw std::invalid_argument("outer_lr must be > 0");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight_decay must be >= 0");
  for (const auto& s : lr_decay)
    if (!(s.factor > 0.0)) throw std::invalid_argument("lr_decay factor must be > 0");
  switch (mode) {
    case TrainMode::AMP:
      inner.validate();
      ball.validate();
      break;
    case TrainMode::RMP:
      ball.validate();
      break;
    case TrainMode::ADV:
      attack.validate();
      break;
    case TrainMode::GNP:
      if (!(gnp_zeta > 0.0) || !(gnp_epsilon >= 0.0))
        throw std::invalid_argument("gnp_zeta must be > 0 and gnp_epsilon >= 0");
      break;
    case TrainMode::ERM:
      break;
  }
}

double TrainConfig::lr_at(std::size_t epoch) const {
  double lr = outer_lr;
  for (const auto& s : lr_decay)
    if (epoch >= s.epoch) lr *= s.factor;
  return lr;
}

Evaluation evaluate(const MlpSpec& spec, std::span<const double> theta, const Dataset& ds) {
  const RealMat logits = forward(spec, theta, ds.inputs);
  Evaluation ev;
  ev.mean_loss = xent_loss(logits, ds.labels).mean_loss;
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (argmax(logits.row(i)) != ds.labels[i]) ++wrong;
  ev.error_rate = ds.size() == 0 ? 0.0 : static_cast<double>(wrong) / static_cast<double>(ds.size());
  return ev;
}

RealVec hessian_vector_product(const Objective& objective, std::span<const double> theta,
                               std::span<const double> v, double h) {
  const double norm = l2_norm(v);
  if (norm == 0.0) return RealVec(theta.size(), 0.0);
  const double step = h / norm;
  const RealVec gp = objective.gradient(add_scaled(theta, step, v));
  const RealVec gm = objective.gradient(add_scaled(theta, -step, v));
  RealVec out(theta.size());
  const double s = norm / (2.0 * h);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (gp[i] - gm[i]) * s;
  return out;
}

double gnp_omega(double grad_norm, double gnp_zeta, double gnp_epsilon) {
  return gnp_zeta * grad_norm <= gnp_epsilon ? gnp_zeta * grad_norm * grad_norm : gnp_epsilon * grad_norm;
}

ParamVector gnp_grad(const Objective& objective, std::span<const double> theta, double gnp_zeta,
                     double gnp_epsilon) {
  RealVec g = objective.gradient(theta);
  const double gnorm = l2_norm(g);
  if (gnorm == 0.0) return g;
  const RealVec hg = hessian_vector_product(objective, theta, g);
  const double coef = gnp_zeta * gnorm <= gnp_epsilon ? 2.0 * gnp_zeta : gnp_epsilon / gnorm;
  axpy(coef, hg, g);
  return g;
}

ParamVector gnp_grad(const MlpSpec& spec, std::span<const double> theta, const Batch& batch,
                     double gnp_zeta, double gnp_epsilon) {
  return gnp_grad(BatchObjective(spec, batch), theta, gnp_zeta, gnp_epsilon);
}

namespace {

Batch gather(const Dataset& ds, std::span<const std::size_t> idx) {
  Batch b{RealMat(idx.size(), ds.dim()), Labels(idx.size())};
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto src = ds.inputs.row(idx[i]);
    std::copy(src.begin(), src.end(), b.inputs.row(i).begin());
    b.labels[i] = ds.labels[idx[i]];
  }
  return b;
}

}  // namespace

RunRecord train(const MlpSpec& spec, const SplitDataset& data, const TrainConfig& cfg) {
  spec.validate();
  cfg.validate();
  data.train.validate();
  if (data.train.dim() != spec.input_dim()) throw std::invalid_argument("layout mismatch");
  if (data.train.num_classes > spec.output_dim())
    throw std::invalid_argument("dataset has more classes than the network outputs");

  RunRecord rec;
  rec.spec = spec;
  rec.config = cfg;
  ParamVector theta = init_params(spec, Rng(cfg.seed, "init"));
  ParamVector velocity(theta.size(), 0.0);
  Rng rmp_rng(cfg.seed, "rmp");
  const Rng shuffle_root(cfg.seed, "shuffle");

  const std::size_t n = data.train.size();
  std::vector<std::size_t> order(n);
  ParamVector probe(theta.size());

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = cfg.lr_at(epoch);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng = shuffle_root.derive(epoch);
    shuffle(order, shuffle_rng);

    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      const Batch batch = gather(data.train, std::span(order).subspan(start, stop - start));

      ParamVector g;
      switch (cfg.mode) {
        case TrainMode::ERM:
          g = grad(spec, theta, batch);
          break;
        case TrainMode::AMP: {
          const ParamVector delta = amp_inner_ascent(spec, theta, batch, cfg.inner, cfg.ball);
          for (std::size_t i = 0; i < theta.size(); ++i) probe[i] = theta[i] + delta[i];
          g = grad(spec, probe, batch);
          break;
        }
        case TrainMode::RMP: {
          const ParamVector delta = rmp_sample(theta.size(), cfg.ball, rmp_rng);
          for (std::size_t i = 0; i < theta.size(); ++i) probe[i] = theta[i] + delta[i];
          g = grad(spec, probe, batch);
          break;
        }
        case TrainMode::ADV:
          g = grad(spec, theta, attack_batch(spec, theta, batch, cfg.attack));
          break;
        case TrainMode::GNP:
          g = gnp_grad(spec, theta, batch, cfg.gnp_zeta, cfg.gnp_epsilon);
          break;
      }

      for (std::size_t i = 0; i < theta.size(); ++i) {
        const double gi = g[i] + cfg.weight_decay * theta[i];
        velocity[i] = cfg.momentum * velocity[i] + gi;
        theta[i] -= lr * velocity[i];
      }
    }

    EpochRecord er;
    er.epoch = epoch + 1;
    const Evaluation tr = evaluate(spec, theta, data.train);
    if (!std::isfinite(tr.mean_loss) || !all_finite(theta)) throw TrainingDiverged(epoch + 1);
    er.train_loss = tr.mean_loss;
    er.train_err = tr.error_rate;
    if (data.test.size() > 0) {
      const Evaluation te = evaluate(spec, theta, data.test);
      er.test_loss = te.mean_loss;
      er.test_err = te.error_rate;
    }
    er.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rec.history.push_back(er);
  }
  rec.theta = std::move(theta);
  return rec;
}

ToyRunResult train_toy(const PiecewiseToyLoss& toy, const ToyTrainConfig& cfg) {
  if (cfg.mode != TrainMode::ERM && cfg.mode != TrainMode::AMP)
    throw std::invalid_argument("toy training supports erm and amp only");
  const ToyObjective objective(toy);
  ToyRunResult out;
  out.trajectory.reserve(cfg.steps);
  double theta = cfg.theta0;
  const std::vector<ParamVector> starts = cfg.boundary_starts
      ? std::vector<ParamVector>{{0.0}, {-cfg.ball.epsilon}, {cfg.ball.epsilon}}
      : std::vector<ParamVector>{{0.0}};

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    double lr = cfg.lr;
    for (const auto& s : cfg.lr_decay)
      if (step >= s.epoch) lr *= s.factor;
    out.final_lr = lr;

    double delta = 0.0;
    if (cfg.mode == TrainMode::AMP) {
      const ParamVector th{theta};
      delta = amp_inner_ascent_multistart(objective, th, cfg.inner, cfg.ball, starts)[0];
    }
    theta -= lr * toy_loss_and_grad(toy, theta + delta).subgradient;
    out.trajectory.push_back(theta);
  }
  out.theta = theta;
  return out;
}

}  // namespace amp
