#ifndef GMG_HARNESS_HPP
#define GMG_HARNESS_HPP

#include "gmg/common.hpp"
#include "gmg/gmg.hpp"
#include "gmg/gw.hpp"
#include "gmg/net.hpp"
#include "gmg/sinkhorn.hpp"
#include "gmg/synthetic.hpp"

#include <chrono>
#include <string>
#include <vector>

namespace gmg {

enum class Regularizer { None, Dst, Gmg };

inline const char* regularizer_name(Regularizer r) {
  switch (r) {
    case Regularizer::None: return "none";
    case Regularizer::Dst: return "dst";
    case Regularizer::Gmg: return "gmg";
  }
  return "?";
}

struct ExperimentConfig {
  Regularizer regularizer = Regularizer::Gmg;
  double lambda = 1.0;
  CostKernel kernel_x;
  CostKernel kernel_y;
  double fit_epsilon = 0.05;
  GwConfig gw;
  SinkhornConfig fit_solver;  // epsilon field overridden by fit_epsilon
  int steps = 5000;
  int batch_size = 128;
  double lr = 1e-3;
  int eval_every = 500;
  std::vector<int> hidden_layers = {64, 64};
  Activation activation = Activation::Tanh;
  std::uint64_t seed = 1;
  double max_skip_fraction = 0.01;

  ExperimentConfig() {
    // training-grade solver tolerances; tight enough for stable gradients,
    // loose enough to keep a 5000-step run at desk scale
    gw.max_outer = 30;
    gw.outer_tolerance = 1e-4;
    gw.inner.tolerance = 1e-5;
    gw.inner.max_iterations = 2000;
    fit_solver.tolerance = 1e-6;
    fit_solver.max_iterations = 2000;
  }
};

struct FitLoss {
  double value = 0.0;
  Matrix mapped_gradient;  // fixed-plan gradient w.r.t. the mapped batch
};

/// Debiased Sinkhorn-divergence fitting loss between the mapped batch and the
/// target batch, with the gradient taken at the optimal plans held fixed. The
/// target self-term has no gradient but enters the value.
inline FitLoss sinkhorn_fit_loss(const Matrix& mapped, const Matrix& target,
                                 double epsilon, const SinkhornConfig& base) {
  SinkhornConfig config = base;
  config.epsilon = epsilon;
  config.warm_start_potentials.reset();

  Matrix c_mq = squared_euclidean_cross_cost(mapped, target);
  Matrix c_mm = squared_euclidean_cross_cost(mapped, mapped);
  Matrix c_qq = squared_euclidean_cross_cost(target, target);
  Coupling p_mq = sinkhorn_solve(c_mq, config);
  Coupling p_mm = sinkhorn_solve(c_mm, config);
  Coupling p_qq = sinkhorn_solve(c_qq, config);

  FitLoss loss;
  loss.value = transport_cost(p_mq, c_mq) - 0.5 * transport_cost(p_mm, c_mm) -
               0.5 * transport_cost(p_qq, c_qq);

  Vector r_mq = p_mq.plan.rowwise().sum();
  Matrix sym = p_mm.plan + p_mm.plan.transpose();
  Vector r_sym = sym.rowwise().sum();
  loss.mapped_gradient = 2.0 * (r_mq.asDiagonal() * mapped - p_mq.plan * target) -
                         (r_sym.asDiagonal() * mapped - sym * mapped);
  return loss;
}

struct EvalRecord {
  long step = 0;
  double fit_loss = 0.0;
  double reg_loss = 0.0;
  double holdout_divergence = 0.0;
  double holdout_distortion = 0.0;
};

struct TrainResult {
  TrainState state;
  std::vector<EvalRecord> metrics;
  long skipped_steps = 0;
  double wall_seconds = 0.0;
  PointCloud holdout_source;
  PointCloud holdout_target;
  Matrix holdout_mapped;  // final map applied to the held-out source
};

/// Per step: sample a batch, push it through the map, combine the fitting loss
/// with the configured regularizer (reference r = the source batch), and take
/// one Adam step. Steps whose GW solve refuses a gradient are skipped and
/// counted; a run fails once skips exceed the configured fraction.
inline TrainResult train_map(const SyntheticSpec& spec, const ExperimentConfig& config) {
  validate(spec);
  require(config.lambda >= 0.0 && config.steps >= 1, ErrorCode::DimensionMismatch,
          "experiment config requires lambda >= 0 and steps >= 1");
  auto t_start = std::chrono::steady_clock::now();

  std::vector<int> dims;
  dims.push_back(spec.source_dim);
  for (int h : config.hidden_layers) dims.push_back(h);
  dims.push_back(spec.target_dim);

  Rng init_rng(Rng::mix(config.seed, 0x696e6974u));
  TrainResult result;
  result.state = make_train_state(mlp_init(dims, config.activation, init_rng), config.seed);

  // fixed held-out batch, fresh stream offset from the training seed
  auto holdout = sample_synthetic(spec, config.batch_size, Rng::mix(config.seed, 7777));
  result.holdout_source = holdout.first;
  result.holdout_target = holdout.second;

  const bool use_regularizer =
      config.regularizer != Regularizer::None && config.lambda != 0.0;
  const long max_skips = static_cast<long>(config.max_skip_fraction * config.steps);

  auto evaluate = [&](long step, double fit_value, double reg_value) {
    Matrix mapped = mlp_forward(result.state.params, result.holdout_source.points);
    EvalRecord record;
    record.step = step;
    record.fit_loss = fit_value;
    record.reg_loss = reg_value;
    record.holdout_divergence = sinkhorn_divergence(
        PointCloud(mapped), result.holdout_target, config.fit_epsilon, config.fit_solver);
    record.holdout_distortion = distortion(result.holdout_source, PointCloud(mapped),
                                           config.kernel_x, config.kernel_y);
    result.metrics.push_back(record);
  };

  for (long step = 1; step <= config.steps; ++step) {
    auto batch = sample_synthetic(spec, config.batch_size, Rng::mix(config.seed, step));
    const PointCloud& source = batch.first;
    const PointCloud& target = batch.second;
    Matrix mapped = mlp_forward(result.state.params, source.points);

    FitLoss fit = sinkhorn_fit_loss(mapped, target.points, config.fit_epsilon,
                                    config.fit_solver);
    Matrix cotangent = fit.mapped_gradient;
    double reg_value = 0.0;

    if (use_regularizer) {
      try {
        PointCloud mapped_cloud(mapped);
        if (config.regularizer == Regularizer::Dst) {
          reg_value = config.lambda *
                      distortion(source, mapped_cloud, config.kernel_x, config.kernel_y);
          PointGradient g = distortion_gradient(source, mapped_cloud, config.kernel_x,
                                                config.kernel_y);
          cotangent += config.lambda * g.mapped_gradient;
        } else {
          GmgSolution solution = gmg_solve(source, mapped_cloud, config.kernel_x,
                                           config.kernel_y, config.gw);
          PointGradient g = gmg_gradient(solution);
          reg_value = config.lambda * solution.report.gmg;
          cotangent += config.lambda * g.mapped_gradient;
        }
      } catch (const Error& error) {
        if (error.code() != ErrorCode::NotConverged &&
            error.code() != ErrorCode::ZeroVectorInCosine)
          throw;
        ++result.skipped_steps;
        if (result.skipped_steps > max_skips)
          throw Error(ErrorCode::NotConverged,
                      "training aborted: " + std::to_string(result.skipped_steps) +
                          " skipped steps exceed the allowed fraction");
        result.state.loss_trace.push_back(
            {step, fit.value, std::numeric_limits<double>::quiet_NaN()});
        continue;
      }
    }

    MlpGradients grads = mlp_backward(result.state.params, source.points, cotangent);
    adam_step(result.state, grads.layers, config.lr);
    result.state.loss_trace.push_back({step, fit.value, reg_value});

    if (config.eval_every > 0 &&
        (step % config.eval_every == 0 || step == config.steps || step == 1))
      evaluate(step, fit.value, reg_value);
  }

  result.holdout_mapped = mlp_forward(result.state.params, result.holdout_source.points);
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return result;
}

struct StabilityReport {
  Matrix similarity;          // batches x batches pairwise cosine similarity
  double off_diagonal_mean = 0.0;
  std::vector<double> gradient_norms;
};

/// Gradient-alignment study: for a fixed (typically untrained) map, computes
/// the flattened parameter gradient of the chosen regularizer on independent
/// batches and reports all pairwise cosine similarities.
inline StabilityReport stability_analysis(const SyntheticSpec& spec,
                                          const MlpParams& params,
                                          Regularizer regularizer,
                                          const ExperimentConfig& config,
                                          const std::vector<std::uint64_t>& batch_seeds) {
  require(regularizer != Regularizer::None, ErrorCode::DimensionMismatch,
          "stability analysis needs dst or gmg");
  const int batches = static_cast<int>(batch_seeds.size());
  require(batches >= 2, ErrorCode::DimensionMismatch, "need at least two batches");

  std::vector<Vector> gradients;
  StabilityReport report;
  for (int k = 0; k < batches; ++k) {
    auto batch = sample_synthetic(spec, config.batch_size, batch_seeds[k]);
    const PointCloud& source = batch.first;
    Matrix mapped = mlp_forward(params, source.points);
    PointCloud mapped_cloud(mapped);

    PointGradient g =
        regularizer == Regularizer::Dst
            ? distortion_gradient(source, mapped_cloud, config.kernel_x, config.kernel_y)
            : gmg_gradient(source, mapped_cloud, config.kernel_x, config.kernel_y,
                           config.gw);
    Vector flat =
        flatten_gradients(mlp_backward(params, source.points, g.mapped_gradient).layers);
    double norm = flat.norm();
    require(norm >= 1e-12, ErrorCode::DegenerateGradient,
            "batch gradient norm below 1e-12");
    report.gradient_norms.push_back(norm);
    gradients.push_back(std::move(flat));
  }

  report.similarity = Matrix::Identity(batches, batches);
  double sum = 0.0;
  for (int i = 0; i < batches; ++i)
    for (int j = 0; j < batches; ++j) {
      if (i == j) continue;  // diagonal stays exactly 1
      double s = gradients[i].dot(gradients[j]) /
                 (report.gradient_norms[i] * report.gradient_norms[j]);
      report.similarity(i, j) = s;
      if (i < j) sum += s;
    }
  report.off_diagonal_mean = sum / (batches * (batches - 1) / 2.0);
  return report;
}

/// Entropic GW with a decreasing-epsilon schedule, warm-starting each stage
/// from the previous plan and potentials. Used for high-accuracy comparisons
/// against the brute-force oracle.
inline GwResult gw_solve_annealed(const GwGeometry& gx, const GwGeometry& gy,
                                  GwConfig config, const std::vector<double>& schedule) {
  require(!schedule.empty(), ErrorCode::DimensionMismatch, "empty epsilon schedule");
  GwResult result;
  GwWarmStart warm;
  bool have_warm = false;
  for (double eps0 : schedule) {
    config.epsilon0 = eps0;
    result = gw_solve_entropic(gx, gy, config, have_warm ? &warm : nullptr);
    warm = {result.plan.plan, result.plan.f, result.plan.g};
    have_warm = true;
  }
  return result;
}

struct SweepRow {
  int n = 0;
  std::string kernel;
  int trial = 0;
  double quadratic_value = 0.0;
  double brute_value = 0.0;
  double relative_gap = 0.0;
  bool converged = false;
  int outer_iterations = 0;
};

/// Random-instance comparison of the annealed entropic solver against the
/// permutation oracle, one row per (n, kernel, trial) cell.
inline std::vector<SweepRow> oracle_sweep(const std::vector<int>& sizes,
                                          const std::vector<CostFamily>& families,
                                          const std::vector<double>& schedule, int trials,
                                          std::uint64_t seed, const GwConfig& base_config,
                                          int dim = 3) {
  std::vector<SweepRow> rows;
  for (int n : sizes) {
    require(n <= kBruteForceCap, ErrorCode::TooLarge,
            "sweep size exceeds the brute-force cap");
    for (CostFamily family : families) {
      for (int trial = 0; trial < trials; ++trial) {
        Rng rng(Rng::mix(seed, (static_cast<std::uint64_t>(n) << 24) ^
                                   (static_cast<std::uint64_t>(family) << 16) ^ trial));
        CostKernel kx{family, 0.0};
        CostKernel ky{family, family == CostFamily::ScaledSquaredEuclidean
                                  ? rng.uniform(-0.7, 0.7)
                                  : 0.0};
        PointCloud x(rng.normal_matrix(n, dim));
        PointCloud y(rng.normal_matrix(n, dim));
        GwGeometry gx = make_geometry(x, kx, base_config.stat_kind);
        GwGeometry gy = make_geometry(y, ky, base_config.stat_kind);

        GwResult solved = gw_solve_annealed(gx, gy, base_config, schedule);
        BruteForceResult oracle = gw_brute_force(gx.cost, gy.cost);

        SweepRow row;
        row.n = n;
        row.kernel = cost_family_name(family);
        row.trial = trial;
        row.quadratic_value = solved.quadratic_value;
        row.brute_value = oracle.value;
        row.relative_gap =
            std::abs(solved.quadratic_value - oracle.value) / (oracle.value + 1e-9);
        row.converged = solved.converged;
        row.outer_iterations = solved.outer_iterations;
        rows.push_back(row);
      }
    }
  }
  return rows;
}

}  // namespace gmg

#endif  // GMG_HARNESS_HPP
