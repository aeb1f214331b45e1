#include "gvf/dynamics.hpp"

#include <cmath>
#include <fstream>

#include "gvf/io.hpp"

namespace gvf {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kPi = 3.141592653589793238462643383280;

double reduce_angle(double q) {
    double r = std::fmod(q, kTwoPi);
    if (r < 0.0) r += kTwoPi;
    return r;
}
}  // namespace

void PendulumParams::validate() const {
    if (!(mass > 0.0 && length > 0.0 && gravity > 0.0 && step > 0.0)) {
        throw DomainError("pendulum: mass, length, gravity and step must be positive");
    }
    if (friction < 0.0) throw DomainError("pendulum: friction must be nonnegative");
}

Eigen::Vector2d pendulum_field(const PendulumParams& params, double q, double p) {
    if (!std::isfinite(q) || !std::isfinite(p)) throw DomainError("pendulum_field: non-finite state");
    double dq = p / (params.mass * params.length * params.length);
    double dp = -params.mass * params.gravity * params.length * std::sin(q) -
                (params.friction / params.mass) * p;
    return {dq, dp};
}

double pendulum_energy(const PendulumParams& params, double q, double p) {
    double ml2 = params.mass * params.length * params.length;
    return p * p / (2.0 * ml2) + params.mass * params.gravity * params.length * (1.0 - std::cos(q));
}

Trajectory integrate_field(const PlanarField& field, double q0, double p0, int steps, double h) {
    if (steps < 1) throw DomainError("integrate_field: steps must be >= 1");
    if (!(h > 0.0)) throw DomainError("integrate_field: step size must be positive");
    Trajectory traj;
    traj.times.reserve(steps + 1);
    traj.q.reserve(steps + 1);
    traj.p.reserve(steps + 1);
    double q = reduce_angle(q0), p = p0;
    traj.times.push_back(0.0);
    traj.q.push_back(q);
    traj.p.push_back(p);
    for (int i = 0; i < steps; ++i) {
        double p_half = p + 0.5 * h * field(q, p)[1];
        double q_new = q + h * field(q, p_half)[0];
        double p_new = p_half + 0.5 * h * field(q_new, p_half)[1];
        if (!std::isfinite(q_new) || !std::isfinite(p_new)) {
            throw DivergenceError("trajectory diverged", i);
        }
        q = reduce_angle(q_new);
        p = p_new;
        traj.times.push_back((i + 1) * h);
        traj.q.push_back(q);
        traj.p.push_back(p);
    }
    return traj;
}

Trajectory leapfrog_rollout(const PendulumParams& params, double q0, double p0, int steps) {
    params.validate();
    PendulumParams local = params;
    return integrate_field(
        [local](double q, double p) { return pendulum_field(local, q, p); }, q0, p0, steps,
        params.step);
}

double wrap_angle(double t) {
    double r = std::remainder(t, kTwoPi);
    if (r <= -kPi) r += kTwoPi;
    return r;
}

std::vector<double> estimate_momenta(std::span<const double> positions,
                                     const PendulumParams& params) {
    if (positions.size() < 2) throw ShapeError("estimate_momenta needs >= 2 positions");
    params.validate();
    double ml2 = params.mass * params.length * params.length;
    std::vector<double> momenta;
    momenta.reserve(positions.size() - 1);
    for (size_t i = 0; i + 1 < positions.size(); ++i) {
        momenta.push_back(ml2 * wrap_angle(positions[i + 1] - positions[i]) / params.step);
    }
    return momenta;
}

VectorObservationSet dynamics_observations(const Trajectory& traj, double noise_variance) {
    if (traj.size() < 2) throw ShapeError("dynamics_observations needs a trajectory of >= 2 states");
    double h = traj.times[1] - traj.times[0];
    VectorObservationSet obs;
    obs.noise_variance = noise_variance;
    for (int i = 0; i + 1 < traj.size(); ++i) {
        Vec x(2);
        x << traj.q[i], traj.p[i];
        Vec value(2);
        value << wrap_angle(traj.q[i + 1] - traj.q[i]) / h, (traj.p[i + 1] - traj.p[i]) / h;
        obs.points.push_back(x);
        obs.values.push_back(value);
    }
    return obs;
}

Trajectory gp_rollout(const FieldSample& field, double q0, double p0, int steps, double h) {
    if (field.kernel()->dim() != 2) {
        throw ShapeError("gp_rollout expects a field on a 2-dimensional manifold");
    }
    FieldSample local = field;
    return integrate_field(
        [local](double q, double p) {
            Vec x(2);
            x << q, p;
            Vec v = local(x);
            return Eigen::Vector2d(v[0], v[1]);
        },
        q0, p0, steps, h);
}

// ---------------------------------------------------------------------------
// experiment driver
// ---------------------------------------------------------------------------

PendulumExperimentResult run_pendulum_experiment(const PendulumExperimentConfig& config) {
    config.params.validate();
    if (config.steps < 2) throw DomainError("pendulum experiment needs >= 2 steps");

    PendulumExperimentResult result;

    // ground truth rollouts, backward-Euler momenta, field observations
    double noise_var = config.observation_noise_std * config.observation_noise_std;
    VectorObservationSet pooled;
    pooled.noise_variance = noise_var;
    for (auto [q0, p0] : config.starts) {
        Trajectory truth = leapfrog_rollout(config.params, q0, p0, config.steps);
        result.training.push_back(truth);

        std::vector<double> est_p = estimate_momenta(truth.q, config.params);
        Trajectory est;
        est.times.assign(truth.times.begin(), truth.times.end() - 1);
        est.q.assign(truth.q.begin(), truth.q.end() - 1);
        est.p = est_p;
        VectorObservationSet obs = dynamics_observations(est, noise_var);
        pooled.points.insert(pooled.points.end(), obs.points.begin(), obs.points.end());
        pooled.values.insert(pooled.values.end(), obs.values.begin(), obs.values.end());
    }
    result.observations = pooled;

    // manifold model on the cylinder
    ManifoldPtr cyl = cylinder();
    auto* pm = static_cast<const ProductManifold*>(cyl.get());
    ScalarKernelPtr k_circle = se_kernel(pm->first(), config.lengthscale_circle,
                                         config.amplitude, config.truncation);
    ScalarKernelPtr k_mom = se_kernel(pm->second(), config.lengthscale_momentum, 1.0);
    result.manifold_kernel = projected_kernel(cyl, product_kernel(cyl, k_circle, k_mom));
    result.manifold_posterior =
        std::make_shared<ExactPosterior>(result.manifold_kernel, pooled);

    // Euclidean baseline on raw (q, p) in [0, 2pi) x R
    ManifoldPtr plane = product(euclidean(1), euclidean(1));
    ScalarKernelPtr b_q = se_kernel(euclidean(1), config.lengthscale_circle, config.amplitude);
    ScalarKernelPtr b_p = se_kernel(euclidean(1), config.lengthscale_momentum, 1.0);
    result.baseline_kernel = projected_kernel(plane, product_kernel(plane, b_q, b_p));
    result.baseline_posterior =
        std::make_shared<ExactPosterior>(result.baseline_kernel, pooled);

    // seam continuity of the learned mean fields
    double eps = config.seam_epsilon;
    for (double p : config.probe_momenta) {
        Vec lo(2), hi(2);
        lo << eps, p;
        hi << kTwoPi - eps, p;
        double mg = (result.manifold_posterior->mean(lo) - result.manifold_posterior->mean(hi))
                        .norm();
        double bg = (result.baseline_posterior->mean(lo) - result.baseline_posterior->mean(hi))
                        .norm();
        result.seam.manifold_gap = std::max(result.seam.manifold_gap, mg);
        result.seam.baseline_gap = std::max(result.seam.baseline_gap, bg);
    }

    // optional pathwise rollouts of the learned manifold dynamics
    for (int r = 0; r < config.rollout_count; ++r) {
        for (size_t s = 0; s < config.starts.size(); ++s) {
            std::uint64_t seed =
                Rng(config.seed).split("rollout").split(r * config.starts.size() + s).next_u64();
            FieldSample prior =
                sample_prior_field(result.manifold_kernel, config.feature_budget, seed);
            FieldSample posterior_sample =
                pathwise_posterior_sample(prior, *result.manifold_posterior, seed);
            result.gp_rollouts.push_back(gp_rollout(posterior_sample, config.starts[s].first,
                                                    config.starts[s].second,
                                                    config.rollout_steps, config.params.step));
        }
    }
    return result;
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj,
                          const std::vector<Eigen::Vector2d>* derivs) {
    if (derivs && static_cast<int>(derivs->size()) != traj.size()) {
        throw ShapeError("trajectory derivative column length mismatch");
    }
    io::CsvWriter csv(path);
    csv.header(derivs ? std::vector<std::string>{"t", "q", "p", "dq", "dp"}
                      : std::vector<std::string>{"t", "q", "p"});
    for (int i = 0; i < traj.size(); ++i) {
        std::vector<double> row{traj.times[i], traj.q[i], traj.p[i]};
        if (derivs) {
            row.push_back((*derivs)[i][0]);
            row.push_back((*derivs)[i][1]);
        }
        csv.row(row);
    }
}

}  // namespace gvf
