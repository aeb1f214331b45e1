#pragma once

#include <cstdint>
#include <utility>

#include "gvf/inference.hpp"

namespace gvf {

struct PendulumParams {
    double mass = 1.0;      // kg
    double length = 1.0;    // m
    double gravity = 3.0;   // m/s^2
    double friction = 0.3;  // kg/s
    double step = 0.01;     // s

    void validate() const;
};

/// Uniform-step trajectory on the cylinder; q stored reduced mod 2pi.
struct Trajectory {
    std::vector<double> times;
    std::vector<double> q;
    std::vector<double> p;

    int size() const { return static_cast<int>(times.size()); }
};

/// dq/dt = p/(m l^2), dp/dt = -m g l sin q - (b/m) p.
Eigen::Vector2d pendulum_field(const PendulumParams& params, double q, double p);

using PlanarField = std::function<Eigen::Vector2d(double, double)>;

/// Kick-drift-kick integration of a planar field on S^1 x R. The momentum
/// derivative is evaluated at the held momentum inside each kick. `steps`
/// updates produce steps + 1 states.
Trajectory integrate_field(const PlanarField& field, double q0, double p0, int steps, double h);

Trajectory leapfrog_rollout(const PendulumParams& params, double q0, double p0, int steps);

/// Total energy H = p^2 / (2 m l^2) + m g l (1 - cos q).
double pendulum_energy(const PendulumParams& params, double q, double p);

/// Backward-Euler momenta from positions: p_i = m l^2 (q_{i+1} - q_i) / h with
/// angle differences unwrapped into (-pi, pi]. Returns positions.size() - 1 values.
std::vector<double> estimate_momenta(std::span<const double> positions,
                                     const PendulumParams& params);

/// Nearest-representative angle difference in (-pi, pi].
double wrap_angle(double t);

/// Finite-difference field observations along a trajectory, in the cylinder
/// frame: one observation per consecutive state pair.
VectorObservationSet dynamics_observations(const Trajectory& traj, double noise_variance);

/// Integrate a sampled GP field with the same kick-drift-kick scheme.
Trajectory gp_rollout(const FieldSample& field, double q0, double p0, int steps, double h);

// ---------------------------------------------------------------------------
// experiment driver
// ---------------------------------------------------------------------------

struct PendulumExperimentConfig {
    PendulumParams params;
    std::vector<std::pair<double, double>> starts = {{2.0, 0.0}, {-1.0, 1.0}};
    int steps = 400;

    double lengthscale_circle = 0.3;
    double lengthscale_momentum = 1.2;
    double amplitude = 1.0;
    double observation_noise_std = 0.5;
    int truncation = 101;
    int feature_budget = 512;

    double seam_epsilon = 1e-3;
    std::vector<double> probe_momenta = {-1.2, -0.6, 0.6, 1.2};

    std::uint64_t seed = 0;
    int rollout_count = 0;  // pathwise GP rollouts per start
    int rollout_steps = 400;
};

struct SeamReport {
    double manifold_gap = 0.0;  // max over probe momenta
    double baseline_gap = 0.0;
};

struct PendulumExperimentResult {
    std::vector<Trajectory> training;
    VectorObservationSet observations;  // manifold-frame observations, pooled
    ProjectedKernelPtr manifold_kernel;
    ProjectedKernelPtr baseline_kernel;
    std::shared_ptr<ExactPosterior> manifold_posterior;
    std::shared_ptr<ExactPosterior> baseline_posterior;
    SeamReport seam;
    std::vector<Trajectory> gp_rollouts;  // rollout_count per start, pathwise
};

PendulumExperimentResult run_pendulum_experiment(const PendulumExperimentConfig& config);

/// t,q,p[,dq,dp] rows; derivs length must match the trajectory when present.
void write_trajectory_csv(const std::string& path, const Trajectory& traj,
                          const std::vector<Eigen::Vector2d>* derivs = nullptr);

}  // namespace gvf
