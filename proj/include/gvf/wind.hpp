#pragma once

#include <cstdint>
#include <optional>

#include "gvf/inference.hpp"

namespace gvf {

/// Rectangular lat/lon wind grid, degrees; lon periodic in [0, 360).
struct WindGrid {
    std::vector<double> lats;  // ascending
    std::vector<double> lons;  // ascending
    Mat u, v;                  // lats x lons, m/s
    std::string timestamp;

    int rows() const { return static_cast<int>(lats.size()); }
    int cols() const { return static_cast<int>(lons.size()); }
    void validate() const;
};

WindGrid load_wind_grid(const std::string& path);
void write_wind_grid(const std::string& path, const WindGrid& grid);

/// One anomaly observation along a satellite track.
struct TrackObservation {
    double time_minutes = 0.0;
    double lat = 0.0;
    double lon = 0.0;
    double u = 0.0;  // anomaly, m/s
    double v = 0.0;
    double noise_std = 1.7;
};

// ---- chart and component conventions --------------------------------------
// Sphere chart: (phi, theta) = (colatitude, longitude) in radians. The frame
// is (phi-hat, theta-hat); phi-hat points south, theta-hat east, so wind
// (u east, v north) has frame coefficients (-v, u).

Vec latlon_to_chart(double lat_deg, double lon_deg);
std::pair<double, double> chart_to_latlon(const Vec& chart);
Vec wind_to_frame(double u, double v);
std::pair<double, double> frame_to_wind(const Vec& coeffs);

/// Smooth fixed zonal climatology used in synthetic mode (u eastward, v = 0).
double synthetic_climatology_u(double lat_deg);

/// Great-circle polar-orbit track sampled once per minute.
/// start_phase_deg is the orbital phase of the first sample; equator-crossing
/// longitude and inclination default to the shipped experiment values.
std::vector<std::pair<double, double>> synth_track(double start_phase_deg, int minutes,
                                                   double lon0_deg = 10.0,
                                                   double inclination_deg = 96.7,
                                                   double period_minutes = 96.0);

/// Bilinear interpolation in (lat, lon) with longitudinal wrap-around.
std::vector<std::pair<double, double>> interpolate_grid(
    const WindGrid& grid, const std::vector<std::pair<double, double>>& points);

/// Componentwise observed - climatology.
std::vector<std::pair<double, double>> climatology_anomaly(
    const std::vector<std::pair<double, double>>& observed,
    const std::vector<std::pair<double, double>>& climatology);

// ---- synthetic truth -------------------------------------------------------

struct SynthWind {
    WindGrid grid;      // truth = prior sample + climatology, on the 5.625 grid
    FieldSample truth;  // the anomaly sample (frame coefficients)
    std::uint64_t seed = 0;
};

/// One prior draw from a sphere projected kernel on the 5.625 degree grid.
SynthWind synth_wind_field(std::uint64_t seed, const ProjectedKernelPtr& kernel);

/// The 32 x 64 cell-centered 5.625 degree grid.
std::pair<std::vector<double>, std::vector<double>> standard_grid_axes();

// ---- models ----------------------------------------------------------------

struct WindModelConfig {
    double amplitude = 11.5;  // prior variance; set amplitude_is_std to read as std
    bool amplitude_is_std = false;
    double noise_std = 1.7;   // m/s
    double lengthscale = 0.4; // radians on the sphere
    bool learn_lengthscale = false;
    int truncation = 961;
};

struct WindBaselineConfig {
    double amplitude = 2.2;
    bool amplitude_is_std = false;
    double noise_std = 1.7;
    double lengthscale_deg = 22.918311805232932;  // 0.4 rad in degrees
    bool learn_lengthscale = false;
};

/// Gridded predictions plus pointwise covariance blocks in (u, v) coordinates.
struct GriddedPrediction {
    WindGrid mean;                    // anomalies unless climatology added back
    Mat cov_uu, cov_uv, cov_vv;       // per cell
    Mat std_norm;                     // sqrt(cov_uu + cov_vv)
};

struct WindFit {
    ProjectedKernelPtr kernel;
    std::shared_ptr<ExactPosterior> posterior;
    GriddedPrediction grid;
    double lengthscale = 0.0;  // after optional marginal-likelihood fit
};

/// Projected Matern-3/2 GP on the sphere over track anomalies.
WindFit fit_wind_manifold(const std::vector<TrackObservation>& track,
                          const WindModelConfig& config);

/// Independent 2-output Matern-3/2 GP on the raw lat/lon plane; no wrap.
WindFit fit_wind_euclidean_baseline(const std::vector<TrackObservation>& track,
                                    const WindBaselineConfig& config);

/// Posterior std-norm of a fit at one (lat, lon).
double std_norm_at(const WindFit& fit, double lat_deg, double lon_deg, bool manifold_chart);

/// Sparse manifold fit over track anomalies; the returned state serializes to
/// JSON for later reload.
SVGPState fit_wind_svgp(const std::vector<TrackObservation>& track,
                        const WindModelConfig& config, int inducing, int steps,
                        std::uint64_t seed);

/// Grid predictions from a (possibly reloaded) sparse state.
GriddedPrediction svgp_grid_prediction(const SVGPState& state,
                                       const ProjectedMatrixKernel& kernel);

/// Rebuild the sphere kernel recorded in a serialized state.
ProjectedKernelPtr wind_kernel_from_state(const SVGPState& state);

// ---- experiment driver -----------------------------------------------------

struct WindExperimentConfig {
    WindModelConfig manifold;
    WindBaselineConfig baseline;
    double track_start_phase_deg = 60.0;
    int track_minutes = 60;
    std::uint64_t seed = 0;
    bool add_climatology_back = true;
};

struct WindExperimentResult {
    SynthWind synth;
    std::vector<TrackObservation> observations = {};
    WindFit manifold = {};
    WindFit baseline = {};

    double manifold_rmse = 0.0;  // grid-wide, against the synthetic truth
    double baseline_rmse = 0.0;
    double manifold_seam_metric = 0.0;  // |std(0+) - std(360-)| averaged over lats
    double baseline_seam_metric = 0.0;
    double manifold_track_cov = 0.0;  // coefficient of variation of track std-norm
    double manifold_pole_ratio = 0.0;  // mean track std |lat|>80 over |lat|<=60
    double baseline_pole_ratio = 0.0;
};

WindExperimentResult run_wind_experiment(const WindExperimentConfig& config);

/// lat,lon,mean_u,mean_v,cov_uu,cov_uv,cov_vv,std_norm rows.
void write_predictions_csv(const std::string& path, const GriddedPrediction& pred);

}  // namespace gvf
