#include "gvf/wind.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "gvf/io.hpp"

namespace gvf {

namespace {
constexpr double kPi = 3.141592653589793238462643383280;
constexpr double kDeg = kPi / 180.0;

double reduce_lon(double lon) {
    double r = std::fmod(lon, 360.0);
    if (r < 0.0) r += 360.0;
    return r;
}
}  // namespace

void WindGrid::validate() const {
    if (lats.empty() || lons.empty()) throw ShapeError("wind grid has no cells");
    if (u.rows() != rows() || u.cols() != cols() || v.rows() != rows() || v.cols() != cols()) {
        throw ShapeError("wind grid component shape mismatch");
    }
    for (double lat : lats) {
        if (std::abs(lat) > 90.0) throw DomainError("wind grid latitude outside [-90, 90]");
    }
    for (double lon : lons) {
        if (lon < 0.0 || lon >= 360.0) throw DomainError("wind grid longitude outside [0, 360)");
    }
    if (!u.allFinite() || !v.allFinite()) throw DomainError("wind grid has non-finite components");
}

Vec latlon_to_chart(double lat_deg, double lon_deg) {
    if (std::abs(lat_deg) > 90.0) throw DomainError("latitude outside [-90, 90]");
    Vec x(2);
    x << (90.0 - lat_deg) * kDeg, reduce_lon(lon_deg) * kDeg;
    return x;
}

std::pair<double, double> chart_to_latlon(const Vec& chart) {
    return {90.0 - chart[0] / kDeg, reduce_lon(chart[1] / kDeg)};
}

Vec wind_to_frame(double u, double v) {
    Vec c(2);
    c << -v, u;
    return c;
}

std::pair<double, double> frame_to_wind(const Vec& coeffs) {
    return {coeffs[1], -coeffs[0]};
}

double synthetic_climatology_u(double lat_deg) {
    double s = std::sin(2.0 * lat_deg * kDeg);
    return 4.0 + 6.0 * s * s;
}

std::vector<std::pair<double, double>> synth_track(double start_phase_deg, int minutes,
                                                   double lon0_deg, double inclination_deg,
                                                   double period_minutes) {
    if (minutes < 1) throw DomainError("synth_track needs minutes >= 1");
    double lon0 = lon0_deg * kDeg;
    double inc = inclination_deg * kDeg;
    Eigen::Vector3d a(std::cos(lon0), std::sin(lon0), 0.0);
    Eigen::Vector3d b(-std::sin(lon0) * std::cos(inc), std::cos(lon0) * std::cos(inc),
                      std::sin(inc));
    std::vector<std::pair<double, double>> track;
    track.reserve(minutes);
    for (int t = 0; t < minutes; ++t) {
        double psi = (start_phase_deg + 360.0 * t / period_minutes) * kDeg;
        Eigen::Vector3d e = std::cos(psi) * a + std::sin(psi) * b;
        double lat = std::asin(std::clamp(e[2], -1.0, 1.0)) / kDeg;
        double lon = reduce_lon(std::atan2(e[1], e[0]) / kDeg);
        track.emplace_back(lat, lon);
    }
    return track;
}

std::vector<std::pair<double, double>> interpolate_grid(
    const WindGrid& grid, const std::vector<std::pair<double, double>>& points) {
    grid.validate();
    std::vector<std::pair<double, double>> out;
    out.reserve(points.size());
    const auto& lats = grid.lats;
    const auto& lons = grid.lons;
    const int nlon = grid.cols();
    for (auto [lat, lon] : points) {
        if (lat < lats.front() || lat > lats.back()) {
            std::ostringstream os;
            os << "latitude " << lat << " outside grid range [" << lats.front() << ", "
               << lats.back() << "]";
            throw DomainError(os.str());
        }
        lon = reduce_lon(lon);
        // latitude bracket
        auto hi_it = std::lower_bound(lats.begin(), lats.end(), lat);
        int i1 = std::min<int>(std::distance(lats.begin(), hi_it), grid.rows() - 1);
        int i0 = std::max(i1 - 1, 0);
        double wlat = (i0 == i1) ? 0.0 : (lat - lats[i0]) / (lats[i1] - lats[i0]);
        // longitude bracket with wrap-around
        auto lo_it = std::upper_bound(lons.begin(), lons.end(), lon);
        int j1 = static_cast<int>(std::distance(lons.begin(), lo_it)) % nlon;
        int j0 = (j1 + nlon - 1) % nlon;
        double span = lons[j1] - lons[j0];
        if (span <= 0.0) span += 360.0;
        double dlon = lon - lons[j0];
        if (dlon < 0.0) dlon += 360.0;
        double wlon = (span == 0.0) ? 0.0 : dlon / span;
        if (lon == lons[j0]) wlon = 0.0;
        auto blend = [&](const Mat& f) {
            return (1.0 - wlat) * ((1.0 - wlon) * f(i0, j0) + wlon * f(i0, j1)) +
                   wlat * ((1.0 - wlon) * f(i1, j0) + wlon * f(i1, j1));
        };
        out.emplace_back(blend(grid.u), blend(grid.v));
    }
    return out;
}

std::vector<std::pair<double, double>> climatology_anomaly(
    const std::vector<std::pair<double, double>>& observed,
    const std::vector<std::pair<double, double>>& climatology) {
    if (observed.size() != climatology.size()) {
        throw ShapeError("climatology_anomaly: length mismatch");
    }
    std::vector<std::pair<double, double>> out;
    out.reserve(observed.size());
    for (size_t i = 0; i < observed.size(); ++i) {
        out.emplace_back(observed[i].first - climatology[i].first,
                         observed[i].second - climatology[i].second);
    }
    return out;
}

std::pair<std::vector<double>, std::vector<double>> standard_grid_axes() {
    std::vector<double> lats(32), lons(64);
    for (int i = 0; i < 32; ++i) lats[i] = -87.1875 + 5.625 * i;
    for (int j = 0; j < 64; ++j) lons[j] = 5.625 * j;
    return {lats, lons};
}

SynthWind synth_wind_field(std::uint64_t seed, const ProjectedKernelPtr& kernel) {
    if (kernel->manifold()->kind() != ManifoldKind::Sphere) {
        throw CapabilityError("synth_wind_field requires a sphere kernel");
    }
    SynthWind out{.grid = {}, .truth = sample_prior_field(kernel, 1, seed), .seed = seed};
    auto [lats, lons] = standard_grid_axes();
    out.grid.lats = lats;
    out.grid.lons = lons;
    out.grid.u.resize(32, 64);
    out.grid.v.resize(32, 64);
    out.grid.timestamp = "synthetic";
    for (int i = 0; i < 32; ++i) {
        for (int j = 0; j < 64; ++j) {
            Vec x = latlon_to_chart(lats[i], lons[j]);
            auto [u, v] = frame_to_wind(out.truth(x));
            out.grid.u(i, j) = u + synthetic_climatology_u(lats[i]);
            out.grid.v(i, j) = v;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// grid io
// ---------------------------------------------------------------------------

WindGrid load_wind_grid(const std::string& path) {
    io::CsvTable table = io::read_csv(path);
    if (table.header != std::vector<std::string>{"lat", "lon", "u", "v"}) {
        throw FormatError(path + ": expected header lat,lon,u,v", 0);
    }
    std::map<double, std::map<double, std::pair<double, double>>> cells;
    long rownum = 0;
    for (const auto& row : table.rows) {
        ++rownum;
        double lat = io::parse_double(row[0], rownum);
        double lon = io::parse_double(row[1], rownum);
        double u = io::parse_double(row[2], rownum);
        double v = io::parse_double(row[3], rownum);
        auto [it, inserted] = cells[lat].emplace(lon, std::make_pair(u, v));
        if (!inserted) {
            std::ostringstream os;
            os << path << ": duplicate cell (" << lat << ", " << lon << ") at row " << rownum;
            throw FormatError(os.str(), rownum);
        }
    }
    WindGrid grid;
    std::map<double, int> lon_index;
    for (const auto& [lat, rowmap] : cells) {
        grid.lats.push_back(lat);
        for (const auto& [lon, uv] : rowmap) {
            if (grid.lats.size() == 1) lon_index.emplace(lon, static_cast<int>(lon_index.size()));
        }
    }
    for (const auto& [lon, idx] : lon_index) grid.lons.push_back(lon);
    grid.u.resize(grid.rows(), grid.cols());
    grid.v.resize(grid.rows(), grid.cols());
    for (int i = 0; i < grid.rows(); ++i) {
        const auto& rowmap = cells.at(grid.lats[i]);
        for (int j = 0; j < grid.cols(); ++j) {
            auto it = rowmap.find(grid.lons[j]);
            if (it == rowmap.end()) {
                std::ostringstream os;
                os << path << ": missing cell (" << grid.lats[i] << ", " << grid.lons[j] << ")";
                throw FormatError(os.str());
            }
            grid.u(i, j) = it->second.first;
            grid.v(i, j) = it->second.second;
        }
        if (static_cast<int>(rowmap.size()) != grid.cols()) {
            std::ostringstream os;
            os << path << ": latitude " << grid.lats[i] << " has " << rowmap.size()
               << " cells, expected " << grid.cols();
            throw FormatError(os.str());
        }
    }
    grid.validate();
    return grid;
}

void write_wind_grid(const std::string& path, const WindGrid& grid) {
    grid.validate();
    io::CsvWriter csv(path);
    csv.header({"lat", "lon", "u", "v"});
    for (int i = 0; i < grid.rows(); ++i) {
        for (int j = 0; j < grid.cols(); ++j) {
            csv.row({grid.lats[i], grid.lons[j], grid.u(i, j), grid.v(i, j)});
        }
    }
}

// ---------------------------------------------------------------------------
// model fits
// ---------------------------------------------------------------------------

namespace {

VectorObservationSet track_to_observations(const std::vector<TrackObservation>& track,
                                           double noise_std, bool manifold_chart) {
    if (track.empty()) throw ShapeError("no track observations");
    VectorObservationSet obs;
    obs.noise_variance = noise_std * noise_std;
    for (const auto& t : track) {
        if (manifold_chart) {
            obs.points.push_back(latlon_to_chart(t.lat, t.lon));
            obs.values.push_back(wind_to_frame(t.u, t.v));
        } else {
            Vec x(2);
            x << t.lat, reduce_lon(t.lon);
            obs.points.push_back(x);
            Vec y(2);
            y << t.u, t.v;
            obs.values.push_back(y);
        }
    }
    return obs;
}

double resolve_variance(double amplitude, bool amplitude_is_std) {
    if (!(amplitude > 0.0)) throw DomainError("wind amplitude must be positive");
    return amplitude_is_std ? amplitude * amplitude : amplitude;
}

/// Coarse-to-fine log-scale search of the exact log marginal likelihood.
double best_lengthscale(const VectorObservationSet& obs,
                        const std::function<ProjectedKernelPtr(double)>& make_kernel,
                        double lo, double hi) {
    double best_l = std::sqrt(lo * hi), best_val = -std::numeric_limits<double>::infinity();
    for (int round = 0; round < 3; ++round) {
        for (int i = 0; i < 9; ++i) {
            double l = lo * std::pow(hi / lo, i / 8.0);
            double val;
            try {
                val = ExactPosterior(make_kernel(l), obs).log_marginal();
            } catch (const ConditioningError&) {
                continue;
            }
            if (val > best_val) {
                best_val = val;
                best_l = l;
            }
        }
        double shrink = std::pow(hi / lo, 0.2);
        lo = best_l / shrink;
        hi = best_l * shrink;
    }
    return best_l;
}

std::vector<Vec> full_grid_points(bool manifold_chart) {
    auto [lats, lons] = standard_grid_axes();
    std::vector<Vec> pts;
    pts.reserve(lats.size() * lons.size());
    for (double lat : lats) {
        for (double lon : lons) {
            if (manifold_chart) {
                pts.push_back(latlon_to_chart(lat, lon));
            } else {
                Vec x(2);
                x << lat, lon;
                pts.push_back(x);
            }
        }
    }
    return pts;
}

GriddedPrediction assemble_grid(const std::vector<Vec>& means, const std::vector<Mat>& covs,
                                bool manifold_chart) {
    auto [lats, lons] = standard_grid_axes();
    GriddedPrediction pred;
    pred.mean.lats = lats;
    pred.mean.lons = lons;
    pred.mean.timestamp = manifold_chart ? "manifold-fit" : "baseline-fit";
    const int nr = 32, nc = 64;
    pred.mean.u.resize(nr, nc);
    pred.mean.v.resize(nr, nc);
    pred.cov_uu.resize(nr, nc);
    pred.cov_uv.resize(nr, nc);
    pred.cov_vv.resize(nr, nc);
    pred.std_norm.resize(nr, nc);
    for (int i = 0; i < nr; ++i) {
        for (int j = 0; j < nc; ++j) {
            size_t idx = static_cast<size_t>(i) * nc + j;
            double cuu, cuv, cvv, u, v;
            if (manifold_chart) {
                auto [uu, vv] = frame_to_wind(means[idx]);
                u = uu;
                v = vv;
                // (u, v) = T (f1, f2) with T = [[0, 1], [-1, 0]]
                cuu = covs[idx](1, 1);
                cvv = covs[idx](0, 0);
                cuv = -covs[idx](1, 0);
            } else {
                u = means[idx][0];
                v = means[idx][1];
                cuu = covs[idx](0, 0);
                cuv = covs[idx](0, 1);
                cvv = covs[idx](1, 1);
            }
            pred.mean.u(i, j) = u;
            pred.mean.v(i, j) = v;
            pred.cov_uu(i, j) = cuu;
            pred.cov_uv(i, j) = cuv;
            pred.cov_vv(i, j) = cvv;
            pred.std_norm(i, j) = std::sqrt(std::max(cuu + cvv, 0.0));
        }
    }
    return pred;
}

GriddedPrediction predict_on_grid(const ExactPosterior& posterior, bool manifold_chart) {
    auto pts = full_grid_points(manifold_chart);
    auto [means, covs] = posterior.predict(pts);
    return assemble_grid(means, covs, manifold_chart);
}

}  // namespace

WindFit fit_wind_manifold(const std::vector<TrackObservation>& track,
                          const WindModelConfig& config) {
    VectorObservationSet obs = track_to_observations(track, config.noise_std, true);
    double var = resolve_variance(config.amplitude, config.amplitude_is_std);
    ManifoldPtr s2 = sphere();
    auto make = [&](double l) {
        return projected_kernel(s2, matern_kernel(s2, 1.5, l, var, config.truncation));
    };
    WindFit fit;
    fit.lengthscale = config.lengthscale;
    if (config.learn_lengthscale) {
        fit.lengthscale = best_lengthscale(obs, make, 0.05, 2.0);
    }
    fit.kernel = make(fit.lengthscale);
    fit.posterior = std::make_shared<ExactPosterior>(fit.kernel, obs);
    fit.grid = predict_on_grid(*fit.posterior, true);
    return fit;
}

WindFit fit_wind_euclidean_baseline(const std::vector<TrackObservation>& track,
                                    const WindBaselineConfig& config) {
    VectorObservationSet obs = track_to_observations(track, config.noise_std, false);
    double var = resolve_variance(config.amplitude, config.amplitude_is_std);
    ManifoldPtr plane = euclidean(2);
    auto make = [&](double l) {
        return projected_kernel(plane, matern_kernel(plane, 1.5, l, var));
    };
    WindFit fit;
    fit.lengthscale = config.lengthscale_deg;
    if (config.learn_lengthscale) {
        fit.lengthscale = best_lengthscale(obs, make, 2.0, 90.0);
    }
    fit.kernel = make(fit.lengthscale);
    fit.posterior = std::make_shared<ExactPosterior>(fit.kernel, obs);
    fit.grid = predict_on_grid(*fit.posterior, false);
    return fit;
}

SVGPState fit_wind_svgp(const std::vector<TrackObservation>& track,
                        const WindModelConfig& config, int inducing, int steps,
                        std::uint64_t seed) {
    VectorObservationSet obs = track_to_observations(track, config.noise_std, true);
    double var = resolve_variance(config.amplitude, config.amplitude_is_std);
    ManifoldPtr s2 = sphere();
    auto kernel = projected_kernel(
        s2, matern_kernel(s2, 1.5, config.lengthscale, var, config.truncation));
    SVGPFitOptions opts;
    opts.steps = steps;
    opts.optimize_lengthscales = config.learn_lengthscale;
    return svgp_fit(*kernel, obs, inducing, opts, seed);
}

GriddedPrediction svgp_grid_prediction(const SVGPState& state,
                                       const ProjectedMatrixKernel& kernel) {
    auto pts = full_grid_points(true);
    auto pred = svgp_predict(state, kernel, pts);
    return assemble_grid(pred.means, pred.covs, true);
}

ProjectedKernelPtr wind_kernel_from_state(const SVGPState& state) {
    if (state.manifold_name != "sphere" || state.nus.size() != 1 ||
        state.lengthscales.size() != 1) {
        throw CapabilityError("state does not describe a sphere wind model");
    }
    ManifoldPtr s2 = sphere();
    return projected_kernel(
        s2, matern_kernel(s2, state.nus[0], state.lengthscales[0], state.variance, -1));
}

double std_norm_at(const WindFit& fit, double lat_deg, double lon_deg, bool manifold_chart) {
    Vec x;
    if (manifold_chart) {
        x = latlon_to_chart(lat_deg, lon_deg);
    } else {
        x.resize(2);
        x << lat_deg, reduce_lon(lon_deg);
    }
    Mat c = fit.posterior->cov(x, x);
    return std::sqrt(std::max(c.trace(), 0.0));
}

// ---------------------------------------------------------------------------
// experiment driver
// ---------------------------------------------------------------------------

WindExperimentResult run_wind_experiment(const WindExperimentConfig& config) {
    double var = resolve_variance(config.manifold.amplitude, config.manifold.amplitude_is_std);
    ManifoldPtr s2 = sphere();
    ProjectedKernelPtr truth_kernel = projected_kernel(
        s2, matern_kernel(s2, 1.5, config.manifold.lengthscale, var, config.manifold.truncation));
    WindExperimentResult result{.synth = synth_wind_field(config.seed, truth_kernel)};

    auto track = synth_track(config.track_start_phase_deg, config.track_minutes);
    Rng noise_rng = Rng(config.seed).split("track-noise");
    for (size_t t = 0; t < track.size(); ++t) {
        auto [lat, lon] = track[t];
        Vec coeffs = result.synth.truth(latlon_to_chart(lat, lon));
        auto [u, v] = frame_to_wind(coeffs);
        TrackObservation obs;
        obs.time_minutes = static_cast<double>(t);
        obs.lat = lat;
        obs.lon = lon;
        obs.noise_std = config.manifold.noise_std;
        obs.u = u + obs.noise_std * noise_rng.normal();
        obs.v = v + obs.noise_std * noise_rng.normal();
        result.observations.push_back(obs);
    }

    result.manifold = fit_wind_manifold(result.observations, config.manifold);
    result.baseline = fit_wind_euclidean_baseline(result.observations, config.baseline);

    // grid-wide RMSE against the synthetic anomaly truth
    auto [lats, lons] = standard_grid_axes();
    double se_m = 0.0, se_b = 0.0;
    for (int i = 0; i < 32; ++i) {
        for (int j = 0; j < 64; ++j) {
            Vec x = latlon_to_chart(lats[i], lons[j]);
            auto [tu, tv] = frame_to_wind(result.synth.truth(x));
            double du = result.manifold.grid.mean.u(i, j) - tu;
            double dv = result.manifold.grid.mean.v(i, j) - tv;
            se_m += du * du + dv * dv;
            du = result.baseline.grid.mean.u(i, j) - tu;
            dv = result.baseline.grid.mean.v(i, j) - tv;
            se_b += du * du + dv * dv;
        }
    }
    result.manifold_rmse = std::sqrt(se_m / (32.0 * 64.0 * 2.0));
    result.baseline_rmse = std::sqrt(se_b / (32.0 * 64.0 * 2.0));

    // seam metric: averaged |std(0+) - std(360-)| over grid latitudes
    const double delta = 0.01;
    double seam_m = 0.0, seam_b = 0.0;
    for (double lat : lats) {
        seam_m += std::abs(std_norm_at(result.manifold, lat, delta, true) -
                           std_norm_at(result.manifold, lat, 360.0 - delta, true));
        seam_b += std::abs(std_norm_at(result.baseline, lat, delta, false) -
                           std_norm_at(result.baseline, lat, 360.0 - delta, false));
    }
    result.manifold_seam_metric = seam_m / lats.size();
    result.baseline_seam_metric = seam_b / lats.size();

    // along-track uncertainty profile
    std::vector<double> m_std, b_std;
    double m_pole = 0.0, m_mid = 0.0, b_pole = 0.0, b_mid = 0.0;
    int n_pole = 0, n_mid = 0;
    for (auto [lat, lon] : track) {
        double sm = std_norm_at(result.manifold, lat, lon, true);
        double sb = std_norm_at(result.baseline, lat, lon, false);
        m_std.push_back(sm);
        b_std.push_back(sb);
        if (std::abs(lat) > 80.0) {
            m_pole += sm;
            b_pole += sb;
            ++n_pole;
        } else if (std::abs(lat) <= 60.0) {
            m_mid += sm;
            b_mid += sb;
            ++n_mid;
        }
    }
    double mean = 0.0, var_cov = 0.0;
    for (double s : m_std) mean += s;
    mean /= m_std.size();
    for (double s : m_std) var_cov += (s - mean) * (s - mean);
    var_cov /= m_std.size();
    result.manifold_track_cov = std::sqrt(var_cov) / mean;
    if (n_pole > 0 && n_mid > 0) {
        result.manifold_pole_ratio = (m_pole / n_pole) / (m_mid / n_mid);
        result.baseline_pole_ratio = (b_pole / n_pole) / (b_mid / n_mid);
    }

    if (config.add_climatology_back) {
        for (int i = 0; i < 32; ++i) {
            double clim = synthetic_climatology_u(lats[i]);
            for (int j = 0; j < 64; ++j) {
                result.manifold.grid.mean.u(i, j) += clim;
                result.baseline.grid.mean.u(i, j) += clim;
            }
        }
    }
    return result;
}

void write_predictions_csv(const std::string& path, const GriddedPrediction& pred) {
    io::CsvWriter csv(path);
    csv.header({"lat", "lon", "mean_u", "mean_v", "cov_uu", "cov_uv", "cov_vv", "std_norm"});
    for (int i = 0; i < pred.mean.rows(); ++i) {
        for (int j = 0; j < pred.mean.cols(); ++j) {
            csv.row({pred.mean.lats[i], pred.mean.lons[j], pred.mean.u(i, j), pred.mean.v(i, j),
                     pred.cov_uu(i, j), pred.cov_uv(i, j), pred.cov_vv(i, j),
                     pred.std_norm(i, j)});
        }
    }
}

}  // namespace gvf
