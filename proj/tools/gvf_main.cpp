// gvf: Gaussian vector fields on embedded manifolds.
// Subcommands: sample-prior, pendulum, wind, check.
// Exit codes: 0 success, 1 validation, 2 numeric failure, 3 io.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "gvf/dynamics.hpp"
#include "gvf/io.hpp"
#include "gvf/wind.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gvf;

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// ---------------------------------------------------------------------------
// flat key=value config files; command-line flags win over file values
// ---------------------------------------------------------------------------

std::map<std::string, std::string> load_config(const std::string& path) {
    std::map<std::string, std::string> out;
    if (path.empty()) return out;
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);
    std::string line;
    long rownum = 0;
    auto trim = [](std::string s) {
        size_t a = s.find_first_not_of(" \t\r");
        size_t b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    while (std::getline(in, line)) {
        ++rownum;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw FormatError("config line " + std::to_string(rownum) + " is not key=value",
                              rownum);
        }
        out[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
    }
    return out;
}

class ConfigLayer {
public:
    ConfigLayer(CLI::App* cmd, std::map<std::string, std::string> file)
        : cmd_(cmd), file_(std::move(file)) {}

    template <typename T>
    void fill(const std::string& flag, const std::string& key, T& value) const {
        if (cmd_->count("--" + flag) > 0) return;  // flags win
        auto it = file_.find(key);
        if (it == file_.end()) return;
        std::istringstream is(it->second);
        T parsed;
        if constexpr (std::is_same_v<T, bool>) {
            std::string s = it->second;
            parsed = (s == "1" || s == "true" || s == "yes" || s == "on");
        } else {
            if (!(is >> parsed)) {
                throw FormatError("config value for '" + key + "' is not parseable");
            }
        }
        value = parsed;
    }

private:
    CLI::App* cmd_;
    std::map<std::string, std::string> file_;
};

void ensure_dir(const std::string& out) {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw IoError("cannot create output directory: " + out);
}

void write_manifest(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

double parse_nu(const std::string& kernel) {
    if (kernel == "se") return kNuSquaredExponential;
    if (kernel == "matern12") return 0.5;
    if (kernel == "matern32") return 1.5;
    if (kernel == "matern52") return 2.5;
    throw DomainError("unknown kernel family: " + kernel +
                      " (expected se|matern12|matern32|matern52)");
}

std::vector<double> parse_lengthscales(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stod(item));
    }
    if (out.empty()) throw DomainError("empty lengthscale list");
    for (double l : out) {
        if (!(l > 0.0)) throw DomainError("lengthscales must be positive");
    }
    return out;
}

// kernel for a named manifold; product manifolds get per-factor lengthscales
ScalarKernelPtr build_scalar_kernel(const ManifoldPtr& m, double nu,
                                    std::vector<double> lengths, double variance,
                                    int truncation) {
    if (m->kind() == ManifoldKind::Product && !m->compact()) {
        auto* pm = static_cast<const ProductManifold*>(m.get());
        if (lengths.size() == 1) lengths.push_back(lengths[0]);
        if (lengths.size() != 2) {
            throw DomainError("product manifolds take one or two lengthscales");
        }
        auto a = build_scalar_kernel(pm->first(), nu, {lengths[0]}, variance, truncation);
        auto b = build_scalar_kernel(pm->second(), nu, {lengths[1]}, 1.0, truncation);
        return product_kernel(m, a, b);
    }
    if (lengths.size() != 1) {
        throw DomainError(m->name() + " takes exactly one lengthscale");
    }
    return matern_kernel(m, nu, lengths[0], variance, truncation);
}

// ---------------------------------------------------------------------------
// sample-prior
// ---------------------------------------------------------------------------

std::vector<Vec> chart_grid(const ManifoldPtr& m) {
    std::vector<Vec> pts;
    auto linspace = [](double lo, double hi, int n, bool open) {
        std::vector<double> v(n);
        for (int i = 0; i < n; ++i) v[i] = lo + (hi - lo) * i / (open ? n : n - 1);
        return v;
    };
    if (m->kind() == ManifoldKind::Circle) {
        for (double t : linspace(0.0, kTwoPi, 256, true)) {
            Vec x(1);
            x << t;
            pts.push_back(x);
        }
        return pts;
    }
    if (m->kind() == ManifoldKind::Sphere) {
        auto [lats, lons] = standard_grid_axes();
        for (double lat : lats) {
            for (double lon : lons) pts.push_back(latlon_to_chart(lat, lon));
        }
        return pts;
    }
    if (m->name() == "circlexeuclidean1") {
        for (double q : linspace(0.0, kTwoPi, 64, true)) {
            for (double p : linspace(-2.0, 2.0, 33, false)) {
                Vec x(2);
                x << q, p;
                pts.push_back(x);
            }
        }
        return pts;
    }
    if (m->name() == "circlexcircle") {
        for (double a : linspace(0.0, kTwoPi, 64, true)) {
            for (double b : linspace(0.0, kTwoPi, 64, true)) {
                Vec x(2);
                x << a, b;
                pts.push_back(x);
            }
        }
        return pts;
    }
    if (m->kind() == ManifoldKind::Euclidean && m->dim() <= 2) {
        if (m->dim() == 1) {
            for (double t : linspace(-2.0, 2.0, 257, false)) {
                Vec x(1);
                x << t;
                pts.push_back(x);
            }
        } else {
            for (double a : linspace(-2.0, 2.0, 65, false)) {
                for (double b : linspace(-2.0, 2.0, 65, false)) {
                    Vec x(2);
                    x << a, b;
                    pts.push_back(x);
                }
            }
        }
        return pts;
    }
    throw CapabilityError("no sampling grid defined for manifold: " + m->name());
}

int cmd_sample_prior(const std::string& manifold_name, const std::string& kernel_name,
                     const std::string& lengthscale_text, double amplitude, int truncation,
                     int features, std::uint64_t seed, const std::string& out) {
    ensure_dir(out);
    ManifoldPtr m = manifold_by_name(manifold_name);
    auto kernel = projected_kernel(
        m, build_scalar_kernel(m, parse_nu(kernel_name), parse_lengthscales(lengthscale_text),
                               amplitude, truncation));
    FieldSample sample = sample_prior_field(kernel, features, seed);

    auto pts = chart_grid(m);
    std::string csv_path = (fs::path(out) / "sample.csv").string();
    io::CsvWriter csv(csv_path);
    std::vector<std::string> header;
    for (int i = 0; i < m->dim(); ++i) header.push_back("x" + std::to_string(i));
    for (int i = 0; i < m->dim(); ++i) header.push_back("coeff" + std::to_string(i));
    csv.header(header);
    for (const auto& x : pts) {
        Vec v = sample(x);
        std::vector<double> row;
        for (int i = 0; i < x.size(); ++i) row.push_back(x[i]);
        for (int i = 0; i < v.size(); ++i) row.push_back(v[i]);
        csv.row(row);
    }
    json manifest{{"command", "sample-prior"},
                  {"manifold", manifold_name},
                  {"kernel", kernel_name},
                  {"lengthscale", lengthscale_text},
                  {"amplitude", amplitude},
                  {"truncation", truncation},
                  {"features", features},
                  {"seed", seed},
                  {"rows", pts.size()},
                  {"outputs", json::array({"sample.csv"})}};
    write_manifest((fs::path(out) / "manifest.json").string(), manifest);
    std::cout << "wrote " << csv_path << " (" << pts.size() << " rows)\n";
    return 0;
}

// ---------------------------------------------------------------------------
// pendulum
// ---------------------------------------------------------------------------

int cmd_pendulum(const PendulumExperimentConfig& config, const std::string& out) {
    ensure_dir(out);
    auto result = run_pendulum_experiment(config);

    std::vector<std::string> outputs;
    for (size_t s = 0; s < result.training.size(); ++s) {
        std::string name = "training_" + std::to_string(s) + ".csv";
        write_trajectory_csv((fs::path(out) / name).string(), result.training[s]);
        outputs.push_back(name);
    }
    {
        std::string name = "observations.csv";
        io::CsvWriter csv((fs::path(out) / name).string());
        csv.header({"q", "p", "dq", "dp"});
        for (int i = 0; i < result.observations.size(); ++i) {
            csv.row({result.observations.points[i][0], result.observations.points[i][1],
                     result.observations.values[i][0], result.observations.values[i][1]});
        }
        outputs.push_back(name);
    }
    // learned mean fields on a (q, p) grid, manifold model and baseline
    auto write_field = [&](const std::string& name, const ExactPosterior& post) {
        io::CsvWriter csv((fs::path(out) / name).string());
        csv.header({"q", "p", "dq", "dp"});
        for (int i = 0; i < 64; ++i) {
            for (int j = 0; j < 33; ++j) {
                Vec x(2);
                x << kTwoPi * i / 64.0, -3.0 + 6.0 * j / 32.0;
                Vec v = post.mean(x);
                csv.row({x[0], x[1], v[0], v[1]});
            }
        }
        outputs.push_back(name);
    };
    write_field("field_manifold.csv", *result.manifold_posterior);
    write_field("field_baseline.csv", *result.baseline_posterior);

    for (size_t r = 0; r < result.gp_rollouts.size(); ++r) {
        std::string name = "rollout_" + std::to_string(r) + ".csv";
        write_trajectory_csv((fs::path(out) / name).string(), result.gp_rollouts[r]);
        outputs.push_back(name);
    }

    json starts = json::array();
    for (auto [q0, p0] : config.starts) starts.push_back(json::array({q0, p0}));
    json manifest{{"command", "pendulum"},
                  {"seed", config.seed},
                  {"params",
                   {{"mass", config.params.mass},
                    {"length", config.params.length},
                    {"gravity", config.params.gravity},
                    {"friction", config.params.friction},
                    {"step", config.params.step}}},
                  {"starts", starts},
                  {"steps", config.steps},
                  {"lengthscales",
                   json::array({config.lengthscale_circle, config.lengthscale_momentum})},
                  {"amplitude", config.amplitude},
                  {"observation_noise_std", config.observation_noise_std},
                  {"seam",
                   {{"manifold_gap", result.seam.manifold_gap},
                    {"baseline_gap", result.seam.baseline_gap}}},
                  {"observations", result.observations.size()},
                  {"outputs", outputs}};
    write_manifest((fs::path(out) / "manifest.json").string(), manifest);
    std::cout << "seam gap: manifold " << result.seam.manifold_gap << ", baseline "
              << result.seam.baseline_gap << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// wind
// ---------------------------------------------------------------------------

json wind_metrics_json(const WindExperimentResult& r) {
    return json{{"manifold_rmse", r.manifold_rmse},
                {"baseline_rmse", r.baseline_rmse},
                {"manifold_seam", r.manifold_seam_metric},
                {"baseline_seam", r.baseline_seam_metric},
                {"manifold_track_cov", r.manifold_track_cov},
                {"manifold_pole_ratio", r.manifold_pole_ratio},
                {"baseline_pole_ratio", r.baseline_pole_ratio}};
}

int cmd_wind_synthetic(WindExperimentConfig config, int seeds, int svgp_inducing,
                       const std::string& out) {
    ensure_dir(out);
    for (int i = 0; i < seeds; ++i) {
        WindExperimentConfig c = config;
        c.seed = config.seed + static_cast<std::uint64_t>(i);
        auto r = run_wind_experiment(c);
        std::string tag = std::to_string(c.seed);
        write_wind_grid((fs::path(out) / ("truth_grid_" + tag + ".csv")).string(), r.synth.grid);
        write_predictions_csv(
            (fs::path(out) / ("predictions_manifold_" + tag + ".csv")).string(),
            r.manifold.grid);
        write_predictions_csv(
            (fs::path(out) / ("predictions_baseline_" + tag + ".csv")).string(),
            r.baseline.grid);
        {
            io::CsvWriter csv((fs::path(out) / ("track_" + tag + ".csv")).string());
            csv.header({"t", "lat", "lon", "u", "v"});
            for (const auto& o : r.observations) {
                csv.row({o.time_minutes, o.lat, o.lon, o.u, o.v});
            }
        }
        json outputs = json::array({"truth_grid_" + tag + ".csv",
                                    "predictions_manifold_" + tag + ".csv",
                                    "predictions_baseline_" + tag + ".csv",
                                    "track_" + tag + ".csv"});
        if (svgp_inducing > 0) {
            SVGPState state = fit_wind_svgp(r.observations, c.manifold, svgp_inducing,
                                            /*steps=*/80, c.seed);
            std::string state_name = "svgp_state_" + tag + ".json";
            save_svgp_state((fs::path(out) / state_name).string(), state);
            outputs.push_back(state_name);
        }
        json manifest{{"command", "wind"},
                      {"mode", "synthetic"},
                      {"seed", c.seed},
                      {"noise_std", c.manifold.noise_std},
                      {"amplitude_manifold", c.manifold.amplitude},
                      {"amplitude_baseline", c.baseline.amplitude},
                      {"lengthscale", r.manifold.lengthscale},
                      {"lengthscale_baseline_deg", r.baseline.lengthscale},
                      {"metrics", wind_metrics_json(r)},
                      {"outputs", outputs}};
        write_manifest((fs::path(out) / ("manifest_" + tag + ".json")).string(), manifest);
        std::cout << "seed " << c.seed << ": rmse manifold " << r.manifold_rmse << " baseline "
                  << r.baseline_rmse << "\n";
    }
    return 0;
}

int cmd_wind_from_state(const std::string& state_path, const std::string& out) {
    ensure_dir(out);
    SVGPState state = load_svgp_state(state_path);
    auto kernel = wind_kernel_from_state(state);
    GriddedPrediction pred = svgp_grid_prediction(state, *kernel);
    write_predictions_csv((fs::path(out) / "predictions_manifold.csv").string(), pred);
    json manifest{{"command", "wind"},
                  {"mode", "reload"},
                  {"state", fs::path(state_path).filename().string()},
                  {"manifold", state.manifold_name},
                  {"inducing", state.inducing.size()},
                  {"lengthscale", state.lengthscales},
                  {"noise_variance", state.noise_variance},
                  {"outputs", json::array({"predictions_manifold.csv"})}};
    write_manifest((fs::path(out) / "manifest.json").string(), manifest);
    std::cout << "predicted from sparse state with " << state.inducing.size()
              << " inducing points\n";
    return 0;
}

int cmd_wind_csv(const std::string& grid_path, const std::string& track_path,
                 const std::string& clim_path, const WindModelConfig& model,
                 const WindBaselineConfig& baseline, const std::string& out) {
    ensure_dir(out);
    WindGrid grid = load_wind_grid(grid_path);
    WindGrid clim;
    bool have_clim = !clim_path.empty();
    if (have_clim) clim = load_wind_grid(clim_path);

    io::CsvTable track = io::read_csv(track_path);
    bool has_uv = track.header.size() >= 5;
    if (track.header.size() < 3 || track.header[1] != "lat" || track.header[2] != "lon") {
        throw FormatError(track_path + ": expected header t,lat,lon[,u,v]", 0);
    }
    std::vector<TrackObservation> obs;
    std::vector<std::pair<double, double>> latlons;
    for (size_t i = 0; i < track.rows.size(); ++i) {
        const auto& row = track.rows[i];
        TrackObservation o;
        o.time_minutes = io::parse_double(row[0], i + 1);
        o.lat = io::parse_double(row[1], i + 1);
        o.lon = io::parse_double(row[2], i + 1);
        o.noise_std = model.noise_std;
        if (has_uv) {
            o.u = io::parse_double(row[3], i + 1);
            o.v = io::parse_double(row[4], i + 1);
        }
        obs.push_back(o);
        latlons.emplace_back(o.lat, o.lon);
    }
    if (!has_uv) {
        auto uv = interpolate_grid(grid, latlons);
        for (size_t i = 0; i < obs.size(); ++i) {
            obs[i].u = uv[i].first;
            obs[i].v = uv[i].second;
        }
    }
    if (have_clim) {
        auto cuv = interpolate_grid(clim, latlons);
        std::vector<std::pair<double, double>> observed;
        for (const auto& o : obs) observed.emplace_back(o.u, o.v);
        auto anom = climatology_anomaly(observed, cuv);
        for (size_t i = 0; i < obs.size(); ++i) {
            obs[i].u = anom[i].first;
            obs[i].v = anom[i].second;
        }
    }

    auto mfit = fit_wind_manifold(obs, model);
    auto bfit = fit_wind_euclidean_baseline(obs, baseline);
    write_predictions_csv((fs::path(out) / "predictions_manifold.csv").string(), mfit.grid);
    write_predictions_csv((fs::path(out) / "predictions_baseline.csv").string(), bfit.grid);
    json manifest{{"command", "wind"},
                  {"mode", "csv"},
                  {"grid", fs::path(grid_path).filename().string()},
                  {"track", fs::path(track_path).filename().string()},
                  {"observations", obs.size()},
                  {"noise_std", model.noise_std},
                  {"lengthscale", mfit.lengthscale},
                  {"lengthscale_baseline_deg", bfit.lengthscale},
                  {"outputs",
                   json::array({"predictions_manifold.csv", "predictions_baseline.csv"})}};
    write_manifest((fs::path(out) / "manifest.json").string(), manifest);
    std::cout << "fit " << obs.size() << " track observations\n";
    return 0;
}

// ---------------------------------------------------------------------------
// check
// ---------------------------------------------------------------------------

struct CheckRow {
    std::string name;
    double value;
    double threshold;
    bool less_is_pass;
    bool pass() const { return less_is_pass ? value <= threshold : value >= threshold; }
};

int cmd_check(std::uint64_t seed) {
    std::vector<CheckRow> rows;

    auto add = [&rows](const std::string& name, double value, double threshold,
                       bool less_is_pass = true) {
        rows.push_back({name, value, threshold, less_is_pass});
    };

    // metric identity P P^T = I over 1000 random points per manifold
    for (const auto& m : {circle(), sphere(), cylinder(), flat_torus()}) {
        Rng rng(seed);
        double worst = 0.0;
        for (int i = 0; i < 1000; ++i) {
            Vec x = m->random_point(rng);
            worst = std::max(worst, (m->metric_matrix(x) - Mat::Identity(m->dim(), m->dim()))
                                        .cwiseAbs()
                                        .maxCoeff());
        }
        add("metric identity " + m->name(), worst, 1e-12);
    }

    // gauge independence on sphere, cylinder, torus
    auto sphere_k = projected_kernel(sphere(), matern_kernel(sphere(), 1.5, 0.4, 1.0, 961));
    ManifoldPtr cyl = cylinder();
    auto* cm = static_cast<const ProductManifold*>(cyl.get());
    auto cyl_k = projected_kernel(cyl, product_kernel(cyl, se_kernel(cm->first(), 0.3, 1.0, 101),
                                                      se_kernel(cm->second(), 1.2, 1.0)));
    auto torus_k =
        projected_kernel(flat_torus(), matern_kernel(flat_torus(), 1.5, 0.6, 1.0, 401));
    for (const auto& k : {sphere_k, cyl_k, torus_k}) {
        auto report = gauge_independence_report(*k, 10, 10, seed);
        add("gauge independence " + k->manifold()->name(), report.max_deviation, 1e-10);
    }

    // PSD of block Gram matrices
    for (const auto& k : {sphere_k, cyl_k, torus_k}) {
        Rng rng(seed + 1);
        double worst = 0.0;
        for (int rep = 0; rep < 20; ++rep) {
            std::vector<Vec> pts;
            for (int i = 0; i < 10; ++i) pts.push_back(k->manifold()->random_point(rng));
            Mat g = k->gram(pts);
            Eigen::SelfAdjointEigenSolver<Mat> es(g);
            worst = std::max(worst, -es.eigenvalues().minCoeff() /
                                        std::max(es.eigenvalues().maxCoeff(), 1e-300));
        }
        add("gram psd " + k->manifold()->name(), worst, 1e-8);
    }

    // oracle comparison: SVGP substitution identity vs the exact posterior
    {
        Rng rng(seed + 2);
        VectorObservationSet obs;
        obs.noise_variance = 0.2;
        for (int i = 0; i < 10; ++i) {
            obs.points.push_back(sphere()->random_point(rng));
            Vec v(2);
            v << rng.normal(), rng.normal();
            obs.values.push_back(v);
        }
        ExactPosterior exact(sphere_k, obs);
        SVGPState state;
        state.inducing = obs.points;
        state.mu = obs.stacked();
        state.sigma_factors.assign(obs.size(), std::sqrt(0.2) * Mat::Identity(2, 2));
        state.noise_variance = 0.2;
        double worst = 0.0;
        for (int i = 0; i < 5; ++i) {
            std::vector<Vec> test{sphere()->random_point(rng)};
            auto pred = svgp_predict(state, *sphere_k, test);
            worst = std::max(worst, (pred.means[0] - exact.mean(test[0])).cwiseAbs().maxCoeff());
        }
        add("svgp substitution identity", worst, 1e-8);
    }

    // oracle comparison: frictionless leapfrog energy drift
    {
        PendulumParams p;
        p.gravity = 3.0;
        p.friction = 0.0;
        auto t = leapfrog_rollout(p, 2.0, 0.0, 2000);
        double h0 = pendulum_energy(p, t.q[0], t.p[0]);
        double worst = 0.0;
        for (int i = 0; i < t.size(); ++i) {
            worst = std::max(worst, std::abs(pendulum_energy(p, t.q[i], t.p[i]) - h0) / h0);
        }
        add("leapfrog energy drift", worst, 1e-4);
    }

    int failures = 0;
    std::printf("%-34s %14s %12s %s\n", "check", "value", "threshold", "status");
    for (const auto& row : rows) {
        bool ok = row.pass();
        failures += !ok;
        std::printf("%-34s %14.3e %12.0e %s\n", row.name.c_str(), row.value, row.threshold,
                    ok ? "PASS" : "FAIL");
    }
    if (failures > 0) {
        std::cout << failures << " checks failed\n";
        return 2;
    }
    std::cout << "all " << rows.size() << " checks passed\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gaussian process vector fields on embedded manifolds"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "flat key=value config file (flags win)");

    // shared options
    std::uint64_t seed = 0;
    std::string out = "out";

    // ---- sample-prior ----
    auto* sp = app.add_subcommand("sample-prior", "draw a prior vector field on a grid");
    sp->fallthrough();
    std::string sp_manifold = "sphere", sp_kernel = "matern32", sp_lengthscale = "0.4";
    double sp_amplitude = 1.0;
    int sp_truncation = -1, sp_features = 1024;
    sp->add_option("--manifold", sp_manifold, "circle|sphere|cylinder|torus|euclideanN");
    sp->add_option("--kernel", sp_kernel, "se|matern12|matern32|matern52");
    sp->add_option("--lengthscale", sp_lengthscale, "lengthscale (comma list for products)");
    sp->add_option("--amplitude", sp_amplitude, "kernel variance");
    sp->add_option("--truncation", sp_truncation, "KL truncation (-1 for default)");
    sp->add_option("--features", sp_features, "RFF feature count for Euclidean factors");
    sp->add_option("--seed", seed, "top-level seed");
    sp->add_option("--out", out, "output directory");

    // ---- pendulum ----
    auto* pd = app.add_subcommand("pendulum", "pendulum dynamics experiment on S1 x R");
    pd->fallthrough();
    PendulumExperimentConfig pd_config;
    std::string pd_lengthscale = "0.3,1.2";
    int pd_rollouts = 0;
    pd->add_option("--steps", pd_config.steps, "training rollout steps");
    pd->add_option("--gravity", pd_config.params.gravity, "gravity");
    pd->add_option("--friction", pd_config.params.friction, "friction coefficient");
    pd->add_option("--step-size", pd_config.params.step, "integrator step h");
    pd->add_option("--lengthscale", pd_lengthscale, "circle,momentum lengthscales");
    pd->add_option("--amplitude", pd_config.amplitude, "kernel variance");
    pd->add_option("--noise", pd_config.observation_noise_std, "observation noise std");
    pd->add_option("--truncation", pd_config.truncation, "circle KL truncation");
    pd->add_option("--rollouts", pd_rollouts, "pathwise GP rollouts per start");
    pd->add_option("--rollout-steps", pd_config.rollout_steps, "steps per GP rollout");
    pd->add_option("--features", pd_config.feature_budget, "RFF features for the prior");
    pd->add_option("--seed", seed, "top-level seed");
    pd->add_option("--out", out, "output directory");

    // ---- wind ----
    auto* wd = app.add_subcommand("wind", "wind interpolation experiment on S2");
    wd->fallthrough();
    WindExperimentConfig wd_config;
    bool wd_synthetic = false;
    int wd_seeds = 1;
    std::string wd_grid, wd_track, wd_clim;
    bool wd_amplitude_is_std = false, wd_learn_lengthscale = false;
    wd->add_flag("--synthetic", wd_synthetic, "generate synthetic truth from the prior");
    wd->add_option("--seeds", wd_seeds, "number of synthetic seeds to run");
    wd->add_option("--grid", wd_grid, "wind grid csv (lat,lon,u,v)");
    wd->add_option("--track", wd_track, "track csv (t,lat,lon[,u,v])");
    wd->add_option("--climatology", wd_clim, "climatology grid csv to subtract");
    wd->add_option("--amplitude", wd_config.manifold.amplitude, "manifold prior amplitude");
    wd->add_option("--amplitude-baseline", wd_config.baseline.amplitude,
                   "baseline prior amplitude");
    wd->add_flag("--amplitude-is-std", wd_amplitude_is_std,
                 "interpret amplitudes as standard deviations");
    wd->add_option("--lengthscale", wd_config.manifold.lengthscale,
                   "manifold lengthscale (radians)");
    wd->add_option("--lengthscale-baseline", wd_config.baseline.lengthscale_deg,
                   "baseline lengthscale (degrees)");
    wd->add_option("--noise", wd_config.manifold.noise_std, "observation noise std (m/s)");
    wd->add_flag("--learn-lengthscale", wd_learn_lengthscale,
                 "fit lengthscale by marginal likelihood");
    wd->add_option("--truncation", wd_config.manifold.truncation, "sphere KL truncation");
    wd->add_option("--track-minutes", wd_config.track_minutes, "track length in minutes");
    int wd_svgp_m = 0;
    std::string wd_state_path;
    wd->add_option("--svgp", wd_svgp_m,
                   "also fit a sparse variational state with this many inducing points "
                   "and save it (synthetic mode)");
    wd->add_option("--svgp-state", wd_state_path,
                   "reload a saved sparse state and write its grid predictions");
    wd->add_option("--seed", seed, "top-level seed");
    wd->add_option("--out", out, "output directory");

    // ---- check ----
    auto* ck = app.add_subcommand("check", "run the invariant suite");
    ck->fallthrough();
    ck->add_option("--seed", seed, "top-level seed");

    try {
        app.parse(argc, argv);
        auto file = load_config(config_path);

        if (sp->parsed()) {
            ConfigLayer layer(sp, file);
            layer.fill("manifold", "manifold", sp_manifold);
            layer.fill("kernel", "kernel", sp_kernel);
            layer.fill("lengthscale", "lengthscale", sp_lengthscale);
            layer.fill("amplitude", "amplitude", sp_amplitude);
            layer.fill("truncation", "truncation", sp_truncation);
            layer.fill("features", "features", sp_features);
            layer.fill("seed", "seed", seed);
            layer.fill("out", "out", out);
            return cmd_sample_prior(sp_manifold, sp_kernel, sp_lengthscale, sp_amplitude,
                                    sp_truncation, sp_features, seed, out);
        }
        if (pd->parsed()) {
            ConfigLayer layer(pd, file);
            layer.fill("steps", "steps", pd_config.steps);
            layer.fill("gravity", "gravity", pd_config.params.gravity);
            layer.fill("friction", "friction", pd_config.params.friction);
            layer.fill("step-size", "step_size", pd_config.params.step);
            layer.fill("lengthscale", "lengthscale", pd_lengthscale);
            layer.fill("amplitude", "amplitude", pd_config.amplitude);
            layer.fill("noise", "noise", pd_config.observation_noise_std);
            layer.fill("truncation", "truncation", pd_config.truncation);
            layer.fill("rollouts", "rollouts", pd_rollouts);
            layer.fill("rollout-steps", "rollout_steps", pd_config.rollout_steps);
            layer.fill("features", "features", pd_config.feature_budget);
            layer.fill("seed", "seed", seed);
            layer.fill("out", "out", out);
            auto ls = parse_lengthscales(pd_lengthscale);
            if (ls.size() != 2) throw DomainError("pendulum takes two lengthscales");
            pd_config.lengthscale_circle = ls[0];
            pd_config.lengthscale_momentum = ls[1];
            pd_config.rollout_count = pd_rollouts;
            pd_config.seed = seed;
            if (pd_config.steps < 1) throw DomainError("pendulum needs steps >= 1");
            if (pd_rollouts > 0 && pd_config.rollout_steps < 1) {
                throw DomainError("rollout steps must be >= 1");
            }
            return cmd_pendulum(pd_config, out);
        }
        if (wd->parsed()) {
            ConfigLayer layer(wd, file);
            layer.fill("synthetic", "synthetic", wd_synthetic);
            layer.fill("seeds", "seeds", wd_seeds);
            layer.fill("grid", "grid", wd_grid);
            layer.fill("track", "track", wd_track);
            layer.fill("climatology", "climatology", wd_clim);
            layer.fill("amplitude", "amplitude", wd_config.manifold.amplitude);
            layer.fill("amplitude-baseline", "amplitude_baseline", wd_config.baseline.amplitude);
            layer.fill("amplitude-is-std", "amplitude_is_std", wd_amplitude_is_std);
            layer.fill("lengthscale", "lengthscale", wd_config.manifold.lengthscale);
            layer.fill("lengthscale-baseline", "lengthscale_baseline",
                       wd_config.baseline.lengthscale_deg);
            layer.fill("noise", "noise", wd_config.manifold.noise_std);
            layer.fill("learn-lengthscale", "learn_lengthscale", wd_learn_lengthscale);
            layer.fill("truncation", "truncation", wd_config.manifold.truncation);
            layer.fill("track-minutes", "track_minutes", wd_config.track_minutes);
            layer.fill("svgp", "svgp", wd_svgp_m);
            layer.fill("svgp-state", "svgp_state", wd_state_path);
            layer.fill("seed", "seed", seed);
            layer.fill("out", "out", out);
            wd_config.manifold.amplitude_is_std = wd_amplitude_is_std;
            wd_config.baseline.amplitude_is_std = wd_amplitude_is_std;
            wd_config.manifold.learn_lengthscale = wd_learn_lengthscale;
            wd_config.baseline.learn_lengthscale = wd_learn_lengthscale;
            wd_config.baseline.noise_std = wd_config.manifold.noise_std;
            wd_config.seed = seed;
            if (!wd_state_path.empty()) {
                return cmd_wind_from_state(wd_state_path, out);
            }
            if (wd_seeds < 1) throw DomainError("--seeds must be >= 1");
            if (!wd_synthetic && (wd_grid.empty() || wd_track.empty())) {
                throw DomainError("wind needs --synthetic, --svgp-state, or --grid and --track");
            }
            if (wd_synthetic) {
                return cmd_wind_synthetic(wd_config, wd_seeds, wd_svgp_m, out);
            }
            return cmd_wind_csv(wd_grid, wd_track, wd_clim, wd_config.manifold,
                                wd_config.baseline, out);
        }
        if (ck->parsed()) {
            ConfigLayer layer(ck, file);
            layer.fill("seed", "seed", seed);
            return cmd_check(seed);
        }
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    } catch (const ConditioningError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 2;
    } catch (const DivergenceError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 2;
    } catch (const OptimizationError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
