// Python bindings for the core operations: manifolds, scalar and projected
// kernels, prior sampling, exact/pathwise/SVGP inference, and the two
// experiment drivers.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gvf/dynamics.hpp"
#include "gvf/io.hpp"
#include "gvf/wind.hpp"

namespace py = pybind11;
using namespace gvf;

namespace {

// const-pointer holders wrapped for pybind
struct PyManifold {
    ManifoldPtr m;
};
struct PyScalarKernel {
    ScalarKernelPtr k;
};
struct PyProjectedKernel {
    ProjectedKernelPtr k;
};
struct PyFieldSample {
    FieldSample sample;
};
struct PyPosterior {
    std::shared_ptr<ExactPosterior> post;
};

std::vector<Vec> rows_of(const Mat& points) {
    std::vector<Vec> out;
    out.reserve(points.rows());
    for (int i = 0; i < points.rows(); ++i) out.push_back(points.row(i).transpose());
    return out;
}

VectorObservationSet make_obs(const Mat& x, const Mat& y, double noise_variance) {
    if (x.rows() != y.rows()) throw ShapeError("points and values need matching row counts");
    VectorObservationSet obs;
    obs.noise_variance = noise_variance;
    for (int i = 0; i < x.rows(); ++i) {
        obs.points.push_back(x.row(i).transpose());
        obs.values.push_back(y.row(i).transpose());
    }
    return obs;
}

PyScalarKernel build_kernel(const PyManifold& m, const std::string& family,
                            std::vector<double> lengthscales, double amplitude,
                            int truncation) {
    double nu;
    if (family == "se") {
        nu = kNuSquaredExponential;
    } else if (family == "matern12") {
        nu = 0.5;
    } else if (family == "matern32") {
        nu = 1.5;
    } else if (family == "matern52") {
        nu = 2.5;
    } else {
        throw DomainError("unknown kernel family: " + family);
    }
    if (m.m->kind() == ManifoldKind::Product && !m.m->compact()) {
        auto* pm = static_cast<const ProductManifold*>(m.m.get());
        if (lengthscales.size() == 1) lengthscales.push_back(lengthscales[0]);
        if (lengthscales.size() != 2) throw DomainError("products take one or two lengthscales");
        auto a = matern_kernel(pm->first(), nu, lengthscales[0], amplitude, truncation);
        auto b = matern_kernel(pm->second(), nu, lengthscales[1], 1.0, truncation);
        return {product_kernel(m.m, a, b)};
    }
    if (lengthscales.size() != 1) {
        throw DomainError(m.m->name() + " takes exactly one lengthscale");
    }
    return {matern_kernel(m.m, nu, lengthscales[0], amplitude, truncation)};
}

}  // namespace

PYBIND11_MODULE(gvf_core, m) {
    m.doc() = "Gaussian process vector fields on embedded Riemannian manifolds";

    // error taxonomy -> python exceptions
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<CapabilityError>(m, "CapabilityError", PyExc_NotImplementedError);
    py::register_exception<GaugeError>(m, "GaugeError", PyExc_ValueError);
    py::register_exception<ConditioningError>(m, "ConditioningError", PyExc_ArithmeticError);
    py::register_exception<OptimizationError>(m, "OptimizationError", PyExc_ArithmeticError);
    py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_ArithmeticError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
    py::register_exception<StateError>(m, "StateError", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    py::class_<PyManifold>(m, "Manifold")
        .def_property_readonly("dim", [](const PyManifold& s) { return s.m->dim(); })
        .def_property_readonly("ambient_dim",
                               [](const PyManifold& s) { return s.m->ambient_dim(); })
        .def_property_readonly("name", [](const PyManifold& s) { return s.m->name(); })
        .def_property_readonly("compact", [](const PyManifold& s) { return s.m->compact(); })
        .def("embed", [](const PyManifold& s, const Vec& x) { return s.m->embed(x); })
        .def("projection_matrix",
             [](const PyManifold& s, const Vec& x) { return s.m->projection_matrix(x); })
        .def("metric_matrix",
             [](const PyManifold& s, const Vec& x) { return s.m->metric_matrix(x); })
        .def("geodesic_distance",
             [](const PyManifold& s, const Vec& x, const Vec& y) {
                 return geodesic_distance(s.m, x, y);
             })
        .def("__repr__", [](const PyManifold& s) { return "<Manifold " + s.m->name() + ">"; });

    m.def("manifold", [](const std::string& name) { return PyManifold{manifold_by_name(name)}; },
          py::arg("name"), "circle | sphere | cylinder | torus | euclideanN");

    py::class_<PyScalarKernel>(m, "ScalarKernel")
        .def("__call__",
             [](const PyScalarKernel& s, const Vec& x, const Vec& y) { return s.k->eval(x, y); })
        .def_property_readonly("variance",
                               [](const PyScalarKernel& s) { return s.k->variance(); })
        .def_property_readonly("lengthscales",
                               [](const PyScalarKernel& s) { return s.k->lengthscales(); })
        .def("__repr__",
             [](const PyScalarKernel& s) { return "<ScalarKernel " + s.k->describe() + ">"; });

    m.def("kernel", &build_kernel, py::arg("manifold"), py::arg("family") = "matern32",
          py::arg("lengthscales") = std::vector<double>{0.4}, py::arg("amplitude") = 1.0,
          py::arg("truncation") = -1,
          "scalar Matern/SE kernel; products of a compact and a Euclidean factor take two "
          "lengthscales");

    m.def("laplacian_eigenvalues", [](const PyManifold& man, int count) {
        auto pairs = laplacian_eigenpairs(man.m, count);
        Vec out(pairs.size());
        for (size_t i = 0; i < pairs.size(); ++i) out[i] = pairs[i].lambda;
        return out;
    });
    m.def("spectral_weight", &spectral_weight, py::arg("nu"), py::arg("lengthscale"),
          py::arg("dim"), py::arg("lambda"));

    py::class_<PyProjectedKernel>(m, "ProjectedKernel")
        .def("__call__", [](const PyProjectedKernel& s, const Vec& x,
                            const Vec& y) { return s.k->eval(x, y); })
        .def("gram",
             [](const PyProjectedKernel& s, const Mat& pts) { return s.k->gram(rows_of(pts)); })
        .def_property_readonly("dim", [](const PyProjectedKernel& s) { return s.k->dim(); })
        .def("pushforward",
             [](const PyProjectedKernel& s, const Vec& x) { return s.k->pushforward(x); })
        .def("gauge_independence",
             [](const PyProjectedKernel& s, int n_points, int n_gauges, std::uint64_t seed) {
                 auto r = gauge_independence_report(*s.k, n_points, n_gauges, seed);
                 return py::make_tuple(r.max_deviation, r.trials);
             },
             py::arg("n_points") = 10, py::arg("n_gauges") = 10, py::arg("seed") = 0);

    m.def("projected_kernel",
          [](const PyManifold& man, const PyScalarKernel& k) {
              return PyProjectedKernel{projected_kernel(man.m, k.k)};
          },
          py::arg("manifold"), py::arg("scalar_kernel"),
          "matrix-valued kernel K_F(x, x') = P_x k(x, x') P_x'^T");

    py::class_<PyFieldSample>(m, "FieldSample")
        .def("__call__", [](const PyFieldSample& s, const Vec& x) { return s.sample(x); })
        .def("ambient", [](const PyFieldSample& s, const Vec& x) { return s.sample.ambient(x); })
        .def_property_readonly("seed", [](const PyFieldSample& s) { return s.sample.seed(); });

    m.def("sample_prior_field",
          [](const PyProjectedKernel& k, int feature_budget, std::uint64_t seed) {
              return PyFieldSample{sample_prior_field(k.k, feature_budget, seed)};
          },
          py::arg("kernel"), py::arg("feature_budget") = 1024, py::arg("seed") = 0);

    py::class_<PyPosterior>(m, "ExactPosterior")
        .def("mean", [](const PyPosterior& s, const Vec& x) { return s.post->mean(x); })
        .def("cov",
             [](const PyPosterior& s, const Vec& x, const Vec& y) { return s.post->cov(x, y); })
        .def("predict",
             [](const PyPosterior& s, const Mat& pts) {
                 auto [means, covs] = s.post->predict(rows_of(pts));
                 return py::make_tuple(means, covs);
             })
        .def_property_readonly("log_marginal",
                               [](const PyPosterior& s) { return s.post->log_marginal(); });

    m.def("exact_posterior_fit",
          [](const PyProjectedKernel& k, const Mat& x, const Mat& y, double noise_variance) {
              return PyPosterior{std::make_shared<ExactPosterior>(
                  k.k, make_obs(x, y, noise_variance))};
          },
          py::arg("kernel"), py::arg("points"), py::arg("values"), py::arg("noise_variance"));

    m.def("pathwise_posterior_sample",
          [](const PyFieldSample& prior, const PyPosterior& post, std::uint64_t seed) {
              return PyFieldSample{pathwise_posterior_sample(prior.sample, *post.post, seed)};
          },
          py::arg("prior"), py::arg("posterior"), py::arg("seed") = 0);

    py::class_<SVGPState>(m, "SVGPState")
        .def_property_readonly("inducing", [](const SVGPState& s) { return s.inducing; })
        .def_readonly("mu", &SVGPState::mu)
        .def_readonly("lengthscales", &SVGPState::lengthscales)
        .def_readonly("noise_variance", &SVGPState::noise_variance)
        .def_readonly("manifold_name", &SVGPState::manifold_name)
        .def("to_json", [](const SVGPState& s) { return svgp_state_to_json(s); })
        .def_static("from_json",
                    [](const std::string& text) { return svgp_state_from_json(text); });

    m.def("svgp_fit",
          [](const PyProjectedKernel& k, const Mat& x, const Mat& y, double noise_variance,
             int inducing, int steps, double learning_rate, bool optimize_lengthscales,
             std::uint64_t seed) {
              SVGPFitOptions opts;
              opts.steps = steps;
              opts.learning_rate = learning_rate;
              opts.optimize_lengthscales = optimize_lengthscales;
              return svgp_fit(*k.k, make_obs(x, y, noise_variance), inducing, opts, seed);
          },
          py::arg("kernel"), py::arg("points"), py::arg("values"), py::arg("noise_variance"),
          py::arg("inducing"), py::arg("steps") = 200, py::arg("learning_rate") = 1e-2,
          py::arg("optimize_lengthscales") = false, py::arg("seed") = 0);

    m.def("svgp_predict",
          [](const SVGPState& state, const PyProjectedKernel& k, const Mat& pts) {
              auto pred = svgp_predict(state, *k.k, rows_of(pts));
              return py::make_tuple(pred.means, pred.covs);
          },
          py::arg("state"), py::arg("kernel"), py::arg("points"));

    m.def("svgp_elbo",
          [](const SVGPState& state, const PyProjectedKernel& k, const Mat& x, const Mat& y,
             double noise_variance) {
              auto obs = make_obs(x, y, noise_variance);
              std::vector<int> idx(obs.size());
              std::iota(idx.begin(), idx.end(), 0);
              return svgp_elbo(state, *k.k, obs, idx);
          },
          py::arg("state"), py::arg("kernel"), py::arg("points"), py::arg("values"),
          py::arg("noise_variance"));

    m.def("svgp_pathwise_sample",
          [](const SVGPState& state, const PyProjectedKernel& k, const PyFieldSample& prior,
             std::uint64_t seed) {
              return PyFieldSample{svgp_pathwise_sample(state, k.k, prior.sample, seed)};
          },
          py::arg("state"), py::arg("kernel"), py::arg("prior"), py::arg("seed") = 0);

    // ---- experiments ----

    m.def("pendulum_experiment",
          [](double gravity, double friction, int steps, double noise_std, std::uint64_t seed) {
              PendulumExperimentConfig config;
              config.params.gravity = gravity;
              config.params.friction = friction;
              config.steps = steps;
              config.observation_noise_std = noise_std;
              config.seed = seed;
              auto r = run_pendulum_experiment(config);
              py::dict out;
              out["manifold_seam_gap"] = r.seam.manifold_gap;
              out["baseline_seam_gap"] = r.seam.baseline_gap;
              out["observations"] = r.observations.size();
              return out;
          },
          py::arg("gravity") = 3.0, py::arg("friction") = 0.3, py::arg("steps") = 400,
          py::arg("noise_std") = 0.5, py::arg("seed") = 0);

    m.def("wind_experiment",
          [](std::uint64_t seed) {
              WindExperimentConfig config;
              config.seed = seed;
              auto r = run_wind_experiment(config);
              py::dict out;
              out["manifold_rmse"] = r.manifold_rmse;
              out["baseline_rmse"] = r.baseline_rmse;
              out["manifold_seam"] = r.manifold_seam_metric;
              out["baseline_seam"] = r.baseline_seam_metric;
              out["manifold_track_cov"] = r.manifold_track_cov;
              out["manifold_pole_ratio"] = r.manifold_pole_ratio;
              out["baseline_pole_ratio"] = r.baseline_pole_ratio;
              return out;
          },
          py::arg("seed") = 0);

    m.def("leapfrog_rollout",
          [](double q0, double p0, int steps, double gravity, double friction, double h) {
              PendulumParams params;
              params.gravity = gravity;
              params.friction = friction;
              params.step = h;
              Trajectory t = leapfrog_rollout(params, q0, p0, steps);
              return py::make_tuple(t.times, t.q, t.p);
          },
          py::arg("q0"), py::arg("p0"), py::arg("steps"), py::arg("gravity") = 3.0,
          py::arg("friction") = 0.3, py::arg("h") = 0.01);

    m.def("synth_track",
          [](double start_phase_deg, int minutes) { return synth_track(start_phase_deg, minutes); },
          py::arg("start_phase_deg") = 60.0, py::arg("minutes") = 60);
}
