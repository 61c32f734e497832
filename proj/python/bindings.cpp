// Python bindings for the terrain reconstruction core. Point clouds cross
// the boundary as (N, 3) float32 arrays; sparse tensors as a dict of
// coordinate / feature arrays.

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "trec/augment.hpp"
#include "trec/checkpoint_io.hpp"
#include "trec/config.hpp"
#include "trec/icp.hpp"
#include "trec/pipeline.hpp"
#include "trec/train.hpp"

namespace py = pybind11;
using namespace trec;

namespace {

using ArrayX3f = py::array_t<float, py::array::c_style | py::array::forcecast>;

PointCloud cloud_from_array(const ArrayX3f& arr, Frame frame) {
    TREC_CHECK(arr.ndim() == 2 && arr.shape(1) == 3, "expected an (N, 3) array");
    PointCloud cloud;
    cloud.frame = frame;
    cloud.points.reserve(static_cast<size_t>(arr.shape(0)));
    auto a = arr.unchecked<2>();
    for (py::ssize_t i = 0; i < arr.shape(0); ++i) {
        cloud.points.emplace_back(a(i, 0), a(i, 1), a(i, 2));
    }
    return cloud;
}

py::array_t<float> cloud_to_array(const PointCloud& cloud) {
    py::array_t<float> arr({static_cast<py::ssize_t>(cloud.points.size()), py::ssize_t(3)});
    auto a = arr.mutable_unchecked<2>();
    for (size_t i = 0; i < cloud.points.size(); ++i) {
        a(static_cast<py::ssize_t>(i), 0) = cloud.points[i].x();
        a(static_cast<py::ssize_t>(i), 1) = cloud.points[i].y();
        a(static_cast<py::ssize_t>(i), 2) = cloud.points[i].z();
    }
    return arr;
}

py::dict tensor_to_dict(const SparseTensor& t) {
    const auto& coords = t.coords->coords();
    py::array_t<int32_t> carr({static_cast<py::ssize_t>(coords.size()), py::ssize_t(4)});
    auto c = carr.mutable_unchecked<2>();
    for (size_t i = 0; i < coords.size(); ++i) {
        for (int a = 0; a < 4; ++a) c(static_cast<py::ssize_t>(i), a) = coords[i][a];
    }
    py::array_t<float> farr({static_cast<py::ssize_t>(t.feats.rows()),
                             static_cast<py::ssize_t>(t.feats.cols())});
    auto f = farr.mutable_unchecked<2>();
    for (Eigen::Index i = 0; i < t.feats.rows(); ++i) {
        for (Eigen::Index j = 0; j < t.feats.cols(); ++j) {
            f(static_cast<py::ssize_t>(i), static_cast<py::ssize_t>(j)) = t.feats(i, j);
        }
    }
    py::dict d;
    d["coords"] = carr;
    d["features"] = farr;
    d["tensor_stride"] = py::make_tuple(t.stride()[0], t.stride()[1], t.stride()[2],
                                        t.stride()[3]);
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "sparse 4D terrain reconstruction core";

    py::class_<Pose>(m, "Pose")
        .def(py::init<>())
        .def(py::init([](const Vec3& t, const Eigen::Vector4d& qxyzw) {
                 return Pose(t, Quat(qxyzw.w(), qxyzw.x(), qxyzw.y(), qxyzw.z()));
             }),
             py::arg("translation"), py::arg("quaternion_xyzw"))
        .def_property_readonly("translation", [](const Pose& p) { return p.t; })
        .def_property_readonly("quaternion_xyzw",
                               [](const Pose& p) {
                                   return Eigen::Vector4d(p.q.x(), p.q.y(), p.q.z(), p.q.w());
                               })
        .def("apply", [](const Pose& p, const Vec3& v) { return p.apply(v); })
        .def_static("planar", &Pose::planar, py::arg("x"), py::arg("y"), py::arg("z"),
                    py::arg("yaw"));

    m.def("compose", &compose);
    m.def("inverse", &inverse);
    m.def("relative_transform", &relative_transform, py::arg("prev_pose"), py::arg("cur_pose"));
    m.def(
        "transform_points",
        [](const Pose& p, const ArrayX3f& pts) {
            return cloud_to_array(transform_points(p, cloud_from_array(pts, Frame::world)));
        },
        py::arg("pose"), py::arg("points"));

    py::class_<GridConfig>(m, "GridConfig")
        .def(py::init<>())
        .def_readwrite("dim", &GridConfig::dim)
        .def_readwrite("cell_size", &GridConfig::cell_size)
        .def_property(
            "origin", [](const GridConfig& g) { return g.origin; },
            [](GridConfig& g, const Vec3f& o) { g.origin = o; })
        .def_static("robot_centric", &GridConfig::robot_centric, py::arg("dim"),
                    py::arg("cell_size"))
        .def_static("centered", &GridConfig::centered, py::arg("dim"), py::arg("cell_size"),
                    py::arg("center"));

    m.def(
        "voxelize",
        [](const ArrayX3f& pts, const GridConfig& cfg, int k) {
            const auto res = voxelize_cloud(cloud_from_array(pts, Frame::robot), cfg, k);
            py::dict d = tensor_to_dict(res.tensor);
            d["dropped"] = res.dropped;
            return d;
        },
        py::arg("points"), py::arg("cfg"), py::arg("k"),
        "sub-voxel centroid voxelization of world/robot-frame points");
    m.def(
        "devoxelize",
        [](const py::array_t<int32_t>& coords, const ArrayX3f& feats, const GridConfig& cfg) {
            auto cs = make_coord_set();
            auto c = coords.unchecked<2>();
            for (py::ssize_t i = 0; i < coords.shape(0); ++i) {
                cs->insert(Coord4{c(i, 0), c(i, 1), c(i, 2), c(i, 3)});
            }
            MatXf f(feats.shape(0), feats.shape(1));
            auto fa = feats.unchecked<2>();
            for (py::ssize_t i = 0; i < feats.shape(0); ++i) {
                for (py::ssize_t j = 0; j < feats.shape(1); ++j) {
                    f(i, j) = fa(i, j);
                }
            }
            return cloud_to_array(devoxelize(SparseTensor(cs, f), cfg));
        },
        py::arg("coords"), py::arg("features"), py::arg("cfg"));

    py::class_<ModelSpec>(m, "ModelSpec")
        .def_static("paper", &ModelSpec::paper)
        .def_static("desk", &ModelSpec::desk)
        .def_readwrite("grid_dim", &ModelSpec::grid_dim)
        .def_readwrite("cell_size", &ModelSpec::cell_size)
        .def_readwrite("alpha", &ModelSpec::alpha);

    py::class_<Model>(m, "Model")
        .def(py::init<const ModelSpec&, uint64_t>(), py::arg("spec"), py::arg("seed"))
        .def_property_readonly("spec", &Model::spec)
        .def("parameter_count", &Model::parameter_count)
        .def(
            "forward",
            [](Model& model, const ArrayX3f& measurement, const ArrayX3f& previous,
               float alpha) {
                ad::NoGradGuard no_grad;
                const GridConfig cfg =
                    GridConfig::robot_centric(model.spec().grid_dim, model.spec().cell_size);
                const SparseTensor meas =
                    voxelize_cloud(cloud_from_array(measurement, Frame::robot), cfg, 0).tensor;
                const SparseTensor prev =
                    voxelize_cloud(cloud_from_array(previous, Frame::robot), cfg, 1).tensor;
                const SparseTensor input = temporal_concat(meas, prev);
                Model::Forward fwd = model.forward(input, alpha, false);
                py::dict d = tensor_to_dict(to_tensor(fwd.estimate));
                PointCloud est = devoxelize(to_tensor(fwd.estimate), cfg);
                d["points"] = cloud_to_array(est);
                d["truncated"] = fwd.truncated;
                return d;
            },
            py::arg("measurement"), py::arg("previous"), py::arg("alpha") = 0.5f,
            "single-step inference on robot-frame clouds");

    m.def("save_model", [](const std::string& path, Model& model) { save_model(path, model); });
    m.def("load_model", [](const std::string& path, Model& model) { load_model(path, model); });

    py::class_<sim::SceneParams>(m, "SceneParams").def(py::init<>());
    py::class_<sim::Scene>(m, "Scene")
        .def("height_at", &sim::Scene::height_at)
        .def_property_readonly("num_boxes",
                               [](const sim::Scene& s) { return s.boxes.size(); });
    m.def("generate_scene", &sim::generate_scene, py::arg("params"), py::arg("seed"));
    m.def(
        "render_measurement",
        [](const sim::Scene& scene, const Pose& robot) {
            return cloud_to_array(
                sim::render_measurement(scene, robot, sim::default_camera_rig()));
        },
        py::arg("scene"), py::arg("robot_pose"), "robot-frame depth rig measurement");
    m.def(
        "sample_ground_truth",
        [](const sim::Scene& scene, const Vec3& center, float extent, double density,
           uint64_t seed) {
            return cloud_to_array(sim::sample_ground_truth(scene, center, extent, density, seed));
        },
        py::arg("scene"), py::arg("center"), py::arg("extent"), py::arg("density"),
        py::arg("seed"));

    m.def(
        "remove_fraction",
        [](const ArrayX3f& pts, double fraction, uint64_t seed) {
            return cloud_to_array(
                remove_fraction(cloud_from_array(pts, Frame::robot), fraction, seed));
        },
        py::arg("points"), py::arg("fraction"), py::arg("seed"));

    py::class_<MetricsRecord>(m, "MetricsRecord")
        .def_readonly("precision", &MetricsRecord::precision)
        .def_readonly("recall", &MetricsRecord::recall)
        .def_readonly("f1", &MetricsRecord::f1)
        .def_readonly("mae_cm", &MetricsRecord::mae_cm)
        .def_readonly("tp", &MetricsRecord::tp)
        .def_readonly("fp", &MetricsRecord::fp)
        .def_readonly("fn", &MetricsRecord::fn)
        .def_readonly("empty_pred", &MetricsRecord::empty_pred)
        .def_readonly("mae_valid", &MetricsRecord::mae_valid);
    m.def(
        "occupancy_metrics",
        [](const ArrayX3f& pred, const ArrayX3f& gt, const GridConfig& cfg) {
            return occupancy_metrics(cloud_from_array(pred, Frame::world),
                                     cloud_from_array(gt, Frame::world), cfg);
        },
        py::arg("pred"), py::arg("gt"), py::arg("cfg"));
    m.def(
        "evaluate_frame",
        [](const ArrayX3f& pred, const ArrayX3f& gt, const GridConfig& cfg) {
            return evaluate_frame(cloud_from_array(pred, Frame::world),
                                  cloud_from_array(gt, Frame::world), cfg);
        },
        py::arg("pred"), py::arg("gt"), py::arg("cfg"));

    py::class_<IcpResult>(m, "IcpResult")
        .def_readonly("pose", &IcpResult::pose)
        .def_readonly("rmse", &IcpResult::rmse)
        .def_readonly("iterations", &IcpResult::iterations)
        .def_readonly("converged", &IcpResult::converged);
    m.def(
        "icp_align",
        [](const ArrayX3f& source, const ArrayX3f& target, const Pose& init, int max_iter,
           double tol) {
            return icp_align(cloud_from_array(source, Frame::world),
                             cloud_from_array(target, Frame::world), init, max_iter, tol);
        },
        py::arg("source"), py::arg("target"), py::arg("init") = Pose(),
        py::arg("max_iter") = 50, py::arg("tol") = 1e-6);
}
