// Python bindings for the discovery engine.
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "lod/category.hpp"
#include "lod/error.hpp"
#include "lod/eval.hpp"
#include "lod/graph.hpp"
#include "lod/neighbors.hpp"
#include "lod/phm.hpp"
#include "lod/pipeline.hpp"
#include "lod/ranking.hpp"
#include "lod/selection.hpp"
#include "lod/storage.hpp"
#include "lod/synth.hpp"

namespace py = pybind11;
using namespace lod;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vector(const Array& a) { return {a.data(), a.data() + a.size()}; }

py::array_t<double> to_array(const std::vector<double>& v) {
  py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

// Rows of a 2-d array as float vectors.
std::vector<std::vector<float>> rows_f(const Array& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-d array");
  std::vector<std::vector<float>> out(a.shape(0));
  auto r = a.unchecked<2>();
  for (py::ssize_t i = 0; i < a.shape(0); ++i)
    for (py::ssize_t j = 0; j < a.shape(1); ++j) out[i].push_back(static_cast<float>(r(i, j)));
  return out;
}

std::vector<std::vector<double>> rows_d(const Array& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-d array");
  std::vector<std::vector<double>> out(a.shape(0));
  auto r = a.unchecked<2>();
  for (py::ssize_t i = 0; i < a.shape(0); ++i)
    for (py::ssize_t j = 0; j < a.shape(1); ++j) out[i].push_back(r(i, j));
  return out;
}

// Off-diagonal blocks of a dense symmetric matrix, keeping the nonzero entries.
BlockAdjacency graph_from_dense(const std::vector<std::size_t>& counts, const Array& w, double gamma, std::size_t chunks) {
  NodeIndex index(counts);
  if (w.ndim() != 2 || static_cast<std::size_t>(w.shape(0)) != index.size() || w.shape(0) != w.shape(1)) {
    throw py::value_error("matrix shape does not match the proposal counts");
  }
  auto r = w.unchecked<2>();
  std::vector<SimilarityBlock> blocks;
  for (std::size_t p = 0; p < counts.size(); ++p) {
    for (std::size_t q = p + 1; q < counts.size(); ++q) {
      SimilarityBlock b{static_cast<std::uint32_t>(p), static_cast<std::uint32_t>(q), static_cast<std::uint32_t>(counts[p]),
                        static_cast<std::uint32_t>(counts[q]), {}};
      for (std::size_t k = 0; k < counts[p]; ++k)
        for (std::size_t l = 0; l < counts[q]; ++l) {
          const double v = r(index.to_global(p, k), index.to_global(q, l));
          if (v != 0.0) b.entries.push_back({static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(l), static_cast<float>(v)});
        }
      if (!b.entries.empty()) blocks.push_back(std::move(b));
    }
  }
  return BlockAdjacency::assemble(index, blocks, gamma, chunks);
}

GroundTruthBoxes gt_of(const std::vector<ImageRecord>& records) { return ground_truth_boxes(records); }

}  // namespace

PYBIND11_MODULE(_lod, m) {
  m.doc() = "Proposal ranking for large-scale unsupervised object discovery.";
  m.attr("__version__") = "0.1.0";

  static py::exception<Error> lod_error(m, "LodError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object err = lod_error;
      PyErr_SetObject(err.ptr(), py::make_tuple(e.what(), exit_code(e.kind())).ptr());
    }
  });

  py::class_<BoundingBox>(m, "BoundingBox")
      .def(py::init<double, double, double, double>(), py::arg("x_min"), py::arg("y_min"), py::arg("x_max"), py::arg("y_max"))
      .def_readwrite("x_min", &BoundingBox::x_min)
      .def_readwrite("y_min", &BoundingBox::y_min)
      .def_readwrite("x_max", &BoundingBox::x_max)
      .def_readwrite("y_max", &BoundingBox::y_max)
      .def_property_readonly("area", &BoundingBox::area)
      .def("__eq__", [](const BoundingBox& a, const BoundingBox& b) { return a == b; })
      .def("__repr__", [](const BoundingBox& b) {
        return "BoundingBox(" + std::to_string(b.x_min) + ", " + std::to_string(b.y_min) + ", " + std::to_string(b.x_max) +
               ", " + std::to_string(b.y_max) + ")";
      });
  m.def("iou", &iou);

  py::enum_<Solver>(m, "Solver")
      .value("QUADRATIC", Solver::Quadratic)
      .value("PAGERANK", Solver::PageRank)
      .value("LOD", Solver::Lod);
  m.def("parse_solver", &parse_solver);

  py::class_<Proposal>(m, "Proposal")
      .def(py::init<>())
      .def_readwrite("box", &Proposal::box)
      .def_readwrite("feature", &Proposal::feature)
      .def_readwrite("group_id", &Proposal::group_id)
      .def_readwrite("saliency", &Proposal::saliency);
  py::class_<GroundTruthObject>(m, "GroundTruthObject")
      .def(py::init<>())
      .def_readwrite("box", &GroundTruthObject::box)
      .def_readwrite("label", &GroundTruthObject::label);
  py::class_<ImageRecord>(m, "ImageRecord")
      .def(py::init<>())
      .def_readwrite("image_id", &ImageRecord::image_id)
      .def_readwrite("width", &ImageRecord::width)
      .def_readwrite("height", &ImageRecord::height)
      .def_readwrite("proposals", &ImageRecord::proposals)
      .def_readwrite("image_feature", &ImageRecord::image_feature)
      .def_readwrite("ground_truth", &ImageRecord::ground_truth);

  py::class_<SynthConfig>(m, "SynthConfig")
      .def(py::init<>())
      .def_readwrite("seed", &SynthConfig::seed)
      .def_readwrite("n_images", &SynthConfig::n_images)
      .def_readwrite("proposals_per_image", &SynthConfig::proposals_per_image)
      .def_readwrite("feature_dim", &SynthConfig::feature_dim)
      .def_readwrite("n_classes", &SynthConfig::n_classes)
      .def_readwrite("class_skew", &SynthConfig::class_skew)
      .def_readwrite("signal_strength", &SynthConfig::signal_strength)
      .def_readwrite("noise_sigma", &SynthConfig::noise_sigma)
      .def_readwrite("planted_per_image", &SynthConfig::planted_per_image)
      .def_readwrite("geometry_jitter", &SynthConfig::geometry_jitter)
      .def_readwrite("objectness_share", &SynthConfig::objectness_share)
      .def_readwrite("parts_per_object", &SynthConfig::parts_per_object)
      .def_readwrite("part_strength", &SynthConfig::part_strength)
      .def_readwrite("containers_per_object", &SynthConfig::containers_per_object)
      .def_readwrite("container_object_share", &SynthConfig::container_object_share)
      .def_readwrite("context_strength", &SynthConfig::context_strength)
      .def_readwrite("context_fraction", &SynthConfig::context_fraction)
      .def_readwrite("context_spread", &SynthConfig::context_spread);
  py::class_<SynthDataset>(m, "SynthDataset")
      .def_readonly("config", &SynthDataset::config)
      .def_readonly("records", &SynthDataset::records)
      .def_readonly("planted", &SynthDataset::planted)
      .def_readonly("classes", &SynthDataset::classes);
  m.def("generate_synthetic", &generate_synthetic, py::arg("config") = SynthConfig{});
  m.def("write_synthetic", &write_synthetic, py::arg("dir"), py::arg("data"));

  py::class_<storage::Dataset>(m, "Dataset")
      .def_static("open", &storage::Dataset::open)
      .def("__len__", &storage::Dataset::size)
      .def("load", &storage::Dataset::load)
      .def("load_all", &storage::Dataset::load_all)
      .def("validate", [](const storage::Dataset& ds) {
        py::list out;
        for (const auto& v : ds.validate().violations) out.append(py::make_tuple(v.image_id, to_string(v.kind), v.message));
        return out;
      });

  m.def(
      "find_neighbors",
      [](const Array& descriptors, std::size_t k, std::size_t workers) {
        return find_neighbors(rows_f(descriptors), k, workers).neighbors;
      },
      py::arg("descriptors"), py::arg("k"), py::arg("workers") = 1);

  py::class_<HoughConfig>(m, "HoughConfig")
      .def(py::init<>())
      .def_readwrite("translation_bins", &HoughConfig::translation_bins)
      .def_readwrite("scale_bins", &HoughConfig::scale_bins)
      .def_readwrite("scale_range", &HoughConfig::scale_range)
      .def_readwrite("score_threshold", &HoughConfig::score_threshold);
  m.def(
      "phm_scores",
      [](const ImageRecord& p, const ImageRecord& q, const HoughConfig& cfg) {
        const auto b = phm_block(p, q, cfg);
        py::array_t<double> dense({static_cast<py::ssize_t>(b.rows), static_cast<py::ssize_t>(b.cols)});
        auto w = dense.mutable_unchecked<2>();
        for (py::ssize_t i = 0; i < dense.shape(0); ++i)
          for (py::ssize_t j = 0; j < dense.shape(1); ++j) w(i, j) = 0.0;
        for (const auto& e : b.entries) w(e.k, e.l) = e.score;
        return dense;
      },
      py::arg("p"), py::arg("q"), py::arg("config") = HoughConfig{},
      "Dense score matrix between the proposals of two images.");

  py::class_<BlockAdjacency>(m, "ProposalGraph")
      .def_static("from_dense", &graph_from_dense, py::arg("counts"), py::arg("matrix"), py::arg("gamma") = 1e-4,
                  py::arg("chunks") = 1)
      .def_property_readonly("size", &BlockAdjacency::size)
      .def_property_readonly("degrees", [](const BlockAdjacency& g) {
        return to_array(std::vector<double>(g.degrees().begin(), g.degrees().end()));
      })
      .def("matvec", [](const BlockAdjacency& g, const Array& x, std::size_t workers) { return to_array(g.matvec(to_vector(x), workers)); },
           py::arg("x"), py::arg("workers") = 1)
      .def("to_dense", [](const BlockAdjacency& g) {
        auto d = g.to_dense();
        py::array_t<double> out({static_cast<py::ssize_t>(g.size()), static_cast<py::ssize_t>(g.size())});
        std::copy(d.begin(), d.end(), out.mutable_data());
        return out;
      });

  py::class_<RankingConfig>(m, "RankingConfig")
      .def(py::init<>())
      .def_readwrite("beta", &RankingConfig::beta)
      .def_readwrite("gamma", &RankingConfig::gamma)
      .def_readwrite("alpha", &RankingConfig::alpha)
      .def_readwrite("iterations", &RankingConfig::iterations)
      .def_readwrite("tolerance", &RankingConfig::tolerance)
      .def_readwrite("workers", &RankingConfig::workers);
  py::class_<RankVector>(m, "RankVector")
      .def_property_readonly("scores", [](const RankVector& r) { return to_array(r.scores); })
      .def_readonly("solver", &RankVector::solver)
      .def_readonly("iterations", &RankVector::iterations)
      .def_readonly("eigenvalue", &RankVector::eigenvalue);
  m.def("solve_quadratic", &solve_quadratic, py::arg("graph"), py::arg("config") = RankingConfig{});
  m.def(
      "solve_pagerank",
      [](const BlockAdjacency& g, const RankingConfig& cfg, std::optional<Array> u, std::optional<Array> v0) {
        if (!u && !v0) return solve_pagerank(g, cfg);
        const auto uu = u ? to_vector(*u) : std::vector<double>(g.size(), 1.0 / static_cast<double>(g.size()));
        const auto vv = v0 ? to_vector(*v0) : uu;
        return solve_pagerank(g, uu, vv, cfg);
      },
      py::arg("graph"), py::arg("config") = RankingConfig{}, py::arg("u") = py::none(), py::arg("v0") = py::none());
  m.def(
      "solve_lod",
      [](const BlockAdjacency& g, const Array& areas, const RankingConfig& cfg) {
        auto sol = solve_lod(g, to_vector(areas), cfg);
        py::dict d;
        d["quadratic"] = sol.quadratic;
        d["ranking"] = sol.ranking;
        d["support"] = sol.personalization.support;
        d["u"] = to_array(sol.personalization.u);
        return d;
      },
      py::arg("graph"), py::arg("node_areas"), py::arg("config") = RankingConfig{});
  m.def("node_areas", [](const std::vector<ImageRecord>& records) { return to_array(node_areas(records)); });

  py::class_<SelectionParams>(m, "SelectionParams")
      .def(py::init<>())
      .def_readwrite("max_regions", &SelectionParams::max_regions)
      .def_readwrite("iou_threshold", &SelectionParams::iou_threshold)
      .def_readwrite("use_groups", &SelectionParams::use_groups);
  py::class_<Selection>(m, "Selection")
      .def_readonly("proposal", &Selection::proposal)
      .def_readonly("score", &Selection::score)
      .def_readonly("box", &Selection::box)
      .def_readonly("group_id", &Selection::group_id);
  py::class_<ImageDetections>(m, "ImageDetections")
      .def_readonly("image_id", &ImageDetections::image_id)
      .def_readonly("selections", &ImageDetections::selections);
  py::class_<DiscoveryResult>(m, "DiscoveryResult")
      .def_readonly("params", &DiscoveryResult::params)
      .def_readonly("images", &DiscoveryResult::images);
  m.def(
      "select_all",
      [](const std::vector<ImageRecord>& records, const Array& scores, const SelectionParams& params) {
        return select_all(records, NodeIndex::from_records(records), to_vector(scores), params);
      },
      py::arg("records"), py::arg("scores"), py::arg("params") = SelectionParams{});
  m.def("single_object_view", &single_object_view);

  m.def(
      "corloc", [](const DiscoveryResult& r, const std::vector<ImageRecord>& rec, double sigma) { return corloc(r, gt_of(rec), sigma); },
      py::arg("result"), py::arg("records"), py::arg("sigma") = 0.5);
  m.def(
      "average_precision",
      [](const DiscoveryResult& r, const std::vector<ImageRecord>& rec, double sigma, std::size_t max_m) {
        return average_precision(r, gt_of(rec), sigma, max_m);
      },
      py::arg("result"), py::arg("records"), py::arg("sigma") = 0.5, py::arg("max_m") = 0);
  m.def(
      "det_rate",
      [](const DiscoveryResult& r, const std::vector<ImageRecord>& rec, std::size_t m, double sigma) {
        return det_rate(r, gt_of(rec), m, sigma);
      },
      py::arg("result"), py::arg("records"), py::arg("m"), py::arg("sigma") = 0.5);

  m.def(
      "kmeans",
      [](const Array& points, std::size_t k, std::uint64_t seed, std::size_t iterations) {
        const auto c = kmeans(rows_d(points), k, seed, iterations);
        return py::make_tuple(c.assignment, c.centroids, c.objective);
      },
      py::arg("points"), py::arg("k"), py::arg("seed") = 0, py::arg("iterations") = 100);
  m.def("purity", [](const std::vector<std::uint32_t>& a, const std::vector<std::string>& labels) { return purity(a, labels); });
  m.def("match_clusters", [](const std::vector<std::vector<double>>& hist) {
    const auto mt = match_clusters(hist);
    return py::make_tuple(mt.class_of_cluster, mt.cluster_of_class);
  });

  py::class_<PipelineConfig>(m, "PipelineConfig")
      .def(py::init<>())
      .def_static("from_json", &PipelineConfig::from_json)
      .def("to_json", &PipelineConfig::to_json)
      .def_readwrite("dataset", &PipelineConfig::dataset)
      .def_readwrite("work_dir", &PipelineConfig::work_dir)
      .def_readwrite("neighbors_k", &PipelineConfig::neighbors_k)
      .def_readwrite("hough", &PipelineConfig::hough)
      .def_readwrite("ranking", &PipelineConfig::ranking)
      .def_readwrite("solver", &PipelineConfig::solver)
      .def_readwrite("max_regions", &PipelineConfig::max_regions)
      .def_readwrite("workers", &PipelineConfig::workers)
      .def_readwrite("synth", &PipelineConfig::synth);
  py::class_<StageResult>(m, "StageResult")
      .def_readonly("stage", &StageResult::stage)
      .def_readonly("skipped", &StageResult::skipped)
      .def_readonly("outputs", &StageResult::outputs);
  py::class_<Pipeline>(m, "Pipeline")
      .def(py::init<PipelineConfig, Pipeline::Logger>(), py::arg("config"), py::arg("log") = Pipeline::Logger{})
      .def("synth", &Pipeline::synth)
      .def("neighbors", &Pipeline::neighbors)
      .def("similarities", &Pipeline::similarities)
      .def("rank", &Pipeline::rank)
      .def("select", &Pipeline::select)
      .def("evaluate", &Pipeline::evaluate)
      .def("cluster", &Pipeline::cluster)
      .def("run_all", &Pipeline::run_all)
      .def_property_readonly("metrics_path", &Pipeline::metrics_path);
}
