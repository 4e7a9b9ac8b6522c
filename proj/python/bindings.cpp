#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "chorus/dsp.hpp"
#include "chorus/error.hpp"
#include "chorus/eval.hpp"
#include "chorus/features.hpp"
#include "chorus/frame_select.hpp"
#include "chorus/knn.hpp"
#include "chorus/pipeline.hpp"
#include "chorus/trainstore.hpp"

namespace py = pybind11;
using namespace chorus;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

AudioClip clip_from(const DoubleArray& samples, std::uint32_t sample_rate) {
  if (samples.ndim() != 1) throw std::invalid_argument("samples must be one-dimensional");
  AudioClip clip;
  clip.samples.assign(samples.data(), samples.data() + samples.size());
  clip.sample_rate = sample_rate;
  return clip;
}

DoubleArray to_array(const std::vector<double>& v) { return DoubleArray(static_cast<py::ssize_t>(v.size()), v.data()); }

using BoolArray = py::array_t<bool, py::array::c_style | py::array::forcecast>;

std::span<const double> view(const DoubleArray& a) { return {a.data(), static_cast<std::size_t>(a.size())}; }
std::span<const bool> view(const BoolArray& a) { return {a.data(), static_cast<std::size_t>(a.size())}; }

}  // namespace

PYBIND11_MODULE(_chorus, m) {
  m.doc() = "Spectral histogram features and kNN ranking for bird sound identification";

  static py::exception<Error> error(m, "Error", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error)(e.what());
      exc.attr("kind") = std::string(to_string(e.kind()));
      PyErr_SetObject(error.ptr(), exc.ptr());
    }
  });

  py::enum_<FeatureKind>(m, "FeatureKind")
      .value("MEANSTD2D", FeatureKind::MeanStd2D)
      .value("MODE1D", FeatureKind::Mode1D)
      .value("MODEDELTA2D", FeatureKind::ModeDelta2D)
      .value("SUMMARY6", FeatureKind::Summary6);
  m.def("parse_feature_kind", [](const std::string& s) { return parse_feature_kind(s); });

  py::enum_<Metric>(m, "Metric").value("L1", Metric::L1).value("KL", Metric::KL).value("HELLINGER", Metric::Hellinger);
  m.def("parse_metric", [](const std::string& s) { return parse_metric(s); });

  m.def("fft_size_for", &fft_size_for, py::arg("sample_rate"));

  m.def(
      "read_wav",
      [](const std::string& path) {
        AudioClip clip = read_wav_file(path);
        return py::make_tuple(to_array(clip.samples), clip.sample_rate);
      },
      py::arg("path"), "Returns (mono float64 samples, sample rate).");
  m.def(
      "write_wav",
      [](const std::string& path, const DoubleArray& samples, std::uint32_t sample_rate) {
        write_wav_file(path, view(samples), sample_rate);
      },
      py::arg("path"), py::arg("samples"), py::arg("sample_rate"));

  py::class_<Spectrogram>(m, "Spectrogram")
      .def_property_readonly("magnitudes",
                             [](const Spectrogram& s) {
                               DoubleArray a({static_cast<py::ssize_t>(s.n_frames()), static_cast<py::ssize_t>(s.n_bins())});
                               std::copy(s.magnitudes.begin(), s.magnitudes.end(), a.mutable_data());
                               return a;
                             })
      .def_property_readonly("freqs", [](const Spectrogram& s) { return to_array(s.freqs); })
      .def_property_readonly("frame_power", [](const Spectrogram& s) { return to_array(s.frame_power); })
      .def_readonly("nfft", &Spectrogram::nfft)
      .def_readonly("frame_length", &Spectrogram::frame_length)
      .def_readonly("hop", &Spectrogram::hop)
      .def_readonly("sample_rate", &Spectrogram::sample_rate)
      .def_property_readonly("n_frames", &Spectrogram::n_frames)
      .def_property_readonly("n_bins", &Spectrogram::n_bins);

  m.def(
      "spectrogram", [](const DoubleArray& samples, std::uint32_t rate) { return compute_spectrogram(clip_from(samples, rate)); },
      py::arg("samples"), py::arg("sample_rate"));

  m.def(
      "select_frames",
      [](const DoubleArray& power) {
        auto mask = select_frames(view(power));
        py::array_t<bool> out(static_cast<py::ssize_t>(mask.selected.size()));
        for (std::size_t i = 0; i < mask.selected.size(); ++i) out.mutable_at(static_cast<py::ssize_t>(i)) = mask.selected[i];
        return py::make_tuple(out, mask.threshold);
      },
      py::arg("frame_power"), "Returns (selected mask, power threshold).");

  py::class_<FeatureVector>(m, "FeatureVector")
      .def_property_readonly("kind", &FeatureVector::kind)
      .def_property_readonly("indices",
                             [](const FeatureVector& v) { return std::vector<std::uint32_t>(v.indices().begin(), v.indices().end()); })
      .def_property_readonly("counts",
                             [](const FeatureVector& v) { return std::vector<std::uint32_t>(v.counts().begin(), v.counts().end()); })
      .def_property_readonly("masses", [](const FeatureVector& v) {
        return to_array(std::vector<double>(v.masses().begin(), v.masses().end()));
      })
      .def_property_readonly("dimension", &FeatureVector::dimension)
      .def("dense", [](const FeatureVector& v) { return to_array(v.dense()); })
      .def("__eq__", [](const FeatureVector& a, const FeatureVector& b) { return a == b; });

  m.def(
      "features",
      [](const DoubleArray& samples, std::uint32_t rate, FeatureKind kind, bool select) {
        const AudioClip clip = clip_from(samples, rate);
        if (!select) return query_features(clip, kind);
        return aggregate(selected_frame_features(clip), kind);
      },
      py::arg("samples"), py::arg("sample_rate"), py::arg("kind") = FeatureKind::Mode1D, py::arg("select") = false,
      "Aggregate a whole recording; with select=True only frames passing the power threshold are used.");

  m.def(
      "distance", [](const FeatureVector& a, const FeatureVector& b, Metric metric) { return distance(a, b, metric); },
      py::arg("a"), py::arg("b"), py::arg("metric") = Metric::L1);

  py::class_<TrainingStore>(m, "TrainingStore")
      .def_static("load", &load_store_file, py::arg("path"))
      .def("save", [](const TrainingStore& s, const std::string& path) { save_store_file(s, path); }, py::arg("path"))
      .def_property_readonly("feature_kind", &TrainingStore::feature_kind)
      .def_property_readonly("labels", &TrainingStore::labels)
      .def_property_readonly("n_classes", &TrainingStore::n_classes)
      .def_property_readonly("per_class", &TrainingStore::per_class)
      .def_property_readonly("instance_frames", &TrainingStore::instance_frames)
      .def_property_readonly("seed", &TrainingStore::seed)
      .def("__len__", &TrainingStore::size)
      .def("instance", [](const TrainingStore& s, std::size_t i) {
        if (i >= s.size()) throw py::index_error();
        return s.instance(i);
      })
      .def("class_id", &TrainingStore::class_id, py::arg("label"));

  m.def(
      "build_store",
      [](const std::vector<std::tuple<std::string, std::string, std::string>>& recordings, FeatureKind kind,
         std::size_t instance_frames, std::optional<std::size_t> target, std::uint64_t seed, std::size_t jobs) {
        std::vector<AudioSource> sources;
        for (const auto& [species, id, path] : recordings) {
          sources.push_back({species, id, [path] { return read_wav_file(path); }});
        }
        BuildOptions opts{kind, instance_frames, target, seed, jobs};
        py::gil_scoped_release release;
        return build_store(sources, opts);
      },
      py::arg("recordings"), py::arg("kind") = FeatureKind::Mode1D, py::arg("instance_frames") = kDefaultInstanceFrames,
      py::arg("target") = std::nullopt, py::arg("seed") = 0, py::arg("jobs") = 1,
      "Build a balanced store from (species, recording_id, wav_path) tuples.");

  py::class_<Posterior>(m, "Posterior")
      .def_readonly("classes", &Posterior::classes)
      .def_readonly("probs", &Posterior::probs)
      .def_readonly("biased_scores", &Posterior::biased_scores)
      .def_readonly("ranking", &Posterior::ranking)
      .def_readonly("nearest_order", &Posterior::nearest_order)
      .def_readonly("entropy", &Posterior::entropy)
      .def_readonly("normalized_entropy", &Posterior::normalized_entropy)
      .def_property_readonly("neighbours",
                             [](const Posterior& p) {
                               py::list out;
                               for (const auto& n : p.neighbours) out.append(py::make_tuple(n.class_id, n.instance, n.distance));
                               return out;
                             })
      .def("prob_of", &Posterior::prob_of)
      .def("rank_of", &Posterior::rank_of);

  m.def(
      "classify",
      [](const FeatureVector& query, const TrainingStore& store, std::size_t k, Metric metric, double tie_bias_m,
         std::optional<std::vector<std::uint32_t>> candidates) {
        ClassifierConfig cfg{k, metric, tie_bias_m, std::move(candidates)};
        return classify(query, store, cfg);
      },
      py::arg("query"), py::arg("store"), py::arg("k") = 5, py::arg("metric") = Metric::L1, py::arg("tie_bias_m") = 2.0,
      py::arg("candidates") = std::nullopt);

  m.def(
      "auc_roc",
      [](const DoubleArray& scores, const BoolArray& positive) { return auc_roc(view(scores), view(positive)); },
      py::arg("scores"), py::arg("positive"));
  m.def(
      "average_precision",
      [](const DoubleArray& scores, const BoolArray& positive) {
        return average_precision(view(scores), view(positive));
      },
      py::arg("scores"), py::arg("positive"));

  m.attr("__version__") = "0.1.0";
}
