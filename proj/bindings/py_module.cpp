// Python bindings over the main operations: token accounting, frame stacking,
// softmax, WER, SNR mixing, normalization, masking, LoRA parameter counting
// and the LR schedule. Arrays cross the boundary as float64 numpy arrays.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tinyavsr/data.hpp"
#include "tinyavsr/lora.hpp"
#include "tinyavsr/projector.hpp"
#include "tinyavsr/tokenizer.hpp"
#include "tinyavsr/train.hpp"
#include "tinyavsr/wer.hpp"

namespace py = pybind11;
using namespace avsr;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor64 to_tensor(const Array& a) {
    if (a.ndim() != 2) throw ShapeError("expected a 2-D array");
    const int rows = static_cast<int>(a.shape(0)), cols = static_cast<int>(a.shape(1));
    std::vector<double> data(a.data(), a.data() + a.size());
    return Tensor64::from_vector({rows, cols}, std::move(data));
}

Array from_tensor(const Tensor64& t) {
    Array out({static_cast<py::ssize_t>(t.rows()), static_cast<py::ssize_t>(t.cols())});
    std::copy(t.data().begin(), t.data().end(), out.mutable_data());
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "tinyavsr core operations";

    m.def("token_budget", &token_budget, py::arg("duration_s"), py::arg("frame_rate"),
          py::arg("k"),
          "Number of LLM tokens a clip yields: ceil(duration_s * frame_rate / k).");
    m.def("token_count", &token_count, py::arg("frames"), py::arg("k"),
          "ceil(frames / k) on an integer frame count.");

    m.def(
        "stack_compress",
        [](const Array& features, int k) { return from_tensor(stack_compress(to_tensor(features), k)); },
        py::arg("features"), py::arg("k"),
        "Concatenate k consecutive frames along the feature axis (zero-padded tail).");

    m.def(
        "softmax_with_temperature",
        [](const Array& logits, double tau) {
            return from_tensor(softmax_with_temperature(to_tensor(logits), tau));
        },
        py::arg("logits"), py::arg("tau"));

    m.def(
        "wer",
        [](const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
            return wer(ref, hyp);
        },
        py::arg("reference"), py::arg("hypothesis"),
        "(substitutions + deletions + insertions) / len(reference).");

    m.def(
        "mix_noise_at_snr",
        [](const Array& clean, const Array& noise, double snr_db) {
            return from_tensor(mix_noise_at_snr(to_tensor(clean), to_tensor(noise), snr_db));
        },
        py::arg("clean"), py::arg("noise"), py::arg("snr_db"),
        "clean + g*noise with g set so the output hits snr_db exactly (inf = pass-through).");

    m.def(
        "measure_snr_db",
        [](const Array& clean, const Array& mixed) {
            return measure_snr_db(to_tensor(clean), to_tensor(mixed));
        },
        py::arg("clean"), py::arg("mixed"));

    m.def(
        "z_normalize",
        [](const Array& x) { return from_tensor(z_normalize(to_tensor(x))); }, py::arg("x"),
        "Per-utterance standardization to zero mean, unit deviation.");

    m.def(
        "adaptive_time_mask",
        [](const Array& x, double rho, uint64_t seed) {
            Rng rng(seed);
            return from_tensor(adaptive_time_mask(to_tensor(x), rho, rng));
        },
        py::arg("x"), py::arg("rho"), py::arg("seed") = 1,
        "Masks up to floor(rho*T) frames across max(1, T//25) spans.");

    m.def(
        "count_lora_params",
        [](int rank, const std::vector<std::pair<int, int>>& shapes) {
            return count_lora_params(rank, shapes);
        },
        py::arg("rank"), py::arg("target_shapes"),
        "Sum of rank * (d_in + d_out) over the adapted matrices.");

    m.def("cosine_lr", &cosine_lr, py::arg("step"), py::arg("total_steps"), py::arg("lr_peak"),
          py::arg("warmup_fraction"),
          "Linear warmup then cosine decay to zero.");

    m.def(
        "prompt_text",
        [](const std::string& task) {
            Tokenizer tok(32);
            return build_prompt(task_from_name(task), tok).text;
        },
        py::arg("task"), "The exact instruction prompt for asr/vsr/avsr.");

    m.attr("__version__") = "0.1.0";
}
