#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pdfold/checkpoint.hpp"
#include "pdfold/evaluation.hpp"
#include "pdfold/io.hpp"
#include "pdfold/losses.hpp"
#include "pdfold/oracle.hpp"
#include "pdfold/pipeline.hpp"
#include "pdfold/ppnet.hpp"

namespace py = pybind11;
using namespace pdfold;

namespace {

py::array_t<double> mat_to_numpy(const Mat& m) {
    py::array_t<double> out({m.rows(), m.cols()});
    std::memcpy(out.mutable_data(), m.data(), m.size() * sizeof(double));
    return out;
}

Mat numpy_to_mat(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw std::invalid_argument("expected a 2-D array");
    Mat m(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
    std::memcpy(m.data(), a.data(), m.size() * sizeof(double));
    return m;
}

using Pairs = std::vector<std::pair<int, int>>;

PairSet pairs_from_list(const Pairs& pairs) { return PairSet::from_pairs(pairs); }

RnaSequence seq_from_str(const std::string& letters) {
    return RnaSequence::from_letters(letters);
}

PpParams pp_from_kwargs(const py::dict& kw) {
    PpParams p;
    for (const auto& item : kw) {
        const std::string key = py::cast<std::string>(item.first);
        if (key == "w") p.w = py::cast<double>(item.second);
        else if (key == "s") p.s = py::cast<double>(item.second);
        else if (key == "alpha") p.alpha = py::cast<double>(item.second);
        else if (key == "beta") p.beta = py::cast<double>(item.second);
        else if (key == "gamma_alpha") p.gamma_alpha = py::cast<double>(item.second);
        else if (key == "gamma_beta") p.gamma_beta = py::cast<double>(item.second);
        else if (key == "rho") p.rho = py::cast<double>(item.second);
        else if (key == "unroll_depth") p.unroll_depth = py::cast<int>(item.second);
        else if (key == "temperature") p.temperature = py::cast<double>(item.second);
        else throw std::invalid_argument("unknown post-processing parameter: " + key);
    }
    p.validate();
    return p;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "RNA secondary structure prediction: learned pair scores decoded by an "
              "unrolled primal-dual network";

    // --- core ---
    m.def(
        "constraint_mask",
        [](const std::string& seq) {
            return mat_to_numpy(build_constraint_mask(seq_from_str(seq)).entries);
        },
        py::arg("sequence"),
        "Binary L x L mask of admissible pairs (canonical combination, |i-j| >= 4)");

    m.def(
        "pair_transform",
        [](const py::array_t<double>& ahat, const std::string& seq) {
            return mat_to_numpy(
                pair_transform(numpy_to_mat(ahat), build_constraint_mask(seq_from_str(seq))));
        },
        py::arg("ahat"), py::arg("sequence"));

    m.def(
        "one_hot",
        [](const std::string& seq) { return mat_to_numpy(one_hot(seq_from_str(seq))); },
        py::arg("sequence"), "L x 4 one-hot encoding in A,U,C,G column order");

    m.def(
        "is_pseudoknotted",
        [](const Pairs& pairs) { return is_pseudoknotted(pairs_from_list(pairs)); },
        py::arg("pairs"));

    m.def(
        "validate_structure",
        [](const Pairs& pairs, const std::string& seq) {
            const auto s = seq_from_str(seq);
            PairMatrix pm{pairs_to_matrix(pairs_from_list(pairs), s.length()),
                          PairMatrix::Mode::kBinary};
            std::vector<std::string> out;
            for (const auto& v : validate_structure(pm, s)) out.push_back(v.describe());
            return out;
        },
        py::arg("pairs"), py::arg("sequence"),
        "Human-readable violations; empty list means the structure is valid");

    m.def(
        "round_structure",
        [](const py::array_t<double>& relaxed, const std::string& seq, double threshold) {
            const auto mask = build_constraint_mask(seq_from_str(seq));
            return matrix_to_pairs(
                       round_structure(numpy_to_mat(relaxed), mask, threshold).entries)
                .pairs();
        },
        py::arg("relaxed"), py::arg("sequence"), py::arg("threshold") = 0.5);

    // --- io ---
    py::class_<StructureRecord>(m, "StructureRecord")
        .def_property_readonly("sequence",
                               [](const StructureRecord& r) { return r.seq.letters; })
        .def_property_readonly("id", [](const StructureRecord& r) { return r.seq.id; })
        .def_property_readonly("pairs",
                               [](const StructureRecord& r) { return r.pairs.pairs(); })
        .def_property_readonly("format", [](const StructureRecord& r) { return r.format; })
        .def("__repr__", [](const StructureRecord& r) {
            return "<StructureRecord id='" + r.seq.id + "' length=" +
                   std::to_string(r.seq.length()) + " pairs=" + std::to_string(r.pairs.size()) +
                   ">";
        });

    m.def("parse_ct", [](const std::string& text) { return parse_ct(text); }, py::arg("text"));
    m.def("parse_bpseq", [](const std::string& text) { return parse_bpseq(text); },
          py::arg("text"));
    m.def("parse_dot_bracket",
          [](const std::string& text) { return parse_dot_bracket(text); }, py::arg("text"));
    m.def("serialize_ct", &serialize_ct, py::arg("record"));
    m.def("serialize_bpseq", &serialize_bpseq, py::arg("record"));
    m.def("to_dot_bracket", &to_dot_bracket, py::arg("record"));
    m.def(
        "dot_bracket_annotation",
        [](const Pairs& pairs, int length) {
            return dot_bracket_annotation(pairs_from_list(pairs), length);
        },
        py::arg("pairs"), py::arg("length"));
    m.def(
        "make_record",
        [](const std::string& seq, const Pairs& pairs, const std::string& id) {
            StructureRecord rec;
            rec.seq = RnaSequence::from_letters(seq, id);
            rec.pairs = pairs_from_list(pairs);
            return rec;
        },
        py::arg("sequence"), py::arg("pairs"), py::arg("id") = "seq");
    m.def(
        "parse_fasta",
        [](const std::string& text) {
            std::vector<std::pair<std::string, std::string>> out;
            for (const auto& s : parse_fasta(text)) out.emplace_back(s.id, s.letters);
            return out;
        },
        py::arg("text"), "List of (id, sequence) tuples; T is mapped to U");

    // --- losses / evaluation ---
    m.def(
        "f1_loss",
        [](const py::array_t<double>& a, const py::array_t<double>& astar) {
            return f1_loss_value(numpy_to_mat(a), numpy_to_mat(astar));
        },
        py::arg("a"), py::arg("a_star"));
    m.def(
        "weighted_bce",
        [](const py::array_t<double>& u, const py::array_t<double>& astar, double pos_weight) {
            return weighted_bce_value(numpy_to_mat(u), numpy_to_mat(astar), pos_weight);
        },
        py::arg("u"), py::arg("a_star"), py::arg("pos_weight") = 300.0);
    m.def(
        "prf",
        [](const Pairs& pred, const Pairs& truth, bool shift) {
            const Prf r = prf(pairs_from_list(pred), pairs_from_list(truth), shift);
            return py::make_tuple(r.precision, r.recall, r.f1);
        },
        py::arg("pred"), py::arg("truth"), py::arg("shift") = false,
        "(precision, recall, f1); with shift, one-position-moved pairs count as hits");

    // --- decoders ---
    m.def(
        "exact_decode",
        [](const py::array_t<double>& u, double s, const std::string& seq) {
            const auto r =
                exact_decode(numpy_to_mat(u), s, build_constraint_mask(seq_from_str(seq)));
            return py::make_tuple(r.pairs.pairs(), r.objective);
        },
        py::arg("u"), py::arg("s"), py::arg("sequence"),
        "(pairs, objective) of the globally optimal matching; L <= 16");
    m.def(
        "nested_decode",
        [](const py::array_t<double>& u, double s, const std::string& seq) {
            const auto r =
                nested_decode(numpy_to_mat(u), s, build_constraint_mask(seq_from_str(seq)));
            return py::make_tuple(r.pairs.pairs(), r.objective);
        },
        py::arg("u"), py::arg("s"), py::arg("sequence"));
    m.def(
        "solve",
        [](const py::array_t<double>& u, const std::string& seq, const py::dict& params,
           int max_iter, double tol, double threshold) {
            const auto mask = build_constraint_mask(seq_from_str(seq));
            const auto r = pp_solve_convergent(numpy_to_mat(u), mask, pp_from_kwargs(params),
                                               max_iter, tol, threshold);
            return py::make_tuple(r.pairs.pairs(), r.converged, r.iterations);
        },
        py::arg("u"), py::arg("sequence"), py::arg("params") = py::dict(),
        py::arg("max_iter") = 1000, py::arg("tol") = 1e-4, py::arg("threshold") = 0.5,
        "(pairs, converged, iterations) from the hard-sign convergent solver");
    m.def(
        "unroll",
        [](const py::array_t<double>& u, const std::string& seq, const py::dict& params) {
            const auto mask = build_constraint_mask(seq_from_str(seq));
            std::vector<py::array_t<double>> out;
            for (const auto& a : pp_unroll(numpy_to_mat(u), mask, pp_from_kwargs(params)))
                out.push_back(mat_to_numpy(a));
            return out;
        },
        py::arg("u"), py::arg("sequence"), py::arg("params") = py::dict(),
        "Relaxed pairing matrices A_1..A_T of the soft unroll");

    // --- model ---
    py::class_<Checkpoint>(m, "Model")
        .def_static("load", &load_checkpoint, py::arg("path"))
        .def_static(
            "random_init",
            [](std::uint64_t seed, int d, int encoder_layers, int heads, int ff_width) {
                ScoreNetConfig cfg;
                cfg.d = d;
                cfg.encoder_layers = encoder_layers;
                cfg.heads = heads;
                cfg.ff_width = ff_width;
                cfg.init_seed = seed;
                Checkpoint ckpt;
                ckpt.score = ScoreNetParams::init(cfg);
                return ckpt;
            },
            py::arg("seed") = 1, py::arg("d") = 10, py::arg("encoder_layers") = 2,
            py::arg("heads") = 2, py::arg("ff_width") = 64,
            "Untrained model with seeded random weights")
        .def("save", &save_checkpoint, py::arg("path"))
        .def(
            "scores",
            [](const Checkpoint& ckpt, const std::string& seq) {
                return mat_to_numpy(score_matrix(ckpt.score, seq_from_str(seq)));
            },
            py::arg("sequence"), "Symmetric L x L pair score matrix")
        .def(
            "predict",
            [](const Checkpoint& ckpt, const std::string& seq, bool classic,
               double threshold) {
                PredictOptions opt;
                opt.classic = classic;
                opt.threshold = threshold;
                const auto pred =
                    predict_structure(ckpt.score, ckpt.pp, seq_from_str(seq), opt);
                return pred.pairs.pairs();
            },
            py::arg("sequence"), py::arg("classic") = false, py::arg("threshold") = 0.5,
            "Predicted base pairs, always a valid structure");

    m.attr("BASE_ORDER") = kBaseOrder;
    m.attr("__version__") = "0.1.0";
}
