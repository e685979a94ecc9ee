#pragma once

#include "pdfold/ppnet.hpp"
#include "pdfold/rna.hpp"
#include "pdfold/scorenet.hpp"

namespace pdfold {

struct PredictOptions {
    bool classic = false;  // convergent solver instead of the fixed unroll
    double threshold = 0.5;
    int solver_max_iter = 1000;
    double solver_tol = 1e-4;
};

struct Prediction {
    Mat scores;            // L x L symmetric score matrix
    PairMatrix structure;  // rounded, always a valid matching
    PairSet pairs;
    bool solver_converged = true;
};

// Full inference for one sequence: score network forward, constrained
// decoding (unroll or convergent solver), rounding.
Prediction predict_structure(const ScoreNetParams& score_params, const PpParams& pp,
                             const RnaSequence& seq, const PredictOptions& opt = {});

}  // namespace pdfold
