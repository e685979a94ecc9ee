#include "pdfold/pipeline.hpp"

namespace pdfold {

Prediction predict_structure(const ScoreNetParams& score_params, const PpParams& pp,
                             const RnaSequence& seq, const PredictOptions& opt) {
    Prediction out;
    out.scores = score_matrix(score_params, seq);
    const ConstraintMask mask = build_constraint_mask(seq);
    if (opt.classic) {
        SolveResult solved =
            pp_solve_convergent(out.scores, mask, pp, opt.solver_max_iter, opt.solver_tol,
                                opt.threshold);
        out.structure = std::move(solved.structure);
        out.pairs = std::move(solved.pairs);
        out.solver_converged = solved.converged;
    } else {
        const std::vector<Mat> traj = pp_unroll(out.scores, mask, pp);
        out.structure = round_structure(traj.back(), mask, opt.threshold);
        out.pairs = matrix_to_pairs(out.structure.entries);
    }
    return out;
}

}  // namespace pdfold
