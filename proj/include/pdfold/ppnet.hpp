#pragma once

#include <vector>

#include "pdfold/autodiff.hpp"
#include "pdfold/rna.hpp"

namespace pdfold {

// Parameters of the constrained post-processing step. The first seven are
// learnable; unroll depth and softsign temperature are fixed configuration.
struct PpParams {
    double w = 1.0;             // dual warm-start scale, >= 0
    double s = 2.1972245773362196;  // score offset, ln 9
    double alpha = 0.01;        // primal step, > 0
    double beta = 0.1;          // dual step, > 0
    double gamma_alpha = 0.99;  // primal decay, (0, 1]
    double gamma_beta = 0.99;   // dual decay, (0, 1]
    double rho = 1.0;           // l1 sparsity coefficient, >= 0
    int unroll_depth = 20;      // T, fixed
    double temperature = 10.0;  // softsign k, fixed

    void validate() const;
    // Clamps the learnable fields back into their domains after an update.
    void project();
};

enum class SignMode { kSoft, kHard };

struct PpState {
    Mat lambda;  // Lx1 dual, nonnegative
    Mat a;       // LxL relaxed pairing, in [0,1] after the first clip
    Mat ahat;    // LxL free variable, symmetric
    int t = 0;
};

struct PpInit {
    Mat u_gated;  // softsign(U - s) o U, the score the cells consume
    PpState state;
};

PpInit pp_init(const Mat& u, const ConstraintMask& mask, const PpParams& p, SignMode mode);

// One primal-dual cell update in place: gradient ascent on ahat, soft
// threshold, clip to [0,1], recompute A, dual ascent on lambda.
void ppcell_step(PpState& state, const Mat& u_gated, const ConstraintMask& mask,
                 const PpParams& p, SignMode mode);

// T soft-sign iterations from the gated initialization; returns A_1..A_T.
// An all-zero mask short-circuits to a zero trajectory.
std::vector<Mat> pp_unroll(const Mat& u, const ConstraintMask& mask, const PpParams& p);

struct SolveResult {
    PairMatrix structure;
    PairSet pairs;
    int iterations = 0;
    bool converged = true;
    double objective = 0.0;  // of the returned relaxed iterate, before rounding
};

// Hard-sign iterations until the sup-norm change of A drops below tol or
// max_iter is hit; on non-convergence the best-objective iterate is rounded
// instead and `converged` is false.
SolveResult pp_solve_convergent(const Mat& u, const ConstraintMask& mask,
                                const PpParams& hyper, int max_iter = 1000,
                                double tol = 1e-4, double round_threshold = 0.5);

// 0.5 * <u - s, a> - rho * sum |ahat|.
double objective_value(const Mat& u, double s, const Mat& a, double rho, const Mat& ahat);

// --- differentiable engine ---

struct PpVars {
    ad::Var w, s, alpha, beta, gamma_alpha, gamma_beta, rho;
};

PpVars lift_pp_params(ad::Tape& t, const PpParams& p);

// Same unroll on the tape; gradients flow into u and every learnable
// parameter. Arithmetic matches pp_unroll operation for operation.
std::vector<ad::Var> pp_unroll_tape(ad::Tape& t, ad::Var u, const ConstraintMask& mask,
                                    const PpVars& pv, const PpParams& fixed);

}  // namespace pdfold
