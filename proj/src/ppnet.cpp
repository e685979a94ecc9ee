#include "pdfold/ppnet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pdfold {

namespace {

double sigmoid_scalar(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double soft_sign(double c, double k) { return sigmoid_scalar(k * c); }
double hard_sign(double c) { return c > 0.0 ? 1.0 : 0.0; }

}  // namespace

void PpParams::validate() const {
    if (w < 0.0) throw std::invalid_argument("PpParams: w must be >= 0");
    if (alpha <= 0.0) throw std::invalid_argument("PpParams: alpha must be > 0");
    if (beta <= 0.0) throw std::invalid_argument("PpParams: beta must be > 0");
    if (gamma_alpha <= 0.0 || gamma_alpha > 1.0)
        throw std::invalid_argument("PpParams: gamma_alpha must be in (0,1]");
    if (gamma_beta <= 0.0 || gamma_beta > 1.0)
        throw std::invalid_argument("PpParams: gamma_beta must be in (0,1]");
    if (rho < 0.0) throw std::invalid_argument("PpParams: rho must be >= 0");
    if (unroll_depth < 1) throw std::invalid_argument("PpParams: unroll_depth must be >= 1");
    if (temperature <= 0.0) throw std::invalid_argument("PpParams: temperature must be > 0");
}

void PpParams::project() {
    constexpr double eps = 1e-6;
    w = std::max(w, 0.0);
    alpha = std::max(alpha, eps);
    beta = std::max(beta, eps);
    gamma_alpha = std::clamp(gamma_alpha, eps, 1.0);
    gamma_beta = std::clamp(gamma_beta, eps, 1.0);
    rho = std::max(rho, 0.0);
}

PpInit pp_init(const Mat& u, const ConstraintMask& mask, const PpParams& p, SignMode mode) {
    p.validate();
    check_same_shape(u, mask.entries, "pp_init");
    const int L = u.rows();
    PpInit out;
    out.u_gated = Mat(L, L);
    out.state.ahat = Mat(L, L);
    for (int i = 0; i < L; ++i) {
        for (int j = 0; j < L; ++j) {
            const double gate = mode == SignMode::kSoft ? soft_sign(u(i, j) - p.s, p.temperature)
                                                        : hard_sign(u(i, j) - p.s);
            out.u_gated(i, j) = gate * u(i, j);
            out.state.ahat(i, j) = gate * sigmoid_scalar(u(i, j));
        }
    }
    out.state.a = pair_transform(out.state.ahat, mask);
    out.state.lambda = Mat(L, 1);
    const Mat rs = row_sums(out.state.a);
    for (int i = 0; i < L; ++i)
        out.state.lambda(i, 0) = p.w * std::max(rs(i, 0) - 1.0, 0.0);
    out.state.t = 0;
    return out;
}

void ppcell_step(PpState& st, const Mat& u_gated, const ConstraintMask& mask,
                 const PpParams& p, SignMode mode) {
    const int L = u_gated.rows();
    const double step_a = p.alpha * std::pow(p.gamma_alpha, st.t);
    const double step_b = p.beta * std::pow(p.gamma_beta, st.t);
    const double thresh = p.rho * step_a;

    // row-violation pressure from the current A
    const Mat rs = row_sums(st.a);
    std::vector<double> pressure(L);
    for (int i = 0; i < L; ++i) {
        const double viol = rs(i, 0) - 1.0;
        const double sgn = mode == SignMode::kSoft ? soft_sign(viol, p.temperature)
                                                   : hard_sign(viol);
        pressure[i] = st.lambda(i, 0) * sgn;
    }

    Mat ahat_next(L, L);
    for (int i = 0; i < L; ++i) {
        for (int j = 0; j < L; ++j) {
            const double g_ij = 0.5 * u_gated(i, j) - pressure[i];
            const double g_ji = 0.5 * u_gated(j, i) - pressure[j];
            const double g_sym = g_ij + g_ji;
            const double adot =
                st.ahat(i, j) + step_a * (st.ahat(i, j) * (mask.entries(i, j) * g_sym));
            double v = std::fabs(adot) - thresh;
            v = v > 0.0 ? v : 0.0;                  // soft threshold
            v = 1.0 - std::max(1.0 - v, 0.0);       // clip to <= 1
            ahat_next(i, j) = v;
        }
    }
    st.ahat = std::move(ahat_next);
    st.a = pair_transform(st.ahat, mask);

    const Mat rs_next = row_sums(st.a);
    for (int i = 0; i < L; ++i) {
        const double viol = rs_next(i, 0) - 1.0;
        st.lambda(i, 0) += step_b * (viol > 0.0 ? viol : 0.0);
    }
    st.t += 1;
}

std::vector<Mat> pp_unroll(const Mat& u, const ConstraintMask& mask, const PpParams& p) {
    p.validate();
    const int L = u.rows();
    std::vector<Mat> traj;
    traj.reserve(p.unroll_depth);
    if (mask.all_zero()) {
        for (int t = 0; t < p.unroll_depth; ++t) traj.emplace_back(L, L);
        return traj;
    }
    PpInit init = pp_init(u, mask, p, SignMode::kSoft);
    PpState st = std::move(init.state);
    for (int t = 0; t < p.unroll_depth; ++t) {
        ppcell_step(st, init.u_gated, mask, p, SignMode::kSoft);
        traj.push_back(st.a);
    }
    return traj;
}

SolveResult pp_solve_convergent(const Mat& u, const ConstraintMask& mask,
                                const PpParams& hyper, int max_iter, double tol,
                                double round_threshold) {
    hyper.validate();
    const int L = u.rows();
    SolveResult out;
    if (mask.all_zero()) {
        out.structure = PairMatrix{Mat(L, L), PairMatrix::Mode::kBinary};
        out.pairs = PairSet();
        return out;
    }

    PpInit init = pp_init(u, mask, hyper, SignMode::kHard);
    PpState st = std::move(init.state);

    auto max_violation = [](const Mat& a) {
        const Mat rs = row_sums(a);
        double v = 0.0;
        for (int i = 0; i < rs.rows(); ++i) v = std::max(v, rs(i, 0) - 1.0);
        return v;
    };
    // Decision-relevant score of a rounded iterate: the l1 term is a
    // relaxation regularizer, not part of the decoded objective.
    auto decision_obj = [&](const Mat& a) { return objective_value(u, hyper.s, a, 0.0, a); };

    // Two pitfalls of the raw iteration demand care here. A stalled sup-norm
    // alone is not convergence: saturated iterates can sit at the clip while
    // rows still violate the matching constraint and the dual is still
    // ramping up. And the multiplicative primal update has an absorbing state
    // at zero: when the bang-bang dual pressure overshoots, it can crush a
    // good pair permanently, leaving a final iterate worse than ones seen
    // mid-trajectory. So convergence additionally requires near-feasibility,
    // and the best rounded decision seen along the trajectory is returned.
    const double feas_tol = 1e-3;
    const int track_every = L <= 24 ? 1 : 16;
    PairMatrix best_structure = round_structure(st.a, mask, round_threshold);
    double best_obj = decision_obj(best_structure.entries);
    bool converged = false;
    int iters = 0;
    for (; iters < max_iter; ++iters) {
        const Mat prev_a = st.a;
        ppcell_step(st, init.u_gated, mask, hyper, SignMode::kHard);
        const bool stalled = max_abs_diff(st.a, prev_a) < tol;
        if (stalled || iters % track_every == 0) {
            PairMatrix rounded = round_structure(st.a, mask, round_threshold);
            const double obj = decision_obj(rounded.entries);
            if (obj > best_obj) {
                best_obj = obj;
                best_structure = std::move(rounded);
            }
        }
        if (stalled && max_violation(st.a) <= feas_tol) {
            converged = true;
            ++iters;
            break;
        }
    }

    out.structure = std::move(best_structure);
    out.pairs = matrix_to_pairs(out.structure.entries);
    out.iterations = iters;
    out.converged = converged;
    out.objective = best_obj;
    return out;
}

double objective_value(const Mat& u, double s, const Mat& a, double rho, const Mat& ahat) {
    check_same_shape(u, a, "objective_value");
    check_same_shape(u, ahat, "objective_value");
    double inner = 0.0, l1 = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        inner += (u[k] - s) * a[k];
        l1 += std::fabs(ahat[k]);
    }
    return 0.5 * inner - rho * l1;
}

// --- differentiable engine ---

PpVars lift_pp_params(ad::Tape& t, const PpParams& p) {
    PpVars v;
    v.w = t.leaf(Mat::scalar(p.w));
    v.s = t.leaf(Mat::scalar(p.s));
    v.alpha = t.leaf(Mat::scalar(p.alpha));
    v.beta = t.leaf(Mat::scalar(p.beta));
    v.gamma_alpha = t.leaf(Mat::scalar(p.gamma_alpha));
    v.gamma_beta = t.leaf(Mat::scalar(p.gamma_beta));
    v.rho = t.leaf(Mat::scalar(p.rho));
    return v;
}

namespace {

ad::Var pair_transform_tape(ad::Var ahat, ad::Var mask_const) {
    ad::Var sq = ad::mul(ahat, ahat);
    ad::Var sym = ad::affine(ad::add(sq, ad::transpose(sq)), 0.5, 0.0);
    return ad::mul(sym, mask_const);
}

ad::Var row_violation(ad::Var a) {
    return ad::affine(ad::row_sum(a), 1.0, -1.0);  // A1 - 1
}

}  // namespace

std::vector<ad::Var> pp_unroll_tape(ad::Tape& t, ad::Var u, const ConstraintMask& mask,
                                    const PpVars& pv, const PpParams& fixed) {
    fixed.validate();
    const int L = t.value(u).rows();
    const int T = fixed.unroll_depth;
    const double k = fixed.temperature;

    std::vector<ad::Var> traj;
    traj.reserve(T);
    if (mask.all_zero()) {
        ad::Var zero = t.leaf(Mat(L, L));
        for (int step = 0; step < T; ++step) traj.push_back(zero);
        return traj;
    }

    ad::Var mask_const = t.leaf(mask.entries);
    ad::Var ones_row = t.leaf(Mat::full(1, L, 1.0));

    ad::Var gate = ad::softsign(ad::sub_scalar(u, pv.s), k);
    ad::Var u_gated = ad::mul(gate, u);
    ad::Var ahat = ad::mul(gate, ad::sigmoid(u));
    ad::Var a = pair_transform_tape(ahat, mask_const);
    ad::Var lambda = ad::scale_by(pv.w, ad::relu(row_violation(a)));
    ad::Var half_u = ad::affine(u_gated, 0.5, 0.0);

    for (int step = 0; step < T; ++step) {
        ad::Var step_a = ad::mul(pv.alpha, ad::pow_int(pv.gamma_alpha, step));
        ad::Var step_b = ad::mul(pv.beta, ad::pow_int(pv.gamma_beta, step));
        ad::Var thresh = ad::mul(pv.rho, step_a);

        ad::Var pressure = ad::mul(lambda, ad::softsign(row_violation(a), k));
        ad::Var g = ad::sub(half_u, ad::matmul(pressure, ones_row));
        ad::Var g_sym = ad::add(g, ad::transpose(g));
        ad::Var adot =
            ad::add(ahat, ad::scale_by(step_a, ad::mul(ahat, ad::mul(mask_const, g_sym))));
        ahat = ad::clip_max1(ad::relu(ad::sub_scalar(ad::abs(adot), thresh)));
        a = pair_transform_tape(ahat, mask_const);
        lambda = ad::add(lambda, ad::scale_by(step_b, ad::relu(row_violation(a))));
        traj.push_back(a);
    }
    return traj;
}

}  // namespace pdfold
