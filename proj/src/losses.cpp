#include "pdfold/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace pdfold {

namespace {

void require_nonempty_truth(const Mat& astar) {
    if (sum(astar) == 0.0)
        throw std::invalid_argument(
            "f1_loss: ground truth has no pairs; use weighted_bce for unpaired targets");
}

double softplus_scalar(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
}

}  // namespace

ad::Var f1_loss(ad::Var a, const Mat& astar) {
    require_nonempty_truth(astar);
    ad::Tape& t = *a.tape;
    check_same_shape(t.value(a), astar, "f1_loss");
    Mat not_astar = astar;
    for (std::size_t k = 0; k < not_astar.size(); ++k) not_astar[k] = 1.0 - not_astar[k];

    ad::Var vstar = t.leaf(astar);
    ad::Var vnot = t.leaf(not_astar);
    ad::Var tp = ad::inner_product(a, vstar);                      // <A, A*>
    ad::Var fp = ad::inner_product(a, vnot);                       // <A, 1-A*>
    ad::Var fn = ad::inner_product(ad::affine(a, -1.0, 1.0), vstar);  // <1-A, A*>
    ad::Var denom = ad::add(ad::affine(tp, 2.0, 0.0), ad::add(fp, fn));
    return ad::div(ad::affine(tp, -2.0, 0.0), denom);
}

double f1_loss_value(const Mat& a, const Mat& astar) {
    require_nonempty_truth(astar);
    check_same_shape(a, astar, "f1_loss");
    double tp = 0.0, fp = 0.0, fn = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        tp += a[k] * astar[k];
        fp += a[k] * (1.0 - astar[k]);
        fn += (1.0 - a[k]) * astar[k];
    }
    return -2.0 * tp / (2.0 * tp + fp + fn);
}

ad::Var trajectory_loss(const std::vector<ad::Var>& traj, const Mat& astar, double gamma) {
    if (traj.empty()) throw std::invalid_argument("trajectory_loss: empty trajectory");
    const int T = static_cast<int>(traj.size());
    ad::Var total;
    for (int idx = 0; idx < T; ++idx) {
        const double coeff = std::pow(gamma, T - 1 - idx) / T;
        ad::Var term = ad::affine(f1_loss(traj[idx], astar), coeff, 0.0);
        total = idx == 0 ? term : ad::add(total, term);
    }
    return total;
}

double trajectory_loss_value(const std::vector<Mat>& traj, const Mat& astar, double gamma) {
    if (traj.empty()) throw std::invalid_argument("trajectory_loss: empty trajectory");
    const int T = static_cast<int>(traj.size());
    double total = 0.0;
    for (int idx = 0; idx < T; ++idx)
        total += std::pow(gamma, T - 1 - idx) / T * f1_loss_value(traj[idx], astar);
    return total;
}

ad::Var weighted_bce(ad::Var u, const Mat& astar, double pos_weight) {
    ad::Tape& t = *u.tape;
    check_same_shape(t.value(u), astar, "weighted_bce");
    Mat pos = astar, neg = astar;
    for (std::size_t k = 0; k < astar.size(); ++k) {
        pos[k] = pos_weight * astar[k];
        neg[k] = 1.0 - astar[k];
    }
    ad::Var pos_term = ad::mul(t.leaf(pos), ad::softplus(ad::neg(u)));
    ad::Var neg_term = ad::mul(t.leaf(neg), ad::softplus(u));
    const double inv_n = 1.0 / static_cast<double>(astar.size());
    return ad::affine(ad::full_sum(ad::add(pos_term, neg_term)), inv_n, 0.0);
}

double weighted_bce_value(const Mat& u, const Mat& astar, double pos_weight) {
    check_same_shape(u, astar, "weighted_bce");
    double total = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k)
        total += pos_weight * astar[k] * softplus_scalar(-u[k]) +
                 (1.0 - astar[k]) * softplus_scalar(u[k]);
    return total / static_cast<double>(u.size());
}

}  // namespace pdfold
