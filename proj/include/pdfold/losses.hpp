#pragma once

#include <vector>

#include "pdfold/autodiff.hpp"
#include "pdfold/mat.hpp"

namespace pdfold {

struct LossConfig {
    double gamma = 1.0;        // trajectory discount, in (0, 1]
    double pos_weight = 300.0; // BCE positive-class weight
    double mix = 1.0;          // weight of auxiliary BCE next to the F1 loss
};

// Soft F1 surrogate: -2<A,A*> / (2<A,A*> + <A,1-A*> + <1-A,A*>), in [-1, 0].
// Requires a nonempty ground truth; throws std::invalid_argument otherwise.
ad::Var f1_loss(ad::Var a, const Mat& astar);
double f1_loss_value(const Mat& a, const Mat& astar);

// Discounted trajectory objective: (1/T) sum_t gamma^(T-t) * f1_loss(A_t, A*).
ad::Var trajectory_loss(const std::vector<ad::Var>& traj, const Mat& astar, double gamma);
double trajectory_loss_value(const std::vector<Mat>& traj, const Mat& astar, double gamma);

// Mean weighted binary cross-entropy on logits, stable at both tails.
ad::Var weighted_bce(ad::Var u, const Mat& astar, double pos_weight);
double weighted_bce_value(const Mat& u, const Mat& astar, double pos_weight);

}  // namespace pdfold
