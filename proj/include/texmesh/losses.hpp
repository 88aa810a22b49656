#pragma once

#include <span>
#include <vector>

#include "texmesh/tetgrid.hpp"

namespace texmesh {

struct LossConfig {
    double r1_weight = 10.0; ///< lambda
    double reg_weight = 0.01; ///< mu

    void validate() const;
};

/// -log(1 + exp(-u)), stable over the whole real line.
double g(double u);
/// dg/du = sigmoid(-u).
double g_grad(double u);

/// mean g(fake) + mean g(-real) + lambda * mean |grad D(real)|^2, the
/// adversarial expression as written. Its g terms are unbounded below in
/// the logits, so training does not descend it directly; see
/// discriminator_objective.
double discriminator_loss(std::span<const double> real_logits, std::span<const double> fake_logits,
                          std::span<const double> r1_grad_sq_norms, double lambda);

/// What the discriminator minimizes, with logits read as "realness":
/// mean softplus(fake) + mean softplus(-real) + lambda * mean |grad|^2,
/// i.e. -mean g(-fake) - mean g(real) plus the penalty.
double discriminator_objective(std::span<const double> real_logits, std::span<const double> fake_logits,
                               std::span<const double> r1_grad_sq_norms, double lambda);

/// mean(-g(fake)): non-saturating, decreasing as fake logits rise.
double generator_loss(std::span<const double> fake_logits);

/// Mean squared L2 norm of per-sample input gradients.
double r1_penalty(std::span<const std::vector<double>> grad_images);

/// Binary cross-entropy over sign-flip edges, in logits form. Targets are
/// 1 for s > 0 and 0 for s <= 0 (the inside convention of the grid).
double sdf_regularizer(std::span<const double> sdf, std::span<const Edge> edges);
double sdf_regularizer(const GeometryField& field, std::span<const Edge> edges);

/// d L_reg / d s, same length as `sdf`.
std::vector<double> sdf_regularizer_grad(std::span<const double> sdf, std::span<const Edge> edges);

/// Number of edges whose endpoints disagree in sign.
std::size_t sign_flip_count(std::span<const double> sdf, std::span<const Edge> edges);

double total_loss(double l_rgb, double l_mask, double l_reg, double mu);

} // namespace texmesh
