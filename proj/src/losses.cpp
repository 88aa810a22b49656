#include "texmesh/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace texmesh {

namespace {

double softplus(double x)
{
    if (x > 30.0) return x + std::exp(-x);
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

double sigmoid(double x)
{
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double mean(std::span<const double> v)
{
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

bool flips(double a, double b) { return is_inside(a) != is_inside(b); }

double target(double s) { return is_inside(s) ? 0.0 : 1.0; }

} // namespace

void LossConfig::validate() const
{
    if (!(r1_weight >= 0.0) || !std::isfinite(r1_weight)) throw std::invalid_argument("r1_weight must be >= 0");
    if (!(reg_weight >= 0.0) || !std::isfinite(reg_weight)) throw std::invalid_argument("reg_weight must be >= 0");
}

double g(double u)
{
    if (u < -30.0) return u;
    if (u > 30.0) return -std::exp(-u);
    return -std::log1p(std::exp(-u));
}

double g_grad(double u) { return sigmoid(-u); }

double discriminator_loss(std::span<const double> real_logits, std::span<const double> fake_logits,
                          std::span<const double> r1_grad_sq_norms, double lambda)
{
    if (real_logits.empty() || fake_logits.empty()) throw std::invalid_argument("discriminator_loss: empty batch");
    double fake = 0.0, real = 0.0;
    for (double f : fake_logits) fake += g(f);
    for (double r : real_logits) real += g(-r);
    double loss = fake / fake_logits.size() + real / real_logits.size();
    if (!r1_grad_sq_norms.empty()) loss += lambda * mean(r1_grad_sq_norms);
    return loss;
}

double discriminator_objective(std::span<const double> real_logits, std::span<const double> fake_logits,
                               std::span<const double> r1_grad_sq_norms, double lambda)
{
    if (real_logits.empty() || fake_logits.empty()) throw std::invalid_argument("discriminator_objective: empty batch");
    double fake = 0.0, real = 0.0;
    for (double f : fake_logits) fake -= g(-f);
    for (double r : real_logits) real -= g(r);
    double loss = fake / fake_logits.size() + real / real_logits.size();
    if (!r1_grad_sq_norms.empty()) loss += lambda * mean(r1_grad_sq_norms);
    return loss;
}

double generator_loss(std::span<const double> fake_logits)
{
    if (fake_logits.empty()) throw std::invalid_argument("generator_loss: empty batch");
    double s = 0.0;
    for (double f : fake_logits) s -= g(f);
    return s / fake_logits.size();
}

double r1_penalty(std::span<const std::vector<double>> grad_images)
{
    if (grad_images.empty()) return 0.0;
    double s = 0.0;
    for (const auto& gi : grad_images)
        for (double v : gi) s += v * v;
    return s / grad_images.size();
}

double sdf_regularizer(std::span<const double> sdf, std::span<const Edge> edges)
{
    double loss = 0.0;
    for (const auto& [i, j] : edges) {
        if (i >= sdf.size() || j >= sdf.size()) throw std::invalid_argument("sdf_regularizer: edge index out of range");
        const double si = sdf[i], sj = sdf[j];
        if (!flips(si, sj)) continue;
        loss += softplus(si) - target(sj) * si;
        loss += softplus(sj) - target(si) * sj;
    }
    return loss;
}

double sdf_regularizer(const GeometryField& field, std::span<const Edge> edges)
{
    return sdf_regularizer(std::span<const double>(field.sdf), edges);
}

std::vector<double> sdf_regularizer_grad(std::span<const double> sdf, std::span<const Edge> edges)
{
    std::vector<double> grad(sdf.size(), 0.0);
    for (const auto& [i, j] : edges) {
        if (i >= sdf.size() || j >= sdf.size()) throw std::invalid_argument("sdf_regularizer: edge index out of range");
        const double si = sdf[i], sj = sdf[j];
        if (!flips(si, sj)) continue;
        // Targets are piecewise constant, so only the logit side carries gradient.
        grad[i] += sigmoid(si) - target(sj);
        grad[j] += sigmoid(sj) - target(si);
    }
    return grad;
}

std::size_t sign_flip_count(std::span<const double> sdf, std::span<const Edge> edges)
{
    std::size_t n = 0;
    for (const auto& [i, j] : edges) n += flips(sdf[i], sdf[j]);
    return n;
}

double total_loss(double l_rgb, double l_mask, double l_reg, double mu) { return l_rgb + l_mask + mu * l_reg; }

} // namespace texmesh
