#pragma once

#include <vector>

namespace geolens {

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

// n-point Gauss-Legendre rule on [a, b].
QuadratureRule gauss_legendre(int n, double a = -1.0, double b = 1.0);

// Pairwise (cascade) sum; order-stable for a fixed input order.
double pairwise_sum(const std::vector<double>& values);

}  // namespace geolens
