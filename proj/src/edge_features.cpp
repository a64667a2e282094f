#include <cmath>

#include "gvdoc/graph.hpp"

namespace gvdoc {
namespace {

constexpr double kRatioFloor = 1e-6;   // stands in for zero widths/heights
constexpr double kRatioClampLo = 1e-2;
constexpr double kRatioClampHi = 1e2;
const double kLogScale = 1.0 / std::log(100.0);

double log_ratio(double a, double b) {
    a = std::max(a, kRatioFloor);
    b = std::max(b, kRatioFloor);
    double r = std::clamp(a / b, kRatioClampLo, kRatioClampHi);
    return std::log(r) * kLogScale;
}

}  // namespace

std::array<double, kEdgeFeatureDim> edge_features(const BBox& a, const BBox& b) {
    std::array<double, kEdgeFeatureDim> f{};
    auto ca = a.corners();
    auto cb = b.corners();
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            f[static_cast<size_t>(i * 4 + j)] =
                std::hypot(ca[static_cast<size_t>(i)][0] - cb[static_cast<size_t>(j)][0],
                           ca[static_cast<size_t>(i)][1] - cb[static_cast<size_t>(j)][1]);
    f[16] = center_distance(a, b);
    f[17] = std::fabs(a.cx() - b.cx());
    f[18] = std::fabs(a.cy() - b.cy());
    f[19] = log_ratio(a.height(), b.height());
    f[20] = log_ratio(a.width(), b.width());
    return f;
}

std::array<double, kEdgeFeatureDim> reverse_edge_features(
    const std::array<double, kEdgeFeatureDim>& f) {
    std::array<double, kEdgeFeatureDim> r{};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            r[static_cast<size_t>(i * 4 + j)] = f[static_cast<size_t>(j * 4 + i)];
    r[16] = f[16];
    r[17] = f[17];
    r[18] = f[18];
    r[19] = -f[19];
    r[20] = -f[20];
    return r;
}

}  // namespace gvdoc
