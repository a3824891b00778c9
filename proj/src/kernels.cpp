#include "vmlpic/kernels.hpp"

namespace vmlpic {

std::array<double, 9> LandauKernel::matrix(std::span<const double> z) const {
    std::array<double, 9> a{};
    double r2 = 0.0;
    for (int i = 0; i < m_dv; ++i) r2 += z[i] * z[i];
    if (r2 < kCoincidentVelocity * kCoincidentVelocity) {
        return a;
    }
    const double scale = m_dv == 2 ? landau_prefactor<2>(r2) : landau_prefactor<3>(r2);
    for (int i = 0; i < m_dv; ++i) {
        for (int j = 0; j < m_dv; ++j) {
            a[i * m_dv + j] = scale * ((i == j ? 1.0 : 0.0) - z[i] * z[j] / r2);
        }
    }
    return a;
}

void LandauKernel::apply(std::span<const double> z, std::span<const double> y, std::span<double> out) const {
    double r2 = 0.0;
    double zy = 0.0;
    for (int i = 0; i < m_dv; ++i) {
        r2 += z[i] * z[i];
        zy += z[i] * y[i];
    }
    if (r2 < kCoincidentVelocity * kCoincidentVelocity) {
        for (int i = 0; i < m_dv; ++i) out[i] = 0.0;
        return;
    }
    const double scale = m_dv == 2 ? landau_prefactor<2>(r2) : landau_prefactor<3>(r2);
    const double proj = zy / r2;
    for (int i = 0; i < m_dv; ++i) out[i] = scale * (y[i] - proj * z[i]);
}

}  // namespace vmlpic
