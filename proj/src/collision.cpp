#include "vmlpic/collision.hpp"

#include <algorithm>
#include <cmath>

#include "vmlpic/kernels.hpp"

namespace vmlpic {

CellIndex::CellIndex(const ParticleEnsemble& particles, const Grid& grid) {
    const std::size_t n = particles.size();
    const int M = grid.M;
    m_cell_of.resize(n);
    m_offsets.assign(M + 1, 0);
    for (std::size_t p = 0; p < n; ++p) {
        int j = static_cast<int>(std::floor(particles.x[p] / grid.eta));
        j = std::clamp(j, 0, M - 1);
        m_cell_of[p] = j;
        ++m_offsets[j + 1];
    }
    for (int j = 0; j < M; ++j) m_offsets[j + 1] += m_offsets[j];
    m_indices.resize(n);
    std::vector<std::size_t> cursor(m_offsets.begin(), m_offsets.end() - 1);
    for (std::size_t p = 0; p < n; ++p) m_indices[cursor[m_cell_of[p]]++] = p;
}

std::vector<int> CellIndex::neighbors(int j) const {
    const int M = cells();
    std::vector<int> out;
    for (int d : {-1, 0, 1}) {
        const int c = ((j + d) % M + M) % M;
        if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
    }
    return out;
}

namespace {

// Particles gathered in cell order so each cell is a contiguous range.
template <int Dv>
struct Gathered {
    std::vector<double> x, w, v, s, U;
};

template <int Dv>
inline void interact(Gathered<Dv>& g, std::size_t a, std::size_t b, const HatKernel& hat, double L) {
    const double psi = hat(periodic_separation(g.x[a], g.x[b], L));
    if (psi == 0.0) return;
    double z[Dv];
    double ds[Dv];
    double r2 = 0.0;
    double zds = 0.0;
    for (int i = 0; i < Dv; ++i) {
        z[i] = g.v[a * Dv + i] - g.v[b * Dv + i];
        ds[i] = g.s[a * Dv + i] - g.s[b * Dv + i];
        r2 += z[i] * z[i];
        zds += z[i] * ds[i];
    }
    if (r2 < kCoincidentVelocity * kCoincidentVelocity) return;
    const double scale = psi * landau_prefactor<Dv>(r2);
    const double proj = zds / r2;
    const double wa = g.w[a];
    const double wb = g.w[b];
    for (int i = 0; i < Dv; ++i) {
        const double f = scale * (ds[i] - proj * z[i]);
        g.U[a * Dv + i] += wb * f;
        g.U[b * Dv + i] -= wa * f;
    }
}

template <int Dv>
std::vector<double> collision_force_impl(const ParticleEnsemble& particles, std::span<const double> scores,
                                         const CellIndex& index, const Grid& grid) {
    const std::size_t n = particles.size();
    const int M = grid.M;
    Gathered<Dv> g;
    g.x.resize(n);
    g.w.resize(n);
    g.v.resize(n * Dv);
    g.s.resize(n * Dv);
    g.U.assign(n * Dv, 0.0);
    std::vector<std::size_t> begin(M + 1, 0);
    std::size_t k = 0;
    for (int j = 0; j < M; ++j) {
        begin[j] = k;
        for (std::size_t p : index.cell(j)) {
            g.x[k] = particles.x[p];
            g.w[k] = particles.w[p];
            for (int i = 0; i < Dv; ++i) {
                g.v[k * Dv + i] = particles.v[p * Dv + i];
                g.s[k * Dv + i] = scores[p * Dv + i];
            }
            ++k;
        }
    }
    begin[M] = k;

    const HatKernel hat(grid.eta);
    for (int j = 0; j < M; ++j) {
        for (std::size_t a = begin[j]; a < begin[j + 1]; ++a) {
            for (std::size_t b = a + 1; b < begin[j + 1]; ++b) interact<Dv>(g, a, b, hat, grid.L);
        }
        // each adjacent cell pair once; with M = 2 the two cells are adjacent on both sides
        if (M >= 3 || (M == 2 && j == 0)) {
            const int jn = (j + 1) % M;
            for (std::size_t a = begin[j]; a < begin[j + 1]; ++a) {
                for (std::size_t b = begin[jn]; b < begin[jn + 1]; ++b) interact<Dv>(g, a, b, hat, grid.L);
            }
        }
    }

    std::vector<double> U(n * Dv);
    k = 0;
    for (int j = 0; j < M; ++j) {
        for (std::size_t p : index.cell(j)) {
            for (int i = 0; i < Dv; ++i) U[p * Dv + i] = g.U[k * Dv + i];
            ++k;
        }
    }
    return U;
}

}  // namespace

std::vector<double> collision_force(const ParticleEnsemble& particles, std::span<const double> scores,
                                    const CellIndex& index, const Grid& grid) {
    const int dv = particles.dv;
    if (scores.size() != particles.size() * dv) throw Error("collision_force: score array has wrong shape");
    if (index.size() != particles.size() || index.cells() != grid.M) {
        throw Error("collision_force: cell index does not match the particles");
    }
    for (double s : scores) {
        if (!std::isfinite(s)) throw Error("invalid score input");
    }
    return dv == 2 ? collision_force_impl<2>(particles, scores, index, grid)
                   : collision_force_impl<3>(particles, scores, index, grid);
}

void collision_push(ParticleEnsemble& particles, std::span<const double> U, double nu, double dt) {
    if (U.size() != particles.v.size()) throw Error("collision_push: force array has wrong shape");
    if (nu == 0.0) return;
    const double c = dt * nu;
    for (std::size_t i = 0; i < U.size(); ++i) particles.v[i] -= c * U[i];
}

}  // namespace vmlpic
