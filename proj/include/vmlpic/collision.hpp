#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vmlpic/core.hpp"
#include "vmlpic/pic.hpp"

namespace vmlpic {

/// Particles bucketed by cell, floor(x / eta), in compressed-row form.
class CellIndex {
public:
    CellIndex() = default;
    CellIndex(const ParticleEnsemble& particles, const Grid& grid);

    int cells() const { return static_cast<int>(m_offsets.size()) - 1; }
    std::span<const std::size_t> cell(int j) const {
        return {m_indices.data() + m_offsets[j], m_offsets[j + 1] - m_offsets[j]};
    }
    int cell_of(std::size_t p) const { return m_cell_of[p]; }
    std::size_t size() const { return m_indices.size(); }

    /// Distinct cells among {j-1, j, j+1} (periodic).
    std::vector<int> neighbors(int j) const;

private:
    std::vector<std::size_t> m_offsets;
    std::vector<std::size_t> m_indices;
    std::vector<int> m_cell_of;
};

inline CellIndex build_cell_index(const ParticleEnsemble& particles, const Grid& grid) {
    return CellIndex(particles, grid);
}

/// U_p = sum_q w_q psi(x_p - x_q) A(v_p - v_q) (s_p - s_q), n x dv row-major.
/// Only pairs in the same or adjacent cells are visited; each unordered pair is
/// evaluated once and applied to both particles.
std::vector<double> collision_force(const ParticleEnsemble& particles, std::span<const double> scores,
                                    const CellIndex& index, const Grid& grid);

/// v_p -= dt nu U_p.
void collision_push(ParticleEnsemble& particles, std::span<const double> U, double nu, double dt);

}  // namespace vmlpic
