#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"

namespace xferops {

struct Atom {
    double pos = 0.0;  // in [0,1)
    double mass = 0.0; // >= 0
};

// Nonnegative mass per dyadic cell plus a finite atom list. Within a cell the
// mass is read as uniformly spread; atoms are exact point masses kept apart so
// delta measures never smear.
class CellMeasure {
public:
    explicit CellMeasure(DyadicGrid grid)
        : grid_(grid), masses_(grid.size(), 0.0) {}

    CellMeasure(DyadicGrid grid, std::vector<double> masses, std::vector<Atom> atoms = {})
        : grid_(grid), masses_(std::move(masses)), atoms_(std::move(atoms)) {
        if (masses_.size() != grid_.size()) throw GridMismatch("CellMeasure: wrong mass count");
        normalize_atoms_();
    }

    static CellMeasure lebesgue(DyadicGrid grid) {
        double m = 1.0 / static_cast<double>(grid.size());
        return CellMeasure(grid, std::vector<double>(grid.size(), m));
    }

    // Cell masses as exact CDF differences.
    static CellMeasure from_cdf(DyadicGrid grid, const std::function<double(double)>& cdf) {
        std::vector<double> m(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) {
            m[i] = std::max(0.0, cdf(grid.right(i)) - cdf(grid.left(i)));
        }
        return CellMeasure(grid, std::move(m));
    }

    // arcsine law on (0,1): cdf F(x) = (2/pi) asin(sqrt(x)); stays exact at the
    // endpoint singularities of the density.
    static CellMeasure arcsine(DyadicGrid grid) {
        return from_cdf(grid, [](double x) {
            x = std::clamp(x, 0.0, 1.0);
            return (2.0 / M_PI) * std::asin(std::sqrt(x));
        });
    }

    // Midpoint-sampled density, normalized to the requested total.
    static CellMeasure from_density(DyadicGrid grid, const std::function<double(double)>& rho,
                                    double total = 1.0) {
        std::vector<double> m(grid.size());
        double s = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            m[i] = std::max(0.0, rho(grid.midpoint(i))) / static_cast<double>(grid.size());
            s += m[i];
        }
        if (s > 0.0)
            for (auto& x : m) x *= total / s;
        return CellMeasure(grid, std::move(m));
    }

    static CellMeasure point_mass(DyadicGrid grid, double pos, double mass = 1.0) {
        CellMeasure m(grid);
        m.atoms_.push_back({pos - std::floor(pos), mass});
        return m;
    }

    const DyadicGrid& grid() const { return grid_; }
    int level() const { return grid_.level(); }
    std::size_t size() const { return masses_.size(); }
    double mass(std::size_t i) const { return masses_[i]; }
    double& mass(std::size_t i) { return masses_[i]; }
    const std::vector<double>& masses() const { return masses_; }
    const std::vector<Atom>& atoms() const { return atoms_; }
    bool has_atoms() const { return !atoms_.empty(); }

    void add_atom(double pos, double mass) {
        atoms_.push_back({pos - std::floor(pos), mass});
        normalize_atoms_();
    }

    double total() const {
        double s = 0.0;
        for (double m : masses_) s += m;
        for (const auto& a : atoms_) s += a.mass;
        return s;
    }

    bool is_probability(double tol = 1e-12) const { return std::abs(total() - 1.0) < tol; }

    // Cell mass + share of atoms sitting in the cell.
    double cell_total(std::size_t i) const {
        double s = masses_[i];
        for (const auto& a : atoms_)
            if (grid_.cell_of(a.pos) == i) s += a.mass;
        return s;
    }

    // Uniform split of every cell; exact embedding of the measure.
    CellMeasure refined(int extra = 1) const {
        CellMeasure m = *this;
        for (int k = 0; k < extra; ++k) {
            std::vector<double> v(m.masses_.size() * 2);
            for (std::size_t i = 0; i < m.masses_.size(); ++i)
                v[2 * i] = v[2 * i + 1] = 0.5 * m.masses_[i];
            m = CellMeasure(m.grid_.refined(), std::move(v), m.atoms_);
        }
        return m;
    }

    CellMeasure to_level(int level) const {
        if (level < grid_.level()) {
            // aggregate children
            CellMeasure m = *this;
            while (m.level() > level) {
                std::vector<double> v(m.masses_.size() / 2);
                for (std::size_t i = 0; i < v.size(); ++i)
                    v[i] = m.masses_[2 * i] + m.masses_[2 * i + 1];
                m = CellMeasure(DyadicGrid(m.level() - 1), std::move(v), m.atoms_);
            }
            return m;
        }
        return refined(level - grid_.level());
    }

private:
    void normalize_atoms_() {
        for (auto& a : atoms_) {
            if (a.mass < 0.0) throw DomainError("CellMeasure: negative atom mass");
            a.pos -= std::floor(a.pos);
        }
        std::sort(atoms_.begin(), atoms_.end(),
                  [](const Atom& a, const Atom& b) { return a.pos < b.pos; });
        // merge identical positions
        std::vector<Atom> merged;
        for (const auto& a : atoms_) {
            if (!merged.empty() && merged.back().pos == a.pos)
                merged.back().mass += a.mass;
            else
                merged.push_back(a);
        }
        merged.erase(std::remove_if(merged.begin(), merged.end(),
                                    [](const Atom& a) { return a.mass == 0.0; }),
                     merged.end());
        atoms_ = std::move(merged);
    }

    DyadicGrid grid_;
    std::vector<double> masses_;
    std::vector<Atom> atoms_;
};

// 1/2 L1 distance on cell masses plus 1/2 L1 mismatch of atoms matched by
// exact position.
inline double total_variation(const CellMeasure& a, const CellMeasure& b) {
    int lvl = std::max(a.level(), b.level());
    CellMeasure x = a.to_level(lvl);
    CellMeasure y = b.to_level(lvl);
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += std::abs(x.mass(i) - y.mass(i));
    std::map<double, double> atom_delta;
    for (const auto& at : x.atoms()) atom_delta[at.pos] += at.mass;
    for (const auto& at : y.atoms()) atom_delta[at.pos] -= at.mass;
    for (const auto& [pos, d] : atom_delta) s += std::abs(d);
    return 0.5 * s;
}

} // namespace xferops
