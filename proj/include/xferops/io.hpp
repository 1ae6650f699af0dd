#pragma once

#include <cstdio>
#include <ostream>
#include <string>

#include "grid.hpp"
#include "measure.hpp"

namespace xferops {

// All floats serialize with 17 significant digits so round-trips are exact.
inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_csv(std::ostream& os, const GridFunction& f) {
    os << "x,value_re,value_im\n";
    for (std::size_t i = 0; i < f.size(); ++i) {
        os << fmt17(f.grid().midpoint(i)) << ',' << fmt17(f.value(i).real()) << ','
           << fmt17(f.value(i).imag()) << '\n';
    }
}

inline void write_csv(std::ostream& os, const CellMeasure& m) {
    os << "cell_left,cell_right,mass\n";
    for (std::size_t i = 0; i < m.size(); ++i) {
        os << fmt17(m.grid().left(i)) << ',' << fmt17(m.grid().right(i)) << ','
           << fmt17(m.mass(i)) << '\n';
    }
    if (m.has_atoms()) {
        os << "atom_pos,atom_mass\n";
        for (const auto& a : m.atoms()) os << fmt17(a.pos) << ',' << fmt17(a.mass) << '\n';
    }
}

} // namespace xferops
