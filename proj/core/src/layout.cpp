#include "teq/layout.hpp"

#include <stdexcept>

namespace teq {

char color_code(Color c) {
    switch (c) {
    case Color::R: return 'R';
    case Color::G: return 'G';
    case Color::B: return 'B';
    }
    return '?';
}

char exposure_code(Exposure e) {
    switch (e) {
    case Exposure::S: return 'S';
    case Exposure::M: return 'M';
    case Exposure::L: return 'L';
    }
    return '?';
}

int exposure_index(Exposure e) { return static_cast<int>(e); }

namespace {

Color parse_color(char c) {
    switch (c) {
    case 'R': return Color::R;
    case 'G': return Color::G;
    case 'B': return Color::B;
    }
    throw std::invalid_argument(std::string("layout: bad color code '") + c + "'");
}

Exposure parse_exposure(char c) {
    switch (c) {
    case 'S': return Exposure::S;
    case 'M': return Exposure::M;
    case 'L': return Exposure::L;
    }
    throw std::invalid_argument(std::string("layout: bad exposure code '") + c + "'");
}

Color rggb_block_color(int by, int bx) {
    if (by == 0) return bx == 0 ? Color::R : Color::G;
    return bx == 0 ? Color::G : Color::B;
}

} // namespace

TeqLayout TeqLayout::standard() {
    TeqLayout l;
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) {
            Cell& c = l.cells_[y * 4 + x];
            c.color = rggb_block_color(y / 2, x / 2);
            const int iy = y & 1, ix = x & 1;
            if (iy == 0 && ix == 0)
                c.exposure = Exposure::L;
            else if (iy == 1 && ix == 1)
                c.exposure = Exposure::S;
            else
                c.exposure = Exposure::M;
        }
    l.validate();
    return l;
}

TeqLayout TeqLayout::from_table(const std::array<std::array<std::string, 4>, 4>& table) {
    TeqLayout l;
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) {
            const std::string& code = table[y][x];
            if (code.size() != 2)
                throw std::invalid_argument("layout: cell code must be 2 characters, got '" +
                                            code + "'");
            l.cells_[y * 4 + x] = {parse_color(code[0]), parse_exposure(code[1])};
        }
    l.validate();
    return l;
}

std::array<std::array<std::string, 4>, 4> TeqLayout::to_table() const {
    std::array<std::array<std::string, 4>, 4> table;
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) {
            const Cell& c = cells_[y * 4 + x];
            table[y][x] = std::string{color_code(c.color), exposure_code(c.exposure)};
        }
    return table;
}

void TeqLayout::validate() const {
    for (int by = 0; by < 2; ++by)
        for (int bx = 0; bx < 2; ++bx) {
            const Color expect = rggb_block_color(by, bx);
            int n_s = 0, n_m = 0, n_l = 0;
            for (int iy = 0; iy < 2; ++iy)
                for (int ix = 0; ix < 2; ++ix) {
                    const Cell& c = cells_[(by * 2 + iy) * 4 + (bx * 2 + ix)];
                    if (c.color != expect)
                        throw std::invalid_argument(
                            "layout: color blocks must follow RGGB at 2x2-block granularity");
                    switch (c.exposure) {
                    case Exposure::S: ++n_s; break;
                    case Exposure::M: ++n_m; break;
                    case Exposure::L: ++n_l; break;
                    }
                }
            if (n_s != 1 || n_m != 2 || n_l != 1)
                throw std::invalid_argument(
                    "layout: each color block needs exactly one L, two M and one S pixel");
        }
}

bool TeqLayout::operator==(const TeqLayout& o) const {
    for (int i = 0; i < 16; ++i)
        if (cells_[i].color != o.cells_[i].color || cells_[i].exposure != o.cells_[i].exposure)
            return false;
    return true;
}

} // namespace teq
