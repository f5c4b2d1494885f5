#pragma once

#include <array>
#include <string>

namespace teq {

enum class Color { R, G, B };
enum class Exposure { S, M, L };

constexpr std::array<Exposure, 3> kExposures = {Exposure::S, Exposure::M, Exposure::L};

char color_code(Color c);
char exposure_code(Exposure e);
int exposure_index(Exposure e); // S=0, M=1, L=2

/// Tri-exposure quad-bayer macro pattern: a 4x4 grid of (color, exposure)
/// cells tiled over the frame. Color blocks follow RGGB at 2x2-block
/// granularity; each 2x2 same-color block holds one L, two M and one S pixel.
class TeqLayout {
public:
    struct Cell {
        Color color;
        Exposure exposure;
    };

    /// Default pattern: within each color block, top-left = L, the diagonal
    /// pair = M, bottom-right = S.
    static TeqLayout standard();

    /// Builds from a 4x4 table of "<color><exposure>" codes (e.g. "RL", "GM").
    /// Throws std::invalid_argument unless the table satisfies the layout
    /// invariants (RGGB blocks, one L / two M / one S per block).
    static TeqLayout from_table(const std::array<std::array<std::string, 4>, 4>& table);

    std::array<std::array<std::string, 4>, 4> to_table() const;

    const Cell& cell(int y, int x) const { return cells_[(y & 3) * 4 + (x & 3)]; }
    Color color_at(int y, int x) const { return cell(y, x).color; }
    Exposure exposure_at(int y, int x) const { return cell(y, x).exposure; }

    bool operator==(const TeqLayout& o) const;

private:
    TeqLayout() = default;
    void validate() const;

    std::array<Cell, 16> cells_{};
};

} // namespace teq
