#include "hydropinn/gridio.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace hydropinn {

namespace {

constexpr char kMagic[4] = {'F', '3', '2', 'F'};

template <typename T>
void put(std::ofstream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& is) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (is.gcount() != sizeof(T)) {
        throw std::runtime_error("grid file: truncated payload");
    }
    return v;
}

}  // namespace

void write_grid(const std::string& path, const Field2D& f) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("grid file: cannot open '" + path + "'");
    os.write(kMagic, 4);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(f.rows));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(f.cols));
    put<float>(os, static_cast<float>(f.spacing));
    for (double v : f.v) put<float>(os, static_cast<float>(v));
    if (!os) throw std::runtime_error("grid file: write failed");
}

Field2D read_grid(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("grid file: cannot open '" + path + "'");
    char magic[4];
    is.read(magic, 4);
    if (is.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0) {
        throw std::runtime_error("grid file: bad magic");
    }
    const auto rows = get<std::uint32_t>(is);
    const auto cols = get<std::uint32_t>(is);
    const auto spacing = get<float>(is);
    if (rows == 0 || cols == 0 || !(spacing > 0.0f)) {
        throw std::runtime_error("grid file: bad header");
    }
    Field2D f(static_cast<int>(rows), static_cast<int>(cols), 0.0,
              static_cast<double>(spacing));
    for (auto& v : f.v) v = static_cast<double>(get<float>(is));
    return f;
}

void write_mask(const std::string& path, const BitMask2D& m, double spacing) {
    Field2D f(m.rows, m.cols, 0.0, spacing);
    for (int k = 0; k < f.size(); ++k) f.v[k] = m.bits[k] ? 1.0f : 0.0f;
    write_grid(path, f);
}

BitMask2D read_mask(const std::string& path) {
    Field2D f = read_grid(path);
    BitMask2D m(f.rows, f.cols, false);
    for (int k = 0; k < f.size(); ++k) m.bits[k] = f.v[k] != 0.0 ? 1 : 0;
    return m;
}

}  // namespace hydropinn
