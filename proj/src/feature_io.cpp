#include "hcl/feature_io.hpp"

#include <array>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include "hcl/error.hpp"

namespace hcl {
namespace {

template <typename T>
void put_le(std::ostream& out, T value) {
    std::array<unsigned char, sizeof(T)> bytes{};
    for (std::size_t i = 0; i < sizeof(T); ++i)
        bytes[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

template <typename T>
T get_le(std::istream& in, const std::filesystem::path& path) {
    std::array<unsigned char, sizeof(T)> bytes{};
    if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size()))
        throw DataError("truncated feature file: " + path.string());
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(bytes[i]) << (8 * i);
    return value;
}

std::string format_double(double v) {
    std::array<char, 32> buf{};
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

}  // namespace

void write_feature_binary(const std::filesystem::path& path, const Matrix& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write feature file: " + path.string());
    put_le<std::uint32_t>(out, kFeatureMagic);
    put_le<std::uint64_t>(out, rows.rows());
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(rows.cols()));
    for (double v : rows.flat()) {
        const float f = static_cast<float>(v);
        std::uint32_t bits;
        std::memcpy(&bits, &f, sizeof bits);
        put_le<std::uint32_t>(out, bits);
    }
    if (!out) throw DataError("failed writing feature file: " + path.string());
}

Matrix read_feature_binary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("missing feature file: " + path.string());
    if (get_le<std::uint32_t>(in, path) != kFeatureMagic)
        throw DataError("bad magic in feature file: " + path.string());
    const auto rows = get_le<std::uint64_t>(in, path);
    const auto dim = get_le<std::uint32_t>(in, path);
    Matrix out(rows, dim);
    for (double& v : out.flat()) {
        const auto bits = get_le<std::uint32_t>(in, path);
        float f;
        std::memcpy(&f, &bits, sizeof f);
        v = static_cast<double>(f);
    }
    return out;
}

void write_feature_csv(const std::filesystem::path& path, const FeatureTable& table) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write feature file: " + path.string());
    for (std::size_t r = 0; r < table.ids.size(); ++r) {
        out << table.ids[r];
        for (double v : table.values.row(r)) out << ',' << format_double(v);
        out << '\n';
    }
}

FeatureTable read_feature_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("missing feature file: " + path.string());
    FeatureTable table;
    std::vector<double> values;
    std::size_t dim = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');
        const std::string id = cell;
        std::size_t count = 0;
        while (std::getline(ss, cell, ',')) {
            double v = 0.0;
            auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size())
                throw DataError("bad feature value for image " + id + ": '" + cell + "'");
            values.push_back(v);
            ++count;
        }
        if (table.ids.empty()) dim = count;
        if (count != dim)
            throw DataError("dimension mismatch for image " + id + ": expected " +
                            std::to_string(dim) + ", got " + std::to_string(count));
        table.ids.push_back(id);
    }
    table.values = Matrix(table.ids.size(), dim);
    std::copy(values.begin(), values.end(), table.values.flat().begin());
    return table;
}

}  // namespace hcl
