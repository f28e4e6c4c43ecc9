#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

#include "hcl/error.hpp"
#include "hcl/viz.hpp"

namespace hcl {
namespace {

std::string shortest(double v) {
    std::array<char, 32> buf{};
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

double parse_double(const std::string& s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw DataError("bad coordinate '" + s + "' in projection CSV");
    return v;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    if (!out) throw DataError("failed writing " + path.string());
}

}  // namespace

std::vector<std::filesystem::path> export_projection(const std::filesystem::path& dir,
                                                     const std::vector<ProjectionRow>& rows,
                                                     ColorBy color_by) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());

    std::ostringstream csv;
    csv << "id,x,y,level1_concept,probe_class\n";
    for (const auto& r : rows)
        csv << r.id << ',' << shortest(r.x) << ',' << shortest(r.y) << ',' << r.level1_concept << ','
            << r.probe_class << '\n';
    std::vector<std::filesystem::path> written{dir / "projection.csv"};
    write_file(written.back(), csv.str());

    std::vector<std::pair<double, double>> points;
    for (const auto& r : rows) points.emplace_back(r.x, r.y);
    if (color_by == ColorBy::level1 || color_by == ColorBy::both) {
        std::vector<std::string> labels;
        for (const auto& r : rows) labels.push_back(r.level1_concept);
        written.push_back(dir / "projection_level1.svg");
        write_file(written.back(), render_scatter_svg(points, labels, "t-SNE, colored by level-1 concept"));
    }
    if (color_by == ColorBy::probe_class || color_by == ColorBy::both) {
        std::vector<std::string> labels;
        for (const auto& r : rows) labels.push_back(r.probe_class);
        written.push_back(dir / "projection_class.svg");
        write_file(written.back(), render_scatter_svg(points, labels, "t-SNE, colored by probe class"));
    }
    return written;
}

std::vector<ProjectionRow> read_projection_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::string line;
    std::getline(in, line);  // header
    std::vector<ProjectionRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        if (cells.size() != 5) throw DataError("projection CSV row has " + std::to_string(cells.size()) + " fields");
        rows.push_back({cells[0], parse_double(cells[1]), parse_double(cells[2]), cells[3], cells[4]});
    }
    return rows;
}

}  // namespace hcl
