#include "wrecon/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include "wrecon/errors.hpp"

namespace wrecon {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_double(const std::string& s, int line, const char* col) {
    if (s == "nan" || s == "-nan" || s == "NaN") return std::numeric_limits<double>::quiet_NaN();
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw DataError("CSV line " + std::to_string(line) + ": column " + col + " is not a number ('" + s + "')");
}

int parse_int(const std::string& s, int line, const char* col) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(s, &used);
        if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw DataError("CSV line " + std::to_string(line) + ": column " + col + " is not an integer ('" + s + "')");
}

std::string esc(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string fmt(double v) {
    std::ostringstream s;
    s << std::setprecision(3) << v;
    return s.str();
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

void write_all(const std::vector<std::pair<std::filesystem::path, std::string>>& files) {
    for (const auto& [path, text] : files) {
        std::ofstream out(path);
        if (!out) throw IoError("cannot write " + path.string());
        out << text;
        if (!out) throw IoError("write failed for " + path.string());
    }
}

}  // namespace

std::vector<MetricsRow> parse_metrics_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.empty()) throw DataError("metrics CSV is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string plain = "mask,depth_level,rmse,mae,pcc,pcc_skipped,samples";
    bool with_variant = false;
    if (line == "variant," + plain)
        with_variant = true;
    else if (line != plain)
        throw DataError("metrics CSV has an unexpected header: " + line);

    std::vector<MetricsRow> rows;
    int n = 1;
    while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto f = split_line(line);
        const std::size_t want = with_variant ? 8 : 7;
        if (f.size() != want)
            throw DataError("CSV line " + std::to_string(n) + ": expected " + std::to_string(want) + " fields, got " +
                            std::to_string(f.size()));
        std::size_t i = 0;
        MetricsRow r;
        if (with_variant) r.variant = f[i++];
        r.mask = f[i++];
        if (r.mask.empty()) throw DataError("CSV line " + std::to_string(n) + ": empty mask");
        r.depth_level = parse_int(f[i++], n, "depth_level");
        r.rmse = parse_double(f[i++], n, "rmse");
        r.mae = parse_double(f[i++], n, "mae");
        r.pcc = parse_double(f[i++], n, "pcc");
        r.pcc_skipped = parse_int(f[i++], n, "pcc_skipped");
        r.samples = parse_int(f[i++], n, "samples");
        if (!std::isfinite(r.rmse) || !std::isfinite(r.mae))
            throw DataError("CSV line " + std::to_string(n) + ": rmse and mae must be finite");
        rows.push_back(std::move(r));
    }
    if (rows.empty()) throw DataError("metrics CSV has a header but no rows");
    return rows;
}

std::string line_chart_svg(const std::string& title, const std::string& y_label, const std::vector<std::string>& x_labels,
                           const std::vector<Series>& series) {
    const double w = 640, h = 420, left = 90, right = 170, top = 50, bottom = 70;
    const double pw = w - left - right, ph = h - top - bottom;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& s : series)
        for (double v : s.values)
            if (std::isfinite(v)) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
    if (!std::isfinite(lo)) lo = 0, hi = 1;
    if (hi - lo < 1e-300) {
        const double pad = std::max(std::abs(hi) * 0.05, 1e-12);
        lo -= pad;
        hi += pad;
    }
    const double margin = 0.08 * (hi - lo);
    lo -= margin;
    hi += margin;
    const std::size_t nx = std::max<std::size_t>(x_labels.size(), 1);
    const auto xpos = [&](std::size_t i) { return left + (nx == 1 ? pw / 2 : pw * static_cast<double>(i) / (nx - 1)); };
    const auto ypos = [&](double v) { return top + ph * (1 - (v - lo) / (hi - lo)); };

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<text x=\"" << w / 2 << "\" y=\"28\" text-anchor=\"middle\" font-size=\"16\">" << esc(title) << "</text>\n";
    s << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double v = lo + (hi - lo) * k / 4.0;
        const double y = ypos(v);
        s << "<line x1=\"" << left << "\" x2=\"" << left + pw << "\" y1=\"" << y << "\" y2=\"" << y
          << "\" stroke=\"#ddd\"/>\n";
        s << "<text x=\"" << left - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << fmt(v) << "</text>\n";
    }
    for (std::size_t i = 0; i < x_labels.size(); ++i)
        s << "<text x=\"" << xpos(i) << "\" y=\"" << top + ph + 20 << "\" text-anchor=\"middle\">" << esc(x_labels[i])
          << "</text>\n";
    s << "<text transform=\"translate(22," << top + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">" << esc(y_label)
      << "</text>\n";
    s << "<text x=\"" << left + pw / 2 << "\" y=\"" << h - 20 << "\" text-anchor=\"middle\">observed variables</text>\n";

    for (std::size_t k = 0; k < series.size(); ++k) {
        const char* color = kPalette[k % std::size(kPalette)];
        std::ostringstream pts;
        for (std::size_t i = 0; i < series[k].values.size() && i < nx; ++i) {
            const double v = series[k].values[i];
            if (!std::isfinite(v)) continue;
            pts << xpos(i) << ',' << ypos(v) << ' ';
            s << "<circle cx=\"" << xpos(i) << "\" cy=\"" << ypos(v) << "\" r=\"3.5\" fill=\"" << color << "\"/>\n";
        }
        s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"" << pts.str() << "\"/>\n";
        const double ly = top + 16 + 20.0 * static_cast<double>(k);
        s << "<line x1=\"" << left + pw + 14 << "\" x2=\"" << left + pw + 38 << "\" y1=\"" << ly << "\" y2=\"" << ly
          << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        s << "<text x=\"" << left + pw + 44 << "\" y=\"" << ly + 4 << "\">" << esc(series[k].name) << "</text>\n";
    }
    s << "</svg>\n";
    return s.str();
}

std::string heatmap_panels_svg(const std::string& title, int height, int width,
                               const std::vector<std::pair<std::string, std::vector<double>>>& panels) {
    if (height < 1 || width < 1) throw DataError("heatmap needs a non-empty grid");
    const double cell = std::max(2.0, 240.0 / std::max(height, width));
    const double pw = cell * width, ph = cell * height, gap = 30, top = 60;
    double vmax = 0;
    for (const auto& [name, v] : panels) {
        if (v.size() != static_cast<std::size_t>(height) * width)
            throw DataError("heatmap panel '" + name + "' does not match the grid size");
        for (double x : v) {
            if (!std::isfinite(x)) throw DataError("heatmap panel '" + name + "' has non-finite values");
            vmax = std::max(vmax, std::abs(x));
        }
    }
    if (vmax == 0) vmax = 1;
    const double w = gap + static_cast<double>(panels.size()) * (pw + gap);
    const double h = top + ph + 50;
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\" font-family=\"sans-serif\" font-size=\"12\" shape-rendering=\"crispEdges\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<text x=\"" << w / 2 << "\" y=\"26\" text-anchor=\"middle\" font-size=\"16\">" << esc(title) << "</text>\n";
    for (std::size_t k = 0; k < panels.size(); ++k) {
        const double x0 = gap + static_cast<double>(k) * (pw + gap);
        s << "<text x=\"" << x0 + pw / 2 << "\" y=\"" << top - 8 << "\" text-anchor=\"middle\">" << esc(panels[k].first)
          << "</text>\n";
        const auto& v = panels[k].second;
        for (int i = 0; i < height; ++i)
            for (int j = 0; j < width; ++j) {
                const double t = std::clamp(v[static_cast<std::size_t>(i) * width + j] / vmax, -1.0, 1.0);
                // Blue (negative) through white to red (positive).
                const int r = t > 0 ? 255 : static_cast<int>(255 * (1 + t));
                const int b = t < 0 ? 255 : static_cast<int>(255 * (1 - t));
                const int g = static_cast<int>(255 * (1 - std::abs(t)));
                s << "<rect x=\"" << x0 + j * cell << "\" y=\"" << top + i * cell << "\" width=\"" << cell
                  << "\" height=\"" << cell << "\" fill=\"rgb(" << r << ',' << g << ',' << b << ")\"/>\n";
            }
    }
    s << "<text x=\"" << w / 2 << "\" y=\"" << top + ph + 30 << "\" text-anchor=\"middle\">colour scale: +/- "
      << fmt(vmax) << " m/s</text>\n";
    s << "</svg>\n";
    return s.str();
}

std::vector<std::filesystem::path> plot_metrics(const std::vector<MetricsRow>& rows, const std::filesystem::path& out_dir) {
    if (rows.empty()) throw DataError("no metrics to plot");
    std::vector<std::string> masks;
    std::vector<std::pair<std::string, int>> lines;  // (variant, depth) in order of appearance
    for (const auto& r : rows) {
        if (std::find(masks.begin(), masks.end(), r.mask) == masks.end()) masks.push_back(r.mask);
        const std::pair<std::string, int> key{r.variant, r.depth_level};
        if (std::find(lines.begin(), lines.end(), key) == lines.end()) lines.push_back(key);
    }
    const auto build = [&](const char* metric, double MetricsRow::*field) {
        std::vector<Series> series;
        for (const auto& [variant, depth] : lines) {
            Series s;
            s.name = (variant.empty() ? "" : variant + " ") + std::to_string(depth) + " m";
            s.values.assign(masks.size(), std::numeric_limits<double>::quiet_NaN());
            for (const auto& r : rows)
                if (r.variant == variant && r.depth_level == depth) {
                    const auto pos = std::find(masks.begin(), masks.end(), r.mask) - masks.begin();
                    s.values[static_cast<std::size_t>(pos)] = r.*field;
                }
            series.push_back(std::move(s));
        }
        return line_chart_svg(std::string(metric) + " by observed variables", metric, masks, series);
    };
    std::vector<std::pair<std::filesystem::path, std::string>> files{
        {out_dir / "rmse.svg", build("RMSE (m/s)", &MetricsRow::rmse)},
        {out_dir / "mae.svg", build("MAE (m/s)", &MetricsRow::mae)},
        {out_dir / "pcc.svg", build("PCC", &MetricsRow::pcc)},
    };
    std::filesystem::create_directories(out_dir);
    write_all(files);
    std::vector<std::filesystem::path> out;
    for (const auto& f : files) out.push_back(f.first);
    return out;
}

std::vector<std::filesystem::path> plot_fields(const nlohmann::json& dump, const std::filesystem::path& out_dir) {
    std::vector<std::pair<std::filesystem::path, std::string>> files;
    try {
        const int h = dump.at("height").get<int>();
        const int w = dump.at("width").get<int>();
        const auto mask = dump.at("mask").get<std::string>();
        const auto& depths = dump.at("depths");
        if (!depths.is_array() || depths.empty()) throw DataError("field dump lists no depths");
        for (const auto& d : depths) {
            const int level = d.at("level").get<int>();
            std::vector<std::pair<std::string, std::vector<double>>> panels{
                {"target", d.at("target").get<std::vector<double>>()},
                {"prediction", d.at("prediction").get<std::vector<double>>()},
                {"error", d.at("error").get<std::vector<double>>()},
            };
            files.emplace_back(out_dir / ("fields_" + std::to_string(level) + "m.svg"),
                               heatmap_panels_svg("w at " + std::to_string(level) + " m, observed " + mask, h, w, panels));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed field dump: ") + e.what());
    }
    std::filesystem::create_directories(out_dir);
    write_all(files);
    std::vector<std::filesystem::path> out;
    for (const auto& f : files) out.push_back(f.first);
    return out;
}

}  // namespace wrecon
