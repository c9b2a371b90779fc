#pragma once

#include "rmt/core.hpp"
#include "rmt/stats.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace rmt {

/// Shortest round-trip decimal form; "nan", "inf", "-inf" for non-finite values.
inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

struct TrialRecord {
  std::string experiment;
  std::size_t n = 0;
  std::string law;
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
  std::string observable;
  double value = 0.0;
  double wall_seconds = 0.0;  // in memory only; files stay schedule- and clock-free
};

/// One JSON object per line, ordered by stream_id (ties keep insertion order).
inline std::string to_jsonl(std::vector<TrialRecord> records) {
  std::stable_sort(records.begin(), records.end(),
                   [](const TrialRecord& a, const TrialRecord& b) { return a.stream_id < b.stream_id; });
  std::string out;
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["experiment"] = r.experiment;
    j["n"] = r.n;
    j["law"] = r.law;
    j["seed"] = r.seed;
    j["stream_id"] = r.stream_id;
    j["observable"] = r.observable;
    if (std::isfinite(r.value))
      j["value"] = r.value;
    else
      j["value"] = format_number(r.value);
    out += j.dump();
    out += '\n';
  }
  return out;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row) { rows.push_back(std::move(row)); }

  std::string str() const {
    auto line = [](const std::vector<std::string>& cells) {
      std::string s;
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) s += ',';
        const bool quote = cells[i].find_first_of(",\"\n") != std::string::npos;
        if (!quote) {
          s += cells[i];
          continue;
        }
        s += '"';
        for (char c : cells[i]) {
          if (c == '"') s += '"';
          s += c;
        }
        s += '"';
      }
      return s + '\n';
    };
    std::string out = line(header);
    for (const auto& r : rows) out += line(r);
    return out;
  }
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::InvalidArgument, "cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw Error(ErrorKind::InvalidArgument, "failed writing " + path.string());
}

// ---------------------------------------------------------------------------
// SVG

namespace detail {

inline std::string svg_header(int w, int h) {
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 "
     << w << ' ' << h << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  return os.str();
}

inline std::string fixed(double x) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << x;
  return os.str();
}

}  // namespace detail

/// Eigenvalue cloud on [-extent, extent]^2 with the unit circle overlaid.
inline std::string svg_eigenvalue_scatter(const std::vector<Complex>& points, double extent = 1.5,
                                          const std::string& title = "") {
  const int size = 600;
  const double half = size / 2.0;
  const double scale = half / extent;
  std::string s = detail::svg_header(size, size);
  s += "<line x1=\"0\" y1=\"" + detail::fixed(half) + "\" x2=\"" + std::to_string(size) + "\" y2=\"" +
       detail::fixed(half) + "\" stroke=\"#ccc\"/>\n";
  s += "<line x1=\"" + detail::fixed(half) + "\" y1=\"0\" x2=\"" + detail::fixed(half) + "\" y2=\"" +
       std::to_string(size) + "\" stroke=\"#ccc\"/>\n";
  s += "<circle cx=\"" + detail::fixed(half) + "\" cy=\"" + detail::fixed(half) + "\" r=\"" + detail::fixed(scale) +
       "\" fill=\"none\" stroke=\"#d33\" stroke-width=\"1.5\"/>\n";
  for (const auto& z : points) {
    const double x = half + z.real() * scale;
    const double y = half - z.imag() * scale;
    if (x < 0 || x > size || y < 0 || y > size) continue;
    s += "<circle cx=\"" + detail::fixed(x) + "\" cy=\"" + detail::fixed(y) + "\" r=\"1.6\" fill=\"#236\"/>\n";
  }
  if (!title.empty()) s += "<text x=\"10\" y=\"20\" font-family=\"monospace\" font-size=\"13\">" + title + "</text>\n";
  return s + "</svg>\n";
}

struct LogLogPoint {
  double x = 0.0;
  double y = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

/// Log-log scatter with vertical interval whiskers. Points with y <= 0 are
/// drawn as whiskers only (a zero count has no place on a log axis).
inline std::string svg_loglog(const std::vector<LogLogPoint>& pts, const std::string& xlabel,
                              const std::string& ylabel, const std::string& title = "") {
  const int w = 640, h = 480, pad = 60;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& p : pts) {
    if (p.x <= 0) continue;
    xmin = std::min(xmin, std::log10(p.x));
    xmax = std::max(xmax, std::log10(p.x));
    for (double v : {p.y, p.lo, p.hi}) {
      if (v <= 0) continue;
      ymin = std::min(ymin, std::log10(v));
      ymax = std::max(ymax, std::log10(v));
    }
  }
  if (xmin > xmax) xmin = 0, xmax = 1;
  if (ymin > ymax) ymin = -1, ymax = 0;
  if (xmax - xmin < 1e-9) xmax = xmin + 1;
  if (ymax - ymin < 1e-9) ymax = ymin + 1;
  ymin = std::floor(ymin), ymax = std::ceil(ymax);
  auto px = [&](double x) { return pad + (std::log10(x) - xmin) / (xmax - xmin) * (w - 2 * pad); };
  auto py = [&](double y) { return h - pad - (std::log10(y) - ymin) / (ymax - ymin) * (h - 2 * pad); };
  auto py_clamped = [&](double y) { return y > 0 ? py(y) : static_cast<double>(h - pad); };

  std::string s = detail::svg_header(w, h);
  s += "<rect x=\"" + std::to_string(pad) + "\" y=\"" + std::to_string(pad) + "\" width=\"" +
       std::to_string(w - 2 * pad) + "\" height=\"" + std::to_string(h - 2 * pad) +
       "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int e = static_cast<int>(ymin); e <= static_cast<int>(ymax); ++e) {
    const double y = py(std::pow(10.0, e));
    s += "<text x=\"5\" y=\"" + detail::fixed(y + 4) + "\" font-family=\"monospace\" font-size=\"11\">1e" +
         std::to_string(e) + "</text>\n";
  }
  s += "<text x=\"" + std::to_string(w / 2 - 40) + "\" y=\"" + std::to_string(h - 15) +
       "\" font-family=\"monospace\" font-size=\"12\">" + xlabel + " (log10 " + detail::fixed(xmin) + " .. " +
       detail::fixed(xmax) + ")</text>\n";
  s += "<text x=\"5\" y=\"" + std::to_string(pad - 10) + "\" font-family=\"monospace\" font-size=\"12\">" + ylabel +
       "</text>\n";
  for (const auto& p : pts) {
    if (p.x <= 0) continue;
    const double x = px(p.x);
    if (p.hi > 0)
      s += "<line x1=\"" + detail::fixed(x) + "\" y1=\"" + detail::fixed(py_clamped(p.lo)) + "\" x2=\"" +
           detail::fixed(x) + "\" y2=\"" + detail::fixed(py(p.hi)) + "\" stroke=\"#888\"/>\n";
    if (p.y > 0)
      s += "<circle cx=\"" + detail::fixed(x) + "\" cy=\"" + detail::fixed(py(p.y)) + "\" r=\"3\" fill=\"#236\"/>\n";
  }
  if (!title.empty())
    s += "<text x=\"" + std::to_string(pad) + "\" y=\"20\" font-family=\"monospace\" font-size=\"13\">" + title +
         "</text>\n";
  return s + "</svg>\n";
}

}  // namespace rmt
