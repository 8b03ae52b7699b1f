#pragma once

// Output writers.  Everything numeric is printed with nine fixed decimals so
// repeated runs of a deterministic configuration produce byte-identical
// files.  Pixel columns and the events file use one-based pixel ids.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "evreg/sim.hpp"
#include "evreg/synthesis.hpp"

namespace evreg {

struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

inline std::string format_fixed(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(9) << v;
  std::string s = os.str();
  if (s == "-0.000000000") s = "0.000000000";  // single zero representation
  return s;
}

namespace detail {

inline std::ofstream open_for_write(const std::string& path) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
  }
  std::ofstream f(path);
  if (!f) throw IoError("cannot open for writing: " + path);
  return f;
}

}  // namespace detail

inline void write_trajectory_csv(const std::string& path, const SimResult& res) {
  auto f = detail::open_for_write(path);
  if (res.samples.empty()) throw IoError("write_trajectory_csv: no samples");
  const auto& first = res.samples.front();
  const Eigen::Index n = first.x.size();
  const Eigen::Index nc = first.xc.size();
  const Eigen::Index m = first.u.size();
  const Eigen::Index r = first.y.size();
  f << "t";
  for (Eigen::Index i = 0; i < n; ++i) f << ",x" << (i + 1);
  for (Eigen::Index i = 0; i < nc; ++i) f << ",xo" << (i + 1);
  for (Eigen::Index i = 0; i < m; ++i) f << ",u" << (i + 1);
  f << ",err";
  for (Eigen::Index i = 0; i < r; ++i) {
    f << ",y" << (i + 1) << ",z" << (i + 1) << ",zbar" << (i + 1) << ",q"
      << (i + 1);
  }
  f << "\n";
  for (const auto& s : res.samples) {
    f << format_fixed(s.t);
    for (Eigen::Index i = 0; i < n; ++i) f << "," << format_fixed(s.x(i));
    for (Eigen::Index i = 0; i < nc; ++i) f << "," << format_fixed(s.xc(i));
    for (Eigen::Index i = 0; i < m; ++i) f << "," << format_fixed(s.u(i));
    f << "," << format_fixed(s.err);
    for (Eigen::Index i = 0; i < r; ++i) {
      f << "," << format_fixed(s.y(i)) << "," << format_fixed(s.z(i)) << ","
        << format_fixed(s.zbar(i)) << "," << format_fixed(s.q(i));
    }
    f << "\n";
  }
  if (!f) throw IoError("write failed: " + path);
}

inline void write_events_csv(const std::string& path,
                             const std::vector<EventRecord>& events) {
  auto f = detail::open_for_write(path);
  f << "t,pixel,polarity,q_before,q_after\n";
  for (const auto& e : events) {
    f << format_fixed(e.t) << "," << (e.pixel + 1) << "," << e.polarity << ","
      << format_fixed(e.q_before) << "," << format_fixed(e.q_after) << "\n";
  }
  if (!f) throw IoError("write failed: " + path);
}

struct SweepRow {
  int r;
  double h_star;
  double err_max;
  double err_mean;
  long events;
};

inline void write_sweep_csv(const std::string& path,
                            const std::vector<SweepRow>& rows) {
  auto f = detail::open_for_write(path);
  f << "r,h_star,err_max,err_mean,events\n";
  for (const auto& row : rows) {
    f << row.r << "," << format_fixed(row.h_star) << ","
      << format_fixed(row.err_max) << "," << format_fixed(row.err_mean) << ","
      << row.events << "\n";
  }
  if (!f) throw IoError("write failed: " + path);
}

struct RunReport {
  double gamma;
  double g1_dc;
  double g2_dc;
  double g1_hinf;
  double delta_z_star;
  double h_star;
  double rho_star;
  double norm_d;
  double epsilon;
};

inline void write_report(const std::string& path, const RunReport& rep) {
  auto f = detail::open_for_write(path);
  f << "gamma=" << format_fixed(rep.gamma) << "\n";
  f << "G1_dc=" << format_fixed(rep.g1_dc) << "\n";
  f << "G2_dc=" << format_fixed(rep.g2_dc) << "\n";
  f << "G1_hinf=" << format_fixed(rep.g1_hinf) << "\n";
  f << "delta_z_star=" << format_fixed(rep.delta_z_star) << "\n";
  f << "h_star=" << format_fixed(rep.h_star) << "\n";
  f << "rho_star=" << format_fixed(rep.rho_star) << "\n";
  f << "norm_D=" << format_fixed(rep.norm_d) << "\n";
  f << "epsilon=" << format_fixed(rep.epsilon) << "\n";
  if (!f) throw IoError("write failed: " + path);
}

// Minimal self-contained SVG line plot: one polyline per series over a
// shared time axis, with the value range annotated.  Good enough to eyeball
// convergence without pulling in a plotting dependency.
struct PlotSeries {
  std::string label;
  std::vector<double> t;
  std::vector<double> v;
};

inline void write_svg_plot(const std::string& path, const std::string& title,
                           const std::vector<PlotSeries>& series) {
  auto f = detail::open_for_write(path);
  const double w = 880.0, h = 420.0, ml = 60.0, mr = 160.0, mt = 40.0,
               mb = 40.0;
  double tmin = 0.0, tmax = 1.0, vmin = 0.0, vmax = 1.0;
  bool any = false;
  for (const auto& s : series) {
    for (size_t i = 0; i < s.t.size(); ++i) {
      if (!any) {
        tmin = tmax = s.t[i];
        vmin = vmax = s.v[i];
        any = true;
      }
      tmin = std::min(tmin, s.t[i]);
      tmax = std::max(tmax, s.t[i]);
      vmin = std::min(vmin, s.v[i]);
      vmax = std::max(vmax, s.v[i]);
    }
  }
  if (tmax <= tmin) tmax = tmin + 1.0;
  if (vmax <= vmin) vmax = vmin + 1.0;
  const auto px = [&](double t) {
    return ml + (t - tmin) / (tmax - tmin) * (w - ml - mr);
  };
  const auto py = [&](double v) {
    return h - mb - (v - vmin) / (vmax - vmin) * (h - mt - mb);
  };
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
                                  "#bcbd22"};
  f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w
    << "\" height=\"" << h << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
  f << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  f << "<text x=\"" << ml << "\" y=\"24\" font-family=\"sans-serif\" "
       "font-size=\"16\">"
    << title << "</text>\n";
  f << "<line x1=\"" << ml << "\" y1=\"" << (h - mb) << "\" x2=\"" << (w - mr)
    << "\" y2=\"" << (h - mb) << "\" stroke=\"#333\"/>\n";
  f << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml
    << "\" y2=\"" << (h - mb) << "\" stroke=\"#333\"/>\n";
  f << "<text x=\"" << ml << "\" y=\"" << (h - mb + 16)
    << "\" font-family=\"sans-serif\" font-size=\"11\">" << format_fixed(tmin)
    << "</text>\n";
  f << "<text x=\"" << (w - mr - 60) << "\" y=\"" << (h - mb + 16)
    << "\" font-family=\"sans-serif\" font-size=\"11\">" << format_fixed(tmax)
    << "</text>\n";
  f << "<text x=\"4\" y=\"" << (h - mb) << "\" font-family=\"sans-serif\" "
       "font-size=\"11\">"
    << format_fixed(vmin) << "</text>\n";
  f << "<text x=\"4\" y=\"" << (mt + 10) << "\" font-family=\"sans-serif\" "
       "font-size=\"11\">"
    << format_fixed(vmax) << "</text>\n";
  for (size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = palette[si % 9];
    f << "<polyline fill=\"none\" stroke=\"" << color
      << "\" stroke-width=\"1.2\" points=\"";
    for (size_t i = 0; i < s.t.size(); ++i) {
      f << px(s.t[i]) << "," << py(s.v[i]) << " ";
    }
    f << "\"/>\n";
    f << "<text x=\"" << (w - mr + 10) << "\" y=\"" << (mt + 16.0 * (si + 1))
      << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"" << color
      << "\">" << s.label << "</text>\n";
  }
  f << "</svg>\n";
  if (!f) throw IoError("write failed: " + path);
}

}  // namespace evreg
