#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "shiftfunc/config.hpp"
#include "shiftfunc/diagnostics.hpp"
#include "shiftfunc/errors.hpp"
#include "shiftfunc/lowerbound.hpp"
#include "shiftfunc/version.hpp"

namespace shiftfunc {

// Shortest round-trip decimal representation (std::to_chars); all CSV and SVG
// numbers go through this, so equal doubles print identically everywhere.
inline std::string fmt(double x) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// Identifies a run: the hash is FNV-1a over the canonical (sorted-key) dump
// of the resolved config document. Wall-clock time is deliberately not part
// of any written file so reruns are byte-identical.
struct RunManifest {
  std::string config_path;
  std::uint64_t config_hash = 0;
  std::uint64_t master_seed = 0;
  std::string version = kVersion;

  static RunManifest make(const std::string& path, const json& resolved,
                          std::uint64_t seed) {
    RunManifest m;
    m.config_path = path;
    m.config_hash = fnv1a64(resolved.dump());
    m.master_seed = seed;
    return m;
  }

  std::string csv_header() const {
    std::ostringstream os;
    os << "# config=" << config_path << " config_hash=" << config_hash
       << " seed=" << master_seed << " version=" << version << "\n";
    return os.str();
  }

  json to_json() const {
    return json{{"config", config_path},
                {"config_hash", config_hash},
                {"seed", master_seed},
                {"version", version}};
  }
};

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw numerical_error("io: cannot open '" + path.string() + "' for writing");
  out << text;
}

inline json report_to_json(const ExperimentReport& r) {
  return json{{"f_theta", r.f_theta},
              {"bias", r.bias},
              {"bias_se", r.bias_se},
              {"variance", r.variance},
              {"variance_se", r.variance_se},
              {"mse", r.mse},
              {"mse_se", r.mse_se},
              {"sigma_f_xi", r.sigma_f_xi},
              {"efficiency_ratio", r.efficiency_ratio},
              {"ks_statistic", r.ks_statistic},
              {"normalized_valid", r.normalized_valid},
              {"truncated", r.truncated},
              {"strong_variance", r.strong_variance},
              {"nu", r.nu},
              {"n_rep", r.n_rep}};
}

inline constexpr const char* kReportCsvColumns =
    "f_theta,bias,bias_se,variance,variance_se,mse,mse_se,sigma_f_xi,"
    "efficiency_ratio,ks_statistic,normalized_valid,truncated,strong_variance,nu,n_rep";

inline std::string report_csv_row(const ExperimentReport& r) {
  std::ostringstream os;
  os << fmt(r.f_theta) << ',' << fmt(r.bias) << ',' << fmt(r.bias_se) << ','
     << fmt(r.variance) << ',' << fmt(r.variance_se) << ',' << fmt(r.mse) << ','
     << fmt(r.mse_se) << ',' << fmt(r.sigma_f_xi) << ',' << fmt(r.efficiency_ratio)
     << ',' << fmt(r.ks_statistic) << ',' << (r.normalized_valid ? 1 : 0) << ','
     << (r.truncated ? 1 : 0) << ',' << fmt(r.strong_variance) << ',' << fmt(r.nu)
     << ',' << r.n_rep;
  return os.str();
}

inline constexpr const char* kSweepCsvColumns =
    "sigma,d,k,nu,f_theta,bias,bias_se,variance,mse,mse_se,sigma_f_xi,"
    "efficiency_ratio,ks_statistic,bias_resolved";

inline std::string sweep_csv(const RunManifest& m, const SweepResult& sw) {
  std::ostringstream os;
  os << m.csv_header() << kSweepCsvColumns << "\n";
  for (const auto& r : sw.rows) {
    os << fmt(r.sigma) << ',' << r.d << ',' << r.k << ',' << fmt(r.nu) << ','
       << fmt(r.f_theta) << ',' << fmt(r.bias) << ',' << fmt(r.bias_se) << ','
       << fmt(r.variance) << ',' << fmt(r.mse) << ',' << fmt(r.mse_se) << ','
       << fmt(r.sigma_f_xi) << ',' << fmt(r.efficiency_ratio) << ','
       << fmt(r.ks_statistic) << ',' << (r.bias_resolved ? 1 : 0) << "\n";
  }
  return os.str();
}

inline json slope_to_json(const SlopeFit& s) {
  json j;
  j["n_used"] = s.n_used;
  j["reliable"] = s.reliable;
  if (std::isfinite(s.slope)) {
    j["slope"] = s.slope;
    j["intercept"] = s.intercept;
  } else {
    j["slope"] = nullptr;
    j["intercept"] = nullptr;
  }
  return j;
}

inline json sweep_summary_json(const SweepResult& sw) {
  return json{{"bias_estimator", sw.bias_estimator},
              {"bias_slope_reliable", sw.bias_slope_reliable},
              {"slope_bias_vs_nu", slope_to_json(sw.bias_vs_nu)},
              {"slope_bias_vs_sigma", slope_to_json(sw.bias_vs_sigma)},
              {"slope_mse_vs_sigma", slope_to_json(sw.mse_vs_sigma)}};
}

// Empirical CDF of the normalized errors against the normal CDF, as
// plot-ready CSV (one row per sorted sample).
inline std::string cdf_csv(const RunManifest& m, std::vector<double> z) {
  std::sort(z.begin(), z.end());
  std::ostringstream os;
  os << m.csv_header() << "z,empirical_cdf,normal_cdf\n";
  const double n = static_cast<double>(z.size());
  for (std::size_t i = 0; i < z.size(); ++i)
    os << fmt(z[i]) << ',' << fmt(static_cast<double>(i + 1) / n) << ','
       << fmt(normal_cdf(z[i])) << "\n";
  return os.str();
}

// Minimal static SVG line chart. Series are polylines over a linear mapping
// of the given coordinates (callers pass log-transformed data for log plots).
struct SvgSeries {
  std::string label;
  std::string color;
  std::vector<double> x, y;
};

inline std::string svg_line_chart(const std::string& title, const std::string& xlabel,
                                  const std::string& ylabel,
                                  const std::vector<SvgSeries>& series) {
  const int w = 640, h = 480, ml = 70, mr = 20, mt = 40, mb = 50;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  if (!(xmax > xmin)) xmax = xmin + 1.0;
  if (!(ymax > ymin)) ymax = ymin + 1.0;
  auto px = [&](double x) {
    return ml + (x - xmin) / (xmax - xmin) * (w - ml - mr);
  };
  auto py = [&](double y) {
    return h - mb - (y - ymin) / (ymax - ymin) * (h - mt - mb);
  };
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
     << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << w / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"15\">"
     << title << "</text>\n";
  os << "<line x1=\"" << ml << "\" y1=\"" << h - mb << "\" x2=\"" << w - mr << "\" y2=\""
     << h - mb << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
     << h - mb << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double xv = xmin + (xmax - xmin) * t / 4.0;
    const double yv = ymin + (ymax - ymin) * t / 4.0;
    os << "<text x=\"" << fmt(px(xv)) << "\" y=\"" << h - mb + 18
       << "\" text-anchor=\"middle\" font-size=\"11\">" << fmt(xv) << "</text>\n";
    os << "<text x=\"" << ml - 6 << "\" y=\"" << fmt(py(yv) + 4)
       << "\" text-anchor=\"end\" font-size=\"11\">" << fmt(yv) << "</text>\n";
  }
  os << "<text x=\"" << w / 2 << "\" y=\"" << h - 10
     << "\" text-anchor=\"middle\" font-size=\"13\">" << xlabel << "</text>\n";
  os << "<text x=\"16\" y=\"" << h / 2
     << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 " << h / 2
     << ")\">" << ylabel << "</text>\n";
  int legend_y = mt + 8;
  for (const auto& s : series) {
    os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (i) os << ' ';
      os << fmt(px(s.x[i])) << ',' << fmt(py(s.y[i]));
    }
    os << "\"/>\n";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      os << "<circle cx=\"" << fmt(px(s.x[i])) << "\" cy=\"" << fmt(py(s.y[i]))
         << "\" r=\"2.5\" fill=\"" << s.color << "\"/>\n";
    os << "<text x=\"" << w - mr - 5 << "\" y=\"" << legend_y
       << "\" text-anchor=\"end\" font-size=\"12\" fill=\"" << s.color << "\">" << s.label
       << "</text>\n";
    legend_y += 16;
  }
  os << "</svg>\n";
  return os.str();
}

inline json lowerbound_result_json(const Packing& p, const BumpFamily& fam,
                                   const RecoveryResult& r) {
  json per_word = json::array();
  for (double v : r.per_word_risk) per_word.push_back(v);
  return json{{"d", p.d},
              {"codewords", p.codewords.size()},
              {"min_distance", p.min_distance},
              {"epsilon", fam.epsilon},
              {"s", fam.s},
              {"mean_sq_theta_error", r.mean_sq_theta_error},
              {"max_functional_risk", r.max_functional_risk},
              {"exact_recovery_rate", r.exact_recovery_rate},
              {"identity_max_rel", r.identity_max_rel},
              {"regime_flag", r.regime_flag},
              {"per_word_risk", per_word}};
}

}  // namespace shiftfunc
