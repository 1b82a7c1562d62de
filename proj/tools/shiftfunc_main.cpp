// Config-driven command line for shift-model functional estimation
// experiments: single runs, scaling sweeps, normality tests, and
// sign-recovery lower-bound labs.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "shiftfunc/config.hpp"
#include "shiftfunc/parallel.hpp"
#include "shiftfunc/report.hpp"

namespace sf = shiftfunc;
namespace fs = std::filesystem;

namespace {

struct CommonOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::string out_dir = "out";
  std::vector<std::string> formats = {"csv", "json"};

  bool want(const std::string& f) const {
    for (const auto& s : formats)
      if (s == f) return true;
    return false;
  }
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "Path to the JSON config document")
      ->required();
  cmd->add_option("--seed", opts.seed, "Override the master seed from the config");
  cmd->add_option("--threads", opts.threads, "Worker threads (0 = hardware)");
  cmd->add_option("--out", opts.out_dir, "Output directory");
  cmd->add_option("--format", opts.formats, "Output formats: csv, json, svg")
      ->delimiter(',');
}

sf::json load_config(const CommonOpts& opts) {
  std::ifstream in(opts.config_path, std::ios::binary);
  if (!in) throw sf::config_error("cannot open config '" + opts.config_path + "'");
  sf::json doc;
  try {
    doc = sf::json::parse(in);  // parse errors carry line/column positions
  } catch (const sf::json::parse_error& e) {
    throw sf::config_error(std::string("in '") + opts.config_path + "': " + e.what());
  }
  if (opts.seed) {
    if (!doc.contains("chain")) doc["chain"] = sf::json::object();
    doc["chain"]["seed"] = *opts.seed;
  }
  return doc;
}

fs::path resolve_out_dir(const CommonOpts& opts) {
  const char* env = std::getenv("SHIFTFUNC_OUT");
  fs::path dir = env != nullptr ? fs::path(env) : fs::path(opts.out_dir);
  fs::create_directories(dir);
  return dir;
}

void setup_threads(const CommonOpts& opts) {
  if (opts.threads > 0) sf::set_default_threads(opts.threads);
}

std::uint64_t seed_of(const sf::json& doc) {
  if (doc.contains("chain") && doc["chain"].contains("seed"))
    return doc["chain"]["seed"].get<std::uint64_t>();
  return 0;
}

void note_runtime(const char* what, double seconds) {
  std::cerr << what << " finished in " << sf::fmt(seconds) << " s\n";
}

int cmd_estimate(const CommonOpts& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  const sf::json doc = load_config(opts);
  const sf::ExperimentConfig cfg = sf::experiment_from_json(doc);
  const sf::RunManifest manifest =
      sf::RunManifest::make(opts.config_path, doc, cfg.chain.seed.master_seed);
  const fs::path out = resolve_out_dir(opts);

  const sf::ExperimentReport rep = sf::run_experiment(cfg);

  if (opts.want("json") || opts.want("svg")) {
    sf::json j{{"manifest", manifest.to_json()}, {"report", sf::report_to_json(rep)}};
    sf::write_text_file(out / "estimate_report.json", j.dump(2) + "\n");
  }
  if (opts.want("csv")) {
    sf::write_text_file(out / "estimate_report.csv",
                        manifest.csv_header() + sf::kReportCsvColumns + "\n" +
                            sf::report_csv_row(rep) + "\n");
  }
  if (opts.want("svg") && rep.normalized_valid) {
    std::vector<double> z = rep.normalized_errors;
    std::sort(z.begin(), z.end());
    sf::SvgSeries emp{"empirical", "#d62728", {}, {}};
    sf::SvgSeries ref{"normal", "#1f77b4", {}, {}};
    for (std::size_t i = 0; i < z.size(); i += std::max<std::size_t>(1, z.size() / 512)) {
      emp.x.push_back(z[i]);
      emp.y.push_back(static_cast<double>(i + 1) / static_cast<double>(z.size()));
      ref.x.push_back(z[i]);
      ref.y.push_back(sf::normal_cdf(z[i]));
    }
    sf::write_text_file(out / "estimate_cdf.svg",
                        sf::svg_line_chart("normalized error CDF", "z", "CDF", {emp, ref}));
  }
  std::cout << "estimate: bias=" << sf::fmt(rep.bias) << " +- " << sf::fmt(rep.bias_se)
            << " mse=" << sf::fmt(rep.mse)
            << " efficiency=" << sf::fmt(rep.efficiency_ratio)
            << " ks=" << sf::fmt(rep.ks_statistic) << "\n";
  note_runtime("estimate",
               std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return 0;
}

int cmd_sweep(const CommonOpts& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  const sf::json doc = load_config(opts);
  const auto points = sf::sweep_points_from_json(doc);
  const sf::BiasEstimator mode = sf::bias_estimator_from_json(doc);
  const sf::RunManifest manifest =
      sf::RunManifest::make(opts.config_path, doc, seed_of(doc));
  const fs::path out = resolve_out_dir(opts);

  const sf::SweepResult sw = sf::sweep_scaling(points, mode);

  if (opts.want("csv") || opts.want("svg"))
    sf::write_text_file(out / "sweep.csv", sf::sweep_csv(manifest, sw));
  if (opts.want("json") || opts.want("svg")) {
    sf::json j{{"manifest", manifest.to_json()}, {"summary", sf::sweep_summary_json(sw)}};
    sf::json rows = sf::json::array();
    for (const auto& r : sw.rows)
      rows.push_back(sf::json{{"sigma", r.sigma},
                              {"d", r.d},
                              {"k", r.k},
                              {"nu", r.nu},
                              {"bias", r.bias},
                              {"bias_se", r.bias_se},
                              {"mse", r.mse},
                              {"mse_se", r.mse_se},
                              {"bias_resolved", r.bias_resolved}});
    j["rows"] = rows;
    sf::write_text_file(out / "sweep_summary.json", j.dump(2) + "\n");
  }
  if (opts.want("svg")) {
    sf::SvgSeries bias{"log10|bias|", "#d62728", {}, {}};
    sf::SvgSeries mse{"log10 mse", "#1f77b4", {}, {}};
    for (const auto& r : sw.rows) {
      if (r.bias_resolved && r.bias != 0.0) {
        bias.x.push_back(std::log10(r.sigma));
        bias.y.push_back(std::log10(std::abs(r.bias)));
      }
      mse.x.push_back(std::log10(r.sigma));
      mse.y.push_back(std::log10(r.mse));
    }
    if (!bias.x.empty())
      sf::write_text_file(out / "sweep_bias.svg",
                          sf::svg_line_chart("bias scaling", "log10 sigma",
                                             "log10 |bias|", {bias}));
    sf::write_text_file(out / "sweep_mse.svg",
                        sf::svg_line_chart("MSE scaling", "log10 sigma", "log10 mse",
                                           {mse}));
  }
  std::cout << "sweep: points=" << sw.rows.size() << " bias_slope(sigma)=";
  std::cout << (std::isfinite(sw.bias_vs_sigma.slope) ? sf::fmt(sw.bias_vs_sigma.slope)
                                                      : std::string("n/a"));
  std::cout << (sw.bias_slope_reliable ? "" : " [unreliable]")
            << " mse_slope(sigma)=" << sf::fmt(sw.mse_vs_sigma.slope) << "\n";
  note_runtime("sweep",
               std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return 0;
}

int cmd_normtest(const CommonOpts& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  const sf::json doc = load_config(opts);
  const sf::ExperimentConfig cfg = sf::experiment_from_json(doc);
  const sf::RunManifest manifest =
      sf::RunManifest::make(opts.config_path, doc, cfg.chain.seed.master_seed);
  const fs::path out = resolve_out_dir(opts);

  const sf::ExperimentReport rep = sf::run_experiment(cfg);
  if (!rep.normalized_valid)
    throw sf::capability_error("normtest: normalized errors are degenerate for this config");
  const double ks = sf::normality_test(rep.normalized_errors);

  if (opts.want("json") || opts.want("svg")) {
    sf::json j{{"manifest", manifest.to_json()},
               {"ks_statistic", ks},
               {"n_samples", rep.normalized_errors.size()},
               {"sigma_f_xi", rep.sigma_f_xi},
               {"efficiency_ratio", rep.efficiency_ratio}};
    sf::write_text_file(out / "normtest.json", j.dump(2) + "\n");
  }
  if (opts.want("csv") || opts.want("svg"))
    sf::write_text_file(out / "normtest_cdf.csv",
                        sf::cdf_csv(manifest, rep.normalized_errors));
  if (opts.want("svg")) {
    std::vector<double> z = rep.normalized_errors;
    std::sort(z.begin(), z.end());
    sf::SvgSeries emp{"empirical", "#d62728", {}, {}};
    sf::SvgSeries ref{"normal", "#1f77b4", {}, {}};
    for (std::size_t i = 0; i < z.size(); i += std::max<std::size_t>(1, z.size() / 512)) {
      emp.x.push_back(z[i]);
      emp.y.push_back(static_cast<double>(i + 1) / static_cast<double>(z.size()));
      ref.x.push_back(z[i]);
      ref.y.push_back(sf::normal_cdf(z[i]));
    }
    sf::write_text_file(out / "normtest_cdf.svg",
                        sf::svg_line_chart("normalized error CDF", "z", "CDF", {emp, ref}));
  }
  std::cout << "normtest: ks=" << sf::fmt(ks) << " n=" << rep.normalized_errors.size()
            << "\n";
  note_runtime("normtest",
               std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return 0;
}

int cmd_lowerbound(const CommonOpts& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  const sf::json doc = load_config(opts);
  const sf::LowerboundConfig cfg = sf::lowerbound_from_json(doc);
  const sf::RunManifest manifest =
      sf::RunManifest::make(opts.config_path, doc, cfg.seed.master_seed);
  const fs::path out = resolve_out_dir(opts);

  const sf::Packing packing = sf::vg_packing(cfg.d, cfg.seed);
  const double sigma2d = cfg.sigma * cfg.sigma * cfg.d;
  const double eps = cfg.epsilon > 0.0 ? cfg.epsilon : sf::default_epsilon(sigma2d);
  const sf::BumpFamily fam = sf::BumpFamily::build(packing, eps, cfg.s);
  const sf::CovarianceModel model =
      sf::CovarianceModel::isotropic(cfg.sigma * cfg.sigma, cfg.d, sf::NormKind::Euclidean);
  const sf::RecoveryResult rec = sf::recovery_experiment(
      fam, model, cfg.rule, cfg.n_rep, cfg.seed, cfg.nearest_codeword);

  sf::write_text_file(out / "packing.txt", sf::packing_to_text(packing));
  if (opts.want("json") || opts.want("svg")) {
    sf::json j{{"manifest", manifest.to_json()},
               {"result", sf::lowerbound_result_json(packing, fam, rec)}};
    sf::write_text_file(out / "lowerbound.json", j.dump(2) + "\n");
  }
  if (opts.want("csv")) {
    std::ostringstream os;
    os << manifest.csv_header() << "word_index,mean_sq_theta_error\n";
    for (std::size_t w = 0; w < rec.per_word_risk.size(); ++w)
      os << w << ',' << sf::fmt(rec.per_word_risk[w]) << "\n";
    sf::write_text_file(out / "risk.csv", os.str());
  }
  std::cout << "lowerbound: words=" << packing.codewords.size()
            << " min_distance=" << packing.min_distance << " eps=" << sf::fmt(fam.epsilon)
            << " risk=" << sf::fmt(rec.mean_sq_theta_error)
            << " exact_rate=" << sf::fmt(rec.exact_recovery_rate) << "\n";
  note_runtime("lowerbound",
               std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  return 0;
}

// Re-render CSV/SVG views from a previously written JSON report.
int cmd_report(const CommonOpts& opts) {
  std::ifstream in(opts.config_path);
  if (!in) throw sf::config_error("cannot open report '" + opts.config_path + "'");
  sf::json doc;
  try {
    doc = sf::json::parse(in);
  } catch (const sf::json::parse_error& e) {
    throw sf::config_error("report parse error at byte " + std::to_string(e.byte) + ": " +
                           e.what());
  }
  const fs::path out = resolve_out_dir(opts);
  if (!doc.contains("manifest"))
    throw sf::config_error("report: input is not a shiftfunc JSON report");
  sf::RunManifest manifest;
  manifest.config_path = doc["manifest"].value("config", std::string());
  manifest.config_hash = doc["manifest"].value("config_hash", std::uint64_t{0});
  manifest.master_seed = doc["manifest"].value("seed", std::uint64_t{0});
  manifest.version = doc["manifest"].value("version", std::string(sf::kVersion));

  if (doc.contains("report")) {
    const sf::json& r = doc["report"];
    std::ostringstream os;
    os << manifest.csv_header() << sf::kReportCsvColumns << "\n";
    os << sf::fmt(r["f_theta"].get<double>()) << ',' << sf::fmt(r["bias"].get<double>())
       << ',' << sf::fmt(r["bias_se"].get<double>()) << ','
       << sf::fmt(r["variance"].get<double>()) << ','
       << sf::fmt(r["variance_se"].get<double>()) << ',' << sf::fmt(r["mse"].get<double>())
       << ',' << sf::fmt(r["mse_se"].get<double>()) << ','
       << sf::fmt(r["sigma_f_xi"].get<double>()) << ','
       << sf::fmt(r["efficiency_ratio"].get<double>()) << ','
       << sf::fmt(r["ks_statistic"].get<double>()) << ','
       << (r["normalized_valid"].get<bool>() ? 1 : 0) << ','
       << (r["truncated"].get<bool>() ? 1 : 0) << ','
       << sf::fmt(r["strong_variance"].get<double>()) << ','
       << sf::fmt(r["nu"].get<double>()) << ',' << r["n_rep"].get<long>() << "\n";
    sf::write_text_file(out / "estimate_report.csv", os.str());
    std::cout << "report: rendered estimate_report.csv\n";
    return 0;
  }
  if (doc.contains("rows")) {
    sf::SvgSeries mse{"log10 mse", "#1f77b4", {}, {}};
    std::ostringstream os;
    os << manifest.csv_header() << "sigma,d,k,nu,bias,bias_se,mse,mse_se,bias_resolved\n";
    for (const sf::json& r : doc["rows"]) {
      os << sf::fmt(r["sigma"].get<double>()) << ',' << r["d"].get<int>() << ','
         << r["k"].get<int>() << ',' << sf::fmt(r["nu"].get<double>()) << ','
         << sf::fmt(r["bias"].get<double>()) << ',' << sf::fmt(r["bias_se"].get<double>())
         << ',' << sf::fmt(r["mse"].get<double>()) << ','
         << sf::fmt(r["mse_se"].get<double>()) << ','
         << (r["bias_resolved"].get<bool>() ? 1 : 0) << "\n";
      mse.x.push_back(std::log10(r["sigma"].get<double>()));
      mse.y.push_back(std::log10(r["mse"].get<double>()));
    }
    sf::write_text_file(out / "sweep_rows.csv", os.str());
    if (opts.want("svg"))
      sf::write_text_file(out / "sweep_mse.svg",
                          sf::svg_line_chart("MSE scaling", "log10 sigma", "log10 mse",
                                             {mse}));
    std::cout << "report: rendered sweep_rows.csv\n";
    return 0;
  }
  throw sf::config_error("report: unrecognized report JSON layout");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bias-reduced estimation of smooth functionals in Gaussian shift models"};
  app.require_subcommand(1);

  CommonOpts est, swp, nrm, low, rpt;
  CLI::App* c_est = app.add_subcommand("estimate", "Run one experiment");
  add_common(c_est, est);
  CLI::App* c_swp = app.add_subcommand("sweep", "Run a scaling sweep");
  add_common(c_swp, swp);
  CLI::App* c_nrm = app.add_subcommand("normtest", "Normal-approximation test");
  add_common(c_nrm, nrm);
  CLI::App* c_low = app.add_subcommand("lowerbound", "Packing and sign-recovery lab");
  add_common(c_low, low);
  CLI::App* c_rpt = app.add_subcommand("report", "Re-render outputs from a JSON report");
  add_common(c_rpt, rpt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "argument error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (c_est->parsed()) {
      setup_threads(est);
      return cmd_estimate(est);
    }
    if (c_swp->parsed()) {
      setup_threads(swp);
      return cmd_sweep(swp);
    }
    if (c_nrm->parsed()) {
      setup_threads(nrm);
      return cmd_normtest(nrm);
    }
    if (c_low->parsed()) {
      setup_threads(low);
      return cmd_lowerbound(low);
    }
    if (c_rpt->parsed()) {
      setup_threads(rpt);
      return cmd_report(rpt);
    }
  } catch (const sf::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const sf::capability_error& e) {
    std::cerr << "capability error: " << e.what() << "\n";
    return 3;
  } catch (const sf::numerical_error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
