// Command-line front end for the event-based regulation pipeline.
//
//   evreg synth     --config FILE [--pixels 1,2,3]
//   evreg threshold --config FILE [--pixels ...]
//   evreg simulate  --config FILE [--pixels ...] [--threshold H] [--out DIR] [--plots]
//   evreg run       --config FILE [--pixels ...] [--threshold H] [--out DIR] [--plots]
//   evreg sweep     --config FILE [--sizes 1,3,9] [--out DIR]
//   evreg verify    --config FILE
//
// run writes report.txt, trajectory.csv and events.csv into --out and exits
// zero only when the measured tail error meets the certified bound.

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "evreg/config.hpp"
#include "evreg/io.hpp"
#include "evreg/pipeline.hpp"

namespace {

void print_report(const evreg::RunReport& rep) {
  std::cout << "gamma        = " << evreg::format_fixed(rep.gamma) << "\n";
  std::cout << "G1_dc        = " << evreg::format_fixed(rep.g1_dc) << "\n";
  std::cout << "G2_dc        = " << evreg::format_fixed(rep.g2_dc) << "\n";
  std::cout << "G1_hinf      = " << evreg::format_fixed(rep.g1_hinf) << "\n";
  std::cout << "delta_z_star = " << evreg::format_fixed(rep.delta_z_star) << "\n";
  std::cout << "h_star       = " << evreg::format_fixed(rep.h_star) << "\n";
  std::cout << "rho_star     = " << evreg::format_fixed(rep.rho_star) << "\n";
  std::cout << "norm_D       = " << evreg::format_fixed(rep.norm_d) << "\n";
  std::cout << "epsilon      = " << evreg::format_fixed(rep.epsilon) << "\n";
}

void write_plots(const std::string& out_dir, const evreg::PipelineResult& res) {
  const auto& samples = res.sim.samples;
  evreg::PlotSeries err{"||x - xd||", {}, {}};
  evreg::PlotSeries bound{"bound", {}, {}};
  for (const auto& s : samples) {
    err.t.push_back(s.t);
    err.v.push_back(s.err);
  }
  if (!samples.empty()) {
    bound.t = {samples.front().t, samples.back().t};
    bound.v = {res.err_bound, res.err_bound};
  }
  evreg::write_svg_plot(out_dir + "/err.svg", "regulation error",
                        {err, bound});

  std::vector<evreg::PlotSeries> outs;
  const Eigen::Index r = res.plant.pixels();
  for (Eigen::Index i = 0; i < r; ++i) {
    evreg::PlotSeries y{"y" + std::to_string(i + 1), {}, {}};
    evreg::PlotSeries z{"z" + std::to_string(i + 1), {}, {}};
    for (const auto& s : samples) {
      y.t.push_back(s.t);
      y.v.push_back(s.y(i));
      z.t.push_back(s.t);
      z.v.push_back(s.z(i));
    }
    outs.push_back(std::move(y));
    outs.push_back(std::move(z));
  }
  evreg::write_svg_plot(out_dir + "/outputs.svg",
                        "pixel outputs and estimates", outs);

  std::vector<evreg::PlotSeries> us;
  const Eigen::Index m = samples.empty() ? 0 : samples.front().u.size();
  for (Eigen::Index i = 0; i < m; ++i) {
    evreg::PlotSeries u{"u" + std::to_string(i + 1), {}, {}};
    for (const auto& s : samples) {
      u.t.push_back(s.t);
      u.v.push_back(s.u(i));
    }
    us.push_back(std::move(u));
  }
  evreg::write_svg_plot(out_dir + "/control.svg", "control input", us);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"event-based regulation pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::vector<int> pixels;
  std::vector<int> sizes;
  double h_override = 0.0;
  bool plots = false;

  const auto add_common = [&](CLI::App* sub, bool with_out, bool with_h) {
    sub->add_option("--config", config_path, "configuration file")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--pixels", pixels, "one-based pixel subset")
        ->delimiter(',');
    if (with_out) sub->add_option("--out", out_dir, "output directory");
    if (with_h) {
      sub->add_option("--threshold", h_override,
                      "event threshold override (default: fraction of the "
                      "computed maximum)");
    }
  };

  auto* synth = app.add_subcommand("synth", "synthesize the controller");
  add_common(synth, false, false);
  auto* threshold =
      app.add_subcommand("threshold", "compute the maximum event threshold");
  add_common(threshold, false, false);
  auto* simulate = app.add_subcommand("simulate", "run the closed loop");
  add_common(simulate, true, true);
  simulate->add_flag("--plots", plots, "write svg plots");
  auto* run = app.add_subcommand("run", "full pipeline with verdict");
  add_common(run, true, true);
  run->add_flag("--plots", plots, "write svg plots");
  auto* sweep = app.add_subcommand("sweep", "pipeline over pixel subsets");
  sweep->add_option("--config", config_path, "configuration file")
      ->required()
      ->check(CLI::ExistingFile);
  sweep->add_option("--sizes", sizes, "subset sizes, leading pixels")
      ->delimiter(',');
  sweep->add_option("--out", out_dir, "output directory");
  auto* verify = app.add_subcommand("verify", "formula cross-checks");
  verify->add_option("--config", config_path, "configuration file")
      ->required()
      ->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    const evreg::ExperimentConfig cfg = evreg::load_config(config_path);
    evreg::PipelineOptions opt;
    opt.pixels = pixels;
    opt.h_override = h_override;

    if (app.got_subcommand(synth)) {
      const auto res = evreg::run_threshold(cfg, opt);
      std::cout << "controller states: " << res.controller.a.rows() << "\n";
      print_report(res.report);
      return 0;
    }
    if (app.got_subcommand(threshold)) {
      const auto res = evreg::run_threshold(cfg, opt);
      print_report(res.report);
      std::cout << "h_used       = " << evreg::format_fixed(res.h_used) << "\n";
      std::cout << "rho_used     = " << evreg::format_fixed(res.rho_used)
                << "\n";
      std::cout << "delta_used   = " << evreg::format_fixed(res.delta_used)
                << "\n";
      return 0;
    }
    if (app.got_subcommand(simulate) || app.got_subcommand(run)) {
      const auto res = evreg::run_pipeline(cfg, opt);
      if (app.got_subcommand(run)) {
        evreg::write_report(out_dir + "/report.txt", res.report);
      }
      evreg::write_trajectory_csv(out_dir + "/trajectory.csv", res.sim);
      evreg::write_events_csv(out_dir + "/events.csv", res.sim.events);
      if (plots) write_plots(out_dir, res);
      print_report(res.report);
      std::cout << "h_used       = " << evreg::format_fixed(res.h_used) << "\n";
      std::cout << "err_bound    = " << evreg::format_fixed(res.err_bound)
                << "\n";
      std::cout << "err_max_tail = "
                << evreg::format_fixed(res.sim.err_max_tail) << "\n";
      std::cout << "err_mean_tail= "
                << evreg::format_fixed(res.sim.err_mean_tail) << "\n";
      std::cout << "events       = " << res.sim.events.size() << "\n";
      std::cout << (res.pass ? "PASS" : "FAIL")
                << ": tail error vs certified bound\n";
      return res.pass ? 0 : 1;
    }
    if (app.got_subcommand(sweep)) {
      const auto rows = evreg::run_sweep(cfg, sizes);
      evreg::write_sweep_csv(out_dir + "/sweep.csv", rows);
      std::cout << "r,h_star,err_max,err_mean,events\n";
      for (const auto& row : rows) {
        std::cout << row.r << "," << evreg::format_fixed(row.h_star) << ","
                  << evreg::format_fixed(row.err_max) << ","
                  << evreg::format_fixed(row.err_mean) << "," << row.events
                  << "\n";
      }
      return 0;
    }
    if (app.got_subcommand(verify)) {
      const auto checks = evreg::verify_formulas(cfg);
      bool all_okay = true;
      for (const auto& c : checks) {
        std::cout << (c.ok ? "PASS" : "FAIL") << ": " << c.name;
        if (!c.ok && !c.detail.empty()) std::cout << " (" << c.detail << ")";
        std::cout << "\n";
        all_okay = all_okay && c.ok;
      }
      return all_okay ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
