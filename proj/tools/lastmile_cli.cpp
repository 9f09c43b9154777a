#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>

#include <CLI11.hpp>

#include "lastmile/scenario.hpp"
#include "lastmile/sim.hpp"

namespace cli = lastmile::cli;

int main(int argc, char** argv) {
  CLI::App app{"lastmile: headless last-mile delivery drone simulator"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "fly a scenario and write trace.jsonl and metrics.json");
  std::string scenario_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  bool dump_images = false;
  double max_sim_time = 300.0;
  run->add_option("scenario", scenario_path, "scenario JSON")->required();
  run->add_option("--seed", seed, "override the scenario seed");
  run->add_option("--out", out_dir, "output directory");
  run->add_flag("--dump-images", dump_images, "write camera frames and occupancy dumps to OUT/images");
  run->add_option("--max-sim-time", max_sim_time, "sim-time budget in seconds")->check(CLI::PositiveNumber);

  auto* sweep = app.add_subcommand("sweep-detection", "maximum detection distance per camera resolution");
  double tilt_deg = 0.0;
  std::string sweep_out = "sweep.csv";
  double start = 3.0, step = 0.05, stop = 40.0;
  sweep->add_option("--tilt", tilt_deg, "marker tilt about the vertical, degrees");
  sweep->add_option("--out", sweep_out, "CSV path");
  sweep->add_option("--start", start, "first distance, m");
  sweep->add_option("--step", step, "distance step, m");
  sweep->add_option("--stop", stop, "last distance, m");

  auto* plot = app.add_subcommand("plot", "SVG of path, altitude and clearance from a trace");
  std::string trace_path, svg_out = "plot.svg";
  plot->add_option("trace", trace_path, "trace.jsonl")->required();
  plot->add_option("--out", svg_out, "SVG path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help still exits 0; every other parse error is a usage error.
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*run) {
      const lastmile::world::Scenario sc = lastmile::world::load_scenario(scenario_path);
      cli::RunOptions opts;
      opts.seed = seed;
      opts.out_dir = out_dir;
      opts.dump_images = dump_images;
      opts.max_sim_time = max_sim_time;
      const cli::MetricsReport report = cli::run(sc, opts);
      std::cout << cli::metrics_json(report) << '\n';
      return cli::exit_code(report.outcome);
    }
    if (*sweep) {
      cli::SweepOptions opts;
      opts.tilt = tilt_deg * std::numbers::pi / 180.0;
      opts.start = start;
      opts.step = step;
      opts.stop = stop;
      const cli::SweepResult result = cli::sweep_detection(opts);
      cli::write_sweep_csv(sweep_out, result);
      for (const cli::SweepSummary& s : result.summaries) {
        std::cout << s.camera << ": max distance " << s.max_distance << " m, latency avg " << s.avg_latency_ms
                  << " ms max " << s.max_latency_ms << " ms, max range error " << 100.0 * s.max_relative_error
                  << "%\n";
      }
      if (result.summaries.size() >= 2 && result.summaries[0].max_distance > 0.0)
        std::cout << "ratio " << result.summaries[1].max_distance / result.summaries[0].max_distance << '\n';
      return 0;
    }
    if (*plot) {
      const std::string svg = cli::plot_trace_svg(trace_path);
      std::ofstream out(svg_out);
      if (!out) throw std::runtime_error("cannot write " + svg_out);
      out << svg;
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
