#include <bpsim/plan.hpp>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <iostream>
#include <thread>

int main(int argc, char** argv) {
  CLI::App app{"Backpressure inter-AS traffic engineering simulator"};
  std::string plan_file, out_dir, preset = "paper";
  std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  app.add_option("--plan", plan_file, "experiment plan (YAML)")->required()->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory")->required();
  app.add_option("--workers", workers, "parallel runs")->check(CLI::PositiveNumber);
  app.add_option("--preset", preset, "default set")->check(CLI::IsMember({"paper", "desk"}));
  CLI11_PARSE(app, argc, argv);

  bpsim::ExperimentPlan plan;
  try {
    plan = bpsim::ExperimentPlan::from_file(plan_file, preset == "desk" ? bpsim::Preset::desk : bpsim::Preset::paper);
  } catch (const bpsim::PlanError& e) {
    std::cerr << plan_file << ": " << e.what() << '\n';
    return 2;
  }

  spdlog::info("{} runs ({} points x {} algorithms x {} repetitions), {} workers", plan.run_count(),
               plan.points.size(), plan.algorithms.size(), plan.repetitions, workers);
  std::vector<bpsim::RunResult> results;
  try {
    std::size_t done = 0;
    results = bpsim::execute(plan, workers, [&](const bpsim::RunResult& r) {
      ++done;
      if (r.error) spdlog::warn("run {} failed: {}", r.spec.run_id, *r.error);
      else spdlog::debug("run {} done ({}/{})", r.spec.run_id, done, plan.run_count());
    });
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  bpsim::write_outputs(out_dir, plan, results);
  std::size_t failed = 0;
  for (const auto& r : results) failed += r.error ? 1 : 0;
  spdlog::info("wrote {} rows to {} ({} failed)", results.size(), out_dir, failed);
  return 0;
}
