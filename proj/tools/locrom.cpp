#include <algorithm>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "locrom/locrom.hpp"

using namespace locrom;

namespace {

enum ExitCode { ok = 0, usage = 2, failure = 1 };

void print_offline(const pipeline::OfflineSummary& s) {
  std::cout << "artifacts: " << s.directory.string() << '\n'
            << "K = " << s.k << '\n'
            << "L_k = " << text::join(s.local_sizes) << '\n'
            << "Global-1 size = " << s.global1_size << ", Global-2 size = " << s.global2_size << '\n'
            << "switch points (midrange) = " << text::join(s.switch_points_midrange) << '\n'
            << "switch points (mean) = " << text::join(s.switch_points_mean) << '\n';
  for (const auto& w : s.warnings) std::cerr << "warning: " << w << '\n';
}

void emit(const std::string& out, const std::string& content) {
  if (out.empty() || out == "-") {
    std::cout << content;
    return;
  }
  text::write_text(out, content);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"locrom: localized reduced-order models for steady parameterized problems"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  auto* offline = app.add_subcommand("offline", "Sample, solve, cluster and build local reduced models");
  offline->add_option("--config", config_path, "Pipeline configuration file")->required()->check(CLI::ExistingFile);
  offline->add_option("--out", out_dir, "Artifact directory (defaults to [output] directory)");

  std::string artifacts, online_out = "-", criterion = "midrange";
  double theta_min = 0.0, theta_max = 0.0;
  std::size_t count = 100;
  auto* online = app.add_subcommand("online", "Sweep the parameter with the local reduced models");
  online->add_option("--artifacts", artifacts, "Artifact directory from `offline`")->required();
  online->add_option("--theta-min", theta_min, "First parameter of the sweep")->required();
  online->add_option("--theta-max", theta_max, "Last parameter of the sweep")->required();
  online->add_option("--count", count, "Number of sweep points (0 gives an empty diagram)");
  online->add_option("--criterion", criterion, "Assignment criterion")->check(CLI::IsMember({"mean", "midrange"}));
  online->add_option("--out", online_out, "Diagram CSV path ('-' for stdout)");

  std::string held_out_file, errors_out = "-";
  auto* errors = app.add_subcommand("errors", "Compare Local, Global-1 and Global-2 against full-order solves");
  errors->add_option("--artifacts", artifacts, "Artifact directory from `offline`")->required();
  errors->add_option("--held-out", held_out_file, "File with one held-out parameter per line (default: 10 points)");
  errors->add_option("--out", errors_out, "Report CSV path ('-' for stdout)");

  std::size_t k_max = 10;
  double alpha = 0.05;
  auto* elbow = app.add_subcommand("elbow", "Rerun the variance-elbow scan on stored snapshots");
  elbow->add_option("--artifacts", artifacts, "Artifact directory from `offline`")->required();
  elbow->add_option("--kmax", k_max, "Largest cluster count scanned");
  elbow->add_option("--alpha", alpha, "Elbow threshold fraction");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? ok : usage;
  }

  try {
    if (*offline) {
      const auto cfg = pipeline::run_stage("config", [&] { return pipeline::load_config(config_path); });
      const std::string dir = out_dir.empty() ? cfg.output : out_dir;
      print_offline(pipeline::run_offline(cfg, dir));
    } else if (*online) {
      const auto art = pipeline::load_artifacts(artifacts);
      std::vector<double> thetas;
      if (count > 0) {
        if (count == 1 ? theta_max < theta_min : !(theta_min < theta_max))
          throw Error(ErrorKind::invalid_input, "--theta-min must be below --theta-max");
        thetas = count == 1 ? std::vector<double>{theta_min} : uniform_points(theta_min, theta_max, count);
      }
      const auto diagram = pipeline::run_online(art, thetas, parse_criterion(criterion));
      emit(online_out, diagram.to_csv());
      std::size_t unconverged = 0;
      for (const auto& r : diagram.rows) unconverged += r.converged ? 0 : 1;
      if (unconverged > 0) std::cerr << "warning: " << unconverged << " reduced solves did not converge\n";
    } else if (*errors) {
      const auto art = pipeline::load_artifacts(artifacts);
      std::vector<double> held;
      if (held_out_file.empty()) {
        std::vector<double> training;
        for (const auto& p : art.clusters.cluster_params) training.insert(training.end(), p.begin(), p.end());
        std::sort(training.begin(), training.end());
        held = pipeline::default_held_out(training);
      } else {
        held = load_points_file(held_out_file);
      }
      const auto report = pipeline::run_errors(art, held);
      emit(errors_out, report.to_csv());
      for (const auto& n : report.notes) std::cerr << "note: " << n << '\n';
    } else if (*elbow) {
      const auto art = pipeline::load_artifacts(artifacts);
      const auto scan = pipeline::run_elbow(art, k_max, alpha);
      std::cout << "k,variance,chosen\n";
      for (std::size_t i = 0; i < scan.k_values.size(); ++i)
        std::cout << scan.k_values[i] << ',' << text::format(scan.variances[i]) << ','
                  << (scan.k_values[i] == scan.chosen_k ? 1 : 0) << '\n';
      std::cerr << "chosen K = " << scan.chosen_k << (scan.no_elbow ? " (no elbow found; k_max used)" : "") << '\n';
    }
  } catch (const StageError& e) {
    std::cerr << "locrom: " << e.what() << '\n';
    return failure;
  } catch (const Error& e) {
    std::cerr << "locrom: [" << app.get_subcommands().front()->get_name() << "] " << e.what() << '\n';
    return failure;
  } catch (const std::exception& e) {
    std::cerr << "locrom: [" << app.get_subcommands().front()->get_name() << "] " << e.what() << '\n';
    return failure;
  }
  return ok;
}
