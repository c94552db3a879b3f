// milac: sweeps, randomized verification and design dumps for lossless
// reciprocal MiLAC-aided MIMO links.
//
// Exit codes: 0 success, 1 invalid arguments, 2 runtime failure (including a
// failed verification).

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "milac/milac.hpp"

namespace {

constexpr int exit_ok = 0;
constexpr int exit_usage = 1;
constexpr int exit_runtime = 2;

struct CommonOptions {
  std::size_t streams = 0;
  std::size_t trials = 100;
  std::uint64_t seed = 0;
  std::string out;
  std::size_t threads = 0;
  double tx_power = 1.0;
  double z0 = 50.0;
};

/// Config reader that files unsectioned `key = value` lines under the
/// subcommand being run. [section] headers still work.
class SubcommandConfig : public CLI::ConfigTOML {
 public:
  explicit SubcommandConfig(std::string section) : section_(std::move(section)) {}

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    std::vector<CLI::ConfigItem> items = CLI::ConfigTOML::from_config(input);
    if (section_.empty()) return items;
    for (auto& item : items) {
      if (item.parents.empty() && item.name != "++" && item.name != "--") {
        item.parents.push_back(section_);
      }
    }
    return items;
  }

 private:
  std::string section_;
};

std::vector<double> default_snr_grid() {
  std::vector<double> grid;
  for (int db = -10; db <= 20; db += 2) grid.push_back(db);
  return grid;
}

void add_link_options(CLI::App* sub, CommonOptions& o) {
  sub->add_option("--streams", o.streams, "number of streams N_S (count)")
      ->required()
      ->check(CLI::PositiveNumber);
  sub->add_option("--tx-power", o.tx_power, "transmit power P_T (watts)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--z0", o.z0, "reference impedance Z0 (ohms)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--seed", o.seed, "master seed (integer)")->capture_default_str();
}

void add_sweep_options(CLI::App* sub, CommonOptions& o) {
  add_link_options(sub, o);
  sub->add_option("--trials", o.trials, "channel realizations per sweep point (count)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--out", o.out, "output CSV path; a .manifest file is written next to it")
      ->required();
  sub->add_option("--threads", o.threads, "worker threads (count, 0 = all cores)")
      ->envname("MILAC_THREADS")
      ->capture_default_str();
}

milac::SystemConfig base_config(const CommonOptions& o) {
  milac::SystemConfig cfg;
  cfg.n_streams = o.streams;
  cfg.tx_power = o.tx_power;
  cfg.noise_power = o.tx_power;
  cfg.ref_admittance = 1.0 / o.z0;
  return cfg;
}

int run_sweep_command(milac::SweepSpec spec, const milac::SystemConfig& cfg,
                      const CommonOptions& o) {
  spec.n_streams = o.streams;
  spec.n_trials = o.trials;
  spec.master_seed = o.seed;
  spec.out_path = o.out;
  spec.threads = o.threads;
  const milac::SweepResult result = milac::run_sweep(spec, cfg);
  milac::write_csv(result, o.out);
  milac::write_manifest(spec, cfg, milac::manifest_path_for(o.out));

  std::cout << std::left << std::setw(12) << "point" << std::setw(14) << "milac" << std::setw(14)
            << "digital" << std::setw(14) << "capacity" << "max_rel_gap\n";
  for (const auto& r : result.rows) {
    std::cout << std::setw(12) << r.sweep_value << std::setw(14) << r.mean_milac_rate
              << std::setw(14) << r.mean_digital_rate << std::setw(14) << r.mean_capacity
              << r.max_rel_gap << '\n';
  }
  std::cout << "wrote " << o.out << '\n';
  return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MiLAC-aided MIMO capacity simulator"};
  app.set_version_flag("--version", std::string(milac::version));
  app.require_subcommand(1);
  app.set_config("--config", "", "file of `key = value` lines (# comments); flags override it");
  app.fallthrough();

  // sweep-snr
  CommonOptions snr_opts;
  std::size_t snr_antennas = 0;
  std::vector<double> snr_points = default_snr_grid();
  auto* sweep_snr = app.add_subcommand("sweep-snr", "mean rates versus SNR at fixed N_T = N_R");
  add_sweep_options(sweep_snr, snr_opts);
  sweep_snr->add_option("--antennas", snr_antennas, "antennas per side N_T = N_R (count)")
      ->required()
      ->check(CLI::PositiveNumber);
  sweep_snr->add_option("--snr-db", snr_points, "SNR points P_T/sigma^2 (dB), ascending")
      ->capture_default_str();

  // sweep-antennas
  CommonOptions ant_opts;
  std::vector<std::size_t> ant_points;
  double ant_snr_db = 0.0;
  auto* sweep_ant =
      app.add_subcommand("sweep-antennas", "mean rates versus N_T = N_R at fixed SNR");
  add_sweep_options(sweep_ant, ant_opts);
  sweep_ant->add_option("--antennas", ant_points, "antenna counts N_T = N_R (count), ascending")
      ->required()
      ->check(CLI::PositiveNumber);
  sweep_ant->add_option("--snr-db", ant_snr_db, "SNR P_T/sigma^2 (dB)")->required();

  // verify
  milac::VerifySpec verify_spec;
  auto* verify = app.add_subcommand("verify", "randomized invariant suite with a pass/fail table");
  verify->add_option("--seed", verify_spec.seed, "master seed (integer)")->capture_default_str();
  verify->add_option("--cases", verify_spec.cases, "random instances (count)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  verify->add_option("--max-streams", verify_spec.max_streams, "largest N_S drawn (count)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  verify->add_option("--max-antennas", verify_spec.max_antennas, "largest N_T, N_R drawn (count)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  // design-dump
  CommonOptions dump_opts;
  std::size_t dump_n_tx = 0;
  std::size_t dump_n_rx = 0;
  double dump_snr_db = 0.0;
  std::size_t dump_trial = 0;
  std::string dump_dir;
  auto* dump = app.add_subcommand("design-dump",
                                  "write B_F, B_G, Theta_F, Theta_G, F, G and the allocation "
                                  "for one seeded channel as CSV");
  add_link_options(dump, dump_opts);
  dump->add_option("--tx-antennas", dump_n_tx, "transmit antennas N_T (count)")
      ->required()
      ->check(CLI::PositiveNumber);
  dump->add_option("--rx-antennas", dump_n_rx, "receive antennas N_R (count)")
      ->required()
      ->check(CLI::PositiveNumber);
  dump->add_option("--snr-db", dump_snr_db, "SNR P_T/sigma^2 (dB)")->capture_default_str();
  dump->add_option("--trial", dump_trial, "channel realization index (count)")
      ->capture_default_str();
  dump->add_option("--out-dir", dump_dir, "directory receiving the CSV files")->required();

  std::string active;
  for (int i = 1; i < argc && active.empty(); ++i) {
    for (const auto* sub : app.get_subcommands({})) {
      if (sub->get_name() == argv[i]) active = argv[i];
    }
  }
  app.config_formatter(std::make_shared<SubcommandConfig>(active));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_usage;
  }

  auto usage_error = [](const std::string& flag, const std::string& msg) {
    std::cerr << "error: " << flag << ": " << msg << '\n';
    return exit_usage;
  };

  try {
    if (*sweep_snr) {
      if (snr_opts.streams > snr_antennas) {
        return usage_error("--streams", "exceeds --antennas");
      }
      if (snr_points.empty() || !std::is_sorted(snr_points.begin(), snr_points.end())) {
        return usage_error("--snr-db", "needs at least one point, in ascending order");
      }
      milac::SystemConfig cfg = base_config(snr_opts);
      cfg.n_tx = cfg.n_rx = snr_antennas;
      milac::SweepSpec spec;
      spec.mode = milac::SweepMode::snr_sweep;
      spec.snr_points_db = snr_points;
      spec.antenna_points = {snr_antennas};
      return run_sweep_command(spec, cfg, snr_opts);
    }
    if (*sweep_ant) {
      if (!std::is_sorted(ant_points.begin(), ant_points.end())) {
        return usage_error("--antennas", "must be in ascending order");
      }
      if (ant_opts.streams > ant_points.front()) {
        return usage_error("--streams", "exceeds the smallest --antennas value");
      }
      milac::SystemConfig cfg = base_config(ant_opts);
      cfg.noise_power = cfg.tx_power / milac::db_to_linear(ant_snr_db);
      cfg.n_tx = cfg.n_rx = ant_points.front();
      milac::SweepSpec spec;
      spec.mode = milac::SweepMode::antenna_sweep;
      spec.snr_points_db = {ant_snr_db};
      spec.antenna_points = ant_points;
      return run_sweep_command(spec, cfg, ant_opts);
    }
    if (*verify) {
      const auto checks = milac::run_verification(verify_spec);
      bool all = true;
      std::cout << std::left << std::setw(52) << "check" << std::setw(14) << "worst"
                << std::setw(10) << "tol" << "result\n";
      for (const auto& c : checks) {
        all = all && c.passed();
        std::cout << std::setw(52) << c.name << std::setw(14) << c.worst << std::setw(10) << c.tol
                  << (c.passed() ? "PASS" : "FAIL") << '\n';
      }
      std::cout << (all ? "all checks passed" : "verification FAILED") << " (" << verify_spec.cases
                << " cases, seed " << verify_spec.seed << ")\n";
      return all ? exit_ok : exit_runtime;
    }
    if (*dump) {
      if (dump_opts.streams > std::min(dump_n_tx, dump_n_rx)) {
        return usage_error("--streams", "exceeds min(--tx-antennas, --rx-antennas)");
      }
      milac::SystemConfig cfg = base_config(dump_opts);
      cfg.n_tx = dump_n_tx;
      cfg.n_rx = dump_n_rx;
      cfg.noise_power = cfg.tx_power / milac::db_to_linear(dump_snr_db);

      const milac::ChannelEnsembleSpec ens{cfg.n_rx, cfg.n_tx, dump_trial + 1, dump_opts.seed};
      const milac::ComplexMatrix h = milac::rayleigh_channel(ens, dump_trial);
      const milac::MilacDesign d =
          milac::design_milac(h, cfg, milac::trial_phase_seed(dump_opts.seed, dump_trial));
      const milac::ComplexMatrix f = milac::precoder_of(d, cfg);
      const milac::ComplexMatrix g = milac::combiner_of(d, cfg);
      const std::size_t ns = cfg.n_streams;
      const milac::ScatteringMatrix t_f =
          milac::complete_scattering_tx(d.factors.v_bar(ns), d.factors.v_tilde(ns));
      const milac::ScatteringMatrix t_g =
          milac::complete_scattering_rx(d.factors.u_bar(ns), d.factors.u_tilde(ns));

      namespace fs = std::filesystem;
      fs::create_directories(dump_dir);
      const fs::path dir(dump_dir);
      milac::write_matrix_csv(h, (dir / "H.csv").string());
      milac::write_matrix_csv(d.b_f.b(), (dir / "B_F.csv").string());
      milac::write_matrix_csv(d.b_g.b(), (dir / "B_G.csv").string());
      milac::write_matrix_csv(t_f.theta(), (dir / "Theta_F.csv").string());
      milac::write_matrix_csv(t_g.theta(), (dir / "Theta_G.csv").string());
      milac::write_matrix_csv(f, (dir / "F.csv").string());
      milac::write_matrix_csv(g, (dir / "G.csv").string());

      const milac::RealVector lambda = d.factors.eigenvalues(ns);
      {
        std::ofstream os(dir / "allocation.csv", std::ios::binary | std::ios::trunc);
        os << "stream,power_fraction,eigenvalue\n";
        for (Eigen::Index s = 0; s < lambda.size(); ++s) {
          os << s << ',' << milac::format_double(d.allocation.p(s)) << ','
             << milac::format_double(lambda(s)) << '\n';
        }
        if (!os) throw milac::error(milac::errc::io_failure, "cannot write allocation.csv");
      }
      const milac::MilacRate mr =
          milac::milac_rate(g, h, f, d.allocation, cfg.tx_power, cfg.noise_power);
      const double cap =
          milac::capacity_closed_form(lambda, d.allocation, cfg.tx_power, cfg.noise_power);
      std::cout << std::setprecision(12) << "milac rate " << mr.rate << " bits/s/Hz, capacity "
                << cap << " bits/s/Hz, water level " << d.allocation.water_level << '\n'
                << "wrote design to " << dump_dir << '\n';
      return exit_ok;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_runtime;
  }
  return exit_usage;
}
