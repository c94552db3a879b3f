#pragma once

// Monte Carlo sweeps (rate vs SNR, rate vs antenna count) with per-trial
// capacity-gap tracking and CSV persistence.
//
// Work is a flat queue of (sweep point, trial) jobs. Each job is seeded from
// (master_seed, trial index) only and writes into its own slot; means are
// taken afterwards by pairwise summation in trial order. The worker count
// therefore never changes a single bit of the output.

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <cstdint>
#include <exception>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <thread>
#include <type_traits>
#include <vector>

#include "milac/beamforming_core.hpp"
#include "milac/channel_model.hpp"
#include "milac/core.hpp"

#ifndef MILAC_VERSION_STRING
#define MILAC_VERSION_STRING "unknown"
#endif

namespace milac {

inline constexpr std::string_view version = MILAC_VERSION_STRING;

enum class SweepMode { snr_sweep, antenna_sweep, verify };

inline const char* to_string(SweepMode m) {
  switch (m) {
    case SweepMode::snr_sweep: return "snr_sweep";
    case SweepMode::antenna_sweep: return "antenna_sweep";
    case SweepMode::verify: return "verify";
  }
  return "unknown";
}

/// snr_sweep walks snr_points_db with N_T/N_R taken from the config template;
/// antenna_sweep walks antenna_points (N_T = N_R) at the template's P_T/sigma^2.
struct SweepSpec {
  SweepMode mode = SweepMode::snr_sweep;
  std::vector<double> snr_points_db;
  std::vector<std::size_t> antenna_points;
  std::size_t n_streams = 4;
  std::size_t n_trials = 100;
  std::uint64_t master_seed = 0;
  std::string out_path;
  std::size_t threads = 0;  ///< 0 = hardware concurrency

  void validate() const {
    if (mode == SweepMode::verify) {
      throw error(errc::invalid_argument, "verify mode is not a sweep");
    }
    if (n_trials == 0) {
      throw error(errc::invalid_argument, "n_trials must be at least 1");
    }
    if (n_streams == 0) {
      throw error(errc::invalid_argument, "n_streams must be at least 1");
    }
    if (mode == SweepMode::snr_sweep) {
      if (snr_points_db.empty()) {
        throw error(errc::invalid_argument, "snr_points_db is empty");
      }
      if (!std::is_sorted(snr_points_db.begin(), snr_points_db.end())) {
        throw error(errc::invalid_argument, "snr_points_db must be sorted ascending");
      }
    } else {
      if (antenna_points.empty()) {
        throw error(errc::invalid_argument, "antenna_points is empty");
      }
      if (!std::is_sorted(antenna_points.begin(), antenna_points.end())) {
        throw error(errc::invalid_argument, "antenna_points must be sorted ascending");
      }
      if (antenna_points.front() < n_streams) {
        throw error(errc::invalid_argument, "antenna count below n_streams");
      }
    }
  }

  std::size_t n_points() const noexcept {
    return mode == SweepMode::snr_sweep ? snr_points_db.size() : antenna_points.size();
  }
};

struct SweepRow {
  double sweep_value = 0.0;
  double mean_milac_rate = 0.0;
  double mean_digital_rate = 0.0;
  double mean_capacity = 0.0;
  double max_rel_gap = 0.0;  ///< max over trials of |R_milac - C| / C
  std::size_t n_trials = 0;

  friend bool operator==(const SweepRow&, const SweepRow&) = default;
};

struct SweepResult {
  std::vector<SweepRow> rows;

  friend bool operator==(const SweepResult&, const SweepResult&) = default;
};

/// Sum with pairwise (cascade) reduction; result depends only on the order
/// of `values`.
inline double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double acc = 0.0;
    for (double v : values) acc += v;
    return acc;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

/// Runs job(i) for i in [0, n_jobs) on `threads` workers. The first exception
/// thrown by any job is rethrown after all workers join.
inline void parallel_for(std::size_t n_jobs, std::size_t threads,
                         const std::function<void(std::size_t)>& job) {
  if (threads == 0) {
    threads = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  }
  threads = std::min(threads, std::max<std::size_t>(1, n_jobs));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n_jobs) return;
      try {
        job(i);
      } catch (...) {
        const std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(n_jobs);
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
}

/// Seed for the phase repair of a given trial; `escalation` > 0 after a
/// PhaseSearchExhausted retry.
inline std::uint64_t trial_phase_seed(std::uint64_t master_seed, std::size_t trial,
                                      std::uint64_t escalation = 0) {
  constexpr std::uint64_t phase_seed_domain = 0x7068617365ULL;
  return derive_stream_key(master_seed, trial, phase_seed_domain + escalation);
}

namespace detail {

struct TrialOutcome {
  double milac = 0.0;
  double digital = 0.0;
  double capacity = 0.0;
  double gap = 0.0;
};

/// One Monte Carlo trial. A PhaseSearchExhausted failure is retried with an
/// escalated phase seed; the retry is logged.
inline TrialOutcome run_trial(const SystemConfig& cfg, std::uint64_t master_seed,
                              std::size_t trial, std::size_t n_trials) {
  const ChannelEnsembleSpec ens{cfg.n_rx, cfg.n_tx, n_trials, master_seed};
  const ComplexMatrix h = rayleigh_channel(ens, trial);
  constexpr std::uint64_t max_escalations = 8;
  for (std::uint64_t esc = 0;; ++esc) {
    const std::uint64_t phase_seed = trial_phase_seed(master_seed, trial, esc);
    try {
      const RateReport r = evaluate_link(h, cfg, phase_seed);
      return {r.milac_rate, r.digital_rate, r.capacity_c, r.milac_gap()};
    } catch (const error& e) {
      if (e.code() != errc::phase_search_exhausted || esc + 1 >= max_escalations) throw;
      std::clog << "milac: trial " << trial << " phase search exhausted, escalating seed ("
                << esc + 1 << ")\n";
    }
  }
}

inline SystemConfig point_config(const SweepSpec& spec, const SystemConfig& tmpl, std::size_t point) {
  SystemConfig cfg = tmpl;
  cfg.n_streams = spec.n_streams;
  if (spec.mode == SweepMode::snr_sweep) {
    cfg.noise_power = cfg.tx_power / db_to_linear(spec.snr_points_db[point]);
  } else {
    cfg.n_tx = cfg.n_rx = spec.antenna_points[point];
  }
  cfg.validate();
  return cfg;
}

}  // namespace detail

inline SweepResult run_sweep(const SweepSpec& spec, const SystemConfig& cfg_template) {
  spec.validate();
  const std::size_t n_points = spec.n_points();
  std::vector<SystemConfig> configs;
  configs.reserve(n_points);
  for (std::size_t p = 0; p < n_points; ++p) {
    configs.push_back(detail::point_config(spec, cfg_template, p));
  }

  std::vector<detail::TrialOutcome> outcomes(n_points * spec.n_trials);
  parallel_for(outcomes.size(), spec.threads, [&](std::size_t job) {
    const std::size_t point = job / spec.n_trials;
    const std::size_t trial = job % spec.n_trials;
    outcomes[job] = detail::run_trial(configs[point], spec.master_seed, trial, spec.n_trials);
  });

  SweepResult result;
  result.rows.reserve(n_points);
  std::vector<double> milac(spec.n_trials), digital(spec.n_trials), cap(spec.n_trials);
  const double n = static_cast<double>(spec.n_trials);
  for (std::size_t p = 0; p < n_points; ++p) {
    SweepRow row;
    row.sweep_value = spec.mode == SweepMode::snr_sweep
                          ? spec.snr_points_db[p]
                          : static_cast<double>(spec.antenna_points[p]);
    row.n_trials = spec.n_trials;
    for (std::size_t t = 0; t < spec.n_trials; ++t) {
      const auto& o = outcomes[p * spec.n_trials + t];
      milac[t] = o.milac;
      digital[t] = o.digital;
      cap[t] = o.capacity;
      row.max_rel_gap = std::max(row.max_rel_gap, o.gap);
    }
    row.mean_milac_rate = pairwise_sum(milac) / n;
    row.mean_digital_rate = pairwise_sum(digital) / n;
    row.mean_capacity = pairwise_sum(cap) / n;
    result.rows.push_back(row);
  }
  return result;
}

inline constexpr std::string_view csv_header =
    "sweep_value,milac_rate,digital_rate,capacity,max_rel_gap,trials";

/// 17 significant digits, scientific; parses back to the identical double.
inline std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v,
                                 std::chars_format::scientific, 16);
  return std::string(buf.data(), res.ptr);
}

inline void write_csv(const SweepResult& result, std::ostream& os) {
  os << csv_header << '\n';
  for (const auto& r : result.rows) {
    os << format_double(r.sweep_value) << ',' << format_double(r.mean_milac_rate) << ','
       << format_double(r.mean_digital_rate) << ',' << format_double(r.mean_capacity) << ','
       << format_double(r.max_rel_gap) << ',' << r.n_trials << '\n';
  }
}

inline void write_csv(const SweepResult& result, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) {
    throw error(errc::io_failure, "cannot open " + path + " for writing");
  }
  write_csv(result, os);
  os.flush();
  if (!os) {
    throw error(errc::io_failure, "write to " + path + " failed");
  }
}

namespace detail {

template <typename T>
T parse_field(std::string_view text, const std::string& path, std::size_t line_no) {
  T value{};
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw error(errc::io_failure, path + ":" + std::to_string(line_no) + ": bad field '" +
                                      std::string(text) + "'");
  }
  return value;
}

}  // namespace detail

inline SweepResult read_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw error(errc::io_failure, "cannot open " + path);
  }
  std::string line;
  if (!std::getline(is, line) || line != csv_header) {
    throw error(errc::io_failure, path + ": missing or unexpected header");
  }
  SweepResult result;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest = line;
    for (;;) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() != 6) {
      throw error(errc::io_failure, path + ":" + std::to_string(line_no) + ": expected 6 fields");
    }
    SweepRow r;
    r.sweep_value = detail::parse_field<double>(fields[0], path, line_no);
    r.mean_milac_rate = detail::parse_field<double>(fields[1], path, line_no);
    r.mean_digital_rate = detail::parse_field<double>(fields[2], path, line_no);
    r.mean_capacity = detail::parse_field<double>(fields[3], path, line_no);
    r.max_rel_gap = detail::parse_field<double>(fields[4], path, line_no);
    r.n_trials = detail::parse_field<std::size_t>(fields[5], path, line_no);
    result.rows.push_back(r);
  }
  return result;
}

/// key = value description of a run, written next to its CSV. Contains no
/// timestamps or host details so identical runs produce identical manifests.
inline void write_manifest(const SweepSpec& spec, const SystemConfig& cfg, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) {
    throw error(errc::io_failure, "cannot open " + path + " for writing");
  }
  auto join = [](const auto& values) {
    std::ostringstream ss;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) ss << ' ';
      if constexpr (std::is_floating_point_v<std::decay_t<decltype(values[i])>>) {
        ss << format_double(values[i]);
      } else {
        ss << values[i];
      }
    }
    return ss.str();
  };
  os << "# milac sweep manifest\n"
     << "version = " << version << '\n'
     << "mode = " << to_string(spec.mode) << '\n'
     << "snr_points_db = " << join(spec.snr_points_db) << '\n'
     << "antenna_points = " << join(spec.antenna_points) << '\n'
     << "streams = " << spec.n_streams << '\n'
     << "trials = " << spec.n_trials << '\n'
     << "seed = " << spec.master_seed << '\n'
     << "tx_power_w = " << format_double(cfg.tx_power) << '\n'
     << "noise_power_w = " << format_double(cfg.noise_power) << '\n'
     << "n_tx = " << cfg.n_tx << '\n'
     << "n_rx = " << cfg.n_rx << '\n'
     << "ref_admittance_s = " << format_double(cfg.ref_admittance) << '\n'
     << "csv = " << spec.out_path << '\n';
  if (!os) {
    throw error(errc::io_failure, "write to " + path + " failed");
  }
}

inline std::string manifest_path_for(const std::string& csv_path) { return csv_path + ".manifest"; }

}  // namespace milac
