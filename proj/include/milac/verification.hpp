#pragma once

// Randomized invariant suite behind `milac verify`.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/QR>

#include "milac/beamforming_core.hpp"
#include "milac/channel_model.hpp"
#include "milac/microwave_network.hpp"

namespace milac {

/// i.i.d. CN(0, 1) entries.
inline ComplexMatrix random_gaussian(Eigen::Index rows, Eigen::Index cols, CounterRng& rng) {
  ComplexMatrix m(rows, cols);
  const double scale = std::sqrt(0.5);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index k = 0; k < cols; ++k) {
      const auto [a, b] = rng.normal_pair();
      m(i, k) = complex(scale * a, scale * b);
    }
  }
  return m;
}

/// Haar-distributed unitary: QR of a Gaussian matrix with R's diagonal phases
/// folded back into Q.
inline ComplexMatrix random_unitary(Eigen::Index n, CounterRng& rng) {
  const Eigen::HouseholderQR<ComplexMatrix> qr(random_gaussian(n, n, rng));
  ComplexMatrix q = qr.householderQ() * ComplexMatrix::Identity(n, n);
  const ComplexMatrix& r = qr.matrixQR();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = std::abs(r(i, i));
    if (a > 0.0) q.col(i) *= r(i, i) / a;
  }
  return q;
}

struct CheckResult {
  std::string name;
  double worst = 0.0;
  double tol = 0.0;
  std::size_t cases = 0;

  bool passed() const noexcept { return worst <= tol; }
};

struct VerifySpec {
  std::uint64_t seed = 1;
  std::size_t cases = 50;
  std::size_t max_streams = 4;
  std::size_t max_antennas = 16;
};

/// Draws `cases` random links and network instances and records the worst
/// residual of every invariant. Dimensions: N_S in [1, max_streams],
/// N_T and N_R in [N_S, max_antennas], SNR in [-10, 20] dB.
inline std::vector<CheckResult> run_verification(const VerifySpec& spec) {
  enum : std::size_t {
    milac_gap, digital_gap, circuit_tx, circuit_rx, completion_unitarity, completion_symmetry,
    susceptance_symmetry, diagonalization, wf_sum, wf_optimality, ys_round_trip,
    norm_invariance, n_checks
  };
  std::vector<CheckResult> checks(n_checks);
  checks[milac_gap] = {"capacity identity |R_milac - C|/C", 0.0, 1e-9};
  checks[digital_gap] = {"capacity identity |R_digital - C|/C", 0.0, 1e-9};
  checks[circuit_tx] = {"circuit oracle |F(B_F) - V_bar/2|", 0.0, 1e-8};
  checks[circuit_rx] = {"circuit oracle |G(B_G) - U_bar^H/2|", 0.0, 1e-8};
  checks[completion_unitarity] = {"completion unitarity |T^H T - I|", 0.0, 1e-10};
  checks[completion_symmetry] = {"completion symmetry |T - T^T| (exact)", 0.0, 0.0};
  checks[susceptance_symmetry] = {"susceptance symmetry |B - B^T| / y0", 0.0, 1e-9};
  checks[diagonalization] = {"diagonalization |GHF - diag(sigma)/4| / sigma_1", 0.0, 1e-10};
  checks[wf_sum] = {"water-filling |sum p - 1|", 0.0, 1e-12};
  checks[wf_optimality] = {"water-filling random simplex excess / C", 0.0, 1e-12};
  checks[ys_round_trip] = {"Y->S->Y relative round trip", 0.0, 1e-10};
  checks[norm_invariance] = {"rate norm invariance (relative)", 0.0, 1e-12};

  auto record = [&](std::size_t id, double value) {
    auto& c = checks[id];
    c.worst = std::max(c.worst, std::isnan(value) ? std::numeric_limits<double>::infinity() : value);
    ++c.cases;
  };

  for (std::size_t cs = 0; cs < spec.cases; ++cs) {
    CounterRng rng(derive_stream_key(spec.seed, cs, 0x766572696679ULL));
    auto pick = [&rng](std::size_t lo, std::size_t hi) {
      return lo + static_cast<std::size_t>(rng.next_u64() % (hi - lo + 1));
    };
    SystemConfig cfg;
    cfg.n_streams = pick(1, spec.max_streams);
    cfg.n_tx = pick(cfg.n_streams, std::max(cfg.n_streams, spec.max_antennas));
    cfg.n_rx = pick(cfg.n_streams, std::max(cfg.n_streams, spec.max_antennas));
    cfg.noise_power = cfg.tx_power / db_to_linear(-10.0 + 30.0 * rng.uniform());
    const double y0 = cfg.ref_admittance;
    const auto ns = static_cast<Eigen::Index>(cfg.n_streams);

    const ComplexMatrix h = random_gaussian(static_cast<Eigen::Index>(cfg.n_rx),
                                            static_cast<Eigen::Index>(cfg.n_tx), rng);
    const MilacDesign d = design_milac(h, cfg, rng.next_u64());
    const ComplexMatrix f = precoder_of(d, cfg);
    const ComplexMatrix g = combiner_of(d, cfg);
    const MilacRate mr = milac_rate(g, h, f, d.allocation, cfg.tx_power, cfg.noise_power);
    const RealVector lambda = d.factors.eigenvalues(cfg.n_streams);
    const double cap = capacity_closed_form(lambda, d.allocation, cfg.tx_power, cfg.noise_power);
    const DigitalDesign dd = digital_design_and_rate(h, cfg);
    record(milac_gap, std::abs(mr.rate - cap) / cap);
    record(digital_gap, std::abs(dd.rate - cap) / cap);

    record(circuit_tx, max_abs(f - 0.5 * d.factors.v_bar(cfg.n_streams)));
    record(circuit_rx, max_abs(g - 0.5 * d.factors.u_bar(cfg.n_streams).adjoint()));

    const ScatteringMatrix t_f =
        complete_scattering_tx(d.factors.v_bar(cfg.n_streams), d.factors.v_tilde(cfg.n_streams));
    const ScatteringMatrix t_g =
        complete_scattering_rx(d.factors.u_bar(cfg.n_streams), d.factors.u_tilde(cfg.n_streams));
    for (const auto* t : {&t_f, &t_g}) {
      const LosslessReport rep = check_lossless_reciprocal(*t, 1e-10);
      record(completion_unitarity, rep.unitarity);
      record(completion_symmetry, rep.asymmetry);
    }

    const RealMatrix raw_f = detail::susceptance_tx_unsymmetrized(d.factors.v, cfg.n_streams, y0, {});
    const RealMatrix raw_g = detail::susceptance_rx_unsymmetrized(d.factors.u, cfg.n_streams, y0, {});
    record(susceptance_symmetry, max_abs(raw_f - raw_f.transpose()) / y0);
    record(susceptance_symmetry, max_abs(raw_g - raw_g.transpose()) / y0);

    const ComplexMatrix eff = g * h * f;
    const double s1 = d.factors.sigma(0);
    ComplexMatrix expected = ComplexMatrix::Zero(ns, ns);
    expected.diagonal() = 0.25 * d.factors.sigma.head(ns).cast<complex>();
    record(diagonalization, s1 > 0.0 ? max_abs(eff - expected) / s1 : 0.0);

    record(wf_sum, std::abs(d.allocation.p.sum() - 1.0));
    double excess = -std::numeric_limits<double>::infinity();
    for (int trial = 0; trial < 200; ++trial) {
      PowerAllocation alt{RealVector(ns), 0.0};
      for (Eigen::Index s = 0; s < ns; ++s) alt.p(s) = -std::log(1.0 - rng.uniform());
      alt.p /= alt.p.sum();
      excess = std::max(excess, capacity_closed_form(lambda, alt, cfg.tx_power, cfg.noise_power) - cap);
    }
    record(wf_optimality, std::max(0.0, excess) / cap);

    const auto np = static_cast<Eigen::Index>(pick(1, 12));
    const AdmittanceMatrix y(y0 * (ComplexMatrix::Identity(np, np) +
                                   0.3 * random_gaussian(np, np, rng) / std::sqrt(double(np))));
    const AdmittanceMatrix back = scattering_to_admittance(admittance_to_scattering(y, y0), y0);
    record(ys_round_trip, (back.y() - y.y()).norm() / y.y().norm());

    ComplexMatrix g_scaled = g;
    const auto row = static_cast<Eigen::Index>(pick(0, cfg.n_streams - 1));
    g_scaled.row(row) *= 1.0 + 99.0 * rng.uniform();
    const MilacRate scaled = milac_rate(g_scaled, h, f, d.allocation, cfg.tx_power, cfg.noise_power);
    record(norm_invariance, std::abs(scaled.rate - mr.rate) / std::max(mr.rate, 1e-300));
  }
  return checks;
}

}  // namespace milac
