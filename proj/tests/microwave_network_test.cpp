#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "milac/microwave_network.hpp"
#include "test_util.hpp"

using namespace milac;
using namespace milac_test;

namespace {

constexpr double ref_y = 1.0 / 50.0;

// Theta_F assembled entry by entry, straight from the block layout.
cmat theta_tx_by_hand(const cmat& v, Eigen::Index ns) {
  const Eigen::Index nt = v.rows();
  cmat t = cmat::Zero(ns + nt, ns + nt);
  for (Eigen::Index s = 0; s < ns; ++s)
    for (Eigen::Index a = 0; a < nt; ++a) {
      t(s, ns + a) = v(a, s);
      t(ns + a, s) = v(a, s);
    }
  for (Eigen::Index a = 0; a < nt; ++a)
    for (Eigen::Index b = 0; b < nt; ++b) {
      cplx acc = 0.0;
      for (Eigen::Index k = ns; k < nt; ++k) acc += v(a, k) * v(b, k);
      t(ns + a, ns + b) = -acc;
    }
  return t;
}

cmat theta_rx_by_hand(const cmat& u, Eigen::Index ns) {
  const Eigen::Index nr = u.rows();
  cmat t = cmat::Zero(nr + ns, nr + ns);
  for (Eigen::Index a = 0; a < nr; ++a)
    for (Eigen::Index b = 0; b < nr; ++b) {
      cplx acc = 0.0;
      for (Eigen::Index k = ns; k < nr; ++k) acc += std::conj(u(a, k)) * std::conj(u(b, k));
      t(a, b) = -acc;
    }
  for (Eigen::Index s = 0; s < ns; ++s)
    for (Eigen::Index a = 0; a < nr; ++a) {
      t(a, nr + s) = std::conj(u(a, s));
      t(nr + s, a) = std::conj(u(a, s));
    }
  return t;
}

// B = -j ref_y (2 (Theta + I)^-1 - I).
rmat susceptance_oracle(const cmat& theta) {
  const Eigen::Index n = theta.rows();
  const cmat y = ref_y * (2.0 * gauss_jordan_inverse(theta + cmat::Identity(n, n)) - cmat::Identity(n, n));
  return (cplx(0.0, -1.0) * y).real();
}

}  // namespace

TEST(AdmittanceScattering, OpenCircuitIsTotalReflection) {
  const auto theta = admittance_to_scattering(AdmittanceMatrix(cmat::Zero(3, 3)), ref_y);
  EXPECT_LE(max_abs(theta.theta() - cmat::Identity(3, 3)), 1e-15);
}

TEST(AdmittanceScattering, MatchedLoadReflectsNothing) {
  const auto theta = admittance_to_scattering(AdmittanceMatrix(ref_y * cmat::Identity(4, 4)), ref_y);
  EXPECT_LE(max_abs(theta.theta()), 1e-15);
}

TEST(AdmittanceScattering, PureSusceptanceHasUnitModulus) {
  for (double b : {-1.0, 0.5, 3.0}) {
    cmat y(1, 1);
    y(0, 0) = cplx(0.0, b * ref_y);
    const cplx t = admittance_to_scattering(AdmittanceMatrix(y), ref_y).theta()(0, 0);
    EXPECT_NEAR(std::abs(t), 1.0, 1e-14) << "b = " << b;
    const cplx expected = (1.0 - cplx(0.0, b)) / (1.0 + cplx(0.0, b));
    EXPECT_NEAR(std::abs(t - expected), 0.0, 1e-14);
  }
}

TEST(AdmittanceScattering, SymmetricUnitaryMapsToPureSusceptance) {
  std::mt19937_64 gen(11);
  for (int rep = 0; rep < 20; ++rep) {
    const cmat q = unitary(gen, 6);
    const cmat theta = q * q.transpose();  // symmetric unitary
    const auto y = scattering_to_admittance(ScatteringMatrix(theta), ref_y);
    EXPECT_LE(max_abs(rmat(y.y().real())), 1e-10 * ref_y);
    EXPECT_LE(max_abs(cmat(y.y() - y.y().transpose())), 1e-10 * ref_y);
  }
}

TEST(AdmittanceScattering, RoundTripProperty) {
  std::mt19937_64 gen(2024);
  std::uniform_int_distribution<int> dim(1, 12);
  for (int rep = 0; rep < 200; ++rep) {
    const int n = dim(gen);
    const cmat y = ref_y * (cmat::Identity(n, n) + 0.4 * gaussian(gen, n, n) / std::sqrt(double(n)));
    const auto back = scattering_to_admittance(admittance_to_scattering(AdmittanceMatrix(y), ref_y), ref_y);
    EXPECT_LE((back.y() - y).norm() / y.norm(), 1e-10) << "rep " << rep;
  }
}

TEST(AdmittanceScattering, MatchesHandInverse) {
  std::mt19937_64 gen(5);
  const cmat y = ref_y * gaussian(gen, 5, 5);
  const cmat id = cmat::Identity(5, 5);
  const cmat expected = gauss_jordan_inverse(ref_y * id + y) * (ref_y * id - y);
  EXPECT_LE(max_abs(cmat(admittance_to_scattering(AdmittanceMatrix(y), ref_y).theta() - expected)), 1e-12);
}

TEST(AdmittanceScattering, SingularInputsThrow) {
  // Y = -ref_y I makes ref_y I + Y vanish.
  try {
    admittance_to_scattering(AdmittanceMatrix(-ref_y * cmat::Identity(2, 2)), ref_y);
    FAIL();
  } catch (const error& e) {
    EXPECT_EQ(e.code(), errc::singular_matrix);
  }
  try {
    scattering_to_admittance(ScatteringMatrix(-cmat::Identity(2, 2)), ref_y);
    FAIL();
  } catch (const error& e) {
    EXPECT_EQ(e.code(), errc::singular_matrix);
  }
  EXPECT_THROW(admittance_to_scattering(AdmittanceMatrix(cmat::Zero(2, 2)), 0.0), error);
  EXPECT_THROW(AdmittanceMatrix(cmat::Zero(2, 3)), error);
}

TEST(TransferBlock, AdmittanceAndScatteringRoutesAgree) {
  std::mt19937_64 gen(8);
  const cmat y = ref_y * (cmat::Identity(7, 7) + 0.5 * gaussian(gen, 7, 7));
  const PortPartition part{3, 4};
  const cmat via_y = transfer_block_from_admittance(AdmittanceMatrix(y), part, ref_y);
  const cmat via_s = transfer_block_from_scattering(admittance_to_scattering(AdmittanceMatrix(y), ref_y), part);
  ASSERT_EQ(via_y.rows(), 4);
  ASSERT_EQ(via_y.cols(), 3);
  EXPECT_LE(max_abs(cmat(via_y - via_s)), 1e-12);
  const cmat full = gauss_jordan_inverse(y / ref_y + cmat::Identity(7, 7));
  EXPECT_LE(max_abs(cmat(via_y - full.block(3, 0, 4, 3))), 1e-12);
}

TEST(TransferBlock, PartitionMustCoverPorts) {
  const AdmittanceMatrix y(cmat::Zero(4, 4));
  EXPECT_THROW(transfer_block_from_admittance(y, {1, 2}, ref_y), error);
  EXPECT_THROW(transfer_block_from_admittance(y, {0, 4}, ref_y), error);
}

TEST(LosslessCheck, Examples) {
  EXPECT_TRUE(check_lossless_reciprocal(ScatteringMatrix(cmat::Identity(3, 3)), 1e-12).passed());
  cmat d = cmat::Zero(3, 3);
  d(0, 0) = std::polar(1.0, 0.3);
  d(1, 1) = std::polar(1.0, -2.0);
  d(2, 2) = std::polar(1.0, 1.1);
  EXPECT_TRUE(check_lossless_reciprocal(ScatteringMatrix(d), 1e-12).passed());
  const auto half = check_lossless_reciprocal(ScatteringMatrix(0.5 * cmat::Identity(2, 2)), 1e-10);
  EXPECT_FALSE(half.passed());
  EXPECT_DOUBLE_EQ(half.unitarity, 0.75);
  cmat asym = cmat::Zero(2, 2);
  asym(0, 1) = 1.0;
  asym(1, 0) = cplx(0.0, 1.0);
  const auto rep = check_lossless_reciprocal(ScatteringMatrix(asym), 1e-10);
  EXPECT_LE(rep.unitarity, 1e-15);
  EXPECT_GT(rep.asymmetry, 1.0);
}

TEST(Completion, IdentityTransmitter) {
  const cmat v = cmat::Identity(2, 2);
  const cmat t = complete_scattering_tx(v.leftCols(1), v.rightCols(1)).theta();
  cmat expected(3, 3);
  expected << 0, 1, 0, 1, 0, 0, 0, 0, -1;
  EXPECT_EQ(t, expected);
}

TEST(Completion, IdentityReceiver) {
  const cmat u = cmat::Identity(2, 2);
  const cmat t = complete_scattering_rx(u.leftCols(1), u.rightCols(1)).theta();
  cmat expected(3, 3);
  expected << 0, 0, 1, 0, -1, 0, 1, 0, 0;
  EXPECT_EQ(t, expected);
}

TEST(Completion, FullStreamLoadHasNoSelfCoupling) {
  std::mt19937_64 gen(3);
  const cmat v = unitary(gen, 4);
  const cmat t = complete_scattering_tx(v, cmat(4, 0)).theta();
  EXPECT_EQ(max_abs(cmat(t.bottomRightCorner(4, 4))), 0.0);
  EXPECT_TRUE(check_lossless_reciprocal(ScatteringMatrix(t), 1e-12).passed());
}

TEST(Completion, RandomUnitaryProperty) {
  std::mt19937_64 gen(100);
  std::uniform_int_distribution<int> dim(1, 64);
  for (int seed = 0; seed < 100; ++seed) {
    const int n = dim(gen);
    const int ns = std::uniform_int_distribution<int>(1, n)(gen);
    const cmat v = unitary(gen, n);
    const cmat u = unitary(gen, n);
    const auto tf = complete_scattering_tx(v.leftCols(ns), v.rightCols(n - ns));
    const auto tg = complete_scattering_rx(u.leftCols(ns), u.rightCols(n - ns));
    for (const auto* t : {&tf, &tg}) {
      const auto rep = check_lossless_reciprocal(*t, 1e-10);
      EXPECT_LE(rep.unitarity, 1e-10) << "case " << seed;
      EXPECT_EQ(rep.asymmetry, 0.0) << "case " << seed;
    }
    EXPECT_LE(max_abs(cmat(tf.theta() - theta_tx_by_hand(v, ns))), 1e-14);
    EXPECT_LE(max_abs(cmat(tg.theta() - theta_rx_by_hand(u, ns))), 1e-14);
    // F = V_bar / 2 and G = U_bar^H / 2 sit in the off-diagonal blocks.
    EXPECT_LE(max_abs(cmat(transfer_block_from_scattering(tf, {std::size_t(ns), std::size_t(n)}) -
                           0.5 * v.leftCols(ns))), 1e-15);
    EXPECT_LE(max_abs(cmat(transfer_block_from_scattering(tg, {std::size_t(n), std::size_t(ns)}) -
                           0.5 * u.leftCols(ns).adjoint())), 1e-15);
  }
}

TEST(Completion, RejectsNonUnitary) {
  const cmat v = 2.0 * cmat::Identity(3, 3);
  try {
    complete_scattering_tx(v.leftCols(1), v.rightCols(2));
    FAIL();
  } catch (const error& e) {
    EXPECT_EQ(e.code(), errc::not_unitary_input);
  }
  EXPECT_THROW(complete_scattering_rx(v.leftCols(1), v.rightCols(2)), error);
  EXPECT_THROW(complete_scattering_tx(cmat::Identity(3, 1), cmat::Identity(3, 1)), error);
}

TEST(Susceptance, ImaginaryIdentityTransmitter) {
  const cmat v = cplx(0.0, 1.0) * cmat::Identity(2, 2);
  rmat expected(3, 3);
  expected << 0, -1, 0, -1, 0, 0, 0, 0, 0;
  EXPECT_LE(max_abs(rmat(susceptance_tx(v, 1, ref_y).b() - ref_y * expected)), 1e-18);
  EXPECT_LE(max_abs(rmat(susceptance_oracle(theta_tx_by_hand(v, 1)) - ref_y * expected)), 1e-15);
}

TEST(Susceptance, ImaginaryIdentityReceiver) {
  const cmat u = cplx(0.0, 1.0) * cmat::Identity(2, 2);
  rmat expected(3, 3);
  expected << 0, 0, 1, 0, 0, 0, 1, 0, 0;
  EXPECT_LE(max_abs(rmat(susceptance_rx(u, 1, ref_y).b() - ref_y * expected)), 1e-18);
  EXPECT_LE(max_abs(rmat(susceptance_oracle(theta_rx_by_hand(u, 1)) - ref_y * expected)), 1e-15);
}

TEST(Susceptance, RealUnitaryIsRejected) {
  try {
    susceptance_tx(cmat::Identity(3, 3), 1, ref_y);
    FAIL();
  } catch (const error& e) {
    EXPECT_EQ(e.code(), errc::singular_imaginary_part);
  }
  EXPECT_THROW(susceptance_rx(cmat::Identity(3, 3), 2, ref_y), error);
}

TEST(Susceptance, MatchesScatteringOracle) {
  std::mt19937_64 gen(808);
  for (int rep = 0; rep < 20; ++rep) {
    const cmat v = unitary(gen, 8);
    const cmat u = unitary(gen, 8);
    const rmat bf = susceptance_tx(v, 4, ref_y).b();
    const rmat bg = susceptance_rx(u, 4, ref_y).b();
    EXPECT_LE(max_abs(rmat(bf - susceptance_oracle(theta_tx_by_hand(v, 4)))), 1e-9 * max_abs(bf));
    EXPECT_LE(max_abs(rmat(bg - susceptance_oracle(theta_rx_by_hand(u, 4)))), 1e-9 * max_abs(bg));
    EXPECT_EQ(bf, bf.transpose());
    EXPECT_EQ(bg, bg.transpose());
  }
}

TEST(Susceptance, CircuitRecoversPrecoderAndCombiner) {
  std::mt19937_64 gen(16);
  for (int rep = 0; rep < 50; ++rep) {
    const int n = std::uniform_int_distribution<int>(1, 16)(gen);
    const int ns = std::uniform_int_distribution<int>(1, n)(gen);
    const cmat v = unitary(gen, n);
    const cmat u = unitary(gen, n);
    const auto bf = susceptance_tx(v, ns, ref_y);
    const auto bg = susceptance_rx(u, ns, ref_y);
    const cmat f = transfer_block_from_admittance(bf.admittance(), {std::size_t(ns), std::size_t(n)}, ref_y);
    const cmat g = transfer_block_from_admittance(bg.admittance(), {std::size_t(n), std::size_t(ns)}, ref_y);
    EXPECT_LE(max_abs(cmat(f - 0.5 * v.leftCols(ns))), 1e-8) << "rep " << rep;
    EXPECT_LE(max_abs(cmat(g - 0.5 * u.leftCols(ns).adjoint())), 1e-8) << "rep " << rep;
  }
}

TEST(SusceptanceMatrix, MirrorsAndRejectsAsymmetry) {
  rmat b(2, 2);
  b << 1.0, 2.0, 2.0 + 1e-13, 3.0;
  const SusceptanceMatrix s(b);
  EXPECT_EQ(s.b(), s.b().transpose());
  b(1, 0) = 2.5;
  EXPECT_THROW(SusceptanceMatrix{b}, error);
}
