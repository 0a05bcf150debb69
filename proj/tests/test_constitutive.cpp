#include <gtest/gtest.h>

#include "convex_mpm/corotational.hpp"
#include "convex_mpm/linalg.hpp"
#include "oracles.hpp"

namespace {

using namespace convex_mpm;

Matrix3 rot_z(double deg) {
  return Eigen::AngleAxisd(deg * M_PI / 180.0, Vector3::UnitZ()).toRotationMatrix();
}

TEST(Energy, RestStateIsZero) {
  EXPECT_EQ(energy_density({Matrix3::Identity(), Matrix3::Identity()}, {3.0, 5.0}), 0.0);
}

TEST(Energy, UniformStretch) {
  EXPECT_NEAR(energy_density({1.1 * Matrix3::Identity(), Matrix3::Identity()}, {1.0, 1.0}), 0.075, 1e-14);
}

TEST(Energy, InvariantUnderJointRotation) {
  oracle::Gen gen(1);
  for (int k = 0; k < 100; ++k) {
    const Matrix3 Fe = gen.deformation();
    const Matrix3 R0 = gen.rotation();
    const Matrix3 Q = gen.rotation();
    const LameParameters lame{gen.uniform(0.1, 10.0), gen.uniform(0.1, 10.0)};
    EXPECT_NEAR(energy_density({Fe, R0}, lame), energy_density({Q * Fe, Q * R0}, lame), 1e-12);
  }
}

TEST(Stress, Examples) {
  EXPECT_EQ(first_piola({Matrix3::Identity(), Matrix3::Identity()}, {1.0, 1.0}), Matrix3::Zero());
  const Matrix3 P = first_piola({Vector3(1.1, 1.0, 1.0).asDiagonal(), Matrix3::Identity()}, {1.0, 0.0});
  EXPECT_LE((P - Matrix3(Vector3(0.2, 0.0, 0.0).asDiagonal())).norm(), 1e-14);
}

TEST(Stress, MatchesFiniteDifferenceOfEnergy) {
  oracle::Gen gen(2);
  for (int k = 0; k < 500; ++k) {
    const Matrix3 Fe = gen.deformation(0.5);
    const Matrix3 R0 = gen.rotation();
    const LameParameters lame{gen.uniform(0.5, 5.0), gen.uniform(0.0, 5.0)};
    const Matrix3 P = first_piola({Fe, R0}, lame);
    const Matrix3 fd = oracle::fd_matrix_gradient(
        [&](const Matrix3& F) { return energy_density({F, R0}, lame); }, Fe, 1e-6 * Fe.norm());
    EXPECT_LE((P - fd).norm(), 1e-6 * P.norm());
  }
}

TEST(StressDerivative, Examples) {
  oracle::Gen gen(3);
  const LameParameters lame{2.0, 3.0};
  for (int k = 0; k < 20; ++k) {
    const ElasticState s{gen.deformation(), gen.rotation()};
    const Matrix3 W = skew(gen.vector());
    EXPECT_LE(stress_differential(s, lame, s.R0 * W).norm(), 1e-14);
    const Matrix3 dP = stress_differential(s, lame, s.R0);
    EXPECT_LE((dP - (2.0 * lame.mu + 3.0 * lame.lambda) * s.R0).norm(), 1e-12);
  }
}

TEST(StressDerivative, MatchesFiniteDifferenceOfStress) {
  oracle::Gen gen(4);
  for (int k = 0; k < 100; ++k) {
    const ElasticState s{gen.deformation(), gen.rotation()};
    const LameParameters lame{gen.uniform(0.5, 5.0), gen.uniform(0.0, 5.0)};
    const Matrix9 K = stress_derivative(s, lame);
    Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(s.Fe.data(), 9);
    const Eigen::MatrixXd fd = oracle::fd_jacobian(
        [&](const Eigen::VectorXd& f) {
          const Matrix3 F = Eigen::Map<const Matrix3>(f.data());
          const Matrix3 P = first_piola({F, s.R0}, lame);
          return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(P.data(), 9));
        },
        x, 1e-6);
    EXPECT_LE((K - fd).norm(), 1e-6 * K.norm());
  }
}

TEST(StressDerivative, PositiveSemidefinite) {
  oracle::Gen gen(5);
  for (int k = 0; k < 500; ++k) {
    const ElasticState s{gen.deformation(), gen.rotation()};
    const LameParameters lame{gen.uniform(0.01, 100.0), gen.uniform(0.0, 100.0)};
    const Matrix9 K = stress_derivative(s, lame);
    EXPECT_GE(oracle::min_eigenvalue(K), -1e-10 * oracle::max_abs_eigenvalue(K));
  }
}

TEST(HessianBlock, MatchesStressDerivative) {
  oracle::Gen gen(6);
  for (int k = 0; k < 100; ++k) {
    const ElasticState s{gen.deformation(), gen.rotation()};
    const LameParameters lame{gen.uniform(0.5, 5.0), gen.uniform(0.0, 5.0)};
    const Vector3 ci = gen.vector();
    const Vector3 cj = gen.vector();
    const Vector3 u = gen.vector();
    const Vector3 w = gen.vector();
    // d2 Psi [u ci^T, w cj^T] = <dP(w cj^T), u ci^T>.
    const double expected = stress_differential(s, lame, w * cj.transpose()).cwiseProduct(u * ci.transpose()).sum();
    EXPECT_NEAR(u.dot(hessian_block(s, lame, ci, cj) * w), expected, 1e-12 * (1.0 + std::abs(expected)));
  }
}

TEST(Polar, Examples) {
  auto [R, V] = polar_decompose(Matrix3::Identity());
  EXPECT_LE((R - Matrix3::Identity()).norm(), 1e-15);
  EXPECT_LE((V - Matrix3::Identity()).norm(), 1e-15);
  std::tie(R, V) = polar_decompose(2.0 * rot_z(30.0));
  EXPECT_LE((R - rot_z(30.0)).norm(), 1e-14);
  EXPECT_LE((V - 2.0 * Matrix3::Identity()).norm(), 1e-14);
  EXPECT_THROW(polar_decompose(Matrix3::Zero()), SolverError);
}

TEST(Polar, MatchesIterativeOracle) {
  oracle::Gen gen(7);
  for (int k = 0; k < 1000; ++k) {
    const Matrix3 F = gen.deformation(0.8);
    const auto [R, V] = polar_decompose(F);
    const auto [R_ref, V_ref] = oracle::higham_polar(F);
    EXPECT_LE((R.transpose() * R - Matrix3::Identity()).norm(), 1e-10);
    EXPECT_GT(R.determinant(), 0.0);
    EXPECT_LE((V - V.transpose()).norm(), 1e-10);
    EXPECT_LE((R * V - F).norm(), 1e-12 * F.norm());
    EXPECT_LE((R - R_ref).norm(), 1e-9);
    EXPECT_LE((V - V_ref).norm(), 1e-9 * F.norm());
  }
}

TEST(SymmetricEigen, Reconstructs) {
  oracle::Gen gen(8);
  for (int k = 0; k < 1000; ++k) {
    const Matrix3 M = gen.matrix(2.0);
    const Matrix3 A = M + M.transpose();
    const SymmetricEigen e = symmetric_eigen(A);
    EXPECT_LE((e.vectors * e.values.asDiagonal() * e.vectors.transpose() - A).norm(), 1e-11 * (1.0 + A.norm()));
    EXPECT_LE((e.vectors.transpose() * e.vectors - Matrix3::Identity()).norm(), 1e-12);
  }
}

// Principal stretches sigma with the yield radius eta / (2 mu) = 0.05.
ElasticState principal_state(const Vector3& sigma) { return {Matrix3(sigma.asDiagonal()), Matrix3::Identity()}; }
const LameParameters kLame{1.0, 1.0};
const PlasticParameters kPlastic = PlasticParameters::von_mises(0.1);

TEST(YieldTest, Examples) {
  EXPECT_FALSE(yield_test(principal_state(Vector3::Constant(1.3)), kLame, kPlastic).plastic);
  const YieldResult a = yield_test(principal_state(Vector3(1.1, 1.0, 1.0)), kLame, kPlastic);
  EXPECT_TRUE(a.plastic);
  EXPECT_NEAR(a.excess, 0.031650, 1e-6);
  const YieldResult b = yield_test(principal_state(Vector3(1.02, 1.0, 1.0)), kLame, kPlastic);
  EXPECT_FALSE(b.plastic);
  EXPECT_NEAR(b.excess + 0.05, 0.016330, 1e-6);
  EXPECT_FALSE(yield_test(principal_state(Vector3(3.0, 1.0, 1.0)), kLame, PlasticParameters::none()).plastic);
}

TEST(ReturnMap, ProjectedPrincipalStretches) {
  const Vector3 sigma = project_to_cylinder(Vector3(1.1, 1.0, 1.0), 0.05);
  EXPECT_NEAR(sigma.x(), 1.074158, 1e-6);
  EXPECT_NEAR(sigma.y(), 1.012921, 1e-6);
  EXPECT_NEAR(sigma.z(), 1.012921, 1e-6);

  const ReturnMapResult r =
      return_map(Matrix3(Vector3(1.1, 1.0, 1.0).asDiagonal()), Matrix3::Identity(), Matrix3::Identity(), kLame, kPlastic);
  EXPECT_EQ(r.status, ReturnMapStatus::kProjected);
  EXPECT_LE((r.Fe - Matrix3(sigma.asDiagonal())).norm(), 1e-12);
}

TEST(ReturnMap, RestStateUnchanged) {
  const ReturnMapResult r = return_map(Matrix3::Identity(), Matrix3::Identity(), Matrix3::Identity(), kLame, kPlastic);
  EXPECT_EQ(r.status, ReturnMapStatus::kElastic);
  EXPECT_EQ(r.Fp, Matrix3::Identity());
}

struct Trial {
  Matrix3 F, Fp, R0;
};

Trial random_trial(oracle::Gen& gen) {
  const Matrix3 Fp = gen.deformation(0.1);
  const Matrix3 Fe = gen.deformation(0.15);
  // R0 lags the rotation of Fe slightly.
  const Matrix3 R = polar_decompose(Fe).first;
  const Matrix3 lag = Eigen::AngleAxisd(gen.uniform(0.0, 0.05), gen.unit()).toRotationMatrix();
  return {Fe * Fp, Fp, lag * R};
}

TEST(ReturnMap, Properties) {
  oracle::Gen gen(9);
  int projected = 0;
  for (int k = 0; k < 5000; ++k) {
    const Trial t = random_trial(gen);
    const LameParameters lame{gen.uniform(0.5, 2.0), gen.uniform(0.0, 2.0)};
    const PlasticParameters plastic = PlasticParameters::von_mises(gen.uniform(0.01, 0.3) * 2.0 * lame.mu);
    const double radius = plastic.yield_stress / (2.0 * lame.mu);
    const ElasticState trial{t.F * t.Fp.inverse(), t.R0};
    const YieldResult y = yield_test(trial, lame, plastic);
    const ReturnMapResult r = return_map(t.F, t.Fp, t.R0, lame, plastic);

    // Identity exactly when elastic.
    if (!y.plastic) {
      EXPECT_EQ(r.status, ReturnMapStatus::kElastic);
      EXPECT_EQ(r.Fp, t.Fp);
      continue;
    }
    ASSERT_EQ(r.status, ReturnMapStatus::kProjected);
    ++projected;

    // Projection in eigenvalue space.
    const SymmetricEigen e = symmetric_eigen(trial.stretch());
    const Vector3 s = e.values;
    const Vector3 st = project_to_cylinder(s, radius);
    const Vector3 axis = Vector3::Constant(s.mean());
    EXPECT_GE((s - st).dot(st - axis), -1e-10);
    EXPECT_NEAR((st - Vector3::Constant(st.mean())).norm(), radius, 1e-12);
    EXPECT_NEAR(st.sum(), s.sum(), 1e-12 * std::abs(s.sum()));

    // The new elastic state lies on the yield surface and preserves the trace.
    const ElasticState after{r.Fe, t.R0};
    EXPECT_NEAR(deviatoric(after.stretch()).norm(), radius, 1e-9);
    EXPECT_NEAR(after.stretch().trace(), trial.stretch().trace(), 1e-12 * std::abs(trial.stretch().trace()));
    EXPECT_LE((r.Fe * r.Fp - t.F).norm(), 1e-12 * t.F.norm());

    // Idempotence.
    const ReturnMapResult again = return_map(t.F, r.Fp, t.R0, lame, plastic);
    EXPECT_LE((again.Fp - r.Fp).norm(), 1e-10);
  }
  EXPECT_GT(projected, 1000);
}

TEST(ReturnMap, NoLagRecoversProjectedStretchDirectly) {
  oracle::Gen gen(10);
  for (int k = 0; k < 500; ++k) {
    const Matrix3 Fe = gen.deformation(0.2);
    const Matrix3 R = polar_decompose(Fe).first;
    const LameParameters lame{1.0, 1.0};
    const PlasticParameters plastic = PlasticParameters::von_mises(0.02);
    const ElasticState trial{Fe, R};
    if (!yield_test(trial, lame, plastic).plastic) continue;
    const ReturnMapResult r = return_map(Fe, Matrix3::Identity(), R, lame, plastic);
    ASSERT_EQ(r.status, ReturnMapStatus::kProjected);
    const SymmetricEigen e = symmetric_eigen(trial.stretch());
    const Matrix3 S_proj = e.vectors * project_to_cylinder(e.values, 0.01).asDiagonal() * e.vectors.transpose();
    EXPECT_LE((R.transpose() * r.Fe - S_proj).norm(), 1e-12);
  }
}

TEST(Lame, FromYoungPoisson) {
  const LameParameters l = LameParameters::from_young_poisson(1e5, 0.25);
  EXPECT_NEAR(l.mu, 4e4, 1e-9);
  EXPECT_NEAR(l.lambda, 4e4, 1e-9);
  try {
    LameParameters::from_young_poisson(1e5, 0.5);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_STREQ(e.what(), "Poisson ratio must be < 0.5");
  }
  EXPECT_THROW(PlasticParameters::von_mises(0.0), ConfigError);
}

}  // namespace
