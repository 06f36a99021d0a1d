#pragma once

#include "hqclab/fem.hpp"
#include "hqclab/potential.hpp"
#include "hqclab/solvers.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace hqclab {

/// Deformed shift vectors q_0 = 0, q_1, ..., q_{m-1} in cell units.
using Shifts = std::vector<Vec>;

struct ShiftSolution {
  Shifts q;
  NewtonReport report;
};

/// (1/m) sum_b V_b((F r + q_{a(b,r)} - q_b)_r).
double mqc_element_energy(const InteractionModel& model, const Mat& F, const Shifts& q);
/// Derivative of mqc_element_energy with respect to q_1..q_{m-1}, stacked.
Eigen::VectorXd mqc_shift_gradient(const InteractionModel& model, const Mat& F, const Shifts& q);

/// Stationary shifts reached by Newton from `guess` (zero when null), with
/// residual below 1e-12 (1 + |F|).
ShiftSolution solve_shift_vectors(const InteractionModel& model, const Mat& F, const Shifts* guess = nullptr);

/// Per-element shifts stored as one P0 field per species.
struct ShiftState {
  std::vector<P0Field> q;
};

/// sum_T |T| W(grad u|_T, q(grad u|_T)); fills `state` when given.
double mqc_energy(const InteractionModel& model, std::shared_ptr<const MacroMesh> mesh, const P1Field& u,
                  const ShiftState* guesses = nullptr, ShiftState* state = nullptr);

/// q_a = (U(eps p_a) - U(0)) / eps for a corrector on a one-period block.
Shifts shifts_from_corrector(const Eigen::VectorXd& corrector, int dim, int species, double eps);
/// Zero-mean corrector U(eps p_a) = eps (q_a - <q>).
Eigen::VectorXd corrector_from_shifts(const Shifts& q, double eps);

struct EquivalenceReport {
  double e_hqc = 0.0;
  double e_hom = 0.0;
  double e_mqc = 0.0;
  double max_gap = 0.0;
  bool hqc_ok = true;
  bool hom_ok = true;
  bool mqc_ok = true;
  std::string failure;
};

/// The three energies of u (HQC, homogenized, MQC), all started from zero
/// corrector guesses.
EquivalenceReport equivalence_report(std::shared_ptr<const InteractionModel> model,
                                     std::shared_ptr<const Multilattice> lattice,
                                     std::shared_ptr<const MacroMesh> mesh, const P1Field& u);

}  // namespace hqclab
