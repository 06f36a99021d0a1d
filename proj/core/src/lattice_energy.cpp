#include "hqclab/lattice_energy.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace hqclab {

LatticeEnergy::LatticeEnergy(std::shared_ptr<const Multilattice> domain,
                             std::shared_ptr<const InteractionModel> model, IVec origin)
    : domain_(std::move(domain)), model_(std::move(model)) {
  if (!(domain_->unit_cell() == model_->unit_cell()))
    throw std::invalid_argument("model and domain use different unit cells");
  const auto& L = *domain_;
  const long period = model_->period_cells();
  sites_.reserve(L.site_count());
  for (long s = 0; s < L.site_count(); ++s) {
    const int a = L.site_species(s);
    const IVec c = L.site_cell(s);
    long global = 0;
    if (period > 0) {
      IVec g{0, 0};
      for (int i = 0; i < L.dim(); ++i) g[i] = ((c[i] + origin[i]) % period + period) % period;
      global = L.dim() == 1 ? g[0] : g[0] + period * g[1];
    }
    const auto& bonds = model_->bonds(a);
    sites_.push_back({static_cast<long>(targets_.size()), static_cast<int>(bonds.size()),
                      &model_->potential(a, global)});
    for (const auto& b : bonds) {
      IVec t = c;
      for (int i = 0; i < L.dim(); ++i) t[i] += b.cell_shift[i];
      targets_.push_back(L.site_index(t, b.target_species));
      r_.push_back(b.r);
    }
    max_bonds_ = std::max(max_bonds_, static_cast<int>(bonds.size()));
  }
}

void LatticeEnergy::gaps(const Eigen::VectorXd& w, const Mat& F, long s, double* out) const {
  const int d = dim();
  const double inv = 1.0 / domain_->spacing();
  const auto& sb = sites_[s];
  for (int b = 0; b < sb.count; ++b) {
    const long t = targets_[sb.first + b];
    const Vec& r = r_[sb.first + b];
    for (int i = 0; i < d; ++i) {
      double g = (w[t * d + i] - w[s * d + i]) * inv;
      for (int j = 0; j < d; ++j) g += F(i, j) * r[j];
      out[b * d + i] = g;
    }
  }
}

double LatticeEnergy::energy(const Eigen::VectorXd& w, const Mat& F) const {
  std::vector<double> g(max_bonds_ * dim());
  double e = 0.0;
  for (long s = 0; s < site_count(); ++s) {
    gaps(w, F, s, g.data());
    e += sites_[s].potential->energy(g.data());
  }
  return std::isfinite(e) ? e / double(site_count()) : std::numeric_limits<double>::infinity();
}

Eigen::VectorXd LatticeEnergy::site_energies(const Eigen::VectorXd& w, const Mat& F) const {
  std::vector<double> g(max_bonds_ * dim());
  Eigen::VectorXd out(site_count());
  for (long s = 0; s < site_count(); ++s) {
    gaps(w, F, s, g.data());
    out[s] = sites_[s].potential->energy(g.data());
  }
  return out;
}

double LatticeEnergy::gradient(const Eigen::VectorXd& w, const Mat& F, Eigen::VectorXd& grad) const {
  const int d = dim();
  const double scale = 1.0 / (double(site_count()) * domain_->spacing());
  std::vector<double> g(max_bonds_ * d), dv(max_bonds_ * d);
  grad.setZero(dof_count());
  double e = 0.0;
  for (long s = 0; s < site_count(); ++s) {
    const auto& sb = sites_[s];
    gaps(w, F, s, g.data());
    try {
      e += sb.potential->gradient(g.data(), dv.data());
    } catch (const std::domain_error&) {
      return std::numeric_limits<double>::infinity();
    }
    for (int b = 0; b < sb.count; ++b) {
      const long t = targets_[sb.first + b];
      for (int i = 0; i < d; ++i) {
        grad[t * d + i] += scale * dv[b * d + i];
        grad[s * d + i] -= scale * dv[b * d + i];
      }
    }
  }
  return e / double(site_count());
}

Eigen::SparseMatrix<double> LatticeEnergy::hessian(const Eigen::VectorXd& w, const Mat& F) const {
  const int d = dim();
  const double scale = 1.0 / (double(site_count()) * domain_->spacing() * domain_->spacing());
  std::vector<double> g(max_bonds_ * d);
  Eigen::MatrixXd H(max_bonds_ * d, max_bonds_ * d);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(site_count() * max_bonds_ * 4 * d * d);
  for (long s = 0; s < site_count(); ++s) {
    const auto& sb = sites_[s];
    const int k = sb.count * d;
    gaps(w, F, s, g.data());
    auto Hs = H.topLeftCorner(k, k);
    sb.potential->hessian(g.data(), Hs);
    const bool sep = sb.potential->separable();
    for (int b = 0; b < sb.count; ++b) {
      const long tb = targets_[sb.first + b];
      for (int c = 0; c < sb.count; ++c) {
        if (sep && c != b) continue;
        const long tc = targets_[sb.first + c];
        for (int i = 0; i < d; ++i)
          for (int j = 0; j < d; ++j) {
            const double v = scale * Hs(b * d + i, c * d + j);
            if (v == 0.0) continue;
            trip.emplace_back(tb * d + i, tc * d + j, v);
            trip.emplace_back(s * d + i, s * d + j, v);
            trip.emplace_back(tb * d + i, s * d + j, -v);
            trip.emplace_back(s * d + i, tc * d + j, -v);
          }
      }
    }
  }
  Eigen::SparseMatrix<double> out(dof_count(), dof_count());
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

Mat LatticeEnergy::stress(const Eigen::VectorXd& w, const Mat& F) const {
  const int d = dim();
  std::vector<double> g(max_bonds_ * d), dv(max_bonds_ * d);
  Mat S = Mat::Zero(d, d);
  for (long s = 0; s < site_count(); ++s) {
    const auto& sb = sites_[s];
    gaps(w, F, s, g.data());
    sb.potential->gradient(g.data(), dv.data());
    for (int b = 0; b < sb.count; ++b) {
      const Vec& r = r_[sb.first + b];
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) S(i, j) += dv[b * d + i] * r[j];
    }
  }
  return S / double(site_count());
}

Eigen::MatrixXd LatticeEnergy::mixed(const Eigen::VectorXd& w, const Mat& F) const {
  const int d = dim();
  const double scale = 1.0 / (double(site_count()) * domain_->spacing());
  std::vector<double> g(max_bonds_ * d);
  Eigen::MatrixXd H(max_bonds_ * d, max_bonds_ * d);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(dof_count(), d * d);
  for (long s = 0; s < site_count(); ++s) {
    const auto& sb = sites_[s];
    const int k = sb.count * d;
    gaps(w, F, s, g.data());
    auto Hs = H.topLeftCorner(k, k);
    sb.potential->hessian(g.data(), Hs);
    const bool sep = sb.potential->separable();
    for (int b = 0; b < sb.count; ++b) {
      const long tb = targets_[sb.first + b];
      for (int c = 0; c < sb.count; ++c) {
        if (sep && c != b) continue;
        const Vec& rc = r_[sb.first + c];
        for (int i = 0; i < d; ++i)
          for (int kk = 0; kk < d; ++kk)
            for (int l = 0; l < d; ++l) {
              const double v = scale * Hs(b * d + i, c * d + kk) * rc[l];
              out(tb * d + i, flat_index(kk, l, d)) += v;
              out(s * d + i, flat_index(kk, l, d)) -= v;
            }
      }
    }
  }
  return out;
}

Eigen::MatrixXd LatticeEnergy::tangent(const Eigen::VectorXd& w, const Mat& F) const {
  const int d = dim();
  std::vector<double> g(max_bonds_ * d);
  Eigen::MatrixXd H(max_bonds_ * d, max_bonds_ * d);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d * d, d * d);
  for (long s = 0; s < site_count(); ++s) {
    const auto& sb = sites_[s];
    const int k = sb.count * d;
    gaps(w, F, s, g.data());
    auto Hs = H.topLeftCorner(k, k);
    sb.potential->hessian(g.data(), Hs);
    const bool sep = sb.potential->separable();
    for (int b = 0; b < sb.count; ++b) {
      const Vec& rb = r_[sb.first + b];
      for (int c = 0; c < sb.count; ++c) {
        if (sep && c != b) continue;
        const Vec& rc = r_[sb.first + c];
        for (int i = 0; i < d; ++i)
          for (int j = 0; j < d; ++j)
            for (int kk = 0; kk < d; ++kk)
              for (int l = 0; l < d; ++l)
                out(flat_index(i, j, d), flat_index(kk, l, d)) += rb[j] * Hs(b * d + i, c * d + kk) * rc[l];
      }
    }
  }
  return out / double(site_count());
}

}  // namespace hqclab
