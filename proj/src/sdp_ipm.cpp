#include "capshare/sdp_ipm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdio>
#include <cstdlib>

namespace capshare {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double sparse_dot(const std::vector<std::pair<std::pair<int, int>, double>>& es,
                  const MatrixXd& m) {
  double acc = 0;
  for (const auto& [rc, v] : es)
    acc += (rc.first == rc.second ? v * m(rc.first, rc.first)
                                  : 2 * v * m(rc.first, rc.second));
  return acc;
}

// Largest alpha with P + alpha*D still positive definite, capped at 1.
double max_psd_step(const MatrixXd& P, const MatrixXd& D) {
  Eigen::LLT<MatrixXd> llt(P);
  if (llt.info() != Eigen::Success) return 0;
  const MatrixXd L = llt.matrixL();
  MatrixXd T = L.triangularView<Eigen::Lower>().solve(D);
  T = L.triangularView<Eigen::Lower>().solve(MatrixXd(T.transpose()));
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (T + T.transpose()),
                                             Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  if (lmin >= 0) return 1.0;
  return std::min(1.0, -1.0 / lmin);
}

struct BlockRows {
  // rows touching this block, with entries localized
  std::vector<int> row_ids;
  std::vector<std::vector<std::pair<std::pair<int, int>, double>>> entries;
};

}  // namespace

SdpIpmResult solve_block_sdp(const SdpData& data, const SdpIpmOptions& opts) {
  const int nb = static_cast<int>(data.dims.size());
  const int m = static_cast<int>(data.rows.size());

  // Localize row entries per block.
  std::vector<BlockRows> per_block(nb);
  for (int k = 0; k < m; ++k) {
    std::vector<std::vector<std::pair<std::pair<int, int>, double>>> tmp(nb);
    for (const BlockEntry& e : data.rows[k].entries)
      tmp[e.block].push_back({{e.r, e.c}, e.v});
    for (int b = 0; b < nb; ++b) {
      if (tmp[b].empty()) continue;
      per_block[b].row_ids.push_back(k);
      per_block[b].entries.push_back(std::move(tmp[b]));
    }
  }
  std::vector<MatrixXd> C(nb);
  for (int b = 0; b < nb; ++b) C[b] = MatrixXd::Zero(data.dims[b], data.dims[b]);
  for (const BlockEntry& e : data.objective) {
    C[e.block](e.r, e.c) += e.v;
    if (e.r != e.c) C[e.block](e.c, e.r) += e.v;
  }

  VectorXd rhs(m), tcol(m);
  std::vector<char> ineq(m);
  int n_slack = 0;
  for (int k = 0; k < m; ++k) {
    rhs[k] = data.rows[k].rhs;
    tcol[k] = data.rows[k].t_coef;
    ineq[k] = data.rows[k].inequality ? 1 : 0;
    n_slack += ineq[k];
  }
  double nu = n_slack;
  for (int d : data.dims) nu += d;

  double c_max = std::abs(data.obj_t_coef);
  for (const BlockEntry& e : data.objective) c_max = std::max(c_max, std::abs(e.v));
  double a_max = 0;
  for (int k = 0; k < m; ++k) {
    a_max = std::max(a_max, std::abs(tcol[k]));
    for (const BlockEntry& e : data.rows[k].entries)
      a_max = std::max(a_max, std::abs(e.v));
  }
  const double rhs_max = m ? rhs.lpNorm<Eigen::Infinity>() : 0.0;

  // Infeasible start on the central ray.
  const double xi_p = std::max(10.0, rhs_max);
  const double xi_d = std::max(10.0, c_max + a_max);
  std::vector<MatrixXd> X(nb), S(nb);
  for (int b = 0; b < nb; ++b) {
    X[b] = xi_p * MatrixXd::Identity(data.dims[b], data.dims[b]);
    S[b] = xi_d * MatrixXd::Identity(data.dims[b], data.dims[b]);
  }
  VectorXd u = VectorXd::Constant(m, xi_p);   // primal slacks (ineq rows only)
  VectorXd su = VectorXd::Constant(m, xi_d);  // their duals
  VectorXd y = VectorXd::Zero(m);
  double t = 0;

  SdpIpmResult res;
  res.y.assign(m, 0.0);

  std::vector<MatrixXd> Rd(nb), W(nb), Sinv(nb), WRdW(nb), E(nb), dS(nb), dX(nb);
  std::vector<MatrixXd> V;  // scratch: W A W per row of one block
  MatrixXd M(m, m);
  VectorXd rp(m), rdu(m), h(m), dy(m), dsu(m), du(m), e_vec(m);

  double best_gap = std::numeric_limits<double>::infinity();
  int no_progress = 0;

  for (int iter = 0; iter <= opts.max_iter; ++iter) {
    // Residuals and objective values.
    double xs = 0;
    for (int b = 0; b < nb; ++b) xs += (X[b].array() * S[b].array()).sum();
    for (int k = 0; k < m; ++k)
      if (ineq[k]) xs += u[k] * su[k];
    const double mu = xs / nu;

    double pobj = data.obj_t_coef * t + data.obj_const;
    for (int b = 0; b < nb; ++b) pobj += (C[b].array() * X[b].array()).sum();
    double dobj = rhs.dot(y) + data.obj_const;

    for (int k = 0; k < m; ++k) {
      double ax = 0;
      for (const BlockEntry& e : data.rows[k].entries)
        ax += (e.r == e.c ? e.v * X[e.block](e.r, e.r)
                          : 2 * e.v * X[e.block](e.r, e.c));
      rp[k] = rhs[k] - ax - tcol[k] * t - (ineq[k] ? u[k] : 0.0);
      rdu[k] = ineq[k] ? -y[k] - su[k] : 0.0;
    }
    for (int b = 0; b < nb; ++b) Rd[b] = C[b] - S[b];
    for (int b = 0; b < nb; ++b) {
      const BlockRows& br = per_block[b];
      for (std::size_t j = 0; j < br.row_ids.size(); ++j) {
        const double yk = y[br.row_ids[j]];
        if (yk == 0) continue;
        for (const auto& [rc, v] : br.entries[j]) {
          Rd[b](rc.first, rc.second) -= yk * v;
          if (rc.first != rc.second) Rd[b](rc.second, rc.first) -= yk * v;
        }
      }
    }
    double rt = data.has_t ? data.obj_t_coef - tcol.dot(y) : 0.0;
    double dinf = std::abs(rt);
    for (int b = 0; b < nb; ++b)
      dinf = std::max(dinf, Rd[b].cwiseAbs().maxCoeff());
    for (int k = 0; k < m; ++k) dinf = std::max(dinf, std::abs(rdu[k]));

    const double pinf = m ? rp.lpNorm<Eigen::Infinity>() : 0.0;
    const double rel_p = pinf / (1 + rhs_max);
    const double rel_d = dinf / (1 + c_max);
    const double rel_gap = std::abs(pobj - dobj) / (1 + std::abs(pobj) + std::abs(dobj));

    res.iterations = iter;
    res.primal_obj = pobj;
    res.dual_obj = dobj;
    res.rel_gap = rel_gap;
    res.primal_infeas = rel_p;
    res.dual_infeas = rel_d;
    if (std::getenv("SDP_TRACE"))
      fprintf(stderr, "it=%3d mu=%.3e gap=%.3e pinf=%.3e dinf=%.3e\n", iter, mu,
              rel_gap, rel_p, rel_d);
    if (rel_p <= opts.tol && rel_d <= opts.tol && rel_gap <= opts.tol) {
      res.converged = true;
      break;
    }
    if (iter == opts.max_iter) break;

    const double quality = std::max({rel_p, rel_d, rel_gap});
    if (quality < best_gap * 0.9999) {
      best_gap = quality;
      no_progress = 0;
    } else if (++no_progress > 40) {
      if (std::getenv("SDP_TRACE")) fprintf(stderr, "break: no progress\n");
      break;
    }

    // NT scaling per block.
    for (int b = 0; b < nb; ++b) {
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(S[b]);
      if (es.eigenvalues().minCoeff() <= 0) { if (std::getenv("SDP_TRACE")) fprintf(stderr, "break: S not pd\n"); return res; }
      const MatrixXd& Q = es.eigenvectors();
      VectorXd l = es.eigenvalues();
      VectorXd lsq = l.array().sqrt();
      MatrixXd Shalf = Q * lsq.asDiagonal() * Q.transpose();
      MatrixXd Sinvhalf = Q * lsq.cwiseInverse().asDiagonal() * Q.transpose();
      Sinv[b] = Q * l.cwiseInverse().asDiagonal() * Q.transpose();
      MatrixXd M1 = Shalf * X[b] * Shalf;
      Eigen::SelfAdjointEigenSolver<MatrixXd> es1(0.5 * (M1 + M1.transpose()));
      if (es1.eigenvalues().minCoeff() <= 0) return res;
      MatrixXd M1half = es1.eigenvectors() *
                        es1.eigenvalues().array().sqrt().matrix().asDiagonal() *
                        es1.eigenvectors().transpose();
      W[b] = Sinvhalf * M1half * Sinvhalf;
      W[b] = 0.5 * (W[b] + MatrixXd(W[b].transpose()));
      WRdW[b] = W[b] * Rd[b] * W[b];
    }
    VectorXd wu2(m);
    for (int k = 0; k < m; ++k) wu2[k] = ineq[k] ? u[k] / su[k] : 0.0;

    // Schur complement M = A W A^T (+ slack diagonal).
    M.setZero();
    for (int b = 0; b < nb; ++b) {
      const BlockRows& br = per_block[b];
      const std::size_t nr = br.row_ids.size();
      const MatrixXd& Wb = W[b];
      for (std::size_t p = 0; p < nr; ++p) {
        // V = W A_p W from rank-2 column updates
        MatrixXd Vp = MatrixXd::Zero(Wb.rows(), Wb.cols());
        for (const auto& [rc, v] : br.entries[p]) {
          if (rc.first == rc.second) {
            Vp.noalias() += v * Wb.col(rc.first) * Wb.col(rc.first).transpose();
          } else {
            Vp.noalias() += v * Wb.col(rc.first) * Wb.col(rc.second).transpose();
            Vp.noalias() += v * Wb.col(rc.second) * Wb.col(rc.first).transpose();
          }
        }
        for (std::size_t q = 0; q <= p; ++q) {
          const double mv = sparse_dot(br.entries[q], Vp);
          M(br.row_ids[p], br.row_ids[q]) += mv;
          if (br.row_ids[p] != br.row_ids[q]) M(br.row_ids[q], br.row_ids[p]) += mv;
        }
      }
    }
    for (int k = 0; k < m; ++k) M(k, k) += wu2[k];

    // Jacobi-scaled LDLT with a whisper of regularization; the Schur
    // complement turns badly conditioned in the endgame.
    VectorXd dscale = M.diagonal().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
    MatrixXd Ms = dscale.asDiagonal() * M * dscale.asDiagonal();
    Ms.diagonal().array() += 1e-13;
    Eigen::LDLT<MatrixXd> Mf(Ms);
    if (Mf.info() != Eigen::Success) {
      if (std::getenv("SDP_TRACE")) fprintf(stderr, "break: M factor failed\n");
      break;
    }
    auto schur_solve = [&](const VectorXd& v) {
      VectorXd x = dscale.asDiagonal() * Mf.solve(VectorXd(dscale.asDiagonal() * v));
      const VectorXd r = v - M * x;  // one refinement step
      x += dscale.asDiagonal() * Mf.solve(VectorXd(dscale.asDiagonal() * r));
      return x;
    };
    VectorXd Minv_t;
    double t_schur = 0;
    if (data.has_t) {
      Minv_t = schur_solve(tcol);
      t_schur = tcol.dot(Minv_t);
      if (!(t_schur > 0)) {
        if (std::getenv("SDP_TRACE")) fprintf(stderr, "break: t schur\n");
        break;
      }
    }

    // One direction solve for a given sigma; fills dy, dt, dS, dX, du, dsu.
    double dt = 0;
    auto solve_direction = [&](double sigma) {
      for (int b = 0; b < nb; ++b) {
        E[b] = -X[b];
        if (sigma > 0) E[b].noalias() += (sigma * mu) * Sinv[b];
      }
      for (int k = 0; k < m; ++k)
        e_vec[k] = ineq[k] ? (sigma > 0 ? sigma * mu / su[k] - u[k] : -u[k]) : 0.0;

      for (int k = 0; k < m; ++k) h[k] = rp[k];
      for (int b = 0; b < nb; ++b) {
        const BlockRows& br = per_block[b];
        for (std::size_t j = 0; j < br.row_ids.size(); ++j) {
          const int k = br.row_ids[j];
          h[k] -= sparse_dot(br.entries[j], E[b]);
          h[k] += sparse_dot(br.entries[j], WRdW[b]);
        }
      }
      for (int k = 0; k < m; ++k)
        if (ineq[k]) h[k] += -e_vec[k] + wu2[k] * rdu[k];

      if (data.has_t) {
        const VectorXd Minv_h = schur_solve(h);
        dt = (tcol.dot(Minv_h) - rt) / t_schur;
        dy = Minv_h - dt * Minv_t;
      } else {
        dy = schur_solve(h);
        dt = 0;
      }

      for (int b = 0; b < nb; ++b) {
        dS[b] = Rd[b];
        const BlockRows& br = per_block[b];
        for (std::size_t j = 0; j < br.row_ids.size(); ++j) {
          const double dyk = dy[br.row_ids[j]];
          for (const auto& [rc, v] : br.entries[j]) {
            dS[b](rc.first, rc.second) -= dyk * v;
            if (rc.first != rc.second) dS[b](rc.second, rc.first) -= dyk * v;
          }
        }
        dX[b] = E[b] - W[b] * dS[b] * W[b];
        dX[b] = 0.5 * (dX[b] + MatrixXd(dX[b].transpose()));
      }
      for (int k = 0; k < m; ++k) {
        if (!ineq[k]) {
          dsu[k] = 0;
          du[k] = 0;
          continue;
        }
        dsu[k] = rdu[k] - dy[k];
        du[k] = e_vec[k] - wu2[k] * dsu[k];
      }
    };

    auto step_lengths = [&](double& ap, double& ad) {
      ap = 1.0;
      ad = 1.0;
      for (int b = 0; b < nb; ++b) {
        ap = std::min(ap, max_psd_step(X[b], dX[b]));
        ad = std::min(ad, max_psd_step(S[b], dS[b]));
      }
      for (int k = 0; k < m; ++k) {
        if (!ineq[k]) continue;
        if (du[k] < 0) ap = std::min(ap, -u[k] / du[k]);
        if (dsu[k] < 0) ad = std::min(ad, -su[k] / dsu[k]);
      }
      ap = std::min(1.0, 0.98 * ap);
      ad = std::min(1.0, 0.98 * ad);
    };

    // Predictor.
    solve_direction(0.0);
    double ap, ad;
    step_lengths(ap, ad);
    double xs_aff = 0;
    for (int b = 0; b < nb; ++b)
      xs_aff += ((X[b] + ap * dX[b]).array() * (S[b] + ad * dS[b]).array()).sum();
    for (int k = 0; k < m; ++k)
      if (ineq[k]) xs_aff += (u[k] + ap * du[k]) * (su[k] + ad * dsu[k]);
    const double mu_aff = std::max(xs_aff, 0.0) / nu;
    double sigma = std::pow(mu_aff / mu, 3.0);
    sigma = std::clamp(sigma, 1e-6, 0.9);

    // Corrector with the centering weight.
    solve_direction(sigma);
    step_lengths(ap, ad);
    if (std::getenv("SDP_TRACE"))
      fprintf(stderr, "   sigma=%.3e ap=%.3e ad=%.3e\n", sigma, ap, ad);
    if (ap < 1e-8 && ad < 1e-8) { if (std::getenv("SDP_TRACE")) fprintf(stderr, "break: tiny steps\n"); break; }

    for (int b = 0; b < nb; ++b) {
      X[b].noalias() += ap * dX[b];
      S[b].noalias() += ad * dS[b];
    }
    for (int k = 0; k < m; ++k) {
      if (!ineq[k]) continue;
      u[k] += ap * du[k];
      su[k] += ad * dsu[k];
    }
    y += ad * dy;
    t += ap * dt;
  }

  res.blocks = X;
  for (int k = 0; k < m; ++k) res.y[k] = y[k];
  res.t_value = t;
  return res;
}

}  // namespace capshare
