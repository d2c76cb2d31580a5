#include "confope/kernel_minimax.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <numeric>
#include <stdexcept>

#include "confope/rng.hpp"

namespace confope {

namespace {

// Squared pairwise distances are assembled from row norms and one GEMM.
// Exactly duplicated points then suffer catastrophic cancellation under the
// outer square root, so anything below the relative snap threshold is
// treated as a true zero.
constexpr double kD2SnapTol = 1e-12;

Eigen::MatrixXd kernelize(Eigen::MatrixXd d2, double beta, bool squared) {
  if (!squared)
    d2 = d2.array().max(0.0).sqrt().matrix();
  else
    d2 = d2.array().max(0.0).matrix();
  return (-d2.array() / (2.0 * beta * beta)).exp().matrix();
}

struct GramPair {
  Eigen::MatrixXd same;   // pair actions equal: observation blocks interact
  Eigen::MatrixXd cross;  // pair actions differ: blocks are orthogonal
};

GramPair gram_pair(const Eigen::MatrixXd& bx, const Eigen::VectorXd& nx,
                   const Eigen::MatrixXd& by, const Eigen::VectorXd& ny,
                   double beta, bool squared) {
  Eigen::MatrixXd base = nx.replicate(1, ny.size());
  base.rowwise() += ny.transpose();
  Eigen::MatrixXd d2 = base - 2.0 * (bx * by.transpose());
  d2 = (d2.array() < kD2SnapTol * base.array()).select(0.0, d2);
  GramPair out;
  out.same = kernelize(std::move(d2), beta, squared);
  out.cross = kernelize(std::move(base), beta, squared);
  return out;
}

Eigen::VectorXd row_norms(const Eigen::MatrixXd& m) {
  return m.rowwise().squaredNorm();
}

std::vector<int> gather_actions(const std::vector<int>& actions,
                                const std::vector<int>& idx) {
  std::vector<int> out(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) out[k] = actions[idx[k]];
  return out;
}

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& m,
                            const std::vector<int>& idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) out.row(k) = m.row(idx[k]);
  return out;
}

Eigen::VectorXd gather(const Eigen::VectorXd& v, const std::vector<int>& idx) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out[k] = v[idx[k]];
  return out;
}

// nu_O support embedded in the observation feature space, with weights and
// target probabilities per point.
struct InitPoints {
  Eigen::MatrixXd feat;  // m0 x block_dim
  Eigen::VectorXd norm;
  Eigen::VectorXd w;     // sums to 1
  Eigen::MatrixXd pi;    // m0 x A
};

InitPoints make_init_points(const InitObsDist& init, const FeatureMap& fm,
                            const Policy& target) {
  if (init.empty())
    throw std::invalid_argument("kernel loss: dataset carries no "
                                "initial-observation distribution");
  const int na = fm.num_actions;
  InitPoints ip;
  if (init.exact()) {
    if (fm.kind != FeatureMap::Kind::one_hot)
      throw std::invalid_argument("kernel loss: exact initial distribution "
                                  "requires one-hot features");
    const Eigen::Index m0 = init.probs.size();
    Eigen::MatrixXd pts(m0, 1);
    for (Eigen::Index o = 0; o < m0; ++o) pts(o, 0) = static_cast<double>(o);
    ip.feat = feature_block(fm, pts);
    ip.w = init.probs;
    ip.pi.resize(m0, na);
    for (Eigen::Index o = 0; o < m0; ++o)
      for (int a = 0; a < na; ++a)
        ip.pi(o, a) = policy_prob(target, a, Obs{static_cast<int>(o)});
  } else {
    const Eigen::Index m0 = static_cast<Eigen::Index>(init.samples.size());
    ip.feat = feature_block(fm, init_obs_points(init));
    ip.w = Eigen::VectorXd::Constant(m0, 1.0 / static_cast<double>(m0));
    ip.pi.resize(m0, na);
    for (Eigen::Index k = 0; k < m0; ++k)
      for (int a = 0; a < na; ++a)
        ip.pi(k, a) = policy_prob(target, a, init.samples[k]);
  }
  ip.norm = row_norms(ip.feat);
  return ip;
}

// Everything a loss evaluation needs, precomputed once per dataset.
struct KernelWork {
  KernelLossKind kind;
  FeatureMap fm;
  bool squared = false;
  double beta = 0.0;
  FeatureColumns cols;
  PolicyColumns pol;
  Eigen::VectorXd norm_anchor;  // kernel-input row norms
  Eigen::VectorXd norm_o;       // weight losses: (A,O) test inputs
  Eigen::VectorXd norm_plus;    //                O+ smeared inputs
  // Weight losses: initial-distribution linear and constant terms.
  Eigen::VectorXd h_full;
  double init_const = 0.0;
};

const Eigen::MatrixXd& kernel_input(const KernelWork& w) {
  return w.kind == KernelLossKind::pomql ? w.cols.f_minus : w.cols.f_o;
}

const Eigen::MatrixXd& bridge_block(const KernelWork& w) {
  return w.kind == KernelLossKind::pomwl ? w.cols.f_minus : w.cols.f_o;
}

KernelWork make_kernel_work(KernelLossKind kind, const TupleDataset& data,
                            const FeatureMap& fm, const Policy& target,
                            bool squared) {
  if (policy_num_actions(target) != fm.num_actions)
    throw std::invalid_argument("kernel loss: policy and feature map disagree "
                                "on the action count");
  KernelWork w;
  w.kind = kind;
  w.fm = fm;
  w.squared = squared;
  w.cols = make_feature_columns(data, fm);
  w.pol = make_policy_columns(data, target);
  w.norm_anchor = row_norms(kernel_input(w));
  if (!is_value_loss(kind)) {
    w.norm_o = row_norms(w.cols.f_o);
    w.norm_plus = row_norms(w.cols.f_plus);
  }
  return w;
}

// h_i = gamma E_nu[K_pipi(O+_i, o~)] - E_nu[K_pia(o~; (A_i, O_i))] and the
// constant E_{nu x nu}[K_pipi], computed in row chunks so the n x m0 grams
// stay small.
void compute_init_terms(KernelWork& w, const InitPoints& ip) {
  const Eigen::Index n = w.cols.f_o.rows();
  const double gamma = w.cols.gamma;
  w.h_full.resize(n);
  const Eigen::Index chunk = 1024;
  for (Eigen::Index start = 0; start < n; start += chunk) {
    const Eigen::Index len = std::min(chunk, n - start);
    const GramPair gpp =
        gram_pair(w.cols.f_plus.middleRows(start, len),
                  w.norm_plus.segment(start, len), ip.feat, ip.norm, w.beta,
                  w.squared);
    const Eigen::MatrixXd pdot =
        w.pol.pi_plus.middleRows(start, len) * ip.pi.transpose();
    const Eigen::MatrixXd kpp =
        pdot.cwiseProduct(gpp.same) +
        (Eigen::MatrixXd::Ones(len, ip.feat.rows()) - pdot)
            .cwiseProduct(gpp.cross);

    const GramPair gpo =
        gram_pair(w.cols.f_o.middleRows(start, len),
                  w.norm_o.segment(start, len), ip.feat, ip.norm, w.beta,
                  w.squared);
    Eigen::MatrixXd pa_init(len, ip.feat.rows());
    for (Eigen::Index i = 0; i < len; ++i)
      pa_init.row(i) = ip.pi.col(w.cols.actions[start + i]).transpose();
    const Eigen::MatrixXd kpa =
        pa_init.cwiseProduct(gpo.same) +
        (Eigen::MatrixXd::Ones(len, ip.feat.rows()) - pa_init)
            .cwiseProduct(gpo.cross);

    w.h_full.segment(start, len) = gamma * (kpp * ip.w) - kpa * ip.w;
  }

  const GramPair g00 =
      gram_pair(ip.feat, ip.norm, ip.feat, ip.norm, w.beta, w.squared);
  const Eigen::MatrixXd pdot0 = ip.pi * ip.pi.transpose();
  const Eigen::MatrixXd k00 =
      pdot0.cwiseProduct(g00.same) +
      (Eigen::MatrixXd::Ones(ip.feat.rows(), ip.feat.rows()) - pdot0)
          .cwiseProduct(g00.cross);
  w.init_const = ip.w.dot(k00 * ip.w);
}

struct LossGrad {
  double loss = 0.0;
  Eigen::VectorXd grad;
};

LossGrad eval_value_loss(const KernelWork& w, const std::vector<int>& idx,
                         const Eigen::VectorXd& theta, bool want_grad) {
  const Eigen::Index m = static_cast<Eigen::Index>(idx.size());
  const int bd = w.fm.block_dim();
  const int na = w.fm.num_actions;
  const bool po = w.kind == KernelLossKind::pomql;

  const Eigen::MatrixXd ax = gather_rows(kernel_input(w), idx);
  const Eigen::VectorXd an = gather(w.norm_anchor, idx);
  const GramPair g = gram_pair(ax, an, ax, an, w.beta, w.squared);
  const std::vector<int> act = gather_actions(w.cols.actions, idx);
  Eigen::MatrixXd k(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      k(i, j) = act[i] == act[j] ? g.same(i, j) : g.cross(i, j);

  Eigen::MatrixXd u(m, w.fm.dim);
  Eigen::VectorXd rt(m);
  Eigen::VectorXd wb(m);
  const double gamma = w.cols.gamma;
  for (Eigen::Index kk = 0; kk < m; ++kk) {
    const int i = idx[kk];
    const double cf = po ? w.pol.pa[i] : 1.0;
    for (int a2 = 0; a2 < na; ++a2)
      u.row(kk).segment(a2 * bd, bd) =
          gamma * cf * w.pol.pi_plus(i, a2) * w.cols.f_plus.row(i);
    u.row(kk).segment(act[kk] * bd, bd) -= cf * w.cols.f_o.row(i);
    rt[kk] = w.cols.reward[i] * cf;
    wb[kk] = w.cols.weight[i];
  }
  wb /= wb.sum();

  const Eigen::VectorXd res = u * theta + rt;
  const Eigen::VectorXd wres = wb.cwiseProduct(res);
  const Eigen::VectorXd kv = k * wres;
  LossGrad out;
  out.loss = wres.dot(kv);
  if (want_grad) out.grad = 2.0 * u.transpose() * wb.cwiseProduct(kv);
  return out;
}

LossGrad eval_weight_loss(const KernelWork& w, const std::vector<int>& idx,
                          const Eigen::VectorXd& theta, bool want_grad) {
  const Eigen::Index m = static_cast<Eigen::Index>(idx.size());
  const int bd = w.fm.block_dim();
  const double gamma = w.cols.gamma;
  const bool po = w.kind == KernelLossKind::pomwl;

  const Eigen::MatrixXd fo = gather_rows(w.cols.f_o, idx);
  const Eigen::VectorXd no = gather(w.norm_o, idx);
  const Eigen::MatrixXd fp = gather_rows(w.cols.f_plus, idx);
  const Eigen::VectorXd np = gather(w.norm_plus, idx);
  const Eigen::MatrixXd pip = gather_rows(w.pol.pi_plus, idx);
  const std::vector<int> act = gather_actions(w.cols.actions, idx);

  const GramPair gpp = gram_pair(fp, np, fp, np, w.beta, w.squared);
  const Eigen::MatrixXd pdot = pip * pip.transpose();
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(m, m);
  const Eigen::MatrixXd kpp = pdot.cwiseProduct(gpp.same) +
                              (ones - pdot).cwiseProduct(gpp.cross);

  const GramPair goo = gram_pair(fo, no, fo, no, w.beta, w.squared);
  Eigen::MatrixXd koo(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      koo(i, j) = act[i] == act[j] ? goo.same(i, j) : goo.cross(i, j);

  const GramPair gpo = gram_pair(fp, np, fo, no, w.beta, w.squared);
  Eigen::MatrixXd ppo(m, m);
  for (Eigen::Index j = 0; j < m; ++j) ppo.col(j) = pip.col(act[j]);
  const Eigen::MatrixXd kpo = ppo.cwiseProduct(gpo.same) +
                              (ones - ppo).cwiseProduct(gpo.cross);

  const Eigen::MatrixXd bmat = gamma * gamma * kpp + koo - gamma * kpo -
                               gamma * kpo.transpose();

  const Eigen::MatrixXd bf = gather_rows(bridge_block(w), idx);
  Eigen::VectorXd gvals(m), coef(m), wb(m);
  for (Eigen::Index kk = 0; kk < m; ++kk) {
    const int i = idx[kk];
    gvals[kk] = bf.row(kk).dot(theta.segment(act[kk] * bd, bd));
    coef[kk] = po ? w.pol.pa[i] : 1.0;
    wb[kk] = w.cols.weight[i];
  }
  wb /= wb.sum();
  const Eigen::VectorXd hb = gather(w.h_full, idx);

  const Eigen::VectorXd ctil = wb.cwiseProduct(coef.cwiseProduct(gvals));
  LossGrad out;
  out.loss = ctil.dot(bmat * ctil) + 2.0 * (1.0 - gamma) * ctil.dot(hb) +
             (1.0 - gamma) * (1.0 - gamma) * w.init_const;
  if (want_grad) {
    const Eigen::VectorXd t =
        wb.cwiseProduct(coef.cwiseProduct(bmat * ctil + (1.0 - gamma) * hb));
    out.grad = Eigen::VectorXd::Zero(w.fm.dim);
    for (Eigen::Index kk = 0; kk < m; ++kk)
      out.grad.segment(act[kk] * bd, bd) +=
          2.0 * t[kk] * bf.row(kk).transpose();
  }
  return out;
}

LossGrad eval_kernel_loss(const KernelWork& w, const std::vector<int>& idx,
                          const Eigen::VectorXd& theta, bool want_grad) {
  if (idx.empty()) throw std::invalid_argument("kernel loss: empty batch");
  if (theta.size() != w.fm.dim)
    throw std::invalid_argument("kernel loss: theta dimension mismatch");
  return is_value_loss(w.kind) ? eval_value_loss(w, idx, theta, want_grad)
                               : eval_weight_loss(w, idx, theta, want_grad);
}

std::vector<int> all_indices(std::size_t n) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

// Plug-in value estimate as a linear functional of theta: VM through nu_O for
// value losses, importance sampling over the full data for weight losses.
Eigen::VectorXd record_value_vector(const KernelWork& w,
                                    const InitPoints& ip) {
  const int bd = w.fm.block_dim();
  const int na = w.fm.num_actions;
  Eigen::VectorXd v0 = Eigen::VectorXd::Zero(w.fm.dim);
  if (is_value_loss(w.kind)) {
    for (int a = 0; a < na; ++a)
      v0.segment(a * bd, bd) =
          ip.feat.transpose() * ip.w.cwiseProduct(ip.pi.col(a));
    return v0;
  }
  const Eigen::MatrixXd& bf = bridge_block(w);
  const double inv = 1.0 / (1.0 - w.cols.gamma);
  for (Eigen::Index i = 0; i < bf.rows(); ++i) {
    const double coef =
        w.kind == KernelLossKind::pomwl ? w.pol.pa[i] : 1.0;
    v0.segment(w.cols.actions[i] * bd, bd) +=
        inv * w.cols.weight[i] * coef * w.cols.reward[i] *
        bf.row(i).transpose();
  }
  return v0;
}

}  // namespace

bool is_value_loss(KernelLossKind kind) {
  return kind == KernelLossKind::pomql || kind == KernelLossKind::mql;
}

double median_heuristic(const Eigen::MatrixXd& points, double divisor,
                        std::vector<std::string>* warnings) {
  if (points.rows() < 2)
    throw std::invalid_argument("median_heuristic: need at least two points");
  if (!(divisor > 0.0))
    throw std::invalid_argument("median_heuristic: divisor must be positive");
  const Eigen::Index k = points.rows();
  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(k) * (k - 1) / 2);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = i + 1; j < k; ++j)
      dists.push_back((points.row(i) - points.row(j)).norm());
  const std::size_t mid = (dists.size() - 1) / 2;
  std::nth_element(dists.begin(), dists.begin() + mid, dists.end());
  const double med = dists[mid];
  if (!(med > 0.0)) {
    if (warnings)
      warnings->push_back("median pairwise distance is zero; bandwidth "
                          "fallback 1.0");
    return 1.0;
  }
  return med / divisor;
}

double rbf_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                  double beta, bool squared_norm) {
  if (x.size() != y.size())
    throw std::invalid_argument("rbf_kernel: dimension mismatch");
  if (!(beta > 0.0))
    throw std::invalid_argument("rbf_kernel: beta must be positive");
  const double d = squared_norm ? (x - y).squaredNorm() : (x - y).norm();
  return std::exp(-d / (2.0 * beta * beta));
}

double kernel_loss(KernelLossKind kind, const Eigen::VectorXd& theta,
                   const TupleDataset& batch, const FeatureMap& fm,
                   const Policy& target, double beta, bool squared_norm) {
  if (!(beta > 0.0))
    throw std::invalid_argument("kernel_loss: beta must be positive");
  KernelWork w = make_kernel_work(kind, batch, fm, target, squared_norm);
  w.beta = beta;
  if (!is_value_loss(kind)) {
    const InitPoints ip = make_init_points(batch.init_obs, fm, target);
    compute_init_terms(w, ip);
  }
  return eval_kernel_loss(w, all_indices(batch.tuples.size()), theta, false)
      .loss;
}

Eigen::VectorXd kernel_loss_gradient(KernelLossKind kind,
                                     const Eigen::VectorXd& theta,
                                     const TupleDataset& batch,
                                     const FeatureMap& fm,
                                     const Policy& target, double beta,
                                     bool squared_norm) {
  if (!(beta > 0.0))
    throw std::invalid_argument("kernel_loss_gradient: beta must be positive");
  KernelWork w = make_kernel_work(kind, batch, fm, target, squared_norm);
  w.beta = beta;
  if (!is_value_loss(kind)) {
    const InitPoints ip = make_init_points(batch.init_obs, fm, target);
    compute_init_terms(w, ip);
  }
  return eval_kernel_loss(w, all_indices(batch.tuples.size()), theta, true)
      .grad;
}

TrainResult train_bridge_kernel(KernelLossKind kind, const TupleDataset& data,
                                const FeatureMap& fm, const Policy& target,
                                const TrainOptions& opts) {
  if (!(opts.learning_rate > 0.0) || opts.iterations <= 0 ||
      opts.batch_size <= 0 || opts.eval_every <= 0 || opts.avg_last <= 0)
    throw std::invalid_argument("train_bridge_kernel: invalid options");
  const std::size_t n = data.tuples.size();
  if (n == 0) throw std::invalid_argument("train_bridge_kernel: empty data");

  TrainResult out;
  KernelWork w = make_kernel_work(kind, data, fm, target, opts.squared_norm);

  if (opts.beta > 0.0) {
    w.beta = opts.beta;
  } else {
    // Bandwidth from the kernel-input pairs, subsampled for large datasets.
    std::vector<int> pick = all_indices(n);
    if (static_cast<int>(n) > opts.median_subsample) {
      RandomStream ms = derive_stream(opts.seed, "median", 0);
      for (std::size_t i = 0; i < static_cast<std::size_t>(
                                      opts.median_subsample); ++i)
        std::swap(pick[i], pick[i + ms.uniform_below(n - i)]);
      pick.resize(opts.median_subsample);
    }
    const Eigen::MatrixXd& anchor = kernel_input(w);
    const int bd = fm.block_dim();
    Eigen::MatrixXd pts =
        Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(pick.size()), fm.dim);
    for (std::size_t k = 0; k < pick.size(); ++k)
      pts.row(k).segment(w.cols.actions[pick[k]] * bd, bd) =
          anchor.row(pick[k]);
    const double divisor = is_value_loss(kind) ? 5.0 : 2.0;
    w.beta = median_heuristic(pts, divisor, &out.warnings);
  }
  out.beta = w.beta;

  const InitPoints ip = make_init_points(data.init_obs, fm, target);
  if (!is_value_loss(kind)) compute_init_terms(w, ip);
  const Eigen::VectorXd v0 = record_value_vector(w, ip);

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(fm.dim);
  std::deque<Eigen::VectorXd> snaps;
  std::vector<int> idx(opts.batch_size);
  for (long it = 0; it < opts.iterations; ++it) {
    RandomStream bs = derive_stream(opts.seed, "batch", it);
    for (int k = 0; k < opts.batch_size; ++k)
      idx[k] = static_cast<int>(bs.uniform_below(n));
    const LossGrad lg = eval_kernel_loss(w, idx, theta, true);
    theta -= opts.learning_rate * lg.grad;
    if ((it + 1) % opts.eval_every == 0) {
      out.trace.push_back(TrainRecord{it + 1, lg.loss, theta.dot(v0)});
      snaps.push_back(theta);
      if (static_cast<int>(snaps.size()) > opts.avg_last) snaps.pop_front();
    }
  }

  Eigen::VectorXd avg = theta;
  if (!snaps.empty()) {
    avg.setZero();
    for (const auto& s : snaps) avg += s;
    avg /= static_cast<double>(snaps.size());
  }

  out.bridge.fm = fm;
  out.bridge.theta = std::move(avg);
  out.bridge.role =
      is_value_loss(kind) ? BridgeRole::value : BridgeRole::weight;
  // Value losses learn theta on the q scale; attaching the policy makes
  // bridge_value return the b_V-scale object pi^e(a|o) q(a,o) for both kinds.
  if (is_value_loss(kind)) out.bridge.reparam_policy = target;
  return out;
}

double bellman_residual_certificate(const BridgeFunction& bridge,
                                    const TupleDataset& data,
                                    const Policy& target, double beta,
                                    bool squared_norm) {
  if (!(beta > 0.0))
    throw std::invalid_argument("bellman_residual_certificate: beta must be "
                                "positive");
  const FeatureMap& fm = bridge.fm;
  const FeatureColumns cols = make_feature_columns(data, fm);
  const PolicyColumns pol = make_policy_columns(data, target);
  const Eigen::Index n = cols.f_o.rows();
  const int bd = fm.block_dim();
  const int na = fm.num_actions;
  const double gamma = cols.gamma;
  const bool reparam = bridge.reparam_policy.has_value();

  Eigen::VectorXd bplus = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd bcur_by_a(n, na);
  for (int a = 0; a < na; ++a) {
    Eigen::VectorXd y = cols.f_plus * bridge.theta.segment(a * bd, bd);
    if (reparam) y = y.cwiseProduct(pol.pi_plus.col(a));
    bplus += y;
    Eigen::VectorXd z = cols.f_o * bridge.theta.segment(a * bd, bd);
    if (reparam) z = z.cwiseProduct(pol.pi_o.col(a));
    bcur_by_a.col(a) = z;
  }
  Eigen::VectorXd res(n);
  for (Eigen::Index i = 0; i < n; ++i)
    res[i] = pol.pa[i] * (cols.reward[i] + gamma * bplus[i]) -
             bcur_by_a(i, cols.actions[i]);
  const Eigen::VectorXd v = cols.weight.cwiseProduct(res);

  const Eigen::VectorXd nm = row_norms(cols.f_minus);
  const Eigen::Index tile = 2048;
  double acc = 0.0;
  for (int a = 0; a < na; ++a) {
    for (int a2 = a; a2 < na; ++a2) {
      const auto& ia = cols.by_action[a];
      const auto& ja = cols.by_action[a2];
      if (ia.empty() || ja.empty()) continue;
      for (std::size_t ib = 0; ib < ia.size();
           ib += static_cast<std::size_t>(tile)) {
        const std::size_t ilen =
            std::min<std::size_t>(tile, ia.size() - ib);
        const std::vector<int> irows(ia.begin() + ib, ia.begin() + ib + ilen);
        const Eigen::MatrixXd bi = gather_rows(cols.f_minus, irows);
        const Eigen::VectorXd ni = gather(nm, irows);
        const Eigen::VectorXd vi = gather(v, irows);
        const std::size_t jstart = (a == a2) ? ib : 0;
        for (std::size_t jb = jstart; jb < ja.size();
             jb += static_cast<std::size_t>(tile)) {
          const std::size_t jlen =
              std::min<std::size_t>(tile, ja.size() - jb);
          const std::vector<int> jrows(ja.begin() + jb,
                                       ja.begin() + jb + jlen);
          const Eigen::VectorXd nj = gather(nm, jrows);
          const Eigen::VectorXd vj = gather(v, jrows);
          Eigen::MatrixXd base = ni.replicate(1, static_cast<Eigen::Index>(
                                                     jlen));
          base.rowwise() += nj.transpose();
          Eigen::MatrixXd k;
          if (a == a2) {
            const Eigen::MatrixXd bj = gather_rows(cols.f_minus, jrows);
            Eigen::MatrixXd d2 = base - 2.0 * (bi * bj.transpose());
            d2 = (d2.array() < kD2SnapTol * base.array()).select(0.0, d2);
            k = kernelize(std::move(d2), beta, squared_norm);
          } else {
            k = kernelize(std::move(base), beta, squared_norm);
          }
          const double contrib = vi.dot(k * vj);
          const bool diagonal_tile = (a == a2) && (jb == ib);
          acc += diagonal_tile ? contrib : 2.0 * contrib;
        }
      }
    }
  }
  return acc;
}

void write_trace_csv(const std::string& path,
                     const std::vector<TrainRecord>& trace) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f)
    throw std::runtime_error("write_trace_csv: cannot open " + path);
  std::fprintf(f, "iteration,loss,value_estimate\n");
  for (const auto& r : trace)
    std::fprintf(f, "%ld,%.17g,%.17g\n", r.iteration, r.loss,
                 r.value_estimate);
  std::fclose(f);
}

}  // namespace confope
