#pragma once

// Masked Bayesian NMF for core-periphery detection.
//
// The model reconstructs an adjacency matrix as
//
//     Vhat = W H - (W o M)(H o M^T)
//
// with W (N x K) and H (K x N) non-negative pair affiliations and M (N x K) in
// [0, 1] a mask whose large entries mark periphery nodes. Entries of V are
// Poisson around Vhat, W and H carry half-normal priors with per-pair
// precision beta (Gamma(a, b) hyperprior), M carries a normal prior around mu
// (scale sigma_bar) and mu a normal prior around mu_hat (scale sigma_hat).
// Fitting minimizes the negative log posterior with multiplicative updates
// for W, H, M and closed-form updates for mu and beta.

#include "cpnmf/types.hpp"


#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace cpnmf {

struct Hyperparameters {
    double a = 5.0;          // Gamma shape of beta
    double b = 10.0;         // Gamma rate of beta
    double sigma_bar = 1.0;  // scale of the mask prior
    double sigma_hat = 1.0;  // scale of the prior on mu
    double mu_hat = 0.5;     // prior mean of mu
    Index k_init = 32;
    int n_iter = 500;
    double tol = 1e-6;  // relative objective change that stops the fit
    std::uint64_t seed = 0;
    double eps = 1e-12;
    double prune_threshold = 1e-3;
    // Halvings tried when a multiplicative step raises the objective.
    int max_backtracks = 30;

    void validate() const {
        auto require = [](bool ok, const char* msg) {
            if (!ok)
                throw std::invalid_argument(msg);
        };
        require(a > 0.0 && std::isfinite(a), "a must be > 0");
        require(b > 0.0 && std::isfinite(b), "b must be > 0");
        require(sigma_bar > 0.0 && std::isfinite(sigma_bar), "sigma_bar must be > 0");
        require(sigma_hat > 0.0 && std::isfinite(sigma_hat), "sigma_hat must be > 0");
        require(mu_hat >= 0.0 && mu_hat <= 1.0, "mu_hat must lie in [0, 1]");
        require(k_init >= 1, "k must be >= 1");
        require(n_iter >= 1, "n_iter must be >= 1");
        require(tol >= 0.0, "tol must be >= 0");
        require(eps > 0.0, "eps must be > 0");
        require(prune_threshold >= 0.0 && prune_threshold < 1.0, "prune threshold must lie in [0, 1)");
        require(max_backtracks >= 0, "max_backtracks must be >= 0");
    }
};

template <typename Scalar>
struct FactorState {
    Matrix<Scalar> W;     // N x K
    Matrix<Scalar> H;     // K x N
    Matrix<Scalar> M;     // N x K, entries in [0, 1]
    Vector<Scalar> beta;  // K, > 0
    Vector<Scalar> mu;    // K, in [0, 1]

    Index n() const noexcept { return W.rows(); }
    Index k() const noexcept { return W.cols(); }

    /// Throws std::invalid_argument when the shapes disagree.
    void check_shapes() const {
        const Index n_ = n();
        const Index k_ = k();
        if (H.rows() != k_ || H.cols() != n_ || M.rows() != n_ || M.cols() != k_ || beta.size() != k_ ||
            mu.size() != k_)
            throw std::invalid_argument("FactorState: inconsistent shapes (N=" + std::to_string(n_) +
                                        ", K=" + std::to_string(k_) + ")");
    }

    /// True when W, H >= 0, 0 <= M <= 1 and beta > 0 elementwise.
    bool feasible() const {
        return (W.array() >= 0).all() && (H.array() >= 0).all() && (M.array() >= 0).all() &&
               (M.array() <= 1).all() && (beta.array() > 0).all();
    }

    /// W, H, M ~ Uniform(0, 1) i.i.d. in that order (column-major fill), beta = mu = 1.
    static FactorState random(Index n, Index k, std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        auto draw = [&rng] {
            // (0, 1): offset by half an ulp-step so exact zeros never occur.
            return static_cast<Scalar>((static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53);
        };
        FactorState s;
        s.W = Matrix<Scalar>::NullaryExpr(n, k, draw);
        s.H = Matrix<Scalar>::NullaryExpr(k, n, draw);
        s.M = Matrix<Scalar>::NullaryExpr(n, k, draw);
        s.beta = Vector<Scalar>::Ones(k);
        s.mu = Vector<Scalar>::Ones(k);
        return s;
    }
};

namespace detail {

template <typename Derived>
void require_square(const Eigen::MatrixBase<Derived>& V, Index n) {
    if (V.rows() != n || V.cols() != n)
        throw std::invalid_argument("V must be " + std::to_string(n) + " x " + std::to_string(n));
}

}  // namespace detail

/// Vhat = W H - (W o M)(H o M^T).
template <typename Scalar>
Matrix<Scalar> reconstruct(const FactorState<Scalar>& s) {
    s.check_shapes();
    const Index k = s.k();
    Matrix<Scalar> left(s.n(), 2 * k);
    left << s.W, s.W.cwiseProduct(s.M);
    Matrix<Scalar> right(2 * k, s.n());
    right << s.H, -s.H.cwiseProduct(s.M.transpose());
    Matrix<Scalar> vhat(s.n(), s.n());
    vhat.noalias() = left * right;
    return vhat;
}

/// Additive pieces of the negative log posterior (constants dropped).
template <typename Scalar>
struct ObjectiveTerms {
    Scalar data = 0;       // sum v log(v / vhat) + vhat
    Scalar w_prior = 0;    // sum_k beta_k/2 |W_:k|^2 - N/2 log beta_k
    Scalar h_prior = 0;    // sum_k beta_k/2 |H_k:|^2 - N/2 log beta_k
    Scalar beta_prior = 0; // sum_k beta_k b - (a - 1) log beta_k
    Scalar mask_prior = 0; // sum (m_ik - mu_k)^2 / (2 sigma_bar^2)
    Scalar mu_prior = 0;   // sum (mu_k - mu_hat)^2 / (2 sigma_hat^2)

    Scalar total() const { return data + w_prior + h_prior + beta_prior + mask_prior + mu_prior; }
};

/// Generalized KL data term for a given reconstruction. 0 log(0/x) = 0 and
/// vhat is floored at eps inside the log.
template <typename DerivedV, typename DerivedR>
typename DerivedV::Scalar data_term(const Eigen::MatrixBase<DerivedV>& V, const Eigen::MatrixBase<DerivedR>& vhat,
                                    double eps) {
    using Scalar = typename DerivedV::Scalar;
    const Scalar floor = static_cast<Scalar>(eps);
    Scalar sum = 0;
    for (Index j = 0; j < V.cols(); ++j) {
        for (Index i = 0; i < V.rows(); ++i) {
            const Scalar v = V(i, j);
            const Scalar r = vhat(i, j);
            sum += r;
            if (v > 0)
                sum += v * std::log(v / std::max(r, floor));
        }
    }
    return sum;
}

/// Prior terms only; these do not depend on V.
template <typename Scalar>
ObjectiveTerms<Scalar> prior_terms(const FactorState<Scalar>& s, const Hyperparameters& hp) {
    const auto n = static_cast<Scalar>(s.n());
    const Vector<Scalar> log_beta = s.beta.array().log();
    const Vector<Scalar> w_sq = s.W.colwise().squaredNorm().transpose();
    const Vector<Scalar> h_sq = s.H.rowwise().squaredNorm();
    const auto a = static_cast<Scalar>(hp.a);
    const auto b = static_cast<Scalar>(hp.b);
    const auto sb2 = static_cast<Scalar>(hp.sigma_bar * hp.sigma_bar);
    const auto sh2 = static_cast<Scalar>(hp.sigma_hat * hp.sigma_hat);

    ObjectiveTerms<Scalar> t;
    t.w_prior = (Scalar(0.5) * s.beta.cwiseProduct(w_sq) - Scalar(0.5) * n * log_beta).sum();
    t.h_prior = (Scalar(0.5) * s.beta.cwiseProduct(h_sq) - Scalar(0.5) * n * log_beta).sum();
    t.beta_prior = (s.beta * b - (a - 1) * log_beta).sum();
    t.mask_prior = (s.M.rowwise() - s.mu.transpose()).squaredNorm() / (2 * sb2);
    t.mu_prior = (s.mu.array() - static_cast<Scalar>(hp.mu_hat)).square().sum() / (2 * sh2);
    return t;
}

template <typename Derived, typename Scalar>
ObjectiveTerms<Scalar> objective_terms(const Eigen::MatrixBase<Derived>& V, const FactorState<Scalar>& s,
                                       const Hyperparameters& hp) {
    s.check_shapes();
    detail::require_square(V, s.n());
    auto t = prior_terms(s, hp);
    t.data = data_term(V.derived(), reconstruct(s), hp.eps);
    return t;
}

/// Negative log posterior U without additive constants.
template <typename Derived, typename Scalar>
Scalar objective(const Eigen::MatrixBase<Derived>& V, const FactorState<Scalar>& s, const Hyperparameters& hp) {
    return objective_terms(V, s, hp).total();
}

namespace detail {

/// V / max(vhat, eps); zero wherever V is zero.
template <typename DerivedV, typename Scalar>
Matrix<Scalar> ratio(const Eigen::MatrixBase<DerivedV>& V, const Matrix<Scalar>& vhat, double eps) {
    const Scalar floor = static_cast<Scalar>(eps);
    return V.binaryExpr(vhat, [floor](Scalar v, Scalar r) { return v > 0 ? v / std::max(r, floor) : Scalar(0); });
}

// Nonzero entries of V in column-major order. The data term needs Vhat only
// at these positions plus its total sum, and V / Vhat vanishes elsewhere.
template <typename Scalar>
struct NonzeroPattern {
    std::vector<Index> row;
    std::vector<Index> col;
    Array<Scalar> value;
    Array<Scalar> v_log_v;  // v log v, the Vhat-independent part of the data term
    Index n = 0;

    template <typename Derived>
    explicit NonzeroPattern(const Eigen::MatrixBase<Derived>& V) : n(V.rows()) {
        std::vector<Scalar> vals;
        for (Index j = 0; j < V.cols(); ++j)
            for (Index i = 0; i < V.rows(); ++i)
                if (V(i, j) != 0) {
                    row.push_back(i);
                    col.push_back(j);
                    vals.push_back(V(i, j));
                }
        value = Eigen::Map<const Array<Scalar>>(vals.data(), static_cast<Index>(vals.size()));
        v_log_v = value * value.log();
    }

    Index size() const { return value.size(); }

    // Sum of v log(v / r) for r = max(base + t d1 + t^2 d2, eps); d1 and d2 may be null.
    Scalar log_term(const Array<Scalar>& base, const Array<Scalar>* d1, const Array<Scalar>* d2, Scalar t,
                    double eps, Array<Scalar>& scratch) const {
        const Scalar floor = static_cast<Scalar>(eps);
        if (d2)
            scratch = (base + t * *d1 + (t * t) * *d2).max(floor);
        else if (d1)
            scratch = (base + t * *d1).max(floor);
        else
            scratch = base.max(floor);
        return (v_log_v - value * scratch.log()).sum();
    }

    // Entries of left_t^T * right at the pattern, without forming the product.
    void sample(const Matrix<Scalar>& left_t, const Matrix<Scalar>& right, Array<Scalar>& out) const {
        out.resize(size());
        for (Index e = 0; e < size(); ++e) {
            const auto ue = static_cast<std::size_t>(e);
            out[e] = left_t.col(row[ue]).dot(right.col(col[ue]));
        }
    }

    void gather(const Matrix<Scalar>& dense, Array<Scalar>& out) const {
        out.resize(size());
        for (Index e = 0; e < size(); ++e) {
            const auto ue = static_cast<std::size_t>(e);
            out[e] = dense(row[ue], col[ue]);
        }
    }

    // Data term for a dense reconstruction.
    Scalar data_term(const Matrix<Scalar>& vhat, double eps) const {
        Array<Scalar> at, scratch;
        gather(vhat, at);
        return vhat.sum() + log_term(at, nullptr, nullptr, Scalar(0), eps, scratch);
    }

    // Writes V / max(vhat, eps) at the pattern into out. Entries off the
    // pattern are zeroed only when out is (re)allocated and never touched again.
    void ratio(const Array<Scalar>& vhat_at, double eps, Matrix<Scalar>& out) const {
        const Scalar floor = static_cast<Scalar>(eps);
        if (out.rows() != n || out.cols() != n)
            out.setZero(n, n);
        for (Index e = 0; e < size(); ++e) {
            const auto ue = static_cast<std::size_t>(e);
            out(row[ue], col[ue]) = value[e] / std::max(vhat_at[e], floor);
        }
    }
};

// Each update splits its gradient into a non-negative "descent" part (numerator)
// and "ascent" part (denominator); the multiplicative step is x * num / den.
template <typename Scalar>
struct SplitGradient {
    Matrix<Scalar> num;
    Matrix<Scalar> den;
};

template <typename Scalar>
SplitGradient<Scalar> split_W(const Matrix<Scalar>& R, const FactorState<Scalar>& s) {
    const Index k = s.k();
    const Matrix<Scalar> S = s.H.cwiseProduct(s.M.transpose());  // H o M^T
    Matrix<Scalar> rhs(s.n(), 2 * k);
    rhs.leftCols(k) = s.H.transpose();
    rhs.rightCols(k) = S.transpose();
    Matrix<Scalar> prod(s.n(), 2 * k);
    prod.noalias() = R * rhs;

    const RowVector<Scalar> h_sum = s.H.rowwise().sum().transpose();  // rows of 1 H^T
    const RowVector<Scalar> s_sum = S.rowwise().sum().transpose();    // rows of 1 (H o M^T)^T

    SplitGradient<Scalar> g;
    g.num = prod.leftCols(k) - prod.rightCols(k).cwiseProduct(s.M);
    g.den = s.W.array().rowwise() * s.beta.transpose().array() - s.M.array().rowwise() * s_sum.array();
    g.den.rowwise() += h_sum;
    return g;
}

template <typename Scalar>
SplitGradient<Scalar> split_H(const Matrix<Scalar>& R, const FactorState<Scalar>& s) {
    const Index k = s.k();
    const Matrix<Scalar> WM = s.W.cwiseProduct(s.M);
    Matrix<Scalar> lhs(s.n(), 2 * k);
    lhs.leftCols(k) = s.W;
    lhs.rightCols(k) = WM;
    Matrix<Scalar> prod(2 * k, s.n());
    prod.noalias() = lhs.transpose() * R;

    const Vector<Scalar> w_sum = s.W.colwise().sum().transpose();   // columns of W^T 1
    const Vector<Scalar> wm_sum = WM.colwise().sum().transpose();   // columns of (W o M)^T 1
    const Matrix<Scalar> Mt = s.M.transpose();

    SplitGradient<Scalar> g;
    g.num = prod.topRows(k) - Mt.cwiseProduct(prod.bottomRows(k));
    g.den = s.H.array().colwise() * s.beta.array() - Mt.array().colwise() * wm_sum.array();
    g.den.colwise() += w_sum;
    return g;
}

template <typename Scalar>
SplitGradient<Scalar> split_M(const Matrix<Scalar>& R, const FactorState<Scalar>& s, const Hyperparameters& hp) {
    const Matrix<Scalar> Ht = s.H.transpose();
    const Matrix<Scalar> HtM = Ht.cwiseProduct(s.M);
    const Matrix<Scalar> WM = s.W.cwiseProduct(s.M);
    Matrix<Scalar> r_htm(s.n(), s.k());
    r_htm.noalias() = R * HtM;
    Matrix<Scalar> rt_wm(s.n(), s.k());
    rt_wm.noalias() = R.transpose() * WM;

    const RowVector<Scalar> wm_sum = WM.colwise().sum();    // rows of 1 (W o M)
    const RowVector<Scalar> htm_sum = HtM.colwise().sum();  // rows of 1 (H^T o M)
    const auto inv_sb2 = static_cast<Scalar>(1.0 / (hp.sigma_bar * hp.sigma_bar));
    const Matrix<Scalar> dev = s.M.rowwise() - s.mu.transpose();

    SplitGradient<Scalar> g;
    g.num = (Ht.array().rowwise() * wm_sum.array() + s.W.array().rowwise() * htm_sum.array()).matrix() -
            dev.cwiseMin(Scalar(0)) * inv_sb2;
    g.den = s.W.cwiseProduct(r_htm) + Ht.cwiseProduct(rt_wm) + dev.cwiseMax(Scalar(0)) * inv_sb2;
    return g;
}

template <typename Scalar>
Matrix<Scalar> multiplicative_step(const Matrix<Scalar>& x, const SplitGradient<Scalar>& g, double eps) {
    const Scalar floor = static_cast<Scalar>(eps);
    return x.cwiseProduct(g.num.cwiseMax(Scalar(0)).cwiseQuotient(g.den.cwiseMax(floor)));
}

template <typename DerivedV, typename Scalar>
Matrix<Scalar> current_ratio(const Eigen::MatrixBase<DerivedV>& V, const FactorState<Scalar>& s, double eps) {
    detail::require_square(V, s.n());
    return ratio(V, reconstruct(s), eps);
}

}  // namespace detail

/// Analytic gradients of U. Each equals den - num of the matching update.
template <typename Derived, typename Scalar>
Matrix<Scalar> gradient_W(const Eigen::MatrixBase<Derived>& V, const FactorState<Scalar>& s,
                          const Hyperparameters& hp) {
    const auto g = detail::split_W(detail::current_ratio(V, s, hp.eps), s);
    return g.den - g.num;
}

template <typename Derived, typename Scalar>
Matrix<Scalar> gradient_H(const Eigen::MatrixBase<Derived>& V, const FactorState<Scalar>& s,
                          const Hyperparameters& hp) {
    const auto g = detail::split_H(detail::current_ratio(V, s, hp.eps), s);
    return g.den - g.num;
}

template <typename Derived, typename Scalar>
Matrix<Scalar> gradient_M(const Eigen::MatrixBase<Derived>& V, const FactorState<Scalar>& s,
                          const Hyperparameters& hp) {
    const auto g = detail::split_M(detail::current_ratio(V, s, hp.eps), s, hp);
    return g.den - g.num;
}

/// W o [R H^T - (R (H o M^T)^T) o M]_+ / [1 H^T - (1 (H o M^T)^T) o M + W B], R = V / Vhat.
template <typename Derived, typename Scalar>
Matrix<Scalar> update_W(const Eigen::MatrixBase<Derived>& V, const FactorState<Scalar>& s,
                        const Hyperparameters& hp) {
    return detail::multiplicative_step(s.W, detail::split_W(detail::current_ratio(V, s, hp.eps), s), hp.eps);
}

/// H o [W^T R - M^T o ((W o M)^T R)]_+ / [W^T 1 - ((W o M)^T 1) o M^T + B H].
template <typename Derived, typename Scalar>
Matrix<Scalar> update_H(const Eigen::MatrixBase<Derived>& V, const FactorState<Scalar>& s,
                        const Hyperparameters& hp) {
    return detail::multiplicative_step(s.H, detail::split_H(detail::current_ratio(V, s, hp.eps), s), hp.eps);
}

/// clip_[0,1]( M o [H^T o (1 (W o M)) + W o (1 (H^T o M)) - (M - mu)_- / sigma_bar^2]
///               / [(R (H^T o M)) o W + (R^T (W o M)) o H^T + (M - mu)_+ / sigma_bar^2] ).
template <typename Derived, typename Scalar>
Matrix<Scalar> update_M(const Eigen::MatrixBase<Derived>& V, const FactorState<Scalar>& s,
                        const Hyperparameters& hp) {
    const auto g = detail::split_M(detail::current_ratio(V, s, hp.eps), s, hp);
    return detail::multiplicative_step(s.M, g, hp.eps).cwiseMax(Scalar(0)).cwiseMin(Scalar(1));
}

/// mu_k = (sigma_hat^2 sum_i m_ik + sigma_bar^2 mu_hat) / (N sigma_hat^2 + sigma_bar^2), clipped to [0, 1].
template <typename Scalar>
Vector<Scalar> update_mu(const FactorState<Scalar>& s, const Hyperparameters& hp) {
    s.check_shapes();
    const auto sh2 = static_cast<Scalar>(hp.sigma_hat * hp.sigma_hat);
    const auto sb2 = static_cast<Scalar>(hp.sigma_bar * hp.sigma_bar);
    const auto n = static_cast<Scalar>(s.n());
    const Vector<Scalar> col_sum = s.M.colwise().sum().transpose();
    const Vector<Scalar> mu =
        ((sh2 * col_sum.array() + sb2 * static_cast<Scalar>(hp.mu_hat)) / (n * sh2 + sb2)).matrix();
    return mu.cwiseMax(Scalar(0)).cwiseMin(Scalar(1));
}

/// beta_k = (N + a - 1) / (0.5 (|W_:k|^2 + |H_k:|^2) + b).
template <typename Scalar>
Vector<Scalar> update_beta(const FactorState<Scalar>& s, const Hyperparameters& hp) {
    s.check_shapes();
    const auto numer = static_cast<Scalar>(static_cast<double>(s.n()) + hp.a - 1.0);
    const Vector<Scalar> denom = (Scalar(0.5) * (s.W.colwise().squaredNorm().transpose() + s.H.rowwise().squaredNorm()))
                                     .array() +
                                 static_cast<Scalar>(hp.b);
    if (!(numer > 0) || (denom.array() <= 0).any())
        throw std::domain_error("update_beta: degenerate prior (need N + a > 1 and a positive denominator)");
    return (numer / denom.array()).matrix();
}

/// Indices of pairs whose larger factor norm exceeds `threshold` times the
/// largest such norm, sorted by descending column mass of W (ties: lower index).
/// Throws std::runtime_error when no pair survives.
template <typename Scalar>
std::vector<Index> prune_pairs(const FactorState<Scalar>& s, double threshold) {
    s.check_shapes();
    const Vector<Scalar> w_norm = s.W.colwise().norm().transpose();
    const Vector<Scalar> h_norm = s.H.rowwise().norm();
    const Vector<Scalar> strength = w_norm.cwiseMax(h_norm);
    const Scalar top = s.k() > 0 ? strength.maxCoeff() : Scalar(0);
    if (!(top > 0))
        throw std::runtime_error("prune_pairs: every pair vanished (all-zero factors)");

    std::vector<Index> active;
    for (Index k = 0; k < s.k(); ++k)
        if (strength(k) > static_cast<Scalar>(threshold) * top)
            active.push_back(k);
    const Vector<Scalar> mass = s.W.colwise().sum().transpose();
    std::stable_sort(active.begin(), active.end(), [&](Index x, Index y) { return mass(x) > mass(y); });
    return active;
}

struct PairAssignment {
    std::vector<Index> labels;        // positions into the active pair list
    std::vector<bool> low_confidence; // W row was all zero over active pairs
};

/// argmax over active pairs of W_ik; ties go to the lowest pair index.
template <typename Scalar>
PairAssignment discretize_pairs(const FactorState<Scalar>& s, const std::vector<Index>& active) {
    if (active.empty())
        throw std::invalid_argument("discretize_pairs: no active pairs");
    PairAssignment out;
    out.labels.resize(static_cast<std::size_t>(s.n()));
    out.low_confidence.resize(static_cast<std::size_t>(s.n()));
    for (Index i = 0; i < s.n(); ++i) {
        std::size_t best = 0;
        for (std::size_t p = 1; p < active.size(); ++p) {
            const Scalar w = s.W(i, active[p]);
            const Scalar w_best = s.W(i, active[best]);
            if (w > w_best || (w == w_best && active[p] < active[best]))
                best = p;
        }
        const bool zero_row = !(s.W(i, active[best]) > 0);
        out.labels[static_cast<std::size_t>(i)] = zero_row ? 0 : static_cast<Index>(best);
        out.low_confidence[static_cast<std::size_t>(i)] = zero_row;
    }
    return out;
}

/// Node i in pair k is core iff M_ik is strictly below the mean of M_:k over
/// the nodes assigned to k.
template <typename Scalar>
std::vector<bool> discretize_core(const FactorState<Scalar>& s, const std::vector<Index>& active,
                                  const std::vector<Index>& labels) {
    if (static_cast<Index>(labels.size()) != s.n())
        throw std::invalid_argument("discretize_core: label count differs from N");
    std::vector<Scalar> sum(active.size(), Scalar(0));
    std::vector<Index> count(active.size(), 0);
    for (Index i = 0; i < s.n(); ++i) {
        const auto p = static_cast<std::size_t>(labels[static_cast<std::size_t>(i)]);
        sum[p] += s.M(i, active[p]);
        ++count[p];
    }
    std::vector<bool> core(static_cast<std::size_t>(s.n()));
    for (Index i = 0; i < s.n(); ++i) {
        const auto p = static_cast<std::size_t>(labels[static_cast<std::size_t>(i)]);
        const Scalar mean = sum[p] / static_cast<Scalar>(count[p]);
        core[static_cast<std::size_t>(i)] = s.M(i, active[p]) < mean;
    }
    return core;
}

template <typename Scalar>
struct DetectionResult {
    FactorState<Scalar> state;
    std::vector<Scalar> objective_trace;  // initial value, then one entry per sweep
    std::vector<Index> active_pairs;
    std::vector<Index> pair_labels;       // positions into active_pairs
    std::vector<bool> low_confidence;
    std::vector<bool> core_flags;
    Matrix<Scalar> core_scores;           // 1 - M
    int iterations = 0;
    bool converged = false;
    long rejected_steps = 0;              // backtracking halvings taken
    long stalled_blocks = 0;              // block updates where no step lowered U
    double seconds = 0.0;
};

namespace detail {

// A rank-2K matrix kept as left_t^T * right (both 2K x N).
template <typename Scalar>
struct Factored {
    Matrix<Scalar> left_t;
    Matrix<Scalar> right;

    Scalar sum() const { return left_t.rowwise().sum().dot(right.rowwise().sum()); }
};

template <typename Scalar>
Factored<Scalar> factor_vhat(const FactorState<Scalar>& s) {
    const Index k = s.k();
    Factored<Scalar> f;
    f.left_t.resize(2 * k, s.n());
    f.left_t << s.W.transpose(), s.W.cwiseProduct(s.M).transpose();
    f.right.resize(2 * k, s.n());
    f.right << s.H, -s.H.cwiseProduct(s.M.transpose());
    return f;
}

// Vhat and its change along a block step, both restricted to the pattern:
// Vhat(t) = Vhat + t d1 + t^2 d2, where d2 is used only for the mask.
template <typename Scalar>
struct VhatPath {
    Array<Scalar> d1;
    Array<Scalar> d2;
    Scalar sum1 = 0;
    Scalar sum2 = 0;
    bool quadratic = false;
};

template <typename Scalar>
void take_path(const NonzeroPattern<Scalar>& V, const Factored<Scalar>& f, Array<Scalar>& d, Scalar& sum) {
    V.sample(f.left_t, f.right, d);
    sum = f.sum();
}

template <typename Scalar>
void path_W(const NonzeroPattern<Scalar>& V, const FactorState<Scalar>& s, const Matrix<Scalar>& step,
            VhatPath<Scalar>& p) {
    const Index k = s.k();
    Factored<Scalar> f;
    f.left_t.resize(2 * k, s.n());
    f.left_t << step.transpose(), step.cwiseProduct(s.M).transpose();
    f.right.resize(2 * k, s.n());
    f.right << s.H, -s.H.cwiseProduct(s.M.transpose());
    take_path(V, f, p.d1, p.sum1);
    p.quadratic = false;
}

template <typename Scalar>
void path_H(const NonzeroPattern<Scalar>& V, const FactorState<Scalar>& s, const Matrix<Scalar>& step,
            VhatPath<Scalar>& p) {
    const Index k = s.k();
    Factored<Scalar> f;
    f.left_t.resize(2 * k, s.n());
    f.left_t << s.W.transpose(), s.W.cwiseProduct(s.M).transpose();
    f.right.resize(2 * k, s.n());
    f.right << step, -step.cwiseProduct(s.M.transpose());
    take_path(V, f, p.d1, p.sum1);
    p.quadratic = false;
}

template <typename Scalar>
void path_M(const NonzeroPattern<Scalar>& V, const FactorState<Scalar>& s, const Matrix<Scalar>& step,
            VhatPath<Scalar>& p) {
    const Index k = s.k();
    const Matrix<Scalar> W_step_t = s.W.cwiseProduct(step).transpose();
    const Matrix<Scalar> H_step = s.H.cwiseProduct(step.transpose());
    Factored<Scalar> f;
    f.left_t.resize(2 * k, s.n());
    f.left_t << W_step_t, s.W.cwiseProduct(s.M).transpose();
    f.right.resize(2 * k, s.n());
    f.right << -s.H.cwiseProduct(s.M.transpose()), -H_step;
    take_path(V, f, p.d1, p.sum1);

    Factored<Scalar> g;
    g.left_t = W_step_t;
    g.right = -H_step;
    take_path(V, g, p.d2, p.sum2);
    p.quadratic = true;
}

struct DescentStats {
    long rejected = 0;
    long stalled = 0;
};

// Vhat restricted to the pattern of V, plus its total sum.
template <typename Scalar>
struct PatternVhat {
    Array<Scalar> at;
    Scalar sum = 0;
};

// One block of a sweep: propose the multiplicative step and accept the
// longest step x + t (x* - x), t = 1, 1/2, ..., that does not raise U.
template <typename Scalar, typename Propose, typename Path, typename Access>
void descend_block(const NonzeroPattern<Scalar>& V, FactorState<Scalar>& s, const Hyperparameters& hp,
                   PatternVhat<Scalar>& vhat, Matrix<Scalar>& R, VhatPath<Scalar>& p, Scalar& data,
                   Scalar& u, Propose&& propose, Path&& path, Access&& block, DescentStats& stats) {
    V.ratio(vhat.at, hp.eps, R);
    Matrix<Scalar> proposal = propose(R);
    Matrix<Scalar> old = block(s);
    const Matrix<Scalar> step = proposal - old;
    path(V, s, step, p);
    const Array<Scalar>* d2 = p.quadratic ? &p.d2 : nullptr;
    Array<Scalar> scratch;

    Scalar t = 1;
    for (int attempt = 0; attempt <= hp.max_backtracks; ++attempt) {
        block(s) = attempt == 0 ? proposal : (old + t * step).eval();
        const Scalar sum_new = vhat.sum + t * p.sum1 + (p.quadratic ? t * t * p.sum2 : Scalar(0));
        const Scalar data_new = sum_new + V.log_term(vhat.at, &p.d1, d2, t, hp.eps, scratch);
        const Scalar u_new = data_new + prior_terms(s, hp).total();
        if (u_new <= u) {
            vhat.at += t * p.d1;
            if (p.quadratic)
                vhat.at += (t * t) * p.d2;
            vhat.sum = sum_new;
            data = data_new;
            u = u_new;
            return;
        }
        ++stats.rejected;
        t /= 2;
    }
    ++stats.stalled;
    block(s) = std::move(old);
}

// Closed-form block that leaves Vhat unchanged; kept only if U does not rise.
template <typename Scalar, typename Access, typename Vec>
void closed_form_block(FactorState<Scalar>& s, const Hyperparameters& hp, Scalar data, Scalar& u, Access&& block,
                       Vec&& proposal) {
    Vector<Scalar> old = block(s);
    block(s) = std::forward<Vec>(proposal);
    const Scalar u_new = data + prior_terms(s, hp).total();
    if (u_new <= u)
        u = u_new;
    else
        block(s) = std::move(old);
}

}  // namespace detail

/// Fits the model to a square, symmetric, non-negative V from the seeded
/// uniform start. Sweeps update W, H, M, mu, beta in that order, recompute
/// Vhat after every block and stop after hp.n_iter sweeps or once the
/// relative change of U drops below hp.tol.
template <typename Derived>
DetectionResult<typename Derived::Scalar> fit(const Eigen::MatrixBase<Derived>& V, const Hyperparameters& hp) {
    using Scalar = typename Derived::Scalar;
    hp.validate();
    if (V.rows() != V.cols())
        throw std::invalid_argument("fit: V must be square");
    if (V.rows() < 1)
        throw std::invalid_argument("fit: V is empty");
    if ((V.array() < 0).any() || !V.allFinite())
        throw std::invalid_argument("fit: V must be finite and non-negative");
    if (V != V.transpose())
        throw std::invalid_argument("fit: V must be symmetric");

    const auto started = std::chrono::steady_clock::now();
    DetectionResult<Scalar> res;
    FactorState<Scalar> s = FactorState<Scalar>::random(V.rows(), hp.k_init, hp.seed);

    const detail::NonzeroPattern<Scalar> pattern(V);
    detail::PatternVhat<Scalar> vhat;
    {
        const auto f = detail::factor_vhat(s);
        pattern.sample(f.left_t, f.right, vhat.at);
        vhat.sum = f.sum();
    }
    Matrix<Scalar> R;
    detail::VhatPath<Scalar> path;
    Array<Scalar> scratch;
    Scalar data = vhat.sum + pattern.log_term(vhat.at, nullptr, nullptr, Scalar(0), hp.eps, scratch);
    Scalar u = data + prior_terms(s, hp).total();
    res.objective_trace.push_back(u);

    auto W = [](FactorState<Scalar>& x) -> Matrix<Scalar>& { return x.W; };
    auto H = [](FactorState<Scalar>& x) -> Matrix<Scalar>& { return x.H; };
    auto M = [](FactorState<Scalar>& x) -> Matrix<Scalar>& { return x.M; };

    detail::DescentStats stats;
    for (int it = 0; it < hp.n_iter; ++it) {
        const Scalar u_prev = u;
        detail::descend_block(
            pattern, s, hp, vhat, R, path, data, u,
            [&](const Matrix<Scalar>& R) { return detail::multiplicative_step(s.W, detail::split_W(R, s), hp.eps); },
            detail::path_W<Scalar>, W, stats);
        detail::descend_block(
            pattern, s, hp, vhat, R, path, data, u,
            [&](const Matrix<Scalar>& R) { return detail::multiplicative_step(s.H, detail::split_H(R, s), hp.eps); },
            detail::path_H<Scalar>, H, stats);
        detail::descend_block(
            pattern, s, hp, vhat, R, path, data, u,
            [&](const Matrix<Scalar>& R) {
                return detail::multiplicative_step(s.M, detail::split_M(R, s, hp), hp.eps)
                    .cwiseMax(Scalar(0))
                    .cwiseMin(Scalar(1))
                    .eval();
            },
            detail::path_M<Scalar>, M, stats);

        detail::closed_form_block(
            s, hp, data, u, [](FactorState<Scalar>& x) -> Vector<Scalar>& { return x.mu; }, update_mu(s, hp));
        detail::closed_form_block(
            s, hp, data, u, [](FactorState<Scalar>& x) -> Vector<Scalar>& { return x.beta; }, update_beta(s, hp));

        res.objective_trace.push_back(u);
        res.iterations = it + 1;
        if (std::abs(u_prev - u) <= static_cast<Scalar>(hp.tol) * std::abs(u_prev)) {
            res.converged = true;
            break;
        }
    }

    res.rejected_steps = stats.rejected;
    res.stalled_blocks = stats.stalled;
    res.active_pairs = prune_pairs(s, hp.prune_threshold);
    auto assignment = discretize_pairs(s, res.active_pairs);
    res.core_flags = discretize_core(s, res.active_pairs, assignment.labels);
    res.pair_labels = std::move(assignment.labels);
    res.low_confidence = std::move(assignment.low_confidence);
    res.core_scores = (Scalar(1) - s.M.array()).matrix();
    res.state = std::move(s);
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return res;
}

}  // namespace cpnmf
