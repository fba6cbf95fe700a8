#include "ipscale/model.hpp"

#include "ipscale/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace ipscale {

namespace {

constexpr Scalar kInf = std::numeric_limits<Scalar>::infinity();

Scalar log_sum_exp(const Vector& z)
{
    const Scalar m = z.maxCoeff();
    if (!std::isfinite(m)) return m;
    return m + std::log((z.array() - m).exp().sum());
}

} // namespace

// --- ProblemInstance ---------------------------------------------------------

void ProblemInstance::drop_zero_offsets(Vector& q, Vector* n)
{
    original_rows_ = x_.rows();
    if (q.size() == 0) q = Vector::Ones(x_.rows());
    if (q.size() != x_.rows()) throw InputError("offset length does not match design rows");
    if (!q.allFinite() || (q.array() < 0).any()) throw InputError("offsets must be finite and non-negative");
    kept_.clear();
    for (Index i = 0; i < q.size(); ++i)
        if (q[i] > 0) kept_.push_back(i);
    if (kept_.empty()) throw InputError("all offsets are zero");
    if (static_cast<Index>(kept_.size()) < x_.rows()) {
        if (n) {
            for (Index i = 0; i < q.size(); ++i)
                if (q[i] == 0 && (*n)[i] > 0)
                    throw InputError("row " + std::to_string(i) + " has zero offset but a positive count");
        }
        try {
            x_ = x_.select_rows(kept_);
        } catch (const ContractError& e) {
            throw InputError(std::string("after dropping zero-offset rows: ") + e.what());
        }
        Vector qk(static_cast<Index>(kept_.size()));
        Vector nk(static_cast<Index>(kept_.size()));
        for (std::size_t r = 0; r < kept_.size(); ++r) {
            qk[static_cast<Index>(r)] = q[kept_[r]];
            if (n) nk[static_cast<Index>(r)] = (*n)[kept_[r]];
        }
        q = std::move(qk);
        if (n) *n = std::move(nk);
    }
    q_ = q;
    log_q_ = q_.array().log().matrix();
}

ProblemInstance ProblemInstance::from_counts(DesignMatrix x, Vector counts, Vector offset,
                                             std::optional<Vector> beta_true)
{
    ProblemInstance inst;
    inst.x_ = std::move(x);
    if (counts.size() != inst.x_.rows()) throw InputError("count vector length does not match design rows");
    if (!counts.allFinite() || (counts.array() < 0).any()) throw InputError("counts must be finite and non-negative");
    if (beta_true && beta_true->size() != inst.x_.cols()) throw InputError("beta_true length does not match design columns");
    inst.drop_zero_offsets(offset, &counts);
    if (counts.sum() <= 0) throw InputError("all counts are zero");
    inst.s_ = inst.x_.transpose_times(counts);
    inst.total_ = counts.sum();
    inst.n_ = std::move(counts);
    inst.beta_true_ = std::move(beta_true);
    return inst;
}

ProblemInstance ProblemInstance::from_sufficient_stats(DesignMatrix x, Vector suff_stats, Vector offset)
{
    ProblemInstance inst;
    inst.x_ = std::move(x);
    if (suff_stats.size() != inst.x_.cols()) throw InputError("sufficient statistics length does not match design columns");
    if (!suff_stats.allFinite()) throw InputError("sufficient statistics must be finite");
    if (!inst.x_.has_intercept()) throw InputError("sufficient-statistic instances need an intercept column");
    inst.drop_zero_offsets(offset, nullptr);
    inst.total_ = suff_stats[0];
    if (inst.total_ <= 0) throw InputError("total count must be positive");
    inst.s_ = std::move(suff_stats);
    return inst;
}

const Vector& ProblemInstance::counts() const
{
    if (!n_) throw ContractError("instance carries sufficient statistics only");
    return *n_;
}

Vector ProblemInstance::expand(const Vector& fitted) const
{
    Vector out = Vector::Zero(original_rows_);
    for (std::size_t r = 0; r < kept_.size(); ++r) out[kept_[r]] = fitted[static_cast<Index>(r)];
    return out;
}

// --- coefficients and likelihood ------------------------------------------------

Coefficients make_coefficients(const ProblemInstance& inst, Vector beta)
{
    if (beta.size() != inst.cols()) throw ContractError("coefficient length does not match design columns");
    Coefficients c{std::move(beta), {}};
    resync(inst, c);
    return c;
}

void resync(const ProblemInstance& inst, Coefficients& c)
{
    c.mu = (inst.log_offset() + inst.design().times(c.beta)).array().exp().matrix();
}

Scalar consistency_error(const ProblemInstance& inst, const Coefficients& c)
{
    const Vector eta = inst.design().times(c.beta);
    return ((c.mu.array().log() - inst.log_offset().array()) - eta.array()).abs().maxCoeff();
}

Scalar neg_log_likelihood(const ProblemInstance& inst, const Coefficients& c)
{
    const Scalar mass = c.mu.sum();
    if (!std::isfinite(mass)) return kInf;
    return -inst.suff_stats().dot(c.beta) + mass;
}

Scalar neg_log_likelihood(const ProblemInstance& inst, const Vector& beta)
{
    return neg_log_likelihood(inst, make_coefficients(inst, beta));
}

Vector gradient(const ProblemInstance& inst, const Coefficients& c)
{
    return inst.design().transpose_times(c.mu) - inst.suff_stats();
}

// --- reparametrization -----------------------------------------------------------

void require_intercept(const ProblemInstance& inst)
{
    if (!inst.design().has_intercept())
        throw ContractError("this operation needs an intercept design (column 0 all ones)");
    if (inst.cols() < 2) throw ContractError("this operation needs at least one slope column");
}

Vector slope_times(const DesignMatrix& x, const Vector& slope)
{
    Vector full(x.cols());
    full[0] = 0;
    full.tail(slope.size()) = slope;
    return x.times(full);
}

Vector slope_transpose_times(const DesignMatrix& x, const Vector& v)
{
    return x.transpose_times(v).tail(x.cols() - 1);
}

Scalar reparam_objective(const ProblemInstance& inst, const Vector& slope)
{
    require_intercept(inst);
    const Vector z = inst.log_offset() + slope_times(inst.design(), slope);
    return -inst.suff_stats().tail(slope.size()).dot(slope) + inst.total() * log_sum_exp(z);
}

Vector reparam_gradient(const ProblemInstance& inst, const Vector& slope)
{
    return make_slope_state(inst, slope).gradient(inst);
}

Scalar optimal_intercept(const ProblemInstance& inst, const Vector& slope)
{
    require_intercept(inst);
    const Vector z = inst.log_offset() + slope_times(inst.design(), slope);
    return std::log(inst.total()) - log_sum_exp(z);
}

Scalar reparam_offset(const ProblemInstance& inst)
{
    return inst.total() * (1.0 - std::log(inst.total()));
}

Scalar SlopeState::objective(const ProblemInstance& inst) const
{
    return -inst.suff_stats().tail(slope.size()).dot(slope) + inst.total() * log_mass;
}

Vector SlopeState::gradient(const ProblemInstance& inst) const
{
    return inst.total() * slope_transpose_times(inst.design(), weights) - inst.suff_stats().tail(slope.size());
}

Scalar SlopeState::intercept(const ProblemInstance& inst) const { return std::log(inst.total()) - log_mass; }

Vector SlopeState::fitted_mean(const ProblemInstance& inst) const { return inst.total() * weights; }

Vector SlopeState::full_beta(const ProblemInstance& inst) const
{
    Vector b(slope.size() + 1);
    b[0] = intercept(inst);
    b.tail(slope.size()) = slope;
    return b;
}

SlopeState make_slope_state(const ProblemInstance& inst, Vector slope)
{
    require_intercept(inst);
    if (slope.size() != inst.cols() - 1) throw ContractError("slope length must be p - 1");
    SlopeState st;
    const Vector z = inst.log_offset() + slope_times(inst.design(), slope);
    st.log_mass = log_sum_exp(z);
    st.weights = (z.array() - st.log_mass).exp().matrix();
    st.slope = std::move(slope);
    return st;
}

void scale_slope_state(SlopeState& state, const Vector& delta_eta)
{
    const Vector z = state.weights.array().log().matrix() + delta_eta;
    const Scalar shift = log_sum_exp(z);
    state.weights = (z.array() - shift).exp().matrix();
    state.log_mass += shift;
}

// --- goodness of fit -------------------------------------------------------------

Scalar g_squared(const Vector& n, const Vector& mu)
{
    Scalar g = 0;
    for (Index i = 0; i < n.size(); ++i) {
        if (n[i] == 0) continue;
        if (mu[i] <= 0) return kInf;
        g += n[i] * std::log(n[i] / mu[i]);
    }
    return 2 * g;
}

Scalar pearson_x2(const Vector& n, const Vector& mu)
{
    Scalar x2 = 0;
    for (Index i = 0; i < n.size(); ++i) {
        if (mu[i] <= 0) {
            if (n[i] > 0) return kInf;
            continue;
        }
        const Scalar r = n[i] - mu[i];
        x2 += r * r / mu[i];
    }
    return x2;
}

Scalar g_squared(const ProblemInstance& inst, const Coefficients& c) { return g_squared(inst.counts(), c.mu); }
Scalar pearson_x2(const ProblemInstance& inst, const Coefficients& c) { return pearson_x2(inst.counts(), c.mu); }

// --- curvature bounds -------------------------------------------------------------

namespace {

std::vector<Index> slope_columns(const ProblemInstance& inst)
{
    std::vector<Index> cols(static_cast<std::size_t>(inst.cols() - 1));
    for (std::size_t k = 0; k < cols.size(); ++k) cols[k] = static_cast<Index>(k) + 1;
    return cols;
}

} // namespace

Matrix bohning_bound(const ProblemInstance& inst)
{
    require_intercept(inst);
    const auto cols = slope_columns(inst);
    const Matrix gram = inst.design().block_gram(cols, Vector::Ones(inst.rows()));
    const Vector colsum = inst.design().block_transpose_times(cols, Vector::Ones(inst.rows()));
    Matrix w = inst.total() * gram;
    w.noalias() -= colsum * colsum.transpose();
    return 0.5 * w;
}

Scalar spectral_bound(const ProblemInstance& inst)
{
    require_intercept(inst);
    const auto cols = slope_columns(inst);
    const Index d = static_cast<Index>(cols.size());
    Scalar sigma2 = 0;
    if (d <= 1500) {
        const Matrix gram = inst.design().block_gram(cols, Vector::Ones(inst.rows()));
        Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
        sigma2 = es.eigenvalues().maxCoeff();
    } else {
        // Power iteration on Xs^T Xs; the estimate approaches sigma^2 from below,
        // so it is inflated before use as an upper bound.
        SplitMix64 rng(0x5eed);
        Vector v(d);
        for (Index k = 0; k < d; ++k) v[k] = rng.uniform() + 0.5;
        v.normalize();
        Scalar prev = 0;
        for (int it = 0; it < 2000; ++it) {
            Vector full = Vector::Zero(d + 1);
            full.tail(d) = v;
            const Vector u = inst.design().transpose_times(inst.design().times(full)).tail(d);
            sigma2 = v.dot(u);
            v = u.normalized();
            if (std::abs(sigma2 - prev) <= 1e-12 * sigma2) break;
            prev = sigma2;
        }
        sigma2 *= 1.05;
    }
    return 0.5 * inst.total() * sigma2;
}

Matrix reparam_hessian(const ProblemInstance& inst, const Vector& weights)
{
    require_intercept(inst);
    const auto cols = slope_columns(inst);
    const Matrix gram = inst.design().block_gram(cols, weights);
    const Vector m = inst.design().block_transpose_times(cols, weights);
    Matrix h = gram;
    h.noalias() -= m * m.transpose();
    return inst.total() * h;
}

Scalar sampled_bound_gap(const ProblemInstance& inst, const Matrix& w, int n_weights, int n_directions,
                         std::uint64_t seed)
{
    require_intercept(inst);
    const Index d = inst.cols() - 1;
    const Index n = inst.rows();
    SplitMix64 rng(seed, 21);

    std::vector<Vector> dirs;
    for (int k = 0; k < n_directions; ++k) {
        Vector v(d);
        for (Index j = 0; j < d; ++j) v[j] = 2 * rng.uniform() - 1;
        dirs.push_back(v.normalized());
    }
    if (d <= 2000) {
        // The direction whose image is closest to the constant vector probes the
        // -1 1^T term of the Bohning matrix.
        const auto cols = slope_columns(inst);
        Matrix gram = inst.design().block_gram(cols, Vector::Ones(n));
        gram.diagonal().array() += 1e-12 * std::max<Scalar>(gram.trace(), 1);
        const Vector rhs = inst.design().block_transpose_times(cols, Vector::Ones(n));
        Vector v = gram.ldlt().solve(rhs);
        if (v.allFinite() && v.norm() > 0) dirs.push_back(v.normalized());
    }

    std::vector<Vector> images;
    std::vector<Scalar> quad_w;
    for (const auto& v : dirs) {
        images.push_back(slope_times(inst.design(), v));
        quad_w.push_back(v.dot(w * v));
    }

    Scalar worst = std::numeric_limits<Scalar>::infinity();
    auto probe = [&](const Vector& wt) {
        for (std::size_t k = 0; k < dirs.size(); ++k) {
            const Vector& u = images[k];
            const Scalar mean = wt.dot(u);
            const Scalar var = wt.dot(u.cwiseProduct(u)) - mean * mean;
            worst = std::min(worst, quad_w[k] - inst.total() * var);
        }
    };
    probe(Vector::Constant(n, 1.0 / static_cast<Scalar>(n)));
    for (int s = 0; s < n_weights; ++s) {
        Vector wt = Vector::Zero(n);
        if (s % 2 == 0) {
            // two-point mixtures maximize the variance term
            const auto a = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
            const auto b = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
            const Scalar t = rng.uniform();
            wt[a] += t;
            wt[b] += 1 - t;
        } else {
            for (Index i = 0; i < n; ++i) wt[i] = -std::log(1 - rng.uniform());
            wt /= wt.sum();
        }
        probe(wt);
    }
    return worst;
}

CurvatureBound make_curvature_bound(const ProblemInstance& inst, CurvatureChoice choice, Scalar ridge,
                                    std::uint64_t seed)
{
    require_intercept(inst);
    const Index d = inst.cols() - 1;
    CurvatureBound cb;
    cb.used = choice;
    if (choice == CurvatureChoice::Bohning) {
        cb.w = bohning_bound(inst);
        if (inst.total() < static_cast<Scalar>(inst.rows())) {
            const Scalar scale = std::max<Scalar>(cb.w.diagonal().cwiseAbs().maxCoeff(), 1);
            if (sampled_bound_gap(inst, cb.w, 200, 20, seed) < -1e-9 * scale) {
                cb.fell_back = true;
                cb.used = CurvatureChoice::Spectral;
            }
        }
    }
    if (cb.used == CurvatureChoice::Spectral) cb.w = spectral_bound(inst) * Matrix::Identity(d, d);
    if (ridge > 0) cb.w.diagonal().array() += ridge;

    cb.llt.compute(cb.w);
    Scalar bump = 1e-10 * std::max<Scalar>(cb.w.trace(), 1e-300) / static_cast<Scalar>(d);
    for (int attempt = 0; attempt < 12 && (cb.llt.info() != Eigen::Success || cb.llt.rcond() < 1e-14); ++attempt) {
        cb.w.diagonal().array() += bump;
        cb.ridge_repaired = true;
        cb.llt.compute(cb.w);
        bump *= 10;
    }
    if (cb.llt.info() != Eigen::Success) throw ContractError("curvature bound could not be factorized");
    return cb;
}

} // namespace ipscale
