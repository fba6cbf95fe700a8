#include "ipscale/surrogates.hpp"

#include <cmath>

namespace ipscale::surrogate {

namespace {

void check(const ProblemInstance& inst, const Coefficients& minus, const Vector& beta)
{
    if (beta.size() != inst.cols() || minus.beta.size() != inst.cols())
        throw ContractError("surrogate: coefficient length does not match design columns");
}

} // namespace

Scalar g1(const ProblemInstance& inst, const Coefficients& minus, const Vector& beta)
{
    check(inst, minus, beta);
    const DesignMatrix& x = inst.design();
    const Scalar p = static_cast<Scalar>(x.cols());
    const Vector d = beta - minus.beta;
    Scalar v = -inst.suff_stats().dot(beta);
    for (Index i = 0; i < x.rows(); ++i) {
        Scalar row = 0;
        for (Index j = 0; j < x.cols(); ++j) row += std::exp(p * x.entry(i, j) * d[j]);
        v += minus.mu[i] * row / p;
    }
    return v;
}

Scalar g20(const ProblemInstance& inst, const Coefficients& minus, const Vector& beta)
{
    check(inst, minus, beta);
    const DesignMatrix& x = inst.design();
    const Vector d = beta - minus.beta;
    Scalar v = -inst.suff_stats().dot(beta);
    for (Index i = 0; i < x.rows(); ++i) {
        const Scalar ri = x.row_sums()[i];
        Scalar row = 0;
        for (Index j = 0; j < x.cols(); ++j) {
            const Scalar e = x.entry(i, j);
            if (e != 0) row += e / ri * std::exp(ri * d[j]);
        }
        v += minus.mu[i] * row;
    }
    return v;
}

Scalar g2(const ProblemInstance& inst, const Coefficients& minus, const Vector& beta)
{
    check(inst, minus, beta);
    const DesignMatrix& x = inst.design();
    const Scalar r = x.row_sum_max();
    const Vector d = beta - minus.beta;
    Scalar v = -inst.suff_stats().dot(beta);
    for (Index i = 0; i < x.rows(); ++i) {
        Scalar row = 1 - x.row_sums()[i] / r;
        for (Index j = 0; j < x.cols(); ++j) {
            const Scalar e = x.entry(i, j);
            if (e != 0) row += e / r * std::exp(r * d[j]);
        }
        v += minus.mu[i] * row;
    }
    return v;
}

Scalar g3_general(const ProblemInstance& inst, const Coefficients& minus, const Vector& beta)
{
    check(inst, minus, beta);
    const DesignMatrix& x = inst.design();
    const Scalar r = x.row_sum_max();
    const Vector d = beta - minus.beta;
    Scalar v = -inst.suff_stats().dot(beta);
    for (Index i = 0; i < x.rows(); ++i) {
        Scalar row = 1;
        for (Index j = 0; j < x.cols(); ++j) {
            const Scalar e = x.entry(i, j);
            if (e == 0) continue;
            const Scalar a = std::abs(e);
            row += a / r * (std::exp((e > 0 ? r : -r) * d[j]) - 1);
        }
        v += minus.mu[i] * row;
    }
    return v;
}

Scalar g4(const ProblemInstance& inst, const Coefficients& minus, const Vector& beta,
          const std::vector<std::vector<Index>>& blocks)
{
    check(inst, minus, beta);
    const DesignMatrix& x = inst.design();
    const Vector d = beta - minus.beta;
    Scalar v = -inst.suff_stats().dot(beta);
    for (const auto& block : blocks) {
        for (Index i = 0; i < x.rows(); ++i) {
            Scalar part = 0, lin = 0;
            for (Index j : block) {
                part += x.entry(i, j);
                lin += x.entry(i, j) * d[j];
            }
            if (part == 0) continue;
            const Scalar total = x.row_sums()[i];
            v += part / total * minus.mu[i] * std::exp(total / part * lin);
        }
    }
    return v;
}

Scalar quadratic(const ProblemInstance& inst, const Vector& slope_minus, const Vector& slope, const Matrix& w)
{
    const Vector d = slope - slope_minus;
    const SlopeState st = make_slope_state(inst, slope_minus);
    return st.objective(inst) + st.gradient(inst).dot(d) + 0.5 * d.dot(w * d);
}

} // namespace ipscale::surrogate
