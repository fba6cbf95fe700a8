#pragma once

#include "ipscale/solvers.hpp"

#include <chrono>

namespace ipscale::detail {

/// Records the convergence trace of one fit and applies the stopping rule.
class Tracker {
public:
    Tracker(const ProblemInstance& inst, const SolverConfig& cfg);

    /// Record at iteration 0. Returns true when the fit should stop right away.
    bool start(Scalar objective, Scalar grad_inf, const Vector& beta);
    /// Whether iteration t gets a record (cadence or iteration cap).
    bool due(Index t) const;
    /// Returns true when the stopping rule fires.
    bool record(Index t, Scalar objective, Scalar grad_inf, const Vector& beta);

    void add_work(double w) { work_ += w; }
    void warn(const char* tag);
    double elapsed() const;

    FitResult finish(Variant v, Vector beta, Vector mu, Index iterations);

private:
    const ProblemInstance& inst_;
    const SolverConfig& cfg_;
    std::chrono::steady_clock::time_point t0_;
    int every_ = 1;
    /// Gradient norms at or below this are round-off.
    Scalar floor_ = 0;
    double work_ = 0;
    ConvergenceTrace trace_;
    std::vector<std::string> warnings_;
};

/// cfg.beta_init or zeros, validated against p.
Vector initial_beta(const ProblemInstance& inst, const SolverConfig& cfg);

/// Clamps beta_j + delta into [-clamp, clamp]; non-finite targets go to the bound.
Scalar clamp_coordinate(Scalar target, Scalar clamp, bool& clamped);

inline Scalar inf_norm(const Vector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

void require_binary(const ProblemInstance& inst, const char* solver);
void require_non_negative(const ProblemInstance& inst, const char* solver);
void require_non_negative_slopes(const ProblemInstance& inst, const char* solver);

} // namespace ipscale::detail
