#ifndef MULTISTOP_EXCHANGE_HPP
#define MULTISTOP_EXCHANGE_HPP

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "multistop/snell.hpp"

namespace multistop::exchange {

/// Standard normal distribution function. N(-z) == 1 - N(z) bitwise for z > 0.
[[nodiscard]] double normal_cdf(double z);

/**
 * Zero-rate, unit-strike call E[(X_T - 1)+] for a driftless GBM started at
 * z at time s: z N(d+) - N(d-), d+- = (ln z +- sigma^2 (T-s)/2) / (sigma sqrt(T-s)).
 * Returns (z - 1)+ at s = T.
 */
[[nodiscard]] double unit_call(double s, double z, double sigma, double maturity);

/// Zero-rate, unit-strike put E[(1 - X_T)+]: N(-d-) - z N(-d+); (1 - z)+ at s = T.
[[nodiscard]] double unit_put(double s, double z, double sigma, double maturity);

/// Value of receiving (X1_T - X2_T)+ at T for independent driftless GBMs, time-to-maturity tau.
[[nodiscard]] double margrabe(double x1, double x2, double sigma1, double sigma2, double tau);

struct MarketParams {
    double x1 = 1.0;  ///< initial price of asset 1
    double x2 = 1.0;  ///< initial price of asset 2
    double sigma1 = 0.2;
    double sigma2 = 0.2;
    double maturity = 1.0;  ///< years
    double rate = 0.0;      ///< must be 0

    /// Throws InputError on nonpositive prices / volatilities / maturity or a nonzero rate.
    void validate() const;
};

/**
 * Conditional one-stopping values at (s, x1, x2).
 *
 * Freezing asset 2 at x2 and stopping asset 1 optimally is worth
 * x2 C1(s, x1/x2); freezing asset 1 is worth x1 P2(s, x2/x1). With r = 0
 * both are European, so the closed forms apply.
 */
struct FrozenLegValues {
    double first;   ///< u1: asset 1 free, asset 2 frozen
    double second;  ///< u2: asset 2 free, asset 1 frozen
    [[nodiscard]] double reward() const { return first > second ? first : second; }
    /// B = {u1 <= u2}: exercise asset 1 now, hold asset 2.
    [[nodiscard]] bool in_b() const { return first <= second; }
};

[[nodiscard]] FrozenLegValues frozen_leg_values(double s, double x1, double x2, const MarketParams& params);

/// New reward max(x2 C1(s, x1/x2), x1 P2(s, x2/x1)).
[[nodiscard]] double new_reward_phi(double s, double x1, double x2, const MarketParams& params);

/// Cox-Ross-Rubinstein factors per asset on a recombining product grid.
struct ProductLattice {
    int steps = 0;
    double dt = 0.0;
    double up1 = 0.0, down1 = 0.0, q1 = 0.0;
    double up2 = 0.0, down2 = 0.0, q2 = 0.0;
    double x1_0 = 0.0, x2_0 = 0.0;
    double log_step1 = 0.0, log_step2 = 0.0;  ///< sigma_i sqrt(dt)

    static ProductLattice build(const MarketParams& params, int steps);

    [[nodiscard]] double time(int k) const { return k * dt; }
    /// Price of asset 1 after j up-moves in k steps.
    [[nodiscard]] double x1(int k, int j) const;
    [[nodiscard]] double x2(int k, int j) const;
};

enum class LatticeScheme {
    /// Continuation on the last interval is the exact expectation of (X1_T - X2_T)+.
    Smoothed,
    /// Product-branching expectation at every step.
    Plain,
};

struct SurfaceState {
    double continuation = 0.0;  ///< at k = n: the terminal payoff
    double phi = 0.0;
    double value = 0.0;
    bool exercise = false;
    bool in_b = false;
};

/// Per-step, per-state record of the reduced American problem.
class PriceSurface {
public:
    PriceSurface(MarketParams params, ProductLattice lattice, LatticeScheme scheme);

    [[nodiscard]] const MarketParams& params() const noexcept { return params_; }
    [[nodiscard]] const ProductLattice& lattice() const noexcept { return lattice_; }
    [[nodiscard]] LatticeScheme scheme() const noexcept { return scheme_; }
    [[nodiscard]] int steps() const noexcept { return lattice_.steps; }

    [[nodiscard]] const SurfaceState& at(int k, int j1, int j2) const { return states_[index(k, j1, j2)]; }
    SurfaceState& at(int k, int j1, int j2) { return states_[index(k, j1, j2)]; }
    [[nodiscard]] double value0() const { return at(0, 0, 0).value; }

private:
    [[nodiscard]] std::size_t index(int k, int j1, int j2) const;

    MarketParams params_;
    ProductLattice lattice_;
    LatticeScheme scheme_;
    std::vector<std::size_t> offset_;
    std::vector<SurfaceState> states_;
};

/**
 * Backward induction v = max(phi, E[v next]) on the product lattice,
 * storing the full surface with exercise and B flags.
 */
[[nodiscard]] PriceSurface price_exchange_double(const MarketParams& params, int steps,
                                                 LatticeScheme scheme = LatticeScheme::Smoothed,
                                                 unsigned threads = 1, StopTolerance tol = {});

/// Same induction keeping only two time slices; returns v at the root.
[[nodiscard]] double price_exchange_value(const MarketParams& params, int steps,
                                          LatticeScheme scheme = LatticeScheme::Smoothed, unsigned threads = 1);

/// CRR American call on (X - strike)+ with r = 0.
[[nodiscard]] double american_call_lattice(double x, double strike, double sigma, double maturity, int steps);

/**
 * Pair exercise policy read off a surface.
 *
 * theta* is the first lattice time the state lies in the exercise region;
 * there, B (u1 <= u2) exercises asset 1 and holds asset 2 to T, otherwise
 * asset 2 is exercised and asset 1 held to T. Off-lattice states use the
 * nearest node in log-price.
 */
class ExercisePolicy {
public:
    /// Exercise region and B flags from the surface.
    static ExercisePolicy optimal(const PriceSurface& surface);
    /// Hold both legs to maturity.
    static ExercisePolicy at_maturity(const MarketParams& params, int steps);

    [[nodiscard]] int steps() const noexcept { return lattice_.steps; }
    [[nodiscard]] const MarketParams& params() const noexcept { return params_; }
    [[nodiscard]] const ProductLattice& lattice() const noexcept { return lattice_; }

    /// Whether theta* has arrived at step k with prices (x1, x2). Always true at k = n.
    [[nodiscard]] bool exercise(int k, double x1, double x2) const;

    /// Node indices (j1, j2) nearest to (x1, x2) at step k.
    [[nodiscard]] std::pair<int, int> nearest_node(int k, double x1, double x2) const;

private:
    ExercisePolicy(MarketParams params, ProductLattice lattice, std::vector<std::vector<std::uint8_t>> region);

    MarketParams params_;
    ProductLattice lattice_;
    std::vector<std::vector<std::uint8_t>> region_;  ///< region_[k][j1 * (k+1) + j2]; empty = never early
};

struct McEstimate {
    double estimate = 0.0;
    double standard_error = 0.0;
    std::size_t paths = 0;
};

/**
 * Simulate exact GBM increments on the policy's time grid and average
 * (X1_tau1 - X2_tau2)+. Path i draws from a generator seeded by
 * (seed, i), so the result does not depend on `threads`.
 */
[[nodiscard]] McEstimate mc_policy_value(const ExercisePolicy& policy, std::size_t n_paths, std::uint64_t seed,
                                         unsigned threads = 1);

/// CSV columns k,t,j1,j2,x1,x2,phi,v,exercise,B; time slices k with k % stride == 0, plus k = n.
void write_surface_csv(std::ostream& os, const PriceSurface& surface, int stride = 1);

/**
 * Exercise frontier, CSV columns k,t,axis,fixed_j,frontier_j.
 *
 * axis "j1" rows: for each k and j2 = fixed_j, the minimal j1 in the
 * exercise region. axis "j2" rows: the mirror for fixed j1. -1 when the
 * slice has no exercise state.
 */
void write_boundary_csv(std::ostream& os, const PriceSurface& surface);

}  // namespace multistop::exchange

#endif  // MULTISTOP_EXCHANGE_HPP
