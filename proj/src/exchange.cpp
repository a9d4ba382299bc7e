#include "multistop/exchange.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "multistop/errors.hpp"
#include "multistop/parallel.hpp"

namespace multistop::exchange {

double normal_cdf(double z) {
    if (std::isnan(z)) return z;
    if (z < 0.0) return 1.0 - normal_cdf(-z);
    return 1.0 - 0.5 * std::erfc(z / std::numbers::sqrt2);
}

namespace {

void require_unit_inputs(double s, double z, double sigma, double maturity) {
    if (!(z > 0.0) || !std::isfinite(z)) throw InputError(fmt::format("moneyness must be positive, got {}", z));
    if (!(sigma > 0.0)) throw InputError(fmt::format("volatility must be positive, got {}", sigma));
    if (!(s >= 0.0 && s <= maturity)) {
        throw InputError(fmt::format("time {} lies outside [0, {}]", s, maturity));
    }
}

struct DPair {
    double plus;
    double minus;
};

DPair d_terms(double z, double sigma, double tau) {
    const double sd = sigma * std::sqrt(tau);
    const double half = 0.5 * sigma * sigma * tau;
    return {(std::log(z) + half) / sd, (std::log(z) - half) / sd};
}

}  // namespace

double unit_call(double s, double z, double sigma, double maturity) {
    require_unit_inputs(s, z, sigma, maturity);
    const double tau = maturity - s;
    if (tau <= 0.0) return std::max(z - 1.0, 0.0);
    const auto d = d_terms(z, sigma, tau);
    return z * normal_cdf(d.plus) - normal_cdf(d.minus);
}

double unit_put(double s, double z, double sigma, double maturity) {
    require_unit_inputs(s, z, sigma, maturity);
    const double tau = maturity - s;
    if (tau <= 0.0) return std::max(1.0 - z, 0.0);
    const auto d = d_terms(z, sigma, tau);
    return normal_cdf(-d.minus) - z * normal_cdf(-d.plus);
}

double margrabe(double x1, double x2, double sigma1, double sigma2, double tau) {
    if (!(x1 > 0.0 && x2 > 0.0)) throw InputError("Margrabe prices must be positive");
    if (tau <= 0.0) return std::max(x1 - x2, 0.0);
    const double sigma = std::hypot(sigma1, sigma2);
    const auto d = d_terms(x1 / x2, sigma, tau);
    return x1 * normal_cdf(d.plus) - x2 * normal_cdf(d.minus);
}

void MarketParams::validate() const {
    if (!(x1 > 0.0 && x2 > 0.0) || !std::isfinite(x1) || !std::isfinite(x2)) {
        throw InputError(fmt::format("initial prices must be positive, got x1 = {}, x2 = {}", x1, x2));
    }
    if (!(sigma1 > 0.0 && sigma2 > 0.0) || !std::isfinite(sigma1) || !std::isfinite(sigma2)) {
        throw InputError(fmt::format("volatilities must be positive, got {} and {}", sigma1, sigma2));
    }
    if (!(maturity > 0.0) || !std::isfinite(maturity)) {
        throw InputError(fmt::format("maturity must be positive, got {}", maturity));
    }
    if (rate != 0.0) throw InputError("only a zero interest rate is supported");
}

FrozenLegValues frozen_leg_values(double s, double x1, double x2, const MarketParams& params) {
    if (!(x1 > 0.0 && x2 > 0.0)) throw InputError(fmt::format("prices must be positive, got {} and {}", x1, x2));
    return {x2 * unit_call(s, x1 / x2, params.sigma1, params.maturity),
            x1 * unit_put(s, x2 / x1, params.sigma2, params.maturity)};
}

double new_reward_phi(double s, double x1, double x2, const MarketParams& params) {
    return frozen_leg_values(s, x1, x2, params).reward();
}

// ---------------------------------------------------------------------------
// Lattice

ProductLattice ProductLattice::build(const MarketParams& params, int steps) {
    params.validate();
    if (steps < 1) throw InputError(fmt::format("lattice needs at least one step, got {}", steps));
    ProductLattice l;
    l.steps = steps;
    l.dt = params.maturity / steps;
    l.x1_0 = params.x1;
    l.x2_0 = params.x2;
    l.log_step1 = params.sigma1 * std::sqrt(l.dt);
    l.log_step2 = params.sigma2 * std::sqrt(l.dt);
    l.up1 = std::exp(l.log_step1);
    l.down1 = 1.0 / l.up1;
    l.q1 = (1.0 - l.down1) / (l.up1 - l.down1);
    l.up2 = std::exp(l.log_step2);
    l.down2 = 1.0 / l.up2;
    l.q2 = (1.0 - l.down2) / (l.up2 - l.down2);
    if (!(l.q1 > 0.0 && l.q1 < 1.0 && l.q2 > 0.0 && l.q2 < 1.0)) {
        throw InvariantError(fmt::format("lattice probabilities {} and {} fall outside (0, 1)", l.q1, l.q2));
    }
    return l;
}

double ProductLattice::x1(int k, int j) const { return x1_0 * std::exp(log_step1 * (2 * j - k)); }
double ProductLattice::x2(int k, int j) const { return x2_0 * std::exp(log_step2 * (2 * j - k)); }

PriceSurface::PriceSurface(MarketParams params, ProductLattice lattice, LatticeScheme scheme)
    : params_(params), lattice_(lattice), scheme_(scheme), offset_(static_cast<std::size_t>(lattice.steps) + 2, 0) {
    for (int k = 0; k <= lattice_.steps; ++k) {
        const auto width = static_cast<std::size_t>(k + 1);
        offset_[static_cast<std::size_t>(k) + 1] = offset_[static_cast<std::size_t>(k)] + width * width;
    }
    states_.resize(offset_.back());
}

std::size_t PriceSurface::index(int k, int j1, int j2) const {
    if (k < 0 || k > lattice_.steps || j1 < 0 || j1 > k || j2 < 0 || j2 > k) {
        throw InputError(fmt::format("lattice state ({}, {}, {}) is out of range", k, j1, j2));
    }
    return offset_[static_cast<std::size_t>(k)] + static_cast<std::size_t>(j1) * static_cast<std::size_t>(k + 1) +
           static_cast<std::size_t>(j2);
}

namespace {

/**
 * Backward induction over slices. `next` holds v at step k+1 as a
 * (k+2) x (k+2) row-major grid over (j1, j2); `record` receives every state.
 */
template <typename Record>
double induct(const MarketParams& params, const ProductLattice& lat, LatticeScheme scheme, unsigned threads,
              StopTolerance tol, Record&& record) {
    const int n = lat.steps;
    std::vector<double> next, cur;
    {
        const auto w = static_cast<std::size_t>(n + 1);
        next.resize(w * w);
        for (int j1 = 0; j1 <= n; ++j1) {
            for (int j2 = 0; j2 <= n; ++j2) {
                const double payoff = std::max(lat.x1(n, j1) - lat.x2(n, j2), 0.0);
                next[static_cast<std::size_t>(j1) * w + static_cast<std::size_t>(j2)] = payoff;
                record(n, j1, j2, SurfaceState{payoff, payoff, payoff, true, true});
            }
        }
    }
    const double p_uu = lat.q1 * lat.q2;
    const double p_ud = lat.q1 * (1.0 - lat.q2);
    const double p_du = (1.0 - lat.q1) * lat.q2;
    const double p_dd = (1.0 - lat.q1) * (1.0 - lat.q2);
    for (int k = n - 1; k >= 0; --k) {
        const auto w = static_cast<std::size_t>(k + 1);
        const std::size_t wn = w + 1;
        const double t = lat.time(k);
        const bool smoothed_step = scheme == LatticeScheme::Smoothed && k == n - 1;
        cur.assign(w * w, 0.0);
        parallel_for(w, threads, [&](std::size_t begin, std::size_t end) {
            for (std::size_t j1 = begin; j1 < end; ++j1) {
                for (std::size_t j2 = 0; j2 < w; ++j2) {
                    const double x1 = lat.x1(k, static_cast<int>(j1));
                    const double x2 = lat.x2(k, static_cast<int>(j2));
                    const FrozenLegValues legs = frozen_leg_values(t, x1, x2, params);
                    double cont;
                    if (smoothed_step) {
                        cont = margrabe(x1, x2, params.sigma1, params.sigma2, lat.dt);
                    } else {
                        cont = p_uu * next[(j1 + 1) * wn + (j2 + 1)] + p_ud * next[(j1 + 1) * wn + j2] +
                               p_du * next[j1 * wn + (j2 + 1)] + p_dd * next[j1 * wn + j2];
                    }
                    const double phi = legs.reward();
                    const double value = std::max(phi, cont);
                    cur[j1 * w + j2] = value;
                    record(k, static_cast<int>(j1), static_cast<int>(j2),
                           SurfaceState{cont, phi, value, tol.touches(value, phi), legs.in_b()});
                }
            }
        });
        std::swap(cur, next);
    }
    return next[0];
}

}  // namespace

PriceSurface price_exchange_double(const MarketParams& params, int steps, LatticeScheme scheme, unsigned threads,
                                   StopTolerance tol) {
    const ProductLattice lat = ProductLattice::build(params, steps);
    PriceSurface surface(params, lat, scheme);
    induct(params, lat, scheme, threads, tol,
           [&](int k, int j1, int j2, const SurfaceState& s) { surface.at(k, j1, j2) = s; });
    return surface;
}

double price_exchange_value(const MarketParams& params, int steps, LatticeScheme scheme, unsigned threads) {
    const ProductLattice lat = ProductLattice::build(params, steps);
    return induct(params, lat, scheme, threads, StopTolerance{}, [](int, int, int, const SurfaceState&) {});
}

double american_call_lattice(double x, double strike, double sigma, double maturity, int steps) {
    if (!(x > 0.0 && strike > 0.0 && sigma > 0.0 && maturity > 0.0) || steps < 1) {
        throw InputError("american_call_lattice needs positive inputs and at least one step");
    }
    const double dt = maturity / steps;
    const double log_step = sigma * std::sqrt(dt);
    const double up = std::exp(log_step);
    const double down = 1.0 / up;
    const double q = (1.0 - down) / (up - down);
    auto price = [&](int k, int j) { return x * std::exp(log_step * (2 * j - k)); };
    std::vector<double> v(static_cast<std::size_t>(steps) + 1);
    for (int j = 0; j <= steps; ++j) v[static_cast<std::size_t>(j)] = std::max(price(steps, j) - strike, 0.0);
    for (int k = steps - 1; k >= 0; --k) {
        for (int j = 0; j <= k; ++j) {
            const auto u = static_cast<std::size_t>(j);
            const double cont = q * v[u + 1] + (1.0 - q) * v[u];
            v[u] = std::max(price(k, j) - strike, cont);
        }
    }
    return v[0];
}

// ---------------------------------------------------------------------------
// Policy and Monte Carlo

ExercisePolicy::ExercisePolicy(MarketParams params, ProductLattice lattice,
                               std::vector<std::vector<std::uint8_t>> region)
    : params_(params), lattice_(lattice), region_(std::move(region)) {}

ExercisePolicy ExercisePolicy::optimal(const PriceSurface& surface) {
    const int n = surface.steps();
    std::vector<std::vector<std::uint8_t>> region(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        auto& slice = region[static_cast<std::size_t>(k)];
        slice.resize(static_cast<std::size_t>((k + 1) * (k + 1)));
        for (int j1 = 0; j1 <= k; ++j1) {
            for (int j2 = 0; j2 <= k; ++j2) {
                slice[static_cast<std::size_t>(j1 * (k + 1) + j2)] = surface.at(k, j1, j2).exercise ? 1 : 0;
            }
        }
    }
    return ExercisePolicy(surface.params(), surface.lattice(), std::move(region));
}

ExercisePolicy ExercisePolicy::at_maturity(const MarketParams& params, int steps) {
    return ExercisePolicy(params, ProductLattice::build(params, steps), {});
}

std::pair<int, int> ExercisePolicy::nearest_node(int k, double x1, double x2) const {
    auto nearest = [k](double x, double x0, double log_step) {
        const double j = std::round((std::log(x / x0) / log_step + k) / 2.0);
        return static_cast<int>(std::clamp(j, 0.0, static_cast<double>(k)));
    };
    return {nearest(x1, lattice_.x1_0, lattice_.log_step1), nearest(x2, lattice_.x2_0, lattice_.log_step2)};
}

bool ExercisePolicy::exercise(int k, double x1, double x2) const {
    if (k >= lattice_.steps) return true;
    if (region_.empty()) return false;
    const auto [j1, j2] = nearest_node(k, x1, x2);
    return region_[static_cast<std::size_t>(k)][static_cast<std::size_t>(j1 * (k + 1) + j2)] != 0;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

double simulate_path(const ExercisePolicy& policy, std::uint64_t seed, std::size_t path) {
    const MarketParams& p = policy.params();
    const ProductLattice& lat = policy.lattice();
    std::mt19937_64 rng(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(path))));
    std::normal_distribution<double> normal;
    const double drift1 = -0.5 * p.sigma1 * p.sigma1 * lat.dt;
    const double drift2 = -0.5 * p.sigma2 * p.sigma2 * lat.dt;

    double x1 = p.x1;
    double x2 = p.x2;
    bool stopped = false;
    bool in_b = true;
    double frozen = 0.0;  // price of the leg exercised at theta*
    for (int k = 0;; ++k) {
        if (!stopped && policy.exercise(k, x1, x2)) {
            if (k == lat.steps) return std::max(x1 - x2, 0.0);
            stopped = true;
            in_b = frozen_leg_values(lat.time(k), x1, x2, p).in_b();
            frozen = in_b ? x1 : x2;
        }
        if (k == lat.steps) break;
        x1 *= std::exp(drift1 + lat.log_step1 * normal(rng));
        x2 *= std::exp(drift2 + lat.log_step2 * normal(rng));
    }
    return in_b ? std::max(frozen - x2, 0.0) : std::max(x1 - frozen, 0.0);
}

}  // namespace

McEstimate mc_policy_value(const ExercisePolicy& policy, std::size_t n_paths, std::uint64_t seed, unsigned threads) {
    if (n_paths == 0) throw InputError("Monte Carlo needs at least one path");
    std::vector<double> payoff(n_paths);
    parallel_for(n_paths, threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) payoff[i] = simulate_path(policy, seed, i);
    });
    double sum = 0.0;
    for (double x : payoff) sum += x;
    const double mean = sum / static_cast<double>(n_paths);
    double sq = 0.0;
    for (double x : payoff) sq += (x - mean) * (x - mean);
    const double se = n_paths > 1 ? std::sqrt(sq / static_cast<double>(n_paths - 1) / static_cast<double>(n_paths)) : 0.0;
    return McEstimate{mean, se, n_paths};
}

// ---------------------------------------------------------------------------
// Output

void write_surface_csv(std::ostream& os, const PriceSurface& surface, int stride) {
    if (stride < 1) throw InputError(fmt::format("surface stride must be positive, got {}", stride));
    const ProductLattice& lat = surface.lattice();
    os << "k,t,j1,j2,x1,x2,phi,v,exercise,B\n";
    for (int k = 0; k <= lat.steps; ++k) {
        if (k % stride != 0 && k != lat.steps) continue;
        for (int j1 = 0; j1 <= k; ++j1) {
            for (int j2 = 0; j2 <= k; ++j2) {
                const SurfaceState& s = surface.at(k, j1, j2);
                fmt::print(os, "{},{:.17g},{},{},{:.17g},{:.17g},{:.17g},{:.17g},{},{}\n", k, lat.time(k), j1, j2,
                           lat.x1(k, j1), lat.x2(k, j2), s.phi, s.value, s.exercise ? 1 : 0, s.in_b ? 1 : 0);
            }
        }
    }
}

void write_boundary_csv(std::ostream& os, const PriceSurface& surface) {
    const ProductLattice& lat = surface.lattice();
    os << "k,t,axis,fixed_j,frontier_j\n";
    for (int k = 0; k <= lat.steps; ++k) {
        for (int j2 = 0; j2 <= k; ++j2) {
            int frontier = -1;
            for (int j1 = 0; j1 <= k && frontier < 0; ++j1) {
                if (surface.at(k, j1, j2).exercise) frontier = j1;
            }
            fmt::print(os, "{},{:.17g},j1,{},{}\n", k, lat.time(k), j2, frontier);
        }
        for (int j1 = 0; j1 <= k; ++j1) {
            int frontier = -1;
            for (int j2 = 0; j2 <= k && frontier < 0; ++j2) {
                if (surface.at(k, j1, j2).exercise) frontier = j2;
            }
            fmt::print(os, "{},{:.17g},j2,{},{}\n", k, lat.time(k), j1, frontier);
        }
    }
}

}  // namespace multistop::exchange
