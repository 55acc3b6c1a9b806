#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "sindex/types.hpp"

namespace sindex {

struct PrecisionEstimate {
    Matrix omega;                 // symmetrized
    Matrix omega_raw;             // column solutions before symmetrization
    double h_used = 0.0;
    Vector constraint_violation;  // per column |H w_j - e_j|_inf
    double ridge = 0.0;           // diagonal ridge added to a singular input
};

struct ClimeOptions {
    double pivot_tol = 1e-11;
    double feas_tol = 1e-9;
    int refactor_every = 64;
    int max_pivots = 0; // 0: 40 p + 400
    /// The path stops (treated as infeasible) once a basis inverse entry exceeds this over the mean diagonal.
    double condition_limit = 1e7;
    bool ridge_singular = true;
};

/// Solves min |w|_1 s.t. |A w - e_j|_inf <= h for every h in `h_desc` (strictly decreasing),
/// following the parametric dual simplex path from h = 1 downward.
/// Entries are empty for radii below the feasibility threshold. A must be symmetric.
std::vector<std::optional<Vector>> clime_column_path(const Matrix& a, Index j, std::span<const double> h_desc,
                                                     const ClimeOptions& opts = {});

/// Column paths of one input advanced together as h decreases, so candidates can be scored
/// one radius at a time. Memory grows with the active-set sizes of all columns.
class PrecisionPath {
public:
    explicit PrecisionPath(const Matrix& hbar, const ClimeOptions& opts = {});
    ~PrecisionPath();
    PrecisionPath(PrecisionPath&&) noexcept;
    PrecisionPath& operator=(PrecisionPath&&) noexcept;

    /// Estimate at radius h; radii must not increase across calls. Empty once any column is infeasible.
    std::optional<PrecisionEstimate> at(double h);
    double ridge() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Single-radius column solve; throws an infeasibility error naming the column.
Vector estimate_precision_column(const Matrix& hbar, Index j, double h, const ClimeOptions& opts = {});

/// Entry (j1,j2) keeps whichever of raw(j1,j2), raw(j2,j1) has smaller magnitude; ties keep raw(j1,j2) for j1 < j2.
Matrix symmetrize_min_magnitude(const Matrix& raw);

/// Adds 1e-8 * trace/p to the diagonal when `hbar` is numerically singular. Returns the ridge (0 if none).
double ridge_if_singular(Matrix& hbar);

PrecisionEstimate estimate_precision(const Matrix& hbar, double h, const ClimeOptions& opts = {});

/// One estimate per radius of `h_grid` (ascending). Empty where some column is infeasible.
std::vector<std::optional<PrecisionEstimate>> estimate_precision_grid(const Matrix& hbar,
                                                                      std::span<const double> h_grid,
                                                                      const ClimeOptions& opts = {});

} // namespace sindex
