#pragma once

namespace fpcb {

/// Tolerances shared by every module. Defaults are the values the library is
/// tested with; the CLI can override any of them from the `numeric` config
/// table.
struct NumericPolicy {
    // numkit
    double symmetry_tol = 1e-10;       // max |m_ij - m_ji| accepted as symmetric
    double psd_clip = 1e-10;           // eigenvalues in [-psd_clip, 0) clipped to 0
    double psd_reject = 1e-6;          // eigenvalues below -psd_reject -> not-PSD
    double jacobi_tol = 1e-15;         // off-diagonal norm relative to Frobenius norm
    int jacobi_max_sweeps = 100;
    double condition_limit = 1e12;     // solve_linear singular-system threshold

    // rkhs
    double rank_rel_tol = 1e-10;       // eigenpair retained iff l_i >= rank_rel_tol * l_1
    double kernel_underflow = 1e-300;  // kernel values below this are set to 0

    // arh
    double pinv_rel_tol = 1e-8;        // covariance pseudo-inverse cut

    // simulator
    double innovation_psd_tol = 1e-8;  // Gamma_eps min eigenvalue floor

    // bands
    double hull_slack = 1e-9;          // membership slack in function-value units
    double collinear_tol = 1e-12;      // hull degeneracy test
};

inline const NumericPolicy& default_policy() {
    static const NumericPolicy policy{};
    return policy;
}

}  // namespace fpcb
