#pragma once

namespace qgraph {

/// Relative tolerances shared by the numerical modules. Every field is a
/// relative quantity; `scaled()` multiplies all of them at once, which is
/// what the CLI's --tol-scale flag does.
struct Tolerances {
    double root_rel = 1e-12;          // bisection target for eigenvalues
    double nullity_rel = 1e-8;        // singular value cutoff for the nullspace
    double generic_ratio = 1e-6;      // min |f(v)|/|f|_inf at inner vertices
    double generic_gap_rel = 1e-8;    // min eigenvalue gap relative to lambda_M
    double x_rel = 1e-10;             // zero localisation, relative to edge length
    double tangential_rel = 1e-10;    // |F| at a non-crossing minimum
    double local_min_rel = 1e-8;      // |F| at a sampled minimum worth reporting
    double vertex_zero_rel = 1e-9;    // |F(v)| counted as a vertex zero
    double degenerate_edge_rel = 1e-12;
    double exp_coeff_rel = 1e-12;     // dropped terms in vertex exponential sums
    double heat_y_rel = 1e-9;         // event localisation in y

    [[nodiscard]] Tolerances scaled(double factor) const {
        Tolerances t = *this;
        for (double* p : {&t.root_rel, &t.nullity_rel, &t.generic_ratio,
                          &t.generic_gap_rel, &t.x_rel, &t.tangential_rel, &t.local_min_rel,
                          &t.vertex_zero_rel, &t.degenerate_edge_rel, &t.exp_coeff_rel,
                          &t.heat_y_rel}) {
            *p *= factor;
        }
        return t;
    }
};

}  // namespace qgraph
