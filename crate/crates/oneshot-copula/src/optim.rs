//! Two-parameter Nelder-Mead simplex minimizer.
//!
//! Derivative-free, which suits the fitted objectives: smooth but with
//! tedious derivatives. Standard reflection/expansion/contraction/shrink
//! coefficients (1, 2, 1/2, 1/2).

#[derive(Debug, Clone, Copy)]
pub(crate) struct NmOptions {
    /// Edge length of the initial axis-aligned simplex.
    pub init_step: f64,
    /// Objective spread across the simplex, relative to the objective
    /// magnitude, below which the values are considered converged.
    pub rel_obj_tol: f64,
    /// Maximum coordinate distance from the best vertex below which the
    /// simplex is considered collapsed. Both this and the objective spread
    /// must be met; spread alone can stall 1e-5 from the minimizer when
    /// one direction is nearly flat.
    pub simplex_tol: f64,
    pub max_iterations: usize,
}

impl Default for NmOptions {
    fn default() -> Self {
        NmOptions {
            init_step: 0.1,
            rel_obj_tol: 1e-10,
            simplex_tol: 1e-8,
            max_iterations: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct NmOutcome {
    pub x: [f64; 2],
    pub fx: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Non-finite objective values are treated as +infinity so the simplex
/// retreats from invalid regions instead of comparing against NaN.
fn sanitize(f: f64) -> f64 {
    if f.is_nan() {
        f64::INFINITY
    } else {
        f
    }
}

pub(crate) fn nelder_mead(
    mut f: impl FnMut(&[f64; 2]) -> f64,
    x0: [f64; 2],
    opts: &NmOptions,
) -> NmOutcome {
    let mut eval = |x: &[f64; 2]| sanitize(f(x));

    let mut vertices = [
        x0,
        [x0[0] + opts.init_step, x0[1]],
        [x0[0], x0[1] + opts.init_step],
    ];
    let mut values = [eval(&vertices[0]), eval(&vertices[1]), eval(&vertices[2])];

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        // Order so that vertex 0 is best and vertex 2 is worst.
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        vertices = [vertices[order[0]], vertices[order[1]], vertices[order[2]]];
        values = [values[order[0]], values[order[1]], values[order[2]]];

        let spread = values[2] - values[0];
        let scale = values[0].abs() + values[2].abs();
        let size = vertices[1..]
            .iter()
            .map(|v| ((v[0] - vertices[0][0]).abs()).max((v[1] - vertices[0][1]).abs()))
            .fold(0.0_f64, f64::max);
        if spread <= opts.rel_obj_tol * (scale + f64::MIN_POSITIVE) && size <= opts.simplex_tol {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid = [
            0.5 * (vertices[0][0] + vertices[1][0]),
            0.5 * (vertices[0][1] + vertices[1][1]),
        ];
        let reflect = [
            centroid[0] + (centroid[0] - vertices[2][0]),
            centroid[1] + (centroid[1] - vertices[2][1]),
        ];
        let f_reflect = eval(&reflect);

        if f_reflect < values[0] {
            let expand = [
                centroid[0] + 2.0 * (centroid[0] - vertices[2][0]),
                centroid[1] + 2.0 * (centroid[1] - vertices[2][1]),
            ];
            let f_expand = eval(&expand);
            if f_expand < f_reflect {
                vertices[2] = expand;
                values[2] = f_expand;
            } else {
                vertices[2] = reflect;
                values[2] = f_reflect;
            }
            continue;
        }
        if f_reflect < values[1] {
            vertices[2] = reflect;
            values[2] = f_reflect;
            continue;
        }

        let contract = if f_reflect < values[2] {
            // Outside contraction.
            [
                centroid[0] + 0.5 * (reflect[0] - centroid[0]),
                centroid[1] + 0.5 * (reflect[1] - centroid[1]),
            ]
        } else {
            // Inside contraction.
            [
                centroid[0] + 0.5 * (vertices[2][0] - centroid[0]),
                centroid[1] + 0.5 * (vertices[2][1] - centroid[1]),
            ]
        };
        let f_contract = eval(&contract);
        if f_contract < values[2].min(f_reflect) {
            vertices[2] = contract;
            values[2] = f_contract;
            continue;
        }

        // Shrink toward the best vertex.
        for i in 1..3 {
            vertices[i] = [
                vertices[0][0] + 0.5 * (vertices[i][0] - vertices[0][0]),
                vertices[0][1] + 0.5 * (vertices[i][1] - vertices[0][1]),
            ];
            values[i] = eval(&vertices[i]);
        }
    }

    let mut best = 0;
    for i in 1..3 {
        if values[i] < values[best] {
            best = i;
        }
    }
    NmOutcome {
        x: vertices[best],
        fx: values[best],
        iterations,
        converged,
    }
}
