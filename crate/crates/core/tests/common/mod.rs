//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{Complex, DMatrix};
use rand::Rng;
use sparse_hinf::linalg::Mat;
use sparse_hinf::system_model::StateSpace;

/// State matrix of the three-mass chain assembled directly from Newton's law
/// with spring constants `k` and damper coefficients `xi`. Element `j`
/// connects mass `j - 1` (the wall for `j = 0`) to mass `j`; unit masses.
pub fn chain_state_matrix(k: &[f64; 3], xi: &[f64; 3]) -> Mat {
    let mut stiff = Mat::zeros(3, 3);
    let mut damp = Mat::zeros(3, 3);
    for j in 0..3 {
        // force on mass j: -k_j (x_j - x_{j-1}); on mass j-1 the opposite
        stiff[(j, j)] -= k[j];
        damp[(j, j)] -= xi[j];
        if j > 0 {
            stiff[(j, j - 1)] += k[j];
            stiff[(j - 1, j)] += k[j];
            stiff[(j - 1, j - 1)] -= k[j];
            damp[(j, j - 1)] += xi[j];
            damp[(j - 1, j)] += xi[j];
            damp[(j - 1, j - 1)] -= xi[j];
        }
    }
    let mut a = Mat::zeros(6, 6);
    for i in 0..3 {
        a[(i, 3 + i)] = 1.0;
        for j in 0..3 {
            a[(3 + i, j)] = stiff[(i, j)];
            a[(3 + i, 3 + j)] = damp[(i, j)];
        }
    }
    a
}

/// `sigma_max(C (jw - A)^-1 B + D)` through a dense complex inverse.
pub fn sigma_at(ss: &StateSpace, w: f64) -> f64 {
    let n = ss.a.nrows();
    let to_c = |m: &Mat| m.map(|x| Complex::new(x, 0.0));
    let jw = DMatrix::<Complex<f64>>::from_diagonal_element(n, n, Complex::new(0.0, w));
    let inv = (jw - to_c(&ss.a)).try_inverse().expect("not a pole");
    let g = to_c(&ss.c) * inv * to_c(&ss.b) + to_c(&ss.d);
    g.singular_values().max()
}

/// Peak gain over `points` log-spaced frequencies in `[lo, hi]` and at zero.
pub fn grid_peak(ss: &StateSpace, lo: f64, hi: f64, points: usize) -> f64 {
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
        .map(|w| sigma_at(ss, w))
        .fold(sigma_at(ss, 0.0), f64::max)
}

/// Random stable system with `n` states, spectral abscissa in `[-1, -0.05]`.
pub fn random_stable(rng: &mut impl Rng, n: usize, m: usize, p: usize) -> StateSpace {
    let r = Mat::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let shift = r
        .clone()
        .complex_eigenvalues()
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let a = r - Mat::identity(n, n) * (shift + rng.random_range(0.05..1.0));
    let b = Mat::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0));
    let c = Mat::from_fn(p, n, |_, _| rng.random_range(-1.0..1.0));
    let d = if rng.random_bool(0.5) { Mat::from_fn(p, m, |_, _| rng.random_range(-0.5..0.5)) } else { Mat::zeros(p, m) };
    StateSpace::new(a, b, c, d).unwrap()
}
