//! Pointwise dense linear algebra: characteristic-polynomial coefficients, Krylov
//! matrices and cyclic vectors, expansion of commuting operators in powers of `L`,
//! and the `Aᵢ` recursion.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative determinant threshold used for every rank/cyclicity decision.
pub const RANK_EPS: f64 = 1e-10;

/// Number of pseudo-random probe vectors tried before the deterministic sweep.
pub const CYCLIC_RANDOM_TRIES: usize = 8;

const CYCLIC_SEED: u64 = 0x5eed_c1c1;

/// Coefficients `σ₁…σₙ` of `det(λ Id − L) = λⁿ − σ₁λⁿ⁻¹ − … − σₙ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaCoefficients(Vec<f64>);

impl SigmaCoefficients {
    pub fn new(sigma: Vec<f64>) -> Self {
        Self(sigma)
    }

    /// `σᵢ` with the 1-based index used throughout the theory.
    pub fn get(&self, i: usize) -> f64 {
        self.0[i - 1]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Evaluates `λⁿ − Σ σᵢ λⁿ⁻ⁱ`.
    pub fn eval(&self, lambda: f64) -> f64 {
        self.0.iter().fold(1.0, |acc, s| acc * lambda - s)
    }
}

/// Coefficients `g₁…gₙ` of `M = g₁Lⁿ⁻¹ + … + gₙ Id`.
#[derive(Debug, Clone, PartialEq)]
pub struct CommutantCoefficients(Vec<f64>);

impl CommutantCoefficients {
    pub fn new(g: Vec<f64>) -> Self {
        Self(g)
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i - 1]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Rebuilds `Σ gᵢ Lⁿ⁻ⁱ`.
    pub fn reconstruct(&self, l: &Matrix) -> Matrix {
        combine_powers(&self.0, &powers(l, self.0.len()))
    }
}

/// Largest absolute entry.
pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// `[Id, L, L², …, L^(count−1)]`.
pub fn powers(l: &Matrix, count: usize) -> Vec<Matrix> {
    let n = l.nrows();
    let mut out = Vec::with_capacity(count);
    let mut p = Matrix::identity(n, n);
    for _ in 0..count {
        let next = l * &p;
        out.push(p);
        p = next;
    }
    out
}

/// `Σ gᵢ Lⁿ⁻ⁱ` given the powers `[Id, L, …, Lⁿ⁻¹]`.
pub fn combine_powers(g: &[f64], powers: &[Matrix]) -> Matrix {
    let n = g.len();
    let dim = powers[0].nrows();
    let mut m = Matrix::zeros(dim, dim);
    for (i, gi) in g.iter().enumerate() {
        m += &powers[n - 1 - i] * *gi;
    }
    m
}

/// Faddeev–LeVerrier recursion. Returns `σ` and the auxiliary matrices, which are
/// exactly `A₀…Aₙ₋₁` of `A₀ = Id, Aᵢ = L Aᵢ₋₁ − σᵢ Id`.
fn faddeev_leverrier(a: &Matrix) -> (Vec<f64>, Vec<Matrix>) {
    let n = a.nrows();
    let mut sigma = Vec::with_capacity(n);
    let mut aux = Vec::with_capacity(n);
    let mut m = Matrix::identity(n, n);
    for k in 1..=n {
        let am = a * &m;
        let s = am.trace() / k as f64;
        sigma.push(s);
        aux.push(m);
        m = am - Matrix::identity(n, n) * s;
    }
    (sigma, aux)
}

pub fn char_poly_sigma(a: &Matrix) -> SigmaCoefficients {
    assert!(a.is_square(), "characteristic polynomial of a non-square matrix");
    SigmaCoefficients(faddeev_leverrier(a).0)
}

/// `σ` together with `∂σᵢ/∂uᵏ`, propagated through the Faddeev–LeVerrier recursion
/// from the partials `∂L/∂uᵏ`. Returns `(σ, dσ)` with `dσ[k][i] = ∂σᵢ₊₁/∂uᵏ`.
pub fn char_poly_sigma_partials(a: &Matrix, da: &[Matrix]) -> (SigmaCoefficients, Vec<Vec<f64>>) {
    let (sigma, _, dsigma, _) = sequence_with_partials(a, da);
    (SigmaCoefficients(sigma), dsigma)
}

/// `(σ, [A₀…Aₙ₋₁], dσ, dA)` where `dA[k][i] = ∂Aᵢ/∂uᵏ`.
#[allow(clippy::type_complexity)]
pub fn sequence_with_partials(
    a: &Matrix,
    da: &[Matrix],
) -> (Vec<f64>, Vec<Matrix>, Vec<Vec<f64>>, Vec<Vec<Matrix>>) {
    let n = a.nrows();
    let id = Matrix::identity(n, n);
    let (sigma, aux) = faddeev_leverrier(a);
    let mut dsigma = Vec::with_capacity(da.len());
    let mut daux = Vec::with_capacity(da.len());
    for dak in da {
        let mut ds = Vec::with_capacity(n);
        let mut dm_list = Vec::with_capacity(n);
        let mut dm = Matrix::zeros(n, n);
        for k in 1..=n {
            let m = &aux[k - 1];
            let d_am = dak * m + a * &dm;
            let s_dot = d_am.trace() / k as f64;
            ds.push(s_dot);
            dm_list.push(dm.clone());
            dm = d_am - &id * s_dot;
        }
        dsigma.push(ds);
        daux.push(dm_list);
    }
    (sigma, aux, dsigma, daux)
}

/// Columns `[v, Av, …, Aⁿ⁻¹v]`.
pub fn krylov(a: &Matrix, v: &Vector) -> Matrix {
    let n = a.nrows();
    let mut k = Matrix::zeros(n, n);
    let mut col = v.clone();
    for j in 0..n {
        k.set_column(j, &col);
        col = a * &col;
    }
    k
}

/// Scale-invariant nonsingularity test: `|det| > RANK_EPS · (max column norm)ⁿ`.
pub fn is_nonsingular(m: &Matrix) -> bool {
    let n = m.ncols();
    let colmax = (0..n).map(|j| m.column(j).norm()).fold(0.0, f64::max);
    if colmax == 0.0 {
        return false;
    }
    m.determinant().abs() > RANK_EPS * colmax.powi(n as i32)
}

pub fn is_cyclic(a: &Matrix, v: &Vector) -> bool {
    is_nonsingular(&krylov(a, v))
}

/// Outcome of the cyclic-vector search.
#[derive(Debug, Clone)]
pub struct GlRegularity {
    pub regular: bool,
    pub witness: Option<Vector>,
    pub diagnostic: String,
}

fn candidate_vectors(n: usize) -> Vec<Vector> {
    let mut rng = ChaCha8Rng::seed_from_u64(CYCLIC_SEED);
    let mut out = Vec::new();
    for _ in 0..CYCLIC_RANDOM_TRIES {
        let v = Vector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let norm = v.norm();
        out.push(v / norm);
    }
    for i in 0..n {
        out.push(Vector::from_fn(n, |r, _| if r == i { 1.0 } else { 0.0 }));
    }
    for i in 0..n {
        for j in i + 1..n {
            out.push(Vector::from_fn(n, |r, _| if r == i || r == j { 1.0 } else { 0.0 }));
        }
    }
    out.push(Vector::from_element(n, 1.0));
    out
}

/// Searches for a cyclic vector: pseudo-random unit vectors first, then the standard
/// basis, pairwise sums and the all-ones vector. A matrix that is not gl-regular has no
/// cyclic vector, so a positive answer is always correct.
pub fn is_gl_regular(a: &Matrix) -> GlRegularity {
    let n = a.nrows();
    for v in candidate_vectors(n) {
        if is_cyclic(a, &v) {
            return GlRegularity {
                regular: true,
                witness: Some(v),
                diagnostic: String::new(),
            };
        }
    }
    GlRegularity {
        regular: false,
        witness: None,
        diagnostic: format!(
            "no cyclic vector among {} candidates (some eigenvalue has geometric multiplicity > 1)",
            CYCLIC_RANDOM_TRIES + n + n * (n - 1) / 2 + 1
        ),
    }
}

pub fn find_cyclic_vector(a: &Matrix) -> Option<Vector> {
    is_gl_regular(a).witness
}

/// Tolerance scale `(1 + ‖L‖)(1 + ‖M‖)` for pointwise commutation checks.
pub fn pair_scale(l: &Matrix, m: &Matrix) -> f64 {
    (1.0 + max_abs(l)) * (1.0 + max_abs(m))
}

/// Expands `M` (commuting with gl-regular `L`) as `Σ gᵢ Lⁿ⁻ⁱ`.
pub fn commutant_coeffs(l: &Matrix, m: &Matrix) -> Result<CommutantCoefficients> {
    let v = find_cyclic_vector(l).ok_or(Error::NotGlRegular)?;
    commutant_coeffs_at(l, m, &v)
}

/// As [`commutant_coeffs`] with a known cyclic vector of `L`.
pub fn commutant_coeffs_at(l: &Matrix, m: &Matrix, cyclic: &Vector) -> Result<CommutantCoefficients> {
    let n = l.nrows();
    let scale = pair_scale(l, m);
    let tol = 1e-8 * scale;
    let comm = max_abs(&(l * m - m * l));
    if comm > tol {
        return Err(Error::DoesNotCommute {
            residual: comm,
            tolerance: tol,
        });
    }
    let pw = powers(l, n);
    let mut basis = Matrix::zeros(n, n);
    for i in 0..n {
        basis.set_column(i, &(&pw[n - 1 - i] * cyclic));
    }
    let rhs = m * cyclic;
    let g = basis.lu().solve(&rhs).ok_or(Error::NotGlRegular)?;
    let g: Vec<f64> = g.iter().copied().collect();
    let residual = max_abs(&(combine_powers(&g, &pw) - m));
    if residual > tol {
        return Err(Error::DoesNotCommute {
            residual,
            tolerance: tol,
        });
    }
    Ok(CommutantCoefficients(g))
}

/// `‖L·Aₙ₋₁ − σₙ Id‖∞`.
pub fn cayley_hamilton_residual(l: &Matrix, a_seq: &[Matrix], sigma: &SigmaCoefficients) -> f64 {
    let n = l.nrows();
    let closure = l * &a_seq[n - 1] - Matrix::identity(n, n) * sigma.get(n);
    max_abs(&closure)
}

/// Scale used for the Cayley–Hamilton closure check.
pub fn cayley_hamilton_scale(l: &Matrix) -> f64 {
    (1.0 + max_abs(l)).powi(l.nrows() as i32)
}

/// `A₀ = Id`, `Aᵢ = L Aᵢ₋₁ − σᵢ Id` for `i = 1…n−1`, with the closure
/// `L Aₙ₋₁ = σₙ Id` checked to `1e−9 · scale`.
pub fn a_sequence(l: &Matrix) -> Result<Vec<Matrix>> {
    let (sigma, aux) = faddeev_leverrier(l);
    let sigma = SigmaCoefficients(sigma);
    let residual = cayley_hamilton_residual(l, &aux, &sigma);
    if residual > 1e-9 * cayley_hamilton_scale(l) {
        return Err(Error::CayleyHamiltonViolated { residual });
    }
    Ok(aux)
}

/// The recursion `A₀ = Id`, `Aᵢ = L Aᵢ₋₁ + sign·σᵢ Id` run explicitly, followed by the same
/// closure check as [`a_sequence`]. Only `sign = −1` is the genuine recursion; other signs
/// exist so that callers can confirm the closure check catches a corrupted recursion.
pub fn a_sequence_signed(l: &Matrix, sign: f64) -> Result<Vec<Matrix>> {
    let n = l.nrows();
    let sigma = char_poly_sigma(l);
    let id = Matrix::identity(n, n);
    let mut seq = vec![id.clone()];
    for i in 1..n {
        let next = l * &seq[i - 1] + &id * (sign * sigma.get(i));
        seq.push(next);
    }
    let residual = cayley_hamilton_residual(l, &seq, &sigma);
    if residual > 1e-9 * cayley_hamilton_scale(l) {
        return Err(Error::CayleyHamiltonViolated { residual });
    }
    Ok(seq)
}

/// Solves a square system, returning `None` when it is numerically singular.
pub fn solve(a: &Matrix, b: &Vector) -> Option<Vector> {
    if !is_nonsingular(a) {
        return None;
    }
    a.clone().lu().solve(b)
}

/// ∞-norm condition number estimate via the explicit inverse.
pub fn condition_number(a: &Matrix) -> f64 {
    let inf_norm = |m: &Matrix| {
        (0..m.nrows())
            .map(|i| m.row(i).iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    match a.clone().try_inverse() {
        Some(inv) => inf_norm(a) * inf_norm(&inv),
        None => f64::INFINITY,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn shift(n: usize) -> Matrix {
        Matrix::from_fn(n, n, |i, j| if j == i + 1 { 1.0 } else { 0.0 })
    }

    #[test]
    fn sigma_of_diag_and_nilpotent() {
        let s = char_poly_sigma(&Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 2.0])));
        assert_relative_eq!(s.get(1), 3.0);
        assert_relative_eq!(s.get(2), -2.0);
        let s = char_poly_sigma(&shift(3));
        assert!(s.as_slice().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn krylov_of_shift_and_vandermonde() {
        let n = shift(3);
        let k = krylov(&n, &Vector::from_vec(vec![0.0, 0.0, 1.0]));
        assert_eq!(k.column(0).as_slice(), &[0.0, 0.0, 1.0]);
        assert_eq!(k.column(1).as_slice(), &[0.0, 1.0, 0.0]);
        assert_eq!(k.column(2).as_slice(), &[1.0, 0.0, 0.0]);
        assert!(is_nonsingular(&k));

        let d = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 2.0]));
        let k = krylov(&d, &Vector::from_vec(vec![1.0, 1.0]));
        assert_eq!(k, Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 2.0]));
        assert_relative_eq!(k.determinant(), 1.0);
    }

    #[test]
    fn repeated_eigenvalue_has_no_cyclic_vector() {
        let d = Matrix::identity(2, 2);
        for v in candidate_vectors(2) {
            assert!(!is_cyclic(&d, &v));
        }
        let d3 = Matrix::from_diagonal(&Vector::from_vec(vec![3.0, 3.0]));
        let r = is_gl_regular(&d3);
        assert!(!r.regular);
        assert!(r.witness.is_none());
        assert!(!r.diagnostic.is_empty());
    }

    #[test]
    fn toeplitz_block_is_gl_regular() {
        let u = Matrix::from_row_slice(2, 2, &[5.0, 1.0, 0.0, 5.0]);
        assert!(is_cyclic(&u, &Vector::from_vec(vec![0.0, 1.0])));
        assert!(is_gl_regular(&u).regular);
    }

    #[test]
    fn first_companion_is_gl_regular() {
        let sig = [0.3, -1.2, 2.5, 0.7];
        let n = sig.len();
        let l = Matrix::from_fn(n, n, |i, j| {
            if j == 0 {
                sig[i]
            } else if j == i + 1 {
                1.0
            } else {
                0.0
            }
        });
        // Lᵏeₙ = eₙ₋ₖ, so the Krylov matrix at eₙ is the reversal permutation.
        let mut en = Vector::zeros(n);
        en[n - 1] = 1.0;
        assert_relative_eq!(krylov(&l, &en).determinant().abs(), 1.0, epsilon = 1e-12);
        let mut e1 = Vector::zeros(n);
        e1[0] = 1.0;
        assert!(is_cyclic(&l, &e1));
        assert!(is_gl_regular(&l).regular);
    }

    #[test]
    fn commutant_of_identity_and_self() {
        let l = Matrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 0.0, 3.0, 1.0, 1.0, 0.0, -1.0]);
        let g = commutant_coeffs(&l, &Matrix::identity(3, 3)).unwrap();
        for (i, expected) in [0.0, 0.0, 1.0].iter().enumerate() {
            assert_relative_eq!(g.as_slice()[i], expected, epsilon = 1e-10);
        }
        let g = commutant_coeffs(&l, &l).unwrap();
        for (i, expected) in [0.0, 1.0, 0.0].iter().enumerate() {
            assert_relative_eq!(g.as_slice()[i], expected, epsilon = 1e-10);
        }
    }

    #[test]
    fn commutant_of_toeplitz_square() {
        // U = [[u2, u1], [0, u2]], M = U² = 2u2·U − u2²·Id since U² − 2u2 U + u2² = 0.
        let (u1, u2) = (0.7, -1.3);
        let u = Matrix::from_row_slice(2, 2, &[u2, u1, 0.0, u2]);
        let m = &u * &u;
        let g = commutant_coeffs(&u, &m).unwrap();
        assert_relative_eq!(g.get(1), 2.0 * u2, max_relative = 1e-12);
        assert_relative_eq!(g.get(2), -u2 * u2, max_relative = 1e-12);
        let rebuilt = g.reconstruct(&u);
        assert!(max_abs(&(rebuilt - m)) < 1e-12);
    }

    #[test]
    fn commutant_errors() {
        let l = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 2.0]);
        let m = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(commutant_coeffs(&l, &m), Err(Error::DoesNotCommute { .. })));
        let id = Matrix::identity(2, 2);
        assert!(matches!(commutant_coeffs(&id, &id), Err(Error::NotGlRegular)));
    }

    #[test]
    fn a_sequence_small_cases() {
        let l = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 2.0]));
        let a = a_sequence(&l).unwrap();
        assert_eq!(a[0], Matrix::identity(2, 2));
        assert_eq!(a[1], Matrix::from_diagonal(&Vector::from_vec(vec![-2.0, -1.0])));
        let n = shift(3);
        let a = a_sequence(&n).unwrap();
        assert_eq!(a[1], n);
        assert_eq!(a[2], &n * &n);
    }

    #[test]
    fn flipped_recursion_sign_breaks_the_closure() {
        let l = Matrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 0.5, -1.0, 1.0, 0.0, 3.0, 2.0]);
        let good = a_sequence_signed(&l, -1.0).unwrap();
        let reference = a_sequence(&l).unwrap();
        for (a, b) in good.iter().zip(&reference) {
            assert!(max_abs(&(a - b)) < 1e-12);
        }
        assert!(matches!(
            a_sequence_signed(&l, 1.0),
            Err(Error::CayleyHamiltonViolated { .. })
        ));
    }

    #[test]
    fn sigma_partials_match_finite_differences() {
        let l = |t: f64| Matrix::from_row_slice(3, 3, &[t, 1.0, t * t, 0.5, -t, 2.0, 1.0, 0.0, t.sin()]);
        let dl = |t: f64| {
            Matrix::from_row_slice(3, 3, &[1.0, 0.0, 2.0 * t, 0.0, -1.0, 0.0, 0.0, 0.0, t.cos()])
        };
        let t = 0.4;
        let (_, ds) = char_poly_sigma_partials(&l(t), &[dl(t)]);
        let h = 1e-5;
        let sp = char_poly_sigma(&l(t + h));
        let sm = char_poly_sigma(&l(t - h));
        for i in 0..3 {
            let fd = (sp.as_slice()[i] - sm.as_slice()[i]) / (2.0 * h);
            assert_relative_eq!(ds[0][i], fd, epsilon = 1e-8);
        }
    }
}
