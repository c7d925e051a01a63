//! Toeplitz (Jordan) blocks: functions of `U`, the symmetry family of a block, its
//! conservation laws, block-wise composition and closed-form hierarchies.
//!
//! Elements of the algebra generated by `N` are stored as truncated power series in a
//! formal `λ`: the upper-triangular Toeplitz matrix with first row `(c₀, …, c_{k−1})`
//! corresponds to `Σ cₘλᵐ`.

use std::sync::Arc;

use crate::dual::Dual2;
use crate::error::{Error, Result};
use crate::fields::{
    make_diagonal, Block, BlockDiagonal, BlockSpec, OperatorEval, OperatorField, OperatorRef, ScalarEval,
    ScalarField, ScalarRef, UnivariateRef,
};
use crate::hierarchy::Hierarchy;
use crate::jet::Jet1D;
use crate::linalg::{Matrix, Vector};
use crate::real::Real;

/// Toeplitz matrix of a series truncated to `k` terms.
pub fn toeplitz_from_series(c: &[f64]) -> Matrix {
    let k = c.len();
    Matrix::from_fn(k, k, |i, j| if j >= i { c[j - i] } else { 0.0 })
}

/// `p(λ) = uᵏ + λuᵏ⁻¹ + … + λᵏ⁻¹u¹` as a jet in `λ` at 0.
fn coordinate_series(u: &[f64]) -> Jet1D {
    Jet1D::from_taylor(0.0, u.iter().rev().copied().collect())
}

/// Series of `h⁽ᵈ⁾(p(λ))` truncated to `k = u.len()` terms.
pub(crate) fn function_series(h: &dyn crate::fields::Univariate, u: &[f64], deriv: usize) -> Result<Vec<f64>> {
    let k = u.len();
    let needed = k - 1 + deriv;
    let mut hj = h.jet(u[k - 1], needed)?;
    if h.max_order() < needed {
        return Err(Error::InsufficientJetOrder {
            needed,
            got: h.max_order(),
        });
    }
    for _ in 0..deriv {
        hj = hj.differentiate();
    }
    if hj.order() < k - 1 {
        return Err(Error::InsufficientJetOrder {
            needed,
            got: hj.order() + deriv,
        });
    }
    let composed = coordinate_series(u).compose(&hj);
    Ok(composed.taylor()[..k].to_vec())
}

fn shift_series(c: &[f64], by: usize) -> Vec<f64> {
    let k = c.len();
    (0..k).map(|m| if m >= by { c[m - by] } else { 0.0 }).collect()
}

/// `h(U)` for the Toeplitz block with coordinates `u`.
pub fn h_of_u(h: &dyn crate::fields::Univariate, u: &[f64]) -> Result<Matrix> {
    Ok(toeplitz_from_series(&function_series(h, u, 0)?))
}

/// `h(U)` with partials `∂h(U)/∂uⁱ = Nᵏ⁻ⁱh′(U)`.
pub fn h_of_u_eval(h: &dyn crate::fields::Univariate, u: &[f64]) -> Result<OperatorEval> {
    let k = u.len();
    let value = toeplitz_from_series(&function_series(h, u, 0)?);
    let d = function_series(h, u, 1)?;
    let partials = (0..k).map(|i| toeplitz_from_series(&shift_series(&d, k - 1 - i))).collect();
    Ok(OperatorEval { value, partials })
}

/// Series of `Σᵢ fᵢ⁽ᵈ⁾(U) Nᵏ⁻ⁱ`.
fn symmetry_series(fs: &[UnivariateRef], u: &[f64], deriv: usize) -> Result<Vec<f64>> {
    let k = u.len();
    let mut total = vec![0.0; k];
    for (i, f) in fs.iter().enumerate() {
        let s = shift_series(&function_series(f.as_ref(), u, deriv)?, k - 1 - i);
        total.iter_mut().zip(s).for_each(|(t, x)| *t += x);
    }
    Ok(total)
}

fn check_block_functions(fs: &[UnivariateRef], u: &[f64]) -> Result<()> {
    if fs.len() != u.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            got: fs.len(),
        });
    }
    Ok(())
}

/// `M = Σ fᵢ(U) Nᵏ⁻ⁱ` at `u`.
pub fn jordan_symmetry(fs: &[UnivariateRef], u: &[f64]) -> Result<Matrix> {
    check_block_functions(fs, u)?;
    Ok(toeplitz_from_series(&symmetry_series(fs, u, 0)?))
}

/// The symmetry `Σ fᵢ(U) Nᵏ⁻ⁱ` of a Toeplitz block as an operator field.
#[derive(Clone)]
pub struct JordanSymmetry {
    fs: Vec<UnivariateRef>,
}

impl JordanSymmetry {
    pub fn new(fs: Vec<UnivariateRef>) -> Self {
        Self { fs }
    }
}

impl OperatorField for JordanSymmetry {
    fn dim(&self) -> usize {
        self.fs.len()
    }
    fn eval(&self, u: &[f64]) -> Result<OperatorEval> {
        check_block_functions(&self.fs, u)?;
        let k = u.len();
        let value = toeplitz_from_series(&symmetry_series(&self.fs, u, 0)?);
        let d = symmetry_series(&self.fs, u, 1)?;
        let partials = (0..k).map(|j| toeplitz_from_series(&shift_series(&d, k - 1 - j))).collect();
        Ok(OperatorEval { value, partials })
    }
    fn value(&self, u: &[f64]) -> Result<Matrix> {
        jordan_symmetry(&self.fs, u)
    }
}

/// The corner entry `f = M¹ₖ` of a block symmetry, with gradient and Hessian.
#[derive(Clone)]
pub struct JordanConservationLaw {
    fs: Vec<UnivariateRef>,
}

impl JordanConservationLaw {
    pub fn new(fs: Vec<UnivariateRef>) -> Self {
        Self { fs }
    }
}

impl ScalarField for JordanConservationLaw {
    fn dim(&self) -> usize {
        self.fs.len()
    }
    fn eval(&self, u: &[f64]) -> Result<ScalarEval> {
        check_block_functions(&self.fs, u)?;
        let k = u.len();
        let s0 = symmetry_series(&self.fs, u, 0)?;
        let s1 = symmetry_series(&self.fs, u, 1)?;
        let s2 = symmetry_series(&self.fs, u, 2)?;
        // ∂ⱼ f = [λʲ⁻¹] S′, ∂ₗ∂ⱼ f = [λ^{j+l−k−1}] S″ (1-based j, l)
        let grad = Vector::from_fn(k, |j, _| s1[j]);
        let hess = Matrix::from_fn(k, k, |j, l| {
            let p = (j + 1 + l + 1) as isize - k as isize - 1;
            if p >= 0 {
                s2[p as usize]
            } else {
                0.0
            }
        });
        Ok(ScalarEval {
            value: s0[k - 1],
            grad,
            hess,
        })
    }
}

/// Value and gradient of the conservation law `M¹ₖ` at `u`.
pub fn jordan_conservation_law(fs: &[UnivariateRef], u: &[f64]) -> Result<ScalarEval> {
    JordanConservationLaw::new(fs.to_vec()).eval(u)
}

/// Data of a symmetry on one block.
#[derive(Clone)]
pub enum BlockFunctions {
    /// `m(s)` of a 1×1 block.
    Diagonal(UnivariateRef),
    /// `f₁…f_k` of a Toeplitz block.
    Jordan(Vec<UnivariateRef>),
}

impl BlockFunctions {
    pub fn size(&self) -> usize {
        match self {
            BlockFunctions::Diagonal(_) => 1,
            BlockFunctions::Jordan(fs) => fs.len(),
        }
    }

    fn operator(&self) -> OperatorRef {
        match self {
            BlockFunctions::Diagonal(f) => Arc::new(make_diagonal(vec![f.clone()])),
            BlockFunctions::Jordan(fs) => Arc::new(JordanSymmetry::new(fs.clone())),
        }
    }

    fn conservation_law(&self) -> ScalarRef {
        match self {
            BlockFunctions::Diagonal(f) => Arc::new(JordanConservationLaw::new(vec![f.clone()])),
            BlockFunctions::Jordan(fs) => Arc::new(JordanConservationLaw::new(fs.clone())),
        }
    }
}

fn check_spec(spec: &BlockSpec, fns: &[BlockFunctions]) -> Result<()> {
    if spec.len() != fns.len() {
        return Err(Error::DimensionMismatch {
            expected: spec.len(),
            got: fns.len(),
        });
    }
    for (b, f) in spec.blocks.iter().zip(fns) {
        if b.size() != f.size() {
            return Err(Error::DimensionMismatch {
                expected: b.size(),
                got: f.size(),
            });
        }
    }
    Ok(())
}

/// Block-diagonal symmetry assembled from per-block data.
pub fn compose_symmetry(spec: &BlockSpec, fns: &[BlockFunctions]) -> Result<BlockDiagonal> {
    check_spec(spec, fns)?;
    Ok(BlockDiagonal::new(fns.iter().map(BlockFunctions::operator).collect()))
}

/// Sum of per-block conservation laws `Σ_b f_b(u_b)`.
pub struct BlockSum {
    spec_sizes: Vec<usize>,
    parts: Vec<ScalarRef>,
}

impl BlockSum {
    pub fn new(spec: &BlockSpec, parts: Vec<ScalarRef>) -> Self {
        Self {
            spec_sizes: spec.blocks.iter().map(Block::size).collect(),
            parts,
        }
    }
}

impl ScalarField for BlockSum {
    fn dim(&self) -> usize {
        self.spec_sizes.iter().sum()
    }
    fn eval(&self, u: &[f64]) -> Result<ScalarEval> {
        let n = self.dim();
        if u.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: u.len(),
            });
        }
        let mut out = ScalarEval {
            value: 0.0,
            grad: Vector::zeros(n),
            hess: Matrix::zeros(n, n),
        };
        let mut off = 0;
        for (k, f) in self.spec_sizes.iter().zip(&self.parts) {
            let e = f.eval(&u[off..off + k])?;
            out.value += e.value;
            out.grad.rows_mut(off, *k).copy_from(&e.grad);
            out.hess.view_mut((off, off), (*k, *k)).copy_from(&e.hess);
            off += k;
        }
        Ok(out)
    }
}

/// The conservation law `Σ_b M_b¹ₖ` that belongs to the composed symmetry.
pub fn compose_conservation_law(spec: &BlockSpec, fns: &[BlockFunctions]) -> Result<BlockSum> {
    check_spec(spec, fns)?;
    Ok(BlockSum::new(spec, fns.iter().map(BlockFunctions::conservation_law).collect()))
}

/// Whether block eigenvalues at `u` are pairwise distinct (relative gap `tol`). The
/// splitting into blocks is only guaranteed where this holds.
pub fn spectra_disjoint(spec: &BlockSpec, u: &[f64], tol: f64) -> Result<bool> {
    let eig = (0..spec.len())
        .map(|b| spec.eigenvalue(b, u))
        .collect::<Result<Vec<_>>>()?;
    for a in 0..eig.len() {
        for b in a + 1..eig.len() {
            if (eig[a] - eig[b]).abs() <= tol * (1.0 + eig[a].abs().max(eig[b].abs())) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// `(1/i)·M¹ₖ` of `Uⁱ` for one block, in Dual2 arithmetic over that block's coordinates.
fn corner_of_power(u: &[Dual2], i: usize) -> Dual2 {
    let k = u.len();
    let zero = u[0].lift(0.0);
    // series of p(λ) = Σ uʲ λᵏ⁻ʲ
    let p: Vec<Dual2> = (0..k).map(|m| u[k - 1 - m].clone()).collect();
    let mut acc: Vec<Dual2> = (0..k).map(|m| if m == 0 { zero.lift(1.0) } else { zero.clone() }).collect();
    for _ in 0..i {
        let mut next = vec![zero.clone(); k];
        for a in 0..k {
            for b in 0..k - a {
                next[a + b] = next[a + b].clone() + acc[a].clone() * p[b].clone();
            }
        }
        acc = next;
    }
    acc[k - 1].clone() / i as f64
}

/// `fᵢ = Σ_b M¹ₖ(U_bⁱ)/i` for blocks that are Toeplitz or 1×1 with `λ(s) = s`.
pub struct StandardPotential {
    sizes: Vec<usize>,
    i: usize,
}

impl ScalarField for StandardPotential {
    fn dim(&self) -> usize {
        self.sizes.iter().sum()
    }
    fn eval(&self, u: &[f64]) -> Result<ScalarEval> {
        let n = self.dim();
        if u.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: u.len(),
            });
        }
        let vars = Dual2::variables(u);
        let mut total = Dual2::constant(0.0, n);
        let mut off = 0;
        for k in &self.sizes {
            total = total + corner_of_power(&vars[off..off + k], self.i);
            off += k;
        }
        Ok(total.into())
    }

    // ∂fᵢ/∂uʲ of a block is [λʲ⁻¹] p(λ)ⁱ⁻¹ with p(λ) = uᵏ + λuᵏ⁻¹ + ….
    fn grad(&self, u: &[f64]) -> Result<Vector> {
        let n = self.dim();
        if u.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: u.len(),
            });
        }
        let mut grad = Vector::zeros(n);
        let mut off = 0;
        for &k in &self.sizes {
            let p: Vec<f64> = u[off..off + k].iter().rev().copied().collect();
            let mut q = vec![0.0; k];
            q[0] = 1.0;
            for _ in 1..self.i {
                q = (0..k).map(|m| (0..=m).map(|a| q[a] * p[m - a]).sum()).collect();
            }
            for j in 0..k {
                grad[off + j] = q[j];
            }
            off += k;
        }
        Ok(grad)
    }
}

/// Whether a one-variable function is the identity (checked on a few jets).
fn is_identity(f: &UnivariateRef) -> bool {
    [-1.3, 0.0, 0.7, 2.9].iter().all(|s| {
        f.jet(*s, 2)
            .map(|j| (j.value() - s).abs() < 1e-14 && (j.derivative(1) - 1.0).abs() < 1e-14 && j.derivative(2).abs() < 1e-14)
            .unwrap_or(false)
    })
}

/// Closed-form hierarchy `fᵢ = Σ_b M¹ₖ(U_bⁱ)/i`. For diagonal blocks with `λ(s) = s` this is
/// `Σⱼ (uʲ)ⁱ/i`; for a Toeplitz block of size 2 it is `(u²)ⁱ⁻¹u¹`. Diagonal blocks with other
/// eigenvalue functions are rejected (use the seed generator instead).
pub fn standard_hierarchy(spec: &BlockSpec) -> Result<Hierarchy> {
    for (b, block) in spec.blocks.iter().enumerate() {
        if let Block::Diagonal1(l) = block {
            if !is_identity(l) {
                return Err(Error::UnsupportedBlock {
                    block: b,
                    reason: "diagonal block with a non-identity eigenvalue function".into(),
                });
            }
        }
    }
    let sizes: Vec<usize> = spec.blocks.iter().map(Block::size).collect();
    let potentials = (1..=spec.dim())
        .map(|i| {
            Arc::new(StandardPotential {
                sizes: sizes.clone(),
                i,
            }) as ScalarRef
        })
        .collect();
    Ok(Hierarchy::from_potentials(potentials, None))
}
