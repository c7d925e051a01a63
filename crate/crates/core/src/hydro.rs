//! The operators `Aᵢ` generating `u_{tᵢ} = Aᵢ(u) u_x`, their common symmetries and
//! conservation laws, and residuals of gridded solutions.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;

use crate::calculus::{self, commutant_coeff_partials, residual_scale, PASS_REL};
use crate::error::{Error, Result};
use crate::fields::{default_fd_step, OperatorEval, OperatorField, OperatorRef, ScalarEval, ScalarField, ScalarRef};
use crate::hierarchy::Hierarchy;
use crate::linalg::{self, cayley_hamilton_residual, cayley_hamilton_scale, max_abs, Matrix, SigmaCoefficients, Vector};

/// Relative tolerance for the chain `Aᵢ*dg₁ = dgᵢ₊₁`.
pub const CHAIN_TOL: f64 = 1e-7;

/// Pointwise `A₀…Aₙ₋₁` of an operator field, with exact partials.
#[derive(Clone)]
pub struct AFields {
    l: OperatorRef,
}

impl AFields {
    pub fn new(l: OperatorRef) -> Self {
        Self { l }
    }

    pub fn dim(&self) -> usize {
        self.l.dim()
    }

    pub fn operator(&self) -> &OperatorRef {
        &self.l
    }

    /// `[A₀, …, Aₙ₋₁]` with partials; the Cayley–Hamilton closure is checked.
    pub fn eval_all(&self, u: &[f64]) -> Result<Vec<OperatorEval>> {
        let le = self.l.eval(u)?;
        let (sigma, aux, _, daux) = linalg::sequence_with_partials(&le.value, &le.partials);
        let residual = cayley_hamilton_residual(&le.value, &aux, &SigmaCoefficients::new(sigma));
        if residual > 1e-9 * cayley_hamilton_scale(&le.value) {
            return Err(Error::CayleyHamiltonViolated { residual });
        }
        Ok(aux
            .into_iter()
            .enumerate()
            .map(|(i, value)| OperatorEval {
                value,
                partials: daux.iter().map(|dk| dk[i].clone()).collect(),
            })
            .collect())
    }

    /// Values only.
    pub fn values(&self, u: &[f64]) -> Result<Vec<Matrix>> {
        linalg::a_sequence(&self.l.value(u)?)
    }

    /// `Aᵢ` as an operator field.
    pub fn field(&self, i: usize) -> OperatorRef {
        assert!(i < self.dim(), "A_{i} is not part of the recursion");
        Arc::new(AField {
            fields: self.clone(),
            i,
        })
    }
}

struct AField {
    fields: AFields,
    i: usize,
}

impl OperatorField for AField {
    fn dim(&self) -> usize {
        self.fields.dim()
    }
    fn eval(&self, u: &[f64]) -> Result<OperatorEval> {
        Ok(self.fields.eval_all(u)?.swap_remove(self.i))
    }
    fn domain(&self) -> crate::fields::DomainBox {
        self.fields.l.domain()
    }
}

/// `[A₀ = Id, A₁, …, Aₙ₋₁]` as operator fields.
pub fn a_fields(l: OperatorRef) -> Vec<OperatorRef> {
    let a = AFields::new(l);
    (0..a.dim()).map(|i| a.field(i)).collect()
}

/// `‖Σ λⁿ⁻¹⁻ⁱAᵢ(λI − L) − χ(λ)I‖∞` for a matrix `L`.
pub fn resolvent_identity_residual(l: &Matrix, lambda: f64) -> Result<f64> {
    let n = l.nrows();
    let a = linalg::a_sequence(l)?;
    let sigma = linalg::char_poly_sigma(l);
    let mut sum = Matrix::zeros(n, n);
    for (i, ai) in a.iter().enumerate() {
        sum += ai * lambda.powi((n - 1 - i) as i32);
    }
    let shifted = Matrix::identity(n, n) * lambda - l;
    let chi = sigma.eval(lambda);
    Ok(max_abs(&(sum * shifted - Matrix::identity(n, n) * chi)))
}

/// `maxᵢ ‖Aᵢeₙ − eₙ₋ᵢ‖∞`, which vanishes for second-companion operators.
pub fn companion_shift_residual(a: &[Matrix]) -> f64 {
    let n = a.len();
    (0..n)
        .map(|i| {
            let mut col = a[i].column(n - 1).into_owned();
            col[n - 1 - i] -= 1.0;
            col.amax()
        })
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Gridded solutions

/// Uniform grid `min, …, max` with `count` nodes; a single node sits at `min`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridAxis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl GridAxis {
    pub fn new(min: f64, max: f64, count: usize) -> Self {
        Self { min, max, count }
    }

    pub fn point(v: f64) -> Self {
        Self::new(v, v, 1)
    }

    pub fn nodes(&self) -> Vec<f64> {
        if self.count <= 1 {
            return vec![self.min];
        }
        let h = (self.max - self.min) / (self.count - 1) as f64;
        (0..self.count).map(|i| self.min + h * i as f64).collect()
    }
}

/// `u(x, t₁…tₙ₋₁)` on a tensor grid. Nodes are stored row-major over the axes
/// `(t₁, …, tₙ₋₁, x)`, so `x` varies fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionGrid {
    pub x: Vec<f64>,
    pub t: Vec<Vec<f64>>,
    pub values: Vec<Vec<f64>>,
    pub converged: Vec<bool>,
    /// Final `‖G‖∞` of the Newton solve at each node.
    pub newton_residuals: Vec<f64>,
    pub metadata: BTreeMap<String, String>,
}

impl SolutionGrid {
    /// Grid with all nodes unsolved (`NaN` values).
    pub fn empty(x: Vec<f64>, t: Vec<Vec<f64>>, n: usize) -> Self {
        let len = x.len() * t.iter().map(Vec::len).product::<usize>();
        Self {
            x,
            t,
            values: vec![vec![f64::NAN; n]; len],
            converged: vec![false; len],
            newton_residuals: vec![f64::NAN; len],
            metadata: BTreeMap::new(),
        }
    }

    /// Axis lengths in storage order `(t₁, …, tₙ₋₁, x)`.
    pub fn shape(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.t.iter().map(Vec::len).collect();
        s.push(self.x.len());
        s
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.values.first().map_or(self.t.len() + 1, Vec::len)
    }

    pub fn index(&self, multi: &[usize]) -> usize {
        self.shape()
            .iter()
            .zip(multi)
            .fold(0, |acc, (len, i)| acc * len + i)
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let shape = self.shape();
        let mut out = vec![0; shape.len()];
        for a in (0..shape.len()).rev() {
            out[a] = flat % shape[a];
            flat /= shape[a];
        }
        out
    }

    /// `(t₁…tₙ₋₁, x)` of a node.
    pub fn coords(&self, flat: usize) -> (Vec<f64>, f64) {
        let m = self.multi_index(flat);
        let k = self.t.len();
        ((0..k).map(|a| self.t[a][m[a]]).collect(), self.x[m[k]])
    }

    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|c| *c)
    }

    fn axis(&self, a: usize) -> &[f64] {
        if a < self.t.len() {
            &self.t[a]
        } else {
            &self.x
        }
    }
}

/// Per-equation residuals `maxₙₒ𝒹ₑ ‖D_{tᵢ}u − Aᵢ(u)D_x u‖∞` and grid spacings.
#[derive(Debug, Clone, PartialEq)]
pub struct HydroResidual {
    /// Entry `i − 1` is the residual of `u_{tᵢ} = Aᵢ u_x`.
    pub per_equation: Vec<f64>,
    /// Spacing of each axis in storage order `(t₁, …, tₙ₋₁, x)`.
    pub spacing: Vec<f64>,
    pub nodes: usize,
}

impl HydroResidual {
    pub fn max(&self) -> f64 {
        self.per_equation.iter().copied().fold(0.0, f64::max)
    }
}

/// Central-difference residual over all interior nodes.
pub fn hydro_residual(grid: &SolutionGrid, l: &dyn OperatorField) -> Result<HydroResidual> {
    hydro_residual_strided(grid, l, 1)
}

/// As [`hydro_residual`] but only at interior nodes whose indices are all multiples of
/// `stride`; with `stride = 2` these are the nodes shared with a grid of half the density.
pub fn hydro_residual_strided(grid: &SolutionGrid, l: &dyn OperatorField, stride: usize) -> Result<HydroResidual> {
    let shape = grid.shape();
    for (axis, count) in shape.iter().enumerate() {
        if *count < 3 {
            return Err(Error::GridTooCoarse { axis, count: *count });
        }
    }
    let k = grid.t.len();
    let spacing: Vec<f64> = (0..=k)
        .map(|a| {
            let ax = grid.axis(a);
            (ax[ax.len() - 1] - ax[0]) / (ax.len() - 1) as f64
        })
        .collect();
    let interior: Vec<usize> = (0..grid.len())
        .filter(|&flat| {
            grid.multi_index(flat)
                .iter()
                .zip(&shape)
                .all(|(i, len)| *i > 0 && *i + 1 < *len && i % stride.max(1) == 0)
        })
        .collect();
    let derivative = |flat: usize, axis: usize| -> Vector {
        let mut m = grid.multi_index(flat);
        let centre = m[axis];
        m[axis] = centre + 1;
        let plus = &grid.values[grid.index(&m)];
        m[axis] = centre - 1;
        let minus = &grid.values[grid.index(&m)];
        let ax = grid.axis(axis);
        let h = ax[centre + 1] - ax[centre - 1];
        Vector::from_iterator(plus.len(), plus.iter().zip(minus).map(|(p, q)| (p - q) / h))
    };
    let per_node: Vec<Vec<f64>> = interior
        .par_iter()
        .map(|&flat| -> Result<Vec<f64>> {
            let a = linalg::a_sequence(&l.value(&grid.values[flat])?)?;
            let ux = derivative(flat, k);
            Ok((0..k)
                .map(|i| (derivative(flat, i) - &a[i + 1] * &ux).amax())
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut per_equation = vec![0.0; k];
    for r in &per_node {
        for (acc, v) in per_equation.iter_mut().zip(r) {
            *acc = f64::max(*acc, *v);
        }
    }
    Ok(HydroResidual {
        per_equation,
        spacing,
        nodes: interior.len(),
    })
}

// ---------------------------------------------------------------------------
// Common symmetries and conservation laws

/// `B = f₁Aₙ₋₁ + … + fₙA₀` built from the potentials of a hierarchy.
pub struct CommonSymmetry {
    a: AFields,
    potentials: Vec<ScalarRef>,
}

impl CommonSymmetry {
    /// No hierarchy check; used to exhibit what a broken chain does.
    pub fn new_unchecked(l: OperatorRef, potentials: Vec<ScalarRef>) -> Self {
        Self {
            a: AFields::new(l),
            potentials,
        }
    }

    pub fn a_fields(&self) -> &AFields {
        &self.a
    }
}

impl OperatorField for CommonSymmetry {
    fn dim(&self) -> usize {
        self.a.dim()
    }
    fn eval(&self, u: &[f64]) -> Result<OperatorEval> {
        let n = self.dim();
        let a = self.a.eval_all(u)?;
        let mut value = Matrix::zeros(n, n);
        let mut partials = vec![Matrix::zeros(n, n); n];
        for (i, f) in self.potentials.iter().enumerate() {
            let fe = f.eval(u)?;
            let ai = &a[n - 1 - i];
            value += &ai.value * fe.value;
            for (k, p) in partials.iter_mut().enumerate() {
                *p += &ai.value * fe.grad[k] + &ai.partials[k] * fe.value;
            }
        }
        Ok(OperatorEval { value, partials })
    }
    fn domain(&self) -> crate::fields::DomainBox {
        self.a.l.domain()
    }
}

/// The common symmetry of all `Aᵢ` generated by a hierarchy with potentials; the chain
/// `L*ωᵢ = ωᵢ₊₁` is checked at the probes.
pub fn common_symmetry_b(h: &Hierarchy, l: OperatorRef, probes: &[Vec<f64>]) -> Result<CommonSymmetry> {
    let potentials = h
        .potentials()
        .ok_or_else(|| Error::Evaluation("the hierarchy carries no potentials".into()))?
        .to_vec();
    if potentials.len() != l.dim() {
        return Err(Error::DimensionMismatch {
            expected: l.dim(),
            got: potentials.len(),
        });
    }
    h.check_chain(l.as_ref(), probes)?;
    Ok(CommonSymmetry::new_unchecked(l, potentials))
}

/// Worst relative symmetry residual of `B` against each of `A₀…Aₙ₋₁` over the probes.
pub fn common_symmetry_residual(b: &dyn OperatorField, a: &AFields, probes: &[Vec<f64>]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for u in probes {
        let be = b.eval(u)?;
        for ae in a.eval_all(u)? {
            let r = calculus::symmetry_residual_eval(&ae, &be)?;
            worst = worst.max(r / residual_scale(&ae, &be));
        }
    }
    Ok(worst)
}

/// The coefficient `gᵢ` of `M = Σ gᵢLⁿ⁻ⁱ` as a scalar field (`index` is 1-based). The
/// gradient is exact; the Hessian is a central difference of the gradient.
pub struct CommutantCoefficient {
    l: OperatorRef,
    m: OperatorRef,
    index: usize,
}

impl CommutantCoefficient {
    pub fn new(l: OperatorRef, m: OperatorRef, index: usize) -> Self {
        assert!(index >= 1 && index <= l.dim(), "coefficient index out of range");
        Self { l, m, index }
    }

    fn value_and_grad(&self, u: &[f64]) -> Result<(f64, Vector)> {
        let (g, dg) = commutant_coeff_partials(&self.l.eval(u)?, &self.m.eval(u)?)?;
        let i = self.index - 1;
        Ok((g[i], Vector::from_column_slice(&dg[i])))
    }
}

impl ScalarField for CommutantCoefficient {
    fn dim(&self) -> usize {
        self.l.dim()
    }
    fn eval(&self, u: &[f64]) -> Result<ScalarEval> {
        let n = self.dim();
        let (value, grad) = self.value_and_grad(u)?;
        let h = default_fd_step(u);
        let mut hess = Matrix::zeros(n, n);
        let mut v = u.to_vec();
        for k in 0..n {
            v[k] = u[k] + h;
            let (_, gp) = self.value_and_grad(&v)?;
            v[k] = u[k] - h;
            let (_, gm) = self.value_and_grad(&v)?;
            v[k] = u[k];
            hess.set_column(k, &((gp - gm) / (2.0 * h)));
        }
        Ok(ScalarEval { value, grad, hess })
    }
    fn value(&self, u: &[f64]) -> Result<f64> {
        Ok(self.value_and_grad(u)?.0)
    }
}

/// `g₁` of a symmetry together with the worst chain residual `‖Aᵢ*dg₁ − dgᵢ₊₁‖∞`.
pub struct CommonConservationLaw {
    pub g1: ScalarRef,
    pub chain_residual: f64,
}

/// `dg₁` is a conservation law of every `Aᵢ` with `Aᵢ*dg₁ = dgᵢ₊₁`. The symmetry and the
/// chain are both checked at the probes.
pub fn common_cl_from_symmetry(m: OperatorRef, l: OperatorRef, probes: &[Vec<f64>]) -> Result<CommonConservationLaw> {
    let a = AFields::new(l.clone());
    let mut worst: f64 = 0.0;
    for u in probes {
        let (le, me) = (l.eval(u)?, m.eval(u)?);
        let scale = residual_scale(&le, &me);
        let residual = calculus::symmetry_residual_eval(&le, &me)?;
        if residual > PASS_REL * scale {
            return Err(Error::NotASymmetry { residual });
        }
        let (_, dg) = commutant_coeff_partials(&le, &me)?;
        let dg1 = Vector::from_column_slice(&dg[0]);
        let seq = a.values(u)?;
        for i in 1..seq.len() {
            let r = (seq[i].transpose() * &dg1 - Vector::from_column_slice(&dg[i])).amax();
            if r > CHAIN_TOL * scale {
                return Err(Error::NotASymmetry { residual: r });
            }
            worst = worst.max(r);
        }
    }
    Ok(CommonConservationLaw {
        g1: Arc::new(CommutantCoefficient::new(l, m, 1)),
        chain_residual: worst,
    })
}
