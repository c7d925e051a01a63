//! Fields on coordinate boxes of ℝⁿ: operator fields with exact first partials,
//! scalar fields with gradient and Hessian, 1-form fields with Jacobians, curves,
//! one-variable functions and block specifications.

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::dual::Dual2;
use crate::error::{Error, Result};
use crate::jet::Jet1D;
use crate::linalg::{max_abs, Matrix, Vector};
use crate::real::Real;

fn check_dim(u: &[f64], n: usize) -> Result<()> {
    if u.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: u.len(),
        });
    }
    Ok(())
}

fn finite_or(what: &str, ok: bool) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Evaluation(format!("{what} produced a non-finite value")))
    }
}

/// Axis-aligned box; evaluation outside raises instead of extrapolating.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl DomainBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len());
        Self { lo, hi }
    }

    pub fn unbounded(n: usize) -> Self {
        Self::new(vec![f64::NEG_INFINITY; n], vec![f64::INFINITY; n])
    }

    pub fn cube(n: usize, lo: f64, hi: f64) -> Self {
        Self::new(vec![lo; n], vec![hi; n])
    }

    /// Box of half-width `r` around `c`.
    pub fn around(c: &[f64], r: f64) -> Self {
        Self::new(c.iter().map(|x| x - r).collect(), c.iter().map(|x| x + r).collect())
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        u.len() == self.dim()
            && u.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(x, (l, h))| *l <= *x && *x <= *h)
    }

    pub fn check(&self, u: &[f64]) -> Result<()> {
        check_dim(u, self.dim())?;
        if self.contains(u) {
            Ok(())
        } else {
            Err(Error::OutOfDomain { point: u.to_vec() })
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.iter().chain(&self.hi).all(|x| x.is_finite())
    }

    /// Uniform sample; unbounded axes are sampled in `[-1, 1]`.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| {
                let a = if l.is_finite() { *l } else { -1.0 };
                let b = if h.is_finite() { *h } else { 1.0 };
                rng.gen_range(a..=b)
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// One-variable functions

/// A smooth function of one variable that can report its jet at any point.
pub trait Univariate: Send + Sync {
    fn jet(&self, s: f64, order: usize) -> Result<Jet1D>;

    fn value(&self, s: f64) -> Result<f64> {
        Ok(self.jet(s, 0)?.value())
    }

    /// Highest derivative order the function can deliver.
    fn max_order(&self) -> usize {
        usize::MAX
    }
}

pub type UnivariateRef = Arc<dyn Univariate>;

/// A one-variable function given as Jet1D arithmetic on its argument.
pub struct JetFn<F>(pub F);

impl<F> Univariate for JetFn<F>
where
    F: Fn(Jet1D) -> Jet1D + Send + Sync,
{
    fn jet(&self, s: f64, order: usize) -> Result<Jet1D> {
        let j = (self.0)(Jet1D::variable(s, order));
        finite_or("one-variable function", j.is_finite())?;
        Ok(j)
    }
}

pub fn univariate<F>(f: F) -> UnivariateRef
where
    F: Fn(Jet1D) -> Jet1D + Send + Sync + 'static,
{
    Arc::new(JetFn(f))
}

/// Polynomial with ascending coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial(pub Vec<f64>);

impl Univariate for Polynomial {
    fn jet(&self, s: f64, order: usize) -> Result<Jet1D> {
        let x = Jet1D::variable(s, order);
        let mut acc = Jet1D::constant(0.0, s, order);
        for c in self.0.iter().rev() {
            acc = acc * x.clone() + *c;
        }
        Ok(acc)
    }
}

pub fn constant_fn(c: f64) -> UnivariateRef {
    Arc::new(Polynomial(vec![c]))
}

pub fn identity_fn() -> UnivariateRef {
    Arc::new(Polynomial(vec![0.0, 1.0]))
}

// ---------------------------------------------------------------------------
// Operator fields

/// Value `L(u)` and partials `∂L/∂uᵏ`, `k = 0…n−1`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorEval {
    pub value: Matrix,
    pub partials: Vec<Matrix>,
}

impl OperatorEval {
    pub fn constant(value: Matrix) -> Self {
        let n = value.nrows();
        Self {
            partials: vec![Matrix::zeros(n, n); n],
            value,
        }
    }

    /// Largest entry of any partial.
    pub fn max_partial(&self) -> f64 {
        self.partials.iter().map(max_abs).fold(0.0, f64::max)
    }

    /// Pointwise product with the product rule on partials.
    pub fn mul(&self, other: &OperatorEval) -> OperatorEval {
        OperatorEval {
            value: &self.value * &other.value,
            partials: self
                .partials
                .iter()
                .zip(&other.partials)
                .map(|(a, b)| a * &other.value + &self.value * b)
                .collect(),
        }
    }

    pub fn add(&self, other: &OperatorEval) -> OperatorEval {
        OperatorEval {
            value: &self.value + &other.value,
            partials: self
                .partials
                .iter()
                .zip(&other.partials)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn scale(&self, c: f64) -> OperatorEval {
        OperatorEval {
            value: &self.value * c,
            partials: self.partials.iter().map(|p| p * c).collect(),
        }
    }
}

pub trait OperatorField: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, u: &[f64]) -> Result<OperatorEval>;

    fn value(&self, u: &[f64]) -> Result<Matrix> {
        Ok(self.eval(u)?.value)
    }

    fn domain(&self) -> DomainBox {
        DomainBox::unbounded(self.dim())
    }
}

pub type OperatorRef = Arc<dyn OperatorField>;

#[derive(Debug, Clone)]
pub struct ConstantOperator(pub Matrix);

impl OperatorField for ConstantOperator {
    fn dim(&self) -> usize {
        self.0.nrows()
    }
    fn eval(&self, u: &[f64]) -> Result<OperatorEval> {
        check_dim(u, self.dim())?;
        Ok(OperatorEval::constant(self.0.clone()))
    }
}

/// `diag(λ₁(u¹), …, λₙ(uⁿ))`.
#[derive(Clone)]
pub struct Diagonal {
    lambdas: Vec<UnivariateRef>,
}

pub fn make_diagonal(lambdas: Vec<UnivariateRef>) -> Diagonal {
    Diagonal { lambdas }
}

impl OperatorField for Diagonal {
    fn dim(&self) -> usize {
        self.lambdas.len()
    }
    fn eval(&self, u: &[f64]) -> Result<OperatorEval> {
        let n = self.dim();
        check_dim(u, n)?;
        let mut value = Matrix::zeros(n, n);
        let mut partials = vec![Matrix::zeros(n, n); n];
        for (i, l) in self.lambdas.iter().enumerate() {
            let j = l.jet(u[i], 1)?;
            value[(i, i)] = j.value();
            partials[i][(i, i)] = j.derivative(1);
        }
        Ok(OperatorEval { value, partials })
    }
}

/// `k×k` nilpotent upper shift `N`.
pub fn shift_matrix(k: usize) -> Matrix {
    Matrix::from_fn(k, k, |i, j| if j == i + 1 { 1.0 } else { 0.0 })
}

/// Upper-triangular Toeplitz block with first row `(uᵏ, uᵏ⁻¹, …, u¹)`.
#[derive(Debug, Clone, Copy)]
pub struct Toeplitz {
    k: usize,
}

pub fn make_toeplitz(k: usize) -> Toeplitz {
    assert!(k >= 1, "Toeplitz block size must be positive");
    Toeplitz { k }
}

/// Toeplitz matrix from the coordinates of one block.
pub fn toeplitz_value(u: &[f64]) -> Matrix {
    let k = u.len();
    Matrix::from_fn(k, k, |i, j| if j >= i { u[k - 1 - (j - i)] } else { 0.0 })
}

impl OperatorField for Toeplitz {
    fn dim(&self) -> usize {
        self.k
    }
    fn eval(&self, u: &[f64]) -> Result<OperatorEval> {
        check_dim(u, self.k)?;
        let k = self.k;
        let partials = (0..k)
            .map(|m| {
                let d = k - 1 - m;
                Matrix::from_fn(k, k, |i, j| if j == i + d { 1.0 } else { 0.0 })
            })
            .collect();
        Ok(OperatorEval {
            value: toeplitz_value(u),
            partials,
        })
    }
}

/// One block of a direct-sum operator.
#[derive(Clone)]
pub enum Block {
    /// A 1×1 block `λ(u)` on one coordinate.
    Diagonal1(UnivariateRef),
    /// An upper-triangular Toeplitz block of the given size.
    JordanToeplitz(usize),
}

impl fmt::Debug for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Block::Diagonal1(_) => write!(f, "Diagonal1(λ)"),
            Block::JordanToeplitz(k) => write!(f, "JordanToeplitz({k})"),
        }
    }
}

impl Block {
    pub fn size(&self) -> usize {
        match self {
            Block::Diagonal1(_) => 1,
            Block::JordanToeplitz(k) => *k,
        }
    }

    pub fn operator(&self) -> OperatorRef {
        match self {
            Block::Diagonal1(l) => Arc::new(make_diagonal(vec![l.clone()])),
            Block::JordanToeplitz(k) => Arc::new(make_toeplitz(*k)),
        }
    }
}

/// Ordered list of blocks acting on consecutive coordinate groups.
#[derive(Debug, Clone)]
pub struct BlockSpec {
    pub blocks: Vec<Block>,
}

impl BlockSpec {
    pub fn new(blocks: Vec<Block>) -> Self {
        Self { blocks }
    }

    /// `n` diagonal blocks with `λ(s) = s`.
    pub fn identity_diagonal(n: usize) -> Self {
        Self::new((0..n).map(|_| Block::Diagonal1(identity_fn())).collect())
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(Block::size).sum()
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Starting coordinate index of each block.
    pub fn offsets(&self) -> Vec<usize> {
        self.blocks
            .iter()
            .scan(0, |acc, b| {
                let o = *acc;
                *acc += b.size();
                Some(o)
            })
            .collect()
    }

    /// Index of the coordinate the block eigenvalue depends on: the only coordinate of a
    /// 1×1 block, the diagonal coordinate `uᵏ` of a Toeplitz block.
    pub fn eigen_coordinate_index(&self, b: usize) -> usize {
        self.offsets()[b] + self.blocks[b].size() - 1
    }

    /// Block eigenvalue at `u`.
    pub fn eigenvalue(&self, b: usize, u: &[f64]) -> Result<f64> {
        let s = u[self.eigen_coordinate_index(b)];
        match &self.blocks[b] {
            Block::Diagonal1(l) => l.value(s),
            Block::JordanToeplitz(_) => Ok(s),
        }
    }

    pub fn operator(&self) -> BlockDiagonal {
        BlockDiagonal {
            blocks: self.blocks.iter().map(Block::operator).collect(),
        }
    }
}

/// Direct sum of operator fields acting on consecutive coordinate groups.
#[derive(Clone)]
pub struct BlockDiagonal {
    blocks: Vec<OperatorRef>,
}

impl BlockDiagonal {
    pub fn new(blocks: Vec<OperatorRef>) -> Self {
        Self { blocks }
    }

    pub fn blocks(&self) -> &[OperatorRef] {
        &self.blocks
    }
}

/// Direct sum of per-block fields, validated against the spec's block sizes.
pub fn make_block_diagonal(spec: &BlockSpec, fields: Vec<OperatorRef>) -> Result<BlockDiagonal> {
    if fields.len() != spec.len() {
        return Err(Error::DimensionMismatch {
            expected: spec.len(),
            got: fields.len(),
        });
    }
    for (b, f) in spec.blocks.iter().zip(&fields) {
        if b.size() != f.dim() {
            return Err(Error::DimensionMismatch {
                expected: b.size(),
                got: f.dim(),
            });
        }
    }
    Ok(BlockDiagonal::new(fields))
}

impl OperatorField for BlockDiagonal {
    fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.dim()).sum()
    }
    fn eval(&self, u: &[f64]) -> Result<OperatorEval> {
        let n = self.dim();
        check_dim(u, n)?;
        let mut value = Matrix::zeros(n, n);
        let mut partials = vec![Matrix::zeros(n, n); n];
        let mut off = 0;
        for b in &self.blocks {
            let k = b.dim();
            let e = b.eval(&u[off..off + k])?;
            value.view_mut((off, off), (k, k)).copy_from(&e.value);
            for (m, p) in e.partials.iter().enumerate() {
                partials[off + m].view_mut((off, off), (k, k)).copy_from(p);
            }
            off += k;
        }
        Ok(OperatorEval { value, partials })
    }
    fn value(&self, u: &[f64]) -> Result<Matrix> {
        let n = self.dim();
        check_dim(u, n)?;
        let mut value = Matrix::zeros(n, n);
        let mut off = 0;
        for b in &self.blocks {
            let k = b.dim();
            value.view_mut((off, off), (k, k)).copy_from(&b.value(&u[off..off + k])?);
            off += k;
        }
        Ok(value)
    }
}

/// First companion layout: first column `σ`, ones on the superdiagonal.
pub struct FirstCompanion {
    sigma: Vec<ScalarRef>,
}

/// Second companion layout: ones on the superdiagonal, last row `(σₙ, …, σ₁)`.
pub struct SecondCompanion {
    sigma: Vec<ScalarRef>,
}

/// `sigma[i]` is `σᵢ₊₁`.
pub fn make_companion_first(sigma: Vec<ScalarRef>) -> FirstCompanion {
    FirstCompanion { sigma }
}

pub fn make_companion_second(sigma: Vec<ScalarRef>) -> SecondCompanion {
    SecondCompanion { sigma }
}

fn companion_eval(
    sigma: &[ScalarRef],
    u: &[f64],
    place: impl Fn(usize, usize) -> (usize, usize),
) -> Result<OperatorEval> {
    let n = sigma.len();
    check_dim(u, n)?;
    let mut value = Matrix::zeros(n, n);
    let mut partials = vec![Matrix::zeros(n, n); n];
    for i in 0..n.saturating_sub(1) {
        value[(i, i + 1)] = 1.0;
    }
    for (i, s) in sigma.iter().enumerate() {
        let e = s.eval(u)?;
        let pos = place(n, i);
        value[pos] = e.value;
        for (k, p) in partials.iter_mut().enumerate() {
            p[pos] = e.grad[k];
        }
    }
    Ok(OperatorEval { value, partials })
}

impl OperatorField for FirstCompanion {
    fn dim(&self) -> usize {
        self.sigma.len()
    }
    fn eval(&self, u: &[f64]) -> Result<OperatorEval> {
        companion_eval(&self.sigma, u, |_, i| (i, 0))
    }
}

impl OperatorField for SecondCompanion {
    fn dim(&self) -> usize {
        self.sigma.len()
    }
    fn eval(&self, u: &[f64]) -> Result<OperatorEval> {
        companion_eval(&self.sigma, u, |n, i| (n - 1, n - 1 - i))
    }
}

/// Default central-difference step for the finite-difference wrappers.
pub fn default_fd_step(u: &[f64]) -> f64 {
    let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    1e-5 * (1.0 + norm)
}

/// Operator field whose partials come from central differences of a raw evaluator.
pub struct FiniteDifferenceOperator<F> {
    n: usize,
    raw: F,
    step: Option<f64>,
}

/// Wraps a raw matrix evaluator; `step = None` uses [`default_fd_step`].
pub fn wrap_finite_difference<F>(n: usize, raw: F, step: Option<f64>) -> FiniteDifferenceOperator<F>
where
    F: Fn(&[f64]) -> Result<Matrix> + Send + Sync,
{
    FiniteDifferenceOperator { n, raw, step }
}

impl<F> OperatorField for FiniteDifferenceOperator<F>
where
    F: Fn(&[f64]) -> Result<Matrix> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.n
    }
    fn eval(&self, u: &[f64]) -> Result<OperatorEval> {
        check_dim(u, self.n)?;
        let value = (self.raw)(u)?;
        let h = self.step.unwrap_or_else(|| default_fd_step(u));
        let mut partials = Vec::with_capacity(self.n);
        let mut w = u.to_vec();
        for k in 0..self.n {
            w[k] = u[k] + h;
            let plus = (self.raw)(&w)?;
            w[k] = u[k] - h;
            let minus = (self.raw)(&w)?;
            w[k] = u[k];
            partials.push((plus - minus) / (2.0 * h));
        }
        Ok(OperatorEval { value, partials })
    }
}

type DualMatrixFn = dyn Fn(&[Dual2]) -> Vec<Dual2> + Send + Sync;

/// Operator field defined by a closure over [`Dual2`] arguments returning the `n×n`
/// entries in row-major order; partials are exact.
pub struct DualOperator {
    n: usize,
    f: Arc<DualMatrixFn>,
    domain: DomainBox,
}

impl DualOperator {
    pub fn new<F>(n: usize, f: F) -> Self
    where
        F: Fn(&[Dual2]) -> Vec<Dual2> + Send + Sync + 'static,
    {
        Self {
            n,
            f: Arc::new(f),
            domain: DomainBox::unbounded(n),
        }
    }

    pub fn with_domain(mut self, domain: DomainBox) -> Self {
        self.domain = domain;
        self
    }
}

impl OperatorField for DualOperator {
    fn dim(&self) -> usize {
        self.n
    }
    fn eval(&self, u: &[f64]) -> Result<OperatorEval> {
        let n = self.n;
        self.domain.check(u)?;
        let entries = (self.f)(&Dual2::variables(u));
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: entries.len(),
            });
        }
        finite_or("operator field", entries.iter().all(Real::is_finite))?;
        let value = Matrix::from_fn(n, n, |i, j| entries[i * n + j].value);
        let partials = (0..n)
            .map(|k| Matrix::from_fn(n, n, |i, j| entries[i * n + j].grad[k]))
            .collect();
        Ok(OperatorEval { value, partials })
    }
    fn domain(&self) -> DomainBox {
        self.domain.clone()
    }
}

/// Pointwise product `A·B` of two operator fields.
pub struct ProductOperator(pub OperatorRef, pub OperatorRef);

impl OperatorField for ProductOperator {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn eval(&self, u: &[f64]) -> Result<OperatorEval> {
        Ok(self.0.eval(u)?.mul(&self.1.eval(u)?))
    }
}

/// Maximum deviation between exact partials and central differences with step `h`.
pub fn fd_check_operator(field: &dyn OperatorField, u: &[f64], h: f64) -> Result<f64> {
    let e = field.eval(u)?;
    let mut w = u.to_vec();
    let mut worst: f64 = 0.0;
    for k in 0..u.len() {
        w[k] = u[k] + h;
        let plus = field.value(&w)?;
        w[k] = u[k] - h;
        let minus = field.value(&w)?;
        w[k] = u[k];
        worst = worst.max(max_abs(&((plus - minus) / (2.0 * h) - &e.partials[k])));
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// Scalar fields

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarEval {
    pub value: f64,
    pub grad: Vector,
    pub hess: Matrix,
}

impl From<Dual2> for ScalarEval {
    fn from(d: Dual2) -> Self {
        let n = d.dim();
        ScalarEval {
            value: d.value,
            grad: Vector::from_vec(d.grad),
            hess: Matrix::from_row_slice(n, n, &d.hess),
        }
    }
}

pub trait ScalarField: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, u: &[f64]) -> Result<ScalarEval>;

    fn value(&self, u: &[f64]) -> Result<f64> {
        Ok(self.eval(u)?.value)
    }

    fn grad(&self, u: &[f64]) -> Result<Vector> {
        Ok(self.eval(u)?.grad)
    }
}

pub type ScalarRef = Arc<dyn ScalarField>;

type DualScalarFn = dyn Fn(&[Dual2]) -> Dual2 + Send + Sync;

/// Scalar field defined by a closure over [`Dual2`] arguments.
pub struct DualScalar {
    n: usize,
    f: Arc<DualScalarFn>,
}

impl DualScalar {
    pub fn new<F>(n: usize, f: F) -> Self
    where
        F: Fn(&[Dual2]) -> Dual2 + Send + Sync + 'static,
    {
        Self { n, f: Arc::new(f) }
    }
}

pub fn scalar<F>(n: usize, f: F) -> ScalarRef
where
    F: Fn(&[Dual2]) -> Dual2 + Send + Sync + 'static,
{
    Arc::new(DualScalar::new(n, f))
}

impl ScalarField for DualScalar {
    fn dim(&self) -> usize {
        self.n
    }
    fn eval(&self, u: &[f64]) -> Result<ScalarEval> {
        check_dim(u, self.n)?;
        let d = (self.f)(&Dual2::variables(u));
        finite_or("scalar field", d.is_finite())?;
        Ok(d.into())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConstantScalar {
    pub n: usize,
    pub value: f64,
}

impl ScalarField for ConstantScalar {
    fn dim(&self) -> usize {
        self.n
    }
    fn eval(&self, u: &[f64]) -> Result<ScalarEval> {
        check_dim(u, self.n)?;
        Ok(ScalarEval {
            value: self.value,
            grad: Vector::zeros(self.n),
            hess: Matrix::zeros(self.n, self.n),
        })
    }
}

/// The coordinate function `u ↦ uⁱ` (0-based `i`).
#[derive(Debug, Clone, Copy)]
pub struct Coordinate {
    pub n: usize,
    pub i: usize,
}

impl ScalarField for Coordinate {
    fn dim(&self) -> usize {
        self.n
    }
    fn eval(&self, u: &[f64]) -> Result<ScalarEval> {
        check_dim(u, self.n)?;
        let mut grad = Vector::zeros(self.n);
        grad[self.i] = 1.0;
        Ok(ScalarEval {
            value: u[self.i],
            grad,
            hess: Matrix::zeros(self.n, self.n),
        })
    }
}

/// Maximum deviation of the gradient and Hessian from central differences.
pub fn fd_check_scalar(field: &dyn ScalarField, u: &[f64], h: f64) -> Result<f64> {
    let e = field.eval(u)?;
    let mut w = u.to_vec();
    let mut worst: f64 = 0.0;
    for k in 0..u.len() {
        w[k] = u[k] + h;
        let plus = field.eval(&w)?;
        w[k] = u[k] - h;
        let minus = field.eval(&w)?;
        w[k] = u[k];
        worst = worst.max(((plus.value - minus.value) / (2.0 * h) - e.grad[k]).abs());
        let dg = (plus.grad - minus.grad) / (2.0 * h);
        for j in 0..u.len() {
            worst = worst.max((dg[j] - e.hess[(k, j)]).abs());
        }
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// 1-form fields

/// Covector `ω(u)` and Jacobian `jacobian[(j, k)] = ∂ₖωⱼ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FormEval {
    pub form: Vector,
    pub jacobian: Matrix,
}

impl FormEval {
    /// `max |∂ᵢωⱼ − ∂ⱼωᵢ|`.
    pub fn closedness_residual(&self) -> f64 {
        max_abs(&(&self.jacobian - self.jacobian.transpose()))
    }

    pub fn zero(n: usize) -> Self {
        Self {
            form: Vector::zeros(n),
            jacobian: Matrix::zeros(n, n),
        }
    }
}

impl From<ScalarEval> for FormEval {
    fn from(s: ScalarEval) -> Self {
        FormEval {
            form: s.grad,
            jacobian: s.hess,
        }
    }
}

pub trait OneFormField: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, u: &[f64]) -> Result<FormEval>;

    fn form(&self, u: &[f64]) -> Result<Vector> {
        Ok(self.eval(u)?.form)
    }
}

pub type FormRef = Arc<dyn OneFormField>;

/// The exact form `df`.
pub struct Differential(pub ScalarRef);

impl OneFormField for Differential {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn eval(&self, u: &[f64]) -> Result<FormEval> {
        Ok(self.0.eval(u)?.into())
    }
    fn form(&self, u: &[f64]) -> Result<Vector> {
        self.0.grad(u)
    }
}

pub fn differential(f: ScalarRef) -> FormRef {
    Arc::new(Differential(f))
}

/// 1-form defined by a closure over [`Dual2`] arguments returning its `n` components.
pub struct DualOneForm {
    n: usize,
    f: Arc<DualMatrixFn>,
}

impl DualOneForm {
    pub fn new<F>(n: usize, f: F) -> Self
    where
        F: Fn(&[Dual2]) -> Vec<Dual2> + Send + Sync + 'static,
    {
        Self { n, f: Arc::new(f) }
    }
}

impl OneFormField for DualOneForm {
    fn dim(&self) -> usize {
        self.n
    }
    fn eval(&self, u: &[f64]) -> Result<FormEval> {
        let n = self.n;
        check_dim(u, n)?;
        let comps = (self.f)(&Dual2::variables(u));
        if comps.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: comps.len(),
            });
        }
        finite_or("1-form field", comps.iter().all(Real::is_finite))?;
        Ok(FormEval {
            form: Vector::from_fn(n, |j, _| comps[j].value),
            jacobian: Matrix::from_fn(n, n, |j, k| comps[j].grad[k]),
        })
    }
}

// ---------------------------------------------------------------------------
// Curves

pub trait Curve: Send + Sync {
    fn dim(&self) -> usize;

    /// Parameter interval.
    fn interval(&self) -> (f64, f64);

    /// Highest derivative order available.
    fn smoothness(&self) -> usize;

    /// Per-component jets at `x`.
    fn jets(&self, x: f64, order: usize) -> Result<Vec<Jet1D>>;

    fn point(&self, x: f64) -> Result<Vec<f64>> {
        Ok(self.jets(x, 0)?.iter().map(Jet1D::value).collect())
    }

    fn velocity(&self, x: f64) -> Result<Vec<f64>> {
        Ok(self.jets(x, 1)?.iter().map(|j| j.derivative(1)).collect())
    }
}

pub type CurveRef = Arc<dyn Curve>;

/// Curve with each component a one-variable function of the parameter.
pub struct ComponentCurve {
    comps: Vec<UnivariateRef>,
    interval: (f64, f64),
    smoothness: usize,
}

impl ComponentCurve {
    pub fn new(comps: Vec<UnivariateRef>, interval: (f64, f64)) -> Self {
        Self {
            comps,
            interval,
            smoothness: 8,
        }
    }

    pub fn with_smoothness(mut self, m: usize) -> Self {
        self.smoothness = m;
        self
    }
}

/// `γ(x) = c + x·v`.
pub fn linear_curve(c: &[f64], v: &[f64], interval: (f64, f64)) -> ComponentCurve {
    ComponentCurve::new(
        c.iter()
            .zip(v)
            .map(|(a, b)| Arc::new(Polynomial(vec![*a, *b])) as UnivariateRef)
            .collect(),
        interval,
    )
}

impl Curve for ComponentCurve {
    fn dim(&self) -> usize {
        self.comps.len()
    }
    fn interval(&self) -> (f64, f64) {
        self.interval
    }
    fn smoothness(&self) -> usize {
        self.smoothness
    }
    fn jets(&self, x: f64, order: usize) -> Result<Vec<Jet1D>> {
        if order > self.smoothness {
            return Err(Error::InsufficientJetOrder {
                needed: order,
                got: self.smoothness,
            });
        }
        self.comps.iter().map(|c| c.jet(x, order)).collect()
    }
}
