//! From an initial curve to solutions `u(x, t₁…tₙ₋₁)` of `u_{tᵢ} = Aᵢ(u)u_x`.
//!
//! The pipeline:
//!
//! 1. along the curve solve `Ω(γ(x))ξ = eₙ`, where the rows of `Ω` are the hierarchy's forms;
//! 2. expand `ξ` in the Krylov basis of `(L(γ), γ′)`, giving `M̂ = Σ cₖLᵏ` with `M̂γ′ = ξ`;
//! 3. read off the block functions of a symmetry `M` agreeing with `M̂` on the curve and
//!    extend it off the curve;
//! 4. integrate `dgᵢ = M*ωᵢ` from `γ(0)` and solve
//!    `g₁ = tₙ₋₁, …, gₙ₋₁ = t₁, gₙ = x` by Newton's method.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::calculus::{pullback_eval, residual_scale, symmetry_residual_eval, PASS_REL};
use crate::error::{Error, Result};
use crate::fields::{Block, BlockSpec, CurveRef, FormEval, OperatorField, OperatorRef, UnivariateRef};
use crate::hierarchy::{integrate_staircase, lattice, Hierarchy, CHAIN_REL_TOL};
use crate::hydro::{GridAxis, SolutionGrid};
use crate::jordan::{compose_symmetry, function_series, BlockFunctions};
use crate::linalg::{self, max_abs, Matrix, Vector};
use crate::quadrature::DEFAULT_ABS_TOL;
use crate::spline::{CubicSpline, SPLINE_MAX_ORDER};

/// `ξ(x)` and the condition number of the hierarchy matrix it was solved from.
#[derive(Debug, Clone, PartialEq)]
pub struct XiSample {
    pub xi: Vector,
    pub condition: f64,
}

/// Solves `Ω(γ(x)) ξ = eₙ`.
pub fn xi_on_curve(h: &Hierarchy, curve: &dyn crate::fields::Curve, x: f64) -> Result<XiSample> {
    let p = curve.point(x)?;
    let omega = h.matrix(&p)?;
    let n = omega.ncols();
    if omega.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: omega.nrows(),
        });
    }
    let mut rhs = Vector::zeros(n);
    rhs[n - 1] = 1.0;
    let xi = linalg::solve(&omega, &rhs).ok_or(Error::SingularHierarchyMatrix)?;
    Ok(XiSample {
        xi,
        condition: linalg::condition_number(&omega),
    })
}

/// Everything known at one parameter value of the curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveFrame {
    pub x: f64,
    pub point: Vec<f64>,
    pub velocity: Vector,
    pub xi: Vector,
    /// Coefficients of `M̂ = Σ cₖLᵏ`, `k = 0…n−1`.
    pub c: Vec<f64>,
    pub mhat: Matrix,
    /// `‖M̂γ′ − ξ‖∞`.
    pub residual: f64,
}

/// `M̂(γ(x))` from `krylov(L, γ′)·c = ξ`.
pub fn mhat_on_curve(l: &dyn OperatorField, curve: &dyn crate::fields::Curve, x: f64, xi: &Vector) -> Result<CurveFrame> {
    let point = curve.point(x)?;
    let velocity = Vector::from_vec(curve.velocity(x)?);
    let lv = l.value(&point)?;
    if !linalg::is_cyclic(&lv, &velocity) {
        return Err(Error::NotCyclicVelocity { x });
    }
    let k = linalg::krylov(&lv, &velocity);
    let c = linalg::solve(&k, xi).ok_or(Error::NotCyclicVelocity { x })?;
    let n = lv.nrows();
    let pw = linalg::powers(&lv, n);
    let mut mhat = Matrix::zeros(n, n);
    for (ck, p) in c.iter().zip(&pw) {
        mhat += p * *ck;
    }
    let residual = (&mhat * &velocity - xi).amax();
    Ok(CurveFrame {
        x,
        point,
        velocity,
        xi: xi.clone(),
        c: c.iter().copied().collect(),
        mhat,
        residual,
    })
}

/// Source of `ξ(x)` along the curve.
pub type XiFn<'a> = dyn Fn(f64) -> Result<Vector> + Sync + 'a;

/// Frames at `m` equally spaced parameters of `interval`, computed in parallel.
pub fn sample_frames(l: &dyn OperatorField, curve: &dyn crate::fields::Curve, xi: &XiFn, interval: (f64, f64), m: usize) -> Result<Vec<CurveFrame>> {
    let xs = GridAxis::new(interval.0, interval.1, m).nodes();
    xs.par_iter().map(|&x| mhat_on_curve(l, curve, x, &xi(x)?)).collect()
}

// ---------------------------------------------------------------------------
// Block functions

/// Sampled functions of one block, `[f₁, …, f_k]` (a single entry for 1×1 blocks), each a
/// spline in the coordinate `u^coordinate`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedBlock {
    pub coordinate: usize,
    pub jordan: bool,
    pub functions: Vec<CubicSpline>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedSymmetryData {
    pub blocks: Vec<ExtractedBlock>,
    pub frames: Vec<CurveFrame>,
    pub interval: (f64, f64),
}

impl ExtractedSymmetryData {
    pub fn samples(&self) -> usize {
        self.frames.len()
    }

    pub fn block_functions(&self) -> Vec<BlockFunctions> {
        self.blocks
            .iter()
            .map(|b| {
                let fs: Vec<UnivariateRef> = b
                    .functions
                    .iter()
                    .map(|s| Arc::new(s.clone()) as UnivariateRef)
                    .collect();
                if b.jordan {
                    BlockFunctions::Jordan(fs)
                } else {
                    BlockFunctions::Diagonal(fs[0].clone())
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractionOptions {
    pub initial_samples: usize,
    pub max_samples: usize,
    /// Relative agreement required between successive sample densities.
    pub consistency_tol: f64,
}

impl Default for ExtractionOptions {
    fn default() -> Self {
        Self {
            initial_samples: 33,
            max_samples: 4097,
            consistency_tol: 1e-6,
        }
    }
}

fn check_monotone(frames: &[CurveFrame], coord: usize, block: usize) -> Result<()> {
    let sign = frames[0].velocity[coord].signum();
    let monotone = sign != 0.0
        && frames.iter().all(|f| f.velocity[coord].signum() == sign)
        && frames
            .windows(2)
            .all(|w| (w[1].point[coord] - w[0].point[coord]) * sign > 0.0);
    if monotone {
        Ok(())
    } else {
        Err(Error::NonMonotoneEigenvalueCoordinate { block })
    }
}

/// `[λʳ] f(s + λu^{k−1} + …)` for the block coordinates `u` (`s = uᵏ`).
fn composed_coefficient(f: &CubicSpline, u: &[f64], r: usize) -> Result<f64> {
    let k = u.len();
    Ok(function_series(f, &u[k - 1 - r..], 0)?[r])
}

/// Block functions read off sampled frames.
pub fn extract_from_frames(spec: &BlockSpec, frames: &[CurveFrame]) -> Result<Vec<ExtractedBlock>> {
    let offsets = spec.offsets();
    let mut out = Vec::with_capacity(spec.len());
    for (b, block) in spec.blocks.iter().enumerate() {
        let coord = spec.eigen_coordinate_index(b);
        check_monotone(frames, coord, b)?;
        let s: Vec<f64> = frames.iter().map(|f| f.point[coord]).collect();
        let o = offsets[b];
        match block {
            Block::Diagonal1(_) => {
                let table: Vec<f64> = frames.iter().map(|f| f.mhat[(o, o)]).collect();
                out.push(ExtractedBlock {
                    coordinate: coord,
                    jordan: false,
                    functions: vec![CubicSpline::new(&s, &table)?],
                });
            }
            Block::JordanToeplitz(k) => {
                let k = *k;
                if k - 1 > SPLINE_MAX_ORDER {
                    return Err(Error::SmoothnessDeficit(format!(
                        "a {k}x{k} block needs derivatives of order {} along the curve",
                        k - 1
                    )));
                }
                // fs[i] holds f_{k−i}.
                let mut fs: Vec<CubicSpline> = Vec::with_capacity(k);
                for j in 0..k {
                    let table = frames
                        .iter()
                        .map(|f| {
                            let u = &f.point[o..o + k];
                            let mut v = f.mhat[(o, o + j)];
                            for (i, fi) in fs.iter().enumerate() {
                                v -= composed_coefficient(fi, u, j - i)?;
                            }
                            Ok(v)
                        })
                        .collect::<Result<Vec<f64>>>()?;
                    fs.push(CubicSpline::new(&s, &table)?);
                }
                fs.reverse();
                out.push(ExtractedBlock {
                    coordinate: coord,
                    jordan: true,
                    functions: fs,
                });
            }
        }
    }
    Ok(out)
}

/// Largest relative disagreement between two extractions at the knots of `fine`, comparing
/// the derivatives of `fᵢ` up to order `i − 1`.
fn consistency(coarse: &[ExtractedBlock], fine: &[ExtractedBlock]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (cb, fb) in coarse.iter().zip(fine) {
        for (i, (cf, ff)) in cb.functions.iter().zip(&fb.functions).enumerate() {
            let orders = if cb.jordan { i + 1 } else { 1 };
            let scale = 1.0 + ff.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
            for &s in ff.knots() {
                let (dc, df) = (cf.derivatives(s)?, ff.derivatives(s)?);
                for r in 0..orders {
                    worst = worst.max((dc[r] - df[r]).abs() / scale);
                }
            }
        }
    }
    Ok(worst)
}

fn interleave(coarse: Vec<CurveFrame>, mids: Vec<CurveFrame>) -> Vec<CurveFrame> {
    let mut out = Vec::with_capacity(coarse.len() + mids.len());
    let mut mids = mids.into_iter();
    for f in coarse {
        out.push(f);
        if let Some(m) = mids.next() {
            out.push(m);
        }
    }
    out
}

/// Samples frames over `interval`, extracts block functions and doubles the sample
/// density until two successive extractions agree.
pub fn extract_block_functions(
    spec: &BlockSpec,
    l: &dyn OperatorField,
    curve: &dyn crate::fields::Curve,
    xi: &XiFn,
    interval: (f64, f64),
    opts: &ExtractionOptions,
) -> Result<ExtractedSymmetryData> {
    if spec.dim() != curve.dim() || l.dim() != curve.dim() {
        return Err(Error::DimensionMismatch {
            expected: l.dim(),
            got: curve.dim(),
        });
    }
    let needed = spec.blocks.iter().map(Block::size).max().unwrap_or(1);
    if needed - 1 > SPLINE_MAX_ORDER {
        return Err(Error::SmoothnessDeficit(format!(
            "a {needed}x{needed} block needs derivatives of order {} along the curve",
            needed - 1
        )));
    }
    if curve.smoothness() < needed {
        return Err(Error::SmoothnessDeficit(format!(
            "curve has {} derivatives, blocks of size {needed} need {needed}",
            curve.smoothness()
        )));
    }
    let mut m = opts.initial_samples.max(4);
    let mut frames = sample_frames(l, curve, xi, interval, m)?;
    let mut blocks = extract_from_frames(spec, &frames)?;
    loop {
        let fine_m = 2 * m - 1;
        if fine_m > opts.max_samples {
            return Err(Error::SmoothnessDeficit(format!(
                "block functions not resolved with {m} samples"
            )));
        }
        let h = (interval.1 - interval.0) / (m - 1) as f64;
        let mids = sample_frames(l, curve, xi, (interval.0 + 0.5 * h, interval.1 - 0.5 * h), m - 1)?;
        let fine_frames = interleave(frames, mids);
        let fine_blocks = extract_from_frames(spec, &fine_frames)?;
        let diff = consistency(&blocks, &fine_blocks)?;
        frames = fine_frames;
        blocks = fine_blocks;
        m = fine_m;
        if diff <= opts.consistency_tol {
            return Ok(ExtractedSymmetryData {
                blocks,
                frames,
                interval,
            });
        }
    }
}

/// The block-diagonal symmetry built from the extracted functions.
pub fn extend_symmetry(data: &ExtractedSymmetryData, spec: &BlockSpec) -> Result<OperatorRef> {
    Ok(Arc::new(compose_symmetry(spec, &data.block_functions())?))
}

/// `max ‖M(γ(x))γ′(x) − ξ(x)‖∞ / (1 + ‖ξ(x)‖∞)` over the frames.
pub fn extension_residual(m: &dyn OperatorField, frames: &[CurveFrame]) -> Result<f64> {
    frames.iter().try_fold(0.0f64, |acc, f| {
        let r = (m.value(&f.point)? * &f.velocity - &f.xi).amax() / (1.0 + f.xi.amax());
        Ok(acc.max(r))
    })
}

// ---------------------------------------------------------------------------
// The g-hierarchy

/// Potentials `g₁…gₙ` of `dgᵢ = M*ωᵢ`, vanishing at `base`.
#[derive(Clone)]
pub struct GHierarchy {
    m: OperatorRef,
    h: Hierarchy,
    base: Vec<f64>,
    tol: f64,
}

impl GHierarchy {
    /// No closedness check.
    pub fn new_unchecked(m: OperatorRef, h: Hierarchy, base: Vec<f64>) -> Self {
        Self {
            m,
            h,
            base,
            tol: DEFAULT_ABS_TOL,
        }
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn dim(&self) -> usize {
        self.base.len()
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    pub fn symmetry(&self) -> &OperatorRef {
        &self.m
    }

    /// Rows `dgᵢ(u) = (M*ωᵢ)(u)`, i.e. `Ω(u)M(u)`.
    pub fn differentials(&self, u: &[f64]) -> Result<Matrix> {
        Ok(self.h.matrix(u)? * self.m.value(u)?)
    }

    pub fn values(&self, u: &[f64]) -> Result<Vector> {
        integrate_staircase(&|v: &[f64]| self.differentials(v), &self.base, u, self.tol)
    }

    pub fn eval(&self, u: &[f64]) -> Result<(Vector, Matrix)> {
        Ok((self.values(u)?, self.differentials(u)?))
    }
}

/// Checks that `M` is a symmetry of `L` and that each `M*ωᵢ` is closed on the lattice of
/// `[lo, hi]`, then anchors the potentials at `base`.
pub fn build_g_hierarchy(m: OperatorRef, l: &dyn OperatorField, h: Hierarchy, base: &[f64], lo: &[f64], hi: &[f64]) -> Result<GHierarchy> {
    for p in lattice(lo, hi) {
        let (le, me) = (l.eval(&p)?, m.eval(&p)?);
        let residual = symmetry_residual_eval(&le, &me)?;
        if residual > PASS_REL * residual_scale(&le, &me) {
            return Err(Error::NotASymmetry { residual });
        }
        for w in h.evals(&p)? {
            let pulled: FormEval = pullback_eval(&me, &w);
            let residual = pulled.closedness_residual();
            let tolerance = CHAIN_REL_TOL * (1.0 + max_abs(&pulled.jacobian)) * (1.0 + me.max_partial());
            if residual > tolerance {
                return Err(Error::NotClosed { residual, tolerance });
            }
        }
    }
    Ok(GHierarchy::new_unchecked(m, h, base.to_vec()))
}

/// Worst deviations of `gᵢ(γ(x)) = δᵢₙx` and `dgᵢ(γ′(x)) = δᵢₙ` over `xs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnCurveReport {
    pub value_residual: f64,
    pub derivative_residual: f64,
}

pub fn check_on_curve(g: &GHierarchy, curve: &dyn crate::fields::Curve, xs: &[f64]) -> Result<OnCurveReport> {
    let n = g.dim();
    let mut report = OnCurveReport {
        value_residual: 0.0,
        derivative_residual: 0.0,
    };
    for &x in xs {
        let (vals, d) = g.eval(&curve.point(x)?)?;
        let dx = d * Vector::from_vec(curve.velocity(x)?);
        for i in 0..n {
            let target = if i + 1 == n { 1.0 } else { 0.0 };
            report.value_residual = report.value_residual.max((vals[i] - target * x).abs());
            report.derivative_residual = report.derivative_residual.max((dx[i] - target).abs());
        }
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Newton

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iterations: usize,
    pub max_backtracks: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-11,
            max_iterations: 50,
            max_backtracks: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOutcome {
    pub u: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Right-hand side `(tₙ₋₁, …, t₁, x)` for `(g₁, …, gₙ)`.
pub fn solve_target(t: &[f64], x: f64) -> Vector {
    let n = t.len() + 1;
    Vector::from_fn(n, |i, _| if i + 1 == n { x } else { t[n - 2 - i] })
}

/// Solves `g₁ = tₙ₋₁, …, gₙ₋₁ = t₁, gₙ = x` by damped Newton iteration from `guess`.
pub fn solve_point(g: &GHierarchy, t: &[f64], x: f64, guess: &[f64], opts: &NewtonOptions) -> Result<NewtonOutcome> {
    if t.len() + 1 != g.dim() || guess.len() != g.dim() {
        return Err(Error::DimensionMismatch {
            expected: g.dim(),
            got: t.len() + 1,
        });
    }
    let target = solve_target(t, x);
    let diverged = |u: &Vector, r: f64| Error::NewtonDiverged {
        iterate: u.iter().copied().collect(),
        residual: r,
    };
    let mut u = Vector::from_column_slice(guess);
    let (vals, mut jac) = g.eval(u.as_slice())?;
    let mut res = vals - &target;
    let mut r = res.amax();
    for iteration in 0..=opts.max_iterations {
        if r < opts.tol {
            return Ok(NewtonOutcome {
                u: u.iter().copied().collect(),
                residual: r,
                iterations: iteration,
            });
        }
        if iteration == opts.max_iterations {
            break;
        }
        let step = linalg::solve(&jac, &(-&res)).ok_or_else(|| diverged(&u, r))?;
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_backtracks {
            let cand = &u + &step * lambda;
            if let Ok((v, j)) = g.eval(cand.as_slice()) {
                let cres = v - &target;
                let cr = cres.amax();
                if cr.is_finite() && (cr < r || cr < opts.tol) {
                    accepted = Some((cand, cres, cr, j));
                    break;
                }
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((cand, cres, cr, j)) => {
                u = cand;
                res = cres;
                r = cr;
                jac = j;
            }
            None => return Err(diverged(&u, r)),
        }
    }
    Err(diverged(&u, r))
}

// ---------------------------------------------------------------------------
// The assembled pipeline

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub extraction: ExtractionOptions,
    pub newton: NewtonOptions,
    /// Per-leg absolute tolerance of the `g` integrals.
    pub quad_tol: f64,
    /// Relative tolerance for `M(γ)γ′ = ξ`.
    pub extension_tol: f64,
    /// Tolerance for the on-curve normalization of the `gᵢ`.
    pub on_curve_tol: f64,
    /// Parameter interval sampled for the extraction; the curve's own interval if `None`.
    pub sample_interval: Option<(f64, f64)>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            extraction: ExtractionOptions::default(),
            newton: NewtonOptions::default(),
            quad_tol: DEFAULT_ABS_TOL,
            extension_tol: 1e-6,
            on_curve_tol: 1e-6,
            sample_interval: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineReport {
    pub samples: usize,
    pub max_xi_condition: f64,
    pub max_krylov_residual: f64,
    pub extension_residual: f64,
    pub on_curve: OnCurveReport,
    pub build_seconds: f64,
}

/// Steps 1–4 for a block operator, a curve and a regular hierarchy.
pub struct Pipeline {
    spec: BlockSpec,
    l: OperatorRef,
    curve: CurveRef,
    data: ExtractedSymmetryData,
    m: OperatorRef,
    g: GHierarchy,
    config: PipelineConfig,
    report: PipelineReport,
}

impl Pipeline {
    pub fn build(spec: BlockSpec, curve: CurveRef, hierarchy: Hierarchy, config: PipelineConfig) -> Result<Self> {
        let start = Instant::now();
        let l: OperatorRef = Arc::new(spec.operator());
        let n = spec.dim();
        if hierarchy.len() != n || hierarchy.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: hierarchy.len(),
            });
        }
        let interval = config.sample_interval.unwrap_or(curve.interval());
        if !(interval.0 <= 0.0 && 0.0 <= interval.1) {
            return Err(Error::OutOfDomain { point: vec![interval.0, interval.1] });
        }
        let xi_fn = |x: f64| xi_on_curve(&hierarchy, curve.as_ref(), x).map(|s| s.xi);
        let data = extract_block_functions(&spec, l.as_ref(), curve.as_ref(), &xi_fn, interval, &config.extraction)?;
        let m = extend_symmetry(&data, &spec)?;
        let extension = extension_residual(m.as_ref(), &data.frames)?;
        if extension > config.extension_tol {
            return Err(Error::CurveConsistency {
                check: "M(gamma) gamma' = xi".into(),
                residual: extension,
            });
        }
        let max_xi_condition = data
            .frames
            .iter()
            .map(|f| xi_on_curve(&hierarchy, curve.as_ref(), f.x).map(|s| s.condition))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        let max_krylov_residual = data.frames.iter().map(|f| f.residual).fold(0.0, f64::max);

        let base = curve.point(0.0)?;
        let (mut lo, mut hi) = (base.clone(), base.clone());
        for f in &data.frames {
            for i in 0..n {
                lo[i] = lo[i].min(f.point[i]);
                hi[i] = hi[i].max(f.point[i]);
            }
        }
        let g = build_g_hierarchy(m.clone(), l.as_ref(), hierarchy, &base, &lo, &hi)?.with_tolerance(config.quad_tol);
        let check_xs = GridAxis::new(interval.0, interval.1, 17).nodes();
        let on_curve = check_on_curve(&g, curve.as_ref(), &check_xs)?;
        if on_curve.value_residual > config.on_curve_tol || on_curve.derivative_residual > config.on_curve_tol {
            return Err(Error::CurveConsistency {
                check: "g_i(gamma(x)) = delta_in x".into(),
                residual: on_curve.value_residual.max(on_curve.derivative_residual),
            });
        }
        let report = PipelineReport {
            samples: data.samples(),
            max_xi_condition,
            max_krylov_residual,
            extension_residual: extension,
            on_curve,
            build_seconds: start.elapsed().as_secs_f64(),
        };
        Ok(Self {
            spec,
            l,
            curve,
            data,
            m,
            g,
            config,
            report,
        })
    }

    pub fn spec(&self) -> &BlockSpec {
        &self.spec
    }

    pub fn operator(&self) -> &OperatorRef {
        &self.l
    }

    pub fn curve(&self) -> &CurveRef {
        &self.curve
    }

    pub fn data(&self) -> &ExtractedSymmetryData {
        &self.data
    }

    pub fn symmetry(&self) -> &OperatorRef {
        &self.m
    }

    pub fn g(&self) -> &GHierarchy {
        &self.g
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn report(&self) -> &PipelineReport {
        &self.report
    }

    pub fn solve_point(&self, t: &[f64], x: f64, guess: &[f64]) -> Result<NewtonOutcome> {
        solve_point(&self.g, t, x, guess, &self.config.newton)
    }
}

/// Order in which the `t`-lattice is visited: outward from the node closest to `t = 0`,
/// by total index distance and then lexicographically in the per-axis distances. Each
/// entry carries the already visited neighbour used as the Newton guess.
fn continuation_order(axes: &[Vec<f64>]) -> Vec<(Vec<usize>, Option<Vec<usize>>)> {
    let origin: Vec<usize> = axes
        .iter()
        .map(|a| {
            (0..a.len())
                .min_by(|&i, &j| a[i].abs().total_cmp(&a[j].abs()))
                .unwrap_or(0)
        })
        .collect();
    let total: usize = axes.iter().map(Vec::len).product();
    let mut nodes: Vec<Vec<usize>> = (0..total)
        .map(|mut flat| {
            let mut m = vec![0; axes.len()];
            for a in (0..axes.len()).rev() {
                m[a] = flat % axes[a].len();
                flat /= axes[a].len();
            }
            m
        })
        .collect();
    let dist = |m: &Vec<usize>| -> Vec<usize> { m.iter().zip(&origin).map(|(i, o)| i.abs_diff(*o)).collect() };
    nodes.sort_by_key(|m| {
        let d = dist(m);
        (d.iter().sum::<usize>(), d, m.clone())
    });
    nodes
        .into_iter()
        .map(|m| {
            let prev = (0..m.len()).find(|&a| m[a] != origin[a]).map(|a| {
                let mut p = m.clone();
                if p[a] > origin[a] {
                    p[a] -= 1;
                } else {
                    p[a] += 1;
                }
                p
            });
            (m, prev)
        })
        .collect()
}

/// Solves on the tensor grid `t₁ × … × tₙ₋₁ × x`, in parallel across `x`. Nodes where Newton
/// fails keep their last iterate and are flagged as not converged.
pub fn solve_grid(p: &Pipeline, x_axis: &GridAxis, t_axes: &[GridAxis]) -> Result<SolutionGrid> {
    let n = p.spec.dim();
    if t_axes.len() + 1 != n {
        return Err(Error::DimensionMismatch {
            expected: n - 1,
            got: t_axes.len(),
        });
    }
    let xs = x_axis.nodes();
    let ts: Vec<Vec<f64>> = t_axes.iter().map(GridAxis::nodes).collect();
    let order = continuation_order(&ts);
    let mut grid = SolutionGrid::empty(xs.clone(), ts.clone(), n);
    let t_shape: Vec<usize> = ts.iter().map(Vec::len).collect();
    let t_index = |m: &[usize]| m.iter().zip(&t_shape).fold(0, |acc, (i, len)| acc * len + i);
    let t_count: usize = t_shape.iter().product();

    type NodeResult = (Vec<f64>, bool, f64);
    let lines: Vec<Vec<NodeResult>> = xs
        .par_iter()
        .map(|&x| -> Result<Vec<NodeResult>> {
            let start = p.curve.point(x)?;
            let mut line: Vec<Option<NodeResult>> = vec![None; t_count];
            for (m, prev) in &order {
                let t: Vec<f64> = m.iter().enumerate().map(|(a, i)| ts[a][*i]).collect();
                let guess = match prev {
                    Some(q) => match &line[t_index(q)] {
                        Some((u, true, _)) => u.clone(),
                        _ => start.clone(),
                    },
                    None => start.clone(),
                };
                let node = match p.solve_point(&t, x, &guess) {
                    Ok(o) => (o.u, true, o.residual),
                    Err(Error::NewtonDiverged { iterate, residual }) => (iterate, false, residual),
                    Err(_) => (guess, false, f64::NAN),
                };
                line[t_index(m)] = Some(node);
            }
            Ok(line.into_iter().map(|r| r.expect("every node visited")).collect())
        })
        .collect::<Result<_>>()?;

    for (ix, line) in lines.into_iter().enumerate() {
        for (it, (u, ok, r)) in line.into_iter().enumerate() {
            let flat = it * xs.len() + ix;
            grid.values[flat] = u;
            grid.converged[flat] = ok;
            grid.newton_residuals[flat] = r;
        }
    }
    grid.metadata.insert("operator".into(), format!("{:?}", p.spec.blocks));
    grid.metadata.insert("samples".into(), p.report.samples.to_string());
    Ok(grid)
}
