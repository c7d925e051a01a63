//! Hierarchies of conservation laws, pullbacks, path integration of closed 1-forms and
//! companion-coordinate checks.

use std::sync::Arc;

use crate::calculus::{self, commutant_coeff_partials, pullback_eval};
use crate::error::{Error, Result};
use crate::fields::{
    differential, FormEval, FormRef, OneFormField, OperatorEval, OperatorField, OperatorRef,
    ScalarEval, ScalarField, ScalarRef,
};
use crate::linalg::{self, max_abs, Matrix, Vector};
use crate::quadrature::{self, DEFAULT_ABS_TOL, DEFAULT_MAX_INTERVALS};

/// Relative tolerance for hierarchy chains and closedness checks.
pub const CHAIN_REL_TOL: f64 = 1e-8;

/// Lattice points per axis for the closedness pre-check.
const LATTICE_PER_AXIS: usize = 5;
const LATTICE_CAP: usize = 100_000;

/// An ordered list of closed 1-forms `ω₁…ωₙ` with `L*ωᵢ = ωᵢ₊₁`, optionally with
/// potentials and the base point they are anchored at.
#[derive(Clone)]
pub struct Hierarchy {
    forms: Vec<FormRef>,
    potentials: Option<Vec<ScalarRef>>,
    base: Option<Vec<f64>>,
}

impl Hierarchy {
    pub fn new(forms: Vec<FormRef>, potentials: Option<Vec<ScalarRef>>, base: Option<Vec<f64>>) -> Self {
        Self {
            forms,
            potentials,
            base,
        }
    }

    /// `ωᵢ = dfᵢ`.
    pub fn from_potentials(potentials: Vec<ScalarRef>, base: Option<Vec<f64>>) -> Self {
        let forms = potentials.iter().map(|f| differential(f.clone())).collect();
        Self::new(forms, Some(potentials), base)
    }

    pub fn dim(&self) -> usize {
        self.forms[0].dim()
    }

    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }

    pub fn forms(&self) -> &[FormRef] {
        &self.forms
    }

    pub fn potentials(&self) -> Option<&[ScalarRef]> {
        self.potentials.as_deref()
    }

    pub fn base(&self) -> Option<&[f64]> {
        self.base.as_deref()
    }

    pub fn evals(&self, u: &[f64]) -> Result<Vec<FormEval>> {
        self.forms.iter().map(|w| w.eval(u)).collect()
    }

    /// Matrix with rows `ωᵢ(u)`.
    pub fn matrix(&self, u: &[f64]) -> Result<Matrix> {
        let n = self.dim();
        let mut m = Matrix::zeros(self.len(), n);
        for (i, w) in self.forms.iter().enumerate() {
            m.set_row(i, &w.form(u)?.transpose());
        }
        Ok(m)
    }

    /// `maxᵢ ‖L*ωᵢ − ωᵢ₊₁‖∞`.
    pub fn chain_residual(&self, l: &dyn OperatorField, u: &[f64]) -> Result<f64> {
        let le = l.eval(u)?;
        let evals = self.evals(u)?;
        Ok(chain_residual_eval(&le, &evals))
    }

    /// `maxᵢ` closedness residual of `ωᵢ`.
    pub fn closedness_residual(&self, u: &[f64]) -> Result<f64> {
        Ok(self
            .evals(u)?
            .iter()
            .map(FormEval::closedness_residual)
            .fold(0.0, f64::max))
    }

    /// Raises [`Error::NotAHierarchy`] if the chain fails at any probe.
    pub fn check_chain(&self, l: &dyn OperatorField, probes: &[Vec<f64>]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for u in probes {
            let le = l.eval(u)?;
            let evals = self.evals(u)?;
            let r = chain_residual_eval(&le, &evals);
            let scale = (1.0 + max_abs(&le.value))
                * (1.0 + evals.iter().map(|e| e.form.amax()).fold(0.0, f64::max));
            if r > CHAIN_REL_TOL * scale {
                return Err(Error::NotAHierarchy { residual: r });
            }
            worst = worst.max(r);
        }
        Ok(worst)
    }
}

pub(crate) fn chain_residual_eval(l: &OperatorEval, evals: &[FormEval]) -> f64 {
    let lt = l.value.transpose();
    evals
        .windows(2)
        .map(|w| (&lt * &w[0].form - &w[1].form).amax())
        .fold(0.0, f64::max)
}

/// The 1-form `L*ω`.
pub struct Pullback {
    l: OperatorRef,
    w: FormRef,
}

impl OneFormField for Pullback {
    fn dim(&self) -> usize {
        self.w.dim()
    }
    fn eval(&self, u: &[f64]) -> Result<FormEval> {
        Ok(pullback_eval(&self.l.eval(u)?, &self.w.eval(u)?))
    }
}

pub fn pullback(l: OperatorRef, w: FormRef) -> FormRef {
    Arc::new(Pullback { l, w })
}

/// Integral of several 1-forms along the staircase path from `base` to `u`, the legs
/// moving the coordinates in the order given by `legs`. `forms(v)` returns the matrix whose
/// rows are the forms at `v`.
pub fn integrate_staircase_ordered<F>(forms: &F, base: &[f64], u: &[f64], legs: &[usize], tol: f64) -> Result<Vector>
where
    F: Fn(&[f64]) -> Result<Matrix> + ?Sized,
{
    let mut point = base.to_vec();
    let mut total: Option<Vector> = None;
    for &axis in legs {
        let (a, b) = (base[axis], u[axis]);
        if a != b {
            let mut v = point.clone();
            let leg = quadrature::integrate(
                |s| {
                    v[axis] = s;
                    Ok(forms(&v)?.column(axis).into_owned())
                },
                a,
                b,
                tol,
                DEFAULT_MAX_INTERVALS,
            )?;
            total = Some(match total {
                Some(t) => t + leg,
                None => leg,
            });
        }
        point[axis] = b;
    }
    match total {
        Some(t) => Ok(t),
        None => Ok(Vector::zeros(forms(base)?.nrows())),
    }
}

/// Staircase integral with legs in coordinate order `u¹, u², …`.
pub fn integrate_staircase<F>(forms: &F, base: &[f64], u: &[f64], tol: f64) -> Result<Vector>
where
    F: Fn(&[f64]) -> Result<Matrix> + ?Sized,
{
    let legs: Vec<usize> = (0..base.len()).collect();
    integrate_staircase_ordered(forms, base, u, &legs, tol)
}

fn single_form_matrix(w: &dyn OneFormField) -> impl Fn(&[f64]) -> Result<Matrix> + '_ {
    move |v: &[f64]| {
        let f = w.form(v)?;
        Ok(Matrix::from_row_slice(1, f.len(), f.as_slice()))
    }
}

/// Lattice points of the box `[lo, hi]`, `5ⁿ` of them (fewer per axis for large `n`).
pub fn lattice(lo: &[f64], hi: &[f64]) -> Vec<Vec<f64>> {
    let n = lo.len();
    let mut per_axis = LATTICE_PER_AXIS;
    while per_axis > 2 && per_axis.pow(n as u32) > LATTICE_CAP {
        per_axis -= 1;
    }
    let total = per_axis.pow(n as u32);
    (0..total)
        .map(|mut idx| {
            (0..n)
                .map(|a| {
                    let t = (idx % per_axis) as f64 / (per_axis - 1) as f64;
                    idx /= per_axis;
                    lo[a] + t * (hi[a] - lo[a])
                })
                .collect()
        })
        .collect()
}

/// Maximum closedness residual of `ω` on the lattice of the box, and the scale it is
/// measured against.
pub fn closedness_on_box(w: &dyn OneFormField, lo: &[f64], hi: &[f64]) -> Result<(f64, f64)> {
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 1.0;
    for p in lattice(lo, hi) {
        let e = w.eval(&p)?;
        worst = worst.max(e.closedness_residual());
        scale = scale.max(1.0 + max_abs(&e.jacobian));
    }
    Ok((worst, scale))
}

fn bounding_box(a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (
        a.iter().zip(b).map(|(x, y)| x.min(*y)).collect(),
        a.iter().zip(b).map(|(x, y)| x.max(*y)).collect(),
    )
}

/// `∫ ω` from `base` to `u` along the staircase path, after checking closedness on a
/// lattice over the path's bounding box.
pub fn integrate_closed_1form(w: &dyn OneFormField, base: &[f64], u: &[f64], tol: f64) -> Result<f64> {
    let (lo, hi) = bounding_box(base, u);
    let (residual, scale) = closedness_on_box(w, &lo, &hi)?;
    let tolerance = CHAIN_REL_TOL * scale;
    if residual > tolerance {
        return Err(Error::NotClosed { residual, tolerance });
    }
    Ok(integrate_staircase(&single_form_matrix(w), base, u, tol)?[0])
}

/// Potential of a closed 1-form anchored at `base` (value 0 there), evaluated by
/// staircase integration. Gradient and Hessian come from the form itself.
pub struct PathPotential {
    form: FormRef,
    base: Vec<f64>,
    tol: f64,
}

impl PathPotential {
    pub fn new(form: FormRef, base: Vec<f64>) -> Self {
        Self {
            form,
            base,
            tol: DEFAULT_ABS_TOL,
        }
    }
}

impl ScalarField for PathPotential {
    fn dim(&self) -> usize {
        self.form.dim()
    }
    fn eval(&self, u: &[f64]) -> Result<ScalarEval> {
        let e = self.form.eval(u)?;
        let value = integrate_staircase(&single_form_matrix(self.form.as_ref()), &self.base, u, self.tol)?[0];
        Ok(ScalarEval {
            value,
            grad: e.form,
            hess: e.jacobian,
        })
    }
}

fn seed_probes(p: &[f64], r: f64) -> Vec<Vec<f64>> {
    let mut out = vec![p.to_vec()];
    for i in 0..p.len() {
        for s in [-r, r] {
            let mut q = p.to_vec();
            q[i] += s;
            out.push(q);
        }
    }
    out
}

/// `ωᵢ = (L*)ⁱ⁻¹df` with potentials integrated from `p` (all vanishing at `p`).
pub fn hierarchy_from_seed(l: OperatorRef, f: ScalarRef, p: &[f64]) -> Result<Hierarchy> {
    let n = l.dim();
    for q in seed_probes(p, 0.05) {
        let le = l.eval(&q)?;
        let fe: FormEval = f.eval(&q)?.into();
        let residual = calculus::conservation_law_residual_eval(&le, &fe);
        let scale = (1.0 + max_abs(&le.value)) * (1.0 + le.max_partial()) * (1.0 + fe.form.amax() + max_abs(&fe.jacobian));
        if residual > CHAIN_REL_TOL * scale {
            return Err(Error::NotAConservationLaw { residual });
        }
    }
    let mut forms: Vec<FormRef> = vec![differential(f)];
    for _ in 1..n {
        let last = forms.last().expect("non-empty").clone();
        forms.push(pullback(l.clone(), last));
    }
    let potentials = forms
        .iter()
        .map(|w| Arc::new(PathPotential::new(w.clone(), p.to_vec())) as ScalarRef)
        .collect();
    Ok(Hierarchy::new(forms, Some(potentials), Some(p.to_vec())))
}

/// The differentials of the hierarchy are linearly independent at `u`.
pub fn is_regular_hierarchy(h: &Hierarchy, u: &[f64]) -> Result<bool> {
    Ok(linalg::is_nonsingular(&h.matrix(u)?))
}

/// Deviation of a coordinate change from a companion layout.
#[derive(Debug, Clone, PartialEq)]
pub struct CompanionReport {
    /// Largest deviation of the entries fixed to 0 or 1 by the layout.
    pub structural_deviation: f64,
    /// Largest deviation of the `σ` row/column from the characteristic coefficients.
    pub sigma_deviation: f64,
    /// Number of points checked.
    pub points: usize,
}

fn companion_probes(p: &[f64]) -> Vec<Vec<f64>> {
    seed_probes(p, 0.05)
}

fn transform(j: &Matrix, l: &Matrix) -> Result<Matrix> {
    if !linalg::is_nonsingular(j) {
        return Err(Error::NotRegular);
    }
    let inv = j.clone().try_inverse().ok_or(Error::NotRegular)?;
    Ok(j * l * inv)
}

fn comp1_deviation(lt: &Matrix, sigma: &linalg::SigmaCoefficients) -> (f64, f64) {
    let n = lt.nrows();
    let mut structural: f64 = 0.0;
    let mut sig: f64 = 0.0;
    for i in 0..n {
        sig = sig.max((lt[(i, 0)] - sigma.get(i + 1)).abs());
        for j in 1..n {
            let expected = if j == i + 1 { 1.0 } else { 0.0 };
            structural = structural.max((lt[(i, j)] - expected).abs());
        }
    }
    (structural, sig)
}

fn comp2_deviation(lt: &Matrix, sigma: &linalg::SigmaCoefficients) -> (f64, f64) {
    let n = lt.nrows();
    let mut structural: f64 = 0.0;
    let mut sig: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i + 1 == n {
                sig = sig.max((lt[(i, j)] - sigma.get(n - j)).abs());
            } else {
                let expected = if j == i + 1 { 1.0 } else { 0.0 };
                structural = structural.max((lt[(i, j)] - expected).abs());
            }
        }
    }
    (structural, sig)
}

/// Coefficients `g` of a symmetry as first companion coordinates: `J L J⁻¹` with
/// `J = ∂g/∂u` must have the first companion layout. The Jacobian is exact at `p` and
/// by central differences of the pointwise expansion at displaced points.
pub fn first_companion_check(l: &dyn OperatorField, m: &dyn OperatorField, p: &[f64]) -> Result<CompanionReport> {
    let n = l.dim();
    let g_at = |u: &[f64]| -> Result<Vec<f64>> {
        Ok(linalg::commutant_coeffs(&l.value(u)?, &m.value(u)?)?.into_vec())
    };
    let mut report = CompanionReport {
        structural_deviation: 0.0,
        sigma_deviation: 0.0,
        points: 0,
    };
    let mut record = |lt: &Matrix, lv: &Matrix| {
        let (s, g) = comp1_deviation(lt, &linalg::char_poly_sigma(lv));
        report.structural_deviation = report.structural_deviation.max(s);
        report.sigma_deviation = report.sigma_deviation.max(g);
        report.points += 1;
    };

    let le = l.eval(p)?;
    let (_, dg) = commutant_coeff_partials(&le, &m.eval(p)?)?;
    let j = Matrix::from_fn(n, n, |i, k| dg[i][k]);
    record(&transform(&j, &le.value)?, &le.value);

    for q in companion_probes(p).into_iter().skip(1) {
        let h = 1e-5 * (1.0 + q.iter().fold(0.0f64, |a, x| a.max(x.abs())));
        let mut jq = Matrix::zeros(n, n);
        let mut w = q.clone();
        for k in 0..n {
            w[k] = q[k] + h;
            let gp = g_at(&w)?;
            w[k] = q[k] - h;
            let gm = g_at(&w)?;
            w[k] = q[k];
            for i in 0..n {
                jq[(i, k)] = (gp[i] - gm[i]) / (2.0 * h);
            }
        }
        let lv = l.value(&q)?;
        record(&transform(&jq, &lv)?, &lv);
    }
    Ok(report)
}

/// Potentials of a hierarchy as second companion coordinates: `J L J⁻¹` with rows
/// `ωᵢ` must have the second companion layout.
pub fn second_companion_check(l: &dyn OperatorField, h: &Hierarchy, p: &[f64]) -> Result<CompanionReport> {
    let mut report = CompanionReport {
        structural_deviation: 0.0,
        sigma_deviation: 0.0,
        points: 0,
    };
    for q in companion_probes(p) {
        let lv = l.value(&q)?;
        let lt = transform(&h.matrix(&q)?, &lv)?;
        let (s, g) = comp2_deviation(&lt, &linalg::char_poly_sigma(&lv));
        report.structural_deviation = report.structural_deviation.max(s);
        report.sigma_deviation = report.sigma_deviation.max(g);
        report.points += 1;
    }
    Ok(report)
}

/// The operator `L` written in second companion coordinates `x = f(u) − f(p)` of a regular
/// hierarchy with potentials: the second companion layout with `σ` transported to `x`.
/// Points are mapped back by damped Newton iteration started at `p`.
pub struct SecondCompanionChart {
    l: OperatorRef,
    potentials: Vec<ScalarRef>,
    base: Vec<f64>,
    offset: Vec<f64>,
}

impl SecondCompanionChart {
    pub fn new(l: OperatorRef, h: &Hierarchy, p: &[f64]) -> Result<Self> {
        let potentials = h.potentials().ok_or(Error::NotRegular)?.to_vec();
        if !is_regular_hierarchy(h, p)? {
            return Err(Error::NotRegular);
        }
        let offset = potentials.iter().map(|f| f.value(p)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            l,
            potentials,
            base: p.to_vec(),
            offset,
        })
    }

    fn chart(&self, u: &[f64]) -> Result<(Vector, Matrix)> {
        let n = self.base.len();
        let mut val = Vector::zeros(n);
        let mut jac = Matrix::zeros(n, n);
        for (i, f) in self.potentials.iter().enumerate() {
            let e = f.eval(u)?;
            val[i] = e.value - self.offset[i];
            jac.set_row(i, &e.grad.transpose());
        }
        Ok((val, jac))
    }

    /// Original coordinates `u` of the chart point `x`.
    pub fn to_original(&self, x: &[f64]) -> Result<Vec<f64>> {
        let target = Vector::from_column_slice(x);
        let mut u = Vector::from_column_slice(&self.base);
        for _ in 0..50 {
            let (val, jac) = self.chart(u.as_slice())?;
            let r = val - &target;
            if r.amax() < 1e-14 * (1.0 + target.amax()) {
                return Ok(u.as_slice().to_vec());
            }
            let step = jac.lu().solve(&r).ok_or(Error::NotRegular)?;
            // Halve the step until the residual drops.
            let mut lambda = 1.0;
            loop {
                let cand = &u - &step * lambda;
                let reduced = self
                    .chart(cand.as_slice())
                    .map(|(v, _)| (v - &target).amax() < r.amax())
                    .unwrap_or(false);
                if reduced || lambda < 1e-6 {
                    u = cand;
                    break;
                }
                lambda *= 0.5;
            }
        }
        let (val, _) = self.chart(u.as_slice())?;
        let residual = (val - target).amax();
        if residual < 1e-10 {
            Ok(u.as_slice().to_vec())
        } else {
            Err(Error::NewtonDiverged {
                iterate: u.as_slice().to_vec(),
                residual,
            })
        }
    }
}

impl OperatorField for SecondCompanionChart {
    fn dim(&self) -> usize {
        self.base.len()
    }
    fn eval(&self, x: &[f64]) -> Result<OperatorEval> {
        let n = self.dim();
        let u = self.to_original(x)?;
        let le = self.l.eval(&u)?;
        let (sigma, _, dsigma, _) = linalg::sequence_with_partials(&le.value, &le.partials);
        let (_, jac) = self.chart(&u)?;
        let jinv = jac.try_inverse().ok_or(Error::NotRegular)?;
        let mut value = Matrix::zeros(n, n);
        let mut partials = vec![Matrix::zeros(n, n); n];
        for i in 0..n - 1 {
            value[(i, i + 1)] = 1.0;
        }
        for i in 0..n {
            // σᵢ₊₁ sits in the last row, column n−1−i
            let col = n - 1 - i;
            value[(n - 1, col)] = sigma[i];
            for (k, pk) in partials.iter_mut().enumerate() {
                let d: f64 = (0..n).map(|m| dsigma[m][i] * jinv[(m, k)]).sum();
                pk[(n - 1, col)] = d;
            }
        }
        Ok(OperatorEval { value, partials })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real::Real;
    use crate::calculus::torsion;
    use crate::fields::{
        make_companion_second, make_diagonal, make_toeplitz, identity_fn, scalar, Coordinate, DualOneForm,
        DualOperator,
    };
    use approx::assert_relative_eq;

    #[test]
    fn pullback_examples() {
        let w = differential(Arc::new(Coordinate { n: 2, i: 0 }));
        let id: OperatorRef = Arc::new(DualOperator::new(2, |u| {
            vec![u[0].lift(1.0), u[0].lift(0.0), u[0].lift(0.0), u[0].lift(1.0)]
        }));
        let u = [0.7, 1.9];
        assert_eq!(pullback(id, w.clone()).form(&u).unwrap(), w.form(&u).unwrap());
        let uw = pullback(Arc::new(make_toeplitz(2)), w);
        assert_eq!(uw.form(&u).unwrap().as_slice(), &[1.9, 0.7]);
        let d = make_diagonal(vec![identity_fn(), identity_fn()]);
        let s = differential(scalar(2, |u| u[0].clone() + u[1].clone()));
        assert_eq!(pullback(Arc::new(d), s).form(&u).unwrap().as_slice(), &[0.7, 1.9]);
    }

    #[test]
    fn staircase_examples() {
        let du1 = DualOneForm::new(2, |u| vec![u[0].lift(1.0), u[0].lift(0.0)]);
        assert_relative_eq!(integrate_closed_1form(&du1, &[0.0, 0.0], &[3.0, 5.0], 1e-10).unwrap(), 3.0);
        let w = DualOneForm::new(2, |u| vec![u[1].clone(), u[0].clone()]);
        assert_relative_eq!(
            integrate_closed_1form(&w, &[0.0, 0.0], &[3.0, 5.0], 1e-10).unwrap(),
            15.0,
            max_relative = 1e-14
        );
        let open = DualOneForm::new(2, |u| vec![u[1].clone(), u[0].lift(0.0)]);
        assert!(matches!(
            integrate_closed_1form(&open, &[0.0, 0.0], &[1.0, 1.0], 1e-10),
            Err(Error::NotClosed { .. })
        ));
    }

    #[test]
    fn path_independence_of_leg_order() {
        let f = DualOneForm::new(3, |u| {
            // d(sin(u¹)u² + u²u³ e^{u¹})
            let e = u[0].exp();
            vec![
                u[0].cos() * u[1].clone() + u[1].clone() * u[2].clone() * e.clone(),
                u[0].sin() + u[2].clone() * e.clone(),
                u[1].clone() * e,
            ]
        });
        let m = |v: &[f64]| {
            let w = f.form(v)?;
            Ok(Matrix::from_row_slice(1, 3, w.as_slice()))
        };
        let a = integrate_staircase_ordered(&m, &[0.1, 0.2, 0.3], &[1.0, -0.5, 0.9], &[0, 1, 2], 1e-10).unwrap();
        let b = integrate_staircase_ordered(&m, &[0.1, 0.2, 0.3], &[1.0, -0.5, 0.9], &[2, 1, 0], 1e-10).unwrap();
        assert!((a[0] - b[0]).abs() < 1e-9);
    }

    #[test]
    fn seeded_hierarchy_of_toeplitz_block() {
        let l: OperatorRef = Arc::new(make_toeplitz(2));
        let h = hierarchy_from_seed(l.clone(), Arc::new(Coordinate { n: 2, i: 0 }), &[0.0, 0.0]).unwrap();
        let u = [1.5, -0.5];
        assert_eq!(h.forms()[1].form(&u).unwrap().as_slice(), &[-0.5, 1.5]);
        let pot = h.potentials().unwrap()[1].value(&u).unwrap();
        assert_relative_eq!(pot, 1.5 * -0.5, max_relative = 1e-13);
        assert!(h.chain_residual(l.as_ref(), &u).unwrap() < 1e-14);

        let constant = scalar(2, |u| u[0].lift(4.0));
        let hc = hierarchy_from_seed(l.clone(), constant, &[0.0, 0.0]).unwrap();
        assert!(hc.matrix(&u).unwrap().iter().all(|x| *x == 0.0));
        assert!(!is_regular_hierarchy(&hc, &u).unwrap());

        let not_cl = scalar(2, |u| u[0].clone() * u[0].clone());
        assert!(matches!(
            hierarchy_from_seed(l, not_cl, &[1.0, 1.0]),
            Err(Error::NotAConservationLaw { .. })
        ));
    }

    #[test]
    fn first_companion_of_nilpotent_symmetry() {
        let n3 = DualOperator::new(3, |u| {
            let z = u[0].lift(0.0);
            let o = u[0].lift(1.0);
            vec![z.clone(), o.clone(), z.clone(), z.clone(), z.clone(), o, z.clone(), z.clone(), z]
        });
        // M = u¹N² + u²N + u³Id
        let m = DualOperator::new(3, |u| {
            let z = u[0].lift(0.0);
            vec![
                u[2].clone(), u[1].clone(), u[0].clone(),
                z.clone(), u[2].clone(), u[1].clone(),
                z.clone(), z, u[2].clone(),
            ]
        });
        let r = first_companion_check(&n3, &m, &[0.3, 0.5, 0.7]).unwrap();
        assert!(r.structural_deviation < 1e-8, "{r:?}");
        assert!(r.sigma_deviation < 1e-8);
        let id = DualOperator::new(3, |u| {
            let z = u[0].lift(0.0);
            let o = u[0].lift(1.0);
            vec![o.clone(), z.clone(), z.clone(), z.clone(), o.clone(), z.clone(), z.clone(), z, o]
        });
        assert!(matches!(first_companion_check(&n3, &id, &[0.3, 0.5, 0.7]), Err(Error::NotRegular)));
    }

    #[test]
    fn second_companion_of_diagonal_hierarchy() {
        let l: OperatorRef = Arc::new(make_diagonal(vec![identity_fn(), identity_fn()]));
        let seed = scalar(2, |u| u[0].clone() + u[1].clone());
        let p = [1.0, 2.0];
        let h = hierarchy_from_seed(l.clone(), seed, &p).unwrap();
        let r = second_companion_check(l.as_ref(), &h, &p).unwrap();
        assert!(r.structural_deviation < 1e-6, "{r:?}");
        assert!(r.sigma_deviation < 1e-6);
        let bad = hierarchy_from_seed(l.clone(), scalar(2, |u| u[0].clone()), &p).unwrap();
        assert!(matches!(second_companion_check(l.as_ref(), &bad, &p), Err(Error::NotRegular)));
    }

    #[test]
    fn second_companion_chart_is_nijenhuis() {
        let l: OperatorRef = Arc::new(make_toeplitz(2));
        let f1 = scalar(2, |u| u[0].clone());
        let f2 = scalar(2, |u| u[0].clone() * u[1].clone());
        let h = Hierarchy::from_potentials(vec![f1, f2], None);
        let p = [1.0, 2.0];
        let chart = SecondCompanionChart::new(l, &h, &p).unwrap();
        for x in [[0.0, 0.0], [0.05, -0.1], [-0.1, 0.2]] {
            assert!(torsion(&chart, &x).unwrap().max_abs() < 1e-9);
        }
        // Same σ substituted in the original coordinates is not Nijenhuis.
        let sig1 = scalar(2, |u| u[1].clone() * 2.0);
        let sig2 = scalar(2, |u| -(u[1].clone() * u[1].clone()));
        let literal = make_companion_second(vec![sig1, sig2]);
        assert!(torsion(&literal, &[1.0, 2.0]).unwrap().max_abs() > 0.1);
    }
}
