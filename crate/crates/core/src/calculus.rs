//! Pointwise tensor calculus for operator fields: the Nijenhuis torsion, the
//! `⟨L, M⟩` bracket of commuting fields, and the residual tests built on them.

use crate::error::{Error, Result};
use crate::fields::{FormEval, OperatorEval, OperatorField, ScalarField};
use crate::linalg::{self, max_abs, Matrix, Vector};

/// Default relative threshold below which a residual counts as zero.
pub const PASS_REL: f64 = 1e-8;

/// A `(1,2)`-tensor `Tᵏᵢⱼ` stored as `data[(k·n + i)·n + j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor12 {
    n: usize,
    data: Vec<f64>,
}

impl Tensor12 {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, k: usize, i: usize, j: usize) -> usize {
        (k * self.n + i) * self.n + j
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[self.idx(k, i, j)]
    }

    pub fn set(&mut self, k: usize, i: usize, j: usize, v: f64) {
        let p = self.idx(k, i, j);
        self.data[p] = v;
    }

    pub fn add_to(&mut self, k: usize, i: usize, j: usize, v: f64) {
        let p = self.idx(k, i, j);
        self.data[p] += v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, x| a.max(x.abs()))
    }

    /// `max |Tᵏᵢⱼ + Tᵏⱼᵢ| / 2`.
    pub fn symmetric_part_max(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    worst = worst.max((self.get(k, i, j) + self.get(k, j, i)).abs() / 2.0);
                }
            }
        }
        worst
    }

    /// `max |Tᵏᵢⱼ + Tᵏⱼᵢ|`; zero for antisymmetric tensors.
    pub fn antisymmetry_residual(&self) -> f64 {
        2.0 * self.symmetric_part_max()
    }

    /// Vector `T(ξ, η)`.
    pub fn apply(&self, xi: &Vector, eta: &Vector) -> Vector {
        let n = self.n;
        Vector::from_fn(n, |k, _| {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += self.get(k, i, j) * xi[i] * eta[j];
                }
            }
            s
        })
    }

    pub fn max_diff(&self, other: &Tensor12) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |a, (x, y)| a.max((x - y).abs()))
    }
}

/// `(1 + ‖L‖)(1 + ‖M‖)(1 + max‖∂L‖ + max‖∂M‖)` with the max-entry norm.
pub fn residual_scale(l: &OperatorEval, m: &OperatorEval) -> f64 {
    (1.0 + max_abs(&l.value)) * (1.0 + max_abs(&m.value)) * (1.0 + l.max_partial() + m.max_partial())
}

fn check_commute(l: &OperatorEval, m: &OperatorEval) -> Result<()> {
    let tol = PASS_REL * residual_scale(l, m);
    let residual = max_abs(&(&l.value * &m.value - &m.value * &l.value));
    if residual > tol {
        return Err(Error::DoesNotCommute {
            residual,
            tolerance: tol,
        });
    }
    Ok(())
}

/// `⟨L,M⟩ᵏᵢⱼ = −Mᵏₛ∂ⱼLˢᵢ + Lᵏₛ∂ᵢMˢⱼ − Lʳᵢ∂ᵣMᵏⱼ + Mʳⱼ∂ᵣLᵏᵢ`, without the commutation check.
pub fn bracket_eval(l: &OperatorEval, m: &OperatorEval) -> Tensor12 {
    let n = l.value.nrows();
    let (lv, mv) = (&l.value, &m.value);
    let (dl, dm) = (&l.partials, &m.partials);
    let mut t = Tensor12::zeros(n);
    for i in 0..n {
        for j in 0..n {
            // products that do not depend on k
            let a = mv * dl[j].column(i);
            let b = lv * dm[i].column(j);
            for k in 0..n {
                let mut v = -a[k] + b[k];
                for r in 0..n {
                    v += -lv[(r, i)] * dm[r][(k, j)] + mv[(r, j)] * dl[r][(k, i)];
                }
                t.set(k, i, j, v);
            }
        }
    }
    t
}

/// `⟨L, M⟩` at `u`; requires `LM = ML` there.
pub fn bracket(l: &dyn OperatorField, m: &dyn OperatorField, u: &[f64]) -> Result<Tensor12> {
    let (le, me) = (l.eval(u)?, m.eval(u)?);
    check_commute(&le, &me)?;
    Ok(bracket_eval(&le, &me))
}

/// `𝒩ᵏᵢⱼ = Lʳᵢ∂ᵣLᵏⱼ − Lʳⱼ∂ᵣLᵏᵢ − Lᵏₛ(∂ᵢLˢⱼ − ∂ⱼLˢᵢ)`.
pub fn torsion_eval(l: &OperatorEval) -> Tensor12 {
    let n = l.value.nrows();
    let lv = &l.value;
    let dl = &l.partials;
    let mut t = Tensor12::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let curl = lv * (dl[i].column(j) - dl[j].column(i));
            for k in 0..n {
                let mut v = -curl[k];
                for r in 0..n {
                    v += lv[(r, i)] * dl[r][(k, j)] - lv[(r, j)] * dl[r][(k, i)];
                }
                t.set(k, i, j, v);
                t.set(k, j, i, -v);
            }
        }
    }
    t
}

pub fn torsion(l: &dyn OperatorField, u: &[f64]) -> Result<Tensor12> {
    Ok(torsion_eval(&l.eval(u)?))
}

/// Largest absolute torsion component at `u`.
pub fn torsion_residual(l: &dyn OperatorField, u: &[f64]) -> Result<f64> {
    Ok(torsion(l, u)?.max_abs())
}

/// Symmetric part of `⟨L, M⟩`: `max |⟨L,M⟩ᵏᵢⱼ + ⟨L,M⟩ᵏⱼᵢ| / 2`.
pub fn symmetry_residual_eval(l: &OperatorEval, m: &OperatorEval) -> Result<f64> {
    check_commute(l, m)?;
    Ok(bracket_eval(l, m).symmetric_part_max())
}

/// `max |⟨M,L⟩ᵏᵢⱼ|`. By `⟨M,L⟩(ξ,η) = −⟨L,M⟩(η,ξ)` this is also `max |⟨L,M⟩|`.
pub fn strong_symmetry_residual_eval(l: &OperatorEval, m: &OperatorEval) -> Result<f64> {
    check_commute(l, m)?;
    Ok(bracket_eval(m, l).max_abs())
}

pub fn symmetry_residual(l: &dyn OperatorField, m: &dyn OperatorField, u: &[f64]) -> Result<f64> {
    symmetry_residual_eval(&l.eval(u)?, &m.eval(u)?)
}

pub fn strong_symmetry_residual(l: &dyn OperatorField, m: &dyn OperatorField, u: &[f64]) -> Result<f64> {
    strong_symmetry_residual_eval(&l.eval(u)?, &m.eval(u)?)
}

/// Pullback `(L*ω)ⱼ = Lˢⱼωₛ` with its Jacobian by the product rule.
pub fn pullback_eval(l: &OperatorEval, w: &FormEval) -> FormEval {
    let n = l.value.nrows();
    let lt = l.value.transpose();
    let form = &lt * &w.form;
    let mut jacobian = &lt * &w.jacobian;
    for k in 0..n {
        let col = l.partials[k].transpose() * &w.form;
        for j in 0..n {
            jacobian[(j, k)] += col[j];
        }
    }
    FormEval { form, jacobian }
}

/// `max |∂ᵢ(Lˢⱼθₛ) − ∂ⱼ(Lˢᵢθₛ)|`, i.e. the closedness residual of `L*θ`.
pub fn conservation_law_residual_eval(l: &OperatorEval, theta: &FormEval) -> f64 {
    pullback_eval(l, theta).closedness_residual()
}

pub fn conservation_law_residual(l: &dyn OperatorField, f: &dyn ScalarField, u: &[f64]) -> Result<f64> {
    Ok(conservation_law_residual_eval(&l.eval(u)?, &f.eval(u)?.into()))
}

/// `∂ₖ(Lᵖ)` for `p = 0…n−1`, given the powers of `L`.
fn power_partials(powers: &[Matrix], dl: &Matrix) -> Vec<Matrix> {
    let n = powers[0].nrows();
    let mut out = vec![Matrix::zeros(n, n)];
    for p in 1..powers.len() {
        // ∂(Lᵖ) = ∂L·Lᵖ⁻¹ + L·∂(Lᵖ⁻¹)
        let next = dl * &powers[p - 1] + &powers[1] * &out[p - 1];
        out.push(next);
    }
    out
}

/// Coefficients `g` of `M = Σ gᵢLⁿ⁻ⁱ` and their partials `dg[i][k] = ∂ₖgᵢ₊₁`,
/// obtained by differentiating the expansion and solving in the Krylov basis.
pub fn commutant_coeff_partials(l: &OperatorEval, m: &OperatorEval) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = l.value.nrows();
    let v = linalg::find_cyclic_vector(&l.value).ok_or(Error::NotGlRegular)?;
    let g = linalg::commutant_coeffs_at(&l.value, &m.value, &v)?.into_vec();
    let powers = linalg::powers(&l.value, n);
    let mut basis = Matrix::zeros(n, n);
    for i in 0..n {
        basis.set_column(i, &(&powers[n - 1 - i] * &v));
    }
    let lu = basis.lu();
    let mut dg = vec![vec![0.0; n]; n];
    for k in 0..n {
        let dp = power_partials(&powers, &l.partials[k]);
        let mut rhs = m.partials[k].clone();
        for (i, gi) in g.iter().enumerate() {
            rhs -= &dp[n - 1 - i] * *gi;
        }
        let sol = lu.solve(&(rhs * &v)).ok_or(Error::NotGlRegular)?;
        for i in 0..n {
            dg[i][k] = sol[i];
        }
    }
    Ok((g, dg))
}

/// The tensor `T_M = Σ dgᵢ ⊗ Lⁿ⁻ⁱ` and its defect `max |T_M(Lξ,η) − T_M(ξ,Lη)|` over basis pairs.
#[derive(Debug, Clone)]
pub struct TmReport {
    pub tensor: Tensor12,
    pub defect: f64,
}

/// `T_M` without checking that `M` is a symmetry (used to exhibit defects).
pub fn t_m_tensor_unchecked(l: &OperatorEval, m: &OperatorEval) -> Result<TmReport> {
    let n = l.value.nrows();
    let (_, dg) = commutant_coeff_partials(l, m)?;
    let powers = linalg::powers(&l.value, n);
    let mut t = Tensor12::zeros(n);
    for (a, dga) in dg.iter().enumerate() {
        let p = &powers[n - 1 - a];
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    t.add_to(k, i, j, dga[i] * p[(k, j)]);
                }
            }
        }
    }
    let lv = &l.value;
    let mut defect: f64 = 0.0;
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut v = 0.0;
                for r in 0..n {
                    v += lv[(r, i)] * t.get(k, r, j) - lv[(r, j)] * t.get(k, i, r);
                }
                defect = defect.max(v.abs());
            }
        }
    }
    Ok(TmReport { tensor: t, defect })
}

/// `T_M` for a symmetry `M` of a gl-regular `L`.
pub fn t_m_tensor(l: &dyn OperatorField, m: &dyn OperatorField, u: &[f64]) -> Result<TmReport> {
    let (le, me) = (l.eval(u)?, m.eval(u)?);
    let residual = symmetry_residual_eval(&le, &me)?;
    if residual > PASS_REL * residual_scale(&le, &me) {
        return Err(Error::NotASymmetry { residual });
    }
    t_m_tensor_unchecked(&le, &me)
}

/// `maxᵢ ‖L*dgᵢ − σᵢdg₁ − dgᵢ₊₁‖` with `dgₙ₊₁ = 0`; vanishes exactly when `M` is a symmetry.
pub fn s1_residual_eval(l: &OperatorEval, m: &OperatorEval) -> Result<f64> {
    let n = l.value.nrows();
    let (_, dg) = commutant_coeff_partials(l, m)?;
    let sigma = linalg::char_poly_sigma(&l.value);
    let lt = l.value.transpose();
    let dg1 = Vector::from_column_slice(&dg[0]);
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let dgi = Vector::from_column_slice(&dg[i]);
        let mut r = &lt * dgi - &dg1 * sigma.get(i + 1);
        if i + 1 < n {
            r -= Vector::from_column_slice(&dg[i + 1]);
        }
        worst = worst.max(r.amax());
    }
    Ok(worst)
}

pub fn s1_residual(l: &dyn OperatorField, m: &dyn OperatorField, u: &[f64]) -> Result<f64> {
    s1_residual_eval(&l.eval(u)?, &m.eval(u)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real::Real;
    use crate::fields::{make_diagonal, make_toeplitz, univariate, ConstantOperator, DualOperator, DualScalar};
    use std::sync::Arc;

    #[test]
    fn constant_fields_have_zero_tensors() {
        let c = ConstantOperator(Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        let u = [0.1, 0.2];
        assert_eq!(torsion(&c, &u).unwrap().max_abs(), 0.0);
        assert_eq!(bracket(&c, &c, &u).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn toeplitz_is_nijenhuis_and_self_bracket_is_minus_torsion() {
        for k in 2..=4 {
            let u: Vec<f64> = (0..k).map(|i| 0.3 + i as f64).collect();
            let l = make_toeplitz(k);
            assert!(torsion(&l, &u).unwrap().max_abs() < 1e-12);
        }
        let l = DualOperator::new(2, |u| {
            vec![u[0].clone() * u[1].clone(), u[1].exp(), u[0].sin(), u[1].clone()]
        });
        let e = l.eval(&[0.4, -0.3]).unwrap();
        let t = torsion_eval(&e);
        let b = bracket_eval(&e, &e);
        assert!(t.max_abs() > 1e-3);
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    assert!((t.get(k, i, j) + b.get(k, i, j)).abs() < 1e-12);
                }
            }
        }
        assert!(t.antisymmetry_residual() < 1e-15);
    }

    #[test]
    fn swapped_diagonal_has_torsion() {
        let l = DualOperator::new(2, |u| {
            vec![u[1].clone(), u[0].lift(0.0), u[0].lift(0.0), u[0].clone()]
        });
        let t = torsion(&l, &[1.0, 2.0]).unwrap();
        // hand expansion: 𝒩¹₁₂ = −(u¹ − u²)·1 … nonzero whenever u¹ ≠ u²
        assert!(t.max_abs() > 0.5);
    }

    #[test]
    fn self_symmetry_of_nijenhuis_operator() {
        let l = make_toeplitz(3);
        let u = [0.2, 0.7, 1.3];
        assert!(symmetry_residual(&l, &l, &u).unwrap() < 1e-12);
        assert!(strong_symmetry_residual(&l, &l, &u).unwrap() < 1e-12);
    }

    #[test]
    fn non_commuting_pair_is_rejected() {
        let a = ConstantOperator(Matrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 2.0]));
        let b = ConstantOperator(Matrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        assert!(matches!(
            symmetry_residual(&a, &b, &[0.0, 0.0]),
            Err(Error::DoesNotCommute { .. })
        ));
    }

    #[test]
    fn conservation_laws_of_diagonal_operator() {
        let l = make_diagonal((0..4).map(|_| univariate(|s| s)).collect());
        let f2 = DualScalar::new(4, |u| {
            u.iter().fold(u[0].lift(0.0), |a, x| a + x.clone() * x.clone()) * 0.5
        });
        let u = [1.0, 2.0, 3.0, 4.0];
        assert!(conservation_law_residual(&l, &f2, &u).unwrap() < 1e-12);
        let bad = DualScalar::new(4, |u| u[0].clone() * u[1].clone());
        assert!(conservation_law_residual(&l, &bad, &u).unwrap() > 0.1);
        let c = DualScalar::new(4, |u| u[0].lift(3.0));
        assert_eq!(conservation_law_residual(&l, &c, &u).unwrap(), 0.0);
    }

    #[test]
    fn t_m_for_identity_and_power() {
        let l = make_toeplitz(2);
        let id = ConstantOperator(Matrix::identity(2, 2));
        let u = [0.4, 1.7];
        let r = t_m_tensor(&l, &id, &u).unwrap();
        assert!(r.tensor.max_abs() < 1e-12);
        assert!(r.defect < 1e-12);

        let sq = DualOperator::new(2, |u| {
            let (a, b) = (u[0].clone(), u[1].clone());
            vec![b.clone() * b.clone(), a * b.clone() * 2.0, b.lift(0.0), b.clone() * b]
        });
        let r = t_m_tensor(&l, &sq, &u).unwrap();
        assert!(r.defect < 1e-10);
        assert!(s1_residual(&l, &sq, &u).unwrap() < 1e-10);
    }

    #[test]
    fn commuting_non_symmetry_has_defect() {
        // M = g₁U + g₂Id with g₁ = (u¹)², g₂ = 0 commutes with U but violates the s1 system.
        let l = make_toeplitz(2);
        let m = DualOperator::new(2, |u| {
            let g1 = u[0].clone() * u[0].clone();
            vec![g1.clone() * u[1].clone(), g1.clone() * u[0].clone(), g1.lift(0.0), g1 * u[1].clone()]
        });
        let u = [0.9, 1.3];
        let le = l.eval(&u).unwrap();
        let me = m.eval(&u).unwrap();
        assert!(symmetry_residual_eval(&le, &me).unwrap() > 0.01);
        assert!(t_m_tensor_unchecked(&le, &me).unwrap().defect > 0.01);
        assert!(matches!(t_m_tensor(&l, &m, &u), Err(Error::NotASymmetry { .. })));
        assert!(s1_residual_eval(&le, &me).unwrap() > 0.01);
    }

    #[test]
    fn coefficient_partials_match_differences() {
        let l: Arc<dyn OperatorField> = Arc::new(make_toeplitz(3));
        let m = DualOperator::new(3, |u| {
            // M = U² (a symmetry), coefficients are polynomial in u
            let v = [u[2].clone(), u[1].clone(), u[0].clone()];
            let z = u[0].lift(0.0);
            let mut out = vec![z.clone(); 9];
            for i in 0..3 {
                for j in i..3 {
                    let mut s = z.clone();
                    for p in 0..=(j - i) {
                        s = s + v[p].clone() * v[j - i - p].clone();
                    }
                    out[i * 3 + j] = s;
                }
            }
            out
        });
        let u = [0.3, -0.4, 1.2];
        let (_, dg) = commutant_coeff_partials(&l.eval(&u).unwrap(), &m.eval(&u).unwrap()).unwrap();
        let h = 1e-6;
        for k in 0..3 {
            let mut up = u;
            let mut um = u;
            up[k] += h;
            um[k] -= h;
            let gp = linalg::commutant_coeffs(&l.value(&up).unwrap(), &m.value(&up).unwrap()).unwrap();
            let gm = linalg::commutant_coeffs(&l.value(&um).unwrap(), &m.value(&um).unwrap()).unwrap();
            for i in 0..3 {
                let fd = (gp.as_slice()[i] - gm.as_slice()[i]) / (2.0 * h);
                assert!((fd - dg[i][k]).abs() < 1e-6, "i={i} k={k}: {fd} vs {}", dg[i][k]);
            }
        }
    }
}
