//! Squared-exponential ARD kernel and its operator-applied forms.
//!
//! The kernel factorizes over coordinates, so every mixed partial
//! `d^n/da^n d^m/db^m` of a coordinate factor `exp(-(a-b)^2 / (2 l^2))` has a
//! closed form in terms of probabilists' Hermite polynomials:
//!
//! ```text
//! d^n_a d^m_b exp(-r^2/(2 l^2)) = (-1)^n l^-(n+m) He_{n+m}(r/l) exp(-r^2/(2 l^2)),   r = a - b
//! ```
//!
//! Operators are constant-coefficient sums of partial derivatives of total
//! order at most two, which covers identity (Dirichlet), `-Laplacian`, the
//! heat operator `d_t - a d_xx` and first derivatives.

use crate::error::{Error, Result};

/// Largest supported coordinate count.
pub const MAX_DIM: usize = 6;
/// Largest total derivative order per operator term.
pub const MAX_ORDER: u8 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct KernelParams {
    signal: f64,
    lengthscales: Vec<f64>,
}

impl KernelParams {
    pub fn new(signal: f64, lengthscales: Vec<f64>) -> Result<Self> {
        if !(signal > 0.0 && signal.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "signal must be positive, got {signal}"
            )));
        }
        if lengthscales.is_empty() || lengthscales.len() > MAX_DIM {
            return Err(Error::UnsupportedDimension {
                dims: lengthscales.len(),
                max: MAX_DIM,
            });
        }
        if let Some(l) = lengthscales.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "lengthscales must be positive, got {l}"
            )));
        }
        Ok(Self {
            signal,
            lengthscales,
        })
    }

    /// Isotropic kernel with the same lengthscale on every coordinate.
    pub fn isotropic(signal: f64, lengthscale: f64, dim: usize) -> Result<Self> {
        Self::new(signal, vec![lengthscale; dim])
    }

    pub fn signal(&self) -> f64 {
        self.signal
    }

    /// Prior variance `s^2`.
    pub fn variance(&self) -> f64 {
        self.signal * self.signal
    }

    pub fn lengthscales(&self) -> &[f64] {
        &self.lengthscales
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    fn check(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: z.len(),
            });
        }
        Ok(())
    }
}

/// One term `coeff * d^orders` of a linear differential operator.
#[derive(Debug, Clone, PartialEq)]
pub struct OpTerm {
    pub coeff: f64,
    pub orders: Vec<u8>,
}

impl OpTerm {
    pub fn total_order(&self) -> u8 {
        self.orders.iter().sum()
    }
}

/// A constant-coefficient linear differential operator of order at most two.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSpec {
    dim: usize,
    terms: Vec<OpTerm>,
}

impl OperatorSpec {
    pub fn new(dim: usize, terms: Vec<(f64, Vec<u8>)>) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::UnsupportedDimension { dims: dim, max: MAX_DIM });
        }
        if terms.is_empty() {
            return Err(Error::InvalidParameter(
                "operator needs at least one term".into(),
            ));
        }
        let terms = terms
            .into_iter()
            .map(|(coeff, orders)| {
                if orders.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: orders.len(),
                    });
                }
                let term = OpTerm { coeff, orders };
                if term.total_order() > MAX_ORDER {
                    return Err(Error::InvalidParameter(format!(
                        "term order {} exceeds {MAX_ORDER}",
                        term.total_order()
                    )));
                }
                if !coeff.is_finite() {
                    return Err(Error::InvalidParameter("non-finite coefficient".into()));
                }
                Ok(term)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dim, terms })
    }

    /// Point evaluation (Dirichlet boundary operator).
    pub fn identity(dim: usize) -> Self {
        Self::new(dim, vec![(1.0, vec![0; dim])]).expect("valid identity")
    }

    /// `-sum_r d^2/dx_r^2`.
    pub fn neg_laplacian(dim: usize) -> Self {
        let terms = (0..dim)
            .map(|r| {
                let mut o = vec![0; dim];
                o[r] = 2;
                (-1.0, o)
            })
            .collect();
        Self::new(dim, terms).expect("valid laplacian")
    }

    /// `d^order / dz_axis^order`.
    pub fn partial(dim: usize, axis: usize, order: u8) -> Result<Self> {
        if axis >= dim {
            return Err(Error::InvalidParameter(format!(
                "axis {axis} out of range for dimension {dim}"
            )));
        }
        let mut o = vec![0; dim];
        o[axis] = order;
        Self::new(dim, vec![(1.0, o)])
    }

    /// Space-time heat operator `d_t - diffusivity * d_xx` on coordinates `(x, t)`.
    pub fn heat(diffusivity: f64) -> Self {
        Self::new(2, vec![(1.0, vec![0, 1]), (-diffusivity, vec![2, 0])]).expect("valid heat")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[OpTerm] {
        &self.terms
    }

    pub fn max_order(&self) -> u8 {
        self.terms.iter().map(OpTerm::total_order).max().unwrap_or(0)
    }

    pub fn is_identity(&self) -> bool {
        self.terms.len() == 1 && self.terms[0].coeff == 1.0 && self.terms[0].total_order() == 0
    }
}

fn hermite(k: usize, x: f64) -> f64 {
    let x2 = x * x;
    match k {
        0 => 1.0,
        1 => x,
        2 => x2 - 1.0,
        3 => x * (x2 - 3.0),
        4 => x2 * x2 - 6.0 * x2 + 3.0,
        _ => unreachable!("derivative order above 4"),
    }
}

/// `d^n/da^n d^m/db^m exp(-(a-b)^2 / (2 l^2))` for `n, m <= 2`.
pub fn dim_factor_derivative(ell: f64, a: f64, b: f64, n: u8, m: u8) -> f64 {
    assert!(n <= MAX_ORDER && m <= MAX_ORDER, "orders must be <= 2");
    let t = (a - b) / ell;
    let k = (n + m) as i32;
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    sign * ell.powi(-k) * hermite(k as usize, t) * (-0.5 * t * t).exp()
}

/// Per-coordinate derivative tables for one point pair.
///
/// `table[r][k] = (-1)^k l_r^-k He_k(t_r)`, so that the factor for orders
/// `(n, m)` on coordinate `r` is `(-1)^m table[r][n+m]` times the shared
/// exponential.
pub(crate) struct PairTables {
    dim: usize,
    table: [[f64; 5]; MAX_DIM],
    exp_part: f64,
}

impl PairTables {
    #[inline]
    pub(crate) fn new(params: &KernelParams, z: &[f64], zp: &[f64], max_total: usize) -> Self {
        let dim = params.dim();
        let mut table = [[0.0; 5]; MAX_DIM];
        let mut q = 0.0;
        for r in 0..dim {
            let ell = params.lengthscales[r];
            let t = (z[r] - zp[r]) / ell;
            q += t * t;
            let inv = 1.0 / ell;
            let row = &mut table[r];
            row[0] = 1.0;
            if max_total >= 1 {
                let t2 = t * t;
                let inv2 = inv * inv;
                row[1] = -inv * t;
                if max_total >= 2 {
                    row[2] = inv2 * (t2 - 1.0);
                }
                if max_total >= 3 {
                    row[3] = -inv2 * inv * t * (t2 - 3.0);
                }
                if max_total >= 4 {
                    row[4] = inv2 * inv2 * (t2 * t2 - 6.0 * t2 + 3.0);
                }
            }
        }
        Self {
            dim,
            table,
            exp_part: params.variance() * (-0.5 * q).exp(),
        }
    }

    #[inline]
    pub(crate) fn eval(&self, left: &OperatorSpec, right: &OperatorSpec) -> f64 {
        let mut acc = 0.0;
        for tl in &left.terms {
            for tr in &right.terms {
                let mut prod = tl.coeff * tr.coeff;
                for r in 0..self.dim {
                    let n = tl.orders[r];
                    let m = tr.orders[r];
                    let v = self.table[r][(n + m) as usize];
                    prod *= if m % 2 == 0 { v } else { -v };
                }
                acc += prod;
            }
        }
        acc * self.exp_part
    }
}

/// `O_z O'_z' k(z, z')` without dimension checks.
#[inline]
pub(crate) fn apply_both_unchecked(
    left: &OperatorSpec,
    right: &OperatorSpec,
    params: &KernelParams,
    z: &[f64],
    zp: &[f64],
) -> f64 {
    let max_total = (left.max_order() + right.max_order()) as usize;
    PairTables::new(params, z, zp, max_total).eval(left, right)
}

/// `k(z, z') = s^2 exp(-1/2 sum_r (z_r - z'_r)^2 / l_r^2)`.
pub fn kernel_eval(params: &KernelParams, z: &[f64], zp: &[f64]) -> Result<f64> {
    params.check(z)?;
    params.check(zp)?;
    let q: f64 = z
        .iter()
        .zip(zp)
        .zip(&params.lengthscales)
        .map(|((a, b), l)| {
            let t = (a - b) / l;
            t * t
        })
        .sum();
    Ok(params.variance() * (-0.5 * q).exp())
}

fn check_op(op: &OperatorSpec, params: &KernelParams) -> Result<()> {
    if op.dim() != params.dim() {
        return Err(Error::DimensionMismatch {
            expected: params.dim(),
            got: op.dim(),
        });
    }
    Ok(())
}

/// `O_z k(z, z')`: the operator acts on the first argument.
pub fn apply_op_left(
    op: &OperatorSpec,
    params: &KernelParams,
    z: &[f64],
    zp: &[f64],
) -> Result<f64> {
    apply_op_both(op, &OperatorSpec::identity(params.dim()), params, z, zp)
}

/// `O_z O'_z' k(z, z')`: `left` acts on `z`, `right` on `z'`.
pub fn apply_op_both(
    left: &OperatorSpec,
    right: &OperatorSpec,
    params: &KernelParams,
    z: &[f64],
    zp: &[f64],
) -> Result<f64> {
    params.check(z)?;
    params.check(zp)?;
    check_op(left, params)?;
    check_op(right, params)?;
    Ok(apply_both_unchecked(left, right, params, z, zp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn se(s: f64, l: &[f64]) -> KernelParams {
        KernelParams::new(s, l.to_vec()).unwrap()
    }

    #[test]
    fn kernel_values() {
        let p = se(1.0, &[1.0, 1.0]);
        assert_eq!(kernel_eval(&p, &[0.3, 0.2], &[0.3, 0.2]).unwrap(), 1.0);
        let p = se(2.0, &[1.0]);
        let v = kernel_eval(&p, &[0.0], &[1.0]).unwrap();
        assert_relative_eq!(v, 4.0 * (-0.5f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(v, 2.426_122_638_850_534, max_relative = 1e-12);
        assert_eq!(v, kernel_eval(&p, &[1.0], &[0.0]).unwrap());
        assert!(kernel_eval(&p, &[1.0, 2.0], &[0.0]).is_err());
    }

    #[test]
    fn invalid_params() {
        assert!(KernelParams::new(0.0, vec![1.0]).is_err());
        assert!(KernelParams::new(1.0, vec![1.0, -2.0]).is_err());
        assert!(KernelParams::new(1.0, vec![]).is_err());
        assert!(OperatorSpec::new(2, vec![(1.0, vec![2, 1])]).is_err());
        assert!(OperatorSpec::new(2, vec![(1.0, vec![1])]).is_err());
        assert!(OperatorSpec::new(2, vec![]).is_err());
    }

    #[test]
    fn factor_derivatives_at_zero_separation() {
        assert_eq!(dim_factor_derivative(1.0, 0.4, 0.4, 1, 0), 0.0);
        assert_eq!(dim_factor_derivative(1.0, 0.4, 0.4, 2, 0), -1.0);
        assert_eq!(dim_factor_derivative(1.0, 0.4, 0.4, 2, 2), 3.0);
        assert_eq!(dim_factor_derivative(0.5, 0.4, 0.4, 2, 2), 3.0 * 16.0);
    }

    // Nested central differences of the 1D factor, Richardson-extrapolated.
    fn fd_factor(ell: f64, a: f64, b: f64, n: u8, m: u8) -> f64 {
        fn d(f: &dyn Fn(f64, f64) -> f64, a: f64, b: f64, n: u8, m: u8, h: f64) -> f64 {
            if n > 0 {
                let g = |x: f64, y: f64| d(f, x, y, n - 1, m, h);
                (g(a + h, b) - g(a - h, b)) / (2.0 * h)
            } else if m > 0 {
                let g = |x: f64, y: f64| d(f, x, y, 0, m - 1, h);
                (g(a, b + h) - g(a, b - h)) / (2.0 * h)
            } else {
                f(a, b)
            }
        }
        let f = |x: f64, y: f64| (-(x - y) * (x - y) / (2.0 * ell * ell)).exp();
        let h = 1e-2 * ell;
        let coarse = d(&f, a, b, n, m, h);
        let fine = d(&f, a, b, n, m, h / 2.0);
        (4.0 * fine - coarse) / 3.0
    }

    #[test]
    fn all_nine_factor_cases_match_finite_differences() {
        for &(ell, a, b) in &[(1.0, 0.3, -0.2), (0.5, 0.1, 0.35), (0.3, 0.9, 0.2)] {
            for n in 0..=2 {
                for m in 0..=2 {
                    let exact = dim_factor_derivative(ell, a, b, n, m);
                    let fd = fd_factor(ell, a, b, n, m);
                    assert!(
                        (exact - fd).abs() <= 1e-5 * exact.abs().max(1e-3),
                        "n={n} m={m} ell={ell}: {exact} vs {fd}"
                    );
                }
            }
        }
    }

    #[test]
    fn laplacian_values_at_zero_separation() {
        let p = se(1.0, &[1.0, 1.0]);
        let lap = OperatorSpec::neg_laplacian(2);
        let z = [0.1, -0.4];
        assert_relative_eq!(apply_op_left(&lap, &p, &z, &z).unwrap(), 2.0, epsilon = 1e-15);
        assert_relative_eq!(
            apply_op_both(&lap, &lap, &p, &z, &z).unwrap(),
            8.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn identity_operators_reduce_to_kernel() {
        let p = se(1.3, &[0.4, 0.7]);
        let id = OperatorSpec::identity(2);
        let heat = OperatorSpec::heat(0.01);
        let (z, zp) = ([0.2, 0.9], [0.6, 0.1]);
        let k = kernel_eval(&p, &z, &zp).unwrap();
        assert_relative_eq!(apply_op_left(&id, &p, &z, &zp).unwrap(), k, max_relative = 1e-15);
        assert_relative_eq!(
            apply_op_both(&id, &id, &p, &z, &zp).unwrap(),
            k,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            apply_op_both(&heat, &id, &p, &z, &zp).unwrap(),
            apply_op_left(&heat, &p, &z, &zp).unwrap(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn adjoint_symmetry() {
        let p = se(1.0, &[0.3, 0.6]);
        let heat = OperatorSpec::heat(0.01);
        let dt = OperatorSpec::partial(2, 1, 1).unwrap();
        let (z, zp) = ([0.2, 0.9], [0.6, 0.1]);
        let a = apply_op_both(&heat, &dt, &p, &z, &zp).unwrap();
        let b = apply_op_both(&dt, &heat, &p, &zp, &z).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-14);
    }

    #[test]
    fn dimension_mismatch() {
        let p = se(1.0, &[1.0, 1.0]);
        let lap3 = OperatorSpec::neg_laplacian(3);
        assert!(apply_op_left(&lap3, &p, &[0.0, 0.0], &[0.0, 0.0]).is_err());
    }
}
