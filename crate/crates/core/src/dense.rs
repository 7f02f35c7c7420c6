//! Small dense linear-algebra kernels: matrix exponential, LU and Cholesky
//! solves, and a Jacobi eigensolver for small symmetric matrices.
//!
//! Matrices are `ndarray::Array2` in row-major layout. All routines work for
//! real (`f64`) and complex (`Complex64`) entries through [`Scalar`].

use ndarray::{s, Array1, Array2, ArrayView2, Axis, LinalgScalar};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Field element usable by the dense kernels.
pub trait Scalar: LinalgScalar + std::fmt::Debug + Send + Sync + std::ops::Neg<Output = Self> {
    fn from_real(x: f64) -> Self;
    fn modulus(self) -> f64;
    fn conj(self) -> Self;
    fn real(self) -> f64;
    fn is_finite(self) -> bool;
    fn scale(self, x: f64) -> Self {
        self * Self::from_real(x)
    }
}

impl Scalar for f64 {
    fn from_real(x: f64) -> Self {
        x
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn conj(self) -> Self {
        self
    }
    fn real(self) -> f64 {
        self
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

impl Scalar for Complex64 {
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn real(self) -> f64 {
        self.re
    }
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// Rejects empty or non-finite matrices.
pub fn check_matrix<T: Scalar>(a: &Array2<T>) -> Result<()> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::Dimension(format!("empty {}x{} matrix", a.nrows(), a.ncols())));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("matrix entry".into()));
    }
    Ok(())
}

fn require_square<T>(a: &Array2<T>, what: &str) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!(
            "{what} needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(a.nrows())
}

/// Maximum absolute column sum.
pub fn norm1<T: Scalar>(a: &ArrayView2<T>) -> f64 {
    a.axis_iter(Axis(1))
        .map(|col| col.iter().map(|x| x.modulus()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Maximum absolute row sum.
pub fn norm_inf<T: Scalar>(a: &ArrayView2<T>) -> f64 {
    a.axis_iter(Axis(0))
        .map(|row| row.iter().map(|x| x.modulus()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn identity<T: Scalar>(n: usize) -> Array2<T> {
    Array2::from_diag_elem(n, T::one())
}

// Pade coefficients b_0..b_m for degrees 3, 5, 7, 9, 13.
const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// Largest 1-norm for which each degree meets unit roundoff in backward error.
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA13: f64 = 5.371920351148152;

fn lincomb<T: Scalar>(terms: &[(&Array2<T>, f64)], n: usize) -> Array2<T> {
    let mut out = Array2::<T>::zeros((n, n));
    for (m, c) in terms {
        out.scaled_add(T::from_real(*c), *m);
    }
    out
}

/// `exp(t·A)` by scaling and squaring with a diagonal Padé approximant whose
/// degree and scaling power are chosen from the 1-norm of `t·A`.
pub fn mat_exp<T: Scalar>(a: &Array2<T>, t: f64) -> Result<Array2<T>> {
    let n = require_square(a, "mat_exp")?;
    if !t.is_finite() {
        return Err(Error::NonFinite("exponential scale".into()));
    }
    check_matrix(a)?;
    let a = a.mapv(|x| x.scale(t));
    let eye = identity::<T>(n);
    let norm = norm1(&a.view());
    if norm == 0.0 {
        return Ok(eye);
    }

    for &(m, theta) in THETA.iter() {
        if norm <= theta {
            return pade_low(&a, m, &eye);
        }
    }

    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = a.mapv(|x| x.scale(2f64.powi(-s)));
    let b = &PADE13;
    let a2 = a.dot(&a);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);
    let u_inner = lincomb(&[(&a6, b[13]), (&a4, b[11]), (&a2, b[9])], n);
    let u_inner = a6.dot(&u_inner) + lincomb(&[(&a6, b[7]), (&a4, b[5]), (&a2, b[3]), (&eye, b[1])], n);
    let u = a.dot(&u_inner);
    let v_inner = lincomb(&[(&a6, b[12]), (&a4, b[10]), (&a2, b[8])], n);
    let v = a6.dot(&v_inner) + lincomb(&[(&a6, b[6]), (&a4, b[4]), (&a2, b[2]), (&eye, b[0])], n);
    let mut r = pade_quotient(&u, &v)?;
    for _ in 0..s {
        r = r.dot(&r);
        if r.iter().any(|x| !x.is_finite()) {
            return Err(Error::Overflow("matrix exponential squaring phase".into()));
        }
    }
    Ok(r)
}

fn pade_low<T: Scalar>(a: &Array2<T>, m: usize, eye: &Array2<T>) -> Result<Array2<T>> {
    let n = a.nrows();
    let b: &[f64] = match m {
        3 => &PADE3,
        5 => &PADE5,
        7 => &PADE7,
        _ => &PADE9,
    };
    let a2 = a.dot(a);
    // Even powers A^0, A^2, A^4, ...
    let mut powers = vec![eye.clone(), a2.clone()];
    while powers.len() * 2 <= m {
        let next = powers.last().unwrap().dot(&a2);
        powers.push(next);
    }
    let mut u = Array2::<T>::zeros((n, n));
    let mut v = Array2::<T>::zeros((n, n));
    for (k, p) in powers.iter().enumerate() {
        if 2 * k + 1 <= m {
            u.scaled_add(T::from_real(b[2 * k + 1]), p);
        }
        v.scaled_add(T::from_real(b[2 * k]), p);
    }
    let u = a.dot(&u);
    pade_quotient(&u, &v)
}

fn pade_quotient<T: Scalar>(u: &Array2<T>, v: &Array2<T>) -> Result<Array2<T>> {
    let p = v + u;
    let q = v - u;
    Lu::factor(&q)?.solve_matrix(&p)
}

/// `∫₀ᵗ exp(sA) ds`, read off the upper-right block of the exponential of
/// the augmented matrix `[[A, I], [0, 0]]`.
pub fn exp_integral<T: Scalar>(a: &Array2<T>, t: f64) -> Result<Array2<T>> {
    let n = require_square(a, "exp_integral")?;
    let mut aug = Array2::<T>::zeros((2 * n, 2 * n));
    aug.slice_mut(s![..n, ..n]).assign(a);
    for i in 0..n {
        aug[[i, n + i]] = T::one();
    }
    let e = mat_exp(&aug, t)?;
    Ok(e.slice(s![..n, n..]).to_owned())
}

/// LU factorization with partial pivoting, `P·A = L·U`.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    lu: Array2<T>,
    perm: Vec<usize>,
    swaps: usize,
}

impl<T: Scalar> Lu<T> {
    pub fn factor(a: &Array2<T>) -> Result<Self> {
        let n = require_square(a, "LU factorization")?;
        check_matrix(a)?;
        let scale = a.iter().map(|x| x.modulus()).fold(0.0, f64::max);
        let tiny = scale * f64::EPSILON * n as f64 * 1e-3;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut swaps = 0;
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[[i, k]].modulus()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if pmax <= tiny || pmax == 0.0 {
                return Err(Error::Singular { pivot: pmax, index: k });
            }
            if p != k {
                let (mut top, mut bottom) = lu.view_mut().split_at(Axis(0), p);
                let mut row_k = top.row_mut(k);
                let mut row_p = bottom.row_mut(0);
                ndarray::Zip::from(&mut row_k).and(&mut row_p).for_each(std::mem::swap);
                perm.swap(k, p);
                swaps += 1;
            }
            let pivot = lu[[k, k]];
            let (upper, mut lower) = lu.view_mut().split_at(Axis(0), k + 1);
            let pivot_row = upper.row(k);
            for mut row in lower.axis_iter_mut(Axis(0)) {
                let factor = row[k] / pivot;
                row[k] = factor;
                if factor.modulus() != 0.0 {
                    let (_, mut tail) = row.view_mut().split_at(Axis(0), k + 1);
                    tail.scaled_add(-factor, &pivot_row.slice(s![k + 1..]));
                }
            }
        }
        Ok(Self { lu, perm, swaps })
    }

    pub fn dim(&self) -> usize {
        self.lu.nrows()
    }

    pub fn solve(&self, b: &Array1<T>) -> Result<Array1<T>> {
        let n = self.dim();
        if b.len() != n {
            return Err(Error::Dimension(format!("rhs length {} for {n}x{n} system", b.len())));
        }
        let rhs = b.view().insert_axis(Axis(1)).to_owned();
        Ok(self.solve_matrix(&rhs)?.column(0).to_owned())
    }

    /// Solves `A·X = B` for every column of `B`.
    pub fn solve_matrix(&self, b: &Array2<T>) -> Result<Array2<T>> {
        let n = self.dim();
        if b.nrows() != n {
            return Err(Error::Dimension(format!("rhs has {} rows for {n}x{n} system", b.nrows())));
        }
        let mut x = b.select(Axis(0), &self.perm);
        for i in 0..n {
            let (done, mut rest) = x.view_mut().split_at(Axis(0), i);
            let mut xi = rest.row_mut(0);
            for j in 0..i {
                let l = self.lu[[i, j]];
                if l.modulus() != 0.0 {
                    xi.scaled_add(-l, &done.row(j));
                }
            }
        }
        for i in (0..n).rev() {
            let (mut head, tail) = x.view_mut().split_at(Axis(0), i + 1);
            let mut xi = head.row_mut(i);
            for j in i + 1..n {
                let u = self.lu[[i, j]];
                if u.modulus() != 0.0 {
                    xi.scaled_add(-u, &tail.row(j - i - 1));
                }
            }
            let d = self.lu[[i, i]];
            xi.mapv_inplace(|v| v / d);
        }
        Ok(x)
    }

    pub fn det(&self) -> T {
        let mut d = if self.swaps % 2 == 0 { T::one() } else { -T::one() };
        for i in 0..self.dim() {
            d = d * self.lu[[i, i]];
        }
        d
    }
}

/// Solves `A·x = b` by LU with partial pivoting.
pub fn solve_linear<T: Scalar>(a: &Array2<T>, b: &Array1<T>) -> Result<Array1<T>> {
    Lu::factor(a)?.solve(b)
}

pub fn inverse<T: Scalar>(a: &Array2<T>) -> Result<Array2<T>> {
    let n = require_square(a, "inverse")?;
    Lu::factor(a)?.solve_matrix(&identity(n))
}

pub fn det<T: Scalar>(a: &Array2<T>) -> Result<T> {
    Ok(Lu::factor(a)?.det())
}

/// Cholesky factor `L` of a Hermitian positive definite matrix, `A = L·Lᴴ`.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    l: Array2<T>,
}

impl<T: Scalar> Cholesky<T> {
    pub fn factor(a: &Array2<T>) -> Result<Self> {
        let n = require_square(a, "Cholesky factorization")?;
        check_matrix(a)?;
        let mut l = Array2::<T>::zeros((n, n));
        for j in 0..n {
            let mut diag = a[[j, j]].real();
            for k in 0..j {
                diag -= l[[j, k]].modulus().powi(2);
            }
            if diag <= 0.0 || !diag.is_finite() {
                return Err(Error::Singular { pivot: diag, index: j });
            }
            let ljj = diag.sqrt();
            l[[j, j]] = T::from_real(ljj);
            let row_j: Vec<T> = (0..j).map(|k| l[[j, k]].conj()).collect();
            for i in j + 1..n {
                let mut v = a[[i, j]];
                for (k, &c) in row_j.iter().enumerate() {
                    v = v - l[[i, k]] * c;
                }
                l[[i, j]] = v.scale(1.0 / ljj);
            }
        }
        Ok(Self { l })
    }

    pub fn solve(&self, b: &Array1<T>) -> Result<Array1<T>> {
        let n = self.l.nrows();
        if b.len() != n {
            return Err(Error::Dimension(format!("rhs length {} for {n}x{n} system", b.len())));
        }
        let mut y = b.clone();
        for i in 0..n {
            let mut v = y[i];
            for k in 0..i {
                v = v - self.l[[i, k]] * y[k];
            }
            y[i] = v / self.l[[i, i]];
        }
        for i in (0..n).rev() {
            let mut v = y[i];
            for k in i + 1..n {
                v = v - self.l[[k, i]].conj() * y[k];
            }
            y[i] = v / self.l[[i, i]];
        }
        Ok(y)
    }
}

/// Eigen-decomposition of a small real symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEigen {
    /// Eigenvalues, sorted descending.
    pub values: Vec<f64>,
    /// Column `k` is the unit eigenvector of `values[k]`.
    pub vectors: Array2<f64>,
}

/// Cyclic Jacobi eigensolver. Inputs whose asymmetry exceeds `1e-8`
/// relative to the largest entry are rejected; otherwise the matrix is
/// symmetrized first.
pub fn sym_eigen_small(a: &Array2<f64>) -> Result<SymEigen> {
    let n = require_square(a, "symmetric eigensolver")?;
    check_matrix(a)?;
    let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let asym = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| (a[[i, j]] - a[[j, i]]).abs())
        .fold(0.0, f64::max);
    if asym > 1e-8 * scale {
        return Err(Error::Asymmetric { relative: asym / scale });
    }
    let mut m = (a + &a.t()) * 0.5;
    let mut v = identity::<f64>(n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[[i, j]].powi(2))
            .sum();
        if off.sqrt() <= f64::EPSILON * scale.max(f64::MIN_POSITIVE) * 1e-2 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[[p, q]];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[j, j]].total_cmp(&m[[i, i]]));
    let values = order.iter().map(|&i| m[[i, i]]).collect();
    let vectors = v.select(Axis(1), &order);
    Ok(SymEigen { values, vectors })
}
