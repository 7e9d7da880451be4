//! Dense matrices over `Scalar`: exact elimination for rational entries,
//! pivoted elimination for floats, and float eigenvalues through nalgebra.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::scalar::Scalar;

/// Relative pivot threshold for float elimination.
pub const FLOAT_PIVOT_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<Scalar>,
}

/// Reduced row echelon form and its pivot columns.
#[derive(Clone, Debug)]
pub struct Rref {
    pub matrix: Matrix,
    pub pivots: Vec<usize>,
}

/// Solution set {x_p + N t} of A x = rhs.
#[derive(Clone, Debug)]
pub struct AffineSolution {
    pub particular: Vec<Scalar>,
    /// Columns spanning the nullspace; each is indexed by the free column it
    /// is attached to (entry 1 there, 0 at other free columns).
    pub basis: Vec<Vec<Scalar>>,
    pub free: Vec<usize>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![Scalar::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Scalar::one());
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Scalar>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Matrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &Scalar {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Scalar) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[Scalar] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_exact(&self) -> bool {
        self.data.iter().all(Scalar::is_exact)
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "shape mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.get(k, j);
                    if !b.is_zero() {
                        let idx = i * out.cols + j;
                        out.data[idx] += &(a * b);
                    }
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Scalar]) -> Vec<Scalar> {
        assert_eq!(self.cols, v.len(), "shape mismatch");
        (0..self.rows)
            .map(|i| {
                let mut s = Scalar::zero();
                for (a, b) in self.row(i).iter().zip(v) {
                    if !a.is_zero() && !b.is_zero() {
                        s += &(a * b);
                    }
                }
                s
            })
            .collect()
    }

    /// self − λ I.
    pub fn shifted(&self, lambda: &Scalar) -> Matrix {
        assert_eq!(self.rows, self.cols, "square matrix required");
        let mut m = self.clone();
        for i in 0..self.rows {
            let v = m.get(i, i) - lambda;
            m.set(i, i, v);
        }
        m
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j).to_f64())
    }

    pub fn rref(&self) -> Rref {
        let mut m = self.clone();
        let exact = m.is_exact();
        let scale = if exact {
            0.0
        } else {
            self.data.iter().map(|x| x.to_f64().abs()).fold(0.0, f64::max)
        };
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..m.cols {
            if r == m.rows {
                break;
            }
            let pick = if exact {
                (r..m.rows).find(|&i| !m.get(i, c).is_zero())
            } else {
                let (best, val) = (r..m.rows)
                    .map(|i| (i, m.get(i, c).to_f64().abs()))
                    .fold((r, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
                (val > FLOAT_PIVOT_TOL * scale.max(f64::MIN_POSITIVE)).then_some(best)
            };
            let Some(p) = pick else {
                if !exact {
                    for i in r..m.rows {
                        m.set(i, c, Scalar::Float(0.0));
                    }
                }
                continue;
            };
            m.swap_rows(p, r);
            let inv = m.get(r, c).recip().expect("nonzero pivot");
            for j in 0..m.cols {
                let v = m.get(r, j) * &inv;
                m.set(r, j, v);
            }
            for i in 0..m.rows {
                if i == r {
                    continue;
                }
                let f = m.get(i, c).clone();
                if f.is_zero() {
                    continue;
                }
                for j in 0..m.cols {
                    let v = m.get(i, j) - &(&f * m.get(r, j));
                    m.set(i, j, v);
                }
            }
            pivots.push(c);
            r += 1;
        }
        Rref { matrix: m, pivots }
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    pub fn rank(&self) -> usize {
        self.rref().pivots.len()
    }

    /// Basis of {x : A x = 0}, one vector per free column.
    pub fn nullspace(&self) -> Vec<Vec<Scalar>> {
        let rhs = vec![Scalar::zero(); self.rows];
        solve_affine(self, &rhs).map(|s| s.basis).unwrap_or_default()
    }

    /// Characteristic polynomial det(x I − A), coefficients from x^0 upward.
    /// Faddeev–LeVerrier; exact for rational matrices.
    pub fn charpoly(&self) -> Vec<Scalar> {
        assert_eq!(self.rows, self.cols, "square matrix required");
        let n = self.rows;
        let mut c = vec![Scalar::zero(); n + 1];
        c[n] = Scalar::one();
        let mut mk = Matrix::zeros(n, n);
        for k in 1..=n {
            // M_k = A M_{k-1} + c_{n-k+1} I
            let mut next = self.mul(&mk);
            for i in 0..n {
                let v = next.get(i, i) + &c[n - k + 1];
                next.set(i, i, v);
            }
            let am = self.mul(&next);
            let mut tr = Scalar::zero();
            for i in 0..n {
                tr += am.get(i, i);
            }
            c[n - k] = -(tr / Scalar::from_int(k as i64));
            mk = next;
        }
        c
    }
}

/// General solution of A x = rhs, or `None` when inconsistent.
pub fn solve_affine(a: &Matrix, rhs: &[Scalar]) -> Option<AffineSolution> {
    assert_eq!(a.rows, rhs.len(), "shape mismatch");
    let n = a.cols;
    let mut aug = Matrix::zeros(a.rows, n + 1);
    for i in 0..a.rows {
        for j in 0..n {
            aug.set(i, j, a.get(i, j).clone());
        }
        aug.set(i, n, rhs[i].clone());
    }
    let Rref { matrix: r, pivots } = aug.rref();
    if pivots.last() == Some(&n) {
        return None;
    }
    if !r.is_exact() {
        // Float consistency: residual of rows beyond the rank must be small.
        let scale = rhs.iter().map(|x| x.to_f64().abs()).fold(1.0, f64::max);
        for i in pivots.len()..r.rows {
            if r.get(i, n).to_f64().abs() > 1e-9 * scale {
                return None;
            }
        }
    }
    let free: Vec<usize> = (0..n).filter(|c| !pivots.contains(c)).collect();
    let mut particular = vec![Scalar::zero(); n];
    for (i, &p) in pivots.iter().enumerate() {
        particular[p] = r.get(i, n).clone();
    }
    let basis = free
        .iter()
        .map(|&f| {
            let mut v = vec![Scalar::zero(); n];
            v[f] = Scalar::one();
            for (i, &p) in pivots.iter().enumerate() {
                v[p] = -r.get(i, f);
            }
            v
        })
        .collect();
    Some(AffineSolution {
        particular,
        basis,
        free,
    })
}

/// Eigenvalues of a float-converted square matrix, sorted by modulus
/// descending, ties by real part then imaginary part descending.
pub fn eigenvalues(m: &Matrix) -> Vec<Complex64> {
    assert_eq!(m.rows, m.cols, "square matrix required");
    if m.rows == 0 {
        return Vec::new();
    }
    let d = m.to_dmatrix();
    let mut ev: Vec<Complex64> = d.complex_eigenvalues().iter().copied().collect();
    sort_by_modulus(&mut ev);
    ev
}

pub fn sort_by_modulus(ev: &mut [Complex64]) {
    ev.sort_by(|a, b| {
        b.norm()
            .total_cmp(&a.norm())
            .then(b.re.total_cmp(&a.re))
            .then(b.im.total_cmp(&a.im))
    });
}

/// Least-squares solution of a float system via SVD.
pub fn least_squares(a: &DMatrix<f64>, b: &[f64]) -> Option<Vec<f64>> {
    let rhs = nalgebra::DVector::from_column_slice(b);
    let svd = a.clone().svd(true, true);
    svd.solve(&rhs, 1e-14).ok().map(|x| x.iter().copied().collect())
}

/// Numerical rank from singular values relative to the largest.
pub fn numerical_rank(a: &DMatrix<f64>, rel_tol: f64) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let sv = a.clone().singular_values();
    let top = sv.iter().copied().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s > rel_tol * top && s > 0.0).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(p: i64, d: i64) -> Scalar {
        Scalar::ratio(p, d)
    }

    #[test]
    fn exact_rank_and_nullspace() {
        let m = Matrix::from_rows(vec![
            vec![q(1, 1), q(2, 1), q(3, 1)],
            vec![q(2, 1), q(4, 1), q(6, 1)],
            vec![q(1, 1), q(0, 1), q(1, 1)],
        ]);
        assert_eq!(m.rank(), 2);
        let ns = m.nullspace();
        assert_eq!(ns.len(), 1);
        let image = m.mul_vec(&ns[0]);
        assert!(image.iter().all(Scalar::is_zero));
    }

    #[test]
    fn inconsistent_system_detected() {
        let m = Matrix::from_rows(vec![vec![q(1, 1), q(1, 1)], vec![q(2, 1), q(2, 1)]]);
        assert!(solve_affine(&m, &[q(1, 1), q(3, 1)]).is_none());
        let s = solve_affine(&m, &[q(1, 1), q(2, 1)]).unwrap();
        assert_eq!(s.free, vec![1]);
        assert_eq!(s.particular, vec![q(1, 1), q(0, 1)]);
    }

    #[test]
    fn charpoly_of_hat_transition_matrix() {
        let m = Matrix::from_rows(vec![
            vec![q(1, 2), q(0, 1), q(0, 1)],
            vec![q(1, 2), q(1, 1), q(1, 2)],
            vec![q(0, 1), q(0, 1), q(1, 2)],
        ]);
        // (x − 1)(x − 1/2)^2 = x^3 − 2x^2 + 5/4 x − 1/4
        assert_eq!(m.charpoly(), vec![q(-1, 4), q(5, 4), q(-2, 1), q(1, 1)]);
        let ev = eigenvalues(&m);
        assert!((ev[0].re - 1.0).abs() < 1e-12);
        assert!((ev[1].re - 0.5).abs() < 1e-12 && (ev[2].re - 0.5).abs() < 1e-12);
    }

    #[test]
    fn float_rank_tolerates_roundoff() {
        let m = Matrix::from_rows(vec![
            vec![Scalar::Float(1.0), Scalar::Float(1.0 / 3.0)],
            vec![Scalar::Float(3.0), Scalar::Float(1.0)],
        ]);
        assert_eq!(m.rank(), 1);
    }

    #[test]
    fn least_squares_consistent_system() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let x = least_squares(&a, &[1.0, 2.0, 3.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 2.0).abs() < 1e-12);
    }
}
