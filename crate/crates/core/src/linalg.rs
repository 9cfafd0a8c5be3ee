//! Small dense complex linear algebra: column-pivoted Householder QR and
//! orthogonal-complement bases.

use num_complex::Complex64;

/// `a^H b`.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

struct Reflector {
    start: usize,
    v: Vec<Complex64>,
}

impl Reflector {
    /// `x <- (I - 2 v v^H) x` on rows `start..`.
    fn apply(&self, x: &mut [Complex64]) {
        let tail = &mut x[self.start..];
        let s = inner(&self.v, tail) * 2.0;
        for (xi, vi) in tail.iter_mut().zip(&self.v) {
            *xi -= vi * s;
        }
    }
}

/// Column-pivoted Householder factorization of an `m x n` matrix given
/// by columns. Returns the reflectors and the numerical rank.
fn pivoted_qr(columns: &[Vec<Complex64>], m: usize, rank_tol: f64) -> (Vec<Reflector>, usize) {
    let mut a: Vec<Vec<Complex64>> = columns.to_vec();
    let n = a.len();
    let frob = a.iter().map(|c| norm(c).powi(2)).sum::<f64>().sqrt();
    let tol = rank_tol * frob;
    let mut reflectors = Vec::new();
    for j in 0..n.min(m) {
        let (piv, piv_norm) = (j..n)
            .map(|c| (c, norm(&a[c][j..])))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .expect("nonempty range");
        if piv_norm <= tol || piv_norm == 0.0 {
            return (reflectors, j);
        }
        a.swap(j, piv);
        let x = &a[j][j..];
        let x0 = x[0];
        let phase = if x0.norm() > 0.0 {
            x0 / x0.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let alpha = -phase * piv_norm;
        let mut v: Vec<Complex64> = x.to_vec();
        v[0] -= alpha;
        let vn = norm(&v);
        if vn == 0.0 {
            return (reflectors, j);
        }
        for z in &mut v {
            *z /= vn;
        }
        let r = Reflector { start: j, v };
        for col in a.iter_mut().skip(j) {
            r.apply(col);
        }
        reflectors.push(r);
    }
    let rank = reflectors.len();
    (reflectors, rank)
}

/// Orthonormal basis of the orthogonal complement of the span of
/// `columns` in `C^m`, i.e. the null space of `H^H` for `H = [columns]`.
///
/// Columns within `rank_tol * ||H||_F` of the span of earlier pivots are
/// treated as dependent, which widens the basis.
pub fn orthogonal_complement(
    columns: &[Vec<Complex64>],
    m: usize,
    rank_tol: f64,
) -> Vec<Vec<Complex64>> {
    if columns.is_empty() {
        return (0..m)
            .map(|c| {
                let mut e = vec![Complex64::new(0.0, 0.0); m];
                e[c] = Complex64::new(1.0, 0.0);
                e
            })
            .collect();
    }
    let (reflectors, rank) = pivoted_qr(columns, m, rank_tol);
    (rank..m)
        .map(|c| {
            let mut e = vec![Complex64::new(0.0, 0.0); m];
            e[c] = Complex64::new(1.0, 0.0);
            for r in reflectors.iter().rev() {
                r.apply(&mut e);
            }
            e
        })
        .collect()
}

/// `V^H h`: coordinates of `h` in an orthonormal basis.
pub fn project(basis: &[Vec<Complex64>], h: &[Complex64]) -> Vec<Complex64> {
    basis.iter().map(|v| inner(v, h)).collect()
}

/// `V c`.
pub fn combine(basis: &[Vec<Complex64>], coeffs: &[Complex64], m: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); m];
    for (v, c) in basis.iter().zip(coeffs) {
        for (o, vi) in out.iter_mut().zip(v) {
            *o += vi * c;
        }
    }
    out
}
