//! Symmetric band matrices: Cholesky factorization, solves and Sylvester
//! inertia counts.

use crate::error::{Error, Result};

/// Symmetric matrix with half-bandwidth `bw`, lower triangle stored by rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SymBand {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl SymBand {
    pub fn zeros(n: usize, bw: usize) -> Self {
        SymBand {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        i * (self.bw + 1) + (self.bw + j - i)
    }

    /// Entry `(i, j)`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    /// Adds `v` to `(i, j)` and, by symmetry, `(j, i)`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        assert!(i - j <= self.bw, "entry ({i}, {j}) outside band {}", self.bw);
        let k = self.slot(i, j);
        self.data[k] += v;
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &SymBand) -> SymBand {
        assert_eq!(self.n, other.n);
        let bw = self.bw.max(other.bw);
        let mut out = SymBand::zeros(self.n, bw);
        for i in 0..self.n {
            for j in i.saturating_sub(bw)..=i {
                let v = self.get(i, j) + a * other.get(i, j);
                if v != 0.0 {
                    out.add(i, j, v);
                }
            }
        }
        out
    }

    /// Adds `d[i]` to the diagonal.
    pub fn add_diagonal(&mut self, d: &[f64]) {
        assert_eq!(d.len(), self.n);
        for (i, di) in d.iter().enumerate() {
            self.add(i, i, *di);
        }
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.n {
            let row = &self.data[i * (self.bw + 1)..(i + 1) * (self.bw + 1)];
            let j0 = i.saturating_sub(self.bw);
            let mut acc = row[self.bw] * x[i];
            for j in j0..i {
                let a = row[self.bw + j - i];
                acc += a * x[j];
                y[j] += a * x[i];
            }
            y[i] += acc;
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    /// Number of negative pivots of `L D L^T` without pivoting, which by
    /// Sylvester's law is the number of negative eigenvalues. Exact zero
    /// pivots are nudged to a tiny positive value.
    pub fn negative_count(&self) -> usize {
        let n = self.n;
        let bw = self.bw;
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tiny = f64::EPSILON * f64::EPSILON * scale.max(f64::MIN_POSITIVE);
        let mut l = vec![0.0; n * (bw + 1)];
        let mut d = vec![0.0; n];
        let mut count = 0;
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..i {
                let mut s = self.data[self.slot(i, j)];
                let k0 = j0.max(j.saturating_sub(bw));
                for k in k0..j {
                    s -= l[self.slot(i, k)] * l[self.slot(j, k)] * d[k];
                }
                l[self.slot(i, j)] = s / d[j];
            }
            let mut s = self.data[self.slot(i, i)];
            for k in j0..i {
                let lik = l[self.slot(i, k)];
                s -= lik * lik * d[k];
            }
            if s == 0.0 {
                s = tiny;
            }
            if s < 0.0 {
                count += 1;
            }
            d[i] = s;
        }
        count
    }
}

/// Banded Cholesky factor `A = L L^T`.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    /// Fails with the offending pivot index when `A` is not positive definite.
    pub fn factor(a: &SymBand) -> std::result::Result<Self, usize> {
        let n = a.n;
        let bw = a.bw;
        let mut l = a.data.clone();
        let at = |i: usize, j: usize| i * (bw + 1) + (bw + j - i);
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let mut s = l[at(i, j)];
                let k0 = j0.max(j.saturating_sub(bw));
                for k in k0..j {
                    s -= l[at(i, k)] * l[at(j, k)];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(i);
                    }
                    l[at(i, i)] = s.sqrt();
                } else {
                    l[at(i, j)] = s / l[at(j, j)];
                }
            }
        }
        Ok(BandCholesky { n, bw, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let bw = self.bw;
        let at = |i: usize, j: usize| i * (bw + 1) + (bw + j - i);
        for i in 0..self.n {
            let mut s = b[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.l[at(i, k)] * b[k];
            }
            b[i] = s / self.l[at(i, i)];
        }
        for i in (0..self.n).rev() {
            let mut s = b[i];
            for k in i + 1..(i + bw + 1).min(self.n) {
                s -= self.l[at(k, i)] * b[k];
            }
            b[i] = s / self.l[at(i, i)];
        }
    }
}

/// Smallest eigenvalue of the pencil `A x = lambda G x` (`G` positive
/// definite) by bisection on the inertia of `A - sigma G`.
pub fn smallest_generalized_eigenvalue(a: &SymBand, g: &SymBand, rel_tol: f64) -> Result<f64> {
    if a.dim() != g.dim() {
        return Err(Error::Numerical("pencil dimensions differ".into()));
    }
    if BandCholesky::factor(g).is_err() {
        return Err(Error::Numerical("metric form is not positive definite".into()));
    }
    let below = |sigma: f64| a.axpy(-sigma, g).negative_count();
    let scale = {
        let amax = a.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let gmin = (0..g.dim()).map(|i| g.get(i, i)).fold(f64::INFINITY, f64::min);
        (amax / gmin.max(f64::MIN_POSITIVE)).max(f64::MIN_POSITIVE)
    };
    let mut hi = scale;
    let mut tries = 0;
    while below(hi) == 0 {
        hi *= 2.0;
        tries += 1;
        if tries > 200 {
            return Err(Error::Numerical("no eigenvalue bracket found above".into()));
        }
    }
    let mut lo = -scale;
    tries = 0;
    while below(lo) > 0 {
        lo *= 2.0;
        tries += 1;
        if tries > 200 {
            return Err(Error::Numerical("no eigenvalue bracket found below".into()));
        }
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if hi - lo <= rel_tol * lo.abs().max(hi.abs()) {
            break;
        }
        if below(mid) > 0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> SymBand {
        let mut a = SymBand::zeros(n, 1);
        for i in 0..n {
            a.add(i, i, 2.0);
            if i > 0 {
                a.add(i, i - 1, -1.0);
            }
        }
        a
    }

    #[test]
    fn cholesky_solves_tridiagonal() {
        let a = laplacian(6);
        let f = BandCholesky::factor(&a).unwrap();
        let x: Vec<f64> = (0..6).map(|i| (i as f64).sin() + 1.0).collect();
        let mut b = vec![0.0; 6];
        a.mul_vec(&x, &mut b);
        f.solve_in_place(&mut b);
        for (u, v) in x.iter().zip(&b) {
            assert!((u - v).abs() < 1e-13);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut a = laplacian(4);
        a.add(2, 2, -5.0);
        assert!(BandCholesky::factor(&a).is_err());
    }

    #[test]
    fn inertia_and_bisection_match_laplacian_spectrum() {
        let n = 8;
        let a = laplacian(n);
        let mut id = SymBand::zeros(n, 0);
        id.add_diagonal(&vec![1.0; n]);
        // eigenvalues 2 - 2 cos(k pi / (n+1))
        let lmin = 2.0 - 2.0 * (std::f64::consts::PI / (n as f64 + 1.0)).cos();
        assert_eq!(a.axpy(-1.0, &id).negative_count(), 2);
        let est = smallest_generalized_eigenvalue(&a, &id, 1e-15).unwrap();
        assert!((est - lmin).abs() < 1e-13);
    }
}
