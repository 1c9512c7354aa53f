//! Sparse symmetric-pattern matrices, banded LU with partial pivoting, and
//! Jacobi-preconditioned conjugate gradients.

use crate::error::{Error, Result};

/// Row-compressed matrix with sorted column indices.
#[derive(Debug, Clone)]
pub struct Csr {
    pub n: usize,
    pub start: Vec<usize>,
    pub col: Vec<usize>,
    pub val: Vec<f64>,
}

impl Csr {
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Csr {
        let n = rows.len();
        let mut start = Vec::with_capacity(n + 1);
        let mut col = Vec::new();
        let mut val = Vec::new();
        start.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                if last == Some(c) {
                    *val.last_mut().unwrap() += v;
                } else {
                    col.push(c);
                    val.push(v);
                    last = Some(c);
                }
            }
            start.push(col.len());
        }
        Csr { n, start, col, val }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.start[i]..self.start[i + 1]).map(move |k| (self.col[k], self.val[k]))
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(c, v)| v * x[c]).sum()).collect()
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).find(|e| e.0 == i).map(|e| e.1).unwrap_or(0.0)).collect()
    }

    /// (lower, upper) bandwidths.
    pub fn bandwidths(&self) -> (usize, usize) {
        let mut kl = 0;
        let mut ku = 0;
        for i in 0..self.n {
            for (c, _) in self.row(i) {
                if c < i {
                    kl = kl.max(i - c);
                } else {
                    ku = ku.max(c - i);
                }
            }
        }
        (kl, ku)
    }
}

/// LU factors of a banded matrix, `P A = L U`.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    /// Row r, column c lives at `r * width + (c + kl - r)`.
    u: Vec<f64>,
    l: Vec<f64>,
    piv: Vec<usize>,
}

impl BandLu {
    pub fn factor(a: &Csr) -> Result<BandLu> {
        let n = a.n;
        let (kl, ku) = a.bandwidths();
        let width = 2 * kl + ku + 1;
        let mut u = vec![0.0; n * width];
        let mut scale: f64 = 0.0;
        for i in 0..n {
            for (c, v) in a.row(i) {
                u[i * width + (c + kl - i)] = v;
                scale = scale.max(v.abs());
            }
        }
        if scale == 0.0 {
            return Err(Error::SingularOperator("zero matrix".into()));
        }
        let mut l = vec![0.0; n * kl.max(1)];
        let mut piv = vec![0; n];
        let idx = |r: usize, c: usize| r * width + (c + kl - r);
        for i in 0..n {
            let rmax = (i + kl).min(n - 1);
            let mut p = i;
            let mut best = u[idx(i, i)].abs();
            for r in i + 1..=rmax {
                let v = u[idx(r, i)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best <= 1e-13 * scale {
                return Err(Error::SingularOperator(format!("pivot {best:e} at row {i} (scale {scale:e})")));
            }
            piv[i] = p;
            let cmax = (i + kl + ku).min(n - 1);
            if p != i {
                for c in i..=cmax {
                    u.swap(idx(i, c), idx(p, c));
                }
            }
            let d = u[idx(i, i)];
            let len = cmax - i;
            for r in i + 1..=rmax {
                let f = u[idx(r, i)] / d;
                l[i * kl + (r - i - 1)] = f;
                if f != 0.0 {
                    u[idx(r, i)] = 0.0;
                    // columns i+1..=cmax are contiguous in both rows
                    let (head, tail) = u.split_at_mut(r * width);
                    let src = &head[i * width + kl + 1..i * width + kl + 1 + len];
                    let start = i + 1 + kl - r;
                    for (x, y) in tail[start..start + len].iter_mut().zip(src) {
                        *x -= f * y;
                    }
                }
            }
        }
        Ok(BandLu { n, kl, ku, width, u, l, piv })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let kl = self.kl;
        let mut x = b.to_vec();
        for i in 0..n {
            let p = self.piv[i];
            if p != i {
                x.swap(i, p);
            }
            let xi = x[i];
            if xi != 0.0 {
                for r in i + 1..=(i + kl).min(n - 1) {
                    x[r] -= self.l[i * kl + (r - i - 1)] * xi;
                }
            }
        }
        for i in (0..n).rev() {
            let end = (i + kl + self.ku).min(n - 1);
            let row = &self.u[i * self.width + kl + 1..i * self.width + kl + 1 + (end - i)];
            let s: f64 = row.iter().zip(&x[i + 1..=end]).map(|(a, b)| a * b).sum();
            x[i] = (x[i] - s) / self.u[i * self.width + kl];
        }
        x
    }
}

/// Jacobi-preconditioned CG for symmetric positive definite systems.
pub fn pcg(a: &Csr, b: &[f64], rel_tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = a.n;
    let d = a.diag();
    if d.iter().any(|&x| x <= 0.0) {
        return Err(Error::SingularOperator("non-positive diagonal in CG".into()));
    }
    let bn = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut x = vec![0.0; n];
    if bn == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&d).map(|(a, b)| a / b).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    for _ in 0..max_iter {
        let ap = a.mul(&p);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            return Err(Error::SingularOperator("CG breakdown: operator not positive definite".into()));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rn = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        if rn <= rel_tol * bn {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] / d[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::IterationDiverged(format!("CG did not reach {rel_tol:e} in {max_iter} iterations")))
}
