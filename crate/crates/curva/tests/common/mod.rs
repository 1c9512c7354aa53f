//! Independent oracles: radial ODE shooting with classical RK4.
#![allow(dead_code)]

use curva::builders::Jet;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Integrate `y' = f(r, y)` for a 2-vector from `r0` to `r1`.
pub fn rk4(f: &dyn Fn(f64, [f64; 2]) -> [f64; 2], r0: f64, y0: [f64; 2], r1: f64, steps: usize) -> Vec<(f64, [f64; 2])> {
    let h = (r1 - r0) / steps as f64;
    let mut out = Vec::with_capacity(steps + 1);
    let mut y = y0;
    let mut r = r0;
    out.push((r, y));
    for _ in 0..steps {
        let k1 = f(r, y);
        let k2 = f(r + h / 2.0, [y[0] + h / 2.0 * k1[0], y[1] + h / 2.0 * k1[1]]);
        let k3 = f(r + h / 2.0, [y[0] + h / 2.0 * k2[0], y[1] + h / 2.0 * k2[1]]);
        let k4 = f(r + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
        for i in 0..2 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        r += h;
        out.push((r, y));
    }
    out
}

fn bisect(mut lo: f64, mut hi: f64, g: &dyn Fn(f64) -> f64) -> f64 {
    let glo = g(lo);
    assert!(glo * g(hi) < 0.0, "bracket does not change sign");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) * glo > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Radial profile of `-a(φ'' + (n-1)φ'/r) + Vφ = ηφ` from a series start at
/// a small radius.
fn radial_eigen_profile(n: usize, a: f64, v: f64, eta: f64, radius: f64, steps: usize) -> [f64; 2] {
    let k2 = (eta - v) / a;
    let r0 = 1e-6;
    // φ ≈ 1 - k² r² / (2n)
    let y0 = [1.0 - k2 * r0 * r0 / (2.0 * n as f64), -k2 * r0 / n as f64];
    let f = move |r: f64, y: [f64; 2]| [y[1], -(n as f64 - 1.0) / r * y[1] - k2 * y[0]];
    rk4(&f, r0, y0, radius, steps).last().unwrap().1
}

/// Principal eigenvalue of `-aΔ + V` on the ball of radius `radius` in R^n with
/// `∂_ν φ + bφ = 0`, searched in `(lo, hi)`.
pub fn radial_robin_eigenvalue(n: usize, a: f64, v: f64, b: f64, radius: f64, lo: f64, hi: f64) -> f64 {
    let g = |eta: f64| {
        let y = radial_eigen_profile(n, a, v, eta, radius, 20_000);
        y[1] + b * y[0]
    };
    bisect(lo, hi, &g)
}

/// Positive radial solution of `u'' + (2/r)u' = -s u^5 / 8` on `(r1, r2)` with
/// zero Dirichlet data, returned as a sampler.
pub struct DirichletProfile {
    pub r1: f64,
    pub r2: f64,
    pub slope: f64,
    samples: Vec<(f64, [f64; 2])>,
}

impl DirichletProfile {
    pub fn shoot(r1: f64, r2: f64, s: f64) -> DirichletProfile {
        let steps = 40_000;
        let f = move |r: f64, y: [f64; 2]| [y[1], -2.0 / r * y[1] - s * y[0].powi(5) / 8.0];
        // endpoint value as a function of the initial slope; larger slopes
        // oscillate faster, so look for the first sign change
        let end = |slope: f64| {
            let path = rk4(&f, r1, [0.0, slope], r2, steps);
            path.last().unwrap().1[0]
        };
        let mut lo = 1e-3;
        let mut hi = lo;
        while end(hi) > 0.0 {
            lo = hi;
            hi *= 1.5;
            assert!(hi < 1e8, "no Dirichlet solution found");
        }
        let slope = bisect(lo, hi, &end);
        let samples = rk4(&f, r1, [0.0, slope], r2, steps);
        DirichletProfile { r1, r2, slope, samples }
    }

    pub fn value(&self, r: f64) -> f64 {
        if r <= self.r1 || r >= self.r2 {
            return 0.0;
        }
        let h = (self.r2 - self.r1) / (self.samples.len() - 1) as f64;
        let k = (((r - self.r1) / h) as usize).min(self.samples.len() - 2);
        // cubic Hermite between samples
        let (ra, ya) = self.samples[k];
        let (_, yb) = self.samples[k + 1];
        let t = (r - ra) / h;
        let h00 = 2.0 * t * t * t - 3.0 * t * t + 1.0;
        let h10 = t * t * t - 2.0 * t * t + t;
        let h01 = -2.0 * t * t * t + 3.0 * t * t;
        let h11 = t * t * t - t * t;
        h00 * ya[0] + h10 * h * ya[1] + h01 * yb[0] + h11 * h * yb[1]
    }
}

/// Roots of `k cot k = c` on `(0, π)`; used for Robin eigenvalues on 3-balls.
pub fn kcotk_root(c: f64) -> f64 {
    bisect(1e-9, std::f64::consts::PI - 1e-9, &|k: f64| k / k.tan() - c)
}

/// Forward-mode jet in three variables carrying value, gradient and Laplacian.
#[derive(Debug, Clone, Copy)]
pub struct LapJet {
    pub v: f64,
    pub g: [f64; 3],
    pub l: f64,
}

impl LapJet {
    pub fn var(k: usize, x: f64) -> LapJet {
        let mut g = [0.0; 3];
        g[k] = 1.0;
        LapJet { v: x, g, l: 0.0 }
    }

    pub fn cst(c: f64) -> LapJet {
        LapJet { v: c, g: [0.0; 3], l: 0.0 }
    }

    pub fn add(self, o: LapJet) -> LapJet {
        LapJet { v: self.v + o.v, g: [0, 1, 2].map(|k| self.g[k] + o.g[k]), l: self.l + o.l }
    }

    pub fn scale(self, c: f64) -> LapJet {
        LapJet { v: c * self.v, g: self.g.map(|x| c * x), l: c * self.l }
    }

    pub fn mul(self, o: LapJet) -> LapJet {
        let dot: f64 = (0..3).map(|k| self.g[k] * o.g[k]).sum();
        LapJet {
            v: self.v * o.v,
            g: [0, 1, 2].map(|k| self.v * o.g[k] + o.v * self.g[k]),
            l: self.v * o.l + o.v * self.l + 2.0 * dot,
        }
    }

    /// `φ(self)` given `φ`, `φ'`, `φ''` at the value.
    pub fn compose(self, f0: f64, f1: f64, f2: f64) -> LapJet {
        LapJet { v: f0, g: self.g.map(|x| f1 * x), l: f1 * self.l + f2 * self.grad2() }
    }

    pub fn exp(self) -> LapJet {
        let e = self.v.exp();
        self.compose(e, e, e)
    }

    pub fn sin(self) -> LapJet {
        self.compose(self.v.sin(), self.v.cos(), -self.v.sin())
    }

    pub fn powf(self, e: f64) -> LapJet {
        let x = self.v;
        self.compose(x.powf(e), e * x.powf(e - 1.0), e * (e - 1.0) * x.powf(e - 2.0))
    }

    pub fn grad2(&self) -> f64 {
        self.g.iter().map(|x| x * x).sum()
    }

    pub fn dir(&self, nu: [f64; 3]) -> f64 {
        (0..3).map(|k| self.g[k] * nu[k]).sum()
    }
}

/// Random positive smooth field `exp(Σ c sin(k·x + b))` as a jet at `x`.
pub fn random_field(rng: &mut ChaCha8Rng, dim: usize) -> impl Fn([f64; 3]) -> LapJet {
    let modes: Vec<(f64, [f64; 3], f64)> = (0..4)
        .map(|_| {
            let mut k = [0.0; 3];
            for kk in k.iter_mut().take(dim) {
                *kk = rng.gen_range(-2.0..2.0);
            }
            (rng.gen_range(-0.6..0.6), k, rng.gen_range(0.0..6.28))
        })
        .collect();
    let shift = rng.gen_range(-0.5..0.5);
    move |x: [f64; 3]| {
        let mut acc = LapJet::cst(shift);
        for &(c, k, b) in &modes {
            let mut lin = LapJet::cst(b);
            for d in 0..3 {
                lin = lin.add(LapJet::var(d, x[d]).scale(k[d]));
            }
            acc = acc.add(lin.sin().scale(c));
        }
        acc.exp()
    }
}

pub fn jet_of(j: &LapJet, nu: [f64; 3]) -> Jet {
    Jet { value: j.v, grad2: j.grad2(), lap: j.l, dn: j.dir(nu) }
}
