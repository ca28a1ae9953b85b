//! Dense univariate polynomials with real-root extraction through the
//! eigenvalues of the companion matrix.

use nalgebra::DMatrix;

/// Polynomial with coefficients in ascending powers.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn constant(c: f64) -> Self {
        Poly(vec![c])
    }

    /// `a + b x`.
    pub fn linear(a: f64, b: f64) -> Self {
        Poly(vec![a, b])
    }

    pub fn x() -> Self {
        Poly::linear(0.0, 1.0)
    }

    pub fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn derivative(&self) -> Poly {
        if self.0.len() <= 1 {
            return Poly::constant(0.0);
        }
        Poly(self.0.iter().enumerate().skip(1).map(|(i, c)| *c * i as f64).collect())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = vec![0.0; self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly(out)
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.0.len().max(other.0.len());
        Poly(
            (0..n)
                .map(|i| self.0.get(i).copied().unwrap_or(0.0) + other.0.get(i).copied().unwrap_or(0.0))
                .collect(),
        )
    }

    pub fn scale(&self, k: f64) -> Poly {
        Poly(self.0.iter().map(|c| c * k).collect())
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(-1.0))
    }

    /// Drops leading coefficients that are negligible relative to the largest one.
    fn trimmed(&self) -> Poly {
        let scale = self.0.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let mut v = self.0.clone();
        while v.len() > 1 && v.last().map_or(false, |c| c.abs() <= 1e-14 * scale) {
            v.pop();
        }
        Poly(v)
    }

    /// All real roots, ascending, polished by Newton's method and merged
    /// when closer than `1e-10` in relative terms.
    pub fn real_roots(&self) -> Vec<f64> {
        let p = self.trimmed();
        let n = p.degree();
        if n == 0 {
            return Vec::new();
        }
        let lead = *p.0.last().unwrap();
        let mut candidates = Vec::with_capacity(n);
        if n == 1 {
            candidates.push(-p.0[0] / lead);
        } else {
            // Companion matrix of the monic polynomial.
            let mut comp = DMatrix::<f64>::zeros(n, n);
            for i in 1..n {
                comp[(i, i - 1)] = 1.0;
            }
            for i in 0..n {
                comp[(i, n - 1)] = -p.0[i] / lead;
            }
            for z in comp.complex_eigenvalues().iter() {
                if z.im.abs() <= 1e-6 * (1.0 + z.re.abs()) {
                    candidates.push(z.re);
                }
            }
        }
        let dp = p.derivative();
        let mut roots: Vec<f64> = candidates.into_iter().map(|r| newton_polish(&p, &dp, r)).collect();
        roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
        roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-10 * (1.0 + a.abs().max(b.abs())));
        roots
    }
}

fn newton_polish(p: &Poly, dp: &Poly, mut x: f64) -> f64 {
    let mut best = (p.eval(x).abs(), x);
    for _ in 0..60 {
        let fx = p.eval(x);
        let d = dp.eval(x);
        if d == 0.0 || !d.is_finite() {
            break;
        }
        let step = fx / d;
        x -= step;
        let fa = p.eval(x).abs();
        if fa < best.0 {
            best = (fa, x);
        }
        if step.abs() <= 1e-15 * (1.0 + x.abs()) {
            break;
        }
    }
    best.1
}
