//! Sparse symmetric eigensolver building blocks: banded Cholesky and LDLᵀ
//! factorizations, a tridiagonal QL eigensolver, and a shift-invert Lanczos
//! iteration with full reorthogonalization.
//!
//! Everything here is deterministic: the Lanczos start vector comes from a
//! fixed-seed splitmix64 stream, so repeated runs are bitwise identical.

use crate::error::{Error, Result};

/// Symmetric banded matrix, lower band stored by columns.
///
/// Entry `(col + r, col)` for `r in 0..=bw` lives at `cols[col*(bw+1) + r]`;
/// entries beyond the band are implicitly zero.
#[derive(Debug, Clone)]
pub struct BandedSym {
    pub n: usize,
    pub bw: usize,
    cols: Vec<f64>,
}

/// Signs of the pivots of an LDLᵀ factorization: by Sylvester's law of
/// inertia, `positive` equals the number of eigenvalues above zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
}

impl BandedSym {
    pub fn zeros(n: usize, bw: usize) -> Self {
        assert!(n >= 1 && bw < n, "need 1 ≤ bw+1 ≤ n");
        BandedSym { n, bw, cols: vec![0.0; n * (bw + 1)] }
    }

    #[inline]
    pub fn set(&mut self, col: usize, offset: usize, value: f64) {
        debug_assert!(offset <= self.bw && col + offset < self.n);
        self.cols[col * (self.bw + 1) + offset] = value;
    }

    #[cfg(test)]
    #[inline]
    pub fn at(&self, col: usize, offset: usize) -> f64 {
        debug_assert!(offset <= self.bw && col + offset < self.n);
        self.cols[col * (self.bw + 1) + offset]
    }

    /// Largest absolute diagonal entry (scale reference for pivot tests).
    pub fn diag_abs_max(&self) -> f64 {
        let s = self.bw + 1;
        (0..self.n).map(|j| self.cols[j * s].abs()).fold(0.0, f64::max)
    }

    /// Cholesky factorization `A = L·Lᵀ`; fails with a convergence error if
    /// the matrix is not positive definite.
    pub fn cholesky(mut self) -> Result<CholeskyBanded> {
        let (n, bw) = (self.n, self.bw);
        let s = bw + 1;
        for j in 0..n {
            let kmin = j.saturating_sub(bw);
            let (head, tail) = self.cols.split_at_mut(j * s);
            let colj = &mut tail[..s];
            for k in kmin..j {
                let off = j - k;
                let top = usize::min(n - 1, k + bw);
                let len = top - j + 1;
                let colk = &head[k * s + off..k * s + off + len];
                let ljk = colk[0];
                if ljk != 0.0 {
                    for (dst, &src) in colj[..len].iter_mut().zip(colk) {
                        *dst -= ljk * src;
                    }
                }
            }
            let d = colj[0];
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NumericalConvergence {
                    context: "banded Cholesky: matrix not positive definite".into(),
                    iterations: j,
                    residual: d,
                });
            }
            let inv = 1.0 / d.sqrt();
            let maxr = usize::min(bw, n - 1 - j);
            for v in colj[..=maxr].iter_mut() {
                *v *= inv;
            }
        }
        Ok(CholeskyBanded { n, bw, cols: self.cols })
    }

    /// Pivot signs of the (unpivoted) LDLᵀ factorization.  Errors out when
    /// a pivot falls below `rel_tol` times the largest initial diagonal —
    /// the caller should perturb its shift and retry.
    pub fn ldlt_inertia(mut self, rel_tol: f64) -> Result<Inertia> {
        let (n, bw) = (self.n, self.bw);
        let s = bw + 1;
        let scale = self.diag_abs_max().max(f64::MIN_POSITIVE);
        let mut inertia = Inertia { positive: 0, negative: 0 };
        for j in 0..n {
            let kmin = j.saturating_sub(bw);
            let (head, tail) = self.cols.split_at_mut(j * s);
            let colj = &mut tail[..s];
            for k in kmin..j {
                let off = j - k;
                let top = usize::min(n - 1, k + bw);
                let len = top - j + 1;
                let colk = &head[k * s..k * s + off + len];
                let w = colk[off] * colk[0]; // L[j,k] · d_k
                if w != 0.0 {
                    for (dst, &src) in colj[..len].iter_mut().zip(&colk[off..]) {
                        *dst -= w * src;
                    }
                }
            }
            let d = colj[0];
            if !d.is_finite() || d.abs() <= rel_tol * scale {
                return Err(Error::NumericalConvergence {
                    context: "banded LDLᵀ: pivot breakdown (shift too close to an eigenvalue)".into(),
                    iterations: j,
                    residual: d,
                });
            }
            if d > 0.0 {
                inertia.positive += 1;
            } else {
                inertia.negative += 1;
            }
            let maxr = usize::min(bw, n - 1 - j);
            let inv = 1.0 / d;
            for v in colj[1..maxr + 1].iter_mut() {
                *v *= inv;
            }
        }
        Ok(inertia)
    }
}

/// Factored form of a banded symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct CholeskyBanded {
    n: usize,
    bw: usize,
    cols: Vec<f64>,
}

impl CholeskyBanded {
    /// Solve `A x = b` in place (forward then backward substitution).
    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        let (n, bw, s) = (self.n, self.bw, self.bw + 1);
        for j in 0..n {
            let colj = &self.cols[j * s..(j + 1) * s];
            let yj = x[j] / colj[0];
            x[j] = yj;
            let maxr = usize::min(bw, n - 1 - j);
            for r in 1..=maxr {
                x[j + r] -= colj[r] * yj;
            }
        }
        for j in (0..n).rev() {
            let colj = &self.cols[j * s..(j + 1) * s];
            let maxr = usize::min(bw, n - 1 - j);
            let mut acc = x[j];
            for r in 1..=maxr {
                acc -= colj[r] * x[j + r];
            }
            x[j] = acc / colj[0];
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

#[inline]
fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Implicit-QL eigendecomposition of a symmetric tridiagonal matrix.
///
/// `d` holds the diagonal, `off[i]` couples rows `i` and `i+1`
/// (`off.len() == d.len()`, last slot used as scratch).  On return `d` is
/// ascending and column `c` of the row-major `z` (initialized by the caller,
/// normally to the identity) holds the corresponding eigenvector.
pub fn tql2(d: &mut [f64], off: &mut [f64], z: &mut [f64]) -> Result<()> {
    let m = d.len();
    if m == 0 {
        return Ok(());
    }
    assert!(off.len() == m && z.len() == m * m);
    off[m - 1] = 0.0;
    for l in 0..m {
        let mut iter = 0;
        loop {
            let mut seg = l;
            while seg < m - 1 {
                let dd = d[seg].abs() + d[seg + 1].abs();
                if off[seg].abs() <= f64::EPSILON * dd {
                    break;
                }
                seg += 1;
            }
            if seg == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::NumericalConvergence {
                    context: "tridiagonal QL iteration stalled".into(),
                    iterations: iter,
                    residual: off[l],
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * off[l]);
            let mut r = g.hypot(1.0);
            g = d[seg] - d[l] + off[l] / (g + if g >= 0.0 { r } else { -r });
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut early = false;
            for i in (l..seg).rev() {
                let mut f = s * off[i];
                let b = c * off[i];
                r = f.hypot(g);
                off[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    off[seg] = 0.0;
                    early = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for row in z.chunks_exact_mut(m) {
                    f = row[i + 1];
                    row[i + 1] = s * row[i] + c * f;
                    row[i] = c * row[i] - s * f;
                }
            }
            if early {
                continue;
            }
            d[l] -= p;
            off[l] = g;
            off[seg] = 0.0;
        }
    }
    // Sort ascending, carrying eigenvector columns along.
    for i in 0..m {
        let mut kmin = i;
        for k in i + 1..m {
            if d[k] < d[kmin] {
                kmin = k;
            }
        }
        if kmin != i {
            d.swap(i, kmin);
            for row in z.chunks_exact_mut(m) {
                row.swap(i, kmin);
            }
        }
    }
    Ok(())
}

/// Ritz approximations extracted from a Lanczos subspace, ordered by
/// descending Ritz value.
#[derive(Debug, Clone)]
pub struct RitzSet {
    /// Ritz values of the iterated operator, descending.
    pub values: Vec<f64>,
    /// Residual bounds ‖M·y − θ·y‖ for each Ritz pair.
    pub bounds: Vec<f64>,
    coeffs: Vec<f64>,
    m: usize,
}

impl RitzSet {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Coefficient column (in the Lanczos basis) of Ritz pair `k`.
    pub fn coeff_column(&self, k: usize) -> &[f64] {
        &self.coeffs[k * self.m..(k + 1) * self.m]
    }
}

/// Lanczos iteration for the largest eigenvalues of a symmetric operator
/// `M`, with full (two-pass) reorthogonalization against the stored basis.
#[derive(Debug)]
pub struct Lanczos {
    n: usize,
    basis: Vec<f64>,
    alphas: Vec<f64>,
    betas: Vec<f64>,
    work: Vec<f64>,
    exhausted: bool,
}

impl Lanczos {
    /// Start from a deterministic pseudo-random unit vector generated by
    /// `seed`.
    pub fn new(n: usize, seed: u64) -> Self {
        let mut state = seed;
        let mut v0: Vec<f64> = (0..n)
            .map(|_| (splitmix64(&mut state) >> 11) as f64 / (1u64 << 53) as f64 - 0.5)
            .collect();
        let nrm = norm(&v0);
        for v in &mut v0 {
            *v /= nrm;
        }
        Lanczos {
            n,
            basis: v0,
            alphas: Vec::new(),
            betas: Vec::new(),
            work: vec![0.0; n],
            exhausted: false,
        }
    }

    /// Number of completed iterations (the subspace dimension).
    pub fn steps(&self) -> usize {
        self.alphas.len()
    }

    /// True once the Krylov space became invariant (recurrence broke down);
    /// no further steps are possible.
    pub fn exhausted(&self) -> bool {
        self.exhausted
    }

    /// One Lanczos step: apply the operator to the newest basis vector,
    /// orthogonalize, and append the next basis vector.
    pub fn step(&mut self, apply: &mut dyn FnMut(&[f64], &mut [f64])) {
        if self.exhausted {
            return;
        }
        let n = self.n;
        let m = self.alphas.len();
        let u_range = m * n..(m + 1) * n;
        apply(&self.basis[u_range.clone()], &mut self.work);
        let alpha = dot(&self.basis[u_range.clone()], &self.work);
        {
            let u = &self.basis[u_range];
            axpy(&mut self.work, -alpha, u);
        }
        if m > 0 {
            let beta_prev = self.betas[m - 1];
            let v_prev = &self.basis[(m - 1) * n..m * n];
            axpy(&mut self.work, -beta_prev, v_prev);
        }
        for _ in 0..2 {
            for k in 0..=m {
                let c = &self.basis[k * n..(k + 1) * n];
                let g = dot(c, &self.work);
                axpy(&mut self.work, -g, c);
            }
        }
        let beta = norm(&self.work);
        let floor = 1e-13 * (alpha.abs() + self.betas.last().copied().unwrap_or(1.0).abs());
        self.alphas.push(alpha);
        if beta <= floor || !beta.is_finite() {
            self.exhausted = true;
            return;
        }
        let inv = 1.0 / beta;
        self.basis.extend(self.work.iter().map(|&w| w * inv));
        self.betas.push(beta);
    }

    /// Diagonalize the projected tridiagonal matrix and return Ritz pairs
    /// ordered by descending Ritz value.
    pub fn ritz(&self) -> Result<RitzSet> {
        let m = self.alphas.len();
        if m == 0 {
            return Ok(RitzSet { values: vec![], bounds: vec![], coeffs: vec![], m: 0 });
        }
        let mut d = self.alphas.clone();
        let mut off = vec![0.0; m];
        let tail_beta = if self.exhausted || self.betas.len() < m {
            0.0
        } else {
            self.betas[m - 1]
        };
        off[..m - 1].copy_from_slice(&self.betas[..m - 1]);
        let mut z = vec![0.0; m * m];
        for i in 0..m {
            z[i * m + i] = 1.0;
        }
        tql2(&mut d, &mut off, &mut z)?;
        // Reverse to descending order, extracting coefficient columns.
        let mut values = Vec::with_capacity(m);
        let mut bounds = Vec::with_capacity(m);
        let mut coeffs = vec![0.0; m * m];
        for (k, src) in (0..m).rev().enumerate() {
            values.push(d[src]);
            bounds.push((tail_beta * z[(m - 1) * m + src]).abs());
            for r in 0..m {
                coeffs[k * m + r] = z[r * m + src];
            }
        }
        Ok(RitzSet { values, bounds, coeffs, m })
    }

    /// Assemble the full-space Ritz vector for coefficient column `s`,
    /// normalized to unit Euclidean norm.
    pub fn assemble(&self, s: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = vec![0.0; n];
        for (k, &sk) in s.iter().enumerate() {
            if sk != 0.0 {
                axpy(&mut x, sk, &self.basis[k * n..(k + 1) * n]);
            }
        }
        let nrm = norm(&x);
        if nrm > 0.0 {
            for v in &mut x {
                *v /= nrm;
            }
        }
        x
    }
}
