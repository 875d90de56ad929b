//! Skyline (variable band) storage with in-place LDLᵀ and LU factorizations.
//!
//! Row `i` stores its lower entries for columns `first[i]..i` contiguously; in
//! the unsymmetric case column `i` of the upper triangle uses the same
//! envelope. Assembled finite-element matrices have a structurally symmetric
//! pattern so one envelope serves both triangles.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::SolverError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Profile {
    first: Vec<usize>,
    start: Vec<usize>,
}

impl Profile {
    /// Envelope of the union of element equation lists.
    pub fn from_elements<'a, I>(n: usize, elements: I) -> Self
    where
        I: IntoIterator<Item = &'a [Option<usize>]>,
    {
        let mut first: Vec<usize> = (0..n).collect();
        for eqs in elements {
            let lo = eqs.iter().flatten().copied().min();
            if let Some(lo) = lo {
                for &i in eqs.iter().flatten() {
                    if lo < first[i] {
                        first[i] = lo;
                    }
                }
            }
        }
        Self::from_first(first)
    }

    /// Full lower envelope (dense).
    pub fn dense(n: usize) -> Self {
        Self::from_first(vec![0; n])
    }

    fn from_first(first: Vec<usize>) -> Self {
        let mut start = Vec::with_capacity(first.len() + 1);
        start.push(0);
        let mut acc = 0;
        for (i, &f) in first.iter().enumerate() {
            acc += i - f;
            start.push(acc);
        }
        Self { first, start }
    }

    pub fn n(&self) -> usize {
        self.first.len()
    }

    /// Number of stored off-diagonal entries per triangle.
    pub fn envelope_size(&self) -> usize {
        *self.start.last().unwrap_or(&0)
    }

    #[inline]
    fn index(&self, i: usize, j: usize) -> Option<usize> {
        // entry (i, j) with j < i
        let f = self.first[i];
        (j >= f).then(|| self.start[i] + (j - f))
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut s = [0.0; 4];
    let chunks = n / 4;
    for k in 0..chunks {
        let o = 4 * k;
        s[0] += a[o] * b[o];
        s[1] += a[o + 1] * b[o + 1];
        s[2] += a[o + 2] * b[o + 2];
        s[3] += a[o + 3] * b[o + 3];
    }
    let mut t = (s[0] + s[1]) + (s[2] + s[3]);
    for k in 4 * chunks..n {
        t += a[k] * b[k];
    }
    t
}

#[derive(Debug, Clone)]
pub struct SkylineMatrix {
    profile: Arc<Profile>,
    symmetric: bool,
    diag: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    factored: bool,
}

impl SkylineMatrix {
    pub fn new(profile: Arc<Profile>, symmetric: bool) -> Self {
        let n = profile.n();
        let m = profile.envelope_size();
        Self {
            profile,
            symmetric,
            diag: vec![0.0; n],
            lower: vec![0.0; m],
            upper: if symmetric { Vec::new() } else { vec![0.0; m] },
            factored: false,
        }
    }

    pub fn from_dense(a: &[Vec<f64>], symmetric: bool) -> Self {
        let n = a.len();
        let mut m = Self::new(Arc::new(Profile::dense(n)), symmetric);
        for i in 0..n {
            for j in 0..n {
                if !symmetric || j <= i {
                    m.add(i, j, a[i][j]);
                }
            }
        }
        m
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn is_factored(&self) -> bool {
        self.factored
    }

    pub fn profile(&self) -> &Arc<Profile> {
        &self.profile
    }

    pub fn zero(&mut self) {
        self.diag.iter_mut().for_each(|v| *v = 0.0);
        self.lower.iter_mut().for_each(|v| *v = 0.0);
        self.upper.iter_mut().for_each(|v| *v = 0.0);
        self.factored = false;
    }

    /// Adds `v` at (i, j). For symmetric storage only j ≤ i is stored and
    /// upper-triangle contributions are ignored.
    ///
    /// Panics if (i, j) is outside the envelope.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        use core::cmp::Ordering::*;
        match j.cmp(&i) {
            Equal => self.diag[i] += v,
            Less => {
                let k = self.profile.index(i, j).expect("entry outside skyline envelope");
                self.lower[k] += v;
            }
            Greater => {
                if !self.symmetric {
                    let k = self.profile.index(j, i).expect("entry outside skyline envelope");
                    self.upper[k] += v;
                }
            }
        }
    }

    /// Scatters a dense element matrix (row-major, `eqs.len()` square).
    pub fn add_element(&mut self, eqs: &[Option<usize>], ke: &[f64]) {
        let m = eqs.len();
        for (a, ea) in eqs.iter().enumerate() {
            let Some(i) = *ea else { continue };
            for (b, eb) in eqs.iter().enumerate() {
                let Some(j) = *eb else { continue };
                if self.symmetric && j > i {
                    continue;
                }
                self.add(i, j, ke[a * m + b]);
            }
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        use core::cmp::Ordering::*;
        match j.cmp(&i) {
            Equal => self.diag[i],
            Less => self.profile.index(i, j).map_or(0.0, |k| self.lower[k]),
            Greater => {
                let k = self.profile.index(j, i);
                if self.symmetric {
                    k.map_or(0.0, |k| self.lower[k])
                } else {
                    k.map_or(0.0, |k| self.upper[k])
                }
            }
        }
    }

    /// y = A x for an unfactored matrix.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert!(!self.factored, "matrix already factored");
        let n = self.n();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let f = self.profile.first[i];
            let (s, e) = (self.profile.start[i], self.profile.start[i + 1]);
            y[i] += self.diag[i] * x[i];
            y[i] += dot(&self.lower[s..e], &x[f..i]);
            let up = if self.symmetric { &self.lower[s..e] } else { &self.upper[s..e] };
            for (k, &v) in up.iter().enumerate() {
                y[f + k] += v * x[i];
            }
        }
        y
    }

    /// Factorizes in place: LDLᵀ when symmetric, Doolittle LU otherwise (no
    /// pivoting). `positive_definite` rejects non-positive pivots.
    pub fn factor(&mut self, positive_definite: bool) -> Result<(), SolverError> {
        if self.factored {
            return Ok(());
        }
        let scale = self.diag.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let tiny = scale * 1e-15;
        let n = self.n();
        let p = Arc::clone(&self.profile);
        for i in 0..n {
            let fi = p.first[i];
            let si = p.start[i];
            let a_ii = self.diag[i];
            if self.symmetric {
                // row i holds G_ik = L_ik d_k while sweeping
                for j in fi..i {
                    let fj = p.first[j];
                    let lo = fi.max(fj);
                    let sj = p.start[j];
                    let (lj, li) = (lo - fj, lo - fi);
                    let len = j - lo;
                    let s = {
                        let (row_j, row_i) = (&self.lower[sj + lj..sj + lj + len], &self.lower[si + li..si + li + len]);
                        dot(row_j, row_i)
                    };
                    self.lower[si + (j - fi)] -= s;
                }
                let mut d = a_ii;
                for j in fi..i {
                    let g = self.lower[si + (j - fi)];
                    let l = g / self.diag[j];
                    d -= g * l;
                    self.lower[si + (j - fi)] = l;
                }
                self.diag[i] = d;
            } else {
                for j in fi..i {
                    let fj = p.first[j];
                    let lo = fi.max(fj);
                    let sj = p.start[j];
                    let (lj, li) = (lo - fj, lo - fi);
                    let len = j - lo;
                    // U(j, i) = A(j, i) - L(j, lo..j) · U(lo..j, i)
                    let su = dot(&self.lower[sj + lj..sj + lj + len], &self.upper[si + li..si + li + len]);
                    self.upper[si + (j - fi)] -= su;
                    // L(i, j) = (A(i, j) - L(i, lo..j) · U(lo..j, j)) / U(j, j)
                    let sl = dot(&self.lower[si + li..si + li + len], &self.upper[sj + lj..sj + lj + len]);
                    self.lower[si + (j - fi)] = (self.lower[si + (j - fi)] - sl) / self.diag[j];
                }
                let len = i - fi;
                let s = dot(&self.lower[si..si + len], &self.upper[si..si + len]);
                self.diag[i] = a_ii - s;
            }
            let d = self.diag[i];
            if !d.is_finite() || d.abs() <= tiny.max(a_ii.abs() * 1e-14) {
                return Err(SolverError::Singular { equation: i, pivot: d });
            }
            if positive_definite && d < 0.0 {
                return Err(SolverError::Indefinite { equation: i, pivot: d });
            }
        }
        self.factored = true;
        Ok(())
    }

    /// Solves with a factored matrix, overwriting `b` by the solution.
    pub fn solve_in_place(&self, b: &mut [f64]) -> Result<(), SolverError> {
        assert!(self.factored, "matrix must be factored first");
        let n = self.n();
        if b.len() != n {
            return Err(SolverError::Dimension { expected: n, found: b.len() });
        }
        let p = &self.profile;
        // forward, unit lower
        for i in 0..n {
            let f = p.first[i];
            let (s, e) = (p.start[i], p.start[i + 1]);
            b[i] -= dot(&self.lower[s..e], &b[f..i]);
        }
        if self.symmetric {
            for i in 0..n {
                b[i] /= self.diag[i];
            }
            for i in (0..n).rev() {
                let f = p.first[i];
                let (s, e) = (p.start[i], p.start[i + 1]);
                let xi = b[i];
                for (k, &l) in self.lower[s..e].iter().enumerate() {
                    b[f + k] -= l * xi;
                }
            }
        } else {
            for i in (0..n).rev() {
                let f = p.first[i];
                let (s, e) = (p.start[i], p.start[i + 1]);
                b[i] /= self.diag[i];
                let xi = b[i];
                for (k, &u) in self.upper[s..e].iter().enumerate() {
                    b[f + k] -= u * xi;
                }
            }
        }
        Ok(())
    }
}

/// Assembled linear system over the free equations of one field.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub matrix: SkylineMatrix,
    pub rhs: Vec<f64>,
    pub solution: Vec<f64>,
    /// Reject non-positive pivots.
    pub positive_definite: bool,
}

impl SparseSystem {
    pub fn new(profile: Arc<Profile>, symmetric: bool) -> Self {
        let n = profile.n();
        Self {
            matrix: SkylineMatrix::new(profile, symmetric),
            rhs: vec![0.0; n],
            solution: vec![0.0; n],
            positive_definite: false,
        }
    }

    pub fn reset(&mut self) {
        self.matrix.zero();
        self.rhs.iter_mut().for_each(|v| *v = 0.0);
    }
}

/// Direct solve of an assembled system; the matrix is factored in place and
/// the solution is stored in `system.solution`.
pub fn solve_linear(system: &mut SparseSystem) -> Result<&[f64], SolverError> {
    system.matrix.factor(system.positive_definite)?;
    system.solution.clear();
    system.solution.extend_from_slice(&system.rhs);
    system.matrix.solve_in_place(&mut system.solution)?;
    Ok(&system.solution)
}
