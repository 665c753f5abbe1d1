//! Banded LU with partial pivoting, and a cyclic variant for periodic
//! meshes based on a low-rank Woodbury correction.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{HdgError, Result};

/// Square matrix with `kl` sub- and `ku` super-diagonals, stored by rows
/// with room for pivoting fill-in.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    pub fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.ku
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[self.idx(i, j)]
        } else {
            0.0
        }
    }

    /// Add `v` at `(i, j)`; panics outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band");
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for (i, yi) in y.iter_mut().enumerate() {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku + 1).min(self.n);
            for (j, xj) in x.iter().enumerate().take(hi).skip(lo) {
                *yi += self.data[self.idx(i, j)] * xj;
            }
        }
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Factorize in place. Fails on a pivot below `1e-14` times the largest
    /// entry.
    pub fn factorize(mut self) -> Result<BandLu> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let tol = 1e-14 * self.max_abs().max(f64::MIN_POSITIVE);
        let mut piv = vec![0usize; n];
        for k in 0..n {
            let last_row = (k + kl + 1).min(n);
            let last_col = (k + ku + kl + 1).min(n);
            let mut p = k;
            let mut best = self.data[self.idx(k, k)].abs();
            for i in k + 1..last_row {
                let v = self.data[self.idx(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > tol) {
                return Err(HdgError::Solver(format!("zero pivot in banded LU at row {k}")));
            }
            piv[k] = p;
            if p != k {
                for j in k..last_col {
                    let (a, b) = (self.idx(k, j), self.idx(p, j));
                    self.data.swap(a, b);
                }
            }
            let d = self.data[self.idx(k, k)];
            for i in k + 1..last_row {
                let ik = self.idx(i, k);
                let l = self.data[ik] / d;
                self.data[ik] = l;
                if l != 0.0 {
                    for j in k + 1..last_col {
                        let kj = self.data[self.idx(k, j)];
                        let ij = self.idx(i, j);
                        self.data[ij] -= l * kj;
                    }
                }
            }
        }
        Ok(BandLu { m: self, piv })
    }
}

/// LU factors of a [`BandMatrix`].
#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
    piv: Vec<usize>,
}

impl BandLu {
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let a = &self.m;
        let n = a.n;
        for k in 0..n {
            b.swap(k, self.piv[k]);
            let bk = b[k];
            if bk != 0.0 {
                for i in k + 1..(k + a.kl + 1).min(n) {
                    b[i] -= a.data[a.idx(i, k)] * bk;
                }
            }
        }
        for i in (0..n).rev() {
            let mut acc = b[i];
            for j in i + 1..(i + a.ku + a.kl + 1).min(n) {
                acc -= a.data[a.idx(i, j)] * b[j];
            }
            b[i] = acc / a.data[a.idx(i, i)];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Banded matrix plus entries outside the band confined to the two
/// `r x r` corner blocks (periodic coupling).
#[derive(Debug, Clone)]
pub struct CyclicBandMatrix {
    band: BandMatrix,
    block: usize,
    corners: BTreeMap<(usize, usize), f64>,
}

impl CyclicBandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize, block: usize) -> Self {
        Self {
            band: BandMatrix::zeros(n, kl, ku),
            block,
            corners: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.band.n
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        if self.band.in_band(i, j) {
            self.band.add(i, j, v);
        } else {
            let n = self.band.n;
            let r = self.block;
            let upper = i < r && j >= n - r;
            let lower = i >= n - r && j < r;
            assert!(upper || lower, "({i}, {j}) outside band and corners");
            *self.corners.entry((i, j)).or_insert(0.0) += v;
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.band.in_band(i, j) {
            self.band.get(i, j)
        } else {
            self.corners.get(&(i, j)).copied().unwrap_or(0.0)
        }
    }

    /// Coordinates of all stored nonzeros (band entries with exact zeros
    /// are skipped).
    pub fn nonzero_pattern(&self) -> Vec<(usize, usize)> {
        let n = self.band.n;
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if self.get(i, j) != 0.0 {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.band.mul_vec(x);
        for (&(i, j), v) in &self.corners {
            y[i] += v * x[j];
        }
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = self.band.to_dense();
        for (&(i, j), v) in &self.corners {
            d[(i, j)] += v;
        }
        d
    }

    pub fn has_corners(&self) -> bool {
        !self.corners.is_empty()
    }

    pub fn factorize(self) -> Result<CyclicLu> {
        if !self.has_corners() {
            return Ok(CyclicLu::Band(self.band.clone().factorize()?));
        }
        match self.woodbury() {
            Ok(f) => Ok(f),
            Err(_) => self.dense(),
        }
    }

    fn dense(&self) -> Result<CyclicLu> {
        let lu = self.to_dense().lu();
        if !lu.is_invertible() {
            return Err(HdgError::Solver("singular global matrix".into()));
        }
        Ok(CyclicLu::Dense(lu))
    }

    /// `A = B + U V^T` with `U = [G; 0; C_ll]`, `V^T = [I, 0, G^{-1} C_ur]`
    /// and `G = -s I`.
    fn woodbury(&self) -> Result<CyclicLu> {
        let n = self.band.n;
        let r = self.block;
        let mut c_ur = DMatrix::zeros(r, r);
        let mut c_ll = DMatrix::zeros(r, r);
        for (&(i, j), v) in &self.corners {
            if i < r {
                c_ur[(i, j - (n - r))] += v;
            } else {
                c_ll[(i - (n - r), j)] += v;
            }
        }
        let mut s: f64 = 1.0;
        for i in 0..r {
            for j in 0..r {
                s = s.max(self.band.get(i, j).abs());
            }
        }
        let g = -s;
        let mut b = self.band.clone();
        // B = A_band - G (top-left) - C_ll G^{-1} C_ur (bottom-right)
        for i in 0..r {
            b.add(i, i, -g);
        }
        let corr = &c_ll * &c_ur / g;
        for i in 0..r {
            for j in 0..r {
                b.add(n - r + i, n - r + j, -corr[(i, j)]);
            }
        }
        let lu = b.factorize()?;
        // Z = B^{-1} U
        let mut z = DMatrix::zeros(n, r);
        for c in 0..r {
            let mut col = vec![0.0; n];
            col[c] = g;
            for i in 0..r {
                col[n - r + i] = c_ll[(i, c)];
            }
            lu.solve_in_place(&mut col);
            z.set_column(c, &DVector::from_vec(col));
        }
        let vt = {
            let mut vt = DMatrix::zeros(r, n);
            for i in 0..r {
                vt[(i, i)] += 1.0;
                for j in 0..r {
                    vt[(i, n - r + j)] += c_ur[(i, j)] / g;
                }
            }
            vt
        };
        let cap = DMatrix::identity(r, r) + &vt * &z;
        let cap_lu = cap.lu();
        let cap_inv = cap_lu
            .try_inverse()
            .ok_or_else(|| HdgError::Solver("singular Woodbury capacitance".into()))?;
        if cap_inv.iter().any(|v| !v.is_finite()) || cap_inv.norm() > 1e12 {
            return Err(HdgError::Solver("ill-conditioned Woodbury capacitance".into()));
        }
        Ok(CyclicLu::Woodbury {
            lu,
            z,
            vt,
            cap_inv,
        })
    }
}

/// Factorization of a [`CyclicBandMatrix`].
#[derive(Debug, Clone)]
pub enum CyclicLu {
    Band(BandLu),
    Woodbury {
        lu: BandLu,
        z: DMatrix<f64>,
        vt: DMatrix<f64>,
        cap_inv: DMatrix<f64>,
    },
    Dense(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl CyclicLu {
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let x = match self {
            CyclicLu::Band(lu) => lu.solve(b),
            CyclicLu::Woodbury { lu, z, vt, cap_inv } => {
                let y = DVector::from_vec(lu.solve(b));
                let w = cap_inv * (vt * &y);
                (y - z * w).as_slice().to_vec()
            }
            CyclicLu::Dense(lu) => lu
                .solve(&DVector::from_column_slice(b))
                .ok_or_else(|| HdgError::Solver("dense solve failed".into()))?
                .as_slice()
                .to_vec(),
        };
        if x.iter().any(|v| !v.is_finite()) {
            return Err(HdgError::Solver("non-finite global solution".into()));
        }
        Ok(x)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CyclicLu::Band(_) => "band",
            CyclicLu::Woodbury { .. } => "woodbury",
            CyclicLu::Dense(_) => "dense",
        }
    }
}
