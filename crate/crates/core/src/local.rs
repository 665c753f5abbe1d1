//! Element-local Galerkin system and its static condensation.
//!
//! On element `I = (x_L, x_R)` the unknowns are the Legendre coefficients
//! of `(u, q, p, r, s)`, stacked as `X = [U; Q; P; R; S]` (`5(k+1)`
//! entries). The five trace inputs are ordered
//! `t = [u_hat_L, u_hat_R, q_hat_L, q_hat_R, p_hat_R]`. The derived traces
//! `p_hat^+`, `r_hat^±`, `s_hat^±` are substituted into the weak forms so the
//! local system reads
//!
//! ```text
//! A X + B t + N(X, t) = load
//! ```
//!
//! where `N` collects the flux terms `-(F(u_h), v_x) + <F(u_hat) - tau_F (u_hat - u_h) n, v n>`.

use nalgebra::{DMatrix, DVector, LU};

use crate::basis::ReferenceBasis;
use crate::error::{HdgError, Result};
use crate::problem::Flux;
use crate::stabilization::{tau_f_value, DerivedTraceTable, StabilizationConfig, TauFluxRule};

/// Trace slots in the element trace vector.
pub const U_LEFT: usize = 0;
pub const U_RIGHT: usize = 1;
pub const Q_LEFT: usize = 2;
pub const Q_RIGHT: usize = 3;
pub const P_RIGHT: usize = 4;

/// Face quantity rows: left face (`x_L^+`) then right face (`x_R^-`).
pub const FACE_P_PLUS: usize = 0;
pub const FACE_R_PLUS: usize = 1;
pub const FACE_S_PLUS: usize = 2;
pub const FACE_F_PLUS: usize = 3;
pub const FACE_P_MINUS: usize = 4;
pub const FACE_R_MINUS: usize = 5;
pub const FACE_S_MINUS: usize = 6;
pub const FACE_F_MINUS: usize = 7;
pub const N_FACE: usize = 8;

/// The five variables of the first-order system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    U = 0,
    Q = 1,
    P = 2,
    R = 3,
    S = 4,
}

impl Var {
    pub const ALL: [Var; 5] = [Var::U, Var::Q, Var::P, Var::R, Var::S];

    pub fn name(self) -> &'static str {
        match self {
            Var::U => "u",
            Var::Q => "q",
            Var::P => "p",
            Var::R => "r",
            Var::S => "s",
        }
    }
}

/// Coefficients of `(u, q, p, r, s)` on one element, stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementState {
    n_modes: usize,
    data: Vec<f64>,
}

impl ElementState {
    pub fn zeros(n_modes: usize) -> Self {
        Self {
            n_modes,
            data: vec![0.0; 5 * n_modes],
        }
    }

    pub fn from_vec(n_modes: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), 5 * n_modes);
        Self { n_modes, data }
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn var(&self, v: Var) -> &[f64] {
        let m = self.n_modes;
        &self.data[v as usize * m..(v as usize + 1) * m]
    }

    pub fn var_mut(&mut self, v: Var) -> &mut [f64] {
        let m = self.n_modes;
        &mut self.data[v as usize * m..(v as usize + 1) * m]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Value of variable `v` at the right endpoint (`L_j(1) = 1`).
    pub fn right_value(&self, v: Var) -> f64 {
        self.var(v).iter().sum()
    }

    /// Value of variable `v` at the left endpoint (`L_j(-1) = (-1)^j`).
    pub fn left_value(&self, v: Var) -> f64 {
        self.var(v)
            .iter()
            .enumerate()
            .map(|(j, c)| if j % 2 == 0 { *c } else { -*c })
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Numeric values of the derived traces on both faces of an element.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FaceData {
    pub p_plus: f64,
    pub r_plus: f64,
    pub s_plus: f64,
    pub flux_plus: f64,
    pub p_minus: f64,
    pub r_minus: f64,
    pub s_minus: f64,
    pub flux_minus: f64,
}

impl FaceData {
    fn from_array(a: &[f64; N_FACE]) -> Self {
        Self {
            p_plus: a[FACE_P_PLUS],
            r_plus: a[FACE_R_PLUS],
            s_plus: a[FACE_S_PLUS],
            flux_plus: a[FACE_F_PLUS],
            p_minus: a[FACE_P_MINUS],
            r_minus: a[FACE_R_MINUS],
            s_minus: a[FACE_S_MINUS],
            flux_minus: a[FACE_F_MINUS],
        }
    }
}

/// Flux data needed to evaluate the nonlinear terms.
#[derive(Debug, Clone, Copy)]
pub struct FluxTerms<'a> {
    pub flux: &'a Flux,
    pub rule: TauFluxRule,
}

/// Linear part of the element system plus its factorization.
#[derive(Debug, Clone)]
pub struct LocalOperator {
    element: usize,
    h: f64,
    gamma: f64,
    alpha: f64,
    beta: f64,
    n_modes: usize,
    a: DMatrix<f64>,
    a_static: DMatrix<f64>,
    mass: Vec<f64>,
    b: DMatrix<f64>,
    face_x: DMatrix<f64>,
    face_t: DMatrix<f64>,
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

fn block(v: Var, m: usize) -> usize {
    v as usize * m
}

/// Factorize `a`, flagging exactly singular or numerically rank-deficient
/// matrices.
pub(crate) fn factorize(a: DMatrix<f64>, element: usize) -> Result<LU<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    if a.iter().any(|x| !x.is_finite()) {
        return Err(HdgError::Condensation {
            element,
            reason: "non-finite matrix entries".into(),
        });
    }
    let lu = a.lu();
    let u = lu.u();
    let diag: Vec<f64> = (0..u.nrows()).map(|i| u[(i, i)].abs()).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || min <= 1e-14 * max {
        return Err(HdgError::Condensation {
            element,
            reason: format!("singular local matrix (pivot ratio {:.3e})", if max > 0.0 { min / max } else { 0.0 }),
        });
    }
    Ok(lu)
}

impl LocalOperator {
    /// Assemble the linear part of the local equations on an element of
    /// width `h` and factorize it.
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        element: usize,
        h: f64,
        basis: &ReferenceBasis,
        cfg: &StabilizationConfig,
        gamma: f64,
        alpha: f64,
        beta: f64,
    ) -> Result<Self> {
        let m = basis.n_modes();
        let n = 5 * m;
        let stiff = basis.weak_derivative_matrix();
        let mass: Vec<f64> = (0..m).map(|j| h / (2.0 * j as f64 + 1.0)).collect();
        let e_r = basis.right_values();
        let e_l = basis.left_values();
        let table: DerivedTraceTable = cfg.derived_traces();

        // Face rows (linear parts).
        let mut face_x = DMatrix::zeros(N_FACE, n);
        let mut face_t = DMatrix::zeros(N_FACE, 5);
        {
            let mut left = |row: usize, own: Var, c: &crate::stabilization::TraceClosure| {
                for j in 0..m {
                    face_x[(row, block(own, m) + j)] += e_l[j];
                    face_x[(row, block(Var::U, m) + j)] -= c.gap_u * e_l[j];
                    face_x[(row, block(Var::Q, m) + j)] -= c.gap_q * e_l[j];
                }
                face_t[(row, U_LEFT)] += c.gap_u;
                face_t[(row, Q_LEFT)] += c.gap_q;
            };
            left(FACE_P_PLUS, Var::P, &table.p_plus);
            left(FACE_R_PLUS, Var::R, &table.r_plus);
            left(FACE_S_PLUS, Var::S, &table.s_plus);
        }
        {
            let mut right = |row: usize, own: Var, c: &crate::stabilization::TraceClosure| {
                for j in 0..m {
                    face_x[(row, block(own, m) + j)] += e_r[j];
                    face_x[(row, block(Var::U, m) + j)] -= c.gap_u * e_r[j];
                    face_x[(row, block(Var::Q, m) + j)] -= c.gap_q * e_r[j];
                    face_x[(row, block(Var::P, m) + j)] -= c.gap_p * e_r[j];
                }
                face_t[(row, U_RIGHT)] += c.gap_u;
                face_t[(row, Q_RIGHT)] += c.gap_q;
                face_t[(row, P_RIGHT)] += c.gap_p;
            };
            right(FACE_R_MINUS, Var::R, &table.r_minus);
            right(FACE_S_MINUS, Var::S, &table.s_minus);
        }
        face_t[(FACE_P_MINUS, P_RIGHT)] = 1.0;
        // Linear part of F_hat = alpha p_hat + beta s_hat.
        for c in 0..n {
            face_x[(FACE_F_PLUS, c)] =
                alpha * face_x[(FACE_P_PLUS, c)] + beta * face_x[(FACE_S_PLUS, c)];
            face_x[(FACE_F_MINUS, c)] =
                alpha * face_x[(FACE_P_MINUS, c)] + beta * face_x[(FACE_S_MINUS, c)];
        }
        for c in 0..5 {
            face_t[(FACE_F_PLUS, c)] =
                alpha * face_t[(FACE_P_PLUS, c)] + beta * face_t[(FACE_S_PLUS, c)];
            face_t[(FACE_F_MINUS, c)] =
                alpha * face_t[(FACE_P_MINUS, c)] + beta * face_t[(FACE_S_MINUS, c)];
        }

        let mut a = DMatrix::zeros(n, n);
        let mut b = DMatrix::zeros(n, 5);

        // (w_next, v) + (w, v_x) - <w_hat, v n> = 0 for the four derivative
        // relations, w -> w_next in (u->q, q->p, p->r, r->s).
        let chain = [(Var::U, Var::Q), (Var::Q, Var::P), (Var::P, Var::R), (Var::R, Var::S)];
        for (eq, &(w, w_next)) in chain.iter().enumerate() {
            let row0 = eq * m;
            for j in 0..m {
                a[(row0 + j, block(w_next, m) + j)] += mass[j];
                for nn in 0..m {
                    a[(row0 + j, block(w, m) + nn)] += stiff[j][nn];
                }
            }
            // - w_hat(x_R) v(x_R) + w_hat(x_L) v(x_L)
            let (right_row, left_row): (Option<usize>, Option<usize>) = match w {
                Var::U => (None, None),
                Var::Q => (None, None),
                Var::P => (Some(FACE_P_MINUS), Some(FACE_P_PLUS)),
                Var::R => (Some(FACE_R_MINUS), Some(FACE_R_PLUS)),
                Var::S => unreachable!(),
            };
            match w {
                Var::U | Var::Q => {
                    let (tl, tr) = if w == Var::U { (U_LEFT, U_RIGHT) } else { (Q_LEFT, Q_RIGHT) };
                    for j in 0..m {
                        b[(row0 + j, tr)] -= e_r[j];
                        b[(row0 + j, tl)] += e_l[j];
                    }
                }
                _ => {
                    let (rr, lr) = (right_row.unwrap(), left_row.unwrap());
                    for j in 0..m {
                        for c in 0..n {
                            a[(row0 + j, c)] += -e_r[j] * face_x[(rr, c)] + e_l[j] * face_x[(lr, c)];
                        }
                        for c in 0..5 {
                            b[(row0 + j, c)] += -e_r[j] * face_t[(rr, c)] + e_l[j] * face_t[(lr, c)];
                        }
                    }
                }
            }
        }

        // (gamma u, psi) - (alpha p + beta s, psi_x) + <F_hat, psi n> = (f, psi)
        let row0 = 4 * m;
        for j in 0..m {
            for nn in 0..m {
                a[(row0 + j, block(Var::P, m) + nn)] -= alpha * stiff[j][nn];
                a[(row0 + j, block(Var::S, m) + nn)] -= beta * stiff[j][nn];
            }
            for c in 0..n {
                a[(row0 + j, c)] += e_r[j] * face_x[(FACE_F_MINUS, c)] - e_l[j] * face_x[(FACE_F_PLUS, c)];
            }
            for c in 0..5 {
                b[(row0 + j, c)] += e_r[j] * face_t[(FACE_F_MINUS, c)] - e_l[j] * face_t[(FACE_F_PLUS, c)];
            }
        }

        let a_static = a.clone();
        let mass: Vec<f64> = mass.iter().map(|w| gamma * w).collect();
        for j in 0..m {
            a[(row0 + j, block(Var::U, m) + j)] += mass[j];
        }
        let lu = factorize(a.clone(), element)?;
        Ok(Self {
            element,
            h,
            gamma,
            alpha,
            beta,
            n_modes: m,
            a,
            a_static,
            mass,
            b,
            face_x,
            face_t,
            lu,
        })
    }

    pub fn element(&self) -> usize {
        self.element
    }

    pub fn width(&self) -> f64 {
        self.h
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn coefficients(&self) -> (f64, f64) {
        (self.alpha, self.beta)
    }

    /// Interior matrix (linear part).
    pub fn interior_matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// Trace coupling matrix (linear part).
    pub fn trace_matrix(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// `A^{-1} v` with the cached factorization.
    pub fn apply_inverse(&self, v: &DVector<f64>) -> DVector<f64> {
        self.lu.solve(v).expect("factorization checked at build time")
    }

    /// Same operator relabelled for another element (shared factorization).
    pub fn relabel(&self, element: usize) -> Self {
        Self {
            element,
            ..self.clone()
        }
    }

    /// Linear local solve `X = A^{-1}(load - B t)`.
    pub fn solve_local(&self, traces: &[f64; 5], load: &[f64]) -> ElementState {
        let rhs = DVector::from_column_slice(load) - &self.b * DVector::from_column_slice(traces);
        let x = self.apply_inverse(&rhs);
        ElementState::from_vec(self.n_modes, x.as_slice().to_vec())
    }

    /// Values of the derived traces at both faces. With `flux = None` the
    /// flux `F` and `tau_F` are taken as zero.
    pub fn extract_face_data(
        &self,
        state: &ElementState,
        traces: &[f64; 5],
        flux: Option<FluxTerms<'_>>,
    ) -> FaceData {
        FaceData::from_array(&self.face_values(state.as_slice(), traces, flux))
    }

    fn face_values(&self, x: &[f64], traces: &[f64; 5], flux: Option<FluxTerms<'_>>) -> [f64; N_FACE] {
        let xv = DVector::from_column_slice(x);
        let tv = DVector::from_column_slice(traces);
        let lin = &self.face_x * xv + &self.face_t * tv;
        let mut out = [0.0; N_FACE];
        out.copy_from_slice(lin.as_slice());
        if let Some(ft) = flux {
            if !ft.flux.is_zero() {
                let st = ElementState::from_vec(self.n_modes, x.to_vec());
                let (u_l, u_r) = (st.left_value(Var::U), st.right_value(Var::U));
                let tau_l = tau_f_value(ft.rule, ft.flux, u_l, traces[U_LEFT]);
                let tau_r = tau_f_value(ft.rule, ft.flux, u_r, traces[U_RIGHT]);
                out[FACE_F_PLUS] += ft.flux.value(traces[U_LEFT]) + tau_l * (traces[U_LEFT] - u_l);
                out[FACE_F_MINUS] += ft.flux.value(traces[U_RIGHT]) - tau_r * (traces[U_RIGHT] - u_r);
            }
        }
        out
    }

    /// Residual `A X + B t + N(X, t) - load` of the local equations.
    pub fn residual(
        &self,
        basis: &ReferenceBasis,
        x: &[f64],
        traces: &[f64; 5],
        load: &[f64],
        flux: Option<FluxTerms<'_>>,
    ) -> DVector<f64> {
        self.residual_about(basis, x, traces, load, flux, None)
    }

    /// Residual with the mass term taken relative to `u_ref`:
    /// `gamma M (U - u_ref)` replaces `gamma M U`, so `load` omits `gamma M u_ref`.
    pub fn residual_about(
        &self,
        basis: &ReferenceBasis,
        x: &[f64],
        traces: &[f64; 5],
        load: &[f64],
        flux: Option<FluxTerms<'_>>,
        u_ref: Option<&[f64]>,
    ) -> DVector<f64> {
        let m = self.n_modes;
        let xv = DVector::from_column_slice(x);
        let tv = DVector::from_column_slice(traces);
        let mut r = &self.a_static * xv + &self.b * tv - DVector::from_column_slice(load);
        let (row0, u0) = (4 * m, block(Var::U, m));
        for j in 0..m {
            let du = x[u0 + j] - u_ref.map_or(0.0, |u| u[j]);
            r[row0 + j] += self.mass[j] * du;
        }
        if let Some(ft) = flux {
            if !ft.flux.is_zero() {
                self.add_flux_residual(basis, x, traces, ft, &mut r);
            }
        }
        r
    }

    fn add_flux_residual(
        &self,
        basis: &ReferenceBasis,
        x: &[f64],
        traces: &[f64; 5],
        ft: FluxTerms<'_>,
        r: &mut DVector<f64>,
    ) {
        let m = self.n_modes;
        let row0 = 4 * m;
        let st = ElementState::from_vec(m, x.to_vec());
        let uc = st.var(Var::U);
        let quad = basis.quadrature();
        for q in 0..quad.len() {
            let fu = ft.flux.value(basis.eval_at_quad(uc, q));
            for j in 0..m {
                r[row0 + j] -= quad.weights[q] * fu * basis.deriv_at_quad(q, j);
            }
        }
        let (u_l, u_r) = (st.left_value(Var::U), st.right_value(Var::U));
        let tau_l = tau_f_value(ft.rule, ft.flux, u_l, traces[U_LEFT]);
        let tau_r = tau_f_value(ft.rule, ft.flux, u_r, traces[U_RIGHT]);
        let f_r = ft.flux.value(traces[U_RIGHT]) - tau_r * (traces[U_RIGHT] - u_r);
        let f_l = ft.flux.value(traces[U_LEFT]) + tau_l * (traces[U_LEFT] - u_l);
        for j in 0..m {
            let e_l = if j % 2 == 0 { 1.0 } else { -1.0 };
            r[row0 + j] += f_r - e_l * f_l;
        }
    }

    /// Residual, Jacobians and face values linearized about `(X, t)`, with
    /// `tau_F` frozen at its current value.
    pub fn linearize(
        &self,
        basis: &ReferenceBasis,
        x: &[f64],
        traces: &[f64; 5],
        load: &[f64],
        flux: Option<FluxTerms<'_>>,
        u_ref: Option<&[f64]>,
    ) -> LocalLinearization {
        let m = self.n_modes;
        let residual = self.residual_about(basis, x, traces, load, flux, u_ref);
        let face = self.face_values(x, traces, flux);
        let mut jac_x = self.a.clone();
        let mut jac_t = self.b.clone();
        let mut face_x = self.face_x.clone();
        let mut face_t = self.face_t.clone();
        let mut nonlinear = false;
        if let Some(ft) = flux {
            if !ft.flux.is_zero() {
                nonlinear = true;
                let row0 = 4 * m;
                let st = ElementState::from_vec(m, x.to_vec());
                let uc = st.var(Var::U);
                let quad = basis.quadrature();
                for q in 0..quad.len() {
                    let dfu = quad.weights[q] * ft.flux.derivative(basis.eval_at_quad(uc, q));
                    for j in 0..m {
                        let dj = basis.deriv_at_quad(q, j);
                        for nn in 0..m {
                            jac_x[(row0 + j, nn)] -= dfu * basis.value_at_quad(q, nn) * dj;
                        }
                    }
                }
                let (u_l, u_r) = (st.left_value(Var::U), st.right_value(Var::U));
                let tau_l = tau_f_value(ft.rule, ft.flux, u_l, traces[U_LEFT]);
                let tau_r = tau_f_value(ft.rule, ft.flux, u_r, traces[U_RIGHT]);
                let df_r = ft.flux.derivative(traces[U_RIGHT]) - tau_r;
                let df_l = ft.flux.derivative(traces[U_LEFT]) + tau_l;
                for j in 0..m {
                    let e_lj = if j % 2 == 0 { 1.0 } else { -1.0 };
                    // F_hat^- contribution: d/dU = tau_r e_R, d/du_hat_R = F' - tau_r
                    // F_hat^+ contribution: d/dU = -tau_l e_L, d/du_hat_L = F' + tau_l
                    for nn in 0..m {
                        let e_ln = if nn % 2 == 0 { 1.0 } else { -1.0 };
                        jac_x[(row0 + j, nn)] += tau_r + e_lj * tau_l * e_ln;
                    }
                    jac_t[(row0 + j, U_RIGHT)] += df_r;
                    jac_t[(row0 + j, U_LEFT)] -= e_lj * df_l;
                    face_x[(FACE_F_MINUS, j)] += tau_r;
                    face_x[(FACE_F_PLUS, j)] -= tau_l * e_lj;
                }
                face_t[(FACE_F_MINUS, U_RIGHT)] += df_r;
                face_t[(FACE_F_PLUS, U_LEFT)] += df_l;
            }
        }
        LocalLinearization {
            residual,
            jac_x,
            jac_t,
            face,
            face_x,
            face_t,
            nonlinear,
        }
    }
}

/// Local system linearized about a state.
#[derive(Debug, Clone)]
pub struct LocalLinearization {
    pub residual: DVector<f64>,
    pub jac_x: DMatrix<f64>,
    pub jac_t: DMatrix<f64>,
    pub face: [f64; N_FACE],
    pub face_x: DMatrix<f64>,
    pub face_t: DMatrix<f64>,
    nonlinear: bool,
}

/// Face values as affine functions of the trace increment after eliminating
/// the interior increment: `face(dt) = offset + rows * dt`, with
/// `dX = -(x_offset + x_rows * dt)`.
#[derive(Debug, Clone)]
pub struct CondensedElement {
    pub offset: [f64; N_FACE],
    pub rows: DMatrix<f64>,
    pub x_offset: DVector<f64>,
    pub x_rows: DMatrix<f64>,
}

impl CondensedElement {
    /// Interior increment for a given trace increment.
    pub fn interior_increment(&self, dt: &[f64; 5]) -> DVector<f64> {
        -(&self.x_offset + &self.x_rows * DVector::from_column_slice(dt))
    }
}

impl LocalLinearization {
    /// Eliminate the interior increment. `lin_lu` is reused when the
    /// Jacobian equals the operator's linear part.
    pub fn condense(&self, op: &LocalOperator) -> Result<CondensedElement> {
        let mut rhs = DMatrix::zeros(self.jac_x.nrows(), 6);
        rhs.set_column(0, &self.residual);
        for c in 0..5 {
            rhs.set_column(c + 1, &self.jac_t.column(c));
        }
        let z = if self.nonlinear {
            let lu = factorize(self.jac_x.clone(), op.element)?;
            lu.solve(&rhs).ok_or_else(|| HdgError::Condensation {
                element: op.element,
                reason: "singular Jacobian".into(),
            })?
        } else {
            op.lu.solve(&rhs).expect("factorization checked at build time")
        };
        let x_offset = z.column(0).into_owned();
        let x_rows = z.columns(1, 5).into_owned();
        let fo = &self.face_x * &x_offset;
        let mut offset = [0.0; N_FACE];
        for (i, o) in offset.iter_mut().enumerate() {
            *o = self.face[i] - fo[i];
        }
        let rows = &self.face_t - &self.face_x * &x_rows;
        Ok(CondensedElement {
            offset,
            rows,
            x_offset,
            x_rows,
        })
    }
}
