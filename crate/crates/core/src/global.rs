//! Global trace system: transmission conditions, assembly and the
//! (Newton) stationary solve.
//!
//! Unknowns are interleaved per node as `(u_hat_i, q_hat_i, p_hat_i^-)`.
//! Periodic meshes carry nodes `1..=N` (node `N` is node `0`), Dirichlet
//! meshes the interior nodes `1..N` with the five boundary traces fixed.

use nalgebra::DVector;

use crate::banded::{CyclicBandMatrix, CyclicLu};
use crate::basis::{ModalField, ReferenceBasis};
use crate::error::{HdgError, Result};
use crate::local::{
    CondensedElement, ElementState, FluxTerms, LocalOperator, Var, FACE_F_MINUS, FACE_F_PLUS,
    FACE_P_MINUS, FACE_P_PLUS, FACE_R_MINUS, FACE_R_PLUS, N_FACE, P_RIGHT, Q_LEFT, Q_RIGHT, U_LEFT,
    U_RIGHT,
};
use crate::mesh::{BoundaryKind, Mesh};
use crate::problem::Flux;
use crate::stabilization::StabilizationConfig;

/// Transmission condition rows: (right-face quantity of the left element,
/// left-face quantity of the right element).
const TRANSMISSION: [(usize, usize); 3] = [
    (FACE_P_MINUS, FACE_P_PLUS),
    (FACE_R_MINUS, FACE_R_PLUS),
    (FACE_F_MINUS, FACE_F_PLUS),
];

/// Node traces `u_hat`, `q_hat` and the right-limit trace `p_hat^-`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceVector {
    boundary: BoundaryKind,
    n_elements: usize,
    /// Indexed by node (`N` entries when periodic, `N + 1` otherwise).
    pub u_hat: Vec<f64>,
    pub q_hat: Vec<f64>,
    /// `p_hat[e]` sits at the right end of element `e`.
    pub p_hat: Vec<f64>,
}

impl TraceVector {
    pub fn zeros(mesh: &Mesh) -> Self {
        let n = mesh.n_elements();
        let nodes = match mesh.boundary() {
            BoundaryKind::Periodic => n,
            BoundaryKind::Dirichlet => n + 1,
        };
        Self {
            boundary: mesh.boundary(),
            n_elements: n,
            u_hat: vec![0.0; nodes],
            q_hat: vec![0.0; nodes],
            p_hat: vec![0.0; n],
        }
    }

    pub fn boundary(&self) -> BoundaryKind {
        self.boundary
    }

    fn node_index(&self, node: usize) -> usize {
        match self.boundary {
            BoundaryKind::Periodic => node % self.n_elements,
            BoundaryKind::Dirichlet => node,
        }
    }

    pub fn u_at_node(&self, node: usize) -> f64 {
        self.u_hat[self.node_index(node)]
    }

    pub fn q_at_node(&self, node: usize) -> f64 {
        self.q_hat[self.node_index(node)]
    }

    /// Traces seen by element `e`, ordered `[u_L, u_R, q_L, q_R, p_R]`.
    pub fn element_traces(&self, e: usize) -> [f64; 5] {
        [
            self.u_at_node(e),
            self.u_at_node(e + 1),
            self.q_at_node(e),
            self.q_at_node(e + 1),
            self.p_hat[e],
        ]
    }

    /// Impose `[u(a), u(b), q(a), q(b), p(b)]` on a Dirichlet trace vector.
    pub fn set_boundary(&mut self, values: [f64; 5]) {
        if self.boundary == BoundaryKind::Dirichlet {
            let n = self.n_elements;
            self.u_hat[0] = values[0];
            self.u_hat[n] = values[1];
            self.q_hat[0] = values[2];
            self.q_hat[n] = values[3];
            self.p_hat[n - 1] = values[4];
        }
    }

    /// Number of global unknowns.
    pub fn n_unknowns(&self) -> usize {
        match self.boundary {
            BoundaryKind::Periodic => 3 * self.n_elements,
            BoundaryKind::Dirichlet => 3 * (self.n_elements - 1),
        }
    }

    /// Block (node) index of a node, `None` if its traces are prescribed.
    fn node_block(&self, node: usize) -> Option<usize> {
        let n = self.n_elements;
        match self.boundary {
            BoundaryKind::Periodic => Some((node + n - 1) % n),
            BoundaryKind::Dirichlet => (node >= 1 && node < n).then(|| node - 1),
        }
    }

    /// Global unknown index of element-local trace slot `slot` of element
    /// `e`, `None` for prescribed boundary traces.
    pub fn dof(&self, e: usize, slot: usize) -> Option<usize> {
        let (node, comp) = match slot {
            U_LEFT => (e, 0),
            U_RIGHT => (e + 1, 0),
            Q_LEFT => (e, 1),
            Q_RIGHT => (e + 1, 1),
            P_RIGHT => (e + 1, 2),
            _ => unreachable!("trace slot {slot}"),
        };
        self.node_block(node).map(|b| 3 * b + comp)
    }

    /// Nodes that carry transmission conditions.
    fn equation_nodes(&self) -> std::ops::Range<usize> {
        match self.boundary {
            BoundaryKind::Periodic => 1..self.n_elements + 1,
            BoundaryKind::Dirichlet => 1..self.n_elements,
        }
    }

    /// Elements to the left and right of node `node`.
    fn neighbours(&self, node: usize) -> (usize, usize) {
        (node - 1, node % self.n_elements)
    }

    /// Add `scale * delta` (a global vector) to the free traces.
    pub fn add_global(&mut self, delta: &[f64], scale: f64) {
        for node in self.equation_nodes() {
            let b = self.node_block(node).unwrap();
            let i = self.node_index(node);
            self.u_hat[i] += scale * delta[3 * b];
            self.q_hat[i] += scale * delta[3 * b + 1];
            self.p_hat[node - 1] += scale * delta[3 * b + 2];
        }
    }

    /// Element-local view of a global increment.
    pub fn element_increment(&self, e: usize, delta: &[f64]) -> [f64; 5] {
        let mut out = [0.0; 5];
        for (slot, o) in out.iter_mut().enumerate() {
            if let Some(d) = self.dof(e, slot) {
                *o = delta[d];
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.u_hat
            .iter()
            .chain(&self.q_hat)
            .chain(&self.p_hat)
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `2 * self - other`, used by the midpoint level update.
    pub fn extrapolate_from(&self, other: &TraceVector) -> TraceVector {
        let f = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| 2.0 * x - y).collect();
        TraceVector {
            boundary: self.boundary,
            n_elements: self.n_elements,
            u_hat: f(&self.u_hat, &other.u_hat),
            q_hat: f(&self.q_hat, &other.q_hat),
            p_hat: f(&self.p_hat, &other.p_hat),
        }
    }
}

/// Discrete `(u_h, q_h, p_h, r_h, s_h)` on every element.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionField {
    degree: usize,
    states: Vec<ElementState>,
}

impl SolutionField {
    pub fn zeros(n_elements: usize, degree: usize) -> Self {
        Self {
            degree,
            states: vec![ElementState::zeros(degree + 1); n_elements],
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_elements(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, e: usize) -> &ElementState {
        &self.states[e]
    }

    pub fn state_mut(&mut self, e: usize) -> &mut ElementState {
        &mut self.states[e]
    }

    pub fn states(&self) -> &[ElementState] {
        &self.states
    }

    /// Coefficients of one variable on all elements.
    pub fn field(&self, v: Var) -> ModalField {
        self.states.iter().map(|s| s.var(v).to_vec()).collect()
    }

    pub fn set_field(&mut self, v: Var, values: &ModalField) {
        for (s, c) in self.states.iter_mut().zip(values) {
            s.var_mut(v).copy_from_slice(c);
        }
    }

    pub fn extrapolate_from(&self, other: &SolutionField) -> SolutionField {
        SolutionField {
            degree: self.degree,
            states: self
                .states
                .iter()
                .zip(&other.states)
                .map(|(a, b)| {
                    let d = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| 2.0 * x - y).collect();
                    ElementState::from_vec(a.n_modes(), d)
                })
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.states.iter().all(|s| s.is_finite())
    }
}

/// Element load vectors (length `5(k+1)`, nonzero only in the last block).
pub type ElementLoads = Vec<Vec<f64>>;

/// `(f, psi)` on every element.
pub fn element_loads(mesh: &Mesh, basis: &ReferenceBasis, f: impl Fn(f64) -> f64) -> ElementLoads {
    let m = basis.n_modes();
    (0..mesh.n_elements())
        .map(|e| {
            let mut v = vec![0.0; 5 * m];
            let l = basis.load_vector(mesh.midpoint(e), mesh.width(e), &f);
            v[4 * m..].copy_from_slice(&l);
            v
        })
        .collect()
}

/// Add `gamma (u_h, psi)` for a given `u_h`.
pub fn add_mass_term(loads: &mut ElementLoads, mesh: &Mesh, gamma: f64, u: &ModalField) {
    for (e, (v, c)) in loads.iter_mut().zip(u).enumerate() {
        let m = c.len();
        let h = mesh.width(e);
        for j in 0..m {
            v[4 * m + j] += gamma * h / (2.0 * j as f64 + 1.0) * c[j];
        }
    }
}

const LINEAR_REFINEMENT_PASSES: usize = 2;

/// Newton controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub max_newton: usize,
    pub tolerance: f64,
    pub max_halvings: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_newton: 25,
            tolerance: 1e-12,
            max_halvings: 5,
        }
    }
}

/// Convergence record of one stationary solve.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    pub residual: f64,
    pub step_history: Vec<f64>,
}

/// Solution of one stationary problem.
#[derive(Debug, Clone)]
pub struct StationarySolution {
    pub field: SolutionField,
    pub traces: TraceVector,
    pub report: NewtonReport,
}

#[derive(Debug, Clone)]
struct LinearCache {
    rows: Vec<(nalgebra::DMatrix<f64>, nalgebra::DMatrix<f64>)>,
    lu: CyclicLu,
}

/// Stationary HDG solver for
/// `gamma u + alpha u_xxx + beta u_xxxxx + F(u)_x = f` on a fixed mesh.
#[derive(Debug, Clone)]
pub struct HdgSolver {
    mesh: Mesh,
    basis: ReferenceBasis,
    alpha: f64,
    beta: f64,
    flux: Flux,
    cfg: StabilizationConfig,
    gamma: f64,
    options: SolverOptions,
    ops: Vec<LocalOperator>,
    cache: Option<LinearCache>,
    mass_reference: Option<ModalField>,
}

impl HdgSolver {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        mesh: &Mesh,
        degree: usize,
        alpha: f64,
        beta: f64,
        flux: Flux,
        cfg: &StabilizationConfig,
        gamma: f64,
        options: SolverOptions,
    ) -> Result<Self> {
        crate::basis::check_degree(degree)?;
        if !gamma.is_finite() {
            return Err(HdgError::InvalidConfig(format!("gamma must be finite, got {gamma}")));
        }
        let basis = ReferenceBasis::new(degree, !flux.is_zero());
        let n = mesh.n_elements();
        let mut ops = Vec::with_capacity(n);
        if mesh.is_uniform() {
            let op = LocalOperator::build(0, mesh.width(0), &basis, cfg, gamma, alpha, beta)?;
            for e in 0..n {
                ops.push(op.relabel(e));
            }
        } else {
            for e in 0..n {
                ops.push(LocalOperator::build(e, mesh.width(e), &basis, cfg, gamma, alpha, beta)?);
            }
        }
        Ok(Self {
            mesh: mesh.clone(),
            basis,
            alpha,
            beta,
            flux,
            cfg: *cfg,
            gamma,
            options,
            ops,
            cache: None,
            mass_reference: None,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn basis(&self) -> &ReferenceBasis {
        &self.basis
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn stabilization(&self) -> &StabilizationConfig {
        &self.cfg
    }

    pub fn coefficients(&self) -> (f64, f64) {
        (self.alpha, self.beta)
    }

    pub fn operator(&self, e: usize) -> &LocalOperator {
        &self.ops[e]
    }

    pub fn is_linear(&self) -> bool {
        self.flux.is_zero()
    }

    fn flux_terms(&self) -> Option<FluxTerms<'_>> {
        (!self.flux.is_zero()).then_some(FluxTerms {
            flux: &self.flux,
            rule: self.cfg.tau_f_rule,
        })
    }

    fn assemble(&self, traces: &TraceVector, condensed: &[CondensedElement]) -> (CyclicBandMatrix, Vec<f64>) {
        let n = traces.n_unknowns();
        let mut mat = CyclicBandMatrix::zeros(n, 5, 5, 3);
        let mut rhs = vec![0.0; n];
        for node in traces.equation_nodes() {
            let blk = traces.node_block(node).unwrap();
            let (le, re) = traces.neighbours(node);
            for (comp, &(minus, plus)) in TRANSMISSION.iter().enumerate() {
                let row = 3 * blk + comp;
                rhs[row] = -(condensed[le].offset[minus] - condensed[re].offset[plus]);
                for slot in 0..5 {
                    if let Some(c) = traces.dof(le, slot) {
                        mat.add(row, c, condensed[le].rows[(minus, slot)]);
                    }
                    if let Some(c) = traces.dof(re, slot) {
                        mat.add(row, c, -condensed[re].rows[(plus, slot)]);
                    }
                }
            }
        }
        (mat, rhs)
    }

    /// Positions the assembly writes to, independent of the values (which
    /// may vanish, e.g. for `k = 0`).
    pub fn sparsity_pattern(&self) -> std::collections::BTreeSet<(usize, usize)> {
        let traces = TraceVector::zeros(&self.mesh);
        let mut out = std::collections::BTreeSet::new();
        for node in traces.equation_nodes() {
            let blk = traces.node_block(node).unwrap();
            let (le, re) = traces.neighbours(node);
            for comp in 0..TRANSMISSION.len() {
                for slot in 0..5 {
                    for e in [le, re] {
                        if let Some(c) = traces.dof(e, slot) {
                            out.insert((3 * blk + comp, c));
                        }
                    }
                }
            }
        }
        out
    }

    /// Global matrix of the linearized system about the zero state.
    pub fn global_matrix(&self) -> Result<CyclicBandMatrix> {
        let traces = TraceVector::zeros(&self.mesh);
        let field = SolutionField::zeros(self.mesh.n_elements(), self.basis.degree());
        let loads = vec![vec![0.0; 5 * self.basis.n_modes()]; self.mesh.n_elements()];
        let condensed = self.condense_all(&field, &traces, &loads)?;
        Ok(self.assemble(&traces, &condensed).0)
    }

    fn condense_all(
        &self,
        field: &SolutionField,
        traces: &TraceVector,
        loads: &ElementLoads,
    ) -> Result<Vec<CondensedElement>> {
        let flux = self.flux_terms();
        (0..self.mesh.n_elements())
            .map(|e| {
                let t = traces.element_traces(e);
                self.ops[e]
                    .linearize(&self.basis, field.state(e).as_slice(), &t, &loads[e], flux, self.u_ref(e))
                    .condense(&self.ops[e])
            })
            .collect()
    }

    fn linear_cache(&mut self) -> Result<&LinearCache> {
        if self.cache.is_none() {
            let traces = TraceVector::zeros(&self.mesh);
            let field = SolutionField::zeros(self.mesh.n_elements(), self.basis.degree());
            let loads = vec![vec![0.0; 5 * self.basis.n_modes()]; self.mesh.n_elements()];
            let condensed = self.condense_all(&field, &traces, &loads)?;
            let (mat, _) = self.assemble(&traces, &condensed);
            let lu = mat.factorize()?;
            let rows = condensed.into_iter().map(|c| (c.rows, c.x_rows)).collect();
            self.cache = Some(LinearCache { rows, lu });
        }
        Ok(self.cache.as_ref().unwrap())
    }

    /// Face data of every element for a given state.
    pub fn face_data(&self, field: &SolutionField, traces: &TraceVector) -> Vec<crate::local::FaceData> {
        let flux = self.flux_terms();
        (0..self.mesh.n_elements())
            .map(|e| self.ops[e].extract_face_data(field.state(e), &traces.element_traces(e), flux))
            .collect()
    }

    /// Largest violation of the transmission conditions.
    pub fn transmission_residual(&self, field: &SolutionField, traces: &TraceVector) -> f64 {
        let faces = self.face_data(field, traces);
        let mut worst: f64 = 0.0;
        for node in traces.equation_nodes() {
            let (le, re) = traces.neighbours(node);
            let (a, b) = (&faces[le], &faces[re]);
            worst = worst
                .max((a.p_minus - b.p_plus).abs())
                .max((a.r_minus - b.r_plus).abs())
                .max((a.flux_minus - b.flux_plus).abs());
        }
        worst
    }

    /// Max-norm of the local residuals and transmission mismatch.
    pub fn residual_norm(&self, field: &SolutionField, traces: &TraceVector, loads: &ElementLoads) -> f64 {
        let flux = self.flux_terms();
        let mut worst = self.transmission_residual(field, traces);
        for e in 0..self.mesh.n_elements() {
            let r = self.ops[e].residual_about(
                &self.basis,
                field.state(e).as_slice(),
                &traces.element_traces(e),
                &loads[e],
                flux,
                self.u_ref(e),
            );
            worst = worst.max(r.amax());
        }
        worst
    }

    fn apply_update(
        &self,
        field: &SolutionField,
        traces: &TraceVector,
        condensed: &[CondensedElement],
        delta: &[f64],
        scale: f64,
    ) -> (SolutionField, TraceVector) {
        let mut f = field.clone();
        let mut t = traces.clone();
        for (e, c) in condensed.iter().enumerate() {
            let dx = c.interior_increment(&traces.element_increment(e, delta));
            for (x, d) in f.state_mut(e).as_mut_slice().iter_mut().zip(dx.iter()) {
                *x += scale * d;
            }
        }
        t.add_global(delta, scale);
        (f, t)
    }

    fn u_ref(&self, e: usize) -> Option<&[f64]> {
        self.mass_reference.as_ref().map(|u| u[e].as_slice())
    }

    /// Like [`HdgSolver::solve`] for `gamma (u - u_ref) + D(u) = f`, with
    /// `loads` holding only `(f, psi)`. Small increments over `u_ref` keep
    /// their digits.
    pub fn solve_about(
        &mut self,
        loads: &ElementLoads,
        boundary: Option<[f64; 5]>,
        guess: Option<(&SolutionField, &TraceVector)>,
        u_ref: &ModalField,
    ) -> Result<StationarySolution> {
        if u_ref.len() != self.mesh.n_elements() {
            return Err(HdgError::Assembly("reference field has the wrong element count".into()));
        }
        self.mass_reference = Some(u_ref.clone());
        let out = self.solve(loads, boundary, guess);
        self.mass_reference = None;
        out
    }

    /// Solve the stationary problem with loads `(f_tilde, psi)`. Dirichlet
    /// meshes take boundary traces `[u(a), u(b), q(a), q(b), p(b)]`.
    pub fn solve(
        &mut self,
        loads: &ElementLoads,
        boundary: Option<[f64; 5]>,
        guess: Option<(&SolutionField, &TraceVector)>,
    ) -> Result<StationarySolution> {
        let n_el = self.mesh.n_elements();
        if loads.len() != n_el {
            return Err(HdgError::Assembly(format!("{} load vectors for {n_el} elements", loads.len())));
        }
        if self.mesh.boundary() == BoundaryKind::Dirichlet && boundary.is_none() {
            return Err(HdgError::InvalidProblem("Dirichlet mesh without boundary data".into()));
        }
        let (field, mut traces) = match guess {
            Some((f, t)) => (f.clone(), t.clone()),
            None => (SolutionField::zeros(n_el, self.basis.degree()), TraceVector::zeros(&self.mesh)),
        };
        if let Some(bv) = boundary {
            traces.set_boundary(bv);
        }
        if self.is_linear() {
            // Static condensation loses digits on fine meshes; residual
            // correction passes recover them.
            let mut sol = self.solve_linear(loads, field, traces)?;
            for _ in 0..LINEAR_REFINEMENT_PASSES {
                let next = self.solve_linear(loads, sol.field.clone(), sol.traces.clone())?;
                let step = next.report.step_history[0];
                sol.report.step_history.push(step);
                sol.field = next.field;
                sol.traces = next.traces;
                if step <= 1e-15 * (1.0 + sol.traces.max_abs()) {
                    break;
                }
            }
            return Ok(sol);
        }
        self.solve_newton(loads, field, traces)
    }

    fn solve_linear(
        &mut self,
        loads: &ElementLoads,
        field: SolutionField,
        traces: TraceVector,
    ) -> Result<StationarySolution> {
        self.linear_cache()?;
        let cache = self.cache.as_ref().unwrap();
        let mut condensed = Vec::with_capacity(self.mesh.n_elements());
        for e in 0..self.mesh.n_elements() {
            let op = &self.ops[e];
            let t = traces.element_traces(e);
            let x = field.state(e).as_slice();
            let r = op.residual_about(&self.basis, x, &t, &loads[e], None, self.u_ref(e));
            let x_offset = op.apply_inverse(&r);
            let face = op.extract_face_data(field.state(e), &t, None);
            let face_arr = [
                face.p_plus,
                face.r_plus,
                face.s_plus,
                face.flux_plus,
                face.p_minus,
                face.r_minus,
                face.s_minus,
                face.flux_minus,
            ];
            let (rows, x_rows) = &cache.rows[e];
            // offset = face - face_x x_offset, and face_x x_offset equals the
            // face values of the state x_offset with zero traces.
            let fo = op.extract_face_data(
                &ElementState::from_vec(op.n_modes(), x_offset.as_slice().to_vec()),
                &[0.0; 5],
                None,
            );
            let fo = [
                fo.p_plus,
                fo.r_plus,
                fo.s_plus,
                fo.flux_plus,
                fo.p_minus,
                fo.r_minus,
                fo.s_minus,
                fo.flux_minus,
            ];
            let mut offset = [0.0; N_FACE];
            for i in 0..N_FACE {
                offset[i] = face_arr[i] - fo[i];
            }
            condensed.push(CondensedElement {
                offset,
                rows: rows.clone(),
                x_offset,
                x_rows: x_rows.clone(),
            });
        }
        let rhs = self.assemble_rhs(&traces, &condensed);
        let delta = cache.lu.solve(&rhs)?;
        let (field, traces) = self.apply_update(&field, &traces, &condensed, &delta, 1.0);
        if !field.is_finite() {
            return Err(HdgError::Solver("non-finite local solution".into()));
        }
        let step = delta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(StationarySolution {
            field,
            traces,
            report: NewtonReport {
                iterations: 1,
                residual: 0.0,
                step_history: vec![step],
            },
        })
    }

    fn assemble_rhs(&self, traces: &TraceVector, condensed: &[CondensedElement]) -> Vec<f64> {
        let mut rhs = vec![0.0; traces.n_unknowns()];
        for node in traces.equation_nodes() {
            let blk = traces.node_block(node).unwrap();
            let (le, re) = traces.neighbours(node);
            for (comp, &(minus, plus)) in TRANSMISSION.iter().enumerate() {
                rhs[3 * blk + comp] = -(condensed[le].offset[minus] - condensed[re].offset[plus]);
            }
        }
        rhs
    }

    fn solve_newton(
        &mut self,
        loads: &ElementLoads,
        mut field: SolutionField,
        mut traces: TraceVector,
    ) -> Result<StationarySolution> {
        let opts = self.options;
        let mut history = Vec::new();
        let mut res = self.residual_norm(&field, &traces, loads);
        let mut prev_step = f64::INFINITY;
        for it in 1..=opts.max_newton {
            let condensed = self.condense_all(&field, &traces, loads)?;
            let (mat, rhs) = self.assemble(&traces, &condensed);
            let delta = mat.factorize()?.solve(&rhs)?;
            let mut scale = 1.0;
            let mut accepted = None;
            for _ in 0..=opts.max_halvings {
                let (f, t) = self.apply_update(&field, &traces, &condensed, &delta, scale);
                let r = if f.is_finite() {
                    self.residual_norm(&f, &t, loads)
                } else {
                    f64::INFINITY
                };
                if r <= res || r.is_finite() && r < 1e-13 {
                    accepted = Some((f, t, r));
                    break;
                }
                accepted = Some((f, t, r));
                scale *= 0.5;
            }
            let (f, t, r) = accepted.unwrap();
            if !r.is_finite() {
                return Err(HdgError::NewtonDivergence {
                    iterations: it,
                    residual: r,
                });
            }
            field = f;
            traces = t;
            res = r;
            let step = scale * DVector::from_vec(delta).amax();
            history.push(step);
            let size = 1.0 + traces.max_abs();
            // Converged, or stalled at the roundoff floor.
            if step <= opts.tolerance * size || (step <= 1e-9 * size && step > 0.5 * prev_step) {
                return Ok(StationarySolution {
                    field,
                    traces,
                    report: NewtonReport {
                        iterations: it,
                        residual: res,
                        step_history: history,
                    },
                });
            }
            prev_step = step;
        }
        Err(HdgError::NewtonDivergence {
            iterations: opts.max_newton,
            residual: res,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{l2_error, l2_project};
    use std::f64::consts::PI;

    fn periodic_sine(k: usize, n: usize) -> f64 {
        // gamma u - u_xxxxx = sin x + cos x has solution u = sin x
        let mesh = Mesh::uniform(0.0, 2.0 * PI, n, BoundaryKind::Periodic).unwrap();
        let cfg = StabilizationConfig::paper_periodic();
        let mut s = HdgSolver::new(&mesh, k, 0.0, -1.0, Flux::zero(), &cfg, 1.0, SolverOptions::default()).unwrap();
        let loads = element_loads(&mesh, s.basis(), |x| x.sin() - x.cos());
        let sol = s.solve(&loads, None, None).unwrap();
        l2_error(|x| x.sin(), &sol.field.field(Var::U), &mesh, k + 5)
    }

    #[test]
    fn trace_dofs_periodic_wrap() {
        let mesh = Mesh::uniform(0.0, 1.0, 4, BoundaryKind::Periodic).unwrap();
        let t = TraceVector::zeros(&mesh);
        assert_eq!(t.n_unknowns(), 12);
        // element 0: left node 0 == node 4 -> last block
        assert_eq!(t.dof(0, U_LEFT), Some(9));
        assert_eq!(t.dof(0, U_RIGHT), Some(0));
        assert_eq!(t.dof(3, U_RIGHT), Some(9));
        assert_eq!(t.dof(3, P_RIGHT), Some(11));
    }

    #[test]
    fn trace_dofs_dirichlet_boundary_fixed() {
        let mesh = Mesh::uniform(0.0, 1.0, 4, BoundaryKind::Dirichlet).unwrap();
        let mut t = TraceVector::zeros(&mesh);
        assert_eq!(t.n_unknowns(), 9);
        assert_eq!(t.dof(0, U_LEFT), None);
        assert_eq!(t.dof(0, Q_LEFT), None);
        assert_eq!(t.dof(3, U_RIGHT), None);
        assert_eq!(t.dof(3, P_RIGHT), None);
        assert_eq!(t.dof(2, P_RIGHT), Some(8));
        t.set_boundary([1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(t.element_traces(0)[U_LEFT], 1.0);
        assert_eq!(t.element_traces(3), [0.0, 2.0, 0.0, 4.0, 5.0]);
    }

    #[test]
    fn stationary_periodic_converges() {
        let e1 = periodic_sine(1, 16);
        let e2 = periodic_sine(1, 32);
        let rate = (e1 / e2).log2();
        assert!((rate - 2.0).abs() < 0.2, "rate {rate}");
    }

    #[test]
    fn linear_solution_satisfies_transmission() {
        let mesh = Mesh::uniform(0.0, PI, 8, BoundaryKind::Dirichlet).unwrap();
        let cfg = StabilizationConfig::paper_dirichlet();
        let mut s = HdgSolver::new(&mesh, 2, 1.0, -1.0, Flux::zero(), &cfg, 1.0, SolverOptions::default()).unwrap();
        let loads = element_loads(&mesh, s.basis(), |x| x.sin() + (x * 0.3).cos());
        let sol = s.solve(&loads, Some([0.1, 0.2, 0.3, 0.4, 0.5]), None).unwrap();
        assert!(s.transmission_residual(&sol.field, &sol.traces) < 1e-10);
        assert!(s.residual_norm(&sol.field, &sol.traces, &loads) < 1e-10);
        assert_eq!(sol.traces.u_hat[0], 0.1);
        assert_eq!(sol.traces.p_hat[7], 0.5);
    }

    #[test]
    fn newton_matches_linear_for_nonlinear_problem() {
        // gamma u + (u^2/2)_x - u_xxxxx = f with u = sin x
        let mesh = Mesh::uniform(0.0, 2.0 * PI, 16, BoundaryKind::Periodic).unwrap();
        let cfg = StabilizationConfig::paper_periodic();
        let flux = Flux::polynomial(vec![0.0, 0.0, 0.5]);
        let mut s = HdgSolver::new(&mesh, 2, 0.0, -1.0, flux, &cfg, 1.0, SolverOptions::default()).unwrap();
        let loads = element_loads(&mesh, s.basis(), |x| x.sin() - x.cos() + x.sin() * x.cos());
        let sol = s.solve(&loads, None, None).unwrap();
        assert!(sol.report.iterations <= 10, "{:?}", sol.report);
        assert!(s.residual_norm(&sol.field, &sol.traces, &loads) < 1e-10);
        let e = l2_error(|x| x.sin(), &sol.field.field(Var::U), &mesh, 8);
        let proj = l2_error(|x| x.sin(), &l2_project(|x| x.sin(), &mesh, s.basis()), &mesh, 8);
        assert!(e < 3.0 * proj, "{e} vs {proj}");
    }
}
