//! Acceptance criteria for the solver. Every criterion prints exactly one
//! `PASS` or `FAIL` line, preceded by indented detail lines.
//!
//! The lines go straight to the process stdout so they show up in a plain
//! `cargo test` log. Criteria 4 to 7 are hard assertions. Criteria 1 to 3
//! compare against published tables and only report, unless
//! `HDG5_STRICT_ACCEPTANCE=1` is set, in which case any `FAIL` panics.

mod common;

use std::io::Write;
use std::time::Instant;

use common::*;
use hdg5::basis::ReferenceBasis;
use hdg5::global::{element_loads, HdgSolver, SolverOptions};
use hdg5::local::Var;
use hdg5::mesh::{BoundaryKind, Mesh};
use hdg5::problem::{builtin_problem, stationary_sine_problem, BuiltinProblem, ProblemSpec};
use hdg5::stabilization::StabilizationConfig;
use hdg5::time::{paper_time_step, TimeIntegrator};
use hdg5::verification::{
    eoc, hdg_project, run_convergence_study, superconvergence_study, DtPolicy, ErrorReport, ProjectionSystem,
};

const EOC_TOL: f64 = 0.15;
const MAGNITUDE_FACTOR: f64 = 2.0;
const SUPER_PROJECTED_SLACK: f64 = 1.8;
const SUPER_TRACE_SLACK: f64 = 0.8;
const L2_SLACK: f64 = 1e-10;
const PROJECTION_TOL: f64 = 1e-11;
const PROJECTION_RATE_TOL: f64 = 0.1;
const LOCAL_TOL: f64 = 1e-10;
const TRANSMISSION_TOL: f64 = 1e-9;
const NEWTON_CAP: usize = 25;

/// Finest-level `(errors, orders)` for `u, q, p, r, s`, `k = 0..3`.
type Table = [([f64; 5], [f64; 5]); 4];

const TABLE_P1: Table = [
    ([3.51e-2, 5.49e-2, 9.12e-2, 0.1310, 0.1719], [1.00, 1.01, 0.98, 0.97, 0.96]),
    ([2.05e-4, 2.05e-4, 2.06e-4, 2.06e-4, 2.06e-4], [2.00, 2.00, 2.00, 2.00, 2.01]),
    ([7.81e-7, 7.81e-7, 7.81e-7, 7.81e-7, 7.78e-7], [3.00, 3.00, 3.00, 3.00, 3.00]),
    ([3.15e-9, 3.15e-9, 3.15e-9, 3.15e-9, 3.19e-9], [4.00, 4.00, 4.00, 4.00, 3.99]),
];

const TABLE_P2: Table = [
    ([3.55e-2, 4.23e-2, 7.53e-2, 0.1153, 0.1594], [1.00, 1.03, 1.01, 0.98, 0.96]),
    ([6.55e-5, 2.06e-4, 2.06e-4, 2.06e-4, 9.55e-4], [2.01, 2.00, 2.00, 2.00, 2.00]),
    ([3.49e-7, 7.81e-7, 7.81e-7, 7.82e-7, 2.35e-6], [3.00, 3.00, 3.00, 3.00, 3.00]),
    ([2.68e-9, 4.31e-9, 6.75e-9, 1.26e-8, 2.75e-8], [4.00, 4.00, 4.00, 3.99, 3.98]),
];

const TABLE_P3: Table = [
    ([1.44e-3, 8.02e-4, 1.73e-3, 6.18e-3, 1.65e-2], [0.89, 0.91, 0.93, 0.85, 0.86]),
    ([2.51e-6, 2.59e-6, 3.65e-6, 5.12e-6, 5.14e-6], [1.97, 2.02, 2.01, 2.00, 2.01]),
    ([3.81e-8, 3.94e-8, 5.55e-8, 7.78e-8, 7.80e-8], [2.96, 3.01, 3.01, 2.99, 3.00]),
    ([1.14e-10, 1.17e-10, 1.64e-10, 2.31e-10, 2.31e-10], [3.97, 4.01, 4.01, 4.00, 4.00]),
];

const TABLE_P4: Table = [
    ([1.18e-3, 7.53e-4, 1.61e-3, 4.70e-3, 1.21e-2], [0.89, 0.89, 0.98, 0.93, 0.88]),
    ([1.61e-6, 2.74e-6, 3.65e-6, 5.12e-6, 8.75e-6], [1.98, 2.01, 2.01, 2.00, 2.00]),
    ([2.45e-8, 4.25e-8, 5.55e-8, 7.79e-8, 1.28e-7], [2.98, 3.02, 3.01, 2.99, 3.00]),
    ([7.30e-11, 1.23e-10, 1.64e-10, 2.31e-9, 3.94e-10], [3.99, 4.01, 4.01, 4.00, 4.00]),
];

const NAMES: [&str; 5] = ["u", "q", "p", "r", "s"];

fn emit(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

fn detail(line: &str) {
    emit(&format!("      {line}"));
}

struct Verdict {
    id: usize,
    title: &'static str,
    pass: bool,
    summary: String,
}

impl Verdict {
    fn print(&self) {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        emit(&format!("{tag} criterion {}: {} ({})", self.id, self.title, self.summary));
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("-".into(), |r| format!("{r:.2}"))
}

fn study(problem: &ProblemSpec, k: usize, cfg: &StabilizationConfig) -> ErrorReport {
    run_convergence_study(problem, k, 3..=7, DtPolicy::Paper, cfg, 0.1).expect("study setup")
}

/// Finest-level comparison of one study against one table block.
struct BlockCheck {
    eoc_bad: Vec<String>,
    magnitude_bad: Vec<String>,
    failed_levels: usize,
}

fn compare_block(label: &str, report: &ErrorReport, reference: &([f64; 5], [f64; 5])) -> BlockCheck {
    let mut check = BlockCheck {
        eoc_bad: Vec::new(),
        magnitude_bad: Vec::new(),
        failed_levels: report.levels.iter().filter(|l| l.failure.is_some()).count(),
    };
    let fine = report.finest().expect("levels");
    let (ref_e, ref_eoc) = reference;
    let errors = fine.errors.unwrap_or([f64::NAN; 5]);
    let mut e_line = String::new();
    let mut o_line = String::new();
    for v in 0..5 {
        e_line.push_str(&format!(" {}={:.2e}/{:.2e}", NAMES[v], errors[v], ref_e[v]));
        o_line.push_str(&format!(" {}={}/{:.2}", NAMES[v], fmt_opt(fine.eoc[v]), ref_eoc[v]));
        match fine.eoc[v] {
            Some(r) if (r - ref_eoc[v]).abs() <= EOC_TOL => {}
            other => check.eoc_bad.push(format!("eoc_{} {} vs {:.2}", NAMES[v], fmt_opt(other), ref_eoc[v])),
        }
        let ratio = errors[v] / ref_e[v];
        if !(ratio <= MAGNITUDE_FACTOR && ratio >= 1.0 / MAGNITUDE_FACTOR) {
            check.magnitude_bad.push(format!("e_{} x{:.2}", NAMES[v], ratio));
        }
    }
    detail(&format!("{label} N={} errors (ours/paper):{e_line}", fine.n_elements));
    detail(&format!("{label} N={} orders (ours/paper):{o_line}", fine.n_elements));
    if let Some(msg) = report.levels.iter().find_map(|l| l.failure.clone()) {
        detail(&format!("{label} level failure: {msg}"));
    }
    check
}

fn criterion_tables_periodic() -> (Verdict, Verdict) {
    let periodic = StabilizationConfig::paper_periodic();
    let start = Instant::now();
    let p1 = builtin_problem(BuiltinProblem::P1);
    let mut bad = Vec::new();
    for k in 0..4 {
        let r = study(&p1, k, &periodic);
        let c = compare_block(&format!("P1 k={k}"), &r, &TABLE_P1[k]);
        for m in c.eoc_bad.iter().chain(&c.magnitude_bad) {
            bad.push(format!("k={k} {m}"));
        }
        if c.failed_levels > 0 {
            bad.push(format!("k={k} {} failed levels", c.failed_levels));
        }
    }
    detail(&format!("P1 studies took {:.1} s", start.elapsed().as_secs_f64()));
    let v1 = Verdict {
        id: 1,
        title: "Problem 1 table, periodic linear",
        pass: bad.is_empty(),
        summary: if bad.is_empty() {
            format!("all finest EOCs within {EOC_TOL}, magnitudes within x{MAGNITUDE_FACTOR}")
        } else {
            bad.join("; ")
        },
    };
    v1.print();

    let start = Instant::now();
    let p2 = builtin_problem(BuiltinProblem::P2);
    let mut bad = Vec::new();
    let mut newton = 0;
    for k in 0..4 {
        let r = study(&p2, k, &periodic);
        let c = compare_block(&format!("P2 k={k}"), &r, &TABLE_P2[k]);
        newton = newton.max(r.max_newton_iterations());
        for m in &c.eoc_bad {
            bad.push(format!("k={k} {m}"));
        }
        if k == 2 {
            if let Some(m) = c.magnitude_bad.iter().find(|m| m.starts_with("e_u")) {
                bad.push(format!("k=2 {m}"));
            }
        }
        if c.failed_levels > 0 {
            bad.push(format!("k={k} {} failed levels", c.failed_levels));
        }
    }
    detail(&format!("P2 max Newton iterations per step: {newton} (cap {NEWTON_CAP})"));
    detail(&format!("P2 studies took {:.1} s", start.elapsed().as_secs_f64()));
    if newton > NEWTON_CAP {
        bad.push(format!("Newton {newton} > {NEWTON_CAP}"));
    }
    let v2 = Verdict {
        id: 2,
        title: "Problem 2 table, periodic nonlinear",
        pass: bad.is_empty(),
        summary: if bad.is_empty() {
            format!("finest EOCs within {EOC_TOL}, e_u(k=2) within x{MAGNITUDE_FACTOR}, Newton <= {NEWTON_CAP}")
        } else {
            bad.join("; ")
        },
    };
    v2.print();
    (v1, v2)
}

fn criterion_tables_dirichlet() -> Verdict {
    let cfg = StabilizationConfig::paper_dirichlet();
    let start = Instant::now();
    let mut bad = Vec::new();
    for (id, table) in [(BuiltinProblem::P3, &TABLE_P3), (BuiltinProblem::P4, &TABLE_P4)] {
        let p = builtin_problem(id);
        for k in 0..4 {
            let r = study(&p, k, &cfg);
            let c = compare_block(&format!("{id} k={k}"), &r, &table[k]);
            for m in &c.eoc_bad {
                bad.push(format!("{id} k={k} {m}"));
            }
            if c.failed_levels > 0 {
                bad.push(format!("{id} k={k} {} failed levels", c.failed_levels));
            }
        }
    }
    detail(&format!("P3/P4 studies took {:.1} s", start.elapsed().as_secs_f64()));
    let v = Verdict {
        id: 3,
        title: "Problems 3 and 4 tables, Dirichlet",
        pass: bad.is_empty(),
        summary: if bad.is_empty() {
            format!("all finest EOCs within {EOC_TOL}")
        } else {
            bad.join("; ")
        },
    };
    v.print();
    v
}

fn criterion_superconvergence() -> Verdict {
    let cfg = StabilizationConfig::paper_periodic();
    let mut bad = Vec::new();
    for k in 1..=2usize {
        let levels = superconvergence_study(k, 3..=6, &cfg).expect("stationary study");
        let (need_eps, need_tr) = (k as f64 + SUPER_PROJECTED_SLACK, 2.0 * k as f64 + SUPER_TRACE_SLACK);
        let mut min_eps = f64::INFINITY;
        let mut min_tr = f64::INFINITY;
        for l in &levels {
            for v in 0..5 {
                if let Some(r) = l.projected_eoc[v] {
                    min_eps = min_eps.min(r);
                }
                if let Some(r) = l.trace_eoc[v] {
                    min_tr = min_tr.min(r);
                }
            }
        }
        detail(&format!(
            "k={k}: min projected EOC {min_eps:.2} (need {need_eps:.1}), min trace EOC {min_tr:.2} (need {need_tr:.1})"
        ));
        if !(min_eps >= need_eps) {
            bad.push(format!("k={k} projected {min_eps:.2}"));
        }
        if !(min_tr >= need_tr) {
            bad.push(format!("k={k} traces {min_tr:.2}"));
        }
    }
    let v = Verdict {
        id: 4,
        title: "stationary superconvergence",
        pass: bad.is_empty(),
        summary: if bad.is_empty() { "k=1,2 over N=8..64".into() } else { bad.join("; ") },
    };
    v.print();
    v
}

/// Problem 1 data with `f = 0` and the given `alpha`.
fn unforced(alpha: f64) -> ProblemSpec {
    let mut p = builtin_problem(BuiltinProblem::P1);
    p.alpha = alpha;
    p.exact = None;
    p.forcing = std::sync::Arc::new(|_, _| 0.0);
    p.initial_operator = std::sync::Arc::new(move |x: f64| -(alpha + 1.0) * x.cos());
    p
}

fn norm_history(problem: &ProblemSpec, cfg: &StabilizationConfig) -> Vec<f64> {
    let mesh = Mesh::uniform(problem.domain.0, problem.domain.1, 32, BoundaryKind::Periodic).unwrap();
    let dt = 0.1 * mesh.h();
    let mut ti = TimeIntegrator::new(problem, &mesh, 2, cfg, dt, SolverOptions::default()).unwrap();
    let (mut state, _) = ti.initialize().unwrap();
    let mut norms = vec![modal_l2(&state.field.field(Var::U), &mesh)];
    for _ in 0..200 {
        state = ti.step(&state, dt).unwrap().0;
        norms.push(modal_l2(&state.field.field(Var::U), &mesh));
    }
    norms
}

fn criterion_l2_stability() -> Verdict {
    let cases = [
        ("paper-periodic, alpha=0", unforced(0.0), StabilizationConfig::paper_periodic()),
        ("boundary preset, alpha=1", unforced(1.0), StabilizationConfig::boundary_preset(1.0, -1.0)),
    ];
    let mut bad = Vec::new();
    for (label, p, cfg) in &cases {
        let norms = norm_history(p, cfg);
        let worst = norms
            .windows(2)
            .map(|w| (w[1] - w[0]) / w[0])
            .fold(f64::NEG_INFINITY, f64::max);
        detail(&format!(
            "{label}: ||u_0|| = {:.12}, ||u_200|| = {:.12}, max relative growth {worst:.2e}",
            norms[0], norms[200]
        ));
        if worst > L2_SLACK {
            bad.push(format!("{label} grows by {worst:.2e}"));
        }
    }
    let v = Verdict {
        id: 5,
        title: "L2 stability over 200 steps",
        pass: bad.is_empty(),
        summary: if bad.is_empty() { format!("non-increasing to {L2_SLACK:e}") } else { bad.join("; ") },
    };
    v.print();
    v
}

fn criterion_projection() -> Verdict {
    let cfg = StabilizationConfig::paper_periodic();
    let mut bad = Vec::new();
    let delta = ProjectionSystem::new(&cfg).unwrap().determinant();
    detail(&format!("Delta = {delta}"));
    if delta != 4.0 {
        bad.push(format!("Delta = {delta}"));
    }
    let c = travelling_sine(0.3);
    let (a, b) = (0.0, 2.0 * std::f64::consts::PI);
    for k in 0..=3usize {
        let basis = ReferenceBasis::new(k, false);
        let mut sums = Vec::new();
        let (mut orth, mut face, mut idem) = (0.0f64, 0.0f64, 0.0f64);
        for n in [8usize, 16, 32] {
            let mesh = Mesh::uniform(a, b, n, BoundaryKind::Periodic).unwrap();
            let pi = hdg_project(as_refs(&c), &mesh, &basis, &cfg).unwrap();
            orth = orth.max(orthogonality_defect(&c, &pi, &mesh));
            face = face.max(face_defect(&c, &pi, &mesh, &cfg));
            if n == 8 {
                idem = idempotence_defect(&pi, &mesh, &basis, &cfg);
            }
            sums.push(projection_error_sum(&c, &pi, &mesh));
        }
        let rate = eoc(sums[1], sums[2]).unwrap_or(f64::NAN);
        detail(&format!(
            "k={k}: orthogonality {orth:.1e}, face {face:.1e}, idempotence {idem:.1e}, rate {rate:.3} (want {})",
            k + 1
        ));
        if orth > PROJECTION_TOL || face > PROJECTION_TOL || idem > PROJECTION_TOL {
            bad.push(format!("k={k} defects {orth:.1e}/{face:.1e}/{idem:.1e}"));
        }
        if k >= 1 && !((rate - (k + 1) as f64).abs() <= PROJECTION_RATE_TOL) {
            bad.push(format!("k={k} rate {rate:.3}"));
        }
    }
    let v = Verdict {
        id: 6,
        title: "HDG projection",
        pass: bad.is_empty(),
        summary: if bad.is_empty() {
            format!("defects below {PROJECTION_TOL:e}, Delta = 4, rates k+1 within {PROJECTION_RATE_TOL}")
        } else {
            bad.join("; ")
        },
    };
    v.print();
    v
}

fn criterion_structure() -> Verdict {
    let mut bad = Vec::new();
    let n = 16;
    let p1 = builtin_problem(BuiltinProblem::P1);
    let mesh = Mesh::uniform(p1.domain.0, p1.domain.1, n, BoundaryKind::Periodic).unwrap();
    let mut patterns = Vec::new();
    for k in 0..=3 {
        let s = HdgSolver::new(&mesh, k, 1.0, -1.0, p1.flux.clone(), &StabilizationConfig::paper_periodic(), 2.0, SolverOptions::default())
            .unwrap();
        let m = s.global_matrix().unwrap();
        if m.dim() != 3 * n {
            bad.push(format!("k={k} dimension {}", m.dim()));
        }
        let pattern = s.sparsity_pattern();
        if !m.nonzero_pattern().iter().all(|ij| pattern.contains(ij)) {
            bad.push(format!("k={k} numeric entries outside the structural pattern"));
        }
        patterns.push(pattern);
    }
    if patterns.windows(2).any(|w| w[0] != w[1]) {
        bad.push("sparsity differs across k".into());
    }
    detail(&format!("N={n}: dimension 3N = {}, {} structural entries for k=0..3", 3 * n, patterns[0].len()));

    let (mut local, mut trans, mut solves) = (0.0f64, 0.0f64, 0usize);
    // stationary solves
    let (sp, f_tilde) = stationary_sine_problem(1.0);
    for k in 0..=3 {
        let m = Mesh::uniform(sp.domain.0, sp.domain.1, n, BoundaryKind::Periodic).unwrap();
        let mut s = HdgSolver::new(&m, k, sp.alpha, sp.beta, sp.flux.clone(), &StabilizationConfig::paper_periodic(), 1.0, SolverOptions::default())
            .unwrap();
        let ft = f_tilde.clone();
        let loads = element_loads(&m, s.basis(), |x| ft(x));
        let sol = s.solve(&loads, None, None).unwrap();
        local = local.max(s.residual_norm(&sol.field, &sol.traces, &loads));
        trans = trans.max(s.transmission_residual(&sol.field, &sol.traces));
        solves += 1;
    }
    // every time step, linear and Newton, periodic and Dirichlet
    for id in [BuiltinProblem::P1, BuiltinProblem::P2, BuiltinProblem::P3, BuiltinProblem::P4] {
        let p = builtin_problem(id);
        let cfg = match p.boundary {
            BoundaryKind::Periodic => StabilizationConfig::paper_periodic(),
            BoundaryKind::Dirichlet => StabilizationConfig::paper_dirichlet(),
        };
        let m = Mesh::uniform(p.domain.0, p.domain.1, n, p.boundary).unwrap();
        for k in 0..=3 {
            let dt = paper_time_step(k, m.h());
            let mut ti = TimeIntegrator::new(&p, &m, k, &cfg, dt, SolverOptions::default()).unwrap();
            let (mut state, _) = ti.initialize().unwrap();
            for _ in 0..5 {
                let (next, _) = ti.step(&state, dt).unwrap();
                let (l, t) = stage_residuals(&p, &m, k, &cfg, state.t, dt, (&state.field, &state.traces), (&next.field, &next.traces));
                local = local.max(l);
                trans = trans.max(t);
                solves += 1;
                state = next;
            }
        }
    }
    detail(&format!("{solves} solves: max local residual {local:.1e}, max transmission residual {trans:.1e}"));
    if local > LOCAL_TOL {
        bad.push(format!("local residual {local:.1e}"));
    }
    if trans > TRANSMISSION_TOL {
        bad.push(format!("transmission residual {trans:.1e}"));
    }
    let v = Verdict {
        id: 7,
        title: "global structure and residuals",
        pass: bad.is_empty(),
        summary: if bad.is_empty() {
            format!("dimension 3N, shared sparsity, residuals < {LOCAL_TOL:e} / {TRANSMISSION_TOL:e}")
        } else {
            bad.join("; ")
        },
    };
    v.print();
    v
}

#[test]
fn acceptance() {
    emit("");
    emit("acceptance criteria");
    let (v1, v2) = criterion_tables_periodic();
    let v3 = criterion_tables_dirichlet();
    let v4 = criterion_superconvergence();
    let v5 = criterion_l2_stability();
    let v6 = criterion_projection();
    let v7 = criterion_structure();
    let all = [&v1, &v2, &v3, &v4, &v5, &v6, &v7];
    let passed = all.iter().filter(|v| v.pass).count();
    emit(&format!("acceptance summary: {passed}/{} criteria pass", all.len()));
    for v in all {
        v.print();
    }

    for v in [&v4, &v5, &v6, &v7] {
        assert!(v.pass, "criterion {} ({}) failed: {}", v.id, v.title, v.summary);
    }
    if std::env::var("HDG5_STRICT_ACCEPTANCE").is_ok_and(|s| s == "1") {
        for v in [&v1, &v2, &v3] {
            assert!(v.pass, "criterion {} ({}) failed: {}", v.id, v.title, v.summary);
        }
    }
}
