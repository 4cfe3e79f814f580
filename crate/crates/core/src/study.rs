//! Error norms, convergence rates and the refinement study driver.

use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::assembly::{assemble_rhs, assemble_system, assemble_weighted, FormParams, FormWeights, RHS_QUADRATURE_DEGREE};
use crate::error::{GeometryError, StudyError};
use crate::fespace::{build_p2_space, mean_vector, P2Space};
use crate::geometry::{exact_data, harmonic_data, ScalarJet2, Sphere};
use crate::mesh::{build_background_mesh, extract_cut_complex, interpolate_levelset, CubeBox, CutComplex, DEFAULT_GUARD};
use crate::quadrature::{gauss_triangle, polygon_points};
use crate::solver::{solve_with_kind, SolveReport, SolverKind};

pub const ERROR_QUADRATURE_DEGREE: usize = 8;

pub const CSV_HEADER: &str = "level,cells,h,ndof,err_l2,rate_l2,err_h1,rate_h1,err_lb,rate_lb";

/// `‖e‖_{Γ_h}`, `‖∇_{Γ_h} e‖_{Γ_h}` and `‖Δ_{Γ_h} e‖_{K_h}` for `e = u^e - u_h`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorTriple {
    pub l2: f64,
    pub h1: f64,
    pub lb: f64,
}

/// Rates against ndof; `None` where a rate is undefined.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RateTriple {
    pub l2: Option<f64>,
    pub h1: Option<f64>,
    pub lb: Option<f64>,
}

/// Errors of a discrete solution against an exact field. The exact field is
/// first shifted by its own mean over `Γ_h`.
pub fn compute_errors<F: ScalarJet2 + ?Sized>(
    space: &P2Space,
    complex: &CutComplex,
    u_h: &[f64],
    exact: &F,
) -> Result<ErrorTriple, GeometryError> {
    let rule = gauss_triangle(ERROR_QUADRATURE_DEGREE).expect("supported degree");
    // Per polygon: ∫e, ∫e², ∫|P_h∇e|², ∫(P_h:∇²e)².
    let per_polygon: Vec<[f64; 4]> = complex
        .polygons
        .par_iter()
        .enumerate()
        .map(|(k, poly)| {
            let proj = poly.projector();
            let el = &space.elements[k];
            let coef = space.local_coefficients(k, u_h);
            let hess_h = el.combine_hessian(&coef);
            let mut acc = [0.0; 4];
            for (x, w) in polygon_points(&poly.vertices, &rule) {
                let jet = exact.jet(&x)?;
                let uh: f64 = coef.iter().zip(el.values(&x)).map(|(c, b)| c * b).sum();
                let guh = coef.iter().zip(el.gradients(&x)).fold(Vector3::zeros(), |a, (c, g)| a + g * *c);
                let diff = jet.value() - uh;
                let lap = proj.component_mul(&(jet.hessian() - hess_h)).sum();
                acc[0] += w * diff;
                acc[1] += w * diff * diff;
                acc[2] += w * (proj * (jet.gradient() - guh)).norm_squared();
                acc[3] += w * lap * lap;
            }
            Ok(acc)
        })
        .collect::<Result<_, GeometryError>>()?;

    let mut sums = [0.0; 4];
    for acc in &per_polygon {
        sums.iter_mut().zip(acc).for_each(|(s, a)| *s += a);
    }
    // u_h has zero Γ_h-mean, so the mean of e is the mean of the exact field
    // and ‖e - m‖² = ‖e‖² - m²|Γ_h|.
    let area = complex.surface_area();
    let m = sums[0] / area;
    let l2 = (sums[1] - m * m * area).max(0.0).sqrt();
    Ok(ErrorTriple { l2, h1: sums[2].sqrt(), lb: sums[3].sqrt() })
}

/// `‖v‖_h = (‖Δ_{Γ_h}v‖²_{K_h} + h⁻¹‖μ·[∇_{Γ_h}v]‖²_{E_h} + ‖[∇v]‖²_{F_h} + ‖[∇²v]‖²_{F_h})^{1/2}`.
pub fn energy_norm(space: &P2Space, complex: &CutComplex, v: &[f64]) -> f64 {
    let gram = assemble_weighted(space, complex, &FormWeights::energy(complex.h)).expect("complex invariants hold");
    gram.bilinear(v, v).max(0.0).sqrt()
}

fn rate(e0: f64, e1: f64, n0: usize, n1: usize) -> Option<f64> {
    if !(e0 > 0.0 && e1 > 0.0) || n0 == n1 || n0 == 0 || n1 == 0 {
        return None;
    }
    Some((e1 / e0).ln() / (n1 as f64 / n0 as f64).ln())
}

/// `rate_k = log(e_k / e_{k-1}) / log(ndof_k / ndof_{k-1})`; the first entry
/// is always `None`.
pub fn rates(rows: &[(usize, ErrorTriple)]) -> Vec<Option<RateTriple>> {
    let mut out = vec![None];
    for w in rows.windows(2) {
        let ((n0, a), (n1, b)) = (w[0], w[1]);
        out.push(Some(RateTriple {
            l2: rate(a.l2, b.l2, n0, n1),
            h1: rate(a.h1, b.h1, n0, n1),
            lb: rate(a.lb, b.lb, n0, n1),
        }));
    }
    out.truncate(rows.len());
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TestCase {
    /// `u = exp(x + y²) cos(z³)` restricted to the unit sphere, made mean free.
    Paper,
    /// `u = x₁`, `f = 4x₁`.
    Harmonic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyConfig {
    pub case: TestCase,
    pub variant: u8,
    pub levels: usize,
    pub cells0: usize,
    pub sigma: f64,
    pub gamma: f64,
    pub beta: f64,
    /// Background box is `[-a, a]³`.
    pub box_half_width: f64,
    pub tol: f64,
    pub solver: SolverKind,
    /// Write `Γ_h` of the finest level here.
    pub export_surface: Option<PathBuf>,
    /// Write the system matrix of the finest level here.
    pub export_matrix: Option<PathBuf>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            case: TestCase::Paper,
            variant: 0,
            levels: 4,
            cells0: 8,
            sigma: 10.0,
            gamma: 10.0,
            beta: 10.0,
            box_half_width: 1.2,
            tol: crate::solver::DEFAULT_TOLERANCE,
            solver: SolverKind::Cholesky,
            export_surface: None,
            export_matrix: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyRow {
    pub level: usize,
    pub cells: usize,
    pub h: f64,
    pub ndof: usize,
    pub errors: ErrorTriple,
    pub rates: Option<RateTriple>,
    pub solve: SolveReport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyReport {
    pub config: StudyConfig,
    pub rows: Vec<StudyRow>,
}

/// A failed study: the rows completed before the failing level.
#[derive(Debug)]
pub struct StudyFailure {
    pub partial: StudyReport,
    pub level: usize,
    pub error: StudyError,
}

impl std::fmt::Display for StudyFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "level {} failed: {}", self.level, self.error)
    }
}

impl std::error::Error for StudyFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<(), StudyError> {
        if self.levels == 0 {
            return Err(StudyError::Config("at least one level is required".into()));
        }
        if self.cells0 < 2 {
            return Err(StudyError::Config(format!("cells0 must be at least 2, got {}", self.cells0)));
        }
        self.params(1.0).validate()?;
        if !(self.tol > 0.0) {
            return Err(StudyError::Config(format!("tolerance must be positive, got {}", self.tol)));
        }
        Ok(())
    }

    pub fn params(&self, h: f64) -> FormParams {
        FormParams { sigma: self.sigma, gamma: self.gamma, beta: self.beta, variant: self.variant, h }
    }

    pub fn cells(&self, level: usize) -> usize {
        self.cells0 << level
    }
}

/// Mesh, space and discrete solution of one level.
pub struct LevelSolution {
    pub complex: CutComplex,
    pub space: P2Space,
    pub u_h: Vec<f64>,
    pub solve: SolveReport,
}

fn solve_with<U: ScalarJet2, F: ScalarJet2>(
    config: &StudyConfig,
    level: usize,
    u_exact: &U,
    f: &F,
    last: bool,
) -> Result<(LevelSolution, ErrorTriple), StudyError> {
    let mesh = build_background_mesh(CubeBox::symmetric(config.box_half_width), config.cells(level))?;
    let phi = interpolate_levelset(&Sphere::unit(), &mesh, DEFAULT_GUARD);
    let complex = extract_cut_complex(&mesh, &phi)?;
    drop(mesh);
    let space = build_p2_space(&complex)?;
    let a = assemble_system(&space, &complex, &config.params(complex.h))?;
    let b = assemble_rhs(&space, &complex, f)?;
    let c = mean_vector(&space, &complex, &gauss_triangle(RHS_QUADRATURE_DEGREE).expect("supported degree"));
    if last {
        if let Some(path) = &config.export_surface {
            complex.write_surface(BufWriter::new(File::create(path)?))?;
        }
        if let Some(path) = &config.export_matrix {
            a.write_coordinate(BufWriter::new(File::create(path)?))?;
        }
    }
    // Without facet gradient jumps the level set interpolant φ_h, which
    // vanishes on Γ_h, is a second kernel vector of the system.
    let extra = if config.variant == 2 { vec![space.lift_p1(&phi)] } else { Vec::new() };
    drop(phi);
    let (u_h, solve) = solve_with_kind(config.solver, &a, &b, &c, &extra, config.tol)?;
    drop(a);
    let errors = compute_errors(&space, &complex, &u_h, u_exact)?;
    Ok((LevelSolution { complex, space, u_h, solve }, errors))
}

/// Build, assemble, solve and measure one refinement level.
pub fn solve_level(config: &StudyConfig, level: usize) -> Result<(LevelSolution, ErrorTriple), StudyError> {
    config.validate()?;
    let last = level + 1 == config.levels;
    match config.case {
        TestCase::Paper => {
            let data = exact_data();
            solve_with(config, level, &data.u_exact, &data.f, last)
        }
        TestCase::Harmonic => {
            let data = harmonic_data();
            solve_with(config, level, &data.u_exact, &data.f, last)
        }
    }
}

/// Run all levels in sequence. A failing level stops the study and returns
/// the rows completed so far.
pub fn run_study(config: &StudyConfig) -> Result<StudyReport, Box<StudyFailure>> {
    let mut report = StudyReport { config: config.clone(), rows: Vec::new() };
    if let Err(error) = config.validate() {
        return Err(Box::new(StudyFailure { partial: report, level: 0, error }));
    }
    for level in 0..config.levels {
        match solve_level(config, level) {
            Ok((sol, errors)) => {
                report.rows.push(StudyRow {
                    level,
                    cells: config.cells(level),
                    h: sol.complex.h,
                    ndof: sol.space.ndof,
                    errors,
                    rates: None,
                    solve: sol.solve,
                });
                report.update_rates();
            }
            Err(error) => return Err(Box::new(StudyFailure { partial: report, level, error })),
        }
    }
    Ok(report)
}

fn fmt_rate(r: Option<f64>) -> String {
    r.map(|v| format!("{v:.3}")).unwrap_or_default()
}

impl StudyReport {
    fn update_rates(&mut self) {
        let pairs: Vec<(usize, ErrorTriple)> = self.rows.iter().map(|r| (r.ndof, r.errors)).collect();
        for (row, r) in self.rows.iter_mut().zip(rates(&pairs)) {
            row.rates = r;
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{CSV_HEADER}").unwrap();
        for r in &self.rows {
            let rt = r.rates.unwrap_or_default();
            writeln!(
                s,
                "{},{},{:.6},{},{:.5e},{},{:.5e},{},{:.5e},{}",
                r.level,
                r.cells,
                r.h,
                r.ndof,
                r.errors.l2,
                fmt_rate(rt.l2),
                r.errors.h1,
                fmt_rate(rt.h1),
                r.errors.lb,
                fmt_rate(rt.lb)
            )
            .unwrap();
        }
        s
    }

    pub fn to_markdown(&self) -> String {
        let c = &self.config;
        let mut s = String::new();
        writeln!(
            s,
            "case {:?}, variant {}, sigma {}, gamma {}, beta {}, box [-{a}, {a}]^3, tol {:e}\n",
            c.case,
            c.variant,
            c.sigma,
            c.gamma,
            c.beta,
            c.tol,
            a = c.box_half_width
        )
        .unwrap();
        writeln!(s, "| level | cells | h | ndof | L2 error | rate | H1 error | rate | LB error | rate |").unwrap();
        writeln!(s, "|---:|---:|---:|---:|---:|---:|---:|---:|---:|---:|").unwrap();
        for r in &self.rows {
            let rt = r.rates.unwrap_or_default();
            writeln!(
                s,
                "| {} | {} | {:.6} | {} | {:.5e} | {} | {:.5e} | {} | {:.5e} | {} |",
                r.level,
                r.cells,
                r.h,
                r.ndof,
                r.errors.l2,
                fmt_rate(rt.l2),
                r.errors.h1,
                fmt_rate(rt.h1),
                r.errors.lb,
                fmt_rate(rt.lb)
            )
            .unwrap();
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble_system;
    use crate::geometry::{Constant, SmoothField};
    use crate::jet::Scalar;

    fn e(l2: f64, h1: f64, lb: f64) -> ErrorTriple {
        ErrorTriple { l2, h1, lb }
    }

    #[test]
    fn rate_of_tabulated_pair() {
        let r = rates(&[(3995, e(1.57792, 1.0, 1.0)), (16802, e(0.91473, 1.0, 1.0))]);
        assert!(r[0].is_none());
        let r1 = r[1].unwrap();
        assert!((r1.l2.unwrap() - (-0.380)).abs() < 5e-4, "{:?}", r1.l2);
        assert_eq!(r1.h1, Some(0.0));
    }

    #[test]
    fn rate_arithmetic() {
        let r = rates(&[(100, e(1.0, 2.0, 0.0)), (200, e(0.5, 2.0, 1.0))]);
        let r1 = r[1].unwrap();
        assert!((r1.l2.unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(r1.h1, Some(0.0));
        assert_eq!(r1.lb, None);
        assert_eq!(rates(&[(10, e(1.0, 1.0, 1.0))]), vec![None]);
    }

    #[test]
    fn rates_are_scale_invariant() {
        let rows = [(100, e(1.0, 3.0, 5.0)), (400, e(0.3, 1.1, 2.9)), (1600, e(0.07, 0.5, 1.6))];
        let scaled: Vec<_> = rows.iter().map(|&(n, t)| (n, e(7.0 * t.l2, 0.01 * t.h1, 3.0 * t.lb))).collect();
        for (a, b) in rates(&rows).iter().zip(rates(&scaled)) {
            let (a, b) = (a.unwrap_or_default(), b.unwrap_or_default());
            for (x, y) in [(a.l2, b.l2), (a.h1, b.h1), (a.lb, b.lb)] {
                assert!((x.unwrap_or(0.0) - y.unwrap_or(0.0)).abs() < 1e-12);
            }
        }
    }

    struct Quadratic;
    impl SmoothField for Quadratic {
        fn eval<S: Scalar>(&self, x: &[S; 3]) -> Result<S, GeometryError> {
            Ok(x[0] * x[1] * 0.8 + x[2] * x[2] - x[0] * 1.5 + S::from_f64(0.25))
        }
    }

    fn coarse(n: usize) -> (CutComplex, P2Space) {
        let mesh = build_background_mesh(CubeBox::symmetric(1.2), n).unwrap();
        let phi = interpolate_levelset(&Sphere::unit(), &mesh, DEFAULT_GUARD);
        let complex = extract_cut_complex(&mesh, &phi).unwrap();
        let space = build_p2_space(&complex).unwrap();
        (complex, space)
    }

    #[test]
    fn interpolated_quadratic_has_no_error() {
        let (complex, space) = coarse(8);
        let u = space.interpolate(&Quadratic).unwrap();
        // Shift by a constant: the mean normalization removes it.
        let shifted: Vec<f64> = u.iter().map(|v| v + 0.7).collect();
        for v in [&u, &shifted] {
            let err = compute_errors(&space, &complex, v, &Quadratic).unwrap();
            assert!(err.l2 <= 1e-11 && err.h1 <= 1e-11 && err.lb <= 1e-11, "{err:?}");
        }
        let zero = compute_errors(&space, &complex, &vec![0.0; space.ndof], &Constant(0.0)).unwrap();
        assert_eq!(zero, e(0.0, 0.0, 0.0));
    }

    #[test]
    fn energy_norm_examples() {
        let (complex, space) = coarse(6);
        let gram = assemble_weighted(&space, &complex, &FormWeights::energy(complex.h)).unwrap();
        let ones = vec![2.5; space.ndof];
        assert!(energy_norm(&space, &complex, &ones).powi(2) <= 1e-12 * gram.max_abs() * space.ndof as f64);
        let lin = space.interpolate(&crate::geometry::Coordinate(1)).unwrap();
        let gram = assemble_weighted(&space, &complex, &FormWeights { grad_jump: 1.0, hess_jump: 1.0, ..Default::default() }).unwrap();
        assert!(gram.bilinear(&lin, &lin).abs() < 1e-12 * gram.max_abs() * space.ndof as f64);
        assert!(energy_norm(&space, &complex, &lin) > 0.0);
    }

    #[test]
    fn variant_monotonicity() {
        let (complex, space) = coarse(6);
        let v = space.interpolate(&exact_data().u_exact).unwrap();
        let a0 = assemble_system(&space, &complex, &FormParams::with_defaults(0, complex.h)).unwrap();
        let a2 = assemble_system(&space, &complex, &FormParams::with_defaults(2, complex.h)).unwrap();
        assert!(a0.bilinear(&v, &v) >= a2.bilinear(&v, &v));
    }

    #[test]
    fn config_validation() {
        for bad in [
            StudyConfig { levels: 0, ..Default::default() },
            StudyConfig { cells0: 1, ..Default::default() },
            StudyConfig { variant: 5, ..Default::default() },
            StudyConfig { tol: 0.0, ..Default::default() },
        ] {
            let failure = run_study(&bad).unwrap_err();
            assert!(failure.partial.rows.is_empty());
        }
    }

    #[test]
    fn surface_leaving_box_aborts_with_partial_report() {
        let cfg = StudyConfig { box_half_width: 0.9, levels: 2, ..Default::default() };
        let failure = run_study(&cfg).unwrap_err();
        assert_eq!(failure.level, 0);
        assert!(matches!(failure.error, StudyError::Mesh(_)));
    }

    #[test]
    fn harmonic_study_decreases_and_is_deterministic() {
        let cfg = StudyConfig { case: TestCase::Harmonic, levels: 2, cells0: 6, ..Default::default() };
        let report = run_study(&cfg).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert!(report.rows[1].ndof > report.rows[0].ndof);
        // Coarse levels are pre-asymptotic; only the decrease is checked here.
        assert!(report.rows[1].errors.l2 < report.rows[0].errors.l2);
        assert!(report.rows[1].rates.unwrap().l2.unwrap() < 0.0);
        let csv = report.to_csv();
        assert_eq!(csv, run_study(&cfg).unwrap().to_csv());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1].split(',').filter(|f| f.is_empty()).count(), 3);
        assert!(lines[2].split(',').all(|f| !f.is_empty()));
        assert_eq!(report.to_markdown().lines().count(), 6);
    }
}
