//! Experiment runners for the product, bracket and norm-continuity
//! conditions and for the free dynamics. Each returns report rows in a
//! deterministic order; sweeps over `ℏ` run in parallel.

pub mod families;
mod report;

use std::f64::consts::PI;

use num::complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::continuum::{refine_pair_for_product, refined_norm, ClassicalGerm, ContinuumError, Germ};
use crate::cylinder::{dot_int, sup_norm, CylinderFunction};
use crate::weylq::{band_distance, BandedOperator, HbarParam, QuantError, Window};

pub use report::{all_passed, summarize, to_csv, ReportRow, Summary, CSV_HEADER};

#[derive(Debug, Error, PartialEq)]
pub enum VerifyError {
    #[error("invalid sweep configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Continuum(#[from] ContinuumError),
    #[error(transparent)]
    Quant(#[from] QuantError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub hbar_grid: Vec<f64>,
    pub rmax: usize,
    pub window: Window,
    pub tol: f64,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            hbar_grid: vec![0.4, 0.2, 0.1, 0.05],
            rmax: 1,
            window: Window::new(32),
            tol: 1e-9,
            seed: 0,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), VerifyError> {
        if let Some(h) = self.hbar_grid.iter().find(|h| !(h.is_finite() && (-1.0..=1.0).contains(*h))) {
            return Err(VerifyError::Config(format!("hbar outside [-1,1]: {h}")));
        }
        if self.rmax == 0 {
            return Err(VerifyError::Config("Rmax must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(VerifyError::Config("tol must be positive".into()));
        }
        Ok(())
    }
}

/// Relative tolerance for the Rieffel-at-zero gap, applied at `|ℏ| ≤ 0.01`.
pub const RIEFFEL_ZERO_TOL: f64 = 0.05;
pub const RIEFFEL_ZERO_HBAR: f64 = 0.01;
/// Bound on the band-data distance in the dynamics experiment.
pub const DYNAMICS_TOL: f64 = 1e-12;

/// `max_{R ≤ rmax}` of the fiber-reduced window norms, and `Σ|c|`.
fn germ_norm(op: &BandedOperator, cfg: &SweepConfig, window: &Window) -> Result<(f64, f64), VerifyError> {
    let mut lower: f64 = 0.0;
    for r in 1..=cfg.rmax {
        lower = lower.max(refined_norm(op, r, window, cfg.tol)?.lower);
    }
    let upper = op.upper_bound();
    Ok((lower.min(upper), upper))
}

/// `π Σ_{term pairs} (‖h₁‖ ‖∂_{b₁}h₂‖ + ‖∂_{b₂}h₁‖ ‖h₂‖)` with atom-sum norms;
/// multiply by `|ℏ|`.
pub fn von_neumann_bound(f: &CylinderFunction, g: &CylinderFunction) -> f64 {
    let l1 = |atoms: &[crate::cylinder::Atom]| atoms.iter().map(|a| a.c.norm()).sum::<f64>();
    let deriv = |b: &[i64], atoms: &[crate::cylinder::Atom]| {
        atoms.iter().map(|a| a.c.norm() * dot_int(b, &a.xi).abs()).sum::<f64>()
    };
    let mut total = 0.0;
    for t1 in f.terms() {
        for t2 in g.terms() {
            total += l1(&t1.atoms) * deriv(&t1.b, &t2.atoms) + deriv(&t2.b, &t1.atoms) * l1(&t2.atoms);
        }
    }
    PI * total
}

/// `Σ_{atom pairs} |c₁||c₂| π³ |Δ|³ / 3` with `Δ = ξ₁·b₂ − ξ₂·b₁`; multiply
/// by `ℏ²`. Each pair contributes `(2/|ℏ|)|x − sin x|` at `x = πℏΔ`, and
/// `|x − sin x| ≤ |x|³/6`.
pub fn dirac_bound(f: &CylinderFunction, g: &CylinderFunction) -> f64 {
    let mut total = 0.0;
    for t1 in f.terms() {
        for t2 in g.terms() {
            for a1 in &t1.atoms {
                for a2 in &t2.atoms {
                    let delta = dot_int(&t2.b, &a1.xi) - dot_int(&t1.b, &a2.xi);
                    total += a1.c.norm() * a2.c.norm() * PI.powi(3) * delta.abs().powi(3) / 3.0;
                }
            }
        }
    }
    total
}

/// Product defect `Q(f)Q(g) − Q(fg)` on `l²` of the common refinement.
pub fn von_neumann_defect(f: &ClassicalGerm, g: &ClassicalGerm, hbar: HbarParam) -> Result<BandedOperator, VerifyError> {
    let (fl, gl) = refine_pair_for_product(f, g)?;
    let fg = fl.multiply(&gl)?;
    let qf = fl.quantize(hbar);
    let qg = gl.quantize(hbar);
    let prod = qf.operator().compose(qg.operator())?;
    Ok(prod.sub(fg.quantize(hbar).operator())?)
}

/// Bracket defect `(−iℏ)⁻¹[Q(f), Q(g)] − Q({f, g})` on `l²`.
pub fn dirac_defect(f: &ClassicalGerm, g: &ClassicalGerm, hbar: HbarParam) -> Result<BandedOperator, VerifyError> {
    if hbar.value() == 0.0 {
        return Err(VerifyError::Config("the bracket defect needs hbar != 0".into()));
    }
    let (fl, gl) = refine_pair_for_product(f, g)?;
    let bracket = ClassicalGerm::new(
        fl.function()
            .poisson(gl.function())
            .map_err(ContinuumError::from)?,
    )?;
    let comm = fl
        .quantize(hbar)
        .operator()
        .commutator(gl.quantize(hbar).operator())?;
    let scaled = comm.scale(Complex64::new(0.0, 1.0 / hbar.value()));
    Ok(scaled.sub(bracket.quantize(hbar).operator())?)
}

pub fn run_von_neumann(f: &ClassicalGerm, g: &ClassicalGerm, cfg: &SweepConfig) -> Result<Vec<ReportRow>, VerifyError> {
    cfg.validate()?;
    let base = von_neumann_bound(f.function(), g.function());
    cfg.hbar_grid
        .par_iter()
        .map(|&h| {
            let defect = von_neumann_defect(f, g, HbarParam::new(h)?)?;
            let (lower, upper) = germ_norm(&defect, cfg, &cfg.window)?;
            Ok(ReportRow::new("von-neumann", h, cfg.rmax, cfg.window.radius, lower, upper).with_bound(base * h.abs()))
        })
        .collect()
}

pub fn run_dirac(f: &ClassicalGerm, g: &ClassicalGerm, cfg: &SweepConfig) -> Result<Vec<ReportRow>, VerifyError> {
    cfg.validate()?;
    if cfg.hbar_grid.contains(&0.0) {
        return Err(VerifyError::Config("hbar = 0 is not allowed for the bracket defect".into()));
    }
    let base = dirac_bound(f.function(), g.function());
    cfg.hbar_grid
        .par_iter()
        .map(|&h| {
            let defect = dirac_defect(f, g, HbarParam::new(h)?)?;
            let (lower, upper) = germ_norm(&defect, cfg, &cfg.window)?;
            // Rounding in the commutator is amplified by 1/ℏ.
            let bound = base * h * h + 1e-13 / h.abs();
            Ok(ReportRow::new("dirac", h, cfg.rmax, cfg.window.radius, lower, upper).with_bound(bound))
        })
        .collect()
}

/// Window centered on the Fourier modes where the symbol is largest:
/// `a ≈ v*/(2πℏ)`.
pub fn classical_center(argmax_v: &[f64], hbar: f64) -> Vec<i64> {
    argmax_v.iter().map(|v| (v / (2.0 * PI * hbar)).round() as i64).collect()
}

/// Per `ℏ` and `R`: the fiber-reduced norm at `l^R`. A row at `ℏ = 0`
/// carries the sup norm, and a gap row per `ℏ` carries
/// `|max_R lower − ‖f‖∞|`, bounded by 5% of `‖f‖∞` once `|ℏ| ≤ 0.01`.
pub fn run_rieffel_zero(f: &ClassicalGerm, cfg: &SweepConfig) -> Result<Vec<ReportRow>, VerifyError> {
    cfg.validate()?;
    let sup = sup_norm(f.function(), 1e-12);
    let mut rows = vec![ReportRow::new("rieffel0-sup", 0.0, 1, 0, sup.lower, sup.upper)];
    let per_h: Vec<Vec<ReportRow>> = cfg
        .hbar_grid
        .par_iter()
        .filter(|&&h| h != 0.0)
        .map(|&h| {
            let q = f.quantize(HbarParam::new(h)?);
            let window = Window::centered(cfg.window.radius, classical_center(&sup.argmax_v, h));
            let mut out = Vec::new();
            let mut best: f64 = 0.0;
            for r in 1..=cfg.rmax {
                let row = refined_norm(q.operator(), r, &window, cfg.tol)?;
                best = best.max(row.lower);
                out.push(ReportRow::new("rieffel0", h, r, cfg.window.radius, row.lower, row.upper));
            }
            let gap = (best - sup.lower).abs();
            let mut gap_row = ReportRow::new("rieffel0-gap", h, cfg.rmax, cfg.window.radius, gap, gap + sup.slack);
            if h.abs() <= RIEFFEL_ZERO_HBAR {
                gap_row = gap_row.with_bound(RIEFFEL_ZERO_TOL * sup.lower);
            }
            out.push(gap_row);
            Ok(out)
        })
        .collect::<Result<_, VerifyError>>()?;
    rows.extend(per_h.into_iter().flatten());
    Ok(rows)
}

/// Running suprema `N_R(ℏ) = max_{R' ≤ R} ‖Q_ℏ^{l^{R'}}(f)‖` at one window.
fn running_norms(f: &ClassicalGerm, h: f64, cfg: &SweepConfig, window: &Window) -> Result<Vec<f64>, VerifyError> {
    let q = f.quantize(HbarParam::new(h)?);
    let mut out = Vec::with_capacity(cfg.rmax);
    let mut best: f64 = 0.0;
    for r in 1..=cfg.rmax {
        best = best.max(refined_norm(q.operator(), r, window, cfg.tol)?.lower);
        out.push(best);
    }
    Ok(out)
}

/// Local modulus of continuity of the refined norms around `hbar1`:
/// `m_R(δ) = max_{|ℏ−ℏ₁| ≤ δ} |N_R(ℏ) − N_R(ℏ₁)|` over the grid. Rows with
/// `R ≥ 2` are checked against `m_1(δ)` plus the estimator slack, taken as
/// the change in the norms when the window is halved.
pub fn run_rieffel_away(f: &ClassicalGerm, hbar1: f64, delta: f64, cfg: &SweepConfig) -> Result<Vec<ReportRow>, VerifyError> {
    cfg.validate()?;
    if hbar1 == 0.0 || !(-1.0..=1.0).contains(&hbar1) {
        return Err(VerifyError::Config(format!("hbar1 must lie in [-1,1] without 0, got {hbar1}")));
    }
    let mut grid: Vec<f64> = cfg
        .hbar_grid
        .iter()
        .copied()
        .filter(|h| (h - hbar1).abs() <= delta + 1e-12 && *h != 0.0)
        .collect();
    grid.push(hbar1);
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let width = f.quantize(HbarParam::new(hbar1)?).operator().band_width() as usize;
    let half = Window::new((cfg.window.radius / 2).max(width));
    let norms: Vec<(f64, Vec<f64>, Vec<f64>)> = grid
        .par_iter()
        .map(|&h| Ok((h, running_norms(f, h, cfg, &cfg.window)?, running_norms(f, h, cfg, &half)?)))
        .collect::<Result<_, VerifyError>>()?;
    let at = |h: f64| norms.iter().find(|(x, _, _)| *x == h).expect("hbar1 is in the grid");
    let (_, base, _) = at(hbar1);

    let mut moduli = Vec::with_capacity(cfg.rmax);
    for r in 0..cfg.rmax {
        let m = norms.iter().map(|(_, n, _)| (n[r] - base[r]).abs()).fold(0.0, f64::max);
        let slack = norms.iter().map(|(_, n, nh)| (n[r] - nh[r]).abs()).fold(0.0, f64::max) * 2.0 + cfg.tol;
        moduli.push((m, slack));
    }
    let (m1, s1) = moduli[0];
    Ok(moduli
        .iter()
        .enumerate()
        .map(|(i, &(m, slack))| {
            let mut row = ReportRow::new("rieffel1", hbar1, i + 1, cfg.window.radius, m, m + slack);
            if i > 0 {
                row = row.with_bound(m1 + s1 + slack);
            }
            row
        })
        .collect())
}

/// Per `t`: band-data distance between `U_t Q(f) U_t*` and `Q(f ∘ Φ_t)`,
/// and whether the flowed function is still in the operator system.
pub fn run_dynamics(f: &ClassicalGerm, times: &[f64], hbar: HbarParam) -> Vec<ReportRow> {
    let q = BandedOperator::from_function(f.function(), hbar);
    times
        .iter()
        .flat_map(|&t| {
            let flowed = f.function().classical_flow(t);
            let lhs = q.quantum_flow_conjugate(t);
            let rhs = BandedOperator::from_function(&flowed, hbar);
            let dist = band_distance(&lhs, &rhs);
            let inside = if flowed.in_operator_system() { 1.0 } else { 0.0 };
            [
                ReportRow::new(format!("dynamics[t={t}]"), hbar.value(), 1, 0, dist, dist).with_bound(DYNAMICS_TOL),
                ReportRow::new(format!("dynamics-in-m0[t={t}]"), hbar.value(), 1, 0, inside, inside),
            ]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Lattice;
    use std::sync::Arc;

    fn pair() -> (ClassicalGerm, ClassicalGerm) {
        let l = Arc::new(Lattice::chain(1, 1, 1));
        let one = Complex64::new(1.0, 0.0);
        (
            ClassicalGerm::new(CylinderFunction::monomial(l.clone(), vec![1], vec![0.3], one).unwrap()).unwrap(),
            ClassicalGerm::new(CylinderFunction::monomial(l, vec![1], vec![0.4], one).unwrap()).unwrap(),
        )
    }

    #[test]
    fn von_neumann_closed_form() {
        let (f, g) = pair();
        let cfg = SweepConfig::default();
        let rows = run_von_neumann(&f, &g, &cfg).unwrap();
        assert_eq!(rows.len(), 4);
        for row in &rows {
            let exact = 2.0 * (0.05 * PI * row.hbar).sin().abs();
            assert!((row.value_lower - exact).abs() < 1e-9, "{row:?}");
            assert!((row.bound.unwrap() - 0.7 * PI * row.hbar).abs() < 1e-12);
            assert_eq!(row.passed, Some(true));
        }
        assert!((rows[2].value_lower - 0.0314147).abs() < 1e-6);
    }

    #[test]
    fn dirac_closed_form() {
        let (f, g) = pair();
        let rows = run_dirac(&f, &g, &SweepConfig::default()).unwrap();
        for row in &rows {
            let h = row.hbar;
            let exact = (0.2 * PI - 2.0 * (0.1 * PI * h).sin() / h).abs();
            assert!((row.value_lower - exact).abs() < 1e-9, "{row:?}");
            assert_eq!(row.passed, Some(true));
        }
        assert!((rows[2].value_lower - 1.03e-4).abs() < 1e-6);
        let mut cfg = SweepConfig::default();
        cfg.hbar_grid.push(0.0);
        assert!(run_dirac(&f, &g, &cfg).is_err());
    }

    #[test]
    fn trivial_pairs_have_zero_defect() {
        let l = Arc::new(Lattice::chain(1, 1, 1));
        let one = ClassicalGerm::new(CylinderFunction::one(l)).unwrap();
        for row in run_von_neumann(&one, &one, &SweepConfig::default()).unwrap() {
            assert_eq!(row.value_lower, 0.0);
        }
        let (f, _) = pair();
        for row in run_dirac(&f, &f, &SweepConfig::default()).unwrap() {
            assert_eq!(row.value_lower, 0.0);
        }
    }

    #[test]
    fn dynamics_rows() {
        let (f, _) = pair();
        let rows = run_dynamics(&f, &[0.0, 0.1, 10.0], HbarParam::new(0.5).unwrap());
        assert_eq!(rows.len(), 6);
        assert!(rows.iter().all(|r| r.passed != Some(false)));
        assert_eq!(rows[1].value_lower, 1.0);
        assert_eq!(rows[5].value_lower, 0.0);
    }

    #[test]
    fn unimodular_rieffel_rows() {
        let (f, _) = pair();
        let cfg = SweepConfig {
            hbar_grid: vec![0.65, 0.7, 0.75],
            rmax: 3,
            window: Window::new(16),
            tol: 1e-10,
            seed: 0,
        };
        for row in run_rieffel_away(&f, 0.7, 0.05, &cfg).unwrap() {
            assert!(row.value_lower < 1e-12, "{row:?}");
        }
        let cfg = SweepConfig {
            hbar_grid: vec![0.01],
            ..cfg
        };
        let rows = run_rieffel_zero(&f, &cfg).unwrap();
        assert!((rows[0].value_lower - 1.0).abs() < 1e-12);
        assert!(rows.iter().all(|r| r.passed != Some(false)), "{rows:?}");
    }
}
