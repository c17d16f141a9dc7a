//! Seeded verification of the symbol axioms on random operators.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::LatticeGeometry;
use crate::moyal::{star_modes, trace_fo, trace_star_modes, unit_defect};
use crate::operator::LatticeOperator;
use crate::symbols::{placed_mode_form, weyl_symbol, Flavor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub geometry: LatticeGeometry,
    pub trials: usize,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub passed: bool,
}

/// Largest hopping range whose kernels avoid the Nyquist displacement
/// `−N/2` on every axis.
pub fn sub_nyquist_range(g: &LatticeGeometry) -> i64 {
    (0..g.dim()).map(|j| g.n(j) as i64 / 2 - 1).min().unwrap_or(0)
}

/// Runs, for `trials` seeded random pairs `(A, B)`:
/// the product identity `(AB)_W = A_W ★ B_W`, the first trace identity
/// `Tr A_W = tr A`, the second trace identity in its star form
/// `Tr(A_W ★ B_W) = tr AB` and in its pointwise form
/// `Tr(A_W ★ B_W) = Tr(A_W B_W)`, and the identity symbol `(1)_W = 1`.
///
/// The pointwise form is exercised on operators whose hopping range stays
/// below `N/2`; dense pairs are used for everything else.
pub fn axiom_suite(g: &LatticeGeometry, trials: usize, seed: u64, tolerance: f64) -> Result<SuiteReport> {
    let mut star_def: f64 = 0.0;
    let mut tr1: f64 = 0.0;
    let mut tr2_star: f64 = 0.0;
    let mut tr2_point: f64 = 0.0;
    let range = Some(sub_nyquist_range(g));
    for t in 0..trials as u64 {
        let sa = seed.wrapping_mul(1_000_003).wrapping_add(2 * t);
        let a = LatticeOperator::random(g, sa, None);
        let b = LatticeOperator::random(g, sa + 1, None);
        let am = placed_mode_form(&a, Flavor::W)?;
        let bm = placed_mode_form(&b, Flavor::W)?;
        let ab = a.mul(&b)?;
        let lhs = weyl_symbol(&ab);
        star_def = star_def.max(lhs.max_diff(&star_modes(&am, &bm)?.to_symbol()));
        tr1 = tr1.max((trace_fo(&am.to_symbol()) - a.trace()).norm());
        tr2_star = tr2_star.max((trace_star_modes(&am, &bm)? - ab.trace()).norm());

        let c = LatticeOperator::random(g, sa ^ 0x5eed, range);
        let d = LatticeOperator::random(g, (sa ^ 0x5eed) + 1, range);
        let cw = weyl_symbol(&c);
        let dw = weyl_symbol(&d);
        let starred = trace_star_modes(&cw.to_mode_form(), &dw.to_mode_form())?;
        let plain: Complex64 = trace_fo(&cw.pointwise(&dw)?);
        tr2_point = tr2_point.max((starred - plain).norm());
    }
    let id = unit_defect(&weyl_symbol(&LatticeOperator::identity(g)));
    let mk = |name: &str, v: f64| Check {
        name: name.to_string(),
        max_deviation: v,
        tolerance,
        passed: v < tolerance,
    };
    let checks = vec![
        mk("star_product_identity", star_def),
        mk("first_trace_identity", tr1),
        mk("second_trace_identity_star", tr2_star),
        mk("second_trace_identity_pointwise", tr2_point),
        mk("identity_symbol", id),
    ];
    let passed = checks.iter().all(|c| c.passed);
    Ok(SuiteReport {
        geometry: g.clone(),
        trials,
        seed,
        checks,
        passed,
    })
}
