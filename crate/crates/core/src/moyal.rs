//! Star product, momentum derivatives and traces.
//!
//! With modes `f_n(x)` the product is
//! `(A★B)(x,p) = Σ_{n,m} e^{2ip(n+m)ℓ} a_n(x − mℓ) b_m(x + nℓ)`.
//! On a ring of even length a mode sum `n + m` that leaves the centered window
//! describes the same kernel entry as the folded mode with its midpoint moved
//! by half a period, so for W and B symbols the folded contribution is
//! evaluated at `x + L/2` ([`Fold::Ring`]). C and series symbols are plain
//! functions sampled on the grid and use the periodic fold ([`Fold::Grid`]).

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::LatticeGeometry;
use crate::operator::{kernel_to_operator, momentum_kernel};
use crate::symbols::{integral_symbol, matmul_acc, reconstruct, Flavor, ModeForm, WeylSymbol};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fold {
    /// Out-of-window mode sums fold with a half-period translation in x.
    Ring,
    /// Out-of-window mode sums fold periodically in n only.
    Grid,
}

fn fold_for(a: Flavor, b: Flavor) -> Result<(Fold, Flavor)> {
    use Flavor::*;
    match (a, b) {
        (W, W) => Ok((Fold::Ring, W)),
        (W, B) | (B, W) | (B, B) => Ok((Fold::Ring, B)),
        (C, C) => Ok((Fold::Grid, C)),
        (Series, Series) => Ok((Fold::Grid, Series)),
        (Series, B) | (B, Series) => Ok((Fold::Ring, B)),
        (Series, W) | (W, Series) => Ok((Fold::Ring, W)),
        _ => Err(Error::Unsupported(format!("star product of {a:?} and {b:?} symbols"))),
    }
}

/// Per-axis bookkeeping of one `(n, m)` term.
struct Term {
    a_mode: usize,
    b_mode: usize,
    /// Offsets (in ℓ) at which `a` and `b` are read relative to the output x.
    a_shift: [usize; 2],
    b_shift: [usize; 2],
}

/// Extended dims padded to two axes (a leading trivial axis for chains).
fn padded_dims(g: &LatticeGeometry) -> [usize; 2] {
    let d = g.extended_dims();
    if d.len() == 1 {
        [1, d[0]]
    } else {
        [d[0], d[1]]
    }
}

/// Output mode and read offsets for input modes `na`, `nb` (flat indices).
fn term(g: &LatticeGeometry, fold: Fold, na: usize, nb: usize) -> (usize, Term) {
    let n = g.mode_numbers(na);
    let m = g.mode_numbers(nb);
    let dim = g.dim();
    let mut out_slots = vec![0; dim];
    let mut a_shift = [0usize; 2];
    let mut b_shift = [0usize; 2];
    for j in 0..dim {
        let nn = g.n(j) as i64;
        let two = 2 * nn;
        let mut k = n[j] + m[j];
        let mut sh = 0;
        if k < -nn / 2 {
            k += nn;
            sh = nn;
        } else if k >= nn / 2 {
            k -= nn;
            sh = nn;
        }
        if fold == Fold::Grid {
            sh = 0;
        }
        out_slots[j] = g.mode_slot(j, k);
        let pj = if dim == 1 { 1 } else { j };
        a_shift[pj] = (-m[j] + sh).rem_euclid(two) as usize;
        b_shift[pj] = (n[j] + sh).rem_euclid(two) as usize;
    }
    (
        g.mode_index(&out_slots),
        Term {
            a_mode: na,
            b_mode: nb,
            a_shift,
            b_shift,
        },
    )
}

#[inline]
fn accumulate(out: &mut [Complex64], a: &[Complex64], b: &[Complex64], dims: [usize; 2], t: &Term, sd: usize) {
    let bl = sd * sd;
    let [rows, width] = dims;
    for r0 in 0..rows {
        let ra0 = (r0 + t.a_shift[0]) % rows;
        let rb0 = (r0 + t.b_shift[0]) % rows;
        let orow = &mut out[r0 * width * bl..(r0 + 1) * width * bl];
        let arow = &a[ra0 * width * bl..(ra0 + 1) * width * bl];
        let brow = &b[rb0 * width * bl..(rb0 + 1) * width * bl];
        let mut ra1 = t.a_shift[1];
        let mut rb1 = t.b_shift[1];
        if sd == 1 {
            for o in orow.iter_mut() {
                *o += arow[ra1] * brow[rb1];
                ra1 += 1;
                if ra1 == width {
                    ra1 = 0;
                }
                rb1 += 1;
                if rb1 == width {
                    rb1 = 0;
                }
            }
        } else {
            for r1 in 0..width {
                matmul_acc(
                    &mut orow[r1 * bl..(r1 + 1) * bl],
                    &arow[ra1 * bl..(ra1 + 1) * bl],
                    &brow[rb1 * bl..(rb1 + 1) * bl],
                    sd,
                );
                ra1 += 1;
                if ra1 == width {
                    ra1 = 0;
                }
                rb1 += 1;
                if rb1 == width {
                    rb1 = 0;
                }
            }
        }
    }
}

/// Star product in mode form with an explicit folding rule.
pub fn star_modes_with(a: &ModeForm, b: &ModeForm, fold: Fold, flavor: Flavor) -> Result<ModeForm> {
    let g = a.geometry();
    g.check_same(b.geometry())?;
    let sd = g.internal_dim();
    let dims = padded_dims(g);
    let mut groups: Vec<Vec<Term>> = (0..g.num_modes()).map(|_| Vec::new()).collect();
    let active_b = b.active_modes();
    for na in a.active_modes() {
        for &nb in &active_b {
            let (k, t) = term(g, fold, na, nb);
            groups[k].push(t);
        }
    }
    let slice_len = g.num_extended() * sd * sd;
    let mut out = ModeForm::zeros(g, flavor);
    out.raw_mut()
        .par_chunks_mut(slice_len)
        .zip(groups.par_iter())
        .for_each(|(dst, terms)| {
            for t in terms {
                accumulate(dst, a.mode_slice(t.a_mode), b.mode_slice(t.b_mode), dims, t, sd);
            }
        });
    Ok(out)
}

/// Star product in mode form; the folding rule follows the flavors.
pub fn star_modes(a: &ModeForm, b: &ModeForm) -> Result<ModeForm> {
    let (fold, flavor) = fold_for(a.flavor(), b.flavor())?;
    star_modes_with(a, b, fold, flavor)
}

/// Star product of two symbols via mode shifts.
pub fn star(a: &WeylSymbol, b: &WeylSymbol) -> Result<WeylSymbol> {
    Ok(star_modes(&a.to_mode_form(), &b.to_mode_form())?.to_symbol())
}

/// Second star evaluator through momentum kernels: both symbols are mapped
/// back to kernels, composed as `∫dR A(P, R) B(R, P′)` on the grid, and the
/// result is transformed with the momentum-integral form of the symbol.
pub fn star_rhombus(a: &WeylSymbol, b: &WeylSymbol) -> Result<WeylSymbol> {
    let (_, flavor) = fold_for(a.flavor(), b.flavor())?;
    if !matches!(flavor, Flavor::W | Flavor::B) {
        return Err(Error::Unsupported(format!("kernel route for {flavor:?} symbols")));
    }
    let (oa, ra) = reconstruct(a)?;
    let (ob, rb) = reconstruct(b)?;
    let tol = 1e-10 * (1.0 + a.max_abs().max(b.max_abs()));
    if ra.max(rb) > tol {
        return Err(Error::Reconstruction(ra.max(rb)));
    }
    let k = momentum_kernel(&oa).compose(&momentum_kernel(&ob))?;
    integral_symbol(&kernel_to_operator(&k), flavor)
}

/// `∂/∂p_axis` in mode form: mode `n` multiplied by `2i n ℓ`.
pub fn dp_modes(m: &ModeForm, axis: usize) -> ModeForm {
    let g = m.geometry();
    let l = g.ell(axis);
    let mut out = m.clone();
    let len = g.num_extended() * g.internal_dim() * g.internal_dim();
    for (mode, chunk) in out.raw_mut().chunks_mut(len).enumerate() {
        let n = g.mode_numbers(mode)[axis];
        let f = Complex64::new(0.0, 2.0 * n as f64 * l);
        chunk.iter_mut().for_each(|z| *z *= f);
    }
    out
}

pub fn dp(sym: &WeylSymbol, axis: usize) -> WeylSymbol {
    dp_modes(&sym.to_mode_form(), axis).to_symbol()
}

fn zero_mode(g: &LatticeGeometry) -> usize {
    g.mode_index(&(0..g.dim()).map(|j| g.mode_slot(j, 0)).collect::<Vec<_>>())
}

fn orbital_trace(block: &[Complex64], sd: usize) -> Complex64 {
    (0..sd).map(|a| block[a * sd + a]).sum()
}

/// Weight of `Σ_{x∈𝔒} Σ_p` in the full trace: `1/(2^D |𝒪|)` for W, C and
/// series symbols, `1/|𝒪|` for B symbols.
fn fo_weight(g: &LatticeGeometry, flavor: Flavor) -> f64 {
    match flavor {
        Flavor::B => 1.0,
        _ => 1.0 / (1usize << g.dim()) as f64,
    }
}

/// Trace over 𝔒 × grid from the zero mode, `Σ_p F(x,p) = |𝒪| f_0(x)`.
pub fn trace_fo_modes(m: &ModeForm) -> Complex64 {
    let g = m.geometry();
    let sd = g.internal_dim();
    let bl = sd * sd;
    let s: Complex64 = m
        .mode_slice(zero_mode(g))
        .chunks(bl)
        .map(|b| orbital_trace(b, sd))
        .sum();
    s * fo_weight(g, m.flavor())
}

pub fn trace_fo(sym: &WeylSymbol) -> Complex64 {
    let g = sym.geometry();
    let sd = g.internal_dim();
    let mut s = ZERO;
    for k in 0..g.num_momenta() {
        for r in 0..g.num_extended() {
            s += orbital_trace(sym.block(r, k), sd);
        }
    }
    s * fo_weight(g, sym.flavor()) / g.num_momenta() as f64
}

/// Trace restricted to the physical sites 𝒪.
pub fn trace_co(sym: &WeylSymbol) -> Complex64 {
    let g = sym.geometry();
    let sd = g.internal_dim();
    let mut s = ZERO;
    for r in (0..g.num_extended()).filter(|&r| g.is_physical(r)) {
        for k in 0..g.num_momenta() {
            s += orbital_trace(sym.block(r, k), sd);
        }
    }
    s / g.num_momenta() as f64
}

/// `trace_fo(a ★ b)` evaluated from the zero output mode only.
pub fn trace_star_modes(a: &ModeForm, b: &ModeForm) -> Result<Complex64> {
    let g = a.geometry();
    g.check_same(b.geometry())?;
    let (fold, flavor) = fold_for(a.flavor(), b.flavor())?;
    let sd = g.internal_dim();
    let bl = sd * sd;
    let dims = padded_dims(g);
    let z = zero_mode(g);
    let active_b = b.active_modes();
    let mut acc = ZERO;
    let mut buf = vec![ZERO; g.num_extended() * bl];
    for na in a.active_modes() {
        let neg: Vec<usize> = g
            .mode_numbers(na)
            .iter()
            .enumerate()
            .map(|(j, &n)| g.mode_slot(j, -n))
            .collect();
        let nb = g.mode_index(&neg);
        if active_b.binary_search(&nb).is_err() {
            continue;
        }
        let (k, t) = term(g, fold, na, nb);
        debug_assert_eq!(k, z);
        buf.iter_mut().for_each(|v| *v = ZERO);
        accumulate(&mut buf, a.mode_slice(na), b.mode_slice(nb), dims, &t, sd);
        acc += buf.chunks(bl).map(|c| orbital_trace(c, sd)).sum::<Complex64>();
    }
    Ok(acc * fo_weight(g, flavor))
}

/// Max-norm of `q ★ g − 1`; for C symbols only the physical sites count.
pub fn groenewold_residual(q: &WeylSymbol, g: &WeylSymbol) -> Result<f64> {
    let prod = star(q, g)?;
    Ok(unit_defect(&prod))
}

/// Max-norm of `s − 1` over the grid (physical sites only for C symbols).
pub fn unit_defect(s: &WeylSymbol) -> f64 {
    let geo = s.geometry();
    let one = WeylSymbol::constant(geo, s.flavor(), Complex64::new(1.0, 0.0));
    if s.flavor() == Flavor::C {
        s.max_diff_where(&one, |r| geo.is_physical(r))
    } else {
        s.max_diff(&one)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::LatticeOperator;
    use crate::symbols::{buot_symbol, weyl_symbol};
    use std::f64::consts::PI;

    #[test]
    fn plane_waves_compose() {
        let g = LatticeGeometry::chain(8, 1).unwrap();
        let e1 = weyl_symbol(&LatticeOperator::translation(&g, &[1]).unwrap());
        let e2 = weyl_symbol(&LatticeOperator::translation(&g, &[2]).unwrap());
        assert!(star(&e1, &e1).unwrap().max_diff(&e2) < 1e-13);
    }

    #[test]
    fn product_identity_dense() {
        for g in [
            LatticeGeometry::chain(8, 1).unwrap(),
            LatticeGeometry::new(&[4, 6], &[0.5, 1.0], 2).unwrap(),
        ] {
            let a = LatticeOperator::random(&g, 1, None);
            let b = LatticeOperator::random(&g, 2, None);
            let ab = a.mul(&b).unwrap();
            let w = star(&weyl_symbol(&a), &weyl_symbol(&b)).unwrap();
            assert!(w.max_diff(&weyl_symbol(&ab)) < 1e-11);
            let bb = star(&buot_symbol(&a), &buot_symbol(&b)).unwrap();
            assert!(bb.max_diff(&buot_symbol(&ab)) < 1e-11);
            let wb = star(&weyl_symbol(&a), &buot_symbol(&b)).unwrap();
            assert!(wb.max_diff(&buot_symbol(&ab)) < 1e-11);
            let bw = star(&buot_symbol(&a), &weyl_symbol(&b)).unwrap();
            assert!(bw.max_diff(&buot_symbol(&ab)) < 1e-11);
        }
    }

    #[test]
    fn kernel_route_agrees() {
        let g = LatticeGeometry::new(&[4, 4], &[0.5, 0.5], 1).unwrap();
        let a = weyl_symbol(&LatticeOperator::random(&g, 3, None));
        let b = weyl_symbol(&LatticeOperator::random(&g, 4, None));
        let s1 = star(&a, &b).unwrap();
        let s2 = star_rhombus(&a, &b).unwrap();
        assert!(s1.max_diff(&s2) < 1e-12);
    }

    #[test]
    fn dp_examples() {
        let g = LatticeGeometry::chain(8, 1).unwrap();
        let e1 = weyl_symbol(&LatticeOperator::translation(&g, &[1]).unwrap());
        let d = dp(&e1, 0);
        assert!(d.max_diff(&e1.scale(Complex64::new(0.0, 2.0))) < 1e-13);
        let c = WeylSymbol::constant(&g, Flavor::W, Complex64::new(3.0, 1.0));
        assert!(dp(&c, 0).max_abs() < 1e-13);
    }

    #[test]
    fn traces() {
        let g = LatticeGeometry::chain(4, 1).unwrap();
        let one = weyl_symbol(&LatticeOperator::identity(&g));
        assert!((trace_fo(&one) - 4.0).norm() < 1e-13);
        assert!((trace_fo_modes(&one.to_mode_form()) - 4.0).norm() < 1e-13);
        let g2 = LatticeGeometry::new(&[6, 4], &[1.0, 1.0], 2).unwrap();
        let a = LatticeOperator::random(&g2, 5, None);
        let b = LatticeOperator::random(&g2, 6, None);
        let (wa, wb) = (weyl_symbol(&a), weyl_symbol(&b));
        let tr = a.mul(&b).unwrap().trace();
        assert!((trace_fo(&star(&wa, &wb).unwrap()) - tr).norm() < 1e-10);
        assert!((trace_star_modes(&wa.to_mode_form(), &wb.to_mode_form()).unwrap() - tr).norm() < 1e-10);
        assert!((trace_co(&wa) - a.trace()).norm() < 1e-10);
        assert!((trace_fo(&buot_symbol(&a)) - a.trace()).norm() < 1e-10);
        let shifted = buot_symbol(&a).shift_x(&[1, 0]);
        assert!(trace_co(&shifted).norm() < 1e-12);
        let _ = PI;
    }
}
