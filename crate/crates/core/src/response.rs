//! Green's-function symbols, currents and the Hall invariant, with oracles
//! that avoid the symbol calculus altogether.
//!
//! At every Matsubara frequency `ω` the Dirac operator is
//! `Q = (iω + μ)·1 − H` and `G = Q⁻¹`. Frequency integrals run over the real
//! line with a tan-mapped Gauss–Legendre rule.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::LatticeGeometry;
use crate::linalg;
use crate::models::{random_gapped_perturbation, ModelSpec};
use crate::moyal::{dp_modes, star_modes, trace_star_modes, unit_defect};
use crate::operator::{displacement, spectral_gap, CMatrix, LatticeOperator};
use crate::symbols::{placed_mode_form, Flavor, ModeForm, WeylSymbol};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Smallest gap at μ accepted by the response functions.
pub const MIN_GAP: f64 = 1e-8;

/// Gauss–Legendre rule in `θ ∈ (−π/2, π/2)` mapped to `ω = scale·tan θ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyQuadrature {
    pub scale: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl FrequencyQuadrature {
    pub fn tan_legendre(n: usize, scale: f64) -> Result<Self> {
        let n = NonZeroUsize::new(n).ok_or_else(|| Error::Unsupported("empty quadrature rule".into()))?;
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Unsupported(format!("quadrature scale {scale}")));
        }
        let mut pairs: Vec<(f64, f64)> = GaussLegendre::new(n).as_node_weight_pairs().to_vec();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let len = pairs.len();
        // mirror the upper half so that the rule is exactly symmetric
        for i in 0..len / 2 {
            let (x, w) = pairs[len - 1 - i];
            pairs[i] = (-x, w);
        }
        if len % 2 == 1 {
            pairs[len / 2].0 = 0.0;
        }
        let h = 0.5 * PI;
        let (nodes, weights) = pairs
            .iter()
            .map(|&(x, w)| {
                let th = h * x;
                let c = th.cos();
                (scale * th.tan(), w * h * scale / (c * c))
            })
            .unzip();
        Ok(Self { scale, nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Weighted sum `Σ w_i f(ω_i)` with nodes evaluated in parallel and the
    /// reduction done in node order.
    pub fn integrate<T, F>(&self, f: F) -> Result<Vec<(f64, T)>>
    where
        T: Send,
        F: Fn(f64) -> Result<T> + Sync,
    {
        self.nodes
            .par_iter()
            .zip(self.weights.par_iter())
            .map(|(&w_node, &w)| f(w_node).map(|v| (w, v)))
            .collect()
    }
}

/// `(iω + μ)·1 − H`.
pub fn dirac_operator(h: &LatticeOperator, mu: f64, omega: f64) -> LatticeOperator {
    let d = h.geometry().operator_dim();
    let z = Complex64::new(mu, omega);
    let m = CMatrix::from_diagonal_element(d, d, z) - h.matrix();
    LatticeOperator::new(h.geometry().clone(), m).expect("same shape")
}

pub fn green_operator(h: &LatticeOperator, mu: f64, omega: f64) -> Result<LatticeOperator> {
    dirac_operator(h, mu, omega).inverse()
}

/// W symbol of `Q⁻¹`.
pub fn green_symbol(h: &LatticeOperator, mu: f64, omega: f64) -> Result<WeylSymbol> {
    Ok(placed_mode_form(&green_operator(h, mu, omega)?, Flavor::W)?.to_symbol())
}

fn require_gap(h: &LatticeOperator, mu: f64) -> Result<f64> {
    let gap = spectral_gap(h, mu)?;
    if gap < MIN_GAP {
        let ev = h.eigenvalues()?;
        let below = ev.iter().filter(|&&e| e < mu).count();
        return Err(Error::GapClosed {
            mu,
            gap,
            before: below,
            after: below,
        });
    }
    Ok(gap)
}

/// Mode forms of `Q_W`, `G_W` and the spatial derivatives `∂_{p_k} Q_W` at
/// one frequency.
struct NodeSymbols {
    q: ModeForm,
    g: ModeForm,
    dq: Vec<ModeForm>,
}

impl NodeSymbols {
    fn new(h: &LatticeOperator, mu: f64, omega: f64) -> Result<Self> {
        let q_op = dirac_operator(h, mu, omega);
        let g_op = q_op.inverse()?;
        let q = placed_mode_form(&q_op, Flavor::W)?;
        let g = placed_mode_form(&g_op, Flavor::W)?;
        let dq = (0..h.geometry().dim()).map(|k| dp_modes(&q, k)).collect();
        Ok(Self { q, g, dq })
    }

    fn groenewold(&self) -> Result<f64> {
        Ok(unit_defect(&star_modes(&self.q, &self.g)?.to_symbol()))
    }
}

/// Local current `j_k(x)` on 𝔒 for every spatial axis `k`, laid out
/// `[k][x]`, from the plain product of `G_W` and `∂_{p_k} Q_W`:
/// `j_k(x) = −∫dω/2π (1/|𝒪|) Σ_p tr G_W ∂_{p_k} Q_W`.
pub fn local_current(h: &LatticeOperator, mu: f64, quad: &FrequencyQuadrature) -> Result<Vec<Vec<f64>>> {
    require_gap(h, mu)?;
    let g = h.geometry();
    let d = g.dim();
    let next = g.num_extended();
    let per_node = quad.integrate(|omega| {
        let ns = NodeSymbols::new(h, mu, omega)?;
        let gs = ns.g.to_symbol();
        let mut out = vec![vec![0.0; next]; d];
        for (k, row) in out.iter_mut().enumerate() {
            let prod = gs.pointwise(&ns.dq[k].to_symbol())?;
            for (r, v) in row.iter_mut().enumerate() {
                let mut s = ZERO;
                for p in 0..g.num_momenta() {
                    s += orbital_trace(prod.block(r, p), g.internal_dim());
                }
                *v = s.re;
            }
        }
        Ok(out)
    })?;
    let norm = -1.0 / (2.0 * PI * g.num_momenta() as f64);
    let mut j = vec![vec![0.0; next]; d];
    for (w, field) in per_node {
        for k in 0..d {
            for r in 0..next {
                j[k][r] += norm * w * field[k][r];
            }
        }
    }
    Ok(j)
}

fn orbital_trace(block: &[Complex64], sd: usize) -> Complex64 {
    (0..sd).map(|a| block[a * sd + a]).sum()
}

/// `2^{−D} Σ_{x∈𝔒} j_k(x)`.
pub fn sum_local_current(g: &LatticeGeometry, j: &[Vec<f64>]) -> Vec<f64> {
    let f = 1.0 / (1usize << g.dim()) as f64;
    j.iter().map(|row| f * row.iter().sum::<f64>()).collect()
}

/// Total current `J̄_k = −∫dω/2π Tr_𝔒 (G_W ★ ∂_{p_k} Q_W)`.
pub fn total_current(h: &LatticeOperator, mu: f64, quad: &FrequencyQuadrature) -> Result<Vec<f64>> {
    require_gap(h, mu)?;
    let d = h.geometry().dim();
    let per_node = quad.integrate(|omega| {
        let ns = NodeSymbols::new(h, mu, omega)?;
        ns.dq
            .iter()
            .map(|dq| trace_star_modes(&ns.g, dq))
            .collect::<Result<Vec<_>>>()
    })?;
    let mut j = vec![0.0; d];
    for (w, tr) in per_node {
        for k in 0..d {
            j[k] -= w * tr[k].re / (2.0 * PI);
        }
    }
    Ok(j)
}

/// Operator-level value of the total current: the sum of `⟨a|∂_{p_k}H|a⟩`
/// over the eigenstates of `H` below `μ`, where `∂_{p_k}H` multiplies every
/// hopping by `2i n_k ℓ_k`.
pub fn total_current_oracle(h: &LatticeOperator, mu: f64) -> Result<Vec<f64>> {
    require_gap(h, mu)?;
    if !h.is_hermitian(1e-12) {
        return Err(Error::NotHermitian(h.hermiticity_defect()));
    }
    let (vals, vecs) = linalg::eigh(h.matrix());
    let occ: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] < mu).collect();
    (0..h.geometry().dim())
        .map(|k| {
            let v = h.momentum_derivative(k);
            let mut s = ZERO;
            for &a in &occ {
                let col = vecs.column(a);
                s += (col.adjoint() * v.matrix() * col)[(0, 0)];
            }
            Ok(s.re)
        })
        .collect()
}

/// Normalization turning `∫dω Σ_ε Tr_𝔒[…]` into the invariant: the
/// `1/(3!·4π²)` of the momentum-space formula times the Brillouin-zone
/// measure `π²/(ℓ_x ℓ_y |𝒪|)`, with the overall sign that makes the
/// translation-invariant case equal the TKNN Chern number of the occupied
/// bands for `Q = (iω + μ) − H`.
fn hall_prefactor(g: &LatticeGeometry) -> f64 {
    let bz = PI * PI / (g.ell(0) * g.ell(1) * g.num_sites() as f64);
    -bz / (24.0 * PI * PI)
}

/// Star chains entering the invariant at one frequency, indices ordered
/// `(p_x, p_y, ω)`.
struct HallTerms {
    /// `∂_i Q`, with `∂_ω Q = i`.
    dq: [ModeForm; 3],
    /// `Y_i = G ★ ∂_i Q`.
    y: Vec<ModeForm>,
    /// `∂_j G = −Y_j ★ G`.
    dg: Vec<ModeForm>,
}

impl HallTerms {
    fn new(ns: &NodeSymbols) -> Result<Self> {
        let g = &ns.g;
        let dq_w = ModeForm::constant(g.geometry(), Flavor::W, I);
        let dq = [ns.dq[0].clone(), ns.dq[1].clone(), dq_w];
        let y: Vec<ModeForm> = dq.iter().map(|d| star_modes(g, d)).collect::<Result<_>>()?;
        let dg = y
            .iter()
            .map(|yj| Ok(star_modes(yj, g)?.scale(Complex64::new(-1.0, 0.0))))
            .collect::<Result<_>>()?;
        Ok(Self { dq, y, dg })
    }

    /// `Tr(G ★ ∂_iQ ★ ∂_jG ★ ∂_kQ)`.
    fn chain(&self, i: usize, j: usize, k: usize) -> Result<Complex64> {
        trace_star_modes(&self.y[i], &star_modes(&self.dg[j], &self.dq[k])?)
    }

    fn bracket(&self, i: usize, j: usize, k: usize) -> Result<Complex64> {
        let (a, b) = (self.chain(i, j, k)?, self.chain(k, j, i)?);
        Ok(if i <= k { a - b } else { -(b - a) })
    }

    /// The ε-contraction as three brackets, one per cyclic ordering.
    fn integrand(&self) -> Result<Complex64> {
        let mut acc = ZERO;
        for (i, j, k) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
            acc += self.bracket(i, j, k)?;
        }
        Ok(acc)
    }
}

/// Antisymmetrized trace `Tr(G★∂_iQ★∂_jG★∂_kQ) − Tr(G★∂_kQ★∂_jG★∂_iQ)` at a
/// single frequency, axes numbered `0 = p_x`, `1 = p_y`, `2 = ω`. Both
/// orderings evaluate the same two chains, so swapping `i` and `k` flips
/// the sign exactly.
pub fn hall_bracket(h: &LatticeOperator, mu: f64, omega: f64, i: usize, j: usize, k: usize) -> Result<Complex64> {
    if h.geometry().dim() != 2 {
        return Err(Error::Geometry("the Hall invariant needs two spatial axes".into()));
    }
    if i > 2 || j > 2 || k > 2 {
        return Err(Error::Unsupported(format!("bracket axes ({i}, {j}, {k})")));
    }
    HallTerms::new(&NodeSymbols::new(h, mu, omega)?)?.bracket(i, j, k)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HallResult {
    pub invariant: f64,
    /// Imaginary part of the integrated trace, zero up to round-off.
    pub imaginary_part: f64,
    pub nearest_integer: i64,
    pub distance_to_integer: f64,
    /// `|𝒩(N_ω) − 𝒩(N_ω/2)|` when requested.
    pub quadrature_error: Option<f64>,
    pub max_groenewold_residual: f64,
    pub gap: f64,
}

fn hall_sum(h: &LatticeOperator, mu: f64, quad: &FrequencyQuadrature) -> Result<(Complex64, f64)> {
    let per_node = quad.integrate(|omega| {
        let ns = NodeSymbols::new(h, mu, omega)?;
        Ok((HallTerms::new(&ns)?.integrand()?, ns.groenewold()?))
    })?;
    let mut total = ZERO;
    let mut res: f64 = 0.0;
    for (w, (v, r)) in per_node {
        total += w * v;
        res = res.max(r);
    }
    Ok((total * hall_prefactor(h.geometry()), res))
}

/// Hall invariant `𝒩` of a gapped two-dimensional Hamiltonian. With
/// `estimate_error` the rule with half the nodes is evaluated as well.
pub fn hall_invariant(
    h: &LatticeOperator,
    mu: f64,
    quad: &FrequencyQuadrature,
    estimate_error: bool,
) -> Result<HallResult> {
    let g = h.geometry();
    if g.dim() != 2 {
        return Err(Error::Geometry("the Hall invariant needs two spatial axes".into()));
    }
    let gap = require_gap(h, mu)?;
    let (n, res) = hall_sum(h, mu, quad)?;
    let quadrature_error = if estimate_error && quad.len() >= 2 {
        let coarse = FrequencyQuadrature::tan_legendre(quad.len() / 2, quad.scale)?;
        let (n2, _) = hall_sum(h, mu, &coarse)?;
        Some((n.re - n2.re).abs())
    } else {
        None
    };
    let nearest = n.re.round();
    Ok(HallResult {
        invariant: n.re,
        imaginary_part: n.im,
        nearest_integer: nearest as i64,
        distance_to_integer: (n.re - nearest).abs(),
        quadrature_error,
        max_groenewold_residual: res,
        gap,
    })
}

/// Translation-invariant Bloch blocks `h(p) = Σ_n e^{2ipnℓ} H[0, n]` on the
/// momentum grid, with their momentum derivatives.
struct GridBloch {
    h: Vec<CMatrix>,
    dh: Vec<[CMatrix; 2]>,
}

fn grid_bloch(h: &LatticeOperator) -> Result<GridBloch> {
    let g = h.geometry();
    let sd = g.internal_dim();
    let ns = g.num_sites();
    for s in 0..ns {
        for t in 0..ns {
            let n = displacement(g, s, t);
            let t0 = g.site_index(
                &n.iter()
                    .enumerate()
                    .map(|(j, &v)| v.rem_euclid(g.n(j) as i64) as usize)
                    .collect::<Vec<_>>(),
            );
            for a in 0..sd {
                for b in 0..sd {
                    let dev = (h.matrix()[(s * sd + a, t * sd + b)] - h.matrix()[(a, t0 * sd + b)]).norm();
                    if dev > 1e-12 {
                        return Err(Error::NotPeriodic(format!("kernel varies between sites {s} and {t}")));
                    }
                }
            }
        }
    }
    let mut out = GridBloch { h: Vec::new(), dh: Vec::new() };
    for k in 0..g.num_momenta() {
        let p = g.momentum(k);
        let mut hk = CMatrix::zeros(sd, sd);
        let mut d0 = CMatrix::zeros(sd, sd);
        let mut d1 = CMatrix::zeros(sd, sd);
        for t in 0..ns {
            let n = displacement(g, 0, t);
            let arg: f64 = (0..2).map(|j| 2.0 * p[j] * n[j] as f64 * g.ell(j)).sum();
            let e = Complex64::from_polar(1.0, arg);
            for a in 0..sd {
                for b in 0..sd {
                    let v = e * h.matrix()[(a, t * sd + b)];
                    hk[(a, b)] += v;
                    d0[(a, b)] += v * I * (2.0 * n[0] as f64 * g.ell(0));
                    d1[(a, b)] += v * I * (2.0 * n[1] as f64 * g.ell(1));
                }
            }
        }
        out.h.push(hk);
        out.dh.push([d0, d1]);
    }
    Ok(out)
}

/// Momentum-space evaluation of the invariant for a translation-invariant
/// Hamiltonian: `∫dω ∫d²p ε_{ijk} tr G ∂_iQ ∂_jG ∂_kQ` over `3!·4π²` with
/// the Brillouin-zone integral replaced by the grid sum and the same sign
/// convention as [`hall_invariant`]. No symbols are used.
pub fn hall_momentum_space(h: &LatticeOperator, mu: f64, quad: &FrequencyQuadrature) -> Result<f64> {
    let g = h.geometry();
    if g.dim() != 2 {
        return Err(Error::Geometry("the Hall invariant needs two spatial axes".into()));
    }
    require_gap(h, mu)?;
    let bloch = grid_bloch(h)?;
    let sd = g.internal_dim();
    let per_node = quad.integrate(|omega| {
        let mut acc = ZERO;
        for (hk, dh) in bloch.h.iter().zip(&bloch.dh) {
            let q = CMatrix::from_diagonal_element(sd, sd, Complex64::new(mu, omega)) - hk;
            let gk = linalg::inverse(&q)?;
            let dq = [-&dh[0], -&dh[1], CMatrix::from_diagonal_element(sd, sd, I)];
            let dg: Vec<CMatrix> = dq.iter().map(|d| -(&gk * d * &gk)).collect();
            for (i, j, k) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
                acc += (&gk * &dq[i] * &dg[j] * &dq[k]).trace() - (&gk * &dq[k] * &dg[j] * &dq[i]).trace();
            }
        }
        Ok(acc)
    })?;
    let total: Complex64 = per_node.into_iter().map(|(w, v)| w * v).sum();
    Ok(total.re * hall_prefactor(g))
}

/// Bloch Hamiltonian `h(k) = Σ_R H[(0,a), (R,b)] e^{ik·R}` of a periodic
/// lattice operator with a rectangular supercell; `k` in inverse site units.
#[derive(Clone, Debug)]
pub struct BlochHamiltonian {
    cell: [usize; 2],
    dim: usize,
    hops: Vec<([i64; 2], CMatrix)>,
}

impl BlochHamiltonian {
    /// Extract from a two-dimensional operator whose kernel is invariant
    /// under translations by the supercell.
    pub fn from_operator(h: &LatticeOperator, cell: [usize; 2]) -> Result<Self> {
        let g = h.geometry();
        if g.dim() != 2 {
            return Err(Error::Geometry("Bloch extraction needs two axes".into()));
        }
        if cell[0] == 0 || cell[1] == 0 || g.n(0) % cell[0] != 0 || g.n(1) % cell[1] != 0 {
            return Err(Error::NotPeriodic(format!("supercell {cell:?} does not tile the lattice")));
        }
        let sd = g.internal_dim();
        let dim = cell[0] * cell[1] * sd;
        let local = |cx: usize, cy: usize, a: usize| (cx * cell[1] + cy) * sd + a;
        let mut hops: Vec<([i64; 2], CMatrix)> = Vec::new();
        for cx in 0..cell[0] {
            for cy in 0..cell[1] {
                let s = g.site_index(&[cx, cy]);
                for t in 0..g.num_sites() {
                    let n = displacement(g, s, t);
                    let ux = cx as i64 + n[0];
                    let uy = cy as i64 + n[1];
                    let r = [ux.div_euclid(cell[0] as i64), uy.div_euclid(cell[1] as i64)];
                    let bx = ux.rem_euclid(cell[0] as i64) as usize;
                    let by = uy.rem_euclid(cell[1] as i64) as usize;
                    for a in 0..sd {
                        for b in 0..sd {
                            let v = h.matrix()[(s * sd + a, t * sd + b)];
                            if v == ZERO {
                                continue;
                            }
                            let idx = match hops.iter().position(|(rr, _)| *rr == r) {
                                Some(i) => i,
                                None => {
                                    hops.push((r, CMatrix::zeros(dim, dim)));
                                    hops.len() - 1
                                }
                            };
                            hops[idx].1[(local(cx, cy, a), local(bx, by, b))] += v;
                        }
                    }
                }
            }
        }
        let bloch = Self { cell, dim, hops };
        bloch.check_periodic(h)?;
        Ok(bloch)
    }

    fn check_periodic(&self, h: &LatticeOperator) -> Result<()> {
        let g = h.geometry();
        let sd = g.internal_dim();
        for s in 0..g.num_sites() {
            let c = g.site_coords(s);
            let base = g.site_index(&[c[0] % self.cell[0], c[1] % self.cell[1]]);
            let shift = [(c[0] - c[0] % self.cell[0]) as i64, (c[1] - c[1] % self.cell[1]) as i64];
            for t in 0..g.num_sites() {
                let ct = g.site_coords(t);
                let t0 = g.site_index(&[
                    (ct[0] as i64 - shift[0]).rem_euclid(g.n(0) as i64) as usize,
                    (ct[1] as i64 - shift[1]).rem_euclid(g.n(1) as i64) as usize,
                ]);
                for a in 0..sd {
                    for b in 0..sd {
                        let dev = (h.matrix()[(s * sd + a, t * sd + b)] - h.matrix()[(base * sd + a, t0 * sd + b)]).norm();
                        if dev > 1e-12 {
                            return Err(Error::NotPeriodic(format!(
                                "entry ({s},{t}) differs from its translate by {dev:.3e}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn at(&self, k: [f64; 2]) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for (r, block) in &self.hops {
            let arg = k[0] * (r[0] * self.cell[0] as i64) as f64 + k[1] * (r[1] * self.cell[1] as i64) as f64;
            m += block * Complex64::from_polar(1.0, arg);
        }
        m
    }

    /// Momentum mesh point `(i, j)` of an `m[0] × m[1]` mesh of the reduced
    /// zone.
    fn mesh_k(&self, m: [usize; 2], i: usize, j: usize) -> [f64; 2] {
        [
            2.0 * PI * i as f64 / (m[0] * self.cell[0]) as f64,
            2.0 * PI * j as f64 / (m[1] * self.cell[1]) as f64,
        ]
    }
}

/// Chern number of the band range `bands` by the link-variable method on an
/// `mesh[0] × mesh[1]` grid of the reduced zone. The range must be separated
/// from the other bands at every mesh point.
pub fn fhs_chern_set(bloch: &BlochHamiltonian, mesh: [usize; 2], bands: std::ops::Range<usize>) -> Result<i64> {
    if bands.is_empty() || bands.end > bloch.dim() || mesh[0] < 2 || mesh[1] < 2 {
        return Err(Error::Unsupported(format!("band range {bands:?} on mesh {mesh:?}")));
    }
    let nb = bands.len();
    let mut states: Vec<CMatrix> = Vec::with_capacity(mesh[0] * mesh[1]);
    let mut min_sep = f64::INFINITY;
    for i in 0..mesh[0] {
        for j in 0..mesh[1] {
            let (vals, vecs) = linalg::eigh(&bloch.at(bloch.mesh_k(mesh, i, j)));
            if bands.start > 0 {
                min_sep = min_sep.min(vals[bands.start] - vals[bands.start - 1]);
            }
            if bands.end < vals.len() {
                min_sep = min_sep.min(vals[bands.end] - vals[bands.end - 1]);
            }
            states.push(vecs.columns(bands.start, nb).into_owned());
        }
    }
    if min_sep < 1e-8 {
        return Err(Error::BandCrossing(min_sep));
    }
    let at = |i: usize, j: usize| &states[(i % mesh[0]) * mesh[1] + (j % mesh[1])];
    let link = |a: &CMatrix, b: &CMatrix| {
        let d = (a.adjoint() * b).determinant();
        d / d.norm()
    };
    let mut total = 0.0;
    for i in 0..mesh[0] {
        for j in 0..mesh[1] {
            let u1 = link(at(i, j), at(i + 1, j));
            let u2 = link(at(i + 1, j), at(i + 1, j + 1));
            let u3 = link(at(i, j + 1), at(i + 1, j + 1));
            let u4 = link(at(i, j), at(i, j + 1));
            total += (u1 * u2 * u3.conj() * u4.conj()).arg();
        }
    }
    Ok((total / (2.0 * PI)).round() as i64)
}

/// Chern number of every band individually.
pub fn fhs_chern(bloch: &BlochHamiltonian, mesh: [usize; 2]) -> Result<Vec<i64>> {
    (0..bloch.dim()).map(|b| fhs_chern_set(bloch, mesh, b..b + 1)).collect()
}

/// Default link-variable mesh: enough points that the per-plaquette Berry
/// flux stays far below `π` for the models used here.
pub const DEFAULT_MESH: [usize; 2] = [24, 24];

/// Chern numbers of the bands of a periodic model specification.
pub fn model_chern(spec: &ModelSpec, mesh: [usize; 2]) -> Result<Vec<i64>> {
    let cell = spec
        .supercell()
        .ok_or_else(|| Error::NotPeriodic("model has no translation symmetry".into()))?;
    if cell.len() != 2 {
        return Err(Error::Geometry("Chern numbers need two axes".into()));
    }
    let h = spec.clean_hamiltonian(0.0)?;
    let bloch = BlochHamiltonian::from_operator(&h, [cell[0], cell[1]])?;
    fhs_chern(&bloch, mesh)
}

/// Chern number of the lowest `occupied` bands of a periodic model.
pub fn model_chern_occupied(spec: &ModelSpec, mesh: [usize; 2], occupied: usize) -> Result<i64> {
    let cell = spec
        .supercell()
        .ok_or_else(|| Error::NotPeriodic("model has no translation symmetry".into()))?;
    if cell.len() != 2 {
        return Err(Error::Geometry("Chern numbers need two axes".into()));
    }
    let h = spec.clean_hamiltonian(0.0)?;
    let bloch = BlochHamiltonian::from_operator(&h, [cell[0], cell[1]])?;
    if occupied == 0 {
        return Ok(0);
    }
    fhs_chern_set(&bloch, mesh, 0..occupied)
}

/// One row of an invariance probe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub eps: f64,
    pub seed: u64,
    /// `None` when the perturbation closed the gap and was rejected.
    pub hall: Option<f64>,
    pub total_current: Option<Vec<f64>>,
    pub rejection: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub baseline_hall: f64,
    pub baseline_current: Vec<f64>,
    pub rows: Vec<ProbeRow>,
    pub max_hall_deviation: f64,
    pub max_current_deviation: f64,
    pub rejections: usize,
}

/// Perturb `H − μ` with `trials` seeded random perturbations for every
/// strength and record the Hall invariant and total current of each.
pub fn invariance_probe(
    h: &LatticeOperator,
    eps_list: &[f64],
    trials: usize,
    seed: u64,
    quad: &FrequencyQuadrature,
) -> Result<ProbeReport> {
    let base = hall_invariant(h, 0.0, quad, false)?;
    let base_j = total_current(h, 0.0, quad)?;
    let mut rows = Vec::new();
    let (mut dh, mut dj) = (0.0f64, 0.0f64);
    for &eps in eps_list {
        for t in 0..trials {
            let s = seed.wrapping_add(t as u64);
            match random_gapped_perturbation(h, eps, s) {
                Ok(hp) => {
                    let n = hall_invariant(&hp, 0.0, quad, false)?;
                    let j = total_current(&hp, 0.0, quad)?;
                    dh = dh.max((n.invariant - base.invariant).abs());
                    for (a, b) in j.iter().zip(&base_j) {
                        dj = dj.max((a - b).abs());
                    }
                    rows.push(ProbeRow {
                        eps,
                        seed: s,
                        hall: Some(n.invariant),
                        total_current: Some(j),
                        rejection: None,
                    });
                }
                Err(e @ Error::GapClosed { .. }) => rows.push(ProbeRow {
                    eps,
                    seed: s,
                    hall: None,
                    total_current: None,
                    rejection: Some(e.to_string()),
                }),
                Err(e) => return Err(e),
            }
        }
    }
    let rejections = rows.iter().filter(|r| r.rejection.is_some()).count();
    Ok(ProbeReport {
        baseline_hall: base.invariant,
        baseline_current: base_j,
        rows,
        max_hall_deviation: dh,
        max_current_deviation: dj,
        rejections,
    })
}

/// Write `x_index, x, y?, j_x, j_y?` rows of a local-current field.
pub fn write_current_csv<W: std::io::Write>(g: &LatticeGeometry, j: &[Vec<f64>], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let d = g.dim();
    let mut header = vec!["x_index".to_string()];
    header.extend((0..d).map(|a| format!("x{a}")));
    header.extend((0..d).map(|a| format!("j{a}")));
    w.write_record(&header)?;
    for r in 0..g.num_extended() {
        let mut row = vec![r.to_string()];
        row.extend(g.extended_position(r).iter().map(|v| v.to_string()));
        row.extend((0..d).map(|k| j[k][r].to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
