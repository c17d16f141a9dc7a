//! Tight-binding models: Peierls-substituted square lattices, test chains and
//! seeded perturbations.
//!
//! Hopping from site `s` to site `t` along a link with phase `θ` enters as
//! `H[t, s] = −t e^{iθ}`. Link phases are stored per site for the outgoing
//! `+x` and `+y` links, and the flux through the plaquette with lower-left
//! corner `(x, y)` is its counter-clockwise phase circulation over `2π`.
//! Every builder returns `H − μ·1`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::LatticeGeometry;
use crate::operator::{spectral_gap, LatticeOperator};

/// Flux per plaquette in units of the flux quantum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluxField {
    nx: usize,
    ny: usize,
    values: Vec<f64>,
}

impl FluxField {
    pub fn from_fn(nx: usize, ny: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(nx * ny);
        for x in 0..nx {
            for y in 0..ny {
                values.push(f(x, y));
            }
        }
        Self { nx, ny, values }
    }

    pub fn uniform(nx: usize, ny: usize, phi: f64) -> Self {
        Self::from_fn(nx, ny, |_, _| phi)
    }

    /// `p/q + amplitude·cos(2πx/N_x)`, shifted uniformly so that the total
    /// flux is the nearest integer.
    pub fn modulated(nx: usize, ny: usize, p: i64, q: i64, amplitude: f64) -> Self {
        let base = p as f64 / q as f64;
        let mut f = Self::from_fn(nx, ny, |x, _| {
            base + amplitude * (2.0 * PI * x as f64 / nx as f64).cos()
        });
        let total = f.total();
        let shift = (total.round() - total) / (nx * ny) as f64;
        f.values.iter_mut().for_each(|v| *v += shift);
        f
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn value(&self, x: usize, y: usize) -> f64 {
        self.values[x * self.ny + y]
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Peierls phases on the `+x` and `+y` links leaving every site.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkPhases {
    nx: usize,
    ny: usize,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl LinkPhases {
    pub fn zero(nx: usize, ny: usize) -> Self {
        Self {
            nx,
            ny,
            x: vec![0.0; nx * ny],
            y: vec![0.0; nx * ny],
        }
    }

    /// Landau gauge: `θ_y(x, y) = 2π Σ_{x'<x} φ(x', y)`, with the flux of the
    /// seam column `x = N_x − 1` carried by its `+x` links,
    /// `θ_x(N_x − 1, y) = −2π Σ_{y'<y} Σ_{x'} φ(x', y')`.
    pub fn landau(flux: &FluxField) -> Result<Self> {
        let total = flux.total();
        if (total - total.round()).abs() > 1e-9 {
            return Err(Error::NonIntegerFlux(total));
        }
        let (nx, ny) = flux.dims();
        let mut a = Self::zero(nx, ny);
        for y in 0..ny {
            let mut acc = 0.0;
            for x in 0..nx {
                a.y[x * ny + y] = 2.0 * PI * acc;
                acc += flux.value(x, y);
            }
        }
        let mut rows = 0.0;
        for y in 0..ny {
            a.x[(nx - 1) * ny + y] = -2.0 * PI * rows;
            rows += (0..nx).map(|x| flux.value(x, y)).sum::<f64>();
        }
        Ok(a)
    }

    pub fn x_phase(&self, x: usize, y: usize) -> f64 {
        self.x[x * self.ny + y]
    }

    pub fn y_phase(&self, x: usize, y: usize) -> f64 {
        self.y[x * self.ny + y]
    }

    /// Plaquette fluxes, reduced to `(−½, ½]` around the reference field.
    pub fn curl_near(&self, reference: &FluxField) -> FluxField {
        let (nx, ny) = (self.nx, self.ny);
        FluxField::from_fn(nx, ny, |x, y| {
            let x1 = (x + 1) % nx;
            let y1 = (y + 1) % ny;
            let circ = self.x_phase(x, y) + self.y_phase(x1, y) - self.x_phase(x, y1) - self.y_phase(x, y);
            let phi = circ / (2.0 * PI);
            let r = reference.value(x, y);
            r + (phi - r) - (phi - r).round()
        })
    }
}

fn require_square(g: &LatticeGeometry, what: &str) -> Result<()> {
    if g.dim() != 2 {
        return Err(Error::Geometry(format!("{what} needs a two-dimensional lattice")));
    }
    Ok(())
}

fn site(g: &LatticeGeometry, x: usize, y: usize) -> usize {
    g.site_index(&[x % g.n(0), y % g.n(1)])
}

fn shifted_identity(h: &mut LatticeOperator, mu: f64) {
    let d = h.geometry().operator_dim();
    for i in 0..d {
        h.matrix_mut()[(i, i)] -= mu;
    }
}

/// Nearest-neighbour square-lattice Hamiltonian with the given link phases.
pub fn peierls_hamiltonian(g: &LatticeGeometry, t: f64, a: &LinkPhases, mu: f64) -> Result<LatticeOperator> {
    require_square(g, "a Peierls Hamiltonian")?;
    if g.internal_dim() != 1 || (a.nx, a.ny) != (g.n(0), g.n(1)) {
        return Err(Error::Shape("link phases do not match the lattice".into()));
    }
    let mut h = LatticeOperator::zeros(g);
    for x in 0..g.n(0) {
        for y in 0..g.n(1) {
            let s = site(g, x, y);
            for (tgt, th) in [(site(g, x + 1, y), a.x_phase(x, y)), (site(g, x, y + 1), a.y_phase(x, y))] {
                let v = Complex64::from_polar(-t, th);
                h.matrix_mut()[(tgt, s)] += v;
                h.matrix_mut()[(s, tgt)] += v.conj();
            }
        }
    }
    shifted_identity(&mut h, mu);
    Ok(h)
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Hofstadter model at flux `p/q` per plaquette in Landau gauge.
pub fn hofstadter(g: &LatticeGeometry, t: f64, p: i64, q: i64, mu: f64) -> Result<LatticeOperator> {
    require_square(g, "the Hofstadter model")?;
    if q <= 0 || gcd(p, q) != 1 || g.n(0) % q as usize != 0 {
        return Err(Error::IncommensurateFlux { p, q, nx: g.n(0) });
    }
    let flux = FluxField::uniform(g.n(0), g.n(1), p as f64 / q as f64);
    peierls_hamiltonian(g, t, &LinkPhases::landau(&flux)?, mu)
}

/// Square lattice with an arbitrary per-plaquette flux (integer total).
pub fn inhomogeneous_flux(g: &LatticeGeometry, t: f64, flux: &FluxField, mu: f64) -> Result<LatticeOperator> {
    require_square(g, "an inhomogeneous flux model")?;
    if flux.dims() != (g.n(0), g.n(1)) {
        return Err(Error::Shape("flux field does not match the lattice".into()));
    }
    peierls_hamiltonian(g, t, &LinkPhases::landau(flux)?, mu)
}

/// Chain with bonds alternating `t1` (from even sites) and `t2`.
pub fn dimerized_chain(g: &LatticeGeometry, t1: f64, t2: f64, mu: f64) -> Result<LatticeOperator> {
    if g.dim() != 1 || g.internal_dim() != 1 {
        return Err(Error::Geometry("the dimerized chain needs a single-orbital chain".into()));
    }
    let n = g.n(0);
    let mut h = LatticeOperator::zeros(g);
    for s in 0..n {
        let t = if s % 2 == 0 { t1 } else { t2 };
        let u = (s + 1) % n;
        h.matrix_mut()[(s, u)] -= t;
        h.matrix_mut()[(u, s)] -= t;
    }
    shifted_identity(&mut h, mu);
    Ok(h)
}

/// Dimerized chains along `x` coupled by `ty` along `y`; a time-reversal
/// symmetric band insulator at `μ = 0` when `|t1 − t2| > 2|ty|`.
pub fn stacked_dimers(g: &LatticeGeometry, t1: f64, t2: f64, ty: f64, mu: f64) -> Result<LatticeOperator> {
    require_square(g, "stacked dimers")?;
    if g.internal_dim() != 1 {
        return Err(Error::Geometry("stacked dimers use one orbital per site".into()));
    }
    let mut h = LatticeOperator::zeros(g);
    for x in 0..g.n(0) {
        for y in 0..g.n(1) {
            let s = site(g, x, y);
            let tx = if x % 2 == 0 { t1 } else { t2 };
            for (tgt, t) in [(site(g, x + 1, y), tx), (site(g, x, y + 1), ty)] {
                h.matrix_mut()[(tgt, s)] -= t;
                h.matrix_mut()[(s, tgt)] -= t;
            }
        }
    }
    shifted_identity(&mut h, mu);
    Ok(h)
}

/// Two-band Chern insulator with Bloch Hamiltonian
/// `sin k_x σ_x + sin k_y σ_y + (m + cos k_x + cos k_y) σ_z`.
pub fn qwz(g: &LatticeGeometry, m: f64, mu: f64) -> Result<LatticeOperator> {
    require_square(g, "the two-band Chern model")?;
    if g.internal_dim() != 2 {
        return Err(Error::Geometry("the two-band Chern model needs two orbitals".into()));
    }
    let c = |re: f64, im: f64| Complex64::new(re, im);
    // ⟨s|H|s+x̂⟩ = (σ_z − iσ_x)/2 and ⟨s|H|s+ŷ⟩ = (σ_z − iσ_y)/2
    let hop_x = [[c(0.5, 0.0), c(0.0, -0.5)], [c(0.0, -0.5), c(-0.5, 0.0)]];
    let hop_y = [[c(0.5, 0.0), c(-0.5, 0.0)], [c(0.5, 0.0), c(-0.5, 0.0)]];
    let mut h = LatticeOperator::zeros(g);
    for x in 0..g.n(0) {
        for y in 0..g.n(1) {
            let s = site(g, x, y);
            h.matrix_mut()[(2 * s, 2 * s)] += m;
            h.matrix_mut()[(2 * s + 1, 2 * s + 1)] -= m;
            for (tgt, blk) in [(site(g, x + 1, y), &hop_x), (site(g, x, y + 1), &hop_y)] {
                for a in 0..2 {
                    for b in 0..2 {
                        h.matrix_mut()[(2 * s + a, 2 * tgt + b)] += blk[a][b];
                        h.matrix_mut()[(2 * tgt + b, 2 * s + a)] += blk[a][b].conj();
                    }
                }
            }
        }
    }
    shifted_identity(&mut h, mu);
    Ok(h)
}

/// `U H U†` with `U = diag(e^{iχ(site)})`.
pub fn gauge_transform(h: &LatticeOperator, chi: impl Fn(usize) -> f64) -> LatticeOperator {
    let g = h.geometry();
    let sd = g.internal_dim();
    let phases: Vec<Complex64> = (0..g.operator_dim())
        .map(|i| Complex64::from_polar(1.0, chi(i / sd)))
        .collect();
    let mut out = h.clone();
    let d = g.operator_dim();
    for i in 0..d {
        for j in 0..d {
            out.matrix_mut()[(i, j)] *= phases[i] * phases[j].conj();
        }
    }
    out
}

fn occupied(ev: &[f64]) -> usize {
    ev.iter().filter(|&&e| e < 0.0).count()
}

/// Fraction of the unperturbed gap below which a perturbation is rejected.
pub const MIN_GAP_FRACTION: f64 = 0.1;

/// `h + eps·V` with `V` a seeded random Hermitian operator supported on the
/// hopping graph of `h` (plus every on-site block). Rejected when the number
/// of states below zero changes or the gap at zero falls below
/// [`MIN_GAP_FRACTION`] of its original value.
pub fn random_gapped_perturbation(h: &LatticeOperator, eps: f64, seed: u64) -> Result<LatticeOperator> {
    let g = h.geometry();
    let sd = g.internal_dim();
    let d = g.operator_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = h.clone();
    for i in 0..d {
        for j in i..d {
            let on_site = i / sd == j / sd;
            let v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            if !(on_site || h.matrix()[(i, j)].norm() > 0.0 || h.matrix()[(j, i)].norm() > 0.0) {
                continue;
            }
            if i == j {
                out.matrix_mut()[(i, i)] += eps * v.re;
            } else {
                out.matrix_mut()[(i, j)] += eps * v;
                out.matrix_mut()[(j, i)] += eps * v.conj();
            }
        }
    }
    let before = h.eigenvalues()?;
    let after = out.eigenvalues()?;
    let gap0 = spectral_gap(h, 0.0)?;
    let gap1 = after.iter().map(|e| e.abs()).fold(f64::INFINITY, f64::min);
    let (nb, na) = (occupied(&before), occupied(&after));
    if nb != na || gap1 < MIN_GAP_FRACTION * gap0 {
        return Err(Error::GapClosed {
            mu: 0.0,
            gap: gap1,
            before: nb,
            after: na,
        });
    }
    Ok(out)
}

/// Midpoint of the `index`-th gap (1-based) when the spectrum is split into
/// `bands` groups of equal size, together with the gap width.
pub fn gap_midpoint(h: &LatticeOperator, bands: usize, index: usize) -> Result<(f64, f64)> {
    let ev = h.eigenvalues()?;
    if bands == 0 || ev.len() % bands != 0 || index == 0 || index >= bands {
        return Err(Error::Unsupported(format!(
            "gap {index} of {bands} bands for {} states",
            ev.len()
        )));
    }
    let per = ev.len() / bands;
    let (lo, hi) = (ev[index * per - 1], ev[index * per]);
    Ok((0.5 * (lo + hi), hi - lo))
}

/// Separation between the highest state below zero and the lowest state at
/// or above zero (0 when one side is empty).
pub fn band_gap(h: &LatticeOperator) -> Result<f64> {
    let ev = h.eigenvalues()?;
    let k = occupied(&ev);
    if k == 0 || k == ev.len() {
        return Ok(0.0);
    }
    Ok(ev[k] - ev[k - 1])
}

fn default_t() -> f64 {
    1.0
}

/// Declarative model description as read from configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelKind {
    Hofstadter {
        #[serde(default = "default_t")]
        t: f64,
        p: i64,
        q: i64,
    },
    /// Hofstadter flux `p/q` modulated by `amplitude·cos(2πx/N_x)`.
    Inhomogeneous {
        #[serde(default = "default_t")]
        t: f64,
        p: i64,
        q: i64,
        amplitude: f64,
    },
    Dimer {
        t1: f64,
        t2: f64,
    },
    StackedDimers {
        t1: f64,
        t2: f64,
        ty: f64,
    },
    Qwz {
        m: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    pub eps: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    /// Sites per axis.
    pub sites: Vec<usize>,
    #[serde(default)]
    pub half_spacing: Option<Vec<f64>>,
    pub model: ModelKind,
    #[serde(default)]
    pub perturbation: Option<PerturbationSpec>,
}

impl ModelSpec {
    pub fn internal_dim(&self) -> usize {
        match self.model {
            ModelKind::Qwz { .. } => 2,
            _ => 1,
        }
    }

    pub fn geometry(&self) -> Result<LatticeGeometry> {
        let hs = self
            .half_spacing
            .clone()
            .unwrap_or_else(|| vec![if self.sites.len() == 1 { 1.0 } else { 0.5 }; self.sites.len()]);
        LatticeGeometry::new(&self.sites, &hs, self.internal_dim())
    }

    /// The unperturbed Hamiltonian `H − μ`.
    pub fn clean_hamiltonian(&self, mu: f64) -> Result<LatticeOperator> {
        let g = self.geometry()?;
        match self.model {
            ModelKind::Hofstadter { t, p, q } => hofstadter(&g, t, p, q, mu),
            ModelKind::Inhomogeneous { t, p, q, amplitude } => {
                if q <= 0 || g.dim() != 2 || g.n(0) % q as usize != 0 {
                    return Err(Error::IncommensurateFlux { p, q, nx: g.n(0) });
                }
                let flux = FluxField::modulated(g.n(0), g.n(1), p, q, amplitude);
                inhomogeneous_flux(&g, t, &flux, mu)
            }
            ModelKind::Dimer { t1, t2 } => dimerized_chain(&g, t1, t2, mu),
            ModelKind::StackedDimers { t1, t2, ty } => stacked_dimers(&g, t1, t2, ty, mu),
            ModelKind::Qwz { m } => qwz(&g, m, mu),
        }
    }

    /// `H − μ` including the configured perturbation. The perturbation gap
    /// check is made at the given `μ`.
    pub fn hamiltonian(&self, mu: f64) -> Result<LatticeOperator> {
        let h = self.clean_hamiltonian(mu)?;
        match &self.perturbation {
            None => Ok(h),
            Some(p) => random_gapped_perturbation(&h, p.eps, p.seed),
        }
    }

    /// Number of magnetic (or Bloch) bands of the clean model.
    pub fn bands(&self) -> usize {
        let s = self.internal_dim();
        match self.model {
            ModelKind::Hofstadter { q, .. } | ModelKind::Inhomogeneous { q, .. } => q as usize * s,
            ModelKind::Dimer { .. } | ModelKind::StackedDimers { .. } => 2 * s,
            ModelKind::Qwz { .. } => s,
        }
    }

    /// Magnetic unit cell in sites per axis, when the clean model is periodic.
    pub fn supercell(&self) -> Option<Vec<usize>> {
        match self.model {
            ModelKind::Hofstadter { q, .. } => Some(vec![q as usize, 1]),
            ModelKind::Inhomogeneous { .. } => None,
            ModelKind::Dimer { .. } => Some(vec![2]),
            ModelKind::StackedDimers { .. } => Some(vec![2, 1]),
            ModelKind::Qwz { .. } => Some(vec![1, 1]),
        }
    }
}
