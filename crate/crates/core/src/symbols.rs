//! Operator symbols on the extended lattice and their mode form.
//!
//! A symbol is a complex `S×S` matrix at every pair `(x, p)` with `x ∈ 𝔒` and
//! `p` on the momentum grid. Internally values are stored as `[p][x][a][b]`
//! so that the Fourier pair with the mode form `F(x,p) = Σ_n e^{2ipnℓ} f_n(x)`
//! acts on contiguous blocks.
//!
//! Placement rule on the ring: the kernel entry `⟨s|Q̂|t⟩` has centered
//! displacement `n = t − s ∈ [−N/2, N/2)` and midpoint index `r = 2s + n`
//! (mod `2N`) on 𝔒. The Buot symbol carries the entry in mode `n` at `r`, the
//! W symbol at both `r` and `r + 1` on every axis.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::LatticeGeometry;
use crate::operator::{displacement, momentum_kernel, CMatrix, LatticeOperator};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Flavor {
    /// Exact symbol of the doubled lattice.
    W,
    /// Buot symbol, supported on one sublattice per mode.
    B,
    /// Naive continuum-style symbol with the coarse momentum convolution.
    C,
    /// Symbol obtained from a series in powers of the position operator.
    Series,
}

impl std::str::FromStr for Flavor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "W" => Ok(Flavor::W),
            "B" => Ok(Flavor::B),
            "C" => Ok(Flavor::C),
            "SERIES" => Ok(Flavor::Series),
            _ => Err(Error::Unsupported(format!("unknown symbol flavor '{s}'"))),
        }
    }
}

/// Symbol values over 𝔒 × momentum grid × orbital².
#[derive(Clone, Debug, PartialEq)]
pub struct WeylSymbol {
    geometry: LatticeGeometry,
    flavor: Flavor,
    values: Vec<Complex64>,
}

/// Fourier modes `f_n(x)` of a symbol, `n` in the centered window.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeForm {
    geometry: LatticeGeometry,
    flavor: Flavor,
    coeffs: Vec<Complex64>,
}

fn block(g: &LatticeGeometry) -> usize {
    g.internal_dim() * g.internal_dim()
}

impl WeylSymbol {
    pub fn zeros(geometry: &LatticeGeometry, flavor: Flavor) -> Self {
        let len = geometry.num_momenta() * geometry.num_extended() * block(geometry);
        Self {
            geometry: geometry.clone(),
            flavor,
            values: vec![ZERO; len],
        }
    }

    /// Symbol equal to `c` times the orbital identity everywhere.
    pub fn constant(geometry: &LatticeGeometry, flavor: Flavor, c: Complex64) -> Self {
        Self::from_fn(geometry, flavor, |_, _, a, b| if a == b { c } else { ZERO })
    }

    /// Build from `f(x_index, p_index, a, b)`.
    pub fn from_fn(
        geometry: &LatticeGeometry,
        flavor: Flavor,
        f: impl Fn(usize, usize, usize, usize) -> Complex64,
    ) -> Self {
        let mut s = Self::zeros(geometry, flavor);
        let sd = geometry.internal_dim();
        for k in 0..geometry.num_momenta() {
            for r in 0..geometry.num_extended() {
                for a in 0..sd {
                    for b in 0..sd {
                        let i = s.offset(r, k) + a * sd + b;
                        s.values[i] = f(r, k, a, b);
                    }
                }
            }
        }
        s
    }

    pub fn geometry(&self) -> &LatticeGeometry {
        &self.geometry
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn with_flavor(mut self, flavor: Flavor) -> Self {
        self.flavor = flavor;
        self
    }

    fn offset(&self, r: usize, k: usize) -> usize {
        (k * self.geometry.num_extended() + r) * block(&self.geometry)
    }

    /// Value at extended site `r`, momentum index `k`, orbitals `(a, b)`.
    pub fn value(&self, r: usize, k: usize, a: usize, b: usize) -> Complex64 {
        self.values[self.offset(r, k) + a * self.geometry.internal_dim() + b]
    }

    /// The `S×S` block at `(r, k)`, row-major.
    pub fn block(&self, r: usize, k: usize) -> &[Complex64] {
        let o = self.offset(r, k);
        &self.values[o..o + block(&self.geometry)]
    }


    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Max-norm distance to another symbol on the same grid.
    pub fn max_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Max-norm distance restricted to extended sites accepted by `keep`.
    pub fn max_diff_where(&self, other: &Self, keep: impl Fn(usize) -> bool) -> f64 {
        let mut m: f64 = 0.0;
        for k in 0..self.geometry.num_momenta() {
            for r in (0..self.geometry.num_extended()).filter(|&r| keep(r)) {
                for (a, b) in self.block(r, k).iter().zip(other.block(r, k)) {
                    m = m.max((a - b).norm());
                }
            }
        }
        m
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            geometry: self.geometry.clone(),
            flavor: self.flavor,
            values: self.values.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        self.map(|z| z * c)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.geometry.check_same(&other.geometry)?;
        Ok(Self {
            geometry: self.geometry.clone(),
            flavor: self.flavor,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.geometry.check_same(&other.geometry)?;
        Ok(Self {
            geometry: self.geometry.clone(),
            flavor: self.flavor,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        })
    }

    /// Pointwise product (orbital matrices multiplied in order).
    pub fn pointwise(&self, other: &Self) -> Result<Self> {
        self.geometry.check_same(&other.geometry)?;
        let sd = self.geometry.internal_dim();
        let bl = block(&self.geometry);
        let mut out = Self::zeros(&self.geometry, self.flavor);
        for ((o, a), b) in out
            .values
            .chunks_mut(bl)
            .zip(self.values.chunks(bl))
            .zip(other.values.chunks(bl))
        {
            matmul_acc(o, a, b, sd);
        }
        Ok(out)
    }

    /// `S'(x) = S(x + offset·ℓ)`, offsets in units of ℓ per axis.
    pub fn shift_x(&self, offset: &[i64]) -> Self {
        let g = &self.geometry;
        let dims = g.extended_dims();
        let map: Vec<usize> = (0..g.num_extended())
            .map(|r| {
                let c: Vec<usize> = g
                    .extended_coords(r)
                    .iter()
                    .enumerate()
                    .map(|(j, &x)| (x as i64 + offset[j]).rem_euclid(dims[j] as i64) as usize)
                    .collect();
                g.extended_index(&c)
            })
            .collect();
        self.remap_x(&map)
    }

    /// `S'(x) = S(−x)`.
    pub fn reflect_x(&self) -> Self {
        let g = &self.geometry;
        let dims = g.extended_dims();
        let map: Vec<usize> = (0..g.num_extended())
            .map(|r| {
                let c: Vec<usize> = g
                    .extended_coords(r)
                    .iter()
                    .enumerate()
                    .map(|(j, &x)| (dims[j] - x) % dims[j])
                    .collect();
                g.extended_index(&c)
            })
            .collect();
        self.remap_x(&map)
    }

    fn remap_x(&self, map: &[usize]) -> Self {
        let bl = block(&self.geometry);
        let mut out = Self::zeros(&self.geometry, self.flavor);
        for k in 0..self.geometry.num_momenta() {
            for (r, &src) in map.iter().enumerate() {
                let o = out.offset(r, k);
                let i = self.offset(src, k);
                out.values[o..o + bl].copy_from_slice(&self.values[i..i + bl]);
            }
        }
        out
    }

    pub fn to_mode_form(&self) -> ModeForm {
        let g = &self.geometry;
        let inner = g.num_extended() * block(g);
        let mut data = self.values.clone();
        for axis in 0..g.dim() {
            axis_transform(&mut data, g.sites(), inner, axis, &analysis_matrix(g, axis));
        }
        ModeForm {
            geometry: g.clone(),
            flavor: self.flavor,
            coeffs: data,
        }
    }

    /// Write rows `x_index,p_index,orb_a,orb_b,x..,p..,re,im`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let g = &self.geometry;
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["x_index".to_string(), "p_index".into(), "orb_a".into(), "orb_b".into()];
        for j in 0..g.dim() {
            header.push(format!("x{j}"));
        }
        for j in 0..g.dim() {
            header.push(format!("p{j}"));
        }
        header.push("re".into());
        header.push("im".into());
        w.write_record(&header)?;
        let sd = g.internal_dim();
        for r in 0..g.num_extended() {
            let x = g.extended_position(r);
            for k in 0..g.num_momenta() {
                let p = g.momentum(k);
                for a in 0..sd {
                    for b in 0..sd {
                        let v = self.value(r, k, a, b);
                        let mut rec = vec![r.to_string(), k.to_string(), a.to_string(), b.to_string()];
                        rec.extend(x.iter().map(|v| format!("{v:.12}")));
                        rec.extend(p.iter().map(|v| format!("{v:.12}")));
                        rec.push(format!("{:.15e}", v.re));
                        rec.push(format!("{:.15e}", v.im));
                        w.write_record(&rec)?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

impl ModeForm {
    pub fn zeros(geometry: &LatticeGeometry, flavor: Flavor) -> Self {
        let len = geometry.num_modes() * geometry.num_extended() * block(geometry);
        Self {
            geometry: geometry.clone(),
            flavor,
            coeffs: vec![ZERO; len],
        }
    }

    /// `c` times the orbital identity, carried by the zero mode alone.
    pub fn constant(geometry: &LatticeGeometry, flavor: Flavor, c: Complex64) -> Self {
        let mut m = Self::zeros(geometry, flavor);
        let zero: Vec<usize> = (0..geometry.dim()).map(|j| geometry.mode_slot(j, 0)).collect();
        let z = geometry.mode_index(&zero);
        for r in 0..geometry.num_extended() {
            for a in 0..geometry.internal_dim() {
                *m.coeff_mut(z, r, a, a) = c;
            }
        }
        m
    }

    pub fn geometry(&self) -> &LatticeGeometry {
        &self.geometry
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn with_flavor(mut self, flavor: Flavor) -> Self {
        self.flavor = flavor;
        self
    }

    pub(crate) fn offset(&self, mode: usize, r: usize) -> usize {
        (mode * self.geometry.num_extended() + r) * block(&self.geometry)
    }

    /// Coefficient `f_n(x)` for flat mode index, extended site, orbitals.
    pub fn coeff(&self, mode: usize, r: usize, a: usize, b: usize) -> Complex64 {
        self.coeffs[self.offset(mode, r) + a * self.geometry.internal_dim() + b]
    }

    pub fn coeff_mut(&mut self, mode: usize, r: usize, a: usize, b: usize) -> &mut Complex64 {
        let o = self.offset(mode, r) + a * self.geometry.internal_dim() + b;
        &mut self.coeffs[o]
    }

    /// All coefficients of one mode, laid out `[x][a][b]`.
    pub fn mode_slice(&self, mode: usize) -> &[Complex64] {
        let len = self.geometry.num_extended() * block(&self.geometry);
        &self.coeffs[mode * len..(mode + 1) * len]
    }

    pub(crate) fn raw_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub(crate) fn from_raw(geometry: &LatticeGeometry, flavor: Flavor, coeffs: Vec<Complex64>) -> Self {
        Self {
            geometry: geometry.clone(),
            flavor,
            coeffs,
        }
    }

    /// Flat mode indices carrying weight above round-off, i.e. above
    /// `1e-15` of the largest coefficient.
    pub fn active_modes(&self) -> Vec<usize> {
        let cut = 1e-15 * self.coeffs.iter().map(|z| z.norm()).fold(0.0, f64::max);
        (0..self.geometry.num_modes())
            .filter(|&m| self.mode_slice(m).iter().any(|z| z.norm() > cut))
            .collect()
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            geometry: self.geometry.clone(),
            flavor: self.flavor,
            coeffs: self.coeffs.iter().map(|z| z * c).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.geometry.check_same(&other.geometry)?;
        Ok(Self {
            geometry: self.geometry.clone(),
            flavor: self.flavor,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn to_symbol(&self) -> WeylSymbol {
        let g = &self.geometry;
        let inner = g.num_extended() * block(g);
        let mut data = self.coeffs.clone();
        for axis in 0..g.dim() {
            axis_transform(&mut data, g.sites(), inner, axis, &synthesis_matrix(g, axis));
        }
        WeylSymbol {
            geometry: g.clone(),
            flavor: self.flavor,
            values: data,
        }
    }
}

pub fn to_mode_form(sym: &WeylSymbol) -> ModeForm {
    sym.to_mode_form()
}

pub fn from_mode_form(m: &ModeForm) -> WeylSymbol {
    m.to_symbol()
}

/// `out += a·b` for row-major `S×S` blocks.
#[inline]
pub(crate) fn matmul_acc(out: &mut [Complex64], a: &[Complex64], b: &[Complex64], sd: usize) {
    if sd == 1 {
        out[0] += a[0] * b[0];
        return;
    }
    for i in 0..sd {
        for k in 0..sd {
            let aik = a[i * sd + k];
            if aik == ZERO {
                continue;
            }
            for j in 0..sd {
                out[i * sd + j] += aik * b[k * sd + j];
            }
        }
    }
}

/// `M[m][i] = e^{2πi k_m n_i / N}`: modes to grid values.
fn synthesis_matrix(g: &LatticeGeometry, axis: usize) -> Vec<Complex64> {
    let n = g.n(axis);
    let mut m = vec![ZERO; n * n];
    for row in 0..n {
        let k = g.momentum_label(axis, row);
        for col in 0..n {
            m[row * n + col] = g.mode_phase(axis, k, g.mode_number(axis, col));
        }
    }
    m
}

/// Inverse of [`synthesis_matrix`].
fn analysis_matrix(g: &LatticeGeometry, axis: usize) -> Vec<Complex64> {
    let n = g.n(axis);
    let s = synthesis_matrix(g, axis);
    let mut m = vec![ZERO; n * n];
    for row in 0..n {
        for col in 0..n {
            m[row * n + col] = s[col * n + row].conj() / n as f64;
        }
    }
    m
}

/// Apply `mat` (row-major `N×N`) along `axis` of data laid out as
/// `[i_0]..[i_{D-1}][inner]`.
fn axis_transform(data: &mut [Complex64], dims: &[usize], inner: usize, axis: usize, mat: &[Complex64]) {
    let len = dims[axis];
    let outer: usize = dims[..axis].iter().product();
    let trailing: usize = dims[axis + 1..].iter().product::<usize>() * inner;
    let mut buf = vec![ZERO; len * trailing];
    for o in 0..outer {
        let chunk = &mut data[o * len * trailing..(o + 1) * len * trailing];
        buf.iter_mut().for_each(|z| *z = ZERO);
        for k in 0..len {
            let dst = &mut buf[k * trailing..(k + 1) * trailing];
            for n in 0..len {
                let c = mat[k * len + n];
                let src = &chunk[n * trailing..(n + 1) * trailing];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += c * s;
                }
            }
        }
        chunk.copy_from_slice(&buf);
    }
}

/// Mode form of the W (both sublattice placements) or B (one placement)
/// symbol by direct placement of kernel entries.
pub fn placed_mode_form(op: &LatticeOperator, flavor: Flavor) -> Result<ModeForm> {
    let g = op.geometry();
    let masks: Vec<usize> = match flavor {
        Flavor::W => (0..1usize << g.dim()).collect(),
        Flavor::B => vec![0],
        _ => {
            return Err(Error::Unsupported(format!(
                "placement is defined for W and B symbols, not {flavor:?}"
            )))
        }
    };
    let sd = g.internal_dim();
    let mut mf = ModeForm::zeros(g, flavor);
    for s in 0..g.num_sites() {
        let sc = g.site_coords(s);
        for t in 0..g.num_sites() {
            let n = displacement(g, s, t);
            let mode = g.mode_index(&(0..g.dim()).map(|j| g.mode_slot(j, n[j])).collect::<Vec<_>>());
            for &mask in &masks {
                let rc: Vec<usize> = (0..g.dim())
                    .map(|j| {
                        let bit = ((mask >> j) & 1) as i64;
                        (2 * sc[j] as i64 + n[j] + bit).rem_euclid(2 * g.n(j) as i64) as usize
                    })
                    .collect();
                let r = g.extended_index(&rc);
                for a in 0..sd {
                    for b in 0..sd {
                        *mf.coeff_mut(mode, r, a, b) = op.entry(s, a, t, b);
                    }
                }
            }
        }
    }
    Ok(mf)
}

/// W symbol `Q_W(x, p)` on 𝔒 × grid.
pub fn weyl_symbol(op: &LatticeOperator) -> WeylSymbol {
    placed_mode_form(op, Flavor::W).expect("W placement").to_symbol()
}

/// Buot symbol `Q_ℬ(x, p)` on 𝔒 × grid.
pub fn buot_symbol(op: &LatticeOperator) -> WeylSymbol {
    placed_mode_form(op, Flavor::B).expect("B placement").to_symbol()
}

/// Momentum-integral evaluation of the W or B symbol,
/// `Σ_q (2^D|𝒪|)^{-1} e^{2iqx} Q(p+q, p−q) [f(q)]` with `q` running over the
/// zone on half steps `π/(2ℓN)`. The kernel at these off-grid arguments is
/// the trigonometric sum over centered displacements, so each pair of sites
/// contributes its unique midpoint on the ring.
pub fn integral_symbol(op: &LatticeOperator, flavor: Flavor) -> Result<WeylSymbol> {
    let doubled = match flavor {
        Flavor::W => true,
        Flavor::B => false,
        _ => return Err(Error::Unsupported(format!("integral form for {flavor:?}"))),
    };
    let g = op.geometry();
    let sd = g.internal_dim();
    let bl = sd * sd;
    let d = g.dim();
    let next = g.num_extended();
    let dims2 = g.extended_dims();
    // Half-step momenta q_j = π h/(2ℓN), h ∈ (−N, N]; stored by slot h+N−1.
    let half_label = |j: usize, slot: usize| slot as i64 + 1 - g.n(j) as i64;
    let mut coeffs = vec![ZERO; g.num_modes() * next * bl];
    for mode in 0..g.num_modes() {
        let n = g.mode_numbers(mode);
        // h_n(q) = Σ_s ⟨s|Q|s+n⟩ e^{−iq(x_s + x_{s+n})}
        let mut hq = vec![ZERO; next * bl];
        for s in 0..g.num_sites() {
            let sc = g.site_coords(s);
            let tc: Vec<usize> = (0..d)
                .map(|j| (sc[j] as i64 + n[j]).rem_euclid(g.n(j) as i64) as usize)
                .collect();
            let t = g.site_index(&tc);
            for qi in 0..next {
                let qc = unflatten_dims(qi, &dims2);
                let mut phase = 0.0;
                for j in 0..d {
                    let h = half_label(j, qc[j]) as f64;
                    let nn = g.n(j) as f64;
                    // q(x1+x2) = (πh/(2ℓN))·2ℓ(2s+n)
                    phase -= PI * h * (2.0 * sc[j] as f64 + n[j] as f64) / nn;
                }
                let ph = Complex64::from_polar(1.0, phase);
                for a in 0..sd {
                    for b in 0..sd {
                        hq[qi * bl + a * sd + b] += ph * op.entry(s, a, t, b);
                    }
                }
            }
        }
        let norm = 1.0 / next as f64;
        for r in 0..next {
            let rc = g.extended_coords(r);
            let out = &mut coeffs[(mode * next + r) * bl..(mode * next + r + 1) * bl];
            for qi in 0..next {
                let qc = unflatten_dims(qi, &dims2);
                let mut phase = 0.0;
                let mut weight = Complex64::new(norm, 0.0);
                for j in 0..d {
                    let h = half_label(j, qc[j]) as f64;
                    let nn = g.n(j) as f64;
                    phase += PI * h * rc[j] as f64 / nn;
                    if doubled {
                        weight *= ONE + Complex64::from_polar(1.0, -PI * h / nn);
                    }
                }
                let w = weight * Complex64::from_polar(1.0, phase);
                for (o, v) in out.iter_mut().zip(&hq[qi * bl..(qi + 1) * bl]) {
                    *o += w * v;
                }
            }
        }
    }
    Ok(ModeForm::from_raw(g, flavor, coeffs).to_symbol())
}

fn unflatten_dims(index: usize, dims: &[usize]) -> Vec<usize> {
    crate::geometry::unflatten(index, dims)
}

/// Continuum-style symbol `B_𝒞(x,p) = Σ_q e^{ixq} ⟨p+q/2|B̂|p−q/2⟩` with `q`
/// restricted to even grid labels, evaluated at every `x ∈ 𝔒` (only the
/// physical sites 𝒪 carry its intended meaning).
pub fn continuum_symbol(op: &LatticeOperator) -> WeylSymbol {
    let g = op.geometry();
    let kern = momentum_kernel(op);
    let d = g.dim();
    let half: Vec<Vec<i64>> = (0..d)
        .map(|j| {
            let n = g.n(j) as i64;
            (-(n / 2)..=n / 2).filter(|k| 4 * k > -n && 4 * k <= n).collect()
        })
        .collect();
    let half_dims: Vec<usize> = half.iter().map(|v| v.len()).collect();
    let n_half: usize = half_dims.iter().product();
    WeylSymbol::from_fn(g, Flavor::C, |r, k, a, b| {
        let rc = g.extended_coords(r);
        let kc = g.momentum_coords(k);
        let mut acc = ZERO;
        for hi in 0..n_half {
            let hc = unflatten_dims(hi, &half_dims);
            let mut phase = 0.0;
            let mut plus = vec![0; d];
            let mut minus = vec![0; d];
            for j in 0..d {
                let kp = half[j][hc[j]];
                let nn = g.n(j) as i64;
                let kl = g.momentum_label(j, kc[j]);
                plus[j] = g.momentum_slot(j, kl + kp);
                minus[j] = g.momentum_slot(j, kl - kp);
                phase += 2.0 * PI * (kp * rc[j] as i64).rem_euclid(nn) as f64 / nn as f64;
            }
            let pi = g.momentum_index(&plus);
            let mi = g.momentum_index(&minus);
            acc += Complex64::from_polar(1.0, phase) * kern.value(pi, a, mi, b);
        }
        acc
    })
}

/// Reconstruct the operator from a W or B symbol.
///
/// Every kernel entry appears in `2^D` slots of a W symbol (one for B); the
/// entry is their average, and the spread between slots (plus any weight in
/// slots that no entry reaches, for B) is the reconstruction residual. The
/// spread is exactly the component along the null direction of
/// `1 + e^{−2i(P₁−P₂)ℓ}`.
pub fn inverse_weyl(sym: &WeylSymbol) -> Result<LatticeOperator> {
    let (op, residual) = reconstruct(sym)?;
    let scale = 1.0 + sym.max_abs();
    if residual > 1e-10 * scale {
        return Err(Error::Reconstruction(residual));
    }
    Ok(op)
}

/// Reconstruction together with its residual, without the tolerance check.
pub fn reconstruct(sym: &WeylSymbol) -> Result<(LatticeOperator, f64)> {
    let g = sym.geometry();
    let masks: Vec<usize> = match sym.flavor() {
        Flavor::W => (0..1usize << g.dim()).collect(),
        Flavor::B => vec![0],
        f => return Err(Error::Unsupported(format!("inverse transform of a {f:?} symbol"))),
    };
    let mf = sym.to_mode_form();
    let sd = g.internal_dim();
    let mut m = CMatrix::zeros(g.operator_dim(), g.operator_dim());
    let mut residual: f64 = 0.0;
    let mut hit = vec![false; g.num_modes() * g.num_extended()];
    for s in 0..g.num_sites() {
        let sc = g.site_coords(s);
        for t in 0..g.num_sites() {
            let n = displacement(g, s, t);
            let mode = g.mode_index(&(0..g.dim()).map(|j| g.mode_slot(j, n[j])).collect::<Vec<_>>());
            let slots: Vec<usize> = masks
                .iter()
                .map(|&mask| {
                    let rc: Vec<usize> = (0..g.dim())
                        .map(|j| {
                            let bit = ((mask >> j) & 1) as i64;
                            (2 * sc[j] as i64 + n[j] + bit).rem_euclid(2 * g.n(j) as i64) as usize
                        })
                        .collect();
                    g.extended_index(&rc)
                })
                .collect();
            for &r in &slots {
                hit[mode * g.num_extended() + r] = true;
            }
            for a in 0..sd {
                for b in 0..sd {
                    let vals: Vec<Complex64> = slots.iter().map(|&r| mf.coeff(mode, r, a, b)).collect();
                    let avg = vals.iter().sum::<Complex64>() / vals.len() as f64;
                    for v in &vals {
                        residual = residual.max((v - avg).norm());
                    }
                    m[(s * sd + a, t * sd + b)] = avg;
                }
            }
        }
    }
    for mode in 0..g.num_modes() {
        for r in 0..g.num_extended() {
            if !hit[mode * g.num_extended() + r] {
                for a in 0..sd {
                    for b in 0..sd {
                        residual = residual.max(mf.coeff(mode, r, a, b).norm());
                    }
                }
            }
        }
    }
    Ok((LatticeOperator::new(g.clone(), m)?, residual))
}
