//! Finite periodic lattice geometry.
//!
//! Along each axis the physical sites sit at `x = 2ℓs` (`s = 0..N`), the extended
//! sites at `x = ℓr` (`r = 0..2N`), and the momentum grid covers the half-open
//! zone `(-π/2ℓ, π/2ℓ]` with spacing `π/(ℓN)`. Momenta are stored as integers
//! `k ∈ (-N/2, N/2]` with value `p = kπ/(ℓN)`; every comparison between
//! momenta is an integer comparison.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Geometry block shared by operators and symbols.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeGeometry {
    sites: Vec<usize>,
    half_spacing: Vec<f64>,
    internal_dim: usize,
}

impl LatticeGeometry {
    pub fn new(sites: &[usize], half_spacing: &[f64], internal_dim: usize) -> Result<Self> {
        if sites.is_empty() || sites.len() > 2 {
            return Err(Error::Geometry(format!(
                "{} axes requested, only 1 or 2 are supported",
                sites.len()
            )));
        }
        if half_spacing.len() != sites.len() {
            return Err(Error::Geometry(format!(
                "{} half spacings for {} axes",
                half_spacing.len(),
                sites.len()
            )));
        }
        for (j, &n) in sites.iter().enumerate() {
            if n < 4 || n % 2 != 0 {
                return Err(Error::Geometry(format!(
                    "axis {j} has {n} sites; an even count of at least 4 is required"
                )));
            }
        }
        for (j, &l) in half_spacing.iter().enumerate() {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::Geometry(format!("axis {j} has half spacing {l}")));
            }
        }
        if internal_dim == 0 {
            return Err(Error::Geometry("internal dimension must be positive".into()));
        }
        Ok(Self {
            sites: sites.to_vec(),
            half_spacing: half_spacing.to_vec(),
            internal_dim,
        })
    }

    /// Convenience constructor for a chain with `ℓ = 1`.
    pub fn chain(n: usize, internal_dim: usize) -> Result<Self> {
        Self::new(&[n], &[1.0], internal_dim)
    }

    /// Convenience constructor for a square lattice with unit lattice constant (`ℓ = 1/2`).
    pub fn square(nx: usize, ny: usize, internal_dim: usize) -> Result<Self> {
        Self::new(&[nx, ny], &[0.5, 0.5], internal_dim)
    }

    pub fn dim(&self) -> usize {
        self.sites.len()
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn half_spacings(&self) -> &[f64] {
        &self.half_spacing
    }

    pub fn n(&self, axis: usize) -> usize {
        self.sites[axis]
    }

    pub fn ell(&self, axis: usize) -> f64 {
        self.half_spacing[axis]
    }

    pub fn internal_dim(&self) -> usize {
        self.internal_dim
    }

    /// Period `L = 2ℓN` along an axis.
    pub fn period(&self, axis: usize) -> f64 {
        2.0 * self.half_spacing[axis] * self.sites[axis] as f64
    }

    /// Number of physical sites `|𝒪|`.
    pub fn num_sites(&self) -> usize {
        self.sites.iter().product()
    }

    /// Number of extended sites `|𝔒| = 2^dim |𝒪|`.
    pub fn num_extended(&self) -> usize {
        self.sites.iter().map(|n| 2 * n).product()
    }

    /// Number of points of the momentum grid.
    pub fn num_momenta(&self) -> usize {
        self.num_sites()
    }

    /// Number of points of the extended momentum grid.
    pub fn num_extended_momenta(&self) -> usize {
        self.num_extended()
    }

    /// Number of Fourier modes in the mode form (equal to the grid size).
    pub fn num_modes(&self) -> usize {
        self.num_sites()
    }

    /// Matrix dimension of an operator: sites times orbitals.
    pub fn operator_dim(&self) -> usize {
        self.num_sites() * self.internal_dim
    }

    pub fn extended_dims(&self) -> Vec<usize> {
        self.sites.iter().map(|n| 2 * n).collect()
    }

    pub fn site_index(&self, coords: &[usize]) -> usize {
        flatten(coords, &self.sites)
    }

    pub fn site_coords(&self, index: usize) -> Vec<usize> {
        unflatten(index, &self.sites)
    }

    pub fn extended_index(&self, coords: &[usize]) -> usize {
        flatten(coords, &self.extended_dims())
    }

    pub fn extended_coords(&self, index: usize) -> Vec<usize> {
        unflatten(index, &self.extended_dims())
    }

    /// Whether an extended site belongs to the physical lattice 𝒪.
    pub fn is_physical(&self, ext_index: usize) -> bool {
        self.extended_coords(ext_index).iter().all(|r| r % 2 == 0)
    }

    /// Physical coordinates `2ℓs` of a site.
    pub fn site_position(&self, index: usize) -> Vec<f64> {
        self.site_coords(index)
            .iter()
            .enumerate()
            .map(|(j, &s)| 2.0 * self.half_spacing[j] * s as f64)
            .collect()
    }

    /// Coordinates `ℓr` of an extended site.
    pub fn extended_position(&self, index: usize) -> Vec<f64> {
        self.extended_coords(index)
            .iter()
            .enumerate()
            .map(|(j, &r)| self.half_spacing[j] * r as f64)
            .collect()
    }

    /// Integer label `k ∈ (-N/2, N/2]` of grid point `m` on an axis.
    pub fn momentum_label(&self, axis: usize, m: usize) -> i64 {
        m as i64 + 1 - (self.sites[axis] / 2) as i64
    }

    /// Value `-π/2ℓ + (m+1)π/(ℓN)` of grid point `m` on an axis.
    pub fn momentum_value(&self, axis: usize, m: usize) -> f64 {
        let n = self.sites[axis] as f64;
        let l = self.half_spacing[axis];
        -PI / (2.0 * l) + (m as f64 + 1.0) * PI / (l * n)
    }

    /// Grid index `m` for an integer label, reduced into the zone.
    pub fn momentum_slot(&self, axis: usize, label: i64) -> usize {
        let n = self.sites[axis] as i64;
        (label - 1 + n / 2).rem_euclid(n) as usize
    }

    pub fn momentum_index(&self, coords: &[usize]) -> usize {
        flatten(coords, &self.sites)
    }

    pub fn momentum_coords(&self, index: usize) -> Vec<usize> {
        unflatten(index, &self.sites)
    }

    pub fn momentum(&self, index: usize) -> Vec<f64> {
        self.momentum_coords(index)
            .iter()
            .enumerate()
            .map(|(j, &m)| self.momentum_value(j, m))
            .collect()
    }

    /// Grid spacing `π/(ℓN) = 2π/L` along an axis.
    pub fn momentum_spacing(&self, axis: usize) -> f64 {
        PI / (self.half_spacing[axis] * self.sites[axis] as f64)
    }

    /// Integer label of extended-grid point `m ∈ 0..2N`, in `(-N, N]`, with
    /// value `label·π/(ℓN)` spanning `(-π/ℓ, π/ℓ]`.
    pub fn extended_momentum_label(&self, axis: usize, m: usize) -> i64 {
        m as i64 + 1 - self.sites[axis] as i64
    }

    pub fn extended_momentum_value(&self, axis: usize, m: usize) -> f64 {
        self.extended_momentum_label(axis, m) as f64 * self.momentum_spacing(axis)
    }

    /// Mode number `n ∈ [-N/2, N/2)` stored in mode slot `i`.
    pub fn mode_number(&self, axis: usize, slot: usize) -> i64 {
        slot as i64 - (self.sites[axis] / 2) as i64
    }

    /// Slot of a mode number after reduction into the centered window.
    pub fn mode_slot(&self, axis: usize, n: i64) -> usize {
        let nn = self.sites[axis] as i64;
        (wrap_centered(n, nn) + nn / 2) as usize
    }

    pub fn mode_index(&self, coords: &[usize]) -> usize {
        flatten(coords, &self.sites)
    }

    pub fn mode_coords(&self, index: usize) -> Vec<usize> {
        unflatten(index, &self.sites)
    }

    /// Mode numbers of a flat mode index.
    pub fn mode_numbers(&self, index: usize) -> Vec<i64> {
        self.mode_coords(index)
            .iter()
            .enumerate()
            .map(|(j, &i)| self.mode_number(j, i))
            .collect()
    }

    /// Doubling factor `f(q) = Π_j (1 + e^{-2i q_j ℓ_j})`.
    pub fn doubling_factor(&self, q: &[f64]) -> Complex64 {
        q.iter()
            .zip(&self.half_spacing)
            .map(|(&qj, &l)| Complex64::new(1.0, 0.0) + Complex64::from_polar(1.0, -2.0 * qj * l))
            .product()
    }

    /// Phase `e^{2ipnℓ}` on one axis for grid label `k` and mode `n`; exact in
    /// the integers `kn mod N`.
    pub fn mode_phase(&self, axis: usize, k: i64, n: i64) -> Complex64 {
        let nn = self.sites[axis] as i64;
        let e = (k * n).rem_euclid(nn);
        Complex64::from_polar(1.0, 2.0 * PI * e as f64 / nn as f64)
    }

    pub fn check_same(&self, other: &LatticeGeometry) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::Shape("operands live on different geometries".into()))
        }
    }
}

/// Reduce `n` into the centered window `[-N/2, N/2)`.
pub fn wrap_centered(n: i64, period: i64) -> i64 {
    (n + period / 2).rem_euclid(period) - period / 2
}

pub(crate) fn flatten(coords: &[usize], dims: &[usize]) -> usize {
    coords
        .iter()
        .zip(dims)
        .fold(0, |acc, (&c, &d)| acc * d + c)
}

pub(crate) fn unflatten(mut index: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for j in (0..dims.len()).rev() {
        out[j] = index % dims[j];
        index /= dims[j];
    }
    out
}
