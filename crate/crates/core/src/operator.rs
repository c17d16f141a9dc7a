//! Coordinate-space operators and their momentum kernels.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_centered, LatticeGeometry};
use crate::linalg;

pub type CMatrix = DMatrix<Complex64>;

/// Dense kernel `⟨x|Q̂|y⟩` over (site, orbital) pairs; the flat index of site
/// `s` and orbital `a` is `s·S + a`.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeOperator {
    geometry: LatticeGeometry,
    matrix: CMatrix,
}

impl LatticeOperator {
    pub fn new(geometry: LatticeGeometry, matrix: CMatrix) -> Result<Self> {
        let d = geometry.operator_dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::Shape(format!(
                "kernel is {}x{}, geometry requires {d}x{d}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { geometry, matrix })
    }

    pub fn zeros(geometry: &LatticeGeometry) -> Self {
        let d = geometry.operator_dim();
        Self {
            geometry: geometry.clone(),
            matrix: CMatrix::zeros(d, d),
        }
    }

    pub fn identity(geometry: &LatticeGeometry) -> Self {
        let d = geometry.operator_dim();
        Self {
            geometry: geometry.clone(),
            matrix: CMatrix::identity(d, d),
        }
    }

    /// Translation by `steps` physical sites: `⟨s|T|s+steps⟩ = 1`, whose symbol
    /// is `e^{2i p·steps ℓ}`.
    pub fn translation(geometry: &LatticeGeometry, steps: &[i64]) -> Result<Self> {
        if steps.len() != geometry.dim() {
            return Err(Error::Shape("translation vector has wrong length".into()));
        }
        let mut op = Self::zeros(geometry);
        let s_dim = geometry.internal_dim();
        for s in 0..geometry.num_sites() {
            let t = geometry.site_index(&shift_site(geometry, &geometry.site_coords(s), steps));
            for a in 0..s_dim {
                op.matrix[(s * s_dim + a, t * s_dim + a)] = Complex64::new(1.0, 0.0);
            }
        }
        Ok(op)
    }

    /// Diagonal operator `x ↦ f(x)` over physical positions, orbital-blind.
    pub fn position_function(geometry: &LatticeGeometry, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let mut op = Self::zeros(geometry);
        let s_dim = geometry.internal_dim();
        for s in 0..geometry.num_sites() {
            let v = f(&geometry.site_position(s));
            for a in 0..s_dim {
                op.matrix[(s * s_dim + a, s * s_dim + a)] = v;
            }
        }
        op
    }

    /// Seeded random operator with entries uniform in the unit square. With
    /// `range = Some(r)` only pairs whose centered displacement satisfies
    /// `|n_j| ≤ r` on every axis are populated.
    pub fn random(geometry: &LatticeGeometry, seed: u64, range: Option<i64>) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut op = Self::zeros(geometry);
        let s_dim = geometry.internal_dim();
        let d = geometry.operator_dim();
        for i in 0..d {
            for j in 0..d {
                let v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                let keep = match range {
                    None => true,
                    Some(r) => displacement(geometry, i / s_dim, j / s_dim)
                        .iter()
                        .all(|n| n.abs() <= r),
                };
                if keep {
                    op.matrix[(i, j)] = v;
                }
            }
        }
        op
    }

    /// Seeded random Hermitian operator.
    pub fn random_hermitian(geometry: &LatticeGeometry, seed: u64, range: Option<i64>) -> Self {
        let a = Self::random(geometry, seed, range);
        let m = (&a.matrix + a.matrix.adjoint()) * Complex64::new(0.5, 0.0);
        Self {
            geometry: a.geometry,
            matrix: m,
        }
    }

    pub fn geometry(&self) -> &LatticeGeometry {
        &self.geometry
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn matrix_mut(&mut self) -> &mut CMatrix {
        &mut self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn entry(&self, s: usize, a: usize, t: usize, b: usize) -> Complex64 {
        let sd = self.geometry.internal_dim();
        self.matrix[(s * sd + a, t * sd + b)]
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            geometry: self.geometry.clone(),
            matrix: self.matrix.adjoint(),
        }
    }

    /// Transpose in the momentum-kernel sense, `Q^T(p,q) = Q(q,p)`; in
    /// coordinates `⟨s|Q^T|t⟩ = ⟨-t|Q|-s⟩` (orbitals transposed as well).
    pub fn kernel_transpose(&self) -> Self {
        let g = &self.geometry;
        let sd = g.internal_dim();
        let mut out = Self::zeros(g);
        let neg = |s: usize| -> usize {
            let c: Vec<usize> = g
                .site_coords(s)
                .iter()
                .enumerate()
                .map(|(j, &x)| (g.n(j) - x) % g.n(j))
                .collect();
            g.site_index(&c)
        };
        for s in 0..g.num_sites() {
            for t in 0..g.num_sites() {
                for a in 0..sd {
                    for b in 0..sd {
                        out.matrix[(s * sd + a, t * sd + b)] = self.entry(neg(t), b, neg(s), a);
                    }
                }
            }
        }
        out
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            geometry: self.geometry.clone(),
            matrix: &self.matrix * c,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.geometry.check_same(&other.geometry)?;
        Ok(Self {
            geometry: self.geometry.clone(),
            matrix: &self.matrix + &other.matrix,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.geometry.check_same(&other.geometry)?;
        Ok(Self {
            geometry: self.geometry.clone(),
            matrix: &self.matrix - &other.matrix,
        })
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.geometry.check_same(&other.geometry)?;
        Ok(Self {
            geometry: self.geometry.clone(),
            matrix: &self.matrix * &other.matrix,
        })
    }

    pub fn inverse(&self) -> Result<Self> {
        Ok(Self {
            geometry: self.geometry.clone(),
            matrix: linalg::inverse(&self.matrix)?,
        })
    }

    pub fn hermiticity_defect(&self) -> f64 {
        linalg::max_abs(&(&self.matrix - self.matrix.adjoint()))
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol * (1.0 + linalg::max_abs(&self.matrix))
    }

    /// Eigenvalues in ascending order; the operator must be Hermitian.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        if !self.is_hermitian(1e-12) {
            return Err(Error::NotHermitian(self.hermiticity_defect()));
        }
        Ok(linalg::eigvalsh(&self.matrix))
    }

    /// Spatial momentum derivative generator: entries multiplied by
    /// `2i n_j ℓ_j` where `n` is the centered displacement of the pair. It is
    /// the operator whose W-symbol is `∂_{p_j}` of the W-symbol.
    pub fn momentum_derivative(&self, axis: usize) -> Self {
        let g = &self.geometry;
        let sd = g.internal_dim();
        let mut out = self.clone();
        let l = g.ell(axis);
        for s in 0..g.num_sites() {
            for t in 0..g.num_sites() {
                let n = displacement(g, s, t)[axis];
                let f = Complex64::new(0.0, 2.0 * n as f64 * l);
                for a in 0..sd {
                    for b in 0..sd {
                        out.matrix[(s * sd + a, t * sd + b)] *= f;
                    }
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&OperatorRecord::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: OperatorRecord = serde_json::from_str(text)?;
        rec.try_into()
    }
}

/// Centered displacement `t - s ∈ [-N/2, N/2)` on every axis.
pub fn displacement(g: &LatticeGeometry, s: usize, t: usize) -> Vec<i64> {
    let cs = g.site_coords(s);
    let ct = g.site_coords(t);
    (0..g.dim())
        .map(|j| wrap_centered(ct[j] as i64 - cs[j] as i64, g.n(j) as i64))
        .collect()
}

pub(crate) fn shift_site(g: &LatticeGeometry, coords: &[usize], steps: &[i64]) -> Vec<usize> {
    coords
        .iter()
        .zip(steps)
        .enumerate()
        .map(|(j, (&c, &d))| (c as i64 + d).rem_euclid(g.n(j) as i64) as usize)
        .collect()
}

/// JSON layout of an operator: geometry block plus the dense kernel as
/// `[re, im]` pairs, row-major over (site, orbital).
#[derive(Serialize, Deserialize)]
pub struct OperatorRecord {
    pub geometry: LatticeGeometry,
    pub dim: usize,
    pub kernel: Vec<[f64; 2]>,
}

impl From<&LatticeOperator> for OperatorRecord {
    fn from(op: &LatticeOperator) -> Self {
        let d = op.geometry.operator_dim();
        let mut kernel = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                let v = op.matrix[(i, j)];
                kernel.push([v.re, v.im]);
            }
        }
        Self {
            geometry: op.geometry.clone(),
            dim: d,
            kernel,
        }
    }
}

impl TryFrom<OperatorRecord> for LatticeOperator {
    type Error = Error;

    fn try_from(rec: OperatorRecord) -> Result<Self> {
        let g = LatticeGeometry::new(
            rec.geometry.sites(),
            rec.geometry.half_spacings(),
            rec.geometry.internal_dim(),
        )?;
        let d = g.operator_dim();
        if rec.dim != d || rec.kernel.len() != d * d {
            return Err(Error::Shape(format!(
                "kernel has {} entries, expected {}",
                rec.kernel.len(),
                d * d
            )));
        }
        let m = CMatrix::from_fn(d, d, |i, j| {
            let [re, im] = rec.kernel[i * d + j];
            Complex64::new(re, im)
        });
        LatticeOperator::new(g, m)
    }
}

/// Momentum-space kernel over grid × grid × orbital², stored as a dense
/// matrix indexed by (momentum, orbital) pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentumKernel {
    geometry: LatticeGeometry,
    values: CMatrix,
}

impl MomentumKernel {
    pub fn geometry(&self) -> &LatticeGeometry {
        &self.geometry
    }

    /// `Q(p, q)` for grid indices `p`, `q` and orbitals `a`, `b`.
    pub fn value(&self, p: usize, a: usize, q: usize, b: usize) -> Complex64 {
        let sd = self.geometry.internal_dim();
        self.values[(p * sd + a, q * sd + b)]
    }

    pub fn values(&self) -> &CMatrix {
        &self.values
    }

    /// Kernel of the product operator: `Σ_R Q_A(p, R) Q_B(R, q)`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.geometry.check_same(&other.geometry)?;
        Ok(Self {
            geometry: self.geometry.clone(),
            values: &self.values * &other.values,
        })
    }
}

/// Fourier matrix `F[p, s] = e^{-i x_s p} / √|𝒪|` over (momentum, orbital) × (site, orbital).
fn fourier_matrix(g: &LatticeGeometry) -> CMatrix {
    let ns = g.num_sites();
    let sd = g.internal_dim();
    let norm = 1.0 / (ns as f64).sqrt();
    let mut f = CMatrix::zeros(ns * sd, ns * sd);
    for pi in 0..ns {
        let pc = g.momentum_coords(pi);
        for si in 0..ns {
            let sc = g.site_coords(si);
            let mut phase = 0.0;
            for j in 0..g.dim() {
                let n = g.n(j) as i64;
                let k = g.momentum_label(j, pc[j]);
                phase -= 2.0 * PI * (k * sc[j] as i64).rem_euclid(n) as f64 / n as f64;
            }
            let v = Complex64::from_polar(norm, phase);
            for a in 0..sd {
                f[(pi * sd + a, si * sd + a)] = v;
            }
        }
    }
    f
}

/// `Q(p,q) = (1/|𝒪|) Σ_{x₁,x₂} ⟨x₁|Q̂|x₂⟩ e^{i(x₂q − x₁p)}`. With this
/// normalization the identity maps to the grid Kronecker delta and kernels
/// compose by plain grid summation.
pub fn momentum_kernel(op: &LatticeOperator) -> MomentumKernel {
    let f = fourier_matrix(op.geometry());
    MomentumKernel {
        geometry: op.geometry().clone(),
        values: &f * op.matrix() * f.adjoint(),
    }
}

/// Exact inverse of [`momentum_kernel`].
pub fn kernel_to_operator(k: &MomentumKernel) -> LatticeOperator {
    let f = fourier_matrix(&k.geometry);
    LatticeOperator {
        geometry: k.geometry.clone(),
        matrix: f.adjoint() * &k.values * &f,
    }
}

/// `min_j |ε_j − μ|` over the spectrum of a Hermitian operator.
pub fn spectral_gap(h: &LatticeOperator, mu: f64) -> Result<f64> {
    let ev = h.eigenvalues()?;
    Ok(ev.iter().map(|e| (e - mu).abs()).fold(f64::INFINITY, f64::min))
}
