//! Symbols of operators given as series in the position operator.
//!
//! The operator `Σ_n (i∂_p)^n Q_n(p)` acts on a chain as `Σ_n x̂^n Q_n(p̂)`
//! with `x̂` the multiplication by `x ∈ [0, L)`. Its series symbol is
//! `Σ_n x^n q_n(p)` with `q_n = Σ_{k≥n} C(k,n) (i∂_p/2)^{k−n} Q_k`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::LatticeGeometry;
use crate::operator::LatticeOperator;
use crate::symbols::{buot_symbol, Flavor, WeylSymbol};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Largest supported power of the position operator.
pub const MAX_ORDER: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct SymbolSeries {
    geometry: LatticeGeometry,
    /// `coeffs[n]` holds `Q_n(p)` laid out `[p][a][b]`.
    coeffs: Vec<Vec<Complex64>>,
}

impl SymbolSeries {
    pub fn new(geometry: &LatticeGeometry, coeffs: Vec<Vec<Complex64>>) -> Result<Self> {
        if geometry.dim() != 1 {
            return Err(Error::Unsupported("series symbols are implemented for chains".into()));
        }
        if coeffs.is_empty() || coeffs.len() > MAX_ORDER + 1 {
            return Err(Error::Unsupported(format!(
                "series of order {} (supported 0..={MAX_ORDER})",
                coeffs.len() as i64 - 1
            )));
        }
        let len = geometry.num_momenta() * geometry.internal_dim().pow(2);
        if coeffs.iter().any(|c| c.len() != len) {
            return Err(Error::Shape(format!("each coefficient needs {len} values")));
        }
        Ok(Self {
            geometry: geometry.clone(),
            coeffs,
        })
    }

    /// Build from `f(n, p_index, a, b) = Q_n(p)_{ab}`.
    pub fn from_fn(
        geometry: &LatticeGeometry,
        order: usize,
        f: impl Fn(usize, usize, usize, usize) -> Complex64,
    ) -> Result<Self> {
        let sd = geometry.internal_dim();
        let coeffs = (0..=order)
            .map(|n| {
                let mut v = Vec::with_capacity(geometry.num_momenta() * sd * sd);
                for k in 0..geometry.num_momenta() {
                    for a in 0..sd {
                        for b in 0..sd {
                            v.push(f(n, k, a, b));
                        }
                    }
                }
                v
            })
            .collect();
        Self::new(geometry, coeffs)
    }

    pub fn geometry(&self) -> &LatticeGeometry {
        &self.geometry
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Fourier modes of `Q_n`: `out[m][a][b]` with `m` the mode slot.
    fn modes(&self, n: usize) -> Vec<Complex64> {
        let g = &self.geometry;
        let sd = g.internal_dim();
        let bl = sd * sd;
        let nn = g.n(0);
        let mut out = vec![ZERO; nn * bl];
        for slot in 0..nn {
            let m = g.mode_number(0, slot);
            for k in 0..nn {
                let ph = g.mode_phase(0, g.momentum_label(0, k), m).conj() / nn as f64;
                for i in 0..bl {
                    out[slot * bl + i] += ph * self.coeffs[n][k * bl + i];
                }
            }
        }
        out
    }

    /// The operator `Σ_n x̂^n Q_n(p̂)` with `x ∈ [0, L)`.
    pub fn to_operator(&self) -> LatticeOperator {
        self.build_operator(0.0)
    }

    /// `Σ_n (x̂ + shift)^n Q_n(p̂)`.
    fn build_operator(&self, shift: f64) -> LatticeOperator {
        let g = &self.geometry;
        let sd = g.internal_dim();
        let bl = sd * sd;
        let nn = g.n(0);
        let mut op = LatticeOperator::zeros(g);
        for n in 0..=self.order() {
            let modes = self.modes(n);
            for s in 0..nn {
                let x = g.site_position(s)[0] + shift;
                let w = x.powi(n as i32);
                for slot in 0..nn {
                    let m = g.mode_number(0, slot);
                    let t = (s as i64 + m).rem_euclid(nn as i64) as usize;
                    for a in 0..sd {
                        for b in 0..sd {
                            op.matrix_mut()[(s * sd + a, t * sd + b)] += w * modes[slot * bl + a * sd + b];
                        }
                    }
                }
            }
        }
        op
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `Σ_n x^n q_n(p)` on 𝔒 × grid with spectral derivatives.
pub fn series_symbol(s: &SymbolSeries) -> WeylSymbol {
    let g = s.geometry();
    let sd = g.internal_dim();
    let bl = sd * sd;
    let nn = g.n(0);
    let l = g.ell(0);
    let order = s.order();
    let modes: Vec<Vec<Complex64>> = (0..=order).map(|n| s.modes(n)).collect();
    // q_n in mode space: (i/2 · 2imℓ)^{k−n} = (−mℓ)^{k−n}
    let mut q = vec![vec![ZERO; nn * bl]; order + 1];
    for n in 0..=order {
        for k in n..=order {
            let c = binomial(k, n);
            for slot in 0..nn {
                let m = g.mode_number(0, slot) as f64;
                let f = c * (-m * l).powi((k - n) as i32);
                for i in 0..bl {
                    q[n][slot * bl + i] += f * modes[k][slot * bl + i];
                }
            }
        }
    }
    // back to grid values
    let mut qp = vec![vec![ZERO; nn * bl]; order + 1];
    for n in 0..=order {
        for k in 0..nn {
            let kl = g.momentum_label(0, k);
            for slot in 0..nn {
                let ph = g.mode_phase(0, kl, g.mode_number(0, slot));
                for i in 0..bl {
                    qp[n][k * bl + i] += ph * q[n][slot * bl + i];
                }
            }
        }
    }
    WeylSymbol::from_fn(g, Flavor::Series, |r, k, a, b| {
        let x = g.extended_position(r)[0];
        (0..=order)
            .map(|n| x.powi(n as i32) * qp[n][k * bl + a * sd + b])
            .sum()
    })
}

/// Integral representation of the series symbol on a chain:
/// `Q_ℬ(x, p) + Q̃_ℬ(x − ℓ, p)` where `Q̃` is the operator rebuilt with
/// `x → x + ℓ` in the series.
pub fn series_integral_symbol(s: &SymbolSeries) -> WeylSymbol {
    let l = s.geometry().ell(0);
    let b0 = buot_symbol(&s.build_operator(0.0));
    let b1 = buot_symbol(&s.build_operator(l)).shift_x(&[-1]);
    b0.add(&b1).expect("same geometry").with_flavor(Flavor::Series)
}
