//! Box domains and affine search subspaces `S = anchor + span(basis)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::dot;

/// Orthonormality tolerance for subspace bases.
const ORTHONORMAL_TOL: f64 = 1e-10;
const MAX_REDRAWS: usize = 100;
/// Distances at or below this are reported as exactly zero.
pub const ON_SUBSPACE_TOL: f64 = 1e-12;

/// Closed axis-aligned box `χ = [lower, upper]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_dim(lower.len(), upper.len())?;
        if lower.is_empty() {
            return Err(Error::InvalidInput("domain must have at least one dimension".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite()) {
            return Err(Error::InvalidInput("domain requires lower < upper in every dimension".into()));
        }
        Ok(Domain { lower, upper })
    }

    /// `[−0.5, 0.5]^dim`.
    pub fn unit_centered(dim: usize) -> Self {
        Domain {
            lower: vec![-0.5; dim],
            upper: vec![0.5; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Componentwise membership with slack `tol`.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol)
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (v, (l, u)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*l, *u);
        }
    }

    /// Length of the main diagonal.
    pub fn diameter(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| (u - l) * (u - l))
            .sum::<f64>()
            .sqrt()
    }

    /// Maximal `[lo, hi]` with `point + α·dir ∈ χ`; `point` must lie in `χ`.
    pub fn line_interval(&self, point: &[f64], dir: &[f64]) -> (f64, f64) {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for d in 0..self.dim() {
            let u = dir[d];
            if u == 0.0 {
                continue;
            }
            let a = (self.lower[d] - point[d]) / u;
            let b = (self.upper[d] - point[d]) / u;
            lo = lo.max(a.min(b));
            hi = hi.min(a.max(b));
        }
        (lo.min(0.0), hi.max(0.0))
    }
}

/// Affine subspace `anchor + span(basis)` with an orthonormal basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subspace {
    anchor: Vec<f64>,
    basis: Vec<Vec<f64>>,
    id: u64,
}

impl Subspace {
    /// Builds a subspace, checking that `basis` is orthonormal and `1 ≤ d < D`.
    pub fn new(anchor: Vec<f64>, basis: Vec<Vec<f64>>, id: u64) -> Result<Self> {
        let dim = anchor.len();
        if basis.is_empty() || basis.len() >= dim {
            return Err(Error::InvalidInput(format!(
                "subspace dimension {} must satisfy 1 <= d < {dim}",
                basis.len()
            )));
        }
        for b in &basis {
            check_dim(dim, b.len())?;
        }
        for i in 0..basis.len() {
            for j in 0..=i {
                let expect = if i == j { 1.0 } else { 0.0 };
                if (dot(&basis[i], &basis[j]) - expect).abs() > ORTHONORMAL_TOL {
                    return Err(Error::InvalidInput("subspace basis is not orthonormal".into()));
                }
            }
        }
        Ok(Subspace { anchor, basis, id })
    }

    /// Line through `anchor` along coordinate axis `axis`.
    pub fn coordinate_line(anchor: Vec<f64>, axis: usize, id: u64) -> Result<Self> {
        let dim = anchor.len();
        if axis >= dim {
            return Err(Error::InvalidInput(format!("axis {axis} out of range for dimension {dim}")));
        }
        let mut e = vec![0.0; dim];
        e[axis] = 1.0;
        Subspace::new(anchor, vec![e], id)
    }

    /// Plane through `anchor` spanned by coordinate axis `axis` and a random
    /// unit direction orthogonal to it.
    pub fn random_plane<R: Rng + ?Sized>(anchor: Vec<f64>, axis: usize, rng: &mut R, id: u64) -> Result<Self> {
        let dim = anchor.len();
        if dim < 3 {
            return Err(Error::InvalidInput(format!(
                "a random plane needs an ambient dimension of at least 3, got {dim}"
            )));
        }
        if axis >= dim {
            return Err(Error::InvalidInput(format!("axis {axis} out of range for dimension {dim}")));
        }
        let mut e = vec![0.0; dim];
        e[axis] = 1.0;
        for _ in 0..MAX_REDRAWS {
            let mut v: Vec<f64> = (0..dim).map(|_| standard_normal(rng)).collect();
            v[axis] = 0.0;
            let norm = dot(&v, &v).sqrt();
            if norm < 1e-8 {
                continue;
            }
            v.iter_mut().for_each(|c| *c /= norm);
            return Subspace::new(anchor, vec![e, v], id);
        }
        Err(Error::Degenerate("random plane direction degenerate after repeated draws".into()))
    }

    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    /// Subspace dimension `d_t`.
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.anchor.len()
    }

    /// Coordinates of the projection of `x` in the basis, relative to the anchor.
    pub fn local_coords(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.ambient_dim(), x.len())?;
        Ok(self.local_coords_unchecked(x))
    }

    fn local_coords_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let rel: Vec<f64> = x.iter().zip(&self.anchor).map(|(a, b)| a - b).collect();
        self.basis.iter().map(|u| dot(u, &rel)).collect()
    }

    /// `anchor + basis · local`.
    pub fn embed(&self, local: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), local.len())?;
        Ok(self.embed_unchecked(local))
    }

    pub(crate) fn embed_unchecked(&self, local: &[f64]) -> Vec<f64> {
        let mut x = self.anchor.clone();
        for (u, c) in self.basis.iter().zip(local) {
            if *c != 0.0 {
                for (xi, ui) in x.iter_mut().zip(u) {
                    *xi += c * ui;
                }
            }
        }
        x
    }

    /// Orthogonal projection onto the subspace: `(I − P_U)·anchor + P_U·x`.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.ambient_dim(), x.len())?;
        Ok(self.embed_unchecked(&self.local_coords_unchecked(x)))
    }

    /// Euclidean distance from `x` to the subspace.
    pub fn projection_distance(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.ambient_dim(), x.len())?;
        Ok(self.projection_distance_unchecked(x))
    }

    pub(crate) fn projection_distance_unchecked(&self, x: &[f64]) -> f64 {
        let mut residual: Vec<f64> = x.iter().zip(&self.anchor).map(|(a, b)| a - b).collect();
        for u in &self.basis {
            let c = dot(u, &residual);
            for (r, ui) in residual.iter_mut().zip(u) {
                *r -= c * ui;
            }
        }
        let d = dot(&residual, &residual).sqrt();
        // points on S up to round-off
        if d <= ON_SUBSPACE_TOL {
            0.0
        } else {
            d
        }
    }

    /// `[lo, hi]` such that `anchor + α·u ∈ χ` exactly when `α ∈ [lo, hi]`.
    pub fn feasible_line_interval(&self, domain: &Domain) -> Result<(f64, f64)> {
        if self.dim() != 1 {
            return Err(Error::Unsupported(format!(
                "feasible interval needs a line, subspace has dimension {}",
                self.dim()
            )));
        }
        check_dim(domain.dim(), self.ambient_dim())?;
        if !domain.contains(&self.anchor, 0.0) {
            return Err(Error::InvalidInput("subspace anchor lies outside the domain".into()));
        }
        Ok(domain.line_interval(&self.anchor, &self.basis[0]))
    }

    /// Whether `embed(local)` lies in the closed box.
    pub fn is_feasible(&self, domain: &Domain, local: &[f64]) -> bool {
        local.len() == self.dim() && domain.contains(&self.embed_unchecked(local), 0.0)
    }

    /// Per-basis-direction bounds on local coordinates that enclose `S ∩ χ`.
    ///
    /// Each range is the projection of the whole box onto that direction,
    /// so it is exact for coordinate directions and conservative otherwise.
    pub fn local_bounds(&self, domain: &Domain) -> Vec<(f64, f64)> {
        self.basis
            .iter()
            .map(|u| {
                let mut lo = 0.0;
                let mut hi = 0.0;
                for d in 0..u.len() {
                    let a = u[d] * (domain.lower()[d] - self.anchor[d]);
                    let b = u[d] * (domain.upper()[d] - self.anchor[d]);
                    lo += a.min(b);
                    hi += a.max(b);
                }
                (lo.min(0.0), hi.max(0.0))
            })
            .collect()
    }
}

fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // Box–Muller; 1 − U keeps the logarithm finite.
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
