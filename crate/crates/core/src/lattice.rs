//! Regular 1D/2D lattices, particle fields and boundary handling.
//!
//! Sites are indexed zero-based; in 2D the flat index is `ix + nx * iy`
//! (axis 0 varies fastest). Particle numbers are non-negative reals so that
//! Avogadro-scale populations fit without overflow.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One axis of a regular lattice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lower: f64,
    pub upper: f64,
    pub dx: f64,
    pub sites: usize,
}

impl Axis {
    pub fn new(lower: f64, upper: f64, dx: f64) -> Result<Self> {
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(Error::Config(format!("lattice spacing must be positive, got {dx}")));
        }
        if !(upper > lower) {
            return Err(Error::Config(format!("empty interval [{lower}, {upper}]")));
        }
        let cells = (upper - lower) / dx;
        let rounded = cells.round();
        if (cells - rounded).abs() > 1e-12 * rounded.max(1.0) {
            return Err(Error::Config(format!(
                "interval length {} is not a whole multiple of dx = {dx}",
                upper - lower
            )));
        }
        Ok(Self {
            lower,
            upper,
            dx,
            sites: rounded as usize + 1,
        })
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        self.lower + i as f64 * self.dx
    }

    /// Nearest site to `x`, or `None` when `x` falls outside the axis.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let f = ((x - self.lower) / self.dx).round();
        if f < 0.0 || f > (self.sites - 1) as f64 {
            None
        } else {
            Some(f as usize)
        }
    }
}

/// Geometry of a 1D or 2D regular lattice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    axes: Vec<Axis>,
}

impl LatticeSpec {
    pub fn line(lower: f64, upper: f64, dx: f64) -> Result<Self> {
        Ok(Self {
            axes: vec![Axis::new(lower, upper, dx)?],
        })
    }

    pub fn rect(lower: [f64; 2], upper: [f64; 2], dx: [f64; 2]) -> Result<Self> {
        Ok(Self {
            axes: vec![
                Axis::new(lower[0], upper[0], dx[0])?,
                Axis::new(lower[1], upper[1], dx[1])?,
            ],
        })
    }

    pub fn from_bounds(lower: &[f64], upper: &[f64], dx: &[f64]) -> Result<Self> {
        match (lower.len(), upper.len(), dx.len()) {
            (1, 1, 1) => Self::line(lower[0], upper[0], dx[0]),
            (2, 2, 2) => Self::rect([lower[0], lower[1]], [upper[0], upper[1]], [dx[0], dx[1]]),
            _ => Err(Error::Config(
                "lattice bounds must all have length 1 or all length 2".into(),
            )),
        }
    }

    #[inline]
    pub fn dims(&self) -> usize {
        self.axes.len()
    }

    #[inline]
    pub fn axis(&self, a: usize) -> &Axis {
        &self.axes[a]
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    /// Site counts per axis; the second entry is 1 for a line.
    #[inline]
    pub fn shape(&self) -> [usize; 2] {
        [
            self.axes[0].sites,
            self.axes.get(1).map_or(1, |a| a.sites),
        ]
    }

    #[inline]
    pub fn len(&self) -> usize {
        let [nx, ny] = self.shape();
        nx * ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn flat(&self, idx: [usize; 2]) -> usize {
        idx[0] + self.axes[0].sites * idx[1]
    }

    #[inline]
    pub fn unflat(&self, s: usize) -> [usize; 2] {
        let nx = self.axes[0].sites;
        [s % nx, s / nx]
    }

    /// Physical coordinates of a site (second entry 0 for a line).
    pub fn position(&self, s: usize) -> [f64; 2] {
        let [ix, iy] = self.unflat(s);
        [
            self.axes[0].coord(ix),
            self.axes.get(1).map_or(0.0, |a| a.coord(iy)),
        ]
    }

    /// Nearest site to a point, if inside the lattice.
    pub fn site_at(&self, x: &[f64]) -> Option<usize> {
        let ix = self.axes[0].index_of(x[0])?;
        let iy = match self.axes.get(1) {
            Some(a) => a.index_of(*x.get(1)?)?,
            None => 0,
        };
        Some(self.flat([ix, iy]))
    }

    /// Sites whose coordinates fall in the closed box `[lo, hi]`.
    pub fn sites_in_box(&self, lo: &[f64], hi: &[f64]) -> Vec<usize> {
        let eps = 1e-9;
        (0..self.len())
            .filter(|&s| {
                let p = self.position(s);
                (0..self.dims()).all(|a| {
                    let tol = eps * self.axes[a].dx;
                    p[a] >= lo[a] - tol && p[a] <= hi[a] + tol
                })
            })
            .collect()
    }
}

/// Per-site, per-species particle numbers.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleField {
    pub lattice: LatticeSpec,
    /// `counts[species][site]`
    pub counts: Vec<Vec<f64>>,
    /// Initial total per species (the normalization constant).
    pub total_initial: Vec<f64>,
}

impl ParticleField {
    pub fn zeros(lattice: LatticeSpec, species: usize) -> Self {
        let n = lattice.len();
        Self {
            lattice,
            counts: vec![vec![0.0; n]; species],
            total_initial: vec![0.0; species],
        }
    }

    #[inline]
    pub fn species(&self) -> usize {
        self.counts.len()
    }

    /// Spread `total` particles of one species evenly over `support`.
    pub fn fill_uniform(&mut self, species: usize, total: f64, support: &[usize]) -> Result<()> {
        if support.is_empty() {
            return Err(Error::Config("uniform initial condition needs a non-empty support".into()));
        }
        if !(total > 0.0) {
            return Err(Error::Config(format!("particle total must be positive, got {total}")));
        }
        let n = self.lattice.len();
        if let Some(&bad) = support.iter().find(|&&s| s >= n) {
            return Err(Error::Config(format!("support site {bad} outside lattice of {n} sites")));
        }
        let per_site = total / support.len() as f64;
        for &s in support {
            self.counts[species][s] = per_site;
        }
        self.total_initial[species] = total;
        Ok(())
    }
}

/// Uniform initial condition for every species over a common support.
pub fn init_uniform(
    lattice: LatticeSpec,
    total_per_species: &[f64],
    support_sites: &[usize],
) -> Result<ParticleField> {
    let mut field = ParticleField::zeros(lattice, total_per_species.len());
    for (k, &total) in total_per_species.iter().enumerate() {
        field.fill_uniform(k, total, support_sites)?;
    }
    Ok(field)
}

pub fn total_mass(field: &ParticleField, species: usize) -> f64 {
    field.counts[species].iter().sum()
}

/// Condition imposed on one side of the lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SideRule {
    /// Zero-gradient mirror: the edge site copies its inner neighbour.
    NoFlux,
    /// The `width` outermost sites are restored to their stored profile.
    DirichletReset { width: usize },
    /// Nothing is imposed; particles may not leave through this side.
    Free,
}

impl SideRule {
    /// Whether transport sees a zero-gradient exterior on this side.
    #[inline]
    pub fn extrapolates(self) -> bool {
        !matches!(self, SideRule::Free)
    }
}

/// Side rules per axis (`[lower side, upper side]`) plus interior reset regions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundarySpec {
    pub sides: Vec<[SideRule; 2]>,
    /// Additional site sets restored to their stored profile after each step.
    #[serde(default)]
    pub reset_regions: Vec<Vec<usize>>,
}

impl BoundarySpec {
    pub fn uniform(dims: usize, rule: SideRule) -> Self {
        Self {
            sides: vec![[rule; 2]; dims],
            reset_regions: Vec::new(),
        }
    }

    pub fn validate(&self, lattice: &LatticeSpec) -> Result<()> {
        if self.sides.len() != lattice.dims() {
            return Err(Error::Config(format!(
                "boundary spec has {} axes, lattice has {}",
                self.sides.len(),
                lattice.dims()
            )));
        }
        for (a, pair) in self.sides.iter().enumerate() {
            let n = lattice.axis(a).sites;
            for rule in pair {
                match *rule {
                    SideRule::NoFlux if n < 2 => {
                        return Err(Error::Config(format!("axis {a} too short for a mirror side")))
                    }
                    SideRule::DirichletReset { width } if width == 0 || width > n => {
                        return Err(Error::Config(format!(
                            "reset width {width} invalid on axis {a} with {n} sites"
                        )))
                    }
                    _ => {}
                }
            }
        }
        let len = lattice.len();
        for region in &self.reset_regions {
            if region.iter().any(|&s| s >= len) {
                return Err(Error::Config("reset region outside the lattice".into()));
            }
        }
        Ok(())
    }

    /// All sites restored by reset rules, in ascending order without repeats.
    pub fn reset_sites(&self, lattice: &LatticeSpec) -> Vec<usize> {
        let [nx, ny] = lattice.shape();
        let mut sites = Vec::new();
        for (a, pair) in self.sides.iter().enumerate() {
            for (side, rule) in pair.iter().enumerate() {
                if let SideRule::DirichletReset { width } = *rule {
                    let n_along = if a == 0 { nx } else { ny };
                    let range: Vec<usize> = if side == 0 {
                        (0..width).collect()
                    } else {
                        (n_along - width..n_along).collect()
                    };
                    for i in range {
                        if a == 0 {
                            sites.extend((0..ny).map(|iy| lattice.flat([i, iy])));
                        } else {
                            sites.extend((0..nx).map(|ix| lattice.flat([ix, i])));
                        }
                    }
                }
            }
        }
        for region in &self.reset_regions {
            sites.extend_from_slice(region);
        }
        sites.sort_unstable();
        sites.dedup();
        sites
    }
}

/// A boundary spec bound to the profile its reset sites are restored to.
#[derive(Clone, Debug)]
pub struct Boundaries {
    pub spec: BoundarySpec,
    reset_sites: Vec<usize>,
    /// `stored[species][j]` is the value restored at `reset_sites[j]`.
    stored: Vec<Vec<f64>>,
}

impl Boundaries {
    /// Record the current field values at the reset sites.
    pub fn capture(spec: BoundarySpec, field: &ParticleField) -> Result<Self> {
        spec.validate(&field.lattice)?;
        let reset_sites = spec.reset_sites(&field.lattice);
        let stored = field
            .counts
            .iter()
            .map(|c| reset_sites.iter().map(|&s| c[s]).collect())
            .collect();
        Ok(Self {
            spec,
            reset_sites,
            stored,
        })
    }

    /// Boundaries with an explicitly given reset profile (`values[species][j]`).
    pub fn with_profile(spec: BoundarySpec, lattice: &LatticeSpec, values: Vec<Vec<f64>>) -> Result<Self> {
        spec.validate(lattice)?;
        let reset_sites = spec.reset_sites(lattice);
        if values.iter().any(|v| v.len() != reset_sites.len()) {
            return Err(Error::Config("reset profile length does not match reset sites".into()));
        }
        Ok(Self {
            spec,
            reset_sites,
            stored: values,
        })
    }

    pub fn reset_sites(&self) -> &[usize] {
        &self.reset_sites
    }

    pub fn stored(&self, species: usize) -> &[f64] {
        &self.stored[species]
    }

    #[inline]
    pub fn side(&self, axis: usize, side: usize) -> SideRule {
        self.spec.sides[axis][side]
    }
}

/// Mirror the no-flux sides of one species' array in place.
///
/// In 2D the horizontal sides (axis 1) are mirrored first and the vertical
/// sides (axis 0) last, so corners follow the vertical rule.
pub fn mirror_sides(values: &mut [f64], lattice: &LatticeSpec, spec: &BoundarySpec) {
    let [nx, ny] = lattice.shape();
    if lattice.dims() == 2 {
        for (side, rule) in spec.sides[1].iter().enumerate() {
            if *rule == SideRule::NoFlux {
                let (dst, src) = if side == 0 { (0, 1) } else { (ny - 1, ny - 2) };
                for ix in 0..nx {
                    values[lattice.flat([ix, dst])] = values[lattice.flat([ix, src])];
                }
            }
        }
    }
    for (side, rule) in spec.sides[0].iter().enumerate() {
        if *rule == SideRule::NoFlux {
            let (dst, src) = if side == 0 { (0, 1) } else { (nx - 1, nx - 2) };
            for iy in 0..ny {
                values[lattice.flat([dst, iy])] = values[lattice.flat([src, iy])];
            }
        }
    }
}

/// Overwrite boundary sites: mirror rules first, then reset sites.
pub fn apply_boundaries(field: &mut ParticleField, bc: &Boundaries) {
    apply_boundaries_weighted(field, bc, None);
}

/// Like [`apply_boundaries`], with restored values scaled site-wise by
/// `weights` (water content in variably saturated runs).
pub fn apply_boundaries_weighted(field: &mut ParticleField, bc: &Boundaries, weights: Option<&[f64]>) {
    let lattice = field.lattice.clone();
    for (k, values) in field.counts.iter_mut().enumerate() {
        mirror_sides(values, &lattice, &bc.spec);
        for (j, &s) in bc.reset_sites.iter().enumerate() {
            let w = weights.map_or(1.0, |w| w[s]);
            values[s] = bc.stored[k][j] * w;
        }
    }
}
