//! Uniform truncated grids on `R^d`, sampled functions and cube families.
//!
//! Samples live at cell centers `x_i = -L + (i + 1/2) h` with `h = 2L / N`,
//! so no sample sits on the origin when `N` is even. Flat indices are
//! row-major with axis 0 varying slowest.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Real, Result};

/// Largest total dimension supported by [`Cube`] and the grid helpers.
pub const MAX_DIM: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct UniformGrid<T> {
    dim: usize,
    half_width: T,
    points_per_axis: usize,
}

impl<T: Real> UniformGrid<T> {
    pub fn new(dim: usize, half_width: T, points_per_axis: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::invalid(format!(
                "grid dimension {dim} outside 1..={MAX_DIM}"
            )));
        }
        if points_per_axis == 0 {
            return Err(Error::invalid("grid needs at least one point per axis"));
        }
        if !(half_width.is_finite() && half_width > T::zero()) {
            return Err(Error::invalid(format!(
                "half width must be positive and finite, got {half_width}"
            )));
        }
        let grid = Self { dim, half_width, points_per_axis };
        if grid.spacing() * T::from_count(points_per_axis) != half_width + half_width {
            return Err(Error::invalid(format!(
                "spacing 2*{half_width}/{points_per_axis} does not tile the box exactly"
            )));
        }
        Ok(grid)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> T {
        self.half_width
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn spacing(&self) -> T {
        (self.half_width + self.half_width) / T::from_count(self.points_per_axis)
    }

    pub fn cell_volume(&self) -> T {
        self.spacing().powi(self.dim as i32)
    }

    /// Total number of cells, `N^d`.
    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Same box and resolution in another dimension.
    pub fn with_dim(&self, dim: usize) -> Result<Self> {
        Self::new(dim, self.half_width, self.points_per_axis)
    }

    /// Cell-center coordinate along one axis. Computed as `(2i + 1 - N) L / N`
    /// so that mirrored cells carry exactly negated coordinates.
    #[inline]
    pub fn coordinate(&self, i: usize) -> T {
        let odd = 2 * i as i64 + 1 - self.points_per_axis as i64;
        T::from_i64(odd).expect("index representable")
            * (self.half_width / T::from_count(self.points_per_axis))
    }

    pub fn axis_coordinates(&self) -> Vec<T> {
        (0..self.points_per_axis).map(|i| self.coordinate(i)).collect()
    }

    pub fn multi_index(&self, mut flat: usize) -> [usize; MAX_DIM] {
        let mut idx = [0; MAX_DIM];
        for k in (0..self.dim).rev() {
            idx[k] = flat % self.points_per_axis;
            flat /= self.points_per_axis;
        }
        idx
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi[..self.dim]
            .iter()
            .fold(0, |acc, &i| acc * self.points_per_axis + i)
    }

    /// Writes the center of cell `flat` into `out[..dim]`.
    pub fn center(&self, flat: usize, out: &mut [T]) {
        let idx = self.multi_index(flat);
        for k in 0..self.dim {
            out[k] = self.coordinate(idx[k]);
        }
    }

    pub fn center_norm(&self, flat: usize) -> T {
        let idx = self.multi_index(flat);
        idx[..self.dim]
            .iter()
            .map(|&i| {
                let c = self.coordinate(i);
                c * c
            })
            .sum::<T>()
            .sqrt()
    }

    pub(crate) fn ensure_same(&self, other: &Self, what: &str) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!(
                "{what}: dim {} L {} N {} vs dim {} L {} N {}",
                self.dim,
                self.half_width,
                self.points_per_axis,
                other.dim,
                other.half_width,
                other.points_per_axis
            )));
        }
        Ok(())
    }
}

impl<T: Real> fmt::Display for UniformGrid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "dim={} L={} N={}",
            self.dim, self.half_width, self.points_per_axis
        )
    }
}

/// Samples of a real function at the cell centers of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledFunction<T> {
    grid: UniformGrid<T>,
    samples: Vec<T>,
    label: String,
}

impl<T: Real> SampledFunction<T> {
    pub fn new(grid: UniformGrid<T>, samples: Vec<T>, label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        if samples.len() != grid.len() {
            return Err(Error::invalid(format!(
                "`{label}` has {} samples, grid has {} cells",
                samples.len(),
                grid.len()
            )));
        }
        if let Some(cell) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { cell, label });
        }
        Ok(Self { grid, samples, label })
    }

    /// Unchecked constructor for values produced by finite arithmetic on
    /// finite inputs.
    pub(crate) fn from_parts(grid: UniformGrid<T>, samples: Vec<T>, label: impl Into<String>) -> Self {
        debug_assert_eq!(samples.len(), grid.len());
        Self { grid, samples, label: label.into() }
    }

    /// Evaluates `f` at every cell center.
    pub fn sample(
        grid: &UniformGrid<T>,
        label: impl Into<String>,
        f: impl Fn(&[T]) -> T,
    ) -> Result<Self> {
        let label = label.into();
        let mut x = [T::zero(); MAX_DIM];
        let mut samples = Vec::with_capacity(grid.len());
        for cell in 0..grid.len() {
            grid.center(cell, &mut x);
            let v = f(&x[..grid.dim()]);
            if !v.is_finite() {
                return Err(Error::NonFinite { cell, label });
            }
            samples.push(v);
        }
        Ok(Self { grid: grid.clone(), samples, label })
    }

    pub fn constant(grid: &UniformGrid<T>, value: T, label: impl Into<String>) -> Result<Self> {
        Self::new(grid.clone(), vec![value; grid.len()], label)
    }

    pub fn zeros(grid: &UniformGrid<T>) -> Self {
        Self::from_parts(grid.clone(), vec![T::zero(); grid.len()], "0")
    }

    pub fn grid(&self) -> &UniformGrid<T> {
        &self.grid
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<T> {
        self.samples
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn map(&self, label: impl Into<String>, f: impl Fn(T) -> T) -> Result<Self> {
        Self::new(
            self.grid.clone(),
            self.samples.iter().map(|&v| f(v)).collect(),
            label,
        )
    }

    pub fn zip_with(
        &self,
        other: &Self,
        label: impl Into<String>,
        f: impl Fn(T, T) -> T,
    ) -> Result<Self> {
        self.grid.ensure_same(&other.grid, "pointwise combination")?;
        Self::new(
            self.grid.clone(),
            self.samples
                .iter()
                .zip(&other.samples)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            label,
        )
    }

    pub fn scaled(&self, c: T) -> Self {
        Self::from_parts(
            self.grid.clone(),
            self.samples.iter().map(|&v| c * v).collect(),
            format!("{}*{}", c, self.label),
        )
    }

    pub fn abs(&self) -> Self {
        Self::from_parts(
            self.grid.clone(),
            self.samples.iter().map(|v| v.abs()).collect(),
            format!("|{}|", self.label),
        )
    }

    pub fn max_abs(&self) -> T {
        self.samples
            .iter()
            .fold(T::zero(), |m, v| if v.abs() > m { v.abs() } else { m })
    }

    /// True when every sample is bitwise equal to the first.
    pub fn is_constant(&self) -> bool {
        self.samples.windows(2).all(|w| w[0] == w[1])
    }

    /// `g(x) = f(x + h)` with zero extension outside the box. Each component of
    /// `h` is rounded to the nearest lattice multiple; the largest rounding
    /// residual is recorded in the label.
    pub fn translate(&self, h: &[T]) -> Result<Self> {
        let d = self.grid.dim();
        if h.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: h.len() });
        }
        let width = self.grid.half_width() + self.grid.half_width();
        let spacing = self.grid.spacing();
        let mut shift = [0i64; MAX_DIM];
        let mut residual = T::zero();
        for k in 0..d {
            if !h[k].is_finite() || h[k].abs() > width {
                return Err(Error::invalid(format!(
                    "shift component {} exceeds box width {width}",
                    h[k]
                )));
            }
            let steps = (h[k] / spacing).round();
            shift[k] = steps.to_i64().expect("bounded shift");
            residual = residual.max((h[k] - steps * spacing).abs());
        }
        let shifted = self.shift_cells(&shift[..d]);
        let label = if residual > T::zero() {
            format!("{}(.+h) [h residual {:e}]", self.label, residual.to_f64_lossy())
        } else {
            format!("{}(.+h)", self.label)
        };
        Ok(shifted.with_label(label))
    }

    /// `g[i] = f[i + shift]` on the lattice, zero outside the box.
    pub fn shift_cells(&self, shift: &[i64]) -> Self {
        let n = self.grid.points_per_axis() as i64;
        let d = self.grid.dim();
        let mut out = vec![T::zero(); self.samples.len()];
        for (cell, slot) in out.iter_mut().enumerate() {
            let idx = self.grid.multi_index(cell);
            let mut src = 0i64;
            let mut inside = true;
            for k in 0..d {
                let j = idx[k] as i64 + shift[k];
                if j < 0 || j >= n {
                    inside = false;
                    break;
                }
                src = src * n + j;
            }
            if inside {
                *slot = self.samples[src as usize];
            }
        }
        Self::from_parts(self.grid.clone(), out, self.label.clone())
    }

    /// `χ_{B(0,R)^c} f`: zeroes every cell whose center has norm `<= r`.
    pub fn tail_restrict(&self, r: T) -> Self {
        let r2 = r * r;
        let mut x = [T::zero(); MAX_DIM];
        let d = self.grid.dim();
        let samples = self
            .samples
            .iter()
            .enumerate()
            .map(|(cell, &v)| {
                self.grid.center(cell, &mut x);
                let n2: T = x[..d].iter().map(|&c| c * c).sum();
                if n2 <= r2 {
                    T::zero()
                } else {
                    v
                }
            })
            .collect();
        Self::from_parts(self.grid.clone(), samples, format!("chi_(|x|>{r}) {}", self.label))
    }

    /// Writes the text table: two header lines, then one `index value` row
    /// per cell. Values use the shortest round-trip decimal representation.
    pub fn write_table<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "#grid dim={} half_width={} points_per_axis={}",
            self.grid.dim(),
            self.grid.half_width(),
            self.grid.points_per_axis()
        )?;
        writeln!(out, "#label {}", self.label.replace('\n', " "))?;
        for (i, v) in self.samples.iter().enumerate() {
            writeln!(out, "{i} {v}")?;
        }
        Ok(())
    }

    pub fn read_table<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("missing grid header".into()))??;
        let mut dim = None;
        let mut half_width = None;
        let mut points = None;
        for field in header
            .strip_prefix("#grid")
            .ok_or_else(|| Error::Parse(format!("bad header `{header}`")))?
            .split_whitespace()
        {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad header field `{field}`")))?;
            match key {
                "dim" => dim = value.parse::<usize>().ok(),
                "half_width" => half_width = value.parse::<T>().ok(),
                "points_per_axis" => points = value.parse::<usize>().ok(),
                _ => return Err(Error::Parse(format!("unknown header key `{key}`"))),
            }
        }
        let (Some(dim), Some(half_width), Some(points)) = (dim, half_width, points) else {
            return Err(Error::Parse(format!("incomplete header `{header}`")));
        };
        let grid = UniformGrid::new(dim, half_width, points)?;
        let label_line = lines
            .next()
            .ok_or_else(|| Error::Parse("missing label line".into()))??;
        let label = label_line
            .strip_prefix("#label ")
            .or_else(|| label_line.strip_prefix("#label"))
            .ok_or_else(|| Error::Parse(format!("bad label line `{label_line}`")))?
            .to_string();
        let mut samples = vec![T::zero(); grid.len()];
        let mut seen = vec![false; grid.len()];
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (i, v) = line
                .split_once(' ')
                .ok_or_else(|| Error::Parse(format!("bad row `{line}`")))?;
            let i: usize = i
                .parse()
                .map_err(|_| Error::Parse(format!("bad index in `{line}`")))?;
            let v: T = v
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad value in `{line}`")))?;
            if i >= samples.len() || seen[i] {
                return Err(Error::Parse(format!("index {i} out of range or repeated")));
            }
            samples[i] = v;
            seen[i] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::Parse(format!("missing row for cell {missing}")));
        }
        Self::new(grid, samples, label)
    }
}

/// Axis-parallel box of grid cells given by a corner and per-axis extents.
/// Built by [`Cube::new`] every extent is equal; products of cubes from
/// factor spaces keep their separate extents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Cube {
    dim: u8,
    corner: [u32; MAX_DIM],
    extent: [u32; MAX_DIM],
}

impl Cube {
    pub fn new(corner: &[usize], side: usize) -> Self {
        let extent = vec![side; corner.len()];
        Self::from_extents(corner, &extent)
    }

    pub fn from_extents(corner: &[usize], extent: &[usize]) -> Self {
        assert!(corner.len() == extent.len() && !corner.is_empty() && corner.len() <= MAX_DIM);
        let mut c = [0u32; MAX_DIM];
        let mut e = [0u32; MAX_DIM];
        for k in 0..corner.len() {
            assert!(extent[k] >= 1, "cube extent must be at least one cell");
            c[k] = corner[k] as u32;
            e[k] = extent[k] as u32;
        }
        Self { dim: corner.len() as u8, corner: c, extent: e }
    }

    /// Cartesian product `self × other` in the product space.
    pub fn product(&self, other: &Cube) -> Cube {
        let d = self.dim() + other.dim();
        assert!(d <= MAX_DIM);
        let mut c = [0u32; MAX_DIM];
        let mut e = [0u32; MAX_DIM];
        c[..self.dim()].copy_from_slice(self.corner());
        e[..self.dim()].copy_from_slice(self.extent());
        c[self.dim()..d].copy_from_slice(other.corner());
        e[self.dim()..d].copy_from_slice(other.extent());
        Cube { dim: d as u8, corner: c, extent: e }
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn corner(&self) -> &[u32] {
        &self.corner[..self.dim()]
    }

    pub fn extent(&self) -> &[u32] {
        &self.extent[..self.dim()]
    }

    /// Common side length when all extents agree.
    pub fn side(&self) -> Option<usize> {
        let e = self.extent();
        e.iter().all(|&x| x == e[0]).then_some(e[0] as usize)
    }

    pub fn cells(&self) -> usize {
        self.extent().iter().map(|&e| e as usize).product()
    }

    pub fn fits(&self, n: usize) -> bool {
        (0..self.dim()).all(|k| (self.corner[k] + self.extent[k]) as usize <= n)
    }

    pub fn contains(&self, multi: &[usize]) -> bool {
        (0..self.dim()).all(|k| {
            let i = multi[k] as u32;
            i >= self.corner[k] && i < self.corner[k] + self.extent[k]
        })
    }

    pub fn intersect(&self, other: &Cube) -> Option<Cube> {
        if self.dim != other.dim {
            return None;
        }
        let mut out = *self;
        for k in 0..self.dim() {
            let lo = self.corner[k].max(other.corner[k]);
            let hi = (self.corner[k] + self.extent[k]).min(other.corner[k] + other.extent[k]);
            if hi <= lo {
                return None;
            }
            out.corner[k] = lo;
            out.extent[k] = hi - lo;
        }
        Some(out)
    }

    /// Shifted copy, or `None` when it leaves `[0, n)^d`.
    pub fn translated(&self, offset: &[isize], n: usize) -> Option<Cube> {
        let mut out = *self;
        for k in 0..self.dim() {
            let c = self.corner[k] as isize + offset[k];
            if c < 0 || c as usize + self.extent[k] as usize > n {
                return None;
            }
            out.corner[k] = c as u32;
        }
        Some(out)
    }

    /// Calls `f` with the flat index of every cell, row-major.
    pub fn for_each_cell(&self, n: usize, mut f: impl FnMut(usize)) {
        let d = self.dim();
        let mut idx = [0usize; MAX_DIM];
        idx[..d]
            .iter_mut()
            .zip(self.corner())
            .for_each(|(i, &c)| *i = c as usize);
        loop {
            let flat = idx[..d].iter().fold(0, |acc, &i| acc * n + i);
            f(flat);
            let mut k = d;
            loop {
                if k == 0 {
                    return;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < (self.corner[k] + self.extent[k]) as usize {
                    break;
                }
                idx[k] = self.corner[k] as usize;
            }
        }
    }
}

impl fmt::Display for Cube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "corner{:?} extent{:?}", self.corner(), self.extent())
    }
}

/// How a [`CubeFamily`] was produced.
#[derive(Clone, Debug, PartialEq)]
pub enum FamilyPolicy {
    /// Every subinterval of a 1-D grid.
    Exhaustive1d,
    /// Dyadic cubes of side `2^k` cells at aligned offsets.
    Dyadic,
    /// Dyadic sides with corners on a half-side lattice.
    ShiftedDyadic,
    /// Random cubes, round-robin over dyadic side-length strata.
    Stratified { max_count: usize, seed: u64 },
    /// Products `Q_n × Q_m` of cubes from two factor families.
    Product(Box<FamilyPolicy>, Box<FamilyPolicy>),
    /// A lattice translate of another family, dropping cubes that leave the box.
    Shifted { base: Box<FamilyPolicy>, offset: Vec<isize> },
}

impl fmt::Display for FamilyPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FamilyPolicy::Exhaustive1d => write!(f, "exhaustive-1d"),
            FamilyPolicy::Dyadic => write!(f, "dyadic"),
            FamilyPolicy::ShiftedDyadic => write!(f, "shifted-dyadic"),
            FamilyPolicy::Stratified { max_count, seed } => {
                write!(f, "stratified({max_count}, seed {seed})")
            }
            FamilyPolicy::Product(a, b) => write!(f, "product({a} x {b})"),
            FamilyPolicy::Shifted { base, offset } => write!(f, "shifted({base} by {offset:?})"),
        }
    }
}

/// Finite family of grid cubes over which every supremum is taken.
#[derive(Clone, Debug)]
pub struct CubeFamily<T> {
    grid: UniformGrid<T>,
    policy: FamilyPolicy,
    /// `None` for the lazily enumerated exhaustive 1-D family.
    cubes: Option<Vec<Cube>>,
}

/// Builds the family of cubes prescribed by `policy` on `grid`.
pub fn cube_family<T: Real>(grid: &UniformGrid<T>, policy: FamilyPolicy) -> Result<CubeFamily<T>> {
    CubeFamily::new(grid, policy)
}

impl<T: Real> CubeFamily<T> {
    pub fn new(grid: &UniformGrid<T>, policy: FamilyPolicy) -> Result<Self> {
        let n = grid.points_per_axis();
        let d = grid.dim();
        let cubes = match &policy {
            FamilyPolicy::Exhaustive1d => {
                if d != 1 {
                    return Err(Error::invalid(format!(
                        "exhaustive-1d family requested on a {d}-dimensional grid"
                    )));
                }
                None
            }
            FamilyPolicy::Dyadic => Some(dyadic(d, n, false)),
            FamilyPolicy::ShiftedDyadic => Some(dyadic(d, n, true)),
            FamilyPolicy::Stratified { max_count, seed } => {
                if *max_count == 0 {
                    return Err(Error::invalid("stratified family needs max_count > 0"));
                }
                Some(stratified(d, n, *max_count, *seed))
            }
            FamilyPolicy::Product(..) | FamilyPolicy::Shifted { .. } => {
                return Err(Error::invalid(
                    "product and shifted families are built with CubeFamily::product / shifted",
                ))
            }
        };
        Ok(Self { grid: grid.clone(), policy, cubes })
    }

    /// Family of product boxes `Q_a × Q_b` on the product grid.
    pub fn product(a: &CubeFamily<T>, b: &CubeFamily<T>) -> Result<Self> {
        if a.grid.half_width() != b.grid.half_width()
            || a.grid.points_per_axis() != b.grid.points_per_axis()
        {
            return Err(Error::GridMismatch("factor families live on different boxes".into()));
        }
        let grid = a.grid.with_dim(a.grid.dim() + b.grid.dim())?;
        let mut cubes = Vec::with_capacity(a.len() * b.len());
        for qa in a.iter() {
            for qb in b.iter() {
                cubes.push(qa.product(&qb));
            }
        }
        Ok(Self {
            grid,
            policy: FamilyPolicy::Product(Box::new(a.policy.clone()), Box::new(b.policy.clone())),
            cubes: Some(cubes),
        })
    }

    /// Lattice translate by `offset` cells; cubes leaving the box are dropped.
    pub fn shifted(&self, offset: &[isize]) -> Self {
        let n = self.grid.points_per_axis();
        let cubes = self.iter().filter_map(|q| q.translated(offset, n)).collect();
        Self {
            grid: self.grid.clone(),
            policy: FamilyPolicy::Shifted {
                base: Box::new(self.policy.clone()),
                offset: offset.to_vec(),
            },
            cubes: Some(cubes),
        }
    }

    /// Keeps the cubes selected by `keep`, preserving enumeration order.
    pub fn filtered(&self, keep: impl Fn(&Cube) -> bool) -> Self {
        Self {
            grid: self.grid.clone(),
            policy: self.policy.clone(),
            cubes: Some(self.iter().filter(|q| keep(q)).collect()),
        }
    }

    pub fn grid(&self) -> &UniformGrid<T> {
        &self.grid
    }

    pub fn policy(&self) -> &FamilyPolicy {
        &self.policy
    }

    pub fn is_exhaustive_1d(&self) -> bool {
        self.cubes.is_none()
    }

    pub fn len(&self) -> usize {
        match &self.cubes {
            Some(c) => c.len(),
            None => {
                let n = self.grid.points_per_axis();
                n * (n + 1) / 2
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cube number `i` in enumeration order. The exhaustive 1-D family is
    /// ordered by start cell, then by length.
    pub fn get(&self, i: usize) -> Cube {
        match &self.cubes {
            Some(c) => c[i],
            None => {
                let n = self.grid.points_per_axis();
                let start = |a: usize| a * n - a * a.saturating_sub(1) / 2;
                let (mut lo, mut hi) = (0usize, n - 1);
                while lo < hi {
                    let mid = (lo + hi + 1) / 2;
                    if start(mid) <= i {
                        lo = mid;
                    } else {
                        hi = mid - 1;
                    }
                }
                Cube::new(&[lo], i - start(lo) + 1)
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Cube> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }

    /// First cell not covered by any cube, if any.
    pub fn uncovered_cell(&self) -> Option<usize> {
        if self.cubes.is_none() {
            return None;
        }
        let mut covered = vec![false; self.grid.len()];
        let n = self.grid.points_per_axis();
        for q in self.iter() {
            q.for_each_cell(n, |c| covered[c] = true);
        }
        covered.iter().position(|c| !c)
    }

    pub(crate) fn ensure_nonempty(&self) -> Result<()> {
        if self.is_empty() {
            Err(Error::EmptyFamily)
        } else {
            Ok(())
        }
    }

    pub(crate) fn ensure_covers(&self) -> Result<()> {
        self.ensure_nonempty()?;
        match self.uncovered_cell() {
            Some(cell) => Err(Error::Uncovered { cell }),
            None => Ok(()),
        }
    }
}

fn for_each_corner(d: usize, count: usize, stride: usize, mut f: impl FnMut(&[usize])) {
    let mut idx = [0usize; MAX_DIM];
    loop {
        let corner: Vec<usize> = idx[..d].iter().map(|&i| i * stride).collect();
        f(&corner);
        let mut k = d;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < count {
                break;
            }
            idx[k] = 0;
        }
    }
}

fn dyadic(d: usize, n: usize, shifted: bool) -> Vec<Cube> {
    let mut cubes = Vec::new();
    let mut side = 1;
    while side <= n {
        let stride = if shifted { (side / 2).max(1) } else { side };
        let count = (n - side) / stride + 1;
        for_each_corner(d, count, stride, |corner| cubes.push(Cube::new(corner, side)));
        side *= 2;
    }
    cubes
}

fn stratified(d: usize, n: usize, max_count: usize, seed: u64) -> Vec<Cube> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let levels = (usize::BITS - n.leading_zeros()) as usize;
    let mut seen = HashSet::with_capacity(max_count);
    let mut cubes = Vec::with_capacity(max_count);
    let budget = max_count.saturating_mul(50);
    let mut draws = 0;
    while cubes.len() < max_count && draws < budget {
        let level = draws % levels;
        draws += 1;
        let lo = 1usize << level;
        let hi = ((lo << 1) - 1).min(n);
        if lo > n {
            continue;
        }
        let side = rng.gen_range(lo..=hi);
        let corner: Vec<usize> = (0..d).map(|_| rng.gen_range(0..=n - side)).collect();
        let cube = Cube::new(&corner, side);
        if seen.insert(cube) {
            cubes.push(cube);
        }
    }
    cubes
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1(l: f64, n: usize) -> UniformGrid<f64> {
        UniformGrid::new(1, l, n).unwrap()
    }

    #[test]
    fn constant_sampling() {
        let g = grid1(8.0, 64);
        let f = SampledFunction::sample(&g, "one", |_| 1.0).unwrap();
        assert!(f.samples().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn gaussian_samples_are_mirror_symmetric() {
        let g = grid1(8.0, 1024);
        let f = SampledFunction::sample(&g, "gauss", |x| (-x[0] * x[0]).exp()).unwrap();
        let s = f.samples();
        for i in 0..1024 {
            assert_eq!(s[i], s[1023 - i]);
        }
    }

    #[test]
    fn root_weight_minimum_is_half_cell() {
        let g = grid1(8.0, 1024);
        let f = SampledFunction::sample(&g, "sqrt|x|", |x| x[0].abs().sqrt()).unwrap();
        let min = f.samples().iter().cloned().fold(f64::INFINITY, f64::min);
        let h = g.spacing();
        assert_eq!(min, (h / 2.0).sqrt());
        assert!(min > 0.0);
    }

    #[test]
    fn non_finite_sample_names_the_cell() {
        let g = grid1(1.0, 4);
        let err = SampledFunction::sample(&g, "bad", |x| if x[0] > 0.5 { f64::NAN } else { 0.0 })
            .unwrap_err();
        match err {
            Error::NonFinite { cell, .. } => assert_eq!(cell, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn translate_by_zero_and_by_one_cell() {
        let g = grid1(2.0, 8);
        let mut s = vec![0.0; 8];
        s[4] = 1.0;
        let f = SampledFunction::new(g.clone(), s, "e4").unwrap();
        assert_eq!(f.translate(&[0.0]).unwrap().samples(), f.samples());
        let shifted = f.translate(&[g.spacing()]).unwrap();
        let mut expect = vec![0.0; 8];
        expect[3] = 1.0;
        assert_eq!(shifted.samples(), &expect[..]);
    }

    #[test]
    fn translate_records_residual_and_rejects_huge_shift() {
        let g = grid1(2.0, 8);
        let f = SampledFunction::constant(&g, 1.0, "one").unwrap();
        let t = f.translate(&[0.6]).unwrap();
        assert!(t.label().contains("residual"));
        assert!(f.translate(&[4.5]).is_err());
    }

    #[test]
    fn tail_restrict_edge_cases() {
        let g = UniformGrid::new(2, 4.0, 16).unwrap();
        let f = SampledFunction::constant(&g, 1.0, "one").unwrap();
        assert_eq!(f.tail_restrict(0.0).samples(), f.samples());
        let r = 4.0 * 2f64.sqrt();
        assert!(f.tail_restrict(r).samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn tail_restrict_halves_unit_interval_mass() {
        let g = grid1(4.0, 64);
        let f = SampledFunction::sample(&g, "chi[1,2]", |x| {
            if (1.0..=2.0).contains(&x[0]) {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        let before: f64 = f.samples().iter().sum();
        let after: f64 = f.tail_restrict(1.5).samples().iter().sum();
        assert!((after - before / 2.0).abs() <= 1.0);
    }

    #[test]
    fn family_counts() {
        let g = grid1(1.0, 4);
        assert_eq!(cube_family(&g, FamilyPolicy::Exhaustive1d).unwrap().len(), 10);
        let g8 = grid1(1.0, 8);
        assert_eq!(cube_family(&g8, FamilyPolicy::Dyadic).unwrap().len(), 15);
        let g2 = UniformGrid::new(2, 1.0, 64).unwrap();
        let a = cube_family(&g2, FamilyPolicy::Stratified { max_count: 2000, seed: 7 }).unwrap();
        let b = cube_family(&g2, FamilyPolicy::Stratified { max_count: 2000, seed: 7 }).unwrap();
        assert_eq!(a.len(), 2000);
        assert!(a.iter().eq(b.iter()));
        assert!(a.iter().all(|q| q.fits(64)));
    }

    #[test]
    fn family_policy_errors() {
        let g2 = UniformGrid::new(2, 1.0, 8).unwrap();
        assert!(cube_family(&g2, FamilyPolicy::Exhaustive1d).is_err());
        assert!(cube_family(&g2, FamilyPolicy::Stratified { max_count: 0, seed: 1 }).is_err());
    }

    #[test]
    fn exhaustive_enumeration_matches_nested_loops() {
        let g = grid1(1.0, 9);
        let fam = cube_family(&g, FamilyPolicy::Exhaustive1d).unwrap();
        let mut expect = Vec::new();
        for a in 0..9 {
            for len in 1..=9 - a {
                expect.push(Cube::new(&[a], len));
            }
        }
        assert!(fam.iter().eq(expect.into_iter()));
    }

    #[test]
    fn dyadic_and_shifted_cover() {
        let g = UniformGrid::new(2, 1.0, 16).unwrap();
        for p in [FamilyPolicy::Dyadic, FamilyPolicy::ShiftedDyadic] {
            let fam = cube_family(&g, p).unwrap();
            assert_eq!(fam.uncovered_cell(), None);
        }
    }

    #[test]
    fn cube_cell_iteration() {
        let q = Cube::from_extents(&[1, 2], &[2, 3]);
        let mut cells = Vec::new();
        q.for_each_cell(5, |c| cells.push(c));
        assert_eq!(cells, vec![7, 8, 9, 12, 13, 14]);
        assert_eq!(q.cells(), 6);
        assert_eq!(q.side(), None);
    }

    #[test]
    fn table_round_trip_is_bit_exact() {
        let g = UniformGrid::new(2, 3.0, 8).unwrap();
        let f = SampledFunction::sample(&g, "mix", |x: &[f64]| (x[0] * 1.7).sin() / 3.0 + x[1].powi(3))
            .unwrap();
        let mut buf = Vec::new();
        f.write_table(&mut buf).unwrap();
        let back = SampledFunction::<f64>::read_table(&buf[..]).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn inexact_spacing_rejected() {
        // 2*0.1/3 times 3 does not give 0.2 back in binary floating point.
        let ok = UniformGrid::new(1, 0.1f64, 3);
        if (0.2f64 / 3.0) * 3.0 != 0.2 {
            assert!(ok.is_err());
        }
    }
}
