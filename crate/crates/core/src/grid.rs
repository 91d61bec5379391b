//! Uniform Cartesian grids restricted to a band around a variety.

use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};

use rayon::prelude::*;

use crate::closest_point::{ClosestPoint, CpResult};
use crate::error::{check_dim, Error, Result};
use crate::sparse::CsrMatrix;
use crate::varieties::Parametrization;

/// Axis-aligned box sampled with uniform spacing `h`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    lo: Vec<f64>,
    h: f64,
    counts: Vec<usize>,
    strides: Vec<u64>,
}

impl GridSpec {
    /// `bounds[a] = (min, max)`; every extent must be an integer multiple of `h` (to `1e-9`).
    pub fn new(bounds: &[(f64, f64)], h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::Config(format!("mesh width must be positive, got {h}")));
        }
        if bounds.is_empty() {
            return Err(Error::Config("grid needs at least one axis".into()));
        }
        let mut counts = Vec::with_capacity(bounds.len());
        for &(a, b) in bounds {
            let cells = (b - a) / h;
            if !(cells >= 1.0) || (cells - cells.round()).abs() > 1e-9 {
                return Err(Error::Config(format!("extent [{a}, {b}] is not a positive multiple of h = {h}")));
            }
            counts.push(cells.round() as usize + 1);
        }
        Ok(Self::from_parts(bounds.iter().map(|b| b.0).collect(), h, counts))
    }

    pub fn from_parts(lo: Vec<f64>, h: f64, counts: Vec<usize>) -> Self {
        let mut strides = vec![1u64; counts.len()];
        for a in (0..counts.len().saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * counts[a + 1] as u64;
        }
        Self { lo, h, counts, strides }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn total_points(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).product()
    }

    /// Flat index of a multi-index, or `None` outside the box.
    pub fn flat(&self, idx: &[i64]) -> Option<u64> {
        let mut f = 0u64;
        for (a, &i) in idx.iter().enumerate() {
            if i < 0 || i as usize >= self.counts[a] {
                return None;
            }
            f += i as u64 * self.strides[a];
        }
        Some(f)
    }

    pub fn multi(&self, flat: u64) -> Vec<i64> {
        self.strides
            .iter()
            .zip(&self.counts)
            .map(|(&s, &c)| ((flat / s) % c as u64) as i64)
            .collect()
    }

    pub fn coords(&self, flat: u64) -> Vec<f64> {
        self.multi(flat).iter().zip(&self.lo).map(|(&i, &l)| l + i as f64 * self.h).collect()
    }

    /// Axis neighbour `flat +- h e_axis`.
    pub fn neighbor(&self, flat: u64, axis: usize, forward: bool) -> Option<u64> {
        let mut m = self.multi(flat);
        m[axis] += if forward { 1 } else { -1 };
        self.flat(&m)
    }

    /// Tensor-cubic Lagrange stencil of `y`: `4^n` (flat index, weight) pairs with zero
    /// weights dropped. Errors if the stencil leaves the box.
    pub fn stencil(&self, y: &[f64]) -> Result<Vec<(u64, f64)>> {
        check_dim(self.dim(), y.len())?;
        let n = self.dim();
        let mut base = vec![0i64; n];
        let mut w = vec![[0.0; 4]; n];
        for a in 0..n {
            let mut r = (y[a] - self.lo[a]) / self.h;
            if (r - r.round()).abs() < 1e-10 * r.abs().max(1.0) {
                r = r.round();
            }
            let b = r.floor();
            base[a] = b as i64 - 1;
            w[a] = cubic_weights(r - b);
        }
        let mut out = Vec::with_capacity(4usize.pow(n as u32));
        let mut off = vec![0usize; n];
        let mut idx = vec![0i64; n];
        'outer: loop {
            let mut wt = 1.0;
            for a in 0..n {
                wt *= w[a][off[a]];
                idx[a] = base[a] + off[a] as i64;
            }
            if wt != 0.0 {
                let f = self.flat(&idx).ok_or_else(|| {
                    Error::StencilEscape(format!("interpolation stencil of {y:?} leaves the box"))
                })?;
                out.push((f, wt));
            }
            for a in (0..n).rev() {
                off[a] += 1;
                if off[a] < 4 {
                    continue 'outer;
                }
                off[a] = 0;
            }
            break;
        }
        Ok(out)
    }

    /// All grid points within `radius` of `y`.
    pub fn points_within(&self, y: &[f64], radius: f64) -> Vec<u64> {
        let n = self.dim();
        let lo: Vec<i64> = (0..n).map(|a| ((y[a] - radius - self.lo[a]) / self.h).ceil() as i64).collect();
        let hi: Vec<i64> = (0..n).map(|a| ((y[a] + radius - self.lo[a]) / self.h).floor() as i64).collect();
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            return Vec::new();
        }
        let r2 = radius * radius;
        let mut out = Vec::new();
        let mut idx = lo.clone();
        loop {
            let d2: f64 = (0..n).map(|a| (self.lo[a] + idx[a] as f64 * self.h - y[a]).powi(2)).sum();
            if d2 <= r2 {
                if let Some(f) = self.flat(&idx) {
                    out.push(f);
                }
            }
            let mut a = n;
            loop {
                if a == 0 {
                    return out;
                }
                a -= 1;
                idx[a] += 1;
                if idx[a] <= hi[a] {
                    break;
                }
                idx[a] = lo[a];
            }
        }
    }
}

/// Cubic Lagrange weights for nodes `-1, 0, 1, 2` at offset `t`.
pub fn cubic_weights(t: f64) -> [f64; 4] {
    [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ]
}

/// Grid points near a dense sample of a variety: a superset of every grid point
/// within `radius` of the variety when the samples are spaced at most `spacing` apart.
pub fn candidates_near(spec: &GridSpec, samples: &[Vec<f64>], radius: f64, spacing: f64) -> Vec<u64> {
    let set: HashSet<u64> = samples
        .par_iter()
        .fold(HashSet::new, |mut s, y| {
            s.extend(spec.points_within(y, radius + spacing));
            s
        })
        .reduce(HashSet::new, |mut a, b| {
            a.extend(b);
            a
        });
    let mut v: Vec<u64> = set.into_iter().collect();
    v.sort_unstable();
    v
}

/// Points of a parametrized variety spaced at most `spacing` apart.
pub fn variety_samples(param: &dyn Parametrization, spacing: f64) -> Vec<Vec<f64>> {
    let dom = param.domain();
    let probe = 512;
    let mut max_speed = vec![0.0f64; param.param_dim()];
    let grid_u = |k: usize, d: usize| dom[d].0 + (dom[d].1 - dom[d].0) * (k as f64 + 0.5) / probe as f64;
    for k in 0..probe {
        for j in 0..(if param.param_dim() == 2 { probe / 8 } else { 1 }) {
            let u: Vec<f64> = if param.param_dim() == 2 {
                vec![grid_u(k, 0), grid_u(j * 8, 1)]
            } else {
                vec![grid_u(k, 0)]
            };
            for (d, t) in param.tangents(&u).iter().enumerate() {
                max_speed[d] = max_speed[d].max(t.iter().map(|v| v * v).sum::<f64>().sqrt());
            }
        }
    }
    // 1.5x safety on the sampled maximum speed
    let counts: Vec<usize> = max_speed
        .iter()
        .zip(&dom)
        .map(|(s, (a, b))| ((1.5 * s * (b - a) / spacing).ceil() as usize).max(8))
        .collect();
    let axis = |d: usize| -> Vec<f64> {
        (0..counts[d]).map(|k| dom[d].0 + (dom[d].1 - dom[d].0) * k as f64 / counts[d] as f64).collect()
    };
    match param.param_dim() {
        1 => axis(0).into_iter().map(|t| param.point(&[t])).collect(),
        _ => {
            let (a0, a1) = (axis(0), axis(1));
            a0.iter().flat_map(|&t| a1.iter().map(move |&a| param.point(&[t, a]))).collect()
        }
    }
}

/// Band points (core) followed by their missing axis neighbours (ghosts).
#[derive(Clone, Debug)]
pub struct BandedGrid {
    spec: GridSpec,
    points: Vec<u64>,
    n_core: usize,
    n_seed: usize,
    ordinal: HashMap<u64, u32>,
    cp: Vec<f64>,
    params: Option<Vec<f64>>,
}

/// Inputs to [`build_band`].
pub struct BandRequest<'a> {
    pub spec: GridSpec,
    pub cp: &'a dyn ClosestPoint,
    /// Grid points on which the band predicate is evaluated.
    pub candidates: Vec<u64>,
    pub predicate: &'a (dyn Fn(&[f64], &CpResult) -> bool + Sync),
    /// Extra points whose interpolation stencils must lie in the band.
    pub extra_targets: Vec<Vec<f64>>,
}

struct CpEntry {
    point: Vec<f64>,
    param: Option<Vec<f64>>,
}

/// Builds the active set: predicate points, closed under "the stencil of `cp(x)` is
/// in the core for every core point `x` and every axis neighbour of a core point".
pub fn build_band(req: BandRequest<'_>) -> Result<BandedGrid> {
    let spec = req.spec;
    let n = spec.dim();
    check_dim(n, req.cp.ambient_dim())?;
    let mut cache: HashMap<u64, CpEntry> = HashMap::new();

    let evaluated: Vec<(u64, Result<CpResult>)> = req
        .candidates
        .par_iter()
        .map(|&f| (f, req.cp.project(&spec.coords(f))))
        .collect();
    let mut core: HashSet<u64> = HashSet::new();
    for (f, r) in evaluated {
        if let Ok(r) = r {
            let interior = (0..n).all(|a| spec.neighbor(f, a, false).is_some() && spec.neighbor(f, a, true).is_some());
            if interior && r.converged && (req.predicate)(&spec.coords(f), &r) {
                core.insert(f);
            }
            cache.insert(f, CpEntry { point: r.point, param: r.param });
        }
    }
    let n_seed_points = core.len();
    for y in &req.extra_targets {
        for (f, _) in spec.stencil(y)? {
            core.insert(f);
        }
    }
    if core.is_empty() {
        return Err(Error::Config("band predicate selects no grid points".into()));
    }

    let mut checked: HashSet<u64> = HashSet::new();
    let mut frontier: Vec<u64> = core.iter().copied().collect();
    while !frontier.is_empty() {
        let mut members: Vec<u64> = Vec::new();
        for &f in &frontier {
            if checked.insert(f) {
                members.push(f);
            }
            for a in 0..n {
                for fwd in [false, true] {
                    let nb = spec.neighbor(f, a, fwd).ok_or_else(|| {
                        Error::Config(format!(
                            "band touches the box boundary at {:?}; enlarge the box",
                            spec.coords(f)
                        ))
                    })?;
                    if checked.insert(nb) {
                        members.push(nb);
                    }
                }
            }
        }
        let missing: Vec<u64> = members.iter().copied().filter(|f| !cache.contains_key(f)).collect();
        let fresh: Vec<(u64, Result<CpResult>)> =
            missing.par_iter().map(|&f| (f, req.cp.project(&spec.coords(f)))).collect();
        let mut failures = Vec::new();
        for (f, r) in fresh {
            match r {
                Ok(r) if r.converged => {
                    cache.insert(f, CpEntry { point: r.point, param: r.param });
                }
                Ok(r) => failures.push(format!("{:?}: residuals {:?}", spec.coords(f), r.residuals)),
                Err(e) => failures.push(format!("{:?}: {e}", spec.coords(f))),
            }
        }
        if !failures.is_empty() {
            let shown = failures.iter().take(5).cloned().collect::<Vec<_>>().join("; ");
            return Err(Error::NonConvergence(format!(
                "closest point failed at {} band points: {shown}",
                failures.len()
            )));
        }
        let mut next = Vec::new();
        for f in members {
            let target = &cache[&f].point;
            for (s, _) in spec.stencil(target).map_err(|_| {
                Error::Config(format!("stencil of cp({:?}) leaves the box; enlarge the box", spec.coords(f)))
            })? {
                if core.insert(s) {
                    next.push(s);
                }
            }
        }
        frontier = next;
    }

    let mut core_sorted: Vec<u64> = core.iter().copied().collect();
    core_sorted.sort_unstable();
    let mut ghosts: Vec<u64> = checked.into_iter().filter(|f| !core.contains(f)).collect();
    ghosts.sort_unstable();
    let n_core = core_sorted.len();
    let points: Vec<u64> = core_sorted.into_iter().chain(ghosts).collect();
    let ordinal: HashMap<u64, u32> = points.iter().enumerate().map(|(i, &f)| (f, i as u32)).collect();
    let mut cp = Vec::with_capacity(points.len() * n);
    let has_params = points.iter().all(|f| cache[f].param.is_some());
    let mut params = has_params.then(Vec::new);
    for f in &points {
        let e = &cache[f];
        cp.extend_from_slice(&e.point);
        if let (Some(p), Some(u)) = (params.as_mut(), e.param.as_ref()) {
            p.extend_from_slice(u);
        }
    }
    Ok(BandedGrid { spec, points, n_core, n_seed: n_seed_points, ordinal, cp, params })
}

impl BandedGrid {
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    /// Number of active points (core and ghost).
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Core points occupy ordinals `0..n_core`.
    pub fn n_core(&self) -> usize {
        self.n_core
    }

    /// Number of points selected by the band predicate itself.
    pub fn n_predicate(&self) -> usize {
        self.n_seed
    }

    pub fn flat_indices(&self) -> &[u64] {
        &self.points
    }

    pub fn ordinal(&self, flat: u64) -> Option<usize> {
        self.ordinal.get(&flat).map(|&o| o as usize)
    }

    pub fn coords(&self, ordinal: usize) -> Vec<f64> {
        self.spec.coords(self.points[ordinal])
    }

    pub fn cp(&self, ordinal: usize) -> &[f64] {
        let n = self.spec.dim();
        &self.cp[ordinal * n..(ordinal + 1) * n]
    }

    /// Parameter of `cp(x)` when the closest point map reports one.
    pub fn cp_param(&self, ordinal: usize) -> Option<&[f64]> {
        let params = self.params.as_ref()?;
        let d = params.len() / self.points.len();
        Some(&params[ordinal * d..(ordinal + 1) * d])
    }

    pub fn cp_targets(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.cp(i).to_vec()).collect()
    }

    /// Active points as a fraction of the whole box.
    pub fn fraction(&self) -> f64 {
        self.len() as f64 / self.spec.total_points() as f64
    }

    /// Samples `f` at every active point.
    pub fn sample<F: Fn(&[f64]) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.len()).map(|i| f(&self.coords(i))).collect()
    }

    /// Writes the active index set: magic, version, geometry, core count, indices (little endian).
    pub fn write_index_dump<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(DUMP_MAGIC)?;
        w.write_all(&DUMP_VERSION.to_le_bytes())?;
        w.write_all(&(self.spec.dim() as u32).to_le_bytes())?;
        w.write_all(&self.spec.h.to_le_bytes())?;
        for &l in &self.spec.lo {
            w.write_all(&l.to_le_bytes())?;
        }
        for &c in &self.spec.counts {
            w.write_all(&(c as u64).to_le_bytes())?;
        }
        w.write_all(&(self.n_core as u64).to_le_bytes())?;
        w.write_all(&(self.points.len() as u64).to_le_bytes())?;
        for &f in &self.points {
            w.write_all(&f.to_le_bytes())?;
        }
        Ok(())
    }
}

const DUMP_MAGIC: &[u8; 8] = b"CPMBAND\0";
const DUMP_VERSION: u32 = 1;

/// Contents of a band index dump.
#[derive(Clone, Debug, PartialEq)]
pub struct IndexDump {
    pub spec: GridSpec,
    pub n_core: usize,
    pub indices: Vec<u64>,
}

pub fn read_index_dump<R: Read>(mut r: R) -> Result<IndexDump> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != DUMP_MAGIC {
        return Err(Error::Parse("not a band index dump".into()));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != DUMP_VERSION {
        return Err(Error::Parse(format!("unsupported dump version {version}")));
    }
    r.read_exact(&mut b4)?;
    let dim = u32::from_le_bytes(b4) as usize;
    let mut read_u64 = |r: &mut R| -> Result<u64> {
        r.read_exact(&mut b8)?;
        Ok(u64::from_le_bytes(b8))
    };
    let h = f64::from_bits(read_u64(&mut r)?);
    let lo = (0..dim).map(|_| read_u64(&mut r).map(f64::from_bits)).collect::<Result<Vec<_>>>()?;
    let counts = (0..dim).map(|_| read_u64(&mut r).map(|c| c as usize)).collect::<Result<Vec<_>>>()?;
    let n_core = read_u64(&mut r)? as usize;
    let total = read_u64(&mut r)? as usize;
    let indices = (0..total).map(|_| read_u64(&mut r)).collect::<Result<Vec<_>>>()?;
    Ok(IndexDump { spec: GridSpec::from_parts(lo, h, counts), n_core, indices })
}

/// Tensor-cubic interpolation matrix: row `i` interpolates active-point data at `targets[i]`.
pub fn interp_matrix(grid: &BandedGrid, targets: &[Vec<f64>]) -> Result<CsrMatrix> {
    let rows: Vec<Vec<(u32, f64)>> = targets
        .par_iter()
        .map(|y| {
            grid.spec
                .stencil(y)?
                .into_iter()
                .map(|(f, w)| {
                    grid.ordinal
                        .get(&f)
                        .map(|&o| (o, w))
                        .ok_or_else(|| Error::StencilEscape(format!("stencil of {y:?} leaves the band")))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(CsrMatrix::from_rows(targets.len(), grid.len(), rows))
}

/// Tensor-cubic interpolation stored per row as one band ordinal per stencil line
/// along the last axis plus `4 d` weights. Uses about `4^(d-1)` words per row in place
/// of the `4^d` (index, weight) pairs of the CSR form.
#[derive(Clone, Debug)]
pub struct TensorInterp {
    dim: usize,
    ncols: usize,
    weights: Vec<f64>,
    spans: Vec<(u8, u8)>,
    starts: Vec<u32>,
}

const NO_LINE: u32 = u32::MAX;

impl TensorInterp {
    pub fn new(grid: &BandedGrid, targets: &[Vec<f64>]) -> Result<Self> {
        let n = grid.spec.dim();
        let lines = 4usize.pow(n as u32 - 1);
        let rows: Vec<(Vec<f64>, (u8, u8), Vec<u32>)> = targets
            .par_iter()
            .map(|y| Self::row(grid, y, lines))
            .collect::<Result<_>>()?;
        let mut out = Self {
            dim: n,
            ncols: grid.len(),
            weights: Vec::with_capacity(rows.len() * 4 * n),
            spans: Vec::with_capacity(rows.len()),
            starts: Vec::with_capacity(rows.len() * lines),
        };
        for (w, span, st) in rows {
            out.weights.extend(w);
            out.spans.push(span);
            out.starts.extend(st);
        }
        Ok(out)
    }

    fn row(grid: &BandedGrid, y: &[f64], lines: usize) -> Result<(Vec<f64>, (u8, u8), Vec<u32>)> {
        let spec = &grid.spec;
        check_dim(spec.dim(), y.len())?;
        let n = spec.dim();
        let mut base = vec![0i64; n];
        let mut w = Vec::with_capacity(4 * n);
        for a in 0..n {
            let mut r = (y[a] - spec.lo[a]) / spec.h;
            if (r - r.round()).abs() < 1e-10 * r.abs().max(1.0) {
                r = r.round();
            }
            let b = r.floor();
            base[a] = b as i64 - 1;
            w.extend(cubic_weights(r - b));
        }
        let last = &w[4 * (n - 1)..];
        let lo = (0..4).find(|&k| last[k] != 0.0).unwrap_or(0);
        let hi = (0..4).rev().find(|&k| last[k] != 0.0).unwrap_or(0);
        let escape = || Error::StencilEscape(format!("stencil of {y:?} leaves the band"));
        let mut starts = Vec::with_capacity(lines);
        let mut idx = base.clone();
        for line in 0..lines {
            let mut rem = line;
            let mut zero = false;
            for a in (0..n - 1).rev() {
                let off = rem % 4;
                rem /= 4;
                idx[a] = base[a] + off as i64;
                zero |= w[4 * a + off] == 0.0;
            }
            if zero {
                starts.push(NO_LINE);
                continue;
            }
            idx[n - 1] = base[n - 1] + lo as i64;
            let f = spec.flat(&idx).ok_or_else(escape)?;
            let o = *grid.ordinal.get(&f).ok_or_else(escape)?;
            for k in 1..=(hi - lo) {
                if grid.ordinal.get(&(f + k as u64)) != Some(&(o + k as u32)) {
                    return Err(escape());
                }
            }
            starts.push(o);
        }
        Ok((w, (lo as u8, hi as u8), starts))
    }

    pub fn nrows(&self) -> usize {
        self.spans.len()
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows()];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        let n = self.dim;
        let lines = 4usize.pow(n as u32 - 1);
        y.par_iter_mut().enumerate().for_each(|(r, out)| {
            let w = &self.weights[4 * n * r..4 * n * (r + 1)];
            let (lo, hi) = self.spans[r];
            let (lo, hi) = (lo as usize, hi as usize);
            let last = &w[4 * (n - 1)..];
            let mut acc = 0.0;
            for (line, &start) in self.starts[lines * r..lines * (r + 1)].iter().enumerate() {
                if start == NO_LINE {
                    continue;
                }
                let mut rem = line;
                let mut outer = 1.0;
                for a in (0..n - 1).rev() {
                    outer *= w[4 * a + rem % 4];
                    rem /= 4;
                }
                let s = start as usize;
                let inner: f64 = (lo..=hi).map(|k| last[k] * x[s + k - lo]).sum();
                acc += outer * inner;
            }
            *out = acc;
        });
    }

    /// CSR copy (for tests and small grids).
    pub fn to_csr(&self) -> CsrMatrix {
        let n = self.dim;
        let lines = 4usize.pow(n as u32 - 1);
        let rows = (0..self.nrows())
            .map(|r| {
                let w = &self.weights[4 * n * r..4 * n * (r + 1)];
                let (lo, hi) = (self.spans[r].0 as usize, self.spans[r].1 as usize);
                let mut row = Vec::new();
                for (line, &start) in self.starts[lines * r..lines * (r + 1)].iter().enumerate() {
                    if start == NO_LINE {
                        continue;
                    }
                    let mut rem = line;
                    let mut outer = 1.0;
                    for a in (0..n - 1).rev() {
                        outer *= w[4 * a + rem % 4];
                        rem /= 4;
                    }
                    for k in lo..=hi {
                        row.push((start + (k - lo) as u32, outer * w[4 * (n - 1) + k]));
                    }
                }
                row
            })
            .collect();
        CsrMatrix::from_rows(self.nrows(), self.ncols, rows)
    }
}

/// Extension matrix `E`: interpolation at `cp(x_i)` for every active point.
pub fn extension_matrix(grid: &BandedGrid) -> Result<CsrMatrix> {
    interp_matrix(grid, &grid.cp_targets())
}

/// Central difference along `axis`, with rows for core points and zero rows for ghosts.
pub fn diff_matrix(grid: &BandedGrid, axis: usize) -> Result<CsrMatrix> {
    if axis >= grid.spec.dim() {
        return Err(Error::DimensionMismatch { expected: grid.spec.dim(), got: axis + 1 });
    }
    let inv = 1.0 / (2.0 * grid.spec.h);
    let mut rows = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        if i >= grid.n_core {
            rows.push(Vec::new());
            continue;
        }
        let f = grid.points[i];
        let look = |fwd: bool| -> Result<u32> {
            grid.spec
                .neighbor(f, axis, fwd)
                .and_then(|nb| grid.ordinal.get(&nb).copied())
                .ok_or_else(|| Error::StencilEscape(format!("missing neighbour of {:?} along axis {axis}", grid.coords(i))))
        };
        rows.push(vec![(look(true)?, inv), (look(false)?, -inv)]);
    }
    Ok(CsrMatrix::from_rows(grid.len(), grid.len(), rows))
}

/// Diagonal matrix over the active points.
pub fn diag_matrix(grid: &BandedGrid, values: &[f64]) -> Result<CsrMatrix> {
    check_dim(grid.len(), values.len())?;
    Ok(CsrMatrix::diag(values))
}
