use std::f64::consts::PI;

use cuspcpm::closest_point::{ClosestPoint, CpResult};
use cuspcpm::cpm::{cusp_geometry, CuspBandConfig};
use cuspcpm::grid::*;
use cuspcpm::{Error, ImplicitSystem, Polynomial, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Analytic closest point map onto the unit circle in the `z = 0` plane.
struct CircleCp {
    system: ImplicitSystem,
}

impl CircleCp {
    fn new() -> Self {
        let x = Polynomial::var(3, 0);
        let y = Polynomial::var(3, 1);
        let z = Polynomial::var(3, 2);
        let ring = &(&x * &x) + &(&y * &y) - 1.0;
        Self { system: ImplicitSystem::new(3, vec![ring, z]).unwrap() }
    }
}

impl ClosestPoint for CircleCp {
    fn ambient_dim(&self) -> usize {
        3
    }

    fn system(&self) -> &ImplicitSystem {
        &self.system
    }

    fn project(&self, x: &[f64]) -> Result<CpResult> {
        let r = x[0].hypot(x[1]);
        if r < 1e-12 {
            return Err(Error::NonProjectable("circle axis".into()));
        }
        let point = vec![x[0] / r, x[1] / r, 0.0];
        let distance = x.iter().zip(&point).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        Ok(CpResult { point, converged: true, residuals: vec![0.0, 0.0], distance, param: None })
    }
}

fn circle_targets(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|k| {
        let t = 2.0 * PI * (k as f64 + 0.3) / n as f64;
        vec![t.cos(), t.sin(), 0.0]
    }).collect()
}

fn circle_band(h: f64, half_width: f64) -> Result<BandedGrid> {
    let spec = GridSpec::new(&[(-half_width, half_width); 3], h)?;
    let cp = CircleCp::new();
    let samples = circle_targets(((2.0 * PI) / (h / 4.0)).ceil() as usize);
    let candidates = candidates_near(&spec, &samples, 2.0 * h, h / 4.0);
    let radius = 2.0 * h;
    let predicate = move |_: &[f64], r: &CpResult| r.distance <= radius;
    build_band(BandRequest { spec, cp: &cp, candidates, predicate: &predicate, extra_targets: circle_targets(200) })
}

fn smooth(x: &[f64]) -> f64 {
    (x[0] + 2.0 * x[1] + 0.5 * x[2]).sin()
}

#[test]
fn cusp_band_fraction_is_proper() {
    let geo = cusp_geometry(&CuspBandConfig::new(0.1)).unwrap();
    let f = geo.grid.fraction();
    assert!(f > 0.0 && f < 1.0, "{f}");
}

#[test]
fn closure_holds_and_is_minimal() {
    let grid = circle_band(0.1, 2.0).unwrap();
    let cp = CircleCp::new();
    let n_core = grid.n_core();
    let in_core = |f: u64| grid.ordinal(f).is_some_and(|o| o < n_core);
    let mut needed = std::collections::HashSet::new();
    for i in 0..grid.len() {
        for (f, _) in grid.spec().stencil(grid.cp(i)).unwrap() {
            assert!(in_core(f), "stencil of cp({:?}) leaves the core", grid.coords(i));
            needed.insert(f);
        }
    }
    for y in circle_targets(200) {
        for (f, _) in grid.spec().stencil(&y).unwrap() {
            needed.insert(f);
        }
    }
    for i in 0..n_core {
        let f = grid.flat_indices()[i];
        for a in 0..3 {
            for fwd in [false, true] {
                assert!(grid.ordinal(grid.spec().neighbor(f, a, fwd).unwrap()).is_some());
            }
        }
        // every core point is a seed or is used by some stencil
        let seed = cp.project(&grid.coords(i)).unwrap().distance <= 0.2;
        assert!(seed || needed.contains(&f), "{:?} is not needed", grid.coords(i));
    }
    // ghosts are exactly the non-core neighbours
    for i in n_core..grid.len() {
        let f = grid.flat_indices()[i];
        assert!(!needed.contains(&f));
    }
}

#[test]
fn closure_is_idempotent() {
    let grid = circle_band(0.1, 2.0).unwrap();
    let cp = CircleCp::new();
    let core: Vec<u64> = grid.flat_indices()[..grid.n_core()].to_vec();
    let keep = core.clone();
    let predicate = move |x: &[f64], _: &CpResult| {
        let spec = GridSpec::new(&[(-2.0, 2.0); 3], 0.1).unwrap();
        let idx: Vec<i64> = x.iter().zip(spec.lo()).map(|(v, l)| ((v - l) / 0.1).round() as i64).collect();
        keep.binary_search(&spec.flat(&idx).unwrap()).is_ok()
    };
    let again = build_band(BandRequest {
        spec: grid.spec().clone(),
        cp: &cp,
        candidates: core.clone(),
        predicate: &predicate,
        extra_targets: Vec::new(),
    })
    .unwrap();
    assert_eq!(again.flat_indices(), grid.flat_indices());
}

#[test]
fn band_touching_the_box_is_rejected() {
    assert!(matches!(circle_band(0.1, 1.1), Err(Error::Config(_))));
}

#[test]
fn interpolation_reproduces_cubics() {
    let grid = circle_band(0.1, 2.0).unwrap();
    let poly = |x: &[f64]| x[0].powi(3) + 2.0 * x[1] * x[1] * x[2];
    let values = grid.sample(poly);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let targets: Vec<Vec<f64>> = (0..100).map(|_| circle_targets(200)[rng.random_range(0..200)].clone()).collect();
    let m = interp_matrix(&grid, &targets).unwrap();
    for (y, v) in targets.iter().zip(m.matvec(&values)) {
        assert!((v - poly(y)).abs() < 1e-12);
    }
    for s in m.row_sums() {
        assert!((s - 1.0).abs() < 1e-12);
    }
    let e = extension_matrix(&grid).unwrap();
    assert!(e.row_sums().iter().all(|s| (s - 1.0).abs() < 1e-12));
}

#[test]
fn grid_point_target_gives_unit_row() {
    let grid = circle_band(0.1, 2.0).unwrap();
    let m = interp_matrix(&grid, &[vec![1.0, 0.0, 0.0]]).unwrap();
    let (cols, vals) = m.row(0);
    assert_eq!(cols.len(), 1);
    assert_eq!(vals[0], 1.0);
    assert_eq!(grid.coords(cols[0] as usize).iter().map(|v| v.round()).collect::<Vec<_>>(), vec![1.0, 0.0, 0.0]);
}

#[test]
fn tensor_interpolation_matches_csr() {
    let grid = circle_band(0.1, 2.0).unwrap();
    let targets = grid.cp_targets();
    let csr = interp_matrix(&grid, &targets).unwrap();
    let tensor = TensorInterp::new(&grid, &targets).unwrap();
    let w = grid.sample(smooth);
    for (a, b) in csr.matvec(&w).iter().zip(tensor.matvec(&w)) {
        assert!((a - b).abs() < 1e-13);
    }
    assert!((tensor.to_csr().add_scaled(&csr, -1.0)).norm_inf() < 1e-13);
}

fn interp_error(h: f64) -> f64 {
    let grid = circle_band(h, 2.0).unwrap();
    let targets = circle_targets(200);
    let m = interp_matrix(&grid, &targets).unwrap();
    m.matvec(&grid.sample(smooth)).iter().zip(&targets).map(|(v, y)| (v - smooth(y)).abs()).fold(0.0, f64::max)
}

#[test]
fn interpolation_is_fourth_order() {
    let ratio = interp_error(0.1) / interp_error(0.05);
    assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
}

fn diff_error(h: f64) -> f64 {
    let grid = circle_band(h, 2.0).unwrap();
    let w = grid.sample(smooth);
    let mut worst = 0.0f64;
    for (a, scale) in [(0usize, 1.0), (1, 2.0), (2, 0.5)] {
        let d = diff_matrix(&grid, a).unwrap().matvec(&w);
        for i in 0..grid.n_core() {
            let x = grid.coords(i);
            let exact = scale * (x[0] + 2.0 * x[1] + 0.5 * x[2]).cos();
            worst = worst.max((d[i] - exact).abs());
        }
    }
    worst
}

#[test]
fn differences_are_second_order() {
    let ratio = diff_error(0.1) / diff_error(0.05);
    assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn differences_of_constants_and_linears() {
    let grid = circle_band(0.1, 2.0).unwrap();
    for a in 0..3 {
        let d = diff_matrix(&grid, a).unwrap();
        let ones = d.matvec(&vec![1.0; grid.len()]);
        let lin = d.matvec(&grid.sample(|x| x[a]));
        for i in 0..grid.n_core() {
            assert!(ones[i].abs() < 1e-14);
            assert!((lin[i] - 1.0).abs() < 1e-12);
        }
        for i in grid.n_core()..grid.len() {
            assert_eq!(lin[i], 0.0);
        }
    }
}

#[test]
fn differences_are_odd_under_reflection() {
    let grid = circle_band(0.1, 2.0).unwrap();
    let f = |x: &[f64]| (x[0] + 0.3 * x[1]).exp() * (1.0 + x[2]);
    let reflected = grid.sample(|x| f(&[-x[0], -x[1], -x[2]]));
    let direct = grid.sample(f);
    for a in 0..3 {
        let d = diff_matrix(&grid, a).unwrap();
        let (dr, dd) = (d.matvec(&reflected), d.matvec(&direct));
        for i in 0..grid.n_core() {
            let x = grid.coords(i);
            let mirror: Vec<f64> = x.iter().map(|v| -v).collect();
            let flat = grid.spec().flat(&mirror.iter().zip(grid.spec().lo()).map(|(v, l)| ((v - l) / 0.1).round() as i64).collect::<Vec<_>>()).unwrap();
            let j = grid.ordinal(flat).expect("band is symmetric");
            if j < grid.n_core() {
                assert!((dr[i] + dd[j]).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn diagonal_matrices() {
    let grid = circle_band(0.1, 2.0).unwrap();
    let n = grid.len();
    let ones = diag_matrix(&grid, &vec![1.0; n]).unwrap();
    let w = grid.sample(smooth);
    assert_eq!(ones.matvec(&w), w);
    let a: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
    let b: Vec<f64> = (0..n).map(|i| 0.5 - i as f64 / n as f64).collect();
    let prod = diag_matrix(&grid, &a).unwrap().matmul(&diag_matrix(&grid, &b).unwrap());
    for i in 0..n {
        assert!((prod.get(i, i) - a[i] * b[i]).abs() < 1e-15 * a[i].abs());
    }
    assert!(diag_matrix(&grid, &[1.0]).is_err());
}

#[test]
fn index_dump_round_trip() {
    let grid = circle_band(0.1, 2.0).unwrap();
    let mut bytes = Vec::new();
    grid.write_index_dump(&mut bytes).unwrap();
    assert_eq!(&bytes[..8], b"CPMBAND\0");
    let dump = read_index_dump(bytes.as_slice()).unwrap();
    assert_eq!(dump.indices, grid.flat_indices());
    assert_eq!(dump.n_core, grid.n_core());
    assert_eq!(dump.spec.counts(), grid.spec().counts());
    assert!(read_index_dump(&bytes[..20]).is_err());
}
