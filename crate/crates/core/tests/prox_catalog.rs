use dcprox::linalg::Matrix;
use dcprox::prox::{NumericProxOptions, ProxSpec};
use dcprox::SmoothOracle;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Brute-force minimizer of `psi(x) + (x - v)^2 / (2t)`: coarse grid, then
/// a 1e-4 grid around the coarse winner.
fn grid_argmin(psi: &dyn Fn(f64) -> f64, t: f64, v: f64, lo: f64, hi: f64) -> f64 {
    let obj = |x: f64| psi(x) + (x - v) * (x - v) / (2.0 * t);
    let scan = |a: f64, b: f64, h: f64| {
        let n = ((b - a) / h).round() as usize;
        (0..=n)
            .map(|i| (a + h * i as f64).min(b))
            .fold((f64::INFINITY, a), |best, x| {
                let f = obj(x);
                if f < best.0 {
                    (f, x)
                } else {
                    best
                }
            })
            .1
    };
    let c = scan(lo, hi, 1e-2);
    scan((c - 0.05).max(lo), (c + 0.05).min(hi), 1e-4)
}

fn scalar_catalog() -> Vec<(ProxSpec, Box<dyn Fn(f64) -> f64>, f64, f64)> {
    vec![
        (ProxSpec::l1(0.7).unwrap(), Box::new(|x: f64| 0.7 * x.abs()), -12.0, 12.0),
        (ProxSpec::l2_squared(1.3).unwrap(), Box::new(|x: f64| 1.3 * x * x), -12.0, 12.0),
        (
            ProxSpec::box_indicator(vec![-0.5], vec![2.0]).unwrap(),
            Box::new(|_: f64| 0.0),
            -0.5,
            2.0,
        ),
        (ProxSpec::ball_indicator(1.5).unwrap(), Box::new(|_: f64| 0.0), -1.5, 1.5),
        (
            ProxSpec::quadratic(Matrix::diag(&[2.0]), vec![-1.0]).unwrap(),
            Box::new(|x: f64| x * x - x),
            -12.0,
            12.0,
        ),
        (ProxSpec::separable_power(1.0, 4.0).unwrap(), Box::new(|x: f64| x.powi(4)), -12.0, 12.0),
        (ProxSpec::separable_power(0.5, 6.0).unwrap(), Box::new(|x: f64| 0.5 * x.powi(6)), -12.0, 12.0),
    ]
}

#[test]
fn scalar_proxes_match_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (spec, psi, lo, hi) in scalar_catalog() {
        for _ in 0..60 {
            let t = rng.random_range(0.05..3.0);
            let v = rng.random_range(-5.0..5.0);
            let y = spec.prox(t, &[v]).unwrap().y[0];
            let g = grid_argmin(psi.as_ref(), t, v, lo, hi);
            assert!((y - g).abs() <= 2e-4, "{} t={t} v={v}: {y} vs {g}", spec.kind_name());
        }
    }
}

#[test]
fn optimality_residuals_are_small() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let q = Matrix::from_rows(&[vec![2.0, 0.5, 0.0], vec![0.5, 1.0, 0.2], vec![0.0, 0.2, 0.5]]).unwrap();
    let smooth = SmoothOracle::new(|x| x.iter().map(|v| v.powi(4) + v * v).sum(), |x| {
        x.iter().map(|v| 4.0 * v.powi(3) + 2.0 * v).collect()
    });
    let kinds = vec![
        ProxSpec::Zero,
        ProxSpec::l1(0.3).unwrap(),
        ProxSpec::l2_squared(2.0).unwrap(),
        ProxSpec::box_indicator(vec![-1.0, 0.0, -2.0], vec![1.0, 0.5, 3.0]).unwrap(),
        ProxSpec::ball_indicator(0.8).unwrap(),
        ProxSpec::quadratic(q, vec![0.1, -0.2, 0.3]).unwrap(),
        ProxSpec::separable_power(1.0, 4.0).unwrap(),
        ProxSpec::Numeric {
            smooth,
            opts: NumericProxOptions::default(),
        },
    ];
    for spec in &kinds {
        for _ in 0..125 {
            let t = rng.random_range(0.05..2.0);
            let v: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
            let r = spec.prox(t, &v).unwrap();
            let res = spec.optimality_residual(t, &v, &r.y).unwrap();
            assert!(res <= 1e-8, "{} residual {res}", spec.kind_name());
        }
    }
}

proptest! {
    #[test]
    fn prox_is_firmly_nonexpansive(t in 0.05f64..3.0, a in -4.0f64..4.0, b in -4.0f64..4.0, c in -4.0f64..4.0, d in -4.0f64..4.0) {
        for spec in [ProxSpec::l1(0.5).unwrap(), ProxSpec::ball_indicator(1.0).unwrap(), ProxSpec::separable_power(1.0, 4.0).unwrap()] {
            let u = [a, b];
            let w = [c, d];
            let pu = spec.prox(t, &u).unwrap().y;
            let pw = spec.prox(t, &w).unwrap().y;
            let diff_p = [pu[0] - pw[0], pu[1] - pw[1]];
            let diff = [u[0] - w[0], u[1] - w[1]];
            let lhs = diff_p[0] * diff_p[0] + diff_p[1] * diff_p[1];
            let rhs = diff_p[0] * diff[0] + diff_p[1] * diff[1];
            prop_assert!(lhs <= rhs + 1e-9);
        }
    }

    #[test]
    fn prox_value_beats_any_other_point(t in 0.05f64..3.0, v in -4.0f64..4.0, z in -4.0f64..4.0) {
        let spec = ProxSpec::separable_power(1.0, 4.0).unwrap();
        let y = spec.prox(t, &[v]).unwrap().y[0];
        let obj = |x: f64| x.powi(4) + (x - v) * (x - v) / (2.0 * t);
        prop_assert!(obj(y) <= obj(z) + 1e-12);
    }
}
