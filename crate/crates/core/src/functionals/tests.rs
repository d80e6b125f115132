use std::f64::consts::{PI, TAU};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::curves::{dot, random_perturbation, sample_fourier, FourierCurve};
use crate::forms::FormEntry;

fn circle(n: usize, samples: usize) -> DiscreteCurve {
    let mut center = vec![0.0; n];
    center[0] = 0.0;
    sample_fourier(&FourierCurve::circle(n, center, 1.0).unwrap(), samples).unwrap()
}

fn double(samples: usize) -> DiscreteCurve {
    sample_fourier(&FourierCurve::double_curve(), samples).unwrap()
}

fn plane(i: usize, j: usize, n: usize) -> AxisPlane {
    AxisPlane::new(i, j, n).unwrap()
}

fn double_form() -> ConstantTwoForm {
    let s = 5f64.sqrt();
    ConstantTwoForm::from_entries(
        4,
        &[
            FormEntry {
                i: 0,
                j: 1,
                coeff: 1.0 / s,
            },
            FormEntry {
                i: 2,
                j: 3,
                coeff: 2.0 / s,
            },
        ],
    )
    .unwrap()
}

/// Smooth random closed curve: each coordinate a random trigonometric
/// polynomial of degree `degree`.
fn random_trig_curve(
    rng: &mut ChaCha8Rng,
    n: usize,
    degree: usize,
    samples: usize,
) -> DiscreteCurve {
    let coeffs: Vec<Vec<(f64, f64)>> = (0..n)
        .map(|_| {
            (0..degree)
                .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect()
        })
        .collect();
    let offset: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    let coords = (0..samples)
        .flat_map(|k| {
            let s = TAU * k as f64 / samples as f64;
            (0..n)
                .map(|d| {
                    offset[d]
                        + coeffs[d]
                            .iter()
                            .enumerate()
                            .map(|(m, (a, b))| {
                                let f = (m + 1) as f64;
                                a * (f * s).cos() + b * (f * s).sin()
                            })
                            .sum::<f64>()
                })
                .collect::<Vec<_>>()
        })
        .collect();
    DiscreteCurve::new(n, coords).unwrap()
}

/// Central-difference gradient of a scalar curve functional.
fn fd_gradient(curve: &DiscreteCurve, h: f64, f: impl Fn(&DiscreteCurve) -> f64) -> Vec<f64> {
    let x = curve.coords().to_vec();
    (0..x.len())
        .map(|idx| {
            let mut plus = x.clone();
            plus[idx] += h;
            let mut minus = x.clone();
            minus[idx] -= h;
            let fp = f(&DiscreteCurve::new(curve.dim(), plus).unwrap());
            let fm = f(&DiscreteCurve::new(curve.dim(), minus).unwrap());
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn length_examples() {
    let sq = DiscreteCurve::new(2, vec![0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0]).unwrap();
    assert_eq!(length(&sq), 4.0);
    let c = circle(2, 512);
    let inscribed = 2.0 * 512.0 * (PI / 512.0).sin();
    assert!((length(&c) - inscribed).abs() < 1e-12);
    assert!((length(&c) - TAU).abs() / TAU < 1e-4);
    let d = length(&double(512));
    assert!((d - TAU * 5f64.sqrt()).abs() / (TAU * 5f64.sqrt()) < 1e-4);
}

#[test]
fn length_gradient_matches_finite_differences() {
    let c = circle(2, 24);
    let g = length_gradient(&c);
    let fd = fd_gradient(&c, 1e-5, length);
    assert!(max_abs_diff(g.as_slice(), &fd) <= 1e-8);
    // Regular polygon: radial, uniform magnitude 2 sin(π/N).
    for k in 0..24 {
        let gk = g.get(k);
        let x = c.vertex(k);
        let cross = gk[0] * x[1] - gk[1] * x[0];
        assert!(cross.abs() < 1e-14);
        assert!((norm(gk) - 2.0 * (PI / 24.0).sin()).abs() < 1e-14);
        assert!(gk[0] * x[0] + gk[1] * x[1] > 0.0);
    }
}

#[test]
fn collinear_vertex_has_zero_gradient() {
    let c = DiscreteCurve::new(2, vec![0.0, 0.0, 1.0, 0.0, 2.0, 0.0, 1.0, 1.0]).unwrap();
    let g = length_gradient(&c);
    assert_eq!(g.get(1), &[0.0, 0.0]);
}

#[test]
fn directional_derivative_is_second_order_accurate() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let c = random_trig_curve(&mut rng, 3, 3, 40);
    let v =
        VertexField::from_flat(3, (0..120).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let exact = length_gradient(&c).dot(&v);
    let mut errs = vec![];
    for eps in [1e-2, 5e-3] {
        let fd = (length(&c.displaced(&v, eps).unwrap()) - length(&c.displaced(&v, -eps).unwrap()))
            / (2.0 * eps);
        errs.push((fd - exact).abs());
    }
    let ratio = errs[0] / errs[1];
    assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn double_curve_shoelace_values() {
    let n_s = 512usize;
    let mv = multi_volume(&double(n_s));
    let h = TAU / n_s as f64;
    assert!(mv.get(plane(0, 3, 4)).abs() < 1e-12);
    assert!((mv.get(plane(0, 1, 4)) - 0.5 * n_s as f64 * h.sin()).abs() < 1e-12);
    assert!((mv.get(plane(2, 3, 4)) - 0.5 * n_s as f64 * (2.0 * h).sin()).abs() < 1e-12);
    for (i, j) in [(0, 2), (1, 2), (1, 3)] {
        assert!(mv.get(plane(i, j, 4)).abs() < 1e-12);
    }
}

/// Periodic trapezoid rule with the analytic derivative: the independent
/// route to the enclosed areas of a Fourier curve.
fn quadrature_area(curve: &FourierCurve, i: usize, j: usize, samples: usize) -> f64 {
    let h = TAU / samples as f64;
    0.5 * h
        * (0..samples)
            .map(|k| {
                let s = h * k as f64;
                let x = curve.point(s);
                let dx = curve.derivative(s, 1);
                x[i] * dx[j] - x[j] * dx[i]
            })
            .sum::<f64>()
}

#[test]
fn spectral_volume_is_exact_on_trig_curves() {
    let dc = FourierCurve::double_curve();
    for (i, j, want) in [
        (0, 1, PI),
        (2, 3, TAU),
        (0, 2, 0.0),
        (0, 3, 0.0),
        (1, 2, 0.0),
        (1, 3, 0.0),
    ] {
        assert!((quadrature_area(&dc, i, j, 4096) - want).abs() < 1e-12);
    }
    for n_s in [8usize, 16, 512] {
        let mv = spectral_multi_volume(&double(n_s));
        for (i, j) in [(0, 1), (2, 3), (0, 2), (0, 3), (1, 2), (1, 3)] {
            let want = quadrature_area(&dc, i, j, 4096);
            assert!(
                (mv.get(plane(i, j, 4)) - want).abs() < 1e-12,
                "N={n_s} ({i},{j})"
            );
        }
    }
}

#[test]
fn orientation_reversal_negates_volume() {
    let c = circle(2, 512);
    let v = plane_volume(&c, plane(0, 1, 2));
    assert!((v - 256.0 * (TAU / 512.0).sin()).abs() < 1e-12);
    assert!((v - PI).abs() < 1e-4);
    let r = multi_volume(&c.reversed());
    assert!((r.get(plane(0, 1, 2)) + v).abs() < 1e-13);
    assert!((r.signed(1, 0) - v).abs() < 1e-13);
}

#[test]
fn jacobian_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let c = random_trig_curve(&mut rng, 4, 3, 30);
    for (p, g) in multi_volume_jacobian(&c) {
        let fd = fd_gradient(&c, 1e-5, |x| plane_volume(x, p));
        assert!(max_abs_diff(g.as_slice(), &fd) <= 1e-8, "plane {p}");
    }
}

#[test]
fn circle_jacobian_has_uniform_norm_and_kills_translations() {
    let c = circle(2, 64);
    let g = plane_volume_gradient(&c, plane(0, 1, 2));
    let n0 = norm(g.get(0));
    for k in 0..64 {
        assert!((norm(g.get(k)) - n0).abs() < 1e-14);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let d = random_trig_curve(&mut rng, 4, 2, 20);
    let shift = VertexField::constant(&[0.3, -1.0, 2.0, 0.7], 20);
    for (_, g) in multi_volume_jacobian(&d) {
        assert!(g.dot(&shift).abs() < 1e-13);
    }
}

#[test]
fn omega_volume_examples() {
    let c = circle(2, 4096);
    let unit = ConstantTwoForm::axis(0, 1, 2).unwrap();
    assert!((omega_volume(&c, &unit).unwrap() - PI).abs() < 1e-5);
    assert_eq!(omega_volume(&c, &ConstantTwoForm::zero(2)).unwrap(), 0.0);
    let d = double(512);
    let mv = multi_volume(&d);
    let want = (mv.get(plane(0, 1, 4)) + 2.0 * mv.get(plane(2, 3, 4))) / 5f64.sqrt();
    assert!((omega_volume(&d, &double_form()).unwrap() - want).abs() < 1e-12);
    assert!((want - PI * 5f64.sqrt()).abs() < 1e-3);
    assert!(matches!(
        omega_volume(&c, &double_form()),
        Err(Error::DimensionMismatch { .. })
    ));
}

#[test]
fn alternative_primitive_gives_same_volume() {
    // ∮ x_i dx_j with the trapezoid rule on each edge.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let c = random_trig_curve(&mut rng, 3, 4, 50);
    let count = c.num_vertices();
    for p in AxisPlane::all(3) {
        let (i, j) = (p.i(), p.j());
        let alt: f64 = (0..count)
            .map(|k| {
                let a = c.vertex(k);
                let b = c.vertex((k + 1) % count);
                0.5 * (a[i] + b[i]) * (b[j] - a[j])
            })
            .sum();
        assert!((alt - plane_volume(&c, p)).abs() < 1e-12);
    }
}

#[test]
fn omega_gradient_is_weighted_sum() {
    let d = double(32);
    let g = omega_volume_gradient(&d, &double_form()).unwrap();
    let fd = fd_gradient(&d, 1e-5, |x| omega_volume(x, &double_form()).unwrap());
    assert!(max_abs_diff(g.as_slice(), &fd) < 1e-9);
}

#[test]
fn stationarity_fit_recovers_circle_multiplier() {
    let c = circle(2, 512);
    let fit = stationarity_fit(&c, None).unwrap();
    assert!((fit.form.coeff(plane(0, 1, 2)) - 1.0).abs() < 1e-3);
    assert!(fit.residual <= 1e-3);
    assert!(!fit.degenerate);
}

#[test]
fn stationarity_fit_recovers_double_curve_form() {
    let d = double(512);
    let fit = stationarity_fit(&d, None).unwrap();
    let s5 = 5f64.sqrt();
    assert!((fit.form.coeff(plane(0, 1, 4)) - 1.0 / s5).abs() < 1e-3);
    assert!((fit.form.coeff(plane(2, 3, 4)) - 2.0 / s5).abs() < 1e-3);
    for (i, j) in [(0, 2), (0, 3), (1, 2), (1, 3)] {
        assert!(fit.form.coeff(plane(i, j, 4)).abs() < 1e-9);
    }
    assert!(fit.residual <= 1e-3);
}

#[test]
fn perturbed_circle_is_not_stationary() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let modes: Vec<(f64, f64)> = (0..4)
        .map(|_| (rng.random_range(-0.15..0.15), rng.random_range(-0.15..0.15)))
        .collect();
    for samples in [128usize, 256, 512] {
        let coords = (0..samples)
            .flat_map(|k| {
                let t = TAU * k as f64 / samples as f64;
                let r = 1.0
                    + modes
                        .iter()
                        .enumerate()
                        .map(|(m, (a, b))| {
                            a * ((m + 2) as f64 * t).cos() + b * ((m + 2) as f64 * t).sin()
                        })
                        .sum::<f64>();
                [r * t.cos(), r * t.sin()]
            })
            .collect();
        let c = DiscreteCurve::new(2, coords).unwrap();
        let fit = stationarity_fit(&c, None).unwrap();
        assert!(
            fit.residual > 0.05,
            "N={samples}: residual {}",
            fit.residual
        );
    }
}

#[test]
fn fit_flags_degenerate_planes() {
    // Circle in the (0,1) plane of R^4: the (2,3) gradient vanishes.
    let c = circle(4, 32);
    let fit = stationarity_fit(&c, None).unwrap();
    assert!(fit.degenerate);
    assert!(fit.residual < 1e-12);
    assert!((fit.form.coeff(plane(0, 1, 4)) - 1.0 / (PI / 32.0).cos()).abs() < 1e-9);
    assert_eq!(fit.form.coeff(plane(2, 3, 4)), 0.0);
}

#[test]
fn bracket_of_flat_circle_closes() {
    let mut widths = vec![];
    for samples in [64usize, 512] {
        let c = circle(3, samples);
        let b = spanning_volume_bracket(&c);
        assert!(b.lower <= b.upper + 1e-12);
        widths.push(b.width());
        if samples == 512 {
            assert!((b.lower - PI).abs() < 1e-4 && (b.upper - PI).abs() < 1e-4);
        }
    }
    assert!(widths.iter().all(|w| w.abs() < 1e-12));
}

#[test]
fn bracket_of_double_curve() {
    let d = double(512);
    let b = spanning_volume_bracket(&d);
    let mv = multi_volume(&d);
    assert!(b.lower >= mv.get(plane(2, 3, 4)));
    assert!(b.lower >= TAU * (1.0 - 1e-3));
    // Cone from the origin: ½∫|C ∧ C'| ds = π√10 by quadrature, since
    // |C|² = 2, |C'|² = 5 and C·C' = 0.
    let quad: f64 = {
        let dc = FourierCurve::double_curve();
        let m = 4096;
        let h = TAU / m as f64;
        (0..m)
            .map(|k| {
                let s = h * k as f64;
                let x = dc.point(s);
                let v = dc.derivative(s, 1);
                let (xx, vv, xv) = (dot(&x, &x), dot(&v, &v), dot(&x, &v));
                0.5 * h * (xx * vv - xv * xv).sqrt()
            })
            .sum()
    };
    assert!((quad - PI * 10f64.sqrt()).abs() < 1e-10);
    assert!(b.upper <= quad + 1e-9);
    assert!(b.upper >= b.lower);
}

#[test]
fn bracket_is_translation_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let c = random_trig_curve(&mut rng, 3, 2, 40);
    let b = spanning_volume_bracket(&c);
    let t = spanning_volume_bracket(&c.translated(&[3.0, -7.0, 0.5]).unwrap());
    assert!((b.lower - t.lower).abs() < 1e-11);
    assert!((b.upper - t.upper).abs() < 1e-11);
}

#[test]
fn h_zero_examples() {
    let c = circle(2, 512);
    assert!((h_zero(&c, PI).unwrap() - 1.0).abs() < 1e-4);
    let r = sample_fourier(&FourierCurve::circle(2, vec![0.0, 0.0], 2.5).unwrap(), 512).unwrap();
    assert!((h_zero(&r, PI * 6.25).unwrap() - 0.4).abs() < 1e-4);
    let d = double(512);
    let h0 = h_zero(&d, PI * 5f64.sqrt()).unwrap();
    assert!((h0 - 1.0).abs() < 1e-4);
    assert!((h0 - 17f64.sqrt() / 5.0).abs() > 0.1);
    assert!(h_zero(&c, 0.0).is_err());
    assert!(h_zero(&c, -1.0).is_err());
    let (lo, hi) = h_zero_range(&c, &spanning_volume_bracket(&c)).unwrap();
    assert!(lo <= hi);
}

#[test]
fn multi_volume_json_uses_plane_keys() {
    let mv = multi_volume(&double(16));
    let v: serde_json::Value = serde_json::to_value(&mv).unwrap();
    let obj = v.as_object().unwrap();
    assert_eq!(obj.len(), 6);
    assert!(obj.contains_key("0,1") && obj.contains_key("2,3"));
    let map: BTreeMap<String, f64> = serde_json::from_value(v).unwrap();
    assert_eq!(MultiVolume::from_json_map(4, &map).unwrap(), mv);
    let b = serde_json::to_value(VolumeBracket {
        lower: 1.0,
        upper: 2.0,
    })
    .unwrap();
    assert_eq!(b, serde_json::json!({"lower": 1.0, "upper": 2.0}));
}

#[test]
fn squash_map_keeps_omega_volume_and_shortens() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let form = ConstantTwoForm::axis(0, 1, 4).unwrap();
    for _ in 0..20 {
        let c = random_trig_curve(&mut rng, 4, 3, 64);
        let lambda = rng.random_range(0.1..0.95);
        let squashed = DiscreteCurve::new(
            4,
            c.coords()
                .chunks(4)
                .flat_map(|p| [p[0], p[1], lambda * p[2], lambda * p[3]])
                .collect(),
        )
        .unwrap();
        assert_eq!(
            omega_volume(&c, &form).unwrap(),
            omega_volume(&squashed, &form).unwrap()
        );
        assert!(length(&squashed) < length(&c));
    }
    // Constant (x2, x3): the map is a translation, length unchanged.
    let flat = sample_fourier(
        &FourierCurve::circle(4, vec![0.0, 0.0, 1.0, 2.0], 1.0).unwrap(),
        32,
    )
    .unwrap();
    let squashed = DiscreteCurve::new(
        4,
        flat.coords()
            .chunks(4)
            .flat_map(|p| [p[0], p[1], 0.5 * p[2], 0.5 * p[3]])
            .collect(),
    )
    .unwrap();
    assert!((length(&flat) - length(&squashed)).abs() < 1e-14);
}

fn random_rotation(rng: &mut ChaCha8Rng, n: usize) -> nalgebra::DMatrix<f64> {
    let m = nalgebra::DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let q = m.qr().q();
    if q.determinant() < 0.0 {
        let mut q = q;
        q.column_mut(0).neg_mut();
        q
    } else {
        q
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn translation_invariance(seed in any::<u64>(), n in 2usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = random_trig_curve(&mut rng, n, 3, 48);
        let offset: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let t = c.translated(&offset).unwrap();
        prop_assert!((length(&c) - length(&t)).abs() < 1e-12 * length(&c));
        let (a, b) = (multi_volume(&c), multi_volume(&t));
        for (p, v) in a.iter() {
            prop_assert!((v - b.get(p)).abs() < 1e-11);
        }
    }

    #[test]
    fn scaling_laws(seed in any::<u64>(), lambda in 0.1f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = random_trig_curve(&mut rng, 3, 3, 48);
        let s = c.scaled(lambda).unwrap();
        prop_assert!((length(&s) - lambda * length(&c)).abs() < 1e-12 * length(&s));
        for (p, v) in multi_volume(&c).iter() {
            let vs = plane_volume(&s, p);
            prop_assert!((vs - lambda * lambda * v).abs() < 1e-12 * (1.0 + vs.abs()));
            if v.abs() > 1e-6 {
                let r0 = length(&c).powi(2) / v;
                let r1 = length(&s).powi(2) / vs;
                prop_assert!((r0 - r1).abs() < 1e-10 * r0.abs());
            }
        }
    }

    #[test]
    fn rotation_equivariance(seed in any::<u64>(), n in 2usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = random_trig_curve(&mut rng, n, 3, 48);
        let r = random_rotation(&mut rng, n);
        let rotated = multi_volume(&c.transformed(&r).unwrap()).to_skew_matrix();
        let pushed = &r * multi_volume(&c).to_skew_matrix() * r.transpose();
        prop_assert!((rotated - pushed).amax() < 1e-10);
    }

    #[test]
    fn projection_isoperimetric_inequality(seed in any::<u64>(), n in 2usize..6, degree in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = random_trig_curve(&mut rng, n, degree, 64);
        let l2 = length(&c).powi(2);
        for (_, v) in multi_volume(&c).iter() {
            prop_assert!(4.0 * PI * v.abs() <= l2);
        }
    }

    #[test]
    fn perturbation_keeps_volume_close(seed in any::<u64>()) {
        let d = double(64);
        let p = random_perturbation(&d, 1e-6, seed).unwrap();
        prop_assert!((plane_volume(&p, plane(0, 1, 4)) - plane_volume(&d, plane(0, 1, 4))).abs() < 1e-4);
    }
}
