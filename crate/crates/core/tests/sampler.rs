mod common;

use common::{center, max_abs_diff, sample_oracle, tps_oracle, tps_oracle_eval, Xorshift};
use proptest::prelude::*;
use warpkit::sampler::{bilinear_sample, build_flow, warp_image};
use warpkit::synth;
use warpkit::tps::{fit, ControlPointSet};
use warpkit::{FlowField, Image};

#[test]
fn translation_flow_is_shifted_grid() {
    let pts = synth::grid_points(9);
    let t = [0.1, -0.2];
    let params = fit(&ControlPointSet::new(pts, vec![t; 9]).unwrap(), 0.0).unwrap();
    let flow = build_flow(&params, 5, 7);
    for r in 0..5 {
        for c in 0..7 {
            let f = flow.get(r, c);
            assert!((f[0] - (center(c, 7) - t[0])).abs() < 1e-10);
            assert!((f[1] - (center(r, 5) - t[1])).abs() < 1e-10);
        }
    }
}

#[test]
fn build_flow_matches_per_pixel_oracle() {
    let mut rng = Xorshift(9);
    let c = common::random_control(&mut rng, 12, 0.1, 0.05);
    let params = fit(&c, 0.0).unwrap();
    let oracle = tps_oracle(&c, 0.0);
    let flow = build_flow(&params, 8, 8);
    for r in 0..8 {
        for col in 0..8 {
            let e = tps_oracle_eval(&c, &oracle, [center(col, 8), center(r, 8)]);
            let f = flow.get(r, col);
            assert!((f[0] - e[0]).abs() < 1e-9 && (f[1] - e[1]).abs() < 1e-9);
        }
    }
}

#[test]
fn sampling_matches_textbook_bilinear() {
    let mut rng = Xorshift(3);
    let img = Image::from_fn(9, 11, 3, |_, _, _| rng.next_f64());
    let flow = FlowField::from_fn(9, 11, |_, _, q| [q[0] + rng.range(-0.4, 0.4), q[1] + rng.range(-0.4, 0.4)]);
    let out = bilinear_sample(&img, &flow).unwrap();
    assert!(max_abs_diff(out.data(), sample_oracle(&img, &flow).data()) < 1e-12);
}

#[test]
fn one_pixel_shift_by_flow() {
    let img = Image::from_fn(6, 8, 2, |r, c, ch| (r * 100 + c * 10 + ch) as f64 / 1000.0);
    let step = 2.0 / 8.0;
    let flow = FlowField::from_fn(6, 8, |_, _, q| [q[0] - step, q[1]]);
    let out = bilinear_sample(&img, &flow).unwrap();
    let expected = sample_oracle(&img, &flow);
    assert!(max_abs_diff(out.data(), expected.data()) < 1e-12);
    for r in 0..6 {
        assert_eq!(out.get(r, 0, 0), img.get(r, 0, 0));
        assert!((out.get(r, 5, 1) - img.get(r, 4, 1)).abs() < 1e-12);
    }
}

#[test]
fn zero_displacement_is_exact_copy_for_any_alpha() {
    let img = synth::smooth_image(&mut synth::seeded_rng(2), 16, 20, 3, 2.0);
    let c = ControlPointSet::pinned(synth::grid_points(16)).unwrap();
    for alpha in [0.0, 0.5, 1.0, 2.0, -3.0] {
        assert_eq!(warp_image(&img, &c, alpha, 1e-6).unwrap(), img);
    }
    let moving = synth::random_control(&mut synth::seeded_rng(2), 16, 0.1, 0.2);
    assert_eq!(warp_image(&img, &moving, 0.0, 1e-6).unwrap(), img);
}

#[test]
fn alpha_scaling_is_bit_identical_to_prescaled_displacements() {
    let img = synth::smooth_image(&mut synth::seeded_rng(5), 24, 24, 1, 2.0);
    let c = synth::random_control(&mut synth::seeded_rng(6), 16, 0.1, 0.2);
    for alpha in [0.5, 1.5, 2.0] {
        let pre = c.scaled(alpha);
        assert_eq!(
            warp_image(&img, &c, alpha, 1e-6).unwrap(),
            warp_image(&img, &pre, 1.0, 1e-6).unwrap()
        );
    }
}

#[test]
fn ramp_with_one_pushed_point_matches_composed_oracle() {
    let n = 32;
    let img = Image::from_fn(n, n, 1, |r, c, _| (c as f64 + 0.5 * r as f64) / (1.5 * n as f64));
    let mut points = vec![
        [-0.9, -0.9],
        [0.0, -0.9],
        [0.9, -0.9],
        [-0.9, 0.0],
        [0.9, 0.0],
        [-0.9, 0.9],
        [0.0, 0.9],
        [0.9, 0.9],
    ];
    let mut disp = vec![[0.0, 0.0]; 8];
    points.push([0.0, 0.0]);
    disp.push([0.2, 0.0]);
    let c = ControlPointSet::new(points, disp).unwrap();
    let out = warp_image(&img, &c, 1.0, 0.0).unwrap();

    let solution = tps_oracle(&c, 0.0);
    let flow = FlowField::from_fn(n, n, |_, _, q| tps_oracle_eval(&c, &solution, q));
    let expected = sample_oracle(&img, &flow);
    assert!(max_abs_diff(out.data(), expected.data()) < 1e-9);
    // the pushed center now shows what used to sit 0.2 NDC to its left
    let mid = n / 2;
    assert!(out.get(mid, mid, 0) < img.get(mid, mid, 0));
}

#[test]
fn repeated_warps_are_bit_identical() {
    let img = synth::smooth_image(&mut synth::seeded_rng(8), 20, 20, 3, 2.0);
    let c = synth::random_control(&mut synth::seeded_rng(8), 16, 0.1, 0.2);
    let a = warp_image(&img, &c, 1.3, 1e-6).unwrap();
    let b = warp_image(&img, &c, 1.3, 1e-6).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #[test]
    fn samples_stay_within_their_four_neighbours(
        pixels in prop::collection::vec(0.0f64..1.0, 5 * 6),
        u in -1.5f64..1.5,
        v in -1.5f64..1.5,
    ) {
        let img = Image::new(5, 6, 1, pixels).unwrap();
        let flow = FlowField::from_fn(5, 6, |_, _, _| [u, v]);
        let out = bilinear_sample(&img, &flow).unwrap();
        let x = (((u + 1.0) * 6.0 / 2.0 - 0.5).clamp(0.0, 5.0)).floor() as usize;
        let y = (((v + 1.0) * 5.0 / 2.0 - 0.5).clamp(0.0, 4.0)).floor() as usize;
        let cells: Vec<f64> = [(y, x), (y, (x + 1).min(5)), ((y + 1).min(4), x), ((y + 1).min(4), (x + 1).min(5))]
            .iter()
            .map(|&(r, c)| img.get(r, c, 0))
            .collect();
        let lo = cells.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = cells.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let s = out.get(0, 0, 0);
        prop_assert!(s >= lo - 1e-15 && s <= hi + 1e-15);
    }
}
