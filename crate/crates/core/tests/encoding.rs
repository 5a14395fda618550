use loadsel_core::encode::{
    encode_current, encode_wave, fit_pool_normalization, CurrentNode, CurrentProfile, WaveSpec,
    REFERENCE_DEPTHS,
};
use ndarray::Array2;
use proptest::prelude::*;

/// Trapezoid rule for `∫ u(x)² dx` written directly over the intervals.
fn trapezoid_energy(depths: &[f64], speeds: &[f64]) -> f64 {
    depths
        .windows(2)
        .zip(speeds.windows(2))
        .map(|(x, u)| 0.5 * (x[1] - x[0]) * (u[0] * u[0] + u[1] * u[1]))
        .sum()
}

fn profile(speeds: &[f64], angles: &[f64]) -> CurrentProfile {
    let nodes = REFERENCE_DEPTHS
        .iter()
        .zip(speeds.iter().zip(angles))
        .map(|(&depth, (&speed, &angle))| CurrentNode { depth, speed, angle })
        .collect();
    CurrentProfile::new(nodes).unwrap()
}

fn speeds() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..2.0, REFERENCE_DEPTHS.len())
}

fn angles() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..360.0, REFERENCE_DEPTHS.len())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn squared_norm_is_trapezoid_energy(u in speeds(), th in angles()) {
        let v = encode_current(&profile(&u, &th), &REFERENCE_DEPTHS).unwrap();
        let sq: f64 = v.iter().map(|x| x * x).sum();
        let expect = trapezoid_energy(&REFERENCE_DEPTHS, &u);
        prop_assert!((sq - expect).abs() <= 1e-10 * expect.max(1.0));
    }

    #[test]
    fn encoding_is_linear_in_speed(u in speeds(), th in angles(), a in 0.0f64..5.0) {
        let v = encode_current(&profile(&u, &th), &REFERENCE_DEPTHS).unwrap();
        let scaled: Vec<f64> = u.iter().map(|x| a * x).collect();
        let w = encode_current(&profile(&scaled, &th), &REFERENCE_DEPTHS).unwrap();
        for (x, y) in v.iter().zip(&w) {
            prop_assert!((a * x - y).abs() < 1e-12 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn reversing_the_current_negates_it(u in speeds(), th in angles()) {
        let v = encode_current(&profile(&u, &th), &REFERENCE_DEPTHS).unwrap();
        let turned: Vec<f64> = th.iter().map(|t| t + 180.0).collect();
        let w = encode_current(&profile(&u, &turned), &REFERENCE_DEPTHS).unwrap();
        for (x, y) in v.iter().zip(&w) {
            prop_assert!((x + y).abs() < 1e-12);
        }
    }

    #[test]
    fn normalized_pool_has_zero_mean_unit_std(
        rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 4), 2..40)
    ) {
        let m = rows.len();
        let raw = Array2::from_shape_vec((m, 4), rows.concat()).unwrap();
        let stats = fit_pool_normalization(raw.view()).unwrap();
        let z = stats.normalize(raw.view()).unwrap();
        for (j, col) in z.columns().into_iter().enumerate() {
            let mean = col.sum() / m as f64;
            prop_assert!(mean.abs() < 1e-9);
            if stats.std[j] > 1e-9 {
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m as f64;
                prop_assert!((var.sqrt() - 1.0).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn reference_wave() {
    let w = WaveSpec {
        height: 1.7,
        period: 4.0,
        azimuth: 180.0,
        alpha: 0.037856,
        gamma: 3.240175,
        sigma: 0.07,
    };
    let f = encode_wave(&w).unwrap();
    let expect = [-0.037856, 0.0, 0.07, 3.240175, std::f64::consts::FRAC_PI_2];
    for (a, b) in f.iter().zip(expect) {
        assert!((a - b).abs() < 1e-9, "{f:?}");
    }
}
