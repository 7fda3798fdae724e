use nalgebra::DMatrix;
use orffkit::kernels::KernelSpec;
use orffkit::learn::SimplexCode;
use orffkit::linalg::sym_spectral_norm;
use orffkit::workbench::{
    curl_field, div_field, field_potential, jaakkola_sigma, run_variance, synth_dec, synth_fields,
    DecConfig, SweepResult, VarianceConfig,
};
use proptest::prelude::*;

const H: f64 = 1e-3;

fn grid(n: usize) -> impl Iterator<Item = [f64; 2]> {
    let step = 3.6 / (n - 1) as f64;
    (0..n).flat_map(move |i| (0..n).map(move |j| [-1.8 + i as f64 * step, -1.8 + j as f64 * step]))
}

#[test]
fn curl_field_is_the_potential_gradient() {
    for x in grid(50) {
        let g = curl_field(x);
        let dx =
            (field_potential([x[0] + H, x[1]]) - field_potential([x[0] - H, x[1]])) / (2.0 * H);
        let dy =
            (field_potential([x[0], x[1] + H]) - field_potential([x[0], x[1] - H])) / (2.0 * H);
        assert!(
            (g[0] - dx).abs() < 1e-4 && (g[1] - dy).abs() < 1e-4,
            "at {x:?}"
        );
    }
}

fn worst_discrete_curl_div(h: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for x in grid(50) {
        let c = curl_field;
        let curl = (c([x[0], x[1] + h])[0] - c([x[0], x[1] - h])[0] - c([x[0] + h, x[1]])[1]
            + c([x[0] - h, x[1]])[1])
            / (2.0 * h);
        let v = div_field;
        let div = (v([x[0] + h, x[1]])[0] - v([x[0] - h, x[1]])[0] + v([x[0], x[1] + h])[1]
            - v([x[0], x[1] - h])[1])
            / (2.0 * h);
        worst = worst.max(curl.abs()).max(div.abs());
    }
    worst
}

#[test]
fn discrete_curl_and_divergence_vanish() {
    let coarse = worst_discrete_curl_div(H);
    let fine = worst_discrete_curl_div(H / 2.0);
    assert!(coarse < 1e-4, "worst {coarse}");
    // Pure O(h²) truncation: halving h divides the residual by about four.
    let ratio = coarse / fine;
    assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn field_datasets_share_inputs() {
    let (curl, div) = synth_fields(40, 0.0, 7).unwrap();
    assert_eq!(curl.x(), div.x());
    assert!(curl.x().iter().all(|v| v.abs() <= 2.0));
    for i in 0..40 {
        let g = curl_field([curl.x()[(i, 0)], curl.x()[(i, 1)]]);
        assert_eq!([curl.y()[(i, 0)], curl.y()[(i, 1)]], g);
        assert_eq!([div.y()[(i, 0)], div.y()[(i, 1)]], [-g[1], g[0]]);
    }
    let (again, _) = synth_fields(40, 0.0, 7).unwrap();
    assert_eq!(again.y(), curl.y());
}

#[test]
fn dec_data_lives_in_the_coupling_range() {
    let (data, truth) = synth_dec(&DecConfig::new(60, 300, false, 2)).unwrap();
    assert_eq!((data.d(), data.p()), (20, 20));
    let a = &truth.coupling;
    assert!((a - a.transpose()).amax() < 1e-14);
    assert!((sym_spectral_norm(a) - 1.0).abs() < 1e-12);
    // Rank one: A² = A for a unit-norm projector.
    assert!((a * a - a).amax() < 1e-12);
    let y = data.y();
    let resid = y - y * a;
    assert!(
        resid.norm() <= 1e-10 * y.norm().max(1.0),
        "{}",
        resid.norm()
    );

    let (again, _) = synth_dec(&DecConfig::new(60, 300, false, 2)).unwrap();
    assert_eq!(again.x(), data.x());
    assert_eq!(again.y(), data.y());
    let (noisy, truth) = synth_dec(&DecConfig::new(60, 300, true, 2)).unwrap();
    assert_eq!(noisy.x(), data.x());
    assert!(truth.noise_cov.is_some());
    assert!((noisy.y() - data.y()).amax() > 0.0);
}

#[test]
fn jaakkola_matches_brute_force_median() {
    let x = DMatrix::from_row_slice(4, 1, &[0.0, 1.0, 3.0, 7.0]);
    // Pairwise distances 1, 3, 7, 2, 6, 4: median of six is (3 + 4) / 2.
    assert!((jaakkola_sigma(&x).unwrap() - 3.5).abs() < 1e-12);
}

#[test]
fn variance_bound_dominates_the_estimate() {
    for spec in [
        KernelSpec::curl_free(3, 1.0).unwrap(),
        KernelSpec::div_free(3, 1.0).unwrap(),
        KernelSpec::decomposable(2, 0.7, DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]))
            .unwrap(),
    ] {
        let cfg = VarianceConfig {
            spec,
            deltas: 6,
            n_mc: 4000,
            radius: 1.5,
            seed: 1,
        };
        let out = run_variance(&cfg).unwrap();
        out.validate().unwrap();
        let emp = out.series("empirical_variance");
        let bound = out.series("bound");
        assert_eq!(emp.len(), 6);
        for ((r1, e), (r2, b)) in emp.iter().zip(&bound) {
            assert_eq!(r1, r2);
            // Monte-Carlo slack of a few percent.
            assert!(*e <= 1.05 * b + 1e-12, "‖δ‖ = {r1}: {e} > {b}");
        }
        let mut buf = Vec::new();
        out.write_csv(&mut buf).unwrap();
        assert_eq!(SweepResult::read_csv(buf.as_slice()).unwrap(), out);
    }
}

proptest! {
    #[test]
    fn simplex_codes_decode_their_own_rows(p in 2usize..12, label in 0usize..64) {
        let code = SimplexCode::new(p).unwrap();
        let label = label % code.num_classes();
        let enc = code.encode(&[label]).unwrap();
        prop_assert_eq!(code.decode(&enc).unwrap(), vec![label]);
        let c = code.codes();
        for i in 0..c.nrows() {
            prop_assert!((c.row(i).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dataset_split_partitions_rows(n in 2usize..80, frac in 0.1f64..0.9, seed in 0u64..1000) {
        let (data, _) = synth_fields(n, 0.1, seed).unwrap();
        if let Ok((a, b)) = data.split(frac, seed) {
            prop_assert_eq!(a.len() + b.len(), n);
            let mut rows: Vec<Vec<u64>> = a.x().row_iter().chain(b.x().row_iter())
                .map(|r| r.iter().map(|v| v.to_bits()).collect()).collect();
            let mut orig: Vec<Vec<u64>> = data.x().row_iter()
                .map(|r| r.iter().map(|v| v.to_bits()).collect()).collect();
            rows.sort();
            orig.sort();
            prop_assert_eq!(rows, orig);
        }
    }
}
