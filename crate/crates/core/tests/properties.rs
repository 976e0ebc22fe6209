use num_complex::Complex64;
use proptest::prelude::*;

use ctmqc::diagnostics::{read_observables, write_observables, ObservableRecord};
use ctmqc::dynamics::{electronic_rhs_ehrenfest, electronic_rhs_xf, Coeffs};
use ctmqc::energy::modified_bo_momentum;
use ctmqc::model::{adiabatic, diabatic, nacv_from_mixing_angle, ModelId};
use ctmqc::sampling::{sample_wigner, WavepacketSpec};

fn model() -> impl Strategy<Value = ModelId> {
    prop::sample::select(ModelId::ALL.to_vec())
}

fn coeffs() -> impl Strategy<Value = Coeffs> {
    (0.0..1.0f64, -3.2..3.2f64, -3.2..3.2f64).prop_map(|(p, a, b)| {
        [Complex64::from_polar(p.sqrt(), a), Complex64::from_polar((1.0 - p).sqrt(), b)]
    })
}

fn norm_rate(c: &Coeffs, k: &Coeffs) -> f64 {
    c.iter().zip(k).map(|(c, k)| 2.0 * (c.conj() * k).re).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn adiabatic_states_diagonalise_the_diabatic_matrix(m in model(), r in -15.0..15.0f64) {
        let d = diabatic(m, r);
        let a = adiabatic(m, r).unwrap();
        prop_assert!(a.e[0] < a.e[1]);
        let h = [[d.v11, d.v12], [d.v12, d.v22]];
        for s in 0..2 {
            let u = a.basis[s];
            let hu = [h[0][0] * u[0] + h[0][1] * u[1], h[1][0] * u[0] + h[1][1] * u[1]];
            prop_assert!((hu[0] - a.e[s] * u[0]).abs() < 1e-14);
            prop_assert!((hu[1] - a.e[s] * u[1]).abs() < 1e-14);
            prop_assert!((u[0] * u[0] + u[1] * u[1] - 1.0).abs() < 1e-14);
        }
        prop_assert!((a.basis[0][0] * a.basis[1][0] + a.basis[0][1] * a.basis[1][1]).abs() < 1e-14);
        prop_assert_eq!(a.nacv[0][1], -a.nacv[1][0]);
        let alt = nacv_from_mixing_angle(&d);
        prop_assert!((a.nacv[0][1] - alt).abs() <= 1e-9 * (1.0 + alt.abs()));
    }

    #[test]
    fn ehrenfest_rhs_preserves_norm(
        c in coeffs(), e0 in -0.1..0.1f64, e1 in -0.1..0.1f64, d in -50.0..50.0f64, v in -0.05..0.05f64,
    ) {
        let k = electronic_rhs_ehrenfest(&c, &[e0, e1], &[[0.0, d], [-d, 0.0]], v);
        prop_assert!(norm_rate(&c, &k).abs() < 1e-14 * (1.0 + (d * v).abs()));
    }

    #[test]
    fn xf_rhs_preserves_norm_and_moves_population_at_the_expected_rate(
        c in coeffs(), p in -10.0..10.0f64, f0 in -40.0..40.0f64, f1 in -40.0..40.0f64,
    ) {
        let q = [[0.0, p], [p, 0.0]];
        let k = electronic_rhs_xf(&c, &q, &[f0, f1], 2000.0);
        prop_assert!(norm_rate(&c, &k).abs() < 1e-15);
        // d|C_1|^2/dt = (2 P / M)(f_1 - f_0) |C_0|^2 |C_1|^2.
        let rate = 2.0 * (c[1].conj() * k[1]).re;
        let expected = 2.0 * p / 2000.0 * (f1 - f0) * c[0].norm_sqr() * c[1].norm_sqr();
        prop_assert!((rate - expected).abs() < 1e-13);
    }

    #[test]
    fn modified_momentum_hits_the_ensemble_target(
        rows in prop::collection::vec((-0.1..0.1f64, -0.1..0.1f64, -30.0..30.0f64, -30.0..30.0f64, 0.001..0.03f64), 1..40),
    ) {
        let e: Vec<[f64; 2]> = rows.iter().map(|r| [r.0, r.1]).collect();
        let f: Vec<[f64; 2]> = rows.iter().map(|r| [r.2, r.3]).collect();
        let v: Vec<f64> = rows.iter().map(|r| r.4).collect();
        let m = modified_bo_momentum(&e, &f, &v, 2000.0, 1e-6);
        let n = rows.len() as f64;
        for s in 0..2 {
            let target: f64 = (0..rows.len()).map(|a| f[a][s] * v[a] + e[a][s]).sum::<f64>() / n;
            for a in 0..rows.len() {
                prop_assert!(!m.used_fallback[a]);
                prop_assert!((m.f_tilde[a][s] * v[a] + e[a][s] - target).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sampling_is_a_deterministic_prefix(seed in any::<u64>(), n in 1usize..60, extra in 0usize..40) {
        let spec = WavepacketSpec { r0: -15.0, k0: 20.0, sigma_packet: 2f64.sqrt() };
        let a = sample_wigner(&spec, n, seed).unwrap();
        let b = sample_wigner(&spec, n + extra, seed).unwrap();
        prop_assert_eq!(&a.positions[..], &b.positions[..n]);
        prop_assert_eq!(&a.momenta[..], &b.momenta[..n]);
        prop_assert!(a.coefficients.iter().all(|c| c[0] == Complex64::new(1.0, 0.0) && c[1] == Complex64::new(0.0, 0.0)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn observables_round_trip_exactly(
        values in prop::collection::vec(prop::array::uniform8(-1e3..1e3f64), 1..20),
    ) {
        let records: Vec<ObservableRecord> = values
            .iter()
            .enumerate()
            .map(|(i, v)| ObservableRecord {
                t_fs: i as f64 * 0.1,
                pop: [v[0], v[1]],
                coherence: v[2],
                energy_mean: v[3],
                energy_drift: v[4],
                norm_dev: v[5],
                spurious_per_fs: v[6],
                fallback_fraction: v[7],
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("obs.csv");
        let mut w = std::fs::File::create(&path).unwrap();
        write_observables(&mut w, &records).unwrap();
        drop(w);
        prop_assert_eq!(read_observables(&path).unwrap(), records);
    }
}
