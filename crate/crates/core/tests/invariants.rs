use bergeo::analysis::{sobolev_bound_check, spectral_distribution, total_volume};
use bergeo::bergman::{gram_matrix, spectral_pair, BergmanGeodesic};
use bergeo::path::{GridSpec, PathGrid, PathSurface};
use bergeo::potential::{make_dilation_potential, make_fubini_study, make_test_potential, PotentialSpec, RadialPotential};
use bergeo::quadrature::{build_quadrature, QuadratureRule};
use bergeo::Exec;
use proptest::prelude::*;

fn quad() -> QuadratureRule {
    build_quadrature(192).unwrap()
}

fn bump() -> impl Strategy<Value = RadialPotential> {
    (0.3f64..1.2, -1.0f64..1.0, 0.1f64..0.9).prop_map(|(width, a, center)| {
        make_test_potential(&PotentialSpec::Bump {
            amplitude: 0.2 * a * width * width,
            width,
            center,
        })
        .unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn spectral_law_is_a_probability(phi in bump(), k in 1usize..40, t in 0.0f64..1.0, x in -30.0f64..30.0) {
        let bg = BergmanGeodesic::from_pair(&make_fubini_study(), &phi, k, &quad()).unwrap();
        let d = spectral_distribution(&bg, t, x);
        prop_assert!(d.probabilities.iter().all(|&p| p >= 0.0));
        prop_assert!((d.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bergman_paths_are_subgeodesic(a in bump(), b in bump(), k in 1usize..40, t in 0.0f64..1.0, x in -30.0f64..30.0) {
        let bg = BergmanGeodesic::from_pair(&a, &b, k, &quad()).unwrap();
        let j = bg.jet(t, x);
        prop_assert!(j.psi_xx > 0.0);
        prop_assert!(j.defect >= -1e-12 * j.psi_tt.abs().max(1.0), "defect {}", j.defect);
    }

    #[test]
    fn swapping_endpoints_reverses_time(a in bump(), b in bump(), k in 1usize..32, t in 0.0f64..1.0, x in -20.0f64..20.0) {
        let q = quad();
        let ab = BergmanGeodesic::from_pair(&a, &b, k, &q).unwrap();
        let ba = BergmanGeodesic::from_pair(&b, &a, k, &q).unwrap();
        prop_assert!((ab.value(t, x) - ba.value(1.0 - t, x)).abs() < 1e-10);
        prop_assert!((ab.velocity(t, x) + ba.velocity(1.0 - t, x)).abs() < 1e-10);
    }

    #[test]
    fn velocity_is_bounded_by_the_spectrum(a in bump(), b in bump(), k in 1usize..40, t in 0.0f64..1.0, x in -30.0f64..30.0) {
        let bg = BergmanGeodesic::from_pair(&a, &b, k, &quad()).unwrap();
        prop_assert!(bg.velocity(t, x).abs() <= 2.0 * bg.max_abs_lambda() / k as f64 + 1e-12);
    }

    #[test]
    fn volume_is_one_along_the_path(a in bump(), b in bump(), k in 1usize..32, t in 0.0f64..1.0) {
        let q = quad();
        let bg = BergmanGeodesic::from_pair(&a, &b, k, &q).unwrap();
        prop_assert!((total_volume(|x| bg.jet(t, x).psi_xx, &q) - 1.0).abs() < 1e-10);
        prop_assert!((total_volume(|x| a.ddpsi(x), &q) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn sobolev_bound_holds(phi in bump()) {
        let r = sobolev_bound_check(&phi, &quad());
        prop_assert!(r.holds(), "{r:?}");
        prop_assert!(r.dirichlet >= 0.0);
    }

    #[test]
    fn dilation_spectrum_is_arithmetic(c in -3.0f64..3.0, k in 1usize..64) {
        let q = quad();
        let g0 = gram_matrix(&make_fubini_study(), k, &q).unwrap();
        let g1 = gram_matrix(&make_dilation_potential(c).unwrap(), k, &q).unwrap();
        let sp = spectral_pair(&g0, &g1, k).unwrap();
        prop_assert_eq!(sp.lambdas.len(), k + 1);
        for w in sp.lambdas.windows(2) {
            prop_assert!(w[0] >= w[1]);
            prop_assert!(((w[0] - w[1]) - 0.5 * c.abs()).abs() < 1e-10);
        }
    }
}

#[test]
fn execution_strategies_agree() {
    let q = quad();
    let a = make_test_potential(&PotentialSpec::Bump { amplitude: 0.3, width: 0.5, center: 0.5 }).unwrap();
    let b = make_dilation_potential(0.7).unwrap();
    let bg = BergmanGeodesic::from_pair(&a, &b, 24, &q).unwrap();
    let spec = GridSpec { t_nodes: 17, x_nodes: 161, x_max: 30.0 };
    let s = PathGrid::sample_with(&bg, spec, Exec::Sequential).unwrap();
    let p = PathGrid::sample_with(&bg, spec, Exec::Parallel).unwrap();
    assert_eq!(s.jets(), p.jets());
}
