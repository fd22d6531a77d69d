//! Library results against independently computed references.

use wfh::adaptive::QuadraturePlan;
use wfh::detectors::{hl_difference_moments, hl_distribution, CoherentAmplitude, DetectorConfig};
use wfh::information::{planned_information, Detector, DetectorKind};
use wfh::modulation::{build_rule, ModulationScheme};
use wfh::pnr::PnrResolution;

fn res(m: u32) -> PnrResolution {
    PnrResolution::new(m).unwrap()
}

fn poisson(mu: f64, n: usize) -> f64 {
    let mut p = (-mu).exp();
    for k in 1..=n {
        p *= mu / k as f64;
    }
    p
}

/// PNR(M) statistics built from the untruncated Poisson law.
fn clicks(mu: f64, m: usize) -> Vec<f64> {
    let mut q: Vec<f64> = (0..m).map(|n| poisson(mu, n)).collect();
    let head: f64 = q.iter().sum();
    q.push(1.0 - head);
    q
}

fn information_at(kind: DetectorKind, m: u32, scheme: ModulationScheme, z2: f64) -> f64 {
    let detector = Detector::new(kind, res(m), z2.sqrt()).unwrap();
    planned_information(&detector, &scheme, &QuadraturePlan::default())
        .unwrap()
        .0
}

#[test]
fn wh_matches_dense_grid_reference() {
    // scipy adaptive quadrature with breakpoints at the vacuum points
    let s = ModulationScheme::gaussian_uni(10.0).unwrap();
    let i = information_at(DetectorKind::Wh, 10, s, 3.5);
    assert!((i - 2.321164974180229).abs() < 1e-9, "{i}");
}

#[test]
fn hl_matches_dense_grid_reference() {
    // 4e5-point trapezoid over +/-12 sigma
    let s = ModulationScheme::gaussian_uni(1.0).unwrap();
    let i = information_at(DetectorKind::Hl, 3, s, 2.0);
    assert!((i - 0.867908143196).abs() < 1e-9, "{i}");
}

#[test]
fn dw_matches_dense_grid_reference() {
    // 1601^2 tensor trapezoid over +/-10 sigma per quadrature
    let s = ModulationScheme::gaussian_bi(1.0).unwrap();
    let i = information_at(DetectorKind::Dw, 2, s, 1.0);
    assert!((i - 0.83004898655).abs() < 1e-8, "{i}");
}

/// `I(A;B)` of a BPSK prior from the explicit joint table.
fn bpsk_joint_information(kind: DetectorKind, m: usize, n_s: f64, z: f64) -> f64 {
    let symbols = [n_s.sqrt(), -n_s.sqrt()];
    let conditionals: Vec<Vec<f64>> = symbols
        .iter()
        .map(|&x| {
            let plus = clicks((x + z).powi(2) / 2.0, m);
            let minus = clicks((x - z).powi(2) / 2.0, m);
            match kind {
                DetectorKind::Wh => plus
                    .iter()
                    .flat_map(|&a| minus.iter().map(move |&b| a * b))
                    .collect(),
                DetectorKind::Hl => {
                    let mut d = vec![0.0; 2 * m + 1];
                    for (i, &a) in plus.iter().enumerate() {
                        for (j, &b) in minus.iter().enumerate() {
                            d[i + m - j] += a * b;
                        }
                    }
                    d
                }
                DetectorKind::Dw => unreachable!(),
            }
        })
        .collect();
    let outcomes = conditionals[0].len();
    let mut info = 0.0;
    for b in 0..outcomes {
        let pb = 0.5 * (conditionals[0][b] + conditionals[1][b]);
        for cond in &conditionals {
            let joint = 0.5 * cond[b];
            if joint > 0.0 {
                info += joint * (joint / (0.5 * pb)).log2();
            }
        }
    }
    info
}

#[test]
fn bpsk_matches_joint_enumeration() {
    let n_s = 0.7;
    let scheme = ModulationScheme::bpsk(n_s).unwrap();
    for kind in [DetectorKind::Wh, DetectorKind::Hl] {
        for m in [1u32, 2] {
            for z in [0.5, 1.0] {
                let detector = Detector::new(kind, res(m), z).unwrap();
                let (lib, nodes) =
                    planned_information(&detector, &scheme, &QuadraturePlan::default()).unwrap();
                assert_eq!(nodes, 2);
                let brute = bpsk_joint_information(kind, m as usize, n_s, z);
                assert!((lib - brute).abs() < 1e-10, "{kind:?} M={m} z={z}: {lib} vs {brute}");
            }
        }
    }
}

#[test]
fn hl_approaches_skellam_at_high_resolution() {
    for (x, z) in [(0.7, 1.5), (-1.2, 0.4), (0.0, 2.0)] {
        let cfg = DetectorConfig::q_quadrature(res(60), z).unwrap();
        let dist = hl_distribution(CoherentAmplitude::real(x), &cfg);
        let (mu_p, mu_m) = ((x + z) * (x + z) / 2.0, (x - z) * (x - z) / 2.0);
        for delta in -60i64..=60 {
            let skellam: f64 = (0..200usize)
                .filter_map(|n2| {
                    let n1 = n2 as i64 + delta;
                    (n1 >= 0).then(|| poisson(mu_p, n1 as usize) * poisson(mu_m, n2))
                })
                .sum();
            assert!(
                (dist.get(delta) - skellam).abs() < 1e-10,
                "x={x} z={z} delta={delta}"
            );
        }
    }
}

/// `<Delta^4>/z^4` of a Skellam law averaged over `x ~ N(0, n)`.
fn skellam_fourth_moment(n: f64, z2: f64) -> f64 {
    3.0 * (1.0 + 4.0 * n).powi(2)
        + n * (9.0 * n + 1.0) / (z2 * z2)
        + (72.0 * n * n + 22.0 * n) / z2
        + 1.0 / z2
}

#[test]
fn averaged_difference_moments() {
    let (n_s, z2) = (0.5, 10.0_f64);
    let z = z2.sqrt();
    let scheme = ModulationScheme::gaussian_uni(n_s).unwrap();
    let rule = build_rule(&scheme, 64).unwrap();
    let cfg = DetectorConfig::q_quadrature(res(60), z).unwrap();
    let avg = |order: u32| {
        rule.integrate(|a| hl_difference_moments(&cfg, a, order).unwrap()) / z.powi(order as i32)
    };
    assert!(avg(1).abs() < 1e-12);
    assert!(avg(3).abs() < 1e-10);
    let second = 1.0 + 4.0 * n_s + n_s / z2;
    assert!((avg(2) / second - 1.0).abs() < 1e-10);
    let fourth = skellam_fourth_moment(n_s, z2);
    assert!((avg(4) / fourth - 1.0).abs() < 1e-10, "{} vs {fourth}", avg(4));
}
