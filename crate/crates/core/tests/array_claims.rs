use qebath::array_pair::{doublon_band_scan, doublon_wavefunctions, isolated_levels, u_eff};
use qebath::single::polariton_bands;
use qebath::{BathSpec, CouplingSpec};

fn spec(nb: usize, z: usize, delta: f64, omega: f64) -> qebath::single::PolaritonSpectrum {
    polariton_bands(&BathSpec::array(1.0, nb, z).unwrap(), &CouplingSpec::new(delta, omega).unwrap()).unwrap()
}

fn width(nb: usize, z: usize, delta: f64, omega: f64) -> f64 {
    let b = doublon_band_scan(&spec(nb, z, delta, omega));
    let e: Vec<f64> = b.energies.iter().map(|x| x.expect("complete band")).collect();
    e.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - e.iter().cloned().fold(f64::INFINITY, f64::min)
}

#[test]
fn flat_and_curved_doublon_bands() {
    let flat = width(64, 2, -1.0, 1.0);
    let curved = width(64, 2, 1.0, 1.0);
    assert!(curved > 5.0 * flat, "{flat} {curved}");
}

#[test]
fn isolated_band_between_continua() {
    let b = doublon_band_scan(&spec(64, 1, 0.0, 1.0));
    assert!(b.energies.iter().all(|e| e.is_some()));
}

/// Fraction of `|f_b(r)|^2` within `r` cells of the origin.
fn weight_within(f: &[num_complex::Complex64], r: usize) -> f64 {
    let n = f.len();
    let total: f64 = f.iter().map(|x| x.norm_sqr()).sum();
    let near: f64 = (0..n).filter(|&i| i.min(n - i) <= r).map(|i| f[i].norm_sqr()).sum();
    near / total
}

#[test]
fn lowest_doublon_tighter_than_second() {
    let s = spec(64, 2, 0.0, 2.0);
    let levels = isolated_levels(&s, 0);
    assert!(levels.len() >= 2);
    let low = doublon_wavefunctions(&s, 0, levels[0]).unwrap().f_b_of_r();
    let high = doublon_wavefunctions(&s, 0, levels[1]).unwrap().f_b_of_r();
    assert!(weight_within(&low, 2) > 0.9);
    assert!(weight_within(&high, 2) < weight_within(&low, 2));
}

#[test]
fn effective_interaction_map() {
    let mut last = 0.0;
    for i in 0..=19 {
        let om = 0.1 + 0.1 * i as f64;
        let u = u_eff(&spec(256, 1, 1.0, om)).unwrap().u_eff;
        assert!(u > last, "omega {om}");
        last = u;
    }
    assert!(u_eff(&spec(256, 1, -10.0, 0.3)).unwrap().u_eff > 1e3);
    assert!(u_eff(&spec(256, 1, 1.0, 1e-3)).unwrap().u_eff.abs() < 1e-9);
}
