use nalgebra::DMatrix;
use qebath::single::polariton_bands;
use qebath::triplon::{refinement, triplon_hoppings, TriplonContext};
use qebath::{BathSpec, CouplingSpec};

fn ctx(nb: usize, omega: f64) -> TriplonContext {
    let s = polariton_bands(&BathSpec::array(1.0, nb, 1).unwrap(), &CouplingSpec::new(0.0, omega).unwrap()).unwrap();
    TriplonContext::new(&s)
}

#[test]
fn band_opens_at_strong_coupling() {
    for omega in [5.0, 6.0] {
        let c = ctx(48, omega);
        let band = c.band_scan();
        assert!(band.is_complete(), "omega={omega}");
        for (q, e) in band.energies.iter().enumerate() {
            let (lo, hi) = band.continua[q].midgap().unwrap();
            let e = e.unwrap();
            assert!(e > lo && e < hi);
            assert!((e - band.energies[(48 - q) % 48].unwrap()).abs() < 1e-10);
        }
        let h = triplon_hoppings(&band).unwrap();
        assert!(h.get(1).abs() > h.get(2).abs() && h.get(2).abs() > h.get(3).abs());
    }
    // continua overlap at weak coupling
    let weak = ctx(48, 1.0);
    assert!((0..48).all(|q| weak.continua(q).midgap().is_none()));
    assert!(weak.band_scan().energies.iter().all(|e| e.is_none()));
}

#[test]
fn grid_refinement_is_small() {
    let rows = refinement(&ctx(24, 5.0), &ctx(48, 5.0), 3).unwrap();
    for (_, a, b) in rows {
        assert!((a - b).abs() < 1e-3, "{a} vs {b}");
    }
}

fn near_fraction(p: &DMatrix<f64>, period: usize, r: usize) -> f64 {
    let d = |i: usize| i.min(period - i);
    let mut near = 0.0;
    for i in 0..p.nrows() {
        for j in 0..p.ncols() {
            if d(i) <= r && d(j) <= r {
                near += p[(i, j)];
            }
        }
    }
    near / p.iter().sum::<f64>()
}

#[test]
fn wavefunctions_are_localized() {
    let c = ctx(24, 5.0);
    let root = c.triplon_energy(0).unwrap();
    let wf = c.wavefunctions(&root).unwrap();
    for p in [wf.profile_b(), wf.profile_bba(), wf.profile_baa(), wf.profile_a()] {
        assert!(near_fraction(&p, 24, 2) > 0.95);
    }
    // hard-core emitters never share a cell
    let pb = wf.profile_b();
    assert!((0..24).all(|r| pb[(0, r)] < 1e-20 && pb[(r, r)] < 1e-20));
}
