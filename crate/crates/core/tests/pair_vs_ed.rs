use qebath::ed::{build_sector, norm, overlap, sector_spectrum, subspace_overlap, Lattice};
use qebath::two_qe::{
    mode_pair_state, pair_wavefunctions, solve_pair_poles, spin_model_parameters, variational_from, PairPole,
};
use qebath::{BathSpec, CouplingSpec};

fn nearest(levels: &[f64], e: f64) -> f64 {
    levels.iter().map(|x| (x - e).abs()).fold(f64::INFINITY, f64::min)
}

const CASES: &[(usize, f64, f64)] = &[(1, -1.0, 1.0), (2, -1.0, 3.0), (2, 0.5, 3.0), (1, -3.0, 3.0), (2, -0.3, 0.7)];

#[test]
fn pair_poles_and_wavefunctions_match_ed() {
    let n = 10;
    for &(d, delta, omega) in CASES {
        let bath = BathSpec::new(1.0, n, d).unwrap();
        let c = CouplingSpec::new(delta, omega).unwrap();
        let p = solve_pair_poles(&bath, &c).unwrap();
        let lat = Lattice::emitter_pair(&bath, &c);
        let basis = build_sector(&lat, 2, 2, None).unwrap();
        let ed = sector_spectrum(&lat, &basis, usize::MAX, true).unwrap();
        assert!((ed.eigenvalues[0] - p.e_ground()).abs() < 1e-8, "d={d} {delta} {omega}");
        for which in [PairPole::Ground, PairPole::DoublonPlus, PairPole::DoublonMinus] {
            let Some(pole) = p.pole(which) else { continue };
            assert!(nearest(&ed.eigenvalues, pole.energy) < 1e-8, "{which:?}");
            let wf = pair_wavefunctions(&p, which).unwrap();
            assert!((wf.norm() - 1.0).abs() < 1e-8);
            let v = wf.to_ed_vector(&basis);
            assert!((norm(&v) - 1.0).abs() < 1e-8);
            assert!(subspace_overlap(&v, &ed, pole.energy, 1e-7) > 1.0 - 1e-8, "{which:?} d={d} {delta} {omega}");
            let oracle = mode_pair_state(&p, which).unwrap().to_ed_vector(&p.single, &basis).unwrap();
            assert!(overlap(&oracle, &v) > 1.0 - 1e-8);
        }
    }
}

#[test]
fn spin_model_matches_ed_levels() {
    let bath = BathSpec::new(1.0, 10, 2).unwrap();
    let c = CouplingSpec::new(-1.5, 0.8).unwrap();
    let p = solve_pair_poles(&bath, &c).unwrap();
    let m = spin_model_parameters(&p, &p.single).unwrap();
    let lat = Lattice::emitter_pair(&bath, &c);
    let one = sector_spectrum(&lat, &build_sector(&lat, 1, 1, None).unwrap(), 2, false).unwrap();
    let two = sector_spectrum(&lat, &build_sector(&lat, 2, 2, None).unwrap(), 1, false).unwrap();
    let e0 = 0.5 * (one.eigenvalues[0] + one.eigenvalues[1]);
    assert!((m.e0 - e0).abs() < 1e-10);
    assert!((m.j_z - (two.eigenvalues[0] - 2.0 * e0)).abs() < 1e-8);
    assert!((m.t_eff.abs() - 0.5 * (one.eigenvalues[1] - one.eigenvalues[0])).abs() < 1e-10);
}

#[test]
fn variational_energy_bounds_exact() {
    for &(d, delta, omega) in CASES {
        let bath = BathSpec::new(1.0, 48, d).unwrap();
        let p = solve_pair_poles(&bath, &CouplingSpec::new(delta, omega).unwrap()).unwrap();
        let v = variational_from(&p).unwrap();
        assert!(v.energy >= p.e_ground() - 1e-10, "d={d} {delta} {omega}");
        assert!(v.overlap_pv <= 1.0 + 1e-10 && v.overlap_pv > 0.5);
        assert!(v.p <= 1.0 + 1e-10);
    }
}
