use qebath::single::{single_bound_state, solve_two_qe, effective_hopping_two_qe};
use qebath::two_qe::{doublon_hopping_two_qe, solve_pair_poles, spin_model_parameters, variational_from};
use qebath::{BathSpec, CouplingSpec, ModeSum};

fn bath(d: usize) -> BathSpec {
    BathSpec::new(1.0, 1024, d).unwrap()
}

#[test]
fn both_doublons_at_figure_parameters() {
    let p = solve_pair_poles(&bath(2), &CouplingSpec::new(-1.0, 2.0).unwrap()).unwrap();
    let (mu, t) = doublon_hopping_two_qe(&p).unwrap();
    assert!(t != 0.0 && mu < 0.0);
    assert!(p.e_ground() < p.e_doublon_plus().unwrap().min(p.e_doublon_minus().unwrap()));
}

#[test]
fn arc_region_pair_is_free() {
    let c = CouplingSpec::new(-3.0, 0.3).unwrap();
    let p = solve_pair_poles(&bath(2), &c).unwrap();
    let e1 = single_bound_state(&bath(2), &c, ModeSum::Finite).unwrap().energy;
    assert!((p.e_ground() - 2.0 * e1).abs() < 1e-3);
    let m = spin_model_parameters(&p, &p.single).unwrap();
    assert!(m.j_z.abs() < 1e-3);
    let v = variational_from(&p).unwrap();
    assert!(v.p_plus.unwrap() > 0.99);
}

#[test]
fn strong_coupling_hopping_saturates() {
    let mut last = 0.0;
    for om in [5.0, 10.0, 20.0, 50.0] {
        let s = solve_two_qe(&bath(1), &CouplingSpec::new(0.0, om).unwrap(), ModeSum::Finite).unwrap();
        let t = effective_hopping_two_qe(&s).unwrap().1.abs();
        assert!(t > last && t < 0.5);
        last = t;
    }
    assert!((last - 0.49).abs() < 5e-3);
}

#[test]
fn variational_fidelity_on_grid() {
    for d in [1usize, 2] {
        for i in 0..5 {
            for j in 0..5 {
                let delta = -3.0 + 1.5 * i as f64;
                let omega = 0.6 * (j + 1) as f64;
                let p = solve_pair_poles(&bath(d), &CouplingSpec::new(delta, omega).unwrap()).unwrap();
                let v = variational_from(&p).unwrap();
                assert!(v.overlap_pv > 0.98, "d={d} {delta} {omega}: {}", v.overlap_pv);
                assert!(v.p > 0.85);
                assert!(v.e_plus < 0.0 && v.e_minus < 0.0);
            }
        }
    }
}
