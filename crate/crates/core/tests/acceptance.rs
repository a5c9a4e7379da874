//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on failure.

use std::f64::consts::{PI, TAU};
use std::time::Instant;

use lievortex::control::{
    lie_rank, planar_bracket_rank, planar_rank_of, steer, transversality_probe, two_generator_check, vortex_transfer,
    ControlError, ControlSystem, PlanarField, RankOptions, Region, SteerOptions, Word,
};
use lievortex::inertia::InertiaOperator;
use lievortex::liecore::{
    ad, ad_star, adjoint_action, algebra_dim, coadjoint_action, exp, pairing, AlgebraElement, GroupElement, Momentum,
};
use lievortex::reduction::{integrate, integrate_chaplygin, ChaplyginState, IntegrationOptions, ReducedSystem};
use lievortex::sampling::{random_algebra, random_momentum, random_rotation, seeded};
use lievortex::stiefel::{integrate_stiefel, ControlledTop, StiefelOptions, StiefelState};
use lievortex::vortex::{bracket_scale, commutation_residual, darboux_decompose, isotropy_basis, DEFAULT_RANK_TOL};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn manakov(u: &[f64]) -> InertiaOperator {
    InertiaOperator::manakov_diagonal(u).unwrap()
}

fn c1_adjoint_identities() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for n in 3..=6 {
        let mut rng = seeded(100 + n as u64);
        for _ in 0..1000 {
            let (xi, eta) = (random_algebra(&mut rng, n, 1.0), random_algebra(&mut rng, n, 1.0));
            let m = random_momentum(&mut rng, n, 1.0);
            let g = random_rotation(&mut rng, n);
            let lhs = pairing(&ad_star(&xi, &m).unwrap(), &eta).unwrap();
            let rhs = pairing(&m, &ad(&xi, &eta).unwrap()).unwrap();
            worst = worst.max((lhs - rhs).abs());
            let lhs = pairing(&coadjoint_action(&g, &m).unwrap(), &xi).unwrap();
            let rhs = pairing(&m, &adjoint_action(&g, &xi).unwrap()).unwrap();
            worst = worst.max((lhs - rhs).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(worst <= 1e-12 && secs < 5.0, format!("worst residual {worst:.2e}, {secs:.2} s"))
}

fn c2_momentum_conservation() -> Outcome {
    let start = Instant::now();
    let opts = IntegrationOptions { t_end: 10.0, h: 1e-3, drift_budget: 1e-6, sample_every: 1000 };
    let cases = [
        (manakov(&[1.0, 2.0, 3.0]), Momentum::from_coords(3, &[0.4, -0.3, 0.5]).unwrap()),
        (manakov(&[0.5, 1.0, 1.5, 2.5]), Momentum::from_coords(4, &[0.3, -0.2, 0.4, 0.25, -0.35, 0.15]).unwrap()),
    ];
    let mut worst_m: f64 = 0.0;
    let mut worst_e: f64 = 0.0;
    for (i, (a, m)) in cases.into_iter().enumerate() {
        let n = m.dim();
        let g0 = random_rotation(&mut seeded(7 + i as u64), n);
        let traj = integrate(&ReducedSystem::left(a, m).unwrap(), &g0, &opts).unwrap();
        worst_m = worst_m.max(traj.max_drift.momentum);
        worst_e = worst_e.max(traj.max_drift.energy);
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst_m <= 1e-8 && worst_e <= 1e-8 && secs < 30.0,
        format!("momentum drift {worst_m:.2e}, energy drift {worst_e:.2e}, {secs:.2} s"),
    )
}

fn c3_whittaker_consistency() -> Outcome {
    let mut rng = seeded(31);
    let mut worst: f64 = 0.0;
    for n in [3, 4] {
        let u: Vec<f64> = (1..=n).map(|i| 0.5 + i as f64 * 0.7).collect();
        let m = random_momentum(&mut rng, n, 1.0);
        let lambda = random_algebra(&mut rng, n, 0.3);
        let sys = ReducedSystem::left(manakov(&u), m.clone()).unwrap().with_lambda(lambda).unwrap();
        for _ in 0..50 {
            let g = random_rotation(&mut rng, n);
            let v = sys.reduced_field(&g).unwrap();
            worst = worst.max((sys.reconstruct_conserved(&g, &v).unwrap().matrix() - m.matrix()).norm());
        }
    }
    let m = random_momentum(&mut rng, 4, 1.0);
    let g0 = random_rotation(&mut rng, 4);
    let sys = ReducedSystem::left(manakov(&[0.5; 4]), m.clone()).unwrap();
    let opts = IntegrationOptions { t_end: 5.0, h: 1e-3, drift_budget: 1e-6, sample_every: 500 };
    let traj = integrate(&sys, &g0, &opts).unwrap();
    let closed = traj
        .samples
        .iter()
        .map(|s| s.g.distance(&GroupElement::new(exp(&m.to_algebra().scale(s.t)).matrix() * g0.matrix()).unwrap()))
        .fold(0.0, f64::max);
    outcome(
        worst <= 1e-12 && closed <= 1e-8,
        format!("reconstruction {worst:.2e} over 100 points, bi-invariant flow error {closed:.2e}"),
    )
}

fn c4_vortex_dimensions() -> Outcome {
    let d0 = isotropy_basis(&Momentum::zeros(3), DEFAULT_RANK_TOL).dim();
    let d1 = isotropy_basis(&Momentum::from_coords(3, &[0.2, -0.7, 0.4]).unwrap(), DEFAULT_RANK_TOL).dim();
    let m4 = (&AlgebraElement::elementary(4, 0, 1) + &AlgebraElement::elementary(4, 2, 3).scale(2.0)).to_momentum();
    let b4 = isotropy_basis(&m4, DEFAULT_RANK_TOL);
    let mut closure = b4.closure_residual();
    let mut odd = 0;
    for n in 3..=6 {
        let mut rng = seeded(400 + n as u64);
        for _ in 0..1000 {
            let b = isotropy_basis(&random_momentum(&mut rng, n, 1.0), DEFAULT_RANK_TOL);
            closure = closure.max(b.closure_residual());
            if !(algebra_dim(n) - b.dim()).is_multiple_of(2) {
                odd += 1;
            }
        }
    }
    outcome(
        d0 == 3 && d1 == 1 && b4.dim() == 2 && closure <= 1e-9 && odd == 0,
        format!("dims (so3,0)={d0} (so3,m)={d1} (so4,max)={}, closure {closure:.2e}, odd codims {odd}/4000", b4.dim()),
    )
}

fn c5_commutation() -> Outcome {
    let mut rng = seeded(55);
    let delta = 1e-4;
    let mut worst_iso: f64 = 0.0;
    let mut weakest_generic = f64::INFINITY;
    let mut generic_count = 0;
    for n in [3, 4] {
        let u: Vec<f64> = (1..=n).map(|i| i as f64).collect();
        let m = random_momentum(&mut rng, n, 1.0);
        let basis = isotropy_basis(&m, DEFAULT_RANK_TOL);
        let controls = [AlgebraElement::elementary(n, 0, 1), AlgebraElement::elementary(n, 1, 2)];
        for frozen_u in [[0.0, 0.0], [0.7, -0.4], [-1.0, 0.3]] {
            let lambda = &controls[0].scale(-frozen_u[0]) - &controls[1].scale(frozen_u[1]);
            let sys = ReducedSystem::left(manakov(&u), m.clone()).unwrap().with_lambda(lambda).unwrap();
            for _ in 0..5 {
                let g = random_rotation(&mut rng, n);
                for xi in &basis.basis {
                    let r = commutation_residual(&sys, xi, &g, delta).unwrap();
                    worst_iso = worst_iso.max(r / bracket_scale(&sys, xi, &g).unwrap());
                }
            }
        }
        let sys = ReducedSystem::left(manakov(&u), m.clone()).unwrap();
        for _ in 0..50 {
            // unit direction with the isotropy component removed
            let mut c = DVector::from_vec(random_algebra(&mut rng, n, 1.0).coords());
            for xi in &basis.basis {
                let b = DVector::from_vec(xi.coords());
                c -= &b * b.dot(&c);
            }
            let xi = AlgebraElement::from_coords(n, c.normalize().as_slice()).unwrap();
            let g = random_rotation(&mut rng, n);
            let r = commutation_residual(&sys, &xi, &g, delta).unwrap();
            weakest_generic = weakest_generic.min(r / bracket_scale(&sys, &xi, &g).unwrap());
            generic_count += 1;
        }
    }
    outcome(
        worst_iso <= 1e-6 && weakest_generic >= 1e-2,
        format!(
            "isotropy residual/scale ≤ {worst_iso:.2e} (with frozen controls), generic ≥ {weakest_generic:.2e} over {generic_count} directions"
        ),
    )
}

fn c6_stiefel_equivalence() -> Outcome {
    let mut worst_traj: f64 = 0.0;
    let mut worst_gram: f64 = 0.0;
    let mut worst_spec: f64 = 0.0;
    for (n, seed) in [(3, 61), (4, 62), (5, 63)] {
        let mut rng = seeded(seed);
        let u: Vec<f64> = (1..=n).map(|i| 0.4 * i as f64).collect();
        let m = random_momentum(&mut rng, n, 0.7);
        let g0 = random_rotation(&mut rng, n);
        let frame = darboux_decompose(&m, DEFAULT_RANK_TOL);
        let state = StiefelState::from_frame(&frame, &g0).unwrap();
        let top = ControlledTop::free(DMatrix::from_diagonal(&DVector::from_vec(u.clone()))).unwrap();

        let opts = StiefelOptions { t_end: 5.0, h: 1e-3, drift_budget: 1e-6, sample_every: 100 };
        let stiefel = integrate_stiefel(&state, &top, &opts).unwrap();
        let iopts = IntegrationOptions { t_end: 5.0, h: 1e-3, drift_budget: 1e-6, sample_every: 100 };
        let group = integrate(&ReducedSystem::left(manakov(&u), frame.reconstruct()).unwrap(), &g0, &iopts).unwrap();
        for (s, g) in stiefel.iter().zip(&group.samples) {
            assert!((s.t - g.t).abs() < 1e-9);
            let expected = StiefelState::from_frame(&frame, &g.g).unwrap();
            let err = (s.state.x() - expected.x()).amax().max((s.state.y() - expected.y()).amax());
            worst_traj = worst_traj.max(err);
        }

        let long = integrate_stiefel(&state, &top, &StiefelOptions { t_end: 10.0, sample_every: 250, ..opts }).unwrap();
        let spec0 = &long[0].spectrum;
        for s in &long {
            worst_gram = worst_gram.max(s.gram_drift);
            let d = s.spectrum.iter().zip(spec0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            worst_spec = worst_spec.max(d);
        }
    }
    outcome(
        worst_traj <= 1e-6 && worst_gram <= 1e-8 && worst_spec <= 1e-8,
        format!("trajectory gap {worst_traj:.2e}, Gram drift {worst_gram:.2e}, spectrum drift {worst_spec:.2e}"),
    )
}

fn c7_darboux_round_trip() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut rank_mismatch = 0;
    for n in 3..=6 {
        let mut rng = seeded(700 + n as u64);
        for _ in 0..1000 {
            let m = random_momentum(&mut rng, n, 1.0);
            let f = darboux_decompose(&m, DEFAULT_RANK_TOL);
            worst = worst.max((f.reconstruct().matrix() - m.matrix()).norm());
            let sv = m.matrix().singular_values();
            let rank = sv.iter().filter(|&&s| s > DEFAULT_RANK_TOL * sv.max()).count();
            if rank != f.k() {
                rank_mismatch += 1;
            }
        }
    }
    outcome(
        worst <= 1e-10 && rank_mismatch == 0,
        format!("worst residual {worst:.2e}, rank mismatches {rank_mismatch}/4000"),
    )
}

fn c8_controllability() -> Outcome {
    let mut rng = seeded(81);
    let mut pairs_ok = 0;
    for n in [3, 4] {
        for _ in 0..20 {
            let r = two_generator_check(&random_algebra(&mut rng, n, 1.0), &random_algebra(&mut rng, n, 1.0), 8, 1e-10)
                .unwrap();
            pairs_ok += usize::from(r.generates);
        }
    }
    let single = |m: Momentum| {
        let sys = ReducedSystem::left(manakov(&[1.0, 2.0, 3.0]), m).unwrap();
        ControlSystem::new(sys, vec![AlgebraElement::elementary(3, 0, 1)], 1.0, 10, 10.0).unwrap()
    };
    let generic = single(Momentum::from_coords(3, &[0.4, -0.3, 0.5]).unwrap());
    let mut min_rank = usize::MAX;
    for _ in 0..100 {
        let g = random_rotation(&mut rng, 3);
        min_rank = min_rank.min(lie_rank(&generic, &g, &RankOptions::default()).unwrap().rank);
    }
    let degenerate = single(Momentum::elementary(3, 0, 1).scale(0.8));
    let deg = lie_rank(&degenerate, &GroupElement::identity(3), &RankOptions { depth: 4, ..Default::default() })
        .unwrap()
        .rank;
    outcome(
        pairs_ok == 40 && min_rank == 3 && deg < 3,
        format!("generic pairs generating {pairs_ok}/40, single-control min rank {min_rank} over 100 g, principal-axis rank {deg}"),
    )
}

fn c9_transversality() -> Outcome {
    let f = PlanarField::constant(1.0, 0.0);
    let names = ["f", "g"];
    let w = |s: &str| Word::parse(s, &names).unwrap();
    let cos = PlanarField::cosine_example();
    let r_fg = planar_rank_of(&f, &cos, [0.0, 0.0], &[w("f"), w("g")], 1e-8).rank;
    let r_ffg = planar_rank_of(&f, &cos, [0.0, 0.0], &[w("f"), w("[f,[f,g]]")], 1e-8).rank;
    let flat = PlanarField::nonanalytic_example();
    let r_flat = (1..=4).map(|d| planar_bracket_rank(&f, &flat, [PI / 2.0, 0.0], d, 1e-8).rank).max().unwrap();
    let samples: Vec<[f64; 2]> = (0..=16).map(|i| [PI * i as f64 / 16.0, 0.25 * i as f64]).collect();
    let probe = transversality_probe(&f, &Region::band(0.0, PI), &samples, TAU, 1e-2, false);
    outcome(
        r_fg == 1 && r_ffg == 2 && r_flat == 1 && probe.transversal,
        format!(
            "cosine: rank{{f,g}}={r_fg}, rank{{f,[f,[f,g]]}}={r_ffg}; non-analytic: bracket rank {r_flat}, transversal={}",
            probe.transversal
        ),
    )
}

fn c10_steering() -> Outcome {
    let m = Momentum::from_coords(3, &[0.4, -0.3, 0.5]).unwrap();
    let sys = ReducedSystem::left(manakov(&[1.0, 2.0, 3.0]), m.clone()).unwrap();
    let dirs = vec![AlgebraElement::elementary(3, 0, 1), AlgebraElement::elementary(3, 1, 2)];
    let csys = ControlSystem::new(sys, dirs, 1.0, 20, 10.0).unwrap();
    let g0 = GroupElement::identity(3);
    let mut reached = 0;
    let mut slowest: f64 = 0.0;
    let mut worst_reached: f64 = 0.0;
    for trial in 0..20u64 {
        let target = random_rotation(&mut seeded(1000 + trial), 3);
        let opts = SteerOptions { seed: trial, time_limit: Some(60.0), ..Default::default() };
        let start = Instant::now();
        let res = steer(&csys, &g0, &target, &opts);
        let secs = start.elapsed().as_secs_f64();
        slowest = slowest.max(secs);
        if let Ok(r) = res {
            if secs <= 60.0 && r.distance <= 1e-2 {
                reached += 1;
                worst_reached = worst_reached.max(r.distance);
            }
        }
    }

    let basis = isotropy_basis(&m, DEFAULT_RANK_TOL);
    let h1 = random_rotation(&mut seeded(2000), 3);
    let h2 = random_rotation(&mut seeded(2001), 3);
    let transfer =
        vortex_transfer(&csys, &basis, &h1, &h2, &[0.5, 1.0, 2.0], &SteerOptions { seed: 9, ..Default::default() });
    let (diagram_ok, diagram) = match transfer {
        Ok(t) => (
            t.worst_defect <= 10.0 * t.residual,
            format!("diagram defect {:.2e} vs residual {:.2e}", t.worst_defect, t.residual),
        ),
        Err(e) => (false, format!("transfer failed: {e}")),
    };

    let m4 = Momentum::from_coords(4, &[0.3, -0.2, 0.4, 0.25, -0.35, 0.15]).unwrap();
    let sys4 = ReducedSystem::left(manakov(&[0.5, 1.0, 1.5, 2.5]), m4).unwrap();
    let dirs4 = vec![
        AlgebraElement::elementary(4, 0, 1),
        AlgebraElement::elementary(4, 1, 2),
        AlgebraElement::elementary(4, 2, 3),
    ];
    let csys4 = ControlSystem::new(sys4, dirs4, 1.0, 20, 10.0).unwrap();
    let target4 = random_rotation(&mut seeded(4000), 4);
    let start = Instant::now();
    let smoke = steer(
        &csys4,
        &GroupElement::identity(4),
        &target4,
        &SteerOptions { tol: 5e-2, time_limit: Some(300.0), ..Default::default() },
    );
    let secs4 = start.elapsed().as_secs_f64();
    let d4 = match &smoke {
        Ok(r) => r.distance,
        Err(ControlError::BudgetExhausted(r)) => r.distance,
        Err(_) => f64::INFINITY,
    };

    outcome(
        reached >= 19 && slowest <= 60.0 && diagram_ok && d4 <= 5e-2 && secs4 <= 300.0,
        format!(
            "SO(3) reached {reached}/20 (worst {worst_reached:.1e}, slowest {slowest:.1} s); {diagram}; SO(4) smoke distance {d4:.1e} in {secs4:.1} s"
        ),
    )
}

fn hat(v: &Vector3<f64>) -> Momentum {
    Momentum::from_coords(3, &[-v[2], v[1], -v[0]]).unwrap()
}

fn c11_chaplygin() -> Outcome {
    let inertia = Matrix3::from_diagonal(&Vector3::new(1.0, 1.6, 2.3));
    let m0 = Vector3::new(0.4, -0.7, 0.5);
    let gamma0 = Vector3::new(0.3, -0.4, 0.5).normalize();
    let state = ChaplyginState::new(m0, gamma0, inertia, 0.8).unwrap();
    let traj = integrate_chaplygin(&state, 10.0, 1e-3).unwrap();
    let (n0, p0) = (m0.norm(), m0.dot(&gamma0));
    let mut worst: f64 = 0.0;
    for s in &traj {
        worst = worst.max((s.momentum.norm() - n0).abs()).max((s.momentum.dot(&s.gamma) - p0).abs());
    }

    let free = ChaplyginState::new(m0, gamma0, inertia, 0.0).unwrap();
    let ball = integrate_chaplygin(&free, 10.0, 1e-3).unwrap();
    let a = InertiaOperator::from_body_tensor(&inertia).unwrap();
    let opts = IntegrationOptions { t_end: 10.0, h: 1e-3, drift_budget: 1e-6, sample_every: 1 };
    let top = integrate(&ReducedSystem::left(a, hat(&m0)).unwrap(), &GroupElement::identity(3), &opts).unwrap();
    let gap = ball
        .iter()
        .zip(&top.samples)
        .map(|(b, t)| (hat(&b.momentum).matrix() - t.m_body.matrix()).norm())
        .fold(0.0, f64::max);
    outcome(worst <= 1e-8 && gap <= 1e-8, format!("invariant drift {worst:.2e}, D=0 gap to free top {gap:.2e}"))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("1 algebra kernel adjoint identities", c1_adjoint_identities),
        ("2 momentum and energy conservation", c2_momentum_conservation),
        ("3 reduced-field consistency", c3_whittaker_consistency),
        ("4 vortex dimensions and parity", c4_vortex_dimensions),
        ("5 commutation with vortex fields", c5_commutation),
        ("6 Stiefel equivalence", c6_stiefel_equivalence),
        ("7 Darboux round trip", c7_darboux_round_trip),
        ("8 controllability fixtures", c8_controllability),
        ("9 transversality fixtures", c9_transversality),
        ("10 steering and vortex transfer", c10_steering),
        ("11 Chaplygin ball", c11_chaplygin),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("{tag} criterion {name}: {} [{:.1} s]", o.detail, start.elapsed().as_secs_f64());
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
