use proptest::prelude::*;
use thermotopo::topopt::{
    oc_update, DesignProblem, ObjectiveSpec, OptConfig, TopOpt, STATE_SOLVER,
};
use thermotopo::{DensityField, MaterialPair, Mesh, Region, RegionMap, ThermalBC};

fn run(
    n: usize,
    cfg: OptConfig,
    mut check: impl FnMut(usize, &Mesh, &[f64], f64, f64),
) -> thermotopo::topopt::OptResult {
    let mesh = Mesh::build_grid(n, n, 8.0, 8.0).unwrap();
    let regions = RegionMap::all_design(&mesh);
    let bc = ThermalBC::default();
    let mat = MaterialPair::default();
    let spec = ObjectiveSpec::for_mesh(&mesh);
    let opt = TopOpt {
        problem: DesignProblem {
            mesh: &mesh,
            regions: &regions,
            bc: &bc,
            mat: &mat,
            spec: &spec,
            solver: STATE_SOLVER,
        },
        cfg,
        r_min: 2.0 * mesh.dx(),
    };
    opt.run_with(|rec| {
        check(
            rec.iteration,
            &mesh,
            rec.theta_f.values(),
            rec.volume,
            rec.objective,
        )
    })
    .unwrap()
}

#[test]
fn small_run_keeps_volume_bounds_and_symmetry() {
    let cfg = OptConfig::default();
    let r = run(24, cfg, |it, mesh, theta, volume, objective| {
        assert!(objective.is_finite() && objective > 0.0);
        assert!(
            (volume - cfg.volfrac).abs() <= 1e-3,
            "iteration {it}: volume {volume}"
        );
        assert!(theta.iter().all(|&t| (cfg.theta_min..=1.0).contains(&t)));
        let n = mesh.nx();
        for j in 0..n {
            for i in 0..n {
                let d = theta[mesh.elem_index(i, j)] - theta[mesh.elem_index(j, i)];
                assert!(d.abs() <= 1e-6, "iteration {it}: asymmetry {d}");
            }
        }
    });
    assert_eq!(r.objective_history.len(), r.iterations);
    assert_eq!(r.volume_history.len(), r.iterations);
    assert!(r.objective < r.initial_objective());
}

#[test]
fn full_volume_saturates_immediately() {
    let cfg = OptConfig {
        volfrac: 1.0,
        ..Default::default()
    };
    let r = run(12, cfg, |_, _, _, _, _| {});
    assert!(r.converged);
    assert!(r.iterations <= 2);
    assert!(r.theta_c.values().iter().all(|&t| t == 1.0));
    assert!(r.theta_f.values().iter().all(|&t| (t - 1.0).abs() < 1e-10));
}

#[test]
fn iteration_cap_returns_best_design() {
    let cfg = OptConfig {
        max_iter: 3,
        tol: 1e-9,
        ..Default::default()
    };
    let r = run(12, cfg, |_, _, _, _, _| {});
    assert!(!r.converged);
    assert_eq!(r.iterations, 3);
    let best = r
        .objective_history
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    assert!((r.objective - best).abs() <= 1e-9 * best);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn oc_step_respects_limits(
        theta in prop::collection::vec(0.001f64..=1.0, 4..40),
        signs in prop::collection::vec(-5.0f64..1.0, 40),
        volfrac in 0.2f64..0.8,
        move_limit in 0.05f64..0.5,
    ) {
        let n = theta.len();
        let mesh = Mesh::build_grid(n, 2, 1.0, 1.0).unwrap();
        let mut t = theta.clone();
        t.extend(theta.iter().rev());
        let grad: Vec<f64> = (0..2 * n).map(|e| signs[e % signs.len()]).collect();
        let cfg = OptConfig { volfrac, move_limit, ..Default::default() };
        let regions = vec![Region::Design; 2 * n];
        let field = DensityField::new(&mesh, t.clone()).unwrap();
        match oc_update(&field, &grad, &cfg, &regions) {
            Ok(next) => {
                prop_assert!((next.mean() - volfrac).abs() <= 1e-4);
                for (a, b) in next.values().iter().zip(&t) {
                    prop_assert!(*a >= cfg.theta_min && *a <= 1.0);
                    prop_assert!((a - b).abs() <= move_limit + 1e-12);
                }
            }
            Err(_) => {
                // only when the move limit cannot reach the target
                let reach_hi: f64 = t.iter().map(|v| (v + move_limit).min(1.0)).sum::<f64>() / t.len() as f64;
                let reach_lo: f64 = t.iter().map(|v| (v - move_limit).max(cfg.theta_min)).sum::<f64>() / t.len() as f64;
                prop_assert!(volfrac > reach_hi - 1e-4 || volfrac < reach_lo + 1e-4);
            }
        }
    }
}
