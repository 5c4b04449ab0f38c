use lpsketch::genbench::{gen_feasible, gen_infeasible, GenConfig};
use lpsketch::retrieve::{full_pipeline, retrieve_basis_alg2, retrieve_pseudoinverse, PipelineConfig, RetrievalMethod};
use lpsketch::seed::{derive_seed, rng};
use lpsketch::solver::solve;
use lpsketch::Error;
use rand::Rng;

fn feasible(m: usize, n: usize, seed: u64) -> lpsketch::StandardFormLp {
    gen_feasible(&GenConfig { m, n, density: 0.3, seed, feasible: true }).unwrap().0
}

#[test]
fn pseudoinverse_quality_on_desk_instances() {
    let good = (0..10u64)
        .filter(|&s| {
            let lp = feasible(100, 140, derive_seed(31, s));
            let v = solve(&lp).unwrap().objective;
            let cfg = PipelineConfig { reference_value: v, ..PipelineConfig::new(0.2, RetrievalMethod::Pseudoinverse) };
            let rep = full_pipeline(&lp, &cfg, s).unwrap().report;
            rep.metrics.feas <= 1e-6 && rep.metrics.neg <= 0.15 && rep.metrics.obj <= 0.15
        })
        .count();
    assert!(good >= 8, "{good}/10");
}

#[test]
fn pseudoinverse_on_optimal_basis_is_exact() {
    let lp = feasible(12, 20, 4);
    let sol = solve(&lp).unwrap();
    let rep = retrieve_pseudoinverse(&lp, sol.basis.as_ref().unwrap(), sol.objective).unwrap();
    for (u, v) in rep.x.iter().zip(sol.x.as_ref().unwrap()) {
        assert!((u - v).abs() <= 1e-8);
    }
    assert!(rep.metrics.obj <= 1e-10);
}

#[test]
fn infeasible_instances_are_reported() {
    let caught = (0..20u64)
        .filter(|&s| {
            let (lp, _) = gen_infeasible(&GenConfig { m: 40, n: 60, density: 0.3, seed: s, feasible: false }).unwrap();
            let cfg = PipelineConfig::new(0.3, RetrievalMethod::Pseudoinverse);
            matches!(full_pipeline(&lp, &cfg, s), Err(Error::InfeasibleProjection))
        })
        .count();
    assert!(caught >= 19, "{caught}/20");
}

#[test]
fn pipeline_is_deterministic() {
    let lp = feasible(30, 45, 8);
    for method in [RetrievalMethod::Pseudoinverse, RetrievalMethod::BasisAlg2] {
        let cfg = PipelineConfig { k: Some(12), ..PipelineConfig::new(0.2, method) };
        let a = full_pipeline(&lp, &cfg, 77).unwrap().report;
        let b = full_pipeline(&lp, &cfg, 77).unwrap().report;
        assert_eq!(a, b);
    }
}

#[test]
fn noisy_dual_still_yields_a_report() {
    let lp = feasible(15, 25, 2);
    let y = solve(&lp).unwrap().y.unwrap();
    let mut r = rng(5);
    for scale in [1e-3, 1.0, 1e3] {
        let noisy: Vec<f64> = y.iter().map(|v| v + scale * r.gen_range(-1.0..1.0)).collect();
        let rep = retrieve_basis_alg2(&lp, &noisy, None).unwrap();
        assert_eq!(rep.basis_used.len(), 15);
        assert!(rep.x.iter().all(|v| v.is_finite()));
    }
}
