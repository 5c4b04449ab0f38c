use lpsketch::genbench::{cell_means, read_csv, run_bench, write_csv, GenConfig};

fn cell(m: usize, n: usize, feasible: bool) -> GenConfig {
    GenConfig { m, n, density: 0.3, seed: 0, feasible }
}

#[test]
fn infeasible_cell_statuses_match() {
    let recs = run_bench(&[cell(200, 300, false)], 0.2, 10, 17);
    assert_eq!(recs.len(), 10);
    let matched = recs.iter().filter(|r| r.status_match == Some(true)).count();
    assert!(matched >= 9, "{matched}/10");
    assert!(recs.iter().all(|r| r.feas1.is_none() && r.org_time >= 0.0 && r.prj_time >= 0.0));
}

#[test]
fn feasible_cell_pinv_is_feasible() {
    let recs = run_bench(&[cell(60, 90, true)], 0.3, 4, 5);
    assert!(recs.iter().all(|r| r.error.is_none()), "{:?}", recs.iter().map(|r| &r.error).collect::<Vec<_>>());
    let means = cell_means(&recs);
    assert_eq!(means.len(), 1);
    assert!(means[0].feas2.unwrap() <= 1e-6);
    assert!(recs.iter().all(|r| r.status_match.is_none()));
}

#[test]
fn bench_is_deterministic_apart_from_timing() {
    let grid = [cell(15, 25, true), cell(12, 20, false)];
    let strip = |mut v: Vec<lpsketch::genbench::BenchRecord>| {
        for r in &mut v {
            r.org_time = 0.0;
            r.prj_time = 0.0;
        }
        v
    };
    let a = strip(run_bench(&grid, 0.3, 3, 99));
    let b = strip(run_bench(&grid, 0.3, 3, 99));
    assert_eq!(a, b);
    assert_ne!(a, strip(run_bench(&grid, 0.3, 3, 100)));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bench.csv");
    write_csv(&a, &path).unwrap();
    assert_eq!(read_csv(&path).unwrap(), a);
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), a.len() + 1);
}
