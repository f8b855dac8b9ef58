use gp_pde_bench::cases::Case;
use gp_pde_bench::config::RunConfig;
use gp_pde_bench::sweep::{scalability_sweep, SweepMode, DIRECT_CAP, SDD_CAP};

#[test]
fn memory_estimates_scale_linearly_and_quadratically() {
    let cfg = RunConfig::for_case(Case::PoissonDisk);
    let direct = scalability_sweep(&cfg, &[40, 80], SweepMode::Direct).unwrap();
    let sdd = scalability_sweep(&cfg, &[40, 80], SweepMode::SddAl).unwrap();
    let ratio = |t: &gp_pde_bench::sweep::SweepTable| t.rows[1].mem_bytes as f64 / t.rows[0].mem_bytes as f64;
    assert_eq!(ratio(&direct), 4.0);
    let r = ratio(&sdd);
    assert!(r > 1.0 && r < 2.5, "{r}");
}

#[test]
fn oversized_points_are_skipped_with_a_reason() {
    let cfg = RunConfig::for_case(Case::Heat1d);
    let t = scalability_sweep(&cfg, &[DIRECT_CAP + 1], SweepMode::Direct).unwrap();
    assert!(t.rows.is_empty());
    assert!(t.skipped[0].1.contains("capped"));
    let t = scalability_sweep(&cfg, &[5, SDD_CAP + 1], SweepMode::SddAl).unwrap();
    assert!(t.rows.is_empty());
    assert_eq!(t.skipped.len(), 2);
}

#[test]
fn sdd_al_error_within_1_5x_direct_on_disk() {
    let cfg = RunConfig::for_case(Case::PoissonDisk);
    let sizes = [73];
    let direct = scalability_sweep(&cfg, &sizes, SweepMode::Direct).unwrap();
    let sdd = scalability_sweep(&cfg, &sizes, SweepMode::SddAl).unwrap();
    let (d, s) = (&direct.rows[0], &sdd.rows[0]);
    assert_eq!(d.n, s.n);
    assert!(
        s.rel_mse <= 1.5 * d.rel_mse,
        "SDD+AL {:.4}% vs direct {:.4}% at N = {}",
        s.rel_mse,
        d.rel_mse,
        d.n
    );
}
