use cavity_node::{
    eta_gen, eta_gen_n, eta_trap, eta_trap_n, synthesize_gen, synthesize_gen_n, synthesize_trap,
    synthesize_trap_n, MultiNodeParams, MultilevelError, NodeParams, PhotonEnvelope, TimeGrid, C64,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn gaussian(tau: f64, dt: f64) -> PhotonEnvelope {
    let grid = TimeGrid::spanning(-10.0 * tau, 10.0 * tau, dt).unwrap();
    PhotonEnvelope::gaussian(0.0, tau, grid).unwrap()
}

fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn lossy_node(delta: f64) -> NodeParams {
    NodeParams::new(1.0, 0.05, 0.2, C64::new(5.0, 0.0), delta).unwrap()
}

#[test]
fn single_level_trap_matches_scalar_pipeline() {
    let env = gaussian(10.0, 0.01);
    for delta in [0.0, 2.0] {
        let p = lossy_node(delta);
        let one = synthesize_trap(&env, &p).unwrap();
        let multi = synthesize_trap_n(&env, &p.to_multi()).unwrap();
        let r1: Vec<C64> = multi.trajectory.level(0);
        assert!(max_diff(&one.trajectory.g, &multi.trajectory.g) < 1e-6);
        assert!(max_diff(&one.trajectory.r, &r1) < 1e-6);
        assert!(max_diff(&one.trajectory.e, &multi.trajectory.e) < 1e-6);
        assert!(max_diff(&one.pulse.samples(), &multi.pulse.samples()) < 1e-6);
        assert!((one.efficiency - multi.efficiency).abs() < 1e-6);
        let eta_n = eta_trap_n(&multi.trajectory, &p.to_multi()).unwrap();
        assert!((eta_n - eta_trap(&env, &p)).abs() < 1e-6, "{eta_n} vs {}", eta_trap(&env, &p));
        assert!(!multi.dark_state_warning());
    }
}

#[test]
fn single_level_generation_matches_scalar_pipeline() {
    let env = gaussian(10.0, 0.01);
    for delta in [0.0, 3.0] {
        let p = lossy_node(delta);
        let one = synthesize_gen(&env, &p).unwrap();
        let multi = synthesize_gen_n(&env, &p.to_multi()).unwrap();
        let eta_n = eta_gen_n(&env, &p.to_multi()).unwrap();
        assert!((eta_n - eta_gen(&env, &p)).abs() < 1e-6);
        assert!((one.efficiency - multi.efficiency).abs() < 1e-6);
        assert!(max_diff(&one.trajectory.g, &multi.trajectory.g) < 1e-6);
        assert!(max_diff(&one.trajectory.e, &multi.trajectory.e) < 1e-6);
        assert!(max_diff(&one.pulse.samples(), &multi.pulse.samples()) < 1e-6);
    }
}

#[test]
fn lossless_levels_leave_only_cavity_loss() {
    let env = gaussian(20.0, 0.02);
    let m = MultiNodeParams::new(1.0, 0.3, vec![C64::new(4.0, 0.0)], vec![C64::new(1.0, 0.0)], vec![0.0], vec![0.0])
        .unwrap();
    let trap = synthesize_trap_n(&env, &m).unwrap();
    assert!((eta_trap_n(&trap.trajectory, &m).unwrap() - 0.7).abs() < 1e-12);
    assert!((trap.efficiency - 0.7).abs() < 1e-6);

    let m = MultiNodeParams { gamma_c: 0.5, ..m };
    assert!((eta_gen_n(&env, &m).unwrap() - 1.0 / 1.5).abs() < 1e-12);
}

fn random_node(rng: &mut ChaCha8Rng, n: usize) -> MultiNodeParams {
    let couplings = (0..n).map(|_| C64::new(rng.random_range(1.0..4.0), rng.random_range(-1.0..1.0))).collect();
    let raw: Vec<C64> = (0..n).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let norm = raw.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let branching = raw.iter().map(|x| x / norm).collect();
    let deltas = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
    let gammas = (0..n).map(|_| rng.random_range(0.05..0.5)).collect();
    MultiNodeParams::new(1.0, 0.02, couplings, branching, deltas, gammas).unwrap()
}

#[test]
fn extra_lossy_level_never_helps() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let env = gaussian(10.0, 0.01);
    let mut compared = 0;
    for _ in 0..10 {
        let base = random_node(&mut rng, 1);
        let mut more = base.clone();
        more.couplings.push(C64::new(rng.random_range(0.2..2.0), rng.random_range(-0.5..0.5)));
        more.branching.push(C64::new(0.0, 0.0));
        more.deltas.push(rng.random_range(-5.0..5.0));
        more.gammas.push(rng.random_range(0.05..0.5));
        let few = synthesize_trap_n(&env, &base).unwrap();
        let eta_few = eta_trap_n(&few.trajectory, &base).unwrap();
        if let Ok(many) = synthesize_trap_n(&env, &more) {
            let eta_many = eta_trap_n(&many.trajectory, &more).unwrap();
            assert!(eta_many <= eta_few + 1e-12, "{eta_many} > {eta_few}");
            compared += 1;
        }
        assert!(eta_gen_n(&env, &more).unwrap() <= eta_gen_n(&env, &base).unwrap() + 1e-12);
    }
    assert!(compared >= 5, "only {compared} feasible draws");
}

#[test]
fn fast_photon_is_infeasible() {
    let env = gaussian(0.2, 0.001);
    let m = lossy_node(0.0).to_multi();
    assert!(matches!(synthesize_trap_n(&env, &m), Err(MultilevelError::Infeasible { .. })));
}
