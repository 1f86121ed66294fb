use mrbess::model::{validate_and_normalize, SolverConfig};
use mrbess::simulation::{gen_instance, SimulationSpec};
use mrbess::solver::TerminationStatus;

#[test]
#[ignore]
fn find_cycles() {
    let mut counts = [0usize; 4];
    for seed in 0..4000u64 {
        let mut spec = SimulationSpec::new(20, 12, 4, 6, 2, 0.05);
        spec.design_rho = 0.8;
        let Ok(instance) = gen_instance(&spec, seed) else { continue };
        let Ok(ds) = validate_and_normalize(&instance.x, &instance.y, false) else { continue };
        let config = SolverConfig::new(2, 3).with_tol(1e-12);
        let Ok(fit) = mrbess::solver::solve_fixed(&ds, &config) else { continue };
        let idx = match fit.status() {
            TerminationStatus::TolConverged => 0,
            TerminationStatus::ActiveSetFixedPoint => 1,
            TerminationStatus::CycleDetected => 2,
            TerminationStatus::MaxIter => 3,
        };
        counts[idx] += 1;
        if idx == 2 && counts[2] <= 5 {
            println!("cycle at seed {seed}, iterations {}", fit.iterations);
        }
    }
    println!("tol={} fixed={} cycle={} maxiter={}", counts[0], counts[1], counts[2], counts[3]);
}
