use patchstab::linear_stability::{
    assemble_galerkin_with, instability_certificate, solve_spectrum, GalerkinConfig, LinearizedOperator,
};
use patchstab::quadrature::Normalization;
use patchstab::Execution;

fn sup(h: &[f64]) -> f64 {
    h.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

#[test]
fn dominant_mode_grows_at_least_exponentially() {
    let cfg = GalerkinConfig {
        normalization: Normalization::Interval,
        ..GalerkinConfig::new(16, 400)
    };
    let rep = solve_spectrum(&assemble_galerkin_with(cfg).unwrap()).unwrap();
    let ev = instability_certificate(&rep, 3.0).unwrap();
    assert!(ev.unstable && ev.exceeds_one_fifteenth && ev.sup_norm_unstable);
    assert!(ev.lambda_im.abs() < 1e-12);

    let op = LinearizedOperator::new(401, 400, Execution::default()).unwrap();
    let h0 = rep.dominant_perturbation().values_on(op.grid()).unwrap();
    let hs = op.evolve_samples(&h0, &[0.0, 3.0], 0.01).unwrap();
    let ratio = sup(&hs[1]) / sup(&hs[0]);
    assert!(
        ratio >= (3.0 * rep.max_real).exp(),
        "ratio {ratio}, bound {}",
        (3.0 * rep.max_real).exp()
    );
}
