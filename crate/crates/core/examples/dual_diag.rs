// temporary diagnostic
use rayon::prelude::*;
use subdiff_core::rng::Streams;
use subdiff_core::sde::*;
use subdiff_core::spectral::*;
use subdiff_core::subordinator::BetaIndex;

fn main() {
    let basis = SpectralBasis::new(3, LambdaRule::Explicit(vec![0.5, 0.3, 0.2])).unwrap();
    let beta = BetaIndex::new(0.8).unwrap();
    let coeffs = SdeCoefficients {
        a: Generator::Diagonal(vec![0.5, 1.0, 2.0]),
        drift: StateDrift::Zero,
        diffusion: Diffusion::Constant(HsOperator::identity(3)),
        x0: InitialCondition::Point(HVector(vec![1.0, -0.5, 0.25])),
    };
    let streams = Streams::new(99, 1);
    let mut prev = 0.0;
    for (lvl, exp) in [7usize, 8, 9, 10, 11].into_iter().enumerate() {
        let steps = 1usize << exp;
        let sim = SimGrid::new(1.0, steps, 1.0 / steps as f64).unwrap();
        let gaps: Vec<f64> = (0..200u64).into_par_iter().map(|i| {
            let mut rng = streams.child(lvl as u64).replication(i);
            let noise = simulate_noise(beta, &basis, &sim, &mut rng).unwrap();
            duality_check(&coeffs, &noise, None).unwrap().sup_gap
        }).collect();
        let m = gaps.iter().sum::<f64>() / gaps.len() as f64;
        let ratio = if lvl > 0 { prev / m } else { f64::NAN };
        println!("2^{exp}: mean sup-gap {m:.6e}  ratio vs prev {ratio:.3}");
        prev = m;
    }
}
