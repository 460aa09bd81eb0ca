use netloc::harness::{generate_network, GenerationSpec};
use netloc::lagrangian::LagrangianCoefficients;
use netloc::network::Configuration;
use netloc::solver::{smoothing_gradient_solve, BoxRegion, SolverConfig};
use rand::SeedableRng;

fn main() {
    for n in [4usize, 6, 8, 10, 12] {
        for gen_seed in [40 + n as u64, 140 + n as u64] {
            let gen = generate_network(&GenerationSpec::new(n, 0.7, 0.10, gen_seed)).unwrap();
            let net = gen.instance;
            for start_seed in 0..4u64 {
                for factor in [1.0, 4.0] {
                    let c0 = factor * n as f64 * 50.0;
                    let coef = LagrangianCoefficients::from_instance(&net, c0).unwrap();
                    let bx = BoxRegion::centered(10.0).unwrap();
                    let cfg = SolverConfig::default();
                    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(start_seed);
                    let x0 = Configuration::new(bx.sample(&mut r, net.dof())).unwrap();
                    let sol = smoothing_gradient_solve(&net, &coef, &x0, &bx, &cfg).unwrap();
                    if sol.converged {
                        println!("OK  n={n} gen={gen_seed} start={start_seed} c0={c0:.0} iters={} exact={:.4}", sol.outer_iterations, sol.exact_max_value);
                    } else {
                        println!("-   n={n} gen={gen_seed} start={start_seed} c0={c0:.0}");
                    }
                }
            }
        }
    }
}
