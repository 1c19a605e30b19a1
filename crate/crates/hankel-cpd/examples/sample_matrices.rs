//! The four matrix-distribution samplers and their moment identities.
//!
//! Run with: cargo run --release --example sample_matrices

use hankel_cpd::distributions::{DistributionSpec, Sampler};
use hankel_cpd::seeding;
use nalgebra::DMatrix;

fn empirical_mean(sampler: &Sampler, n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = seeding::stream(seed, &[]);
    let d = sampler.spec().dim;
    let mut acc = DMatrix::zeros(d, d);
    for _ in 0..n {
        acc += sampler.sample(&mut rng).entries();
    }
    acc / n as f64
}

fn show(label: &str, spec: DistributionSpec, expectation: &str, n: usize) {
    let sampler = Sampler::new(spec).unwrap();
    let mean = empirical_mean(&sampler, n, 123);
    println!("{label}  (expected mean: {expectation})");
    for r in 0..mean.nrows() {
        let row: Vec<String> = (0..mean.ncols()).map(|c| format!("{:+.4}", mean[(r, c)])).collect();
        println!("    [{}]", row.join(", "));
    }
}

fn main() {
    let draws = 20_000;
    println!("empirical means over {draws} draws\n");

    show(
        "W_2(2.5, I_2)",
        DistributionSpec::wishart(2, 2.5),
        "2.5 I  (a Sigma^-1)",
        draws,
    );
    show(
        "IW_2(4, 2.5 I_2)",
        DistributionSpec::inv_wishart(2, 4.0).with_scale(vec![vec![2.5, 0.0], vec![0.0, 2.5]]),
        "2.5 I  (Sigma / (a-d-1); entry variance is infinite at a = d + 2, so this converges slowly)",
        draws,
    );
    show(
        "CMU_2 (n_vec = 6)",
        DistributionSpec::cov_uniform(2),
        "I/12   (variance of U[0,1])",
        draws,
    );
    show(
        "CMT_2(5, I_2)",
        DistributionSpec::cov_t(2, 5.0),
        "(5/3) I  (a/(a-2) Sigma)",
        draws,
    );

    // heavy-tailed corner: a = 1 multivariate t has no moments, draws are
    // still valid SPD matrices
    let cauchy_like = Sampler::new(DistributionSpec::cov_t(2, 1.0)).unwrap();
    let mut rng = seeding::stream(5, &[]);
    let traces: Vec<String> = (0..5)
        .map(|_| format!("{:.3e}", cauchy_like.sample(&mut rng).trace()))
        .collect();
    println!("CMT_2(1, I_2) traces of five draws (no mean exists): [{}]", traces.join(", "));
}
