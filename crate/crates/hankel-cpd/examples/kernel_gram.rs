//! Kernel evaluation and the cached Gram matrix: symmetry, orthogonal
//! invariance, positive semidefiniteness.
//!
//! Run with: cargo run --release --example kernel_gram

use hankel_cpd::distributions::{DistributionSpec, Sampler};
use hankel_cpd::kernel::{gram, kernel_h, KernelConfig, SpdMatrix};
use hankel_cpd::seeding;
use nalgebra::DMatrix;

fn main() {
    let cfg = KernelConfig::default();

    // scalar case has a classical closed form
    let x = SpdMatrix::from_rows(&[vec![1.0]]).unwrap();
    let h = kernel_h(&x, &x, &cfg).unwrap();
    println!("h(1, 1) at m = 1, nu = 1: {:.10}  (= e^-2 I_1(2))", h.value);

    // the kernel sees only eigenvalues: conjugating by a rotation changes nothing
    let y = SpdMatrix::from_rows(&[vec![2.0, 0.6], vec![0.6, 1.0]]).unwrap();
    let z = SpdMatrix::from_rows(&[vec![0.7, 0.1], vec![0.1, 0.9]]).unwrap();
    let theta: f64 = 0.83;
    let (s, c) = theta.sin_cos();
    let q = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
    let rotated = SpdMatrix::new(&q * y.entries() * q.transpose()).unwrap();
    println!(
        "h(y, z) = {:.12}, h(QyQ', z) = {:.12}",
        kernel_h(&y, &z, &cfg).unwrap().value,
        kernel_h(&rotated, &z, &cfg).unwrap().value,
    );

    // a Gram over Wishart draws, evaluated once and reused by everything else
    let sampler = Sampler::new(DistributionSpec::wishart(2, 2.5)).unwrap();
    let mut rng = seeding::stream(7, &[]);
    let sample = sampler.sample_n(12, &mut rng);
    let g = gram(&sample, &cfg).unwrap();
    println!("\nGram over {} Wishart draws:", g.n());
    for i in 0..4 {
        let row: Vec<String> = (0..4).map(|j| format!("{:.4}", g.value(i, j))).collect();
        println!("  [{}]  ...", row.join(", "));
    }
    println!("  min eigenvalue: {:.3e} (trace {:.3})", g.min_eigenvalue(), g.values().trace());
    println!("  truncated entries: {}", g.truncated_entries());
}
