//! The special-function layer underneath the kernel: partitions, zonal
//! polynomials, and the truncated two-matrix Bessel series.
//!
//! Run with: cargo run --release --example bessel_series

use hankel_cpd::specfun::{
    bessel_layer_sums, j_two_matrix, mv_gamma, partitions_of_degree, zonal_c, Partition,
    TruncationPolicy,
};

fn main() {
    // multivariate gamma
    println!("Gamma_1(2.5) = {:.10}", mv_gamma(2.5, 1).unwrap());
    println!("Gamma_2(1.5) = {:.10}  (= pi/2)", mv_gamma(1.5, 2).unwrap());

    // partitions indexing the series
    let parts = partitions_of_degree(6, 3);
    println!("\npartitions of 6 with at most 3 parts ({}):", parts.len());
    for p in &parts {
        print!("  {p}");
    }
    println!();

    // zonal polynomials: the degree-k family always sums to (trace)^k
    let eigs = [1.2, 0.4, 0.9];
    let k = 4;
    let total: f64 = partitions_of_degree(k, eigs.len())
        .iter()
        .map(|kappa| zonal_c(kappa, &eigs))
        .sum();
    let trace: f64 = eigs.iter().sum();
    println!("\nsum of zonal polynomials at degree {k}: {total:.12}");
    println!("trace^{k}                              : {:.12}", trace.powi(k as i32));

    // degree-1 zonal is the trace itself
    let c1 = zonal_c(&Partition::new(vec![1]).unwrap(), &eigs);
    println!("C_(1) = {c1:.12} (trace = {trace:.12})");

    // layer-by-layer series convergence
    let policy = TruncationPolicy::default();
    let sums = bessel_layer_sums(1.0, &[1.0, 0.5], &[0.8, 0.3], &policy).unwrap();
    println!("\nseries layers for a 2x2 pair (nu = 1):");
    let mut running = 0.0;
    for (deg, layer) in sums.layers.iter().enumerate() {
        running += layer;
        println!("  degree {deg:2}: layer = {layer:.3e}, partial sum = {running:.12}");
    }
    println!("truncated early: {}", sums.truncated);

    // scalar reduction: J_nu(-s, t) = Gamma(nu+1) (st)^(-nu/2) I_nu(2 sqrt(st))
    let v = j_two_matrix(1.0, &[1.0], &[1.0], &policy).unwrap();
    println!("\nm = 1, nu = 1, s = t = 1:");
    println!("  series value      : {:.12}", v.value);
    println!("  I_1(2) reference  : {:.12}", 1.590636854637329);
}
